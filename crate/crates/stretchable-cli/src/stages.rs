//! The six pipeline stages behind the subcommands.
//!
//! Each stage reads the previous stage's files from the output
//! directory (every path overridable), writes its own files there,
//! and is deterministic: re-running on unchanged inputs produces
//! byte-identical outputs.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use thiserror::Error;

use stretchable::corpus::{
    batch_filter, letter_tokens, read_messages, scan_corpus, CorpusError, TokenCountTable,
};
use stretchable::diagnostics::{diagnose, DiagnoseError, DiagnoseOptions};
use stretchable::distributions::{
    cutoff_rank, kernel_index_from_tsv, kernel_index_to_tsv, rank_kernels, DistributionError,
    KernelStats, LengthDistribution,
};
use stretchable::kernel::{
    distill, merge_all, segment, DistillError, Kernel, Letter, ParseKernelError,
};
use stretchable::metrics::{
    balance_entropy, balance_entropy_alt, gini, stretch_ratio, MetricsError,
};
use stretchable::plotdata::{
    balance_plot_data, exclude_zero_entropy, jellyfish_data, HistogramScale, JellyfishConfig,
};
use stretchable::spelltree::{
    build_tree, default_trim_threshold, emit_json, emit_svg, layout, pair_spellings, SvgStyle,
    TreeError,
};

use crate::config::{ConfigError, PipelineConfig};

/// Anything a stage can fail with; the binary prints these as one
/// JSON line and exits 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("missing required {what}")]
    Missing { what: &'static str },
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
    #[error("in {path}: {source}")]
    Corpus { path: String, source: CorpusError },
    #[error("in {path} line {line}: {row:?} is not a valid {expected} row")]
    Row {
        path: String,
        line: usize,
        row: String,
        expected: &'static str,
    },
    #[error("in {path} line {line}: {source}")]
    KernelText {
        path: String,
        line: usize,
        source: ParseKernelError,
    },
    #[error("in {path} line {line}: pattern column does not match kernel {kernel}")]
    PatternMismatch {
        path: String,
        line: usize,
        kernel: String,
    },
    #[error("kernel argument {value:?}: {source}")]
    KernelArg {
        value: String,
        source: ParseKernelError,
    },
    #[error("kernel {kernel} has no rows in {path}")]
    UnknownKernel { kernel: String, path: String },
    #[error("in {path}: {source}")]
    Table {
        path: String,
        source: DistributionError,
    },
    #[error(transparent)]
    Distill(#[from] DistillError),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Diagnose(#[from] DiagnoseError),
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: display(path),
        source,
    })
}

fn open_reader(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| CliError::Read {
            path: display(path),
            source,
        })
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    let io_err = |source| CliError::Write {
        path: display(path),
        source,
    };
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(io_err)?;
        }
    }
    std::fs::write(path, contents).map_err(io_err)
}

fn require_input(cfg: &PipelineConfig) -> Result<&Path, CliError> {
    cfg.input
        .as_deref()
        .ok_or(CliError::Missing { what: "--input" })
}

fn pretty_json<T: serde::Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("documents serialize");
    text.push('\n');
    text
}

/// Scans the corpus for candidate stretched tokens and writes the
/// candidate table (plus the per-batch listing with --batched).
pub fn run_extract(cfg: &PipelineConfig) -> Result<(), CliError> {
    let input = require_input(cfg)?;
    let messages = read_messages(open_reader(input)?, cfg.batched);
    let scan =
        scan_corpus(messages, &cfg.candidates, cfg.batched).map_err(|source| CliError::Corpus {
            path: display(input),
            source,
        })?;
    write_file(&cfg.tokens_path(), &scan.counts.to_tsv())?;
    if let Some(per_batch) = &scan.per_batch {
        let mut out = String::new();
        for (batch, tokens) in per_batch {
            for token in tokens {
                writeln!(out, "{batch}\t{token}").expect("writes to a string succeed");
            }
        }
        write_file(&cfg.batches_path(), &out)?;
    }
    Ok(())
}

fn load_token_table(path: &Path) -> Result<TokenCountTable, CliError> {
    TokenCountTable::from_tsv(&read_file(path)?).map_err(|source| CliError::Corpus {
        path: display(path),
        source,
    })
}

fn load_batches(path: &Path) -> Result<BTreeMap<u64, BTreeSet<String>>, CliError> {
    let text = read_file(path)?;
    let mut batches: BTreeMap<u64, BTreeSet<String>> = BTreeMap::new();
    for (idx, row) in text.lines().enumerate() {
        if row.is_empty() {
            continue;
        }
        let malformed = || CliError::Row {
            path: display(path),
            line: idx + 1,
            row: row.to_string(),
            expected: "batch_id<TAB>token",
        };
        let (batch, token) = row.split_once('\t').ok_or_else(malformed)?;
        let batch: u64 = batch.parse().map_err(|_| malformed())?;
        if token.is_empty() || !token.bytes().all(|b| b.is_ascii_lowercase()) {
            return Err(malformed());
        }
        batches.entry(batch).or_default().insert(token.to_string());
    }
    Ok(batches)
}

/// Distills candidate tokens to kernels, applies the batch filter
/// when batching is on, merges, and writes the kernel list.
pub fn run_distill(cfg: &PipelineConfig) -> Result<(), CliError> {
    let kernels: Vec<Kernel> = if cfg.batched {
        let mut per_batch: BTreeMap<u64, BTreeSet<(Kernel, String)>> = BTreeMap::new();
        for (batch, tokens) in load_batches(&cfg.batches_path())? {
            for token in tokens {
                let kernel = distill(&token)?;
                per_batch.entry(batch).or_default().insert((kernel, token));
            }
        }
        batch_filter(&per_batch).into_iter().collect()
    } else {
        let tokens = load_token_table(&cfg.tokens_path())?;
        let distinct: BTreeSet<Kernel> = tokens
            .iter()
            .map(|(token, _)| distill(token))
            .collect::<Result<_, _>>()?;
        distinct.into_iter().collect()
    };
    let mut out = String::new();
    for kernel in merge_all(kernels) {
        writeln!(out, "{kernel}\t{}", kernel.pattern()).expect("writes to a string succeed");
    }
    write_file(&cfg.kernels_path(), &out)
}

fn load_kernels(path: &Path) -> Result<Vec<Kernel>, CliError> {
    let text = read_file(path)?;
    let mut kernels = Vec::new();
    for (idx, row) in text.lines().enumerate() {
        if row.is_empty() {
            continue;
        }
        let (kernel, pattern) = row.split_once('\t').ok_or_else(|| CliError::Row {
            path: display(path),
            line: idx + 1,
            row: row.to_string(),
            expected: "kernel<TAB>pattern",
        })?;
        let kernel: Kernel = kernel.parse().map_err(|source| CliError::KernelText {
            path: display(path),
            line: idx + 1,
            source,
        })?;
        if kernel.pattern() != pattern {
            return Err(CliError::PatternMismatch {
                path: display(path),
                line: idx + 1,
                kernel: kernel.to_string(),
            });
        }
        kernels.push(kernel);
    }
    Ok(kernels)
}

/// Sorted distinct letters plus the first letter: the cheap
/// pre-filter for pattern matching. A token can match a kernel only
/// if both agree.
fn letter_key(letters: &[Letter]) -> Option<(Letter, Vec<Letter>)> {
    let first = *letters.first()?;
    let mut distinct = letters.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    Some((first, distinct))
}

fn token_letters(token: &str) -> Vec<Letter> {
    token
        .chars()
        .map(|c| Letter::new(c).expect("tokens are lowercase letters"))
        .collect()
}

/// Re-matches the full corpus against every kernel's pattern and
/// writes the match table plus per-kernel length distributions.
pub fn run_match(cfg: &PipelineConfig) -> Result<(), CliError> {
    let kernels = load_kernels(&cfg.kernels_path())?;
    let input = require_input(cfg)?;

    let mut index: HashMap<(Letter, Vec<Letter>), Vec<usize>> = HashMap::new();
    for (i, kernel) in kernels.iter().enumerate() {
        let key = letter_key(&kernel.letter_positions()).expect("kernels are non-empty");
        index.entry(key).or_default().push(i);
    }

    // First count distinct tokens that could match some kernel, then
    // verify each distinct token once.
    let mut counts: HashMap<String, u64> = HashMap::new();
    for message in read_messages(open_reader(input)?, cfg.batched) {
        let message = message.map_err(|source| CliError::Corpus {
            path: display(input),
            source,
        })?;
        for token in letter_tokens(&message.text) {
            let key = letter_key(&token_letters(&token)).expect("letter tokens are non-empty");
            if index.contains_key(&key) {
                *counts.entry(token).or_insert(0) += 1;
            }
        }
    }

    let mut matches: BTreeMap<String, (usize, TokenCountTable)> = BTreeMap::new();
    for (token, count) in &counts {
        let key = letter_key(&token_letters(token)).expect("letter tokens are non-empty");
        for &i in &index[&key] {
            if segment(token, &kernels[i]).is_ok() {
                matches
                    .entry(kernels[i].to_string())
                    .or_insert_with(|| (i, TokenCountTable::new()))
                    .1
                    .add(token, *count)
                    .expect("letter tokens with positive counts are valid");
            }
        }
    }

    let mut out = String::new();
    for (kernel, (_, table)) in &matches {
        for (token, count) in table.iter() {
            writeln!(out, "{kernel}\t{token}\t{count}").expect("writes to a string succeed");
        }
    }
    write_file(&cfg.matches_path(), &out)?;
    let dir = cfg.output_dir.join("distributions");
    for (kernel, (_, table)) in &matches {
        let distribution = LengthDistribution::from_tokens(table)?;
        write_file(&dir.join(format!("{kernel}.tsv")), &distribution.to_tsv())?;
    }
    Ok(())
}

fn load_matches(path: &Path) -> Result<BTreeMap<String, (Kernel, TokenCountTable)>, CliError> {
    let text = read_file(path)?;
    let mut out: BTreeMap<String, (Kernel, TokenCountTable)> = BTreeMap::new();
    for (idx, row) in text.lines().enumerate() {
        if row.is_empty() {
            continue;
        }
        let malformed = || CliError::Row {
            path: display(path),
            line: idx + 1,
            row: row.to_string(),
            expected: "kernel<TAB>token<TAB>count",
        };
        let fields: Vec<&str> = row.split('\t').collect();
        let [kernel, token, count] = fields.as_slice() else {
            return Err(malformed());
        };
        let kernel: Kernel = kernel.parse().map_err(|source| CliError::KernelText {
            path: display(path),
            line: idx + 1,
            source,
        })?;
        let count: u64 = count.parse().map_err(|_| malformed())?;
        out.entry(kernel.to_string())
            .or_insert_with(|| (kernel, TokenCountTable::new()))
            .1
            .add(token, count)
            .map_err(|source| CliError::Corpus {
                path: display(path),
                source,
            })?;
    }
    Ok(out)
}

struct AnalyzedKernel {
    kernel: Kernel,
    tokens: TokenCountTable,
    n_u: u64,
    n_s: u64,
    h: f64,
    h_alt: f64,
    gini: f64,
    rho: f64,
}

/// Computes the ranked kernel index with balance and stretch metrics,
/// plus jellyfish and balance-plot documents.
pub fn run_analyze(cfg: &PipelineConfig) -> Result<(), CliError> {
    let mut analyzed: BTreeMap<String, AnalyzedKernel> = BTreeMap::new();
    for (text, (kernel, tokens)) in load_matches(&cfg.matches_path())? {
        let distribution = LengthDistribution::from_tokens(&tokens)?;
        let split = distribution.split_stretched();
        let h = match balance_entropy(&kernel, &tokens) {
            Ok(h) => h,
            Err(MetricsError::NoStretchedTokens { .. }) => {
                eprintln!("warning: kernel {kernel} has no stretched tokens; skipped");
                continue;
            }
            Err(other) => return Err(other.into()),
        };
        analyzed.insert(
            text,
            AnalyzedKernel {
                h,
                h_alt: balance_entropy_alt(&kernel, &tokens)?,
                gini: gini(&distribution),
                rho: stretch_ratio(split.n_s, split.n_u)?,
                n_u: split.n_u,
                n_s: split.n_s,
                kernel,
                tokens,
            },
        );
    }

    let ranked = rank_kernels(analyzed.values().map(|a| (a.kernel.clone(), a.n_s)));
    let mut stats: Vec<KernelStats> = ranked
        .into_iter()
        .map(|entry| {
            let a = &analyzed[&entry.kernel.to_string()];
            KernelStats {
                kernel: entry.kernel,
                rank: entry.rank,
                n_u: a.n_u,
                n_s: a.n_s,
                h: a.h,
                h_alt: a.h_alt,
                gini: a.gini,
                rho: a.rho,
            }
        })
        .collect();
    if cfg.cutoff {
        let counts: Vec<f64> = stats.iter().map(|s| s.n_s as f64).collect();
        let cutoff = cutoff_rank(&counts, cfg.fit_lo, cfg.fit_hi, cfg.cutoff_factor)?;
        stats.truncate(cutoff - 1);
    }
    write_file(&cfg.index_path(), &kernel_index_to_tsv(&stats))?;

    let jellyfish = |values: Vec<f64>, scale: HistogramScale| {
        jellyfish_data(
            &values,
            &JellyfishConfig {
                window: cfg.window,
                scale,
                bins: 20,
            },
        )
    };
    let nonzero = exclude_zero_entropy(&stats);
    let dir = cfg.output_dir.join("jellyfish");
    let documents = [
        (
            "h",
            jellyfish(stats.iter().map(|s| s.h).collect(), HistogramScale::Linear),
        ),
        (
            "h_nonzero",
            jellyfish(
                nonzero.iter().map(|s| s.h).collect(),
                HistogramScale::Linear,
            ),
        ),
        (
            "h_alt",
            jellyfish(
                stats.iter().map(|s| s.h_alt).collect(),
                HistogramScale::Linear,
            ),
        ),
        (
            "h_alt_nonzero",
            jellyfish(
                nonzero.iter().map(|s| s.h_alt).collect(),
                HistogramScale::Linear,
            ),
        ),
        (
            "gini",
            jellyfish(stats.iter().map(|s| s.gini).collect(), HistogramScale::Log),
        ),
        (
            "rho",
            jellyfish(stats.iter().map(|s| s.rho).collect(), HistogramScale::Log),
        ),
    ];
    for (name, data) in documents {
        write_file(&dir.join(format!("{name}.json")), &pretty_json(&data))?;
    }

    let dir = cfg.output_dir.join("balance");
    for entry in &stats {
        let a = &analyzed[&entry.kernel.to_string()];
        let data = balance_plot_data(&a.kernel, &a.tokens, cfg.bin_growth)?;
        write_file(
            &dir.join(format!("{}.json", entry.kernel)),
            &pretty_json(&data),
        )?;
    }
    Ok(())
}

/// Renders a spelling tree (SVG and JSON) for each kernel with
/// exactly one two-letter element.
pub fn run_tree(cfg: &PipelineConfig) -> Result<(), CliError> {
    let matches_path = cfg.matches_path();
    let matches = load_matches(&matches_path)?;
    let selected: Vec<&String> = match &cfg.kernel {
        Some(wanted) => {
            if !matches.contains_key(wanted) {
                return Err(CliError::UnknownKernel {
                    kernel: wanted.clone(),
                    path: display(&matches_path),
                });
            }
            matches.keys().filter(|k| *k == wanted).collect()
        }
        None => matches.keys().collect(),
    };
    let dir = cfg.output_dir.join("trees");
    for text in selected {
        let (kernel, tokens) = &matches[text];
        if kernel.pair_indices().len() != 1 {
            eprintln!(
                "warning: kernel {kernel} does not have exactly one two-letter element; no tree emitted"
            );
            continue;
        }
        let split = LengthDistribution::from_tokens(tokens)?.split_stretched();
        let tau = cfg
            .trim
            .unwrap_or_else(|| default_trim_threshold(split.n_s));
        let spellings = pair_spellings(kernel, tokens, tau)?;
        let laid = layout(&build_tree(kernel, &spellings, tau)?);
        write_file(
            &dir.join(format!("{text}.svg")),
            &emit_svg(&laid, &SvgStyle::default()),
        )?;
        let mut json = emit_json(&laid);
        json.push('\n');
        write_file(&dir.join(format!("{text}.json")), &json)?;
    }
    Ok(())
}

fn parse_kernel_arg(value: &str) -> Result<Kernel, CliError> {
    value.parse().map_err(|source| CliError::KernelArg {
        value: value.to_string(),
        source,
    })
}

/// Assembles and writes the diagnostic report for one kernel.
pub fn run_diagnose(cfg: &PipelineConfig) -> Result<(), CliError> {
    let wanted = cfg
        .kernel
        .as_deref()
        .ok_or(CliError::Missing { what: "--kernel" })?;
    let kernel = parse_kernel_arg(wanted)?;
    let matches_path = cfg.matches_path();
    let matches = load_matches(&matches_path)?;
    let (kernel, tokens) =
        matches
            .get(&kernel.to_string())
            .ok_or_else(|| CliError::UnknownKernel {
                kernel: kernel.to_string(),
                path: display(&matches_path),
            })?;
    let compare: Vec<Kernel> = cfg
        .compare
        .iter()
        .map(|value| parse_kernel_arg(value))
        .collect::<Result<_, _>>()?;
    // The index is optional context: without one, ranks are null.
    let index_path = cfg.index_path();
    let index: Vec<KernelStats> = if cfg.index.is_some() || index_path.exists() {
        kernel_index_from_tsv(&read_file(&index_path)?).map_err(|source| CliError::Table {
            path: display(&index_path),
            source,
        })?
    } else {
        Vec::new()
    };
    let options = DiagnoseOptions {
        growth: cfg.bin_growth,
        trim: cfg.trim,
    };
    let report = diagnose(kernel, tokens, &compare, &index, &options)?;
    write_file(
        &cfg.output_dir
            .join("reports")
            .join(format!("{kernel}.json")),
        &pretty_json(&report),
    )
}
