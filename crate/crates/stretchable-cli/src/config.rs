//! Pipeline configuration: flags, config file, and defaults.
//!
//! Every stage accepts the same flag set. Values resolve with flag >
//! config file > default precedence; the config file is `key=value`
//! lines with `#` comments.

use std::path::{Path, PathBuf};

use clap::Args;
use thiserror::Error;

use stretchable::corpus::{CandidateConfig, ConfigError as CandidateError};

/// Failures while resolving the configuration.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("config file {path} line {line}: expected key=value, got {text:?}")]
    Malformed {
        path: String,
        line: usize,
        text: String,
    },
    #[error("config file {path} line {line}: unknown key {key:?}")]
    UnknownKey {
        path: String,
        line: usize,
        key: String,
    },
    #[error("config value {key}={value:?} is not valid")]
    Value { key: String, value: String },
    #[error(transparent)]
    Candidate(#[from] CandidateError),
    #[error("{what} must satisfy {requirement}")]
    Range {
        what: &'static str,
        requirement: &'static str,
    },
}

/// Command-line flags shared by every subcommand. Optional fields
/// fall back to the config file, then to defaults.
#[derive(Args, Clone, Debug, Default)]
pub struct StageArgs {
    /// Corpus file: one message per line, or batch_id<TAB>message
    /// with --batched.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Directory stage outputs land in (default ".").
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// key=value config file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Minimum candidate token length (default 30).
    #[arg(long)]
    pub min_total: Option<usize>,
    /// Window repeat length after the leading pair (default 28).
    #[arg(long)]
    pub pair_repeat: Option<usize>,
    /// First rank of the cutoff fit range (default 10).
    #[arg(long)]
    pub fit_lo: Option<usize>,
    /// Last rank of the cutoff fit range (default 1000).
    #[arg(long)]
    pub fit_hi: Option<usize>,
    /// Cutoff factor below the fitted power law (default 0.1).
    #[arg(long)]
    pub cutoff_factor: Option<f64>,
    /// Spelling-tree trim threshold; defaults to the fourth root of
    /// the stretched token total.
    #[arg(long)]
    pub trim: Option<f64>,
    /// Balance-plot bin growth factor (default 1.5).
    #[arg(long)]
    pub bin_growth: Option<f64>,
    /// Jellyfish rolling window in ranks (default 500).
    #[arg(long)]
    pub window: Option<usize>,
    /// Treat the corpus as batch_id<TAB>message rows and apply the
    /// batch filter when distilling.
    #[arg(long)]
    pub batched: bool,
    /// Truncate the kernel index at the fitted frequency cutoff.
    #[arg(long)]
    pub cutoff: bool,
    /// Candidate table path (default <output-dir>/tokens.tsv).
    #[arg(long)]
    pub tokens: Option<PathBuf>,
    /// Batch listing path (default <output-dir>/batches.tsv).
    #[arg(long)]
    pub batches: Option<PathBuf>,
    /// Kernel list path (default <output-dir>/kernels.tsv).
    #[arg(long)]
    pub kernels: Option<PathBuf>,
    /// Match table path (default <output-dir>/matches.tsv).
    #[arg(long)]
    pub matches: Option<PathBuf>,
    /// Kernel index path (default <output-dir>/index.tsv).
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Kernel to diagnose, or to restrict tree rendering to.
    #[arg(long)]
    pub kernel: Option<String>,
    /// Comparison kernels for diagnose (repeatable).
    #[arg(long)]
    pub compare: Vec<String>,
}

/// Values read from the config file.
#[derive(Debug, Default)]
struct FileValues {
    input: Option<PathBuf>,
    output_dir: Option<PathBuf>,
    min_total: Option<usize>,
    pair_repeat: Option<usize>,
    fit_lo: Option<usize>,
    fit_hi: Option<usize>,
    cutoff_factor: Option<f64>,
    trim: Option<f64>,
    bin_growth: Option<f64>,
    window: Option<usize>,
    batched: Option<bool>,
    cutoff: Option<bool>,
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::Value {
        key: key.to_string(),
        value: value.to_string(),
    })
}

fn load_file(path: &Path) -> Result<FileValues, ConfigError> {
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: display.clone(),
        source,
    })?;
    let mut values = FileValues::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Malformed {
                path: display,
                line: idx + 1,
                text: raw.to_string(),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        match key {
            "input" => values.input = Some(PathBuf::from(value)),
            "output_dir" => values.output_dir = Some(PathBuf::from(value)),
            "min_total" => values.min_total = Some(parse_value(key, value)?),
            "pair_repeat" => values.pair_repeat = Some(parse_value(key, value)?),
            "fit_lo" => values.fit_lo = Some(parse_value(key, value)?),
            "fit_hi" => values.fit_hi = Some(parse_value(key, value)?),
            "cutoff_factor" => values.cutoff_factor = Some(parse_value(key, value)?),
            "trim" => values.trim = Some(parse_value(key, value)?),
            "bin_growth" => values.bin_growth = Some(parse_value(key, value)?),
            "window" => values.window = Some(parse_value(key, value)?),
            "batched" => values.batched = Some(parse_value(key, value)?),
            "cutoff" => values.cutoff = Some(parse_value(key, value)?),
            _ => {
                return Err(ConfigError::UnknownKey {
                    path: display,
                    line: idx + 1,
                    key: key.to_string(),
                })
            }
        }
    }
    Ok(values)
}

/// Fully resolved configuration for one stage run.
#[derive(Clone, Debug)]
pub struct PipelineConfig {
    pub input: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub candidates: CandidateConfig,
    pub fit_lo: usize,
    pub fit_hi: usize,
    pub cutoff_factor: f64,
    pub trim: Option<f64>,
    pub bin_growth: f64,
    pub window: usize,
    pub batched: bool,
    pub cutoff: bool,
    pub tokens: Option<PathBuf>,
    pub batches: Option<PathBuf>,
    pub kernels: Option<PathBuf>,
    pub matches: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub kernel: Option<String>,
    pub compare: Vec<String>,
}

impl PipelineConfig {
    /// Resolves flags against the config file (when given) and the
    /// defaults, then validates every threshold.
    pub fn resolve(args: &StageArgs) -> Result<Self, ConfigError> {
        let file = match &args.config {
            Some(path) => load_file(path)?,
            None => FileValues::default(),
        };
        // When only one of the candidate window values is given, the
        // other follows from min_total = pair_repeat + 2.
        let (min_total, pair_repeat) = match (
            args.min_total.or(file.min_total),
            args.pair_repeat.or(file.pair_repeat),
        ) {
            (None, None) => (30, 28),
            (Some(m), None) => (m, m.saturating_sub(2)),
            (None, Some(p)) => (p + 2, p),
            (Some(m), Some(p)) => (m, p),
        };
        let candidates = CandidateConfig::new(min_total, pair_repeat)?;
        let fit_lo = args.fit_lo.or(file.fit_lo).unwrap_or(10);
        let fit_hi = args.fit_hi.or(file.fit_hi).unwrap_or(1000);
        if fit_lo < 1 || fit_lo >= fit_hi {
            return Err(ConfigError::Range {
                what: "fit range",
                requirement: "1 <= fit_lo < fit_hi",
            });
        }
        let cutoff_factor = args.cutoff_factor.or(file.cutoff_factor).unwrap_or(0.1);
        if !(cutoff_factor > 0.0 && cutoff_factor.is_finite()) {
            return Err(ConfigError::Range {
                what: "cutoff factor",
                requirement: "a positive finite number",
            });
        }
        let bin_growth = args.bin_growth.or(file.bin_growth).unwrap_or(1.5);
        if !(bin_growth > 0.0 && bin_growth.is_finite()) {
            return Err(ConfigError::Range {
                what: "bin growth",
                requirement: "a positive finite number",
            });
        }
        let trim = args.trim.or(file.trim);
        if let Some(trim) = trim {
            if !(trim >= 0.0 && trim.is_finite()) {
                return Err(ConfigError::Range {
                    what: "trim threshold",
                    requirement: "a non-negative finite number",
                });
            }
        }
        let window = args.window.or(file.window).unwrap_or(500);
        if window == 0 {
            return Err(ConfigError::Range {
                what: "window",
                requirement: "at least 1",
            });
        }
        Ok(PipelineConfig {
            input: args.input.clone().or(file.input),
            output_dir: args
                .output_dir
                .clone()
                .or(file.output_dir)
                .unwrap_or_else(|| PathBuf::from(".")),
            candidates,
            fit_lo,
            fit_hi,
            cutoff_factor,
            trim,
            bin_growth,
            window,
            batched: args.batched || file.batched.unwrap_or(false),
            cutoff: args.cutoff || file.cutoff.unwrap_or(false),
            tokens: args.tokens.clone(),
            batches: args.batches.clone(),
            kernels: args.kernels.clone(),
            matches: args.matches.clone(),
            index: args.index.clone(),
            kernel: args.kernel.clone(),
            compare: args.compare.clone(),
        })
    }

    pub fn tokens_path(&self) -> PathBuf {
        self.tokens
            .clone()
            .unwrap_or_else(|| self.output_dir.join("tokens.tsv"))
    }

    pub fn batches_path(&self) -> PathBuf {
        self.batches
            .clone()
            .unwrap_or_else(|| self.output_dir.join("batches.tsv"))
    }

    pub fn kernels_path(&self) -> PathBuf {
        self.kernels
            .clone()
            .unwrap_or_else(|| self.output_dir.join("kernels.tsv"))
    }

    pub fn matches_path(&self) -> PathBuf {
        self.matches
            .clone()
            .unwrap_or_else(|| self.output_dir.join("matches.tsv"))
    }

    pub fn index_path(&self) -> PathBuf {
        self.index
            .clone()
            .unwrap_or_else(|| self.output_dir.join("index.tsv"))
    }
}
