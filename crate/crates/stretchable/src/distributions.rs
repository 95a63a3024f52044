//! Token-length distributions and kernel frequency statistics.
//!
//! For one kernel, the corpus yields a distribution of token lengths.
//! [`LengthDistribution::split_stretched`] divides it into unstretched
//! and stretched tokens at the largest drop in log10 count between
//! consecutive occupied lengths, considering only the first ten
//! occupied lengths. [`rank_kernels`] orders kernels by their
//! stretched totals, and [`cutoff_fit`] locates the rank where counts
//! fall below a fraction of a power-law fit, separating bona fide
//! stretchable words from noise.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::corpus::TokenCountTable;
use crate::kernel::Kernel;

/// Failures constructing or analyzing distributions.
#[derive(Debug, Error, PartialEq)]
pub enum DistributionError {
    #[error("length distribution must not be empty")]
    Empty,
    #[error("length {length} has a zero count")]
    ZeroCount { length: usize },
    #[error("cutoff fit needs more than {fit_hi} ranked kernels, got {got}")]
    InsufficientData { fit_hi: usize, got: usize },
    #[error("cutoff fit bounds must satisfy 1 <= fit_lo < fit_hi, got {fit_lo}..{fit_hi}")]
    InvalidFitRange { fit_lo: usize, fit_hi: usize },
    #[error("rank {rank} has a non-positive count")]
    NonPositiveCount { rank: usize },
    #[error("malformed row at line {line}: {row:?}")]
    MalformedRow { line: usize, row: String },
}

/// How many tokens of each character length a kernel matched.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LengthDistribution {
    counts: BTreeMap<usize, u64>,
}

impl LengthDistribution {
    /// Groups a token table by token character length.
    pub fn from_tokens(tokens: &TokenCountTable) -> Result<Self, DistributionError> {
        let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
        for (token, count) in tokens.iter() {
            *counts.entry(token.len()).or_insert(0) += count;
        }
        if counts.is_empty() {
            return Err(DistributionError::Empty);
        }
        Ok(LengthDistribution { counts })
    }

    /// Builds a distribution from explicit `(length, count)` pairs.
    pub fn from_counts<I>(counts: I) -> Result<Self, DistributionError>
    where
        I: IntoIterator<Item = (usize, u64)>,
    {
        let mut map = BTreeMap::new();
        for (length, count) in counts {
            if count == 0 {
                return Err(DistributionError::ZeroCount { length });
            }
            *map.entry(length).or_insert(0) += count;
        }
        if map.is_empty() {
            return Err(DistributionError::Empty);
        }
        Ok(LengthDistribution { counts: map })
    }

    /// Iterates `(length, count)` in ascending length order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.counts.iter().map(|(l, c)| (*l, *c))
    }

    pub fn count_at(&self, length: usize) -> u64 {
        self.counts.get(&length).copied().unwrap_or(0)
    }

    pub fn min_length(&self) -> usize {
        *self
            .counts
            .keys()
            .next()
            .expect("distribution is non-empty")
    }

    pub fn max_length(&self) -> usize {
        *self
            .counts
            .keys()
            .next_back()
            .expect("distribution is non-empty")
    }

    /// Total number of tokens.
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    /// Splits the distribution at the largest drop in log10 count
    /// between consecutive occupied lengths, looking only at the first
    /// `min(10, n)` occupied lengths. Lengths up to and including the
    /// drop are unstretched; everything after is stretched. A
    /// single-length distribution is entirely unstretched.
    pub fn split_stretched(&self) -> StretchSplit {
        let lengths: Vec<usize> = self.counts.keys().copied().collect();
        let counts: Vec<u64> = self.counts.values().copied().collect();
        let window = lengths.len().min(10);
        let mut best_gap = 0usize;
        let mut best_drop = f64::NEG_INFINITY;
        for i in 0..window.saturating_sub(1) {
            let drop = (counts[i] as f64).log10() - (counts[i + 1] as f64).log10();
            if drop > best_drop {
                best_drop = drop;
                best_gap = i;
            }
        }
        let boundary = if lengths.len() == 1 { 1 } else { best_gap + 1 };
        let unstretched = lengths[..boundary].to_vec();
        let stretched = lengths[boundary..].to_vec();
        let n_u = unstretched.iter().map(|l| self.counts[l]).sum();
        let n_s = stretched.iter().map(|l| self.counts[l]).sum();
        StretchSplit {
            unstretched,
            stretched,
            n_u,
            n_s,
        }
    }

    /// Renders `length<TAB>count` rows in ascending length order.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (length, count) in self.iter() {
            out.push_str(&length.to_string());
            out.push('\t');
            out.push_str(&count.to_string());
            out.push('\n');
        }
        out
    }

    /// Parses the [`LengthDistribution::to_tsv`] format.
    pub fn from_tsv(text: &str) -> Result<Self, DistributionError> {
        let mut pairs = Vec::new();
        for (idx, row) in text.lines().enumerate() {
            if row.is_empty() {
                continue;
            }
            let malformed = || DistributionError::MalformedRow {
                line: idx + 1,
                row: row.to_string(),
            };
            let (length, count) = row.split_once('\t').ok_or_else(malformed)?;
            let length: usize = length.parse().map_err(|_| malformed())?;
            let count: u64 = count.parse().map_err(|_| malformed())?;
            pairs.push((length, count));
        }
        LengthDistribution::from_counts(pairs)
    }
}

impl Serialize for LengthDistribution {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Row {
            length: usize,
            count: u64,
        }
        serializer.collect_seq(self.iter().map(|(length, count)| Row { length, count }))
    }
}

/// The unstretched/stretched partition of a distribution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StretchSplit {
    /// Occupied lengths classified as unstretched, ascending.
    pub unstretched: Vec<usize>,
    /// Occupied lengths classified as stretched, ascending.
    pub stretched: Vec<usize>,
    /// Token total over unstretched lengths.
    pub n_u: u64,
    /// Token total over stretched lengths.
    pub n_s: u64,
}

impl StretchSplit {
    /// Smallest length classified as stretched, when any is.
    pub fn split_length(&self) -> Option<usize> {
        self.stretched.first().copied()
    }
}

/// A kernel with its rank by stretched-token total.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankedKernel {
    pub rank: usize,
    pub kernel: Kernel,
    pub n_s: u64,
}

/// Ranks kernels by descending stretched total; ties order
/// lexicographically by kernel text. Ranks start at 1.
pub fn rank_kernels(items: impl IntoIterator<Item = (Kernel, u64)>) -> Vec<RankedKernel> {
    let mut rows: Vec<(Kernel, u64, String)> = items
        .into_iter()
        .map(|(kernel, n_s)| {
            let text = kernel.to_string();
            (kernel, n_s, text)
        })
        .collect();
    rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.2.cmp(&b.2)));
    rows.into_iter()
        .enumerate()
        .map(|(i, (kernel, n_s, _))| RankedKernel {
            rank: i + 1,
            kernel,
            n_s,
        })
        .collect()
}

/// A power-law fit over the rank/count curve plus the located cutoff.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutoffFit {
    /// Slope of the ordinary-least-squares fit of log10 count against
    /// log10 rank.
    pub slope: f64,
    /// Intercept of the fit.
    pub intercept: f64,
    /// First rank past the fit window whose count falls below
    /// `factor` times the fit line, when one exists.
    pub cutoff: Option<usize>,
}

/// Fits log10 count against log10 rank over ranks
/// `fit_lo..=fit_hi` and scans ranks above `fit_hi` for the first
/// count below `factor` times the fit line.
///
/// `counts[i]` is the count at rank `i + 1`; every count must be
/// positive and more than `fit_hi` ranks must be present.
pub fn cutoff_fit(
    counts: &[f64],
    fit_lo: usize,
    fit_hi: usize,
    factor: f64,
) -> Result<CutoffFit, DistributionError> {
    if fit_lo < 1 || fit_lo >= fit_hi {
        return Err(DistributionError::InvalidFitRange { fit_lo, fit_hi });
    }
    if counts.len() <= fit_hi {
        return Err(DistributionError::InsufficientData {
            fit_hi,
            got: counts.len(),
        });
    }
    if let Some(i) = counts.iter().position(|&c| c.is_nan() || c <= 0.0) {
        return Err(DistributionError::NonPositiveCount { rank: i + 1 });
    }

    let points: Vec<(f64, f64)> = (fit_lo..=fit_hi)
        .map(|rank| ((rank as f64).log10(), counts[rank - 1].log10()))
        .collect();
    let n = points.len() as f64;
    let mean_x = points.iter().map(|(x, _)| x).sum::<f64>() / n;
    let mean_y = points.iter().map(|(_, y)| y).sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in &points {
        sxy += (x - mean_x) * (y - mean_y);
        sxx += (x - mean_x) * (x - mean_x);
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;

    let cutoff = (fit_hi + 1..=counts.len()).find(|&rank| {
        let fit = 10f64.powf(intercept + slope * (rank as f64).log10());
        counts[rank - 1] < factor * fit
    });
    Ok(CutoffFit {
        slope,
        intercept,
        cutoff,
    })
}

/// The cutoff rank per [`cutoff_fit`]; when no rank qualifies, one
/// past the end (`counts.len() + 1`).
pub fn cutoff_rank(
    counts: &[f64],
    fit_lo: usize,
    fit_hi: usize,
    factor: f64,
) -> Result<usize, DistributionError> {
    Ok(cutoff_fit(counts, fit_lo, fit_hi, factor)?
        .cutoff
        .unwrap_or(counts.len() + 1))
}

/// Everything the kernel index records for one kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelStats {
    pub kernel: Kernel,
    pub rank: usize,
    pub n_u: u64,
    pub n_s: u64,
    pub h: f64,
    pub h_alt: f64,
    pub gini: f64,
    pub rho: f64,
}

/// Renders the kernel index:
/// `kernel<TAB>pattern<TAB>rank<TAB>n_u<TAB>n_s<TAB>H<TAB>H_alt<TAB>G<TAB>rho`
/// with metrics in 5-decimal fixed point.
pub fn kernel_index_to_tsv(rows: &[KernelStats]) -> String {
    let mut out = String::new();
    for row in rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{:.5}\t{:.5}\t{:.5}\t{:.5}\n",
            row.kernel,
            row.kernel.pattern(),
            row.rank,
            row.n_u,
            row.n_s,
            row.h,
            row.h_alt,
            row.gini,
            row.rho,
        ));
    }
    out
}

/// Parses the [`kernel_index_to_tsv`] format.
pub fn kernel_index_from_tsv(text: &str) -> Result<Vec<KernelStats>, DistributionError> {
    let mut rows = Vec::new();
    for (idx, row) in text.lines().enumerate() {
        if row.is_empty() {
            continue;
        }
        let malformed = || DistributionError::MalformedRow {
            line: idx + 1,
            row: row.to_string(),
        };
        let fields: Vec<&str> = row.split('\t').collect();
        let [kernel, pattern, rank, n_u, n_s, h, h_alt, gini, rho] = fields.as_slice() else {
            return Err(malformed());
        };
        let kernel: Kernel = kernel.parse().map_err(|_| malformed())?;
        if kernel.pattern() != *pattern {
            return Err(malformed());
        }
        rows.push(KernelStats {
            rank: rank.parse().map_err(|_| malformed())?,
            n_u: n_u.parse().map_err(|_| malformed())?,
            n_s: n_s.parse().map_err(|_| malformed())?,
            h: h.parse().map_err(|_| malformed())?,
            h_alt: h_alt.parse().map_err(|_| malformed())?,
            gini: gini.parse().map_err(|_| malformed())?,
            rho: rho.parse().map_err(|_| malformed())?,
            kernel,
        });
    }
    Ok(rows)
}
