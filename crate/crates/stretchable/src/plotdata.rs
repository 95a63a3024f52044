//! Plot-ready data for balance plots and jellyfish plots.
//!
//! Balance plots show how each kernel letter position stretches as
//! tokens get longer: token lengths partition into bins of
//! geometrically growing width and each bin carries the average
//! per-position letter counts. Jellyfish plots track a metric across
//! the kernel ranking: rolling windows yield nine decile curves (the
//! tentacles) plus a histogram of the metric (the head).
//!
//! Both structures serialize to JSON with a fixed field order so
//! emitted documents are byte-stable.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::TokenCountTable;
use crate::distributions::KernelStats;
use crate::kernel::Kernel;
use crate::metrics::{char_stretch_profile, Grouping, MetricsError};

/// One token-length bin of a balance plot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BalanceBin {
    /// Smallest token length in the bin (inclusive).
    pub lo: usize,
    /// Largest token length in the bin (inclusive).
    pub hi: usize,
    /// Number of tokens in the bin.
    pub count: u64,
    /// Mean letter count per kernel letter position.
    pub means: Vec<f64>,
}

/// Balance-plot data: per-bin average stretch vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BalancePlotData {
    pub bins: Vec<BalanceBin>,
}

/// Computes balance-plot bins for one kernel.
///
/// Bin edges start at the kernel's letter length and grow by `growth`
/// per step (always by at least one): `e_0 = L`,
/// `e_{i+1} = max(e_i + 1, ceil(e_i * growth))`, clipped at the
/// longest observed token. Bins are the inclusive intervals
/// `[e_0, e_1], [e_1 + 1, e_2], ...`; emission stops at the first bin
/// holding no tokens. Every token must match the kernel.
pub fn balance_plot_data(
    kernel: &Kernel,
    tokens: &TokenCountTable,
    growth: f64,
) -> Result<BalancePlotData, MetricsError> {
    let max_len = match tokens.iter().map(|(t, _)| t.len()).max() {
        Some(m) => m,
        None => return Ok(BalancePlotData { bins: Vec::new() }),
    };
    let mut edges = vec![kernel.letter_len()];
    while *edges.last().expect("edges start non-empty") < max_len {
        let last = *edges.last().expect("edges stay non-empty");
        let grown = (last as f64 * growth).ceil() as usize;
        edges.push(grown.max(last + 1).min(max_len));
    }
    let mut intervals = Vec::new();
    match edges.as_slice() {
        [only] => intervals.push((*only, *only)),
        [first, second, rest @ ..] => {
            intervals.push((*first, *second));
            let mut prev = *second;
            for &edge in rest {
                intervals.push((prev + 1, edge));
                prev = edge;
            }
        }
        [] => unreachable!("edges start non-empty"),
    }
    let profile = char_stretch_profile(kernel, tokens, Grouping::Bins(&intervals))?;
    let bins = profile
        .groups
        .into_iter()
        .take_while(|group| group.token_count > 0)
        .map(|group| BalanceBin {
            lo: group.lo,
            hi: group.hi,
            count: group.token_count,
            means: group.means,
        })
        .collect();
    Ok(BalancePlotData { bins })
}

/// How jellyfish histogram bins divide the value range.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HistogramScale {
    /// Equal-width bins over `[min, max]`.
    Linear,
    /// Equal-width bins in `log10` space over the positive values;
    /// non-positive values are not counted.
    Log,
}

/// Parameters for [`jellyfish_data`].
#[derive(Clone, Copy, Debug)]
pub struct JellyfishConfig {
    /// Rolling window size in ranks.
    pub window: usize,
    /// Histogram bin scale.
    pub scale: HistogramScale,
    /// Histogram bin count.
    pub bins: usize,
}

impl Default for JellyfishConfig {
    fn default() -> Self {
        JellyfishConfig {
            window: 500,
            scale: HistogramScale::Linear,
            bins: 20,
        }
    }
}

/// One histogram bin; `hi` is exclusive except for the last bin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
}

/// Jellyfish-plot data: one decile curve per quantile plus the
/// metric's histogram.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JellyfishData {
    /// Keys "0.1" through "0.9"; each curve has one value per rank.
    pub deciles: BTreeMap<String, Vec<f64>>,
    pub histogram: Vec<HistogramBin>,
}

/// Linear-interpolation quantile of an ascending slice.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let m = sorted.len();
    let h = (m - 1) as f64 * q;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if frac == 0.0 || lo + 1 >= m {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

fn histogram(values: &[f64], scale: HistogramScale, bins: usize) -> Vec<HistogramBin> {
    let kept: Vec<f64> = match scale {
        HistogramScale::Linear => values.to_vec(),
        HistogramScale::Log => values.iter().copied().filter(|&v| v > 0.0).collect(),
    };
    if kept.is_empty() || bins == 0 {
        return Vec::new();
    }
    let project = |v: f64| match scale {
        HistogramScale::Linear => v,
        HistogramScale::Log => v.log10(),
    };
    let unproject = |v: f64| match scale {
        HistogramScale::Linear => v,
        HistogramScale::Log => 10f64.powf(v),
    };
    let min = kept.iter().copied().fold(f64::INFINITY, f64::min);
    let max = kept.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if min == max {
        return vec![HistogramBin {
            lo: min,
            hi: max,
            count: kept.len() as u64,
        }];
    }
    let (pmin, pmax) = (project(min), project(max));
    let width = (pmax - pmin) / bins as f64;
    let mut counts = vec![0u64; bins];
    for &v in &kept {
        let k = (((project(v) - pmin) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| HistogramBin {
            lo: unproject(pmin + k as f64 * width),
            hi: unproject(pmin + (k + 1) as f64 * width),
            count,
        })
        .collect()
}

/// Computes rolling decile curves and a histogram for a metric listed
/// in rank order.
///
/// At rank `i` the window covers `min(window, n)` values centered on
/// `i`, clipped at both ends so it always holds that many values.
/// Deciles interpolate linearly between order statistics. Empty input
/// yields empty curves.
pub fn jellyfish_data(values: &[f64], config: &JellyfishConfig) -> JellyfishData {
    let n = values.len();
    let mut deciles: BTreeMap<String, Vec<f64>> = (1..=9)
        .map(|d| (format!("0.{d}"), Vec::with_capacity(n)))
        .collect();
    if n > 0 {
        let w = config.window.min(n).max(1);
        let half = w / 2;
        let mut start = 0usize;
        let mut sorted: Vec<f64> = values[..w].to_vec();
        sorted.sort_by(f64::total_cmp);
        for i in 0..n {
            let target = i.saturating_sub(half).min(n - w);
            while start < target {
                let out = sorted
                    .binary_search_by(|x| x.total_cmp(&values[start]))
                    .expect("outgoing value is in the window");
                sorted.remove(out);
                let incoming = values[start + w];
                let at = sorted
                    .binary_search_by(|x| x.total_cmp(&incoming))
                    .unwrap_or_else(|e| e);
                sorted.insert(at, incoming);
                start += 1;
            }
            for d in 1..=9 {
                let q = d as f64 / 10.0;
                deciles
                    .get_mut(&format!("0.{d}"))
                    .expect("decile keys are preallocated")
                    .push(quantile(&sorted, q));
            }
        }
    }
    JellyfishData {
        deciles,
        histogram: histogram(values, config.scale, config.bins),
    }
}

/// Drops kernels whose per-length balance entropy is exactly zero,
/// preserving order. The returned kernels keep their original `rank`
/// values; rolling windows over the returned list treat positions as
/// dense, so every window still holds `window` kernels.
pub fn exclude_zero_entropy(stats: &[KernelStats]) -> Vec<KernelStats> {
    stats.iter().filter(|s| s.h != 0.0).cloned().collect()
}
