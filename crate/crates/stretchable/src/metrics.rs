//! Balance and stretch metrics for one kernel.
//!
//! Balance asks *which* letters of a kernel stretch:
//!
//! - [`balance_entropy`] (H) groups tokens by exact length, averages
//!   each group's per-position letter counts, subtracts the one
//!   mandatory occurrence, normalizes each group to a probability
//!   vector, averages the groups with equal weight, and reports the
//!   entropy of the result normalized by `log2` of the kernel's
//!   letter-position count.
//! - [`balance_entropy_alt`] (H_alt) instead averages over all
//!   stretched tokens at once, count-weighted, which answers how
//!   balanced a randomly sampled token looks.
//!
//! Stretch asks *how far* tokens stretch: [`gini`] is the Gini
//! coefficient of the token-length population and [`stretch_ratio`]
//! is the ratio of stretched to unstretched token totals.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::corpus::TokenCountTable;
use crate::distributions::LengthDistribution;
use crate::kernel::{segment, Kernel};

/// Failures while computing metrics.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("token {token:?} does not match kernel {kernel}")]
    TokenMismatch { token: String, kernel: String },
    #[error("kernel {kernel} has no stretched tokens, balance is undefined")]
    NoStretchedTokens { kernel: String },
    #[error("stretch ratio is undefined when no tokens are unstretched")]
    UndefinedRatio,
}

/// How tokens group in a [`StretchProfile`].
#[derive(Clone, Copy, Debug)]
pub enum Grouping<'a> {
    /// One group per occupied exact token length.
    PerLength,
    /// One group per inclusive `(lo, hi)` length interval, in the
    /// given order. Tokens outside every interval are not counted.
    Bins(&'a [(usize, usize)]),
}

/// Average per-position letter counts for one token group.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileGroup {
    /// Smallest length in the group.
    pub lo: usize,
    /// Largest length in the group (equals `lo` for exact lengths).
    pub hi: usize,
    /// Number of tokens in the group.
    pub token_count: u64,
    /// Count-weighted mean letter count per kernel letter position;
    /// all zeros when the group is empty.
    pub means: Vec<f64>,
}

/// Per-group average stretch across kernel letter positions.
#[derive(Clone, Debug, PartialEq)]
pub struct StretchProfile {
    pub groups: Vec<ProfileGroup>,
}

/// Sums of per-position counts and token weights, grouped by exact
/// token length.
fn position_sums(
    kernel: &Kernel,
    tokens: &TokenCountTable,
) -> Result<BTreeMap<usize, (Vec<u64>, u64)>, MetricsError> {
    let positions = kernel.letter_len();
    let mut groups: BTreeMap<usize, (Vec<u64>, u64)> = BTreeMap::new();
    for (token, count) in tokens.iter() {
        let seg = segment(token, kernel).map_err(|_| MetricsError::TokenMismatch {
            token: token.to_string(),
            kernel: kernel.to_string(),
        })?;
        let (sums, weight) = groups
            .entry(token.len())
            .or_insert_with(|| (vec![0; positions], 0));
        for (slot, c) in sums.iter_mut().zip(seg.position_counts()) {
            *slot += c * count;
        }
        *weight += count;
    }
    Ok(groups)
}

/// Computes the average stretch per kernel letter position for each
/// token group. Every token must match the kernel.
pub fn char_stretch_profile(
    kernel: &Kernel,
    tokens: &TokenCountTable,
    grouping: Grouping<'_>,
) -> Result<StretchProfile, MetricsError> {
    let positions = kernel.letter_len();
    let by_length = position_sums(kernel, tokens)?;
    let to_means = |sums: &[u64], weight: u64| -> Vec<f64> {
        if weight == 0 {
            vec![0.0; positions]
        } else {
            sums.iter().map(|&s| s as f64 / weight as f64).collect()
        }
    };
    let groups = match grouping {
        Grouping::PerLength => by_length
            .iter()
            .map(|(&length, (sums, weight))| ProfileGroup {
                lo: length,
                hi: length,
                token_count: *weight,
                means: to_means(sums, *weight),
            })
            .collect(),
        Grouping::Bins(bins) => bins
            .iter()
            .map(|&(lo, hi)| {
                let mut sums = vec![0u64; positions];
                let mut weight = 0u64;
                for (_, (group_sums, group_weight)) in by_length.range(lo..=hi) {
                    for (slot, s) in sums.iter_mut().zip(group_sums) {
                        *slot += s;
                    }
                    weight += group_weight;
                }
                ProfileGroup {
                    lo,
                    hi,
                    token_count: weight,
                    means: to_means(&sums, weight),
                }
            })
            .collect(),
    };
    Ok(StretchProfile { groups })
}

/// Entropy of `p` normalized by `log2(positions)`; exactly zero when
/// only one position is occupied or there is a single position.
fn normalized_entropy(p: &[f64], positions: usize) -> f64 {
    let occupied = p.iter().filter(|&&x| x > 0.0).count();
    if positions <= 1 || occupied <= 1 {
        return 0.0;
    }
    let h: f64 = -p
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.log2())
        .sum::<f64>();
    h / (positions as f64).log2()
}

/// Per-length-group balance entropy H.
///
/// Groups whose length equals the kernel's letter count carry no
/// stretch and are discarded; failing that for every group is an
/// error. Each group's mean letter counts, less the mandatory single
/// occurrence, normalize to a probability vector; the vectors average
/// with equal group weight.
pub fn balance_entropy(kernel: &Kernel, tokens: &TokenCountTable) -> Result<f64, MetricsError> {
    let positions = kernel.letter_len();
    let groups = position_sums(kernel, tokens)?;
    let stretched: Vec<&(Vec<u64>, u64)> = groups
        .iter()
        .filter(|(&length, _)| length > positions)
        .map(|(_, v)| v)
        .collect();
    if stretched.is_empty() {
        return Err(MetricsError::NoStretchedTokens {
            kernel: kernel.to_string(),
        });
    }
    let mut acc = vec![0.0; positions];
    for (sums, weight) in &stretched {
        let denom = (sums.iter().sum::<u64>() - positions as u64 * weight) as f64;
        for (slot, &s) in acc.iter_mut().zip(sums) {
            *slot += (s - weight) as f64 / denom;
        }
    }
    let group_count = stretched.len() as f64;
    let p: Vec<f64> = acc.iter().map(|a| a / group_count).collect();
    Ok(normalized_entropy(&p, positions))
}

/// Whole-population balance entropy H_alt: one count-weighted average
/// over all stretched tokens at once, then the same normalized
/// entropy as [`balance_entropy`].
pub fn balance_entropy_alt(kernel: &Kernel, tokens: &TokenCountTable) -> Result<f64, MetricsError> {
    let positions = kernel.letter_len();
    let groups = position_sums(kernel, tokens)?;
    let mut sums = vec![0u64; positions];
    let mut weight = 0u64;
    for (&length, (group_sums, group_weight)) in &groups {
        if length <= positions {
            continue;
        }
        for (slot, s) in sums.iter_mut().zip(group_sums) {
            *slot += s;
        }
        weight += group_weight;
    }
    if weight == 0 {
        return Err(MetricsError::NoStretchedTokens {
            kernel: kernel.to_string(),
        });
    }
    let denom = (sums.iter().sum::<u64>() - positions as u64 * weight) as f64;
    let p: Vec<f64> = sums.iter().map(|&s| (s - weight) as f64 / denom).collect();
    Ok(normalized_entropy(&p, positions))
}

/// Gini coefficient of the token-length population:
/// `sum_i sum_j |x_i - x_j| / (2 n^2 mu)`, computed exactly from the
/// grouped counts. Zero for a single occupied length; always in
/// `[0, 1)`.
pub fn gini(distribution: &LengthDistribution) -> f64 {
    let mut delta: u128 = 0;
    let mut cum_count: u128 = 0;
    let mut cum_sum: u128 = 0;
    for (length, count) in distribution.iter() {
        let (x, c) = (length as u128, count as u128);
        delta += c * (cum_count * x - cum_sum);
        cum_count += c;
        cum_sum += c * x;
    }
    if delta == 0 {
        return 0.0;
    }
    delta as f64 / (cum_count as f64 * cum_sum as f64)
}

/// The stretch ratio `rho = n_s / n_u`; undefined when `n_u` is zero.
pub fn stretch_ratio(n_s: u64, n_u: u64) -> Result<f64, MetricsError> {
    if n_u == 0 {
        return Err(MetricsError::UndefinedRatio);
    }
    Ok(n_s as f64 / n_u as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn k(s: &str) -> Kernel {
        s.parse().unwrap()
    }

    fn table(rows: &[(&str, u64)]) -> TokenCountTable {
        rows.iter().map(|(t, c)| (t.to_string(), *c)).collect()
    }

    #[test]
    fn profile_averages_per_exact_length() {
        let tokens = table(&[("bbabbb", 2), ("babbbb", 2), ("bab", 5)]);
        let profile = char_stretch_profile(&k("[b][a][b]"), &tokens, Grouping::PerLength).unwrap();
        assert_eq!(profile.groups.len(), 2);
        assert_eq!(profile.groups[0].lo, 3);
        assert_eq!(profile.groups[0].means, vec![1.0, 1.0, 1.0]);
        // Length 6: (2,1,3) and (1,1,4) with equal counts.
        assert_eq!(profile.groups[1].means, vec![1.5, 1.0, 3.5]);
    }

    #[test]
    fn profile_groups_conserve_mean_length() {
        let tokens = table(&[("goal", 7), ("goooal", 3), ("ggoooaalll", 2)]);
        let profile =
            char_stretch_profile(&k("[g][o][a][l]"), &tokens, Grouping::Bins(&[(4, 10)])).unwrap();
        let group = &profile.groups[0];
        let mean_len = (4.0 * 7.0 + 6.0 * 3.0 + 10.0 * 2.0) / 12.0;
        let total: f64 = group.means.iter().sum();
        assert!((total - mean_len).abs() < 1e-9);
    }

    #[test]
    fn profile_reports_mismatched_tokens() {
        let err = char_stretch_profile(&k("(ha)"), &table(&[("hi", 1)]), Grouping::PerLength)
            .unwrap_err();
        assert_eq!(
            err,
            MetricsError::TokenMismatch {
                token: "hi".to_string(),
                kernel: "(ha)".to_string()
            }
        );
    }

    type BandCase = (&'static str, &'static [(&'static str, u64)], f64);

    #[test]
    fn entropy_banding_matches_position_counts() {
        // Two positions stretch equally in every group; H depends only
        // on the kernel's total letter positions.
        let cases: [BandCase; 3] = [
            (
                "x[a][b]",
                &[("xaabb", 3), ("xaaabbb", 1)],
                1.0 / 3f64.log2(),
            ),
            ("xy[a][b]", &[("xyaabb", 3), ("xyaaabbb", 1)], 0.5),
            (
                "xyz[a][b]",
                &[("xyzaabb", 3), ("xyzaaabbb", 1)],
                1.0 / 5f64.log2(),
            ),
        ];
        for (kernel, rows, expected) in cases {
            let h = balance_entropy(&k(kernel), &table(rows)).unwrap();
            assert!((h - expected).abs() < 1e-12, "{kernel}: {h} vs {expected}");
        }
    }

    #[test]
    fn fully_balanced_kernels_reach_one() {
        let h = balance_entropy(&k("[a][b]"), &table(&[("aabb", 9), ("aaabbb", 2)])).unwrap();
        assert_eq!(h, 1.0);
    }

    #[test]
    fn single_stretch_kernels_are_exactly_zero() {
        let tokens = table(&[("xaa", 4), ("xaaaa", 1)]);
        assert_eq!(balance_entropy(&k("x[a]"), &tokens).unwrap(), 0.0);
        assert_eq!(balance_entropy_alt(&k("x[a]"), &tokens).unwrap(), 0.0);
        // A single letter position normalizes by log2(1); zero by rule.
        let single = table(&[("aaa", 2)]);
        assert_eq!(balance_entropy(&k("[a]"), &single).unwrap(), 0.0);
    }

    #[test]
    fn group_weighting_separates_h_from_h_alt() {
        // 99 balanced "papa" tokens against one heavily a-stretched
        // token: per-token H_alt stays near 1, per-group H drops.
        let tokens = table(&[("papa", 99), ("paaaaaaaaaa", 1)]);
        let kernel = k("(pa)");
        let h = balance_entropy(&kernel, &tokens).unwrap();
        let h_alt = balance_entropy_alt(&kernel, &tokens).unwrap();

        // Direct computation: groups contribute (0.5, 0.5) and (0, 1).
        let expected_h = {
            let p: [f64; 2] = [0.25, 0.75];
            -(p[0] * p[0].log2() + p[1] * p[1].log2())
        };
        // All tokens at once: means (1.99, 2.08) less one, normalized.
        let expected_h_alt = {
            let p: [f64; 2] = [0.99 / 2.07, 1.08 / 2.07];
            -(p[0] * p[0].log2() + p[1] * p[1].log2())
        };
        assert!((h - expected_h).abs() < 1e-12);
        assert!((h_alt - expected_h_alt).abs() < 1e-12);
        assert!(h_alt > h);
        assert!((h - 0.811).abs() < 1e-3);
        assert!((h_alt - 0.9986).abs() < 1e-3);
    }

    #[test]
    fn balance_requires_stretched_tokens() {
        let err = balance_entropy(&k("ab"), &table(&[("ab", 10)])).unwrap_err();
        assert!(matches!(err, MetricsError::NoStretchedTokens { .. }));
        let err = balance_entropy_alt(&k("ab"), &table(&[("ab", 10)])).unwrap_err();
        assert!(matches!(err, MetricsError::NoStretchedTokens { .. }));
    }

    #[test]
    fn gini_of_grouped_lengths() {
        let d = LengthDistribution::from_counts([(2, 3), (6, 1)]).unwrap();
        assert_eq!(gini(&d), 0.25);
        let single = LengthDistribution::from_counts([(9, 14)]).unwrap();
        assert_eq!(gini(&single), 0.0);
    }

    #[test]
    fn ratio_definition_and_errors() {
        assert_eq!(stretch_ratio(0, 5).unwrap(), 0.0);
        assert_eq!(stretch_ratio(3, 2).unwrap(), 1.5);
        assert_eq!(stretch_ratio(1, 0), Err(MetricsError::UndefinedRatio));
    }

    /// Brute-force Gini over the expanded population.
    fn gini_pairwise(lengths: &[usize]) -> f64 {
        let n = lengths.len() as f64;
        let total: usize = lengths.iter().sum();
        let mut abs_diffs = 0.0;
        for &a in lengths {
            for &b in lengths {
                abs_diffs += (a as f64 - b as f64).abs();
            }
        }
        if abs_diffs == 0.0 {
            return 0.0;
        }
        abs_diffs / (2.0 * n * total as f64)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn grouped_gini_matches_pairwise_definition(
            lengths in proptest::collection::vec(1usize..60, 1..50),
        ) {
            let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
            for &l in &lengths {
                *counts.entry(l).or_insert(0) += 1;
            }
            let d = LengthDistribution::from_counts(counts).unwrap();
            let grouped = gini(&d);
            let brute = gini_pairwise(&lengths);
            prop_assert!((grouped - brute).abs() < 1e-12);
            prop_assert!((0.0..1.0).contains(&grouped));
        }

        #[test]
        fn metrics_ignore_count_scaling(
            counts in proptest::collection::vec(1u64..50, 2..6),
            scale in 2u64..9,
        ) {
            // Tokens xa, xaa, xaaa... over kernel x[a].
            let kernel = k("x[a]");
            let rows: Vec<(String, u64)> = counts
                .iter()
                .enumerate()
                .map(|(i, &c)| (format!("x{}", "a".repeat(i + 1)), c))
                .collect();
            let base: TokenCountTable = rows.clone().into_iter().collect();
            let scaled: TokenCountTable = rows
                .into_iter()
                .map(|(t, c)| (t, c * scale))
                .collect();
            let h0 = balance_entropy(&kernel, &base).unwrap();
            let h1 = balance_entropy(&kernel, &scaled).unwrap();
            prop_assert!((h0 - h1).abs() < 1e-12);
            let d0 = LengthDistribution::from_tokens(&base).unwrap();
            let d1 = LengthDistribution::from_tokens(&scaled).unwrap();
            prop_assert!((gini(&d0) - gini(&d1)).abs() < 1e-12);
        }

        #[test]
        fn metrics_are_letter_permutation_invariant(
            stretches in proptest::collection::vec((1u64..5, 1u64..5, 1u64..20), 1..6),
        ) {
            // Kernel [g][o] relabeled to [z][q] under g->z, o->q.
            let original = k("[g][o]");
            let relabeled = k("[z][q]");
            let base: TokenCountTable = stretches
                .iter()
                .map(|&(a, b, c)| {
                    (format!("{}{}", "g".repeat(a as usize), "o".repeat(b as usize)), c)
                })
                .collect();
            let mapped: TokenCountTable = stretches
                .iter()
                .map(|&(a, b, c)| {
                    (format!("{}{}", "z".repeat(a as usize), "q".repeat(b as usize)), c)
                })
                .collect();
            let stretched_exists = stretches.iter().any(|&(a, b, _)| a + b > 2);
            if stretched_exists {
                let h0 = balance_entropy(&original, &base).unwrap();
                let h1 = balance_entropy(&relabeled, &mapped).unwrap();
                prop_assert_eq!(h0, h1);
                let a0 = balance_entropy_alt(&original, &base).unwrap();
                let a1 = balance_entropy_alt(&relabeled, &mapped).unwrap();
                prop_assert_eq!(a0, a1);
            }
            let d0 = LengthDistribution::from_tokens(&base).unwrap();
            let d1 = LengthDistribution::from_tokens(&mapped).unwrap();
            prop_assert_eq!(gini(&d0), gini(&d1));
        }
    }
}
