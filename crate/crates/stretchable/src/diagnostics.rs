//! Diagnostic reports bundling the evidence for one kernel.
//!
//! A suspicious kernel (a likely mistyping, or a rare variant of a
//! stronger kernel) is easiest to judge with its length distribution,
//! balance plot, and spelling tree side by side, plus the ranks of
//! the kernels it competes with. [`diagnose`] assembles exactly the
//! standalone operations' outputs into one JSON-serializable report
//! and passes no judgment on what the evidence means.

use serde::Serialize;
use thiserror::Error;

use crate::corpus::TokenCountTable;
use crate::distributions::{DistributionError, KernelStats, LengthDistribution};
use crate::kernel::Kernel;
use crate::metrics::{balance_entropy, balance_entropy_alt, gini, stretch_ratio, MetricsError};
use crate::plotdata::{balance_plot_data, BalancePlotData};
use crate::spelltree::{
    build_tree, default_trim_threshold, layout, pair_spellings, LayoutTree, TreeError,
};

/// Failures while assembling a report; each wraps the component that
/// failed.
#[derive(Debug, Error, PartialEq)]
pub enum DiagnoseError {
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

/// Tuning knobs for [`diagnose`].
#[derive(Clone, Copy, Debug)]
pub struct DiagnoseOptions {
    /// Balance-plot bin growth factor.
    pub growth: f64,
    /// Spelling-tree trim threshold; defaults to the fourth root of
    /// the stretched token total.
    pub trim: Option<f64>,
}

impl Default for DiagnoseOptions {
    fn default() -> Self {
        DiagnoseOptions {
            growth: 1.5,
            trim: None,
        }
    }
}

/// A comparison kernel and its rank, when the index has one.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankEntry {
    pub kernel: Kernel,
    pub rank: Option<usize>,
}

/// Everything [`diagnose`] gathers for one kernel, computed from a
/// single token-table snapshot.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticReport {
    pub kernel: Kernel,
    pub pattern: String,
    /// Rank in the supplied index, when present.
    pub rank: Option<usize>,
    pub distribution: LengthDistribution,
    pub n_u: u64,
    pub n_s: u64,
    pub h: f64,
    pub h_alt: f64,
    pub gini: f64,
    pub rho: f64,
    pub balance: BalancePlotData,
    /// Laid-out spelling tree; absent when the kernel does not have
    /// exactly one two-letter element.
    pub tree: Option<LayoutTree>,
    pub comparisons: Vec<RankEntry>,
}

/// Assembles the distribution, metrics, balance plot, spelling tree
/// (when the kernel qualifies), and rank comparisons for one kernel.
/// Ranks come from `index`; kernels missing from it report `None`.
pub fn diagnose(
    kernel: &Kernel,
    tokens: &TokenCountTable,
    compare: &[Kernel],
    index: &[KernelStats],
    options: &DiagnoseOptions,
) -> Result<DiagnosticReport, DiagnoseError> {
    let distribution = LengthDistribution::from_tokens(tokens)?;
    let split = distribution.split_stretched();
    let h = balance_entropy(kernel, tokens)?;
    let h_alt = balance_entropy_alt(kernel, tokens)?;
    let rho = stretch_ratio(split.n_s, split.n_u)?;
    let balance = balance_plot_data(kernel, tokens, options.growth)?;
    let tree = if kernel.pair_indices().len() == 1 {
        let tau = options
            .trim
            .unwrap_or_else(|| default_trim_threshold(split.n_s));
        let spellings = pair_spellings(kernel, tokens, tau)?;
        Some(layout(&build_tree(kernel, &spellings, tau)?))
    } else {
        None
    };
    let rank_of = |k: &Kernel| index.iter().find(|s| s.kernel == *k).map(|s| s.rank);
    Ok(DiagnosticReport {
        kernel: kernel.clone(),
        pattern: kernel.pattern(),
        rank: rank_of(kernel),
        gini: gini(&distribution),
        distribution,
        n_u: split.n_u,
        n_s: split.n_s,
        h,
        h_alt,
        rho,
        balance,
        tree,
        comparisons: compare
            .iter()
            .map(|k| RankEntry {
                kernel: k.clone(),
                rank: rank_of(k),
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plotdata::BalanceBin;
    use crate::spelltree::Side;

    fn k(s: &str) -> Kernel {
        s.parse().unwrap()
    }

    fn table(rows: &[(&str, u64)]) -> TokenCountTable {
        rows.iter().map(|(t, c)| (t.to_string(), *c)).collect()
    }

    fn stats(kernel: &str, rank: usize) -> KernelStats {
        KernelStats {
            kernel: k(kernel),
            rank,
            n_u: 100,
            n_s: 10,
            h: 0.5,
            h_alt: 0.6,
            gini: 0.2,
            rho: 0.1,
        }
    }

    #[test]
    fn report_components_equal_standalone_outputs() {
        let kernel = k("(ha)");
        let tokens = table(&[("haha", 40), ("hahaha", 9), ("haaha", 3)]);
        let report = diagnose(&kernel, &tokens, &[], &[], &DiagnoseOptions::default()).unwrap();

        let distribution = LengthDistribution::from_tokens(&tokens).unwrap();
        assert_eq!(report.distribution, distribution);
        let split = distribution.split_stretched();
        assert_eq!((report.n_u, report.n_s), (split.n_u, split.n_s));
        assert_eq!(report.h, balance_entropy(&kernel, &tokens).unwrap());
        assert_eq!(report.h_alt, balance_entropy_alt(&kernel, &tokens).unwrap());
        assert_eq!(report.gini, gini(&distribution));
        assert_eq!(report.rho, stretch_ratio(split.n_s, split.n_u).unwrap());
        assert_eq!(
            report.balance,
            balance_plot_data(&kernel, &tokens, 1.5).unwrap()
        );
        let tau = default_trim_threshold(split.n_s);
        let spellings = pair_spellings(&kernel, &tokens, tau).unwrap();
        let tree = layout(&build_tree(&kernel, &spellings, tau).unwrap());
        assert_eq!(report.tree.as_ref(), Some(&tree));
        assert_eq!(report.pattern, kernel.pattern());
    }

    #[test]
    fn pairless_kernels_report_without_a_tree() {
        let report = diagnose(
            &k("[g][o]"),
            &table(&[("goo", 5), ("ggoo", 1)]),
            &[],
            &[],
            &DiagnoseOptions::default(),
        )
        .unwrap();
        assert!(report.tree.is_none());
    }

    #[test]
    fn rare_letters_show_near_zero_stretch() {
        // o stretches hard, i never does: the i position's average
        // stays at one letter.
        let kernel = k("n[o](io)");
        let tokens = table(&[("noooooio", 50), ("nooooooooio", 10), ("noio", 40)]);
        let report = diagnose(&kernel, &tokens, &[], &[], &DiagnoseOptions::default()).unwrap();
        for BalanceBin { means, .. } in &report.balance.bins {
            // Positions: n, [o], then i and o of the pair.
            assert_eq!(means[2], 1.0);
            assert!(means[1] >= 1.0);
        }
    }

    #[test]
    fn single_letter_variants_dominate_the_tree() {
        // The single-t spelling outweighs the double-t one.
        let kernel = k("hear(ta)ck");
        let tokens = table(&[("heartatack", 90), ("heartattack", 10)]);
        let report = diagnose(
            &kernel,
            &tokens,
            &[],
            &[],
            &DiagnoseOptions {
                growth: 1.5,
                trim: Some(1.0),
            },
        )
        .unwrap();
        let laid = report.tree.unwrap();
        // Spellings: "tata" (right-left-right) and "tatta"
        // (right-left-left-right) from the root t.
        let nodes = laid.nodes();
        let single_t = nodes
            .iter()
            .find(|n| n.depth == 3 && n.terminal_count > 0)
            .unwrap();
        assert_eq!(single_t.flow, 90);
        assert_eq!(single_t.side, Some(Side::Right));
        let double_t = nodes
            .iter()
            .find(|n| n.depth == 3 && n.terminal_count == 0)
            .unwrap();
        assert_eq!(double_t.flow, 10);
    }

    #[test]
    fn ranks_come_from_the_index() {
        let index = [stats("(no)", 8), stats("n[o](io)", 4858)];
        let report = diagnose(
            &k("n[o](io)"),
            &table(&[("noio", 9), ("nooio", 1)]),
            &[k("(no)"), k("[z]")],
            &index,
            &DiagnoseOptions::default(),
        )
        .unwrap();
        assert_eq!(report.rank, Some(4858));
        assert_eq!(
            report.comparisons,
            vec![
                RankEntry {
                    kernel: k("(no)"),
                    rank: Some(8)
                },
                RankEntry {
                    kernel: k("[z]"),
                    rank: None
                },
            ]
        );
    }

    #[test]
    fn component_errors_propagate() {
        // Unstretched-only tokens leave balance undefined.
        let err = diagnose(
            &k("ab"),
            &table(&[("ab", 3)]),
            &[],
            &[],
            &DiagnoseOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, DiagnoseError::Metrics(_)));
        // An empty token table has no distribution.
        let err = diagnose(
            &k("ab"),
            &TokenCountTable::default(),
            &[],
            &[],
            &DiagnoseOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, DiagnoseError::Distribution(_)));
    }

    #[test]
    fn reports_serialize_with_stable_fields() {
        let report = diagnose(
            &k("(ha)"),
            &table(&[("haha", 4), ("hahaha", 2)]),
            &[k("(he)")],
            &[stats("(ha)", 1)],
            &DiagnoseOptions::default(),
        )
        .unwrap();
        let value: serde_json::Value =
            serde_json::from_str(&serde_json::to_string(&report).unwrap()).unwrap();
        assert_eq!(value["kernel"], "(ha)");
        assert_eq!(value["pattern"], "\\bh[ha]*a[ha]*\\b");
        assert_eq!(value["rank"], 1);
        assert_eq!(value["n_u"], 4);
        assert_eq!(value["n_s"], 2);
        assert_eq!(value["tree"]["pair"], "ha");
        assert_eq!(value["comparisons"][0]["kernel"], "(he)");
        assert_eq!(value["comparisons"][0]["rank"], serde_json::Value::Null);
        assert!(value["distribution"].is_array());
        assert!(value["balance"]["bins"].is_array());
    }
}
