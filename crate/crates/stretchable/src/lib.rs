//! Detection and characterization of stretched words in text corpora.
//!
//! Stretched words ("heyyyyy", "gooooooaaaaaaal") rarely appear in
//! dictionaries but follow strong regularities. This crate finds them,
//! distills each family to a compact kernel, and measures two
//! properties of every kernel: balance (which letters stretch, via
//! normalized entropies) and stretch (how far they stretch, via a Gini
//! coefficient and a stretch ratio). It also renders spelling trees
//! that display how the two letters of an interleaved section are
//! spelled in practice.
//!
//! The pipeline, stage by stage:
//!
//! 1. [`corpus`] scans messages for candidate tokens,
//! 2. [`kernel`] distills candidates, merges related kernels, and
//!    synthesizes matching patterns,
//! 3. [`distributions`] collects token-length distributions, splits
//!    off the stretched tail, ranks kernels, and fits the frequency
//!    cutoff,
//! 4. [`metrics`] computes balance entropies, the Gini coefficient,
//!    and the stretch ratio,
//! 5. [`plotdata`] prepares balance-plot and jellyfish-plot documents,
//! 6. [`spelltree`] builds, lays out, and renders spelling trees,
//! 7. [`diagnostics`] bundles everything for one kernel into a single
//!    report.
//!
//! ```
//! use stretchable::kernel;
//!
//! let k = kernel::distill("gooooooaaaaaaal")?;
//! assert_eq!(k.to_string(), "g[o][a]l");
//! assert_eq!(k.pattern(), "\\bg[o]+[a]+l\\b");
//! # Ok::<(), stretchable::kernel::DistillError>(())
//! ```

pub mod corpus;
pub mod diagnostics;
pub mod distributions;
pub mod guide;
pub mod kernel;
pub mod metrics;
pub mod plotdata;
pub mod spelltree;

pub use corpus::TokenCountTable;
pub use diagnostics::DiagnosticReport;
pub use distributions::{KernelStats, LengthDistribution};
pub use kernel::{Element, Kernel, Letter};
pub use plotdata::{BalancePlotData, JellyfishData};
pub use spelltree::{LayoutTree, SpellingTree};
