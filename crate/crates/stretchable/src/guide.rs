//! The Stretchable Guide, compiled.
//!
//! Each module below carries one chapter of the mdbook under `book/`
//! as its documentation, so every code block in the book runs as a
//! doc-test with `cargo test`. Editing a chapter edits its doc-tests;
//! the two cannot drift apart.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/extraction.md")]
pub mod extraction {}

#[doc = include_str!("../../../book/src/kernels.md")]
pub mod kernels {}

#[doc = include_str!("../../../book/src/distributions.md")]
pub mod distributions {}

#[doc = include_str!("../../../book/src/balance-and-stretch.md")]
pub mod balance_and_stretch {}

#[doc = include_str!("../../../book/src/plots.md")]
pub mod plots {}

#[doc = include_str!("../../../book/src/spelling-trees.md")]
pub mod spelling_trees {}

#[doc = include_str!("../../../book/src/pipeline.md")]
pub mod pipeline {}
