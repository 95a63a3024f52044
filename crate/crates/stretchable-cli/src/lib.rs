//! Pipeline configuration and stage runners for the `stretchable`
//! binary, exposed as a library so integration tests can drive the
//! stages in-process.

pub mod config;
pub mod stages;

pub use config::{ConfigError, PipelineConfig, StageArgs};
pub use stages::{
    run_analyze, run_diagnose, run_distill, run_extract, run_match, run_tree, CliError,
};
