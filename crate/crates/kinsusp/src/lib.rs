//! Named, reproducible experiments on top of `kinsusp-core`.
//!
//! A run writes `out/<experiment>/<hash>/` with `summary.json`,
//! `manifest.json` and `series/*.csv`. The hash covers the experiment
//! name, the seed and the parsed configuration, so equal inputs land in the
//! same directory and produce byte-identical summaries.

pub mod config;
pub mod error;
pub mod experiments;
pub mod run;
pub mod table;

pub use config::Config;
pub use error::{CliError, Result};
pub use experiments::{Check, Evaluation, Series};
pub use run::{check_dir, config_hash, run_experiment, RunReport};
