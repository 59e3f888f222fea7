//! Batch front-end: configuration, experiment dispatch and report files.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
pub mod run;

pub use config::{parse_config, Command, ConfigError, RunConfig};
pub use run::{compute, compute_with_threads, run, Outcome, Report, RunError};
