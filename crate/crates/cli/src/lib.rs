//! Batch front end of the PNPB solver: configuration files, figure presets
//! and CSV output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
pub mod runner;

pub use config::{parse_config, ConfigError, Mode, RunConfig};
pub use runner::{resolve_output_dir, run_config, PointOutcome, PointSummary, OUTPUT_ROOT_VAR};
