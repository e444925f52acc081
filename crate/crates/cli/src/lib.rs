//! Configuration, experiment drivers and CSV output for the `mdkinetic`
//! command-line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiments;
pub mod output;

pub use config::{parse_config, ConfigError, Experiment, Preset, RunConfig};
pub use output::ExperimentReport;
