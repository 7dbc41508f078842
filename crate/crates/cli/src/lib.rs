//! Configuration-driven experiment runner for the `feedstab` toolkit.

// Negated float comparisons are used on purpose so that NaN fails checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod run;

pub use config::{ExperimentConfig, LoadedConfig, ModelKind};
pub use error::{exit, CliError};
pub use run::{run, Command, Outcome, RunOptions};
