//! Configuration parsing and command execution for the `pulsedephase` binary.

// Negated comparisons are deliberate: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod run;

pub use config::{parse_config, RunConfig};
pub use error::CliError;
pub use run::{execute, write_atomic, Report};
