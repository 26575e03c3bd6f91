//! Command-line front end and file formats for `impulsive-iss-core`.
//!
//! - [`config`]: TOML scenario files.
//! - [`output`]: CSV and JSON artifacts.
//! - [`sweep`]: parallel dwell-condition sweeps.
//! - [`cli`]: the `simulate`, `verify`, `construct` and `sweep` commands.
//!
//! Exit codes: 0 pass, 1 verification failure, 2 blow-up, 3 configuration
//! error, 4 failed precondition or dwell condition.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod output;
pub mod sweep;

pub use impulsive_iss_core as core;
