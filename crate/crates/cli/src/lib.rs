//! Command-line workflows around the `tvising` estimator: scenario files,
//! dataset and result formats, evaluation metrics and parameter sweeps.

pub mod commands;
pub mod error;
pub mod evaluate;
pub mod io;
pub mod scenario;
pub mod sweep;

pub use error::{CliError, Result};
