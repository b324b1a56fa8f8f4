//! Library side of the `slr` command: configuration parsing and the
//! solve, analyze and bench drivers.

pub mod config;
pub mod error;
pub mod run;

pub use config::{MatrixSource, RunConfig};
pub use error::{CliError, Result};
