//! Configuration, single runs, convergence studies and self tests for the
//! `cutstokes` binary.

pub mod config;
pub mod error;
pub mod run;
pub mod selftest;
pub mod study;

pub use config::{InitialData, RunConfig, StudyConfig};
pub use error::{CliError, ErrorRecord, Result};
pub use run::{execute, run_to_dir, RunOutcome};
pub use study::{run_study, write_study, StudyResult};
