//! Data formats, synthetic generators, run configuration, reporting and the
//! `levelcg` command line on top of `levelcg-core`.

pub mod config;
pub mod data;
pub mod error;
pub mod imrt_io;
pub mod report;
pub mod run;

pub use error::{BenchError, Result};
pub use run::{execute, run, sweep, RunOutcome, SweepConfig};
