//! Command-line front end: single-point analyses, sweeps, trajectory exports
//! and JSON reports.

pub mod args;
pub mod config;
pub mod format;
pub mod run;
pub mod sweep;

pub use run::{run_command, EXIT_IO, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE};
pub use sweep::{read_csv, run_sweep, write_csv, SweepRow, SweepSpec};
