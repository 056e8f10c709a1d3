//! Configuration, experiment suites and report emission for the CLI.

pub mod config;
pub mod measure;
pub mod report;
pub mod suites;

pub use config::{ExperimentConfig, Suite};
pub use report::{Check, ReportFormat, SuiteReport, Threshold};
pub use suites::run_experiment;
