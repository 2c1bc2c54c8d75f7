//! Experiment runner for over-the-air estimation: config ingestion, risk and
//! privacy tables, oracle verification and scaling reports.

pub mod cli;
pub mod config;
pub mod error;
pub mod report;
pub mod run;

pub use cli::main_with_args;
pub use config::{load_config, parse_config, ExperimentConfig, Format, Overrides, SchemeFamily};
pub use error::CliError;
pub use report::{read_csv_rows, Row};
pub use run::{recompute_closed_form, run_calibrate, run_privacy, run_risk, run_scaling, run_verify, RunOutcome};
