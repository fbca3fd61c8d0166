//! Experiment harness: configuration files, solver drivers, CSV traces and
//! policy files.

pub mod commands;
pub mod config;
pub mod output;
pub mod policy_io;

pub use commands::{
    compare_accel, evaluate_policy, median, render_summary, run_epscko_cell, run_gdice_cell, solve,
    sweep_discretization, write_outputs, CellResult, OutputFiles,
};
pub use config::{AnyDomain, DomainFile, DomainKind, Experiment, ExperimentConfig, SchemeSpec, SolverKind};
pub use output::{fmt_f64, CellKey, Resolution, SummaryRow};
pub use policy_io::JointPolicy;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "FSA_SEARCH_OUT";
