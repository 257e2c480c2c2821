//! Experiment orchestration: TOML configs, runs and cross-run reports.

pub mod config;
pub mod report;
pub mod run;

pub use config::{AlgorithmConfig, AlgorithmKind, AlgorithmSpec, ExperimentConfig, MomentumKind, ResolvedExperiment};
pub use report::{compare_report, image_metric_tables, load_traces, write_report, CompareReport, NamedTrace};
pub use run::{execute, prepare, run_algorithm, run_experiment, write_outputs, ExperimentOutcome, Prepared, RunOutcome};
