//! Configuration-driven experiments.

pub mod config;
pub mod runner;

pub use config::{validate_config, CalibrationConfig, CorruptionConfig, ExperimentConfig, Violation};
pub use runner::{
    audit_seed, load_or_calibrate, run_experiment, run_seed, write_seed, AuditReport, ReasonableFlags, ResultRecord,
    SeedRun, Timings, CSV_COLUMNS, SCHEMA_VERSION,
};
