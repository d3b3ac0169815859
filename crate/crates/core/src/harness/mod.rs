//! Generators, experiment configuration, sweeps and reporting.

pub mod config;
pub mod generators;
pub mod stats;
pub mod svg;
pub mod sweep;

pub use config::{output_dir, Algorithm, ExperimentConfig, Instance, OUTPUT_ROOT_VAR};
pub use stats::{distribution, sublinearity_test, Distribution, Sublinearity};
pub use sweep::{audit_dir, run_seed, run_sweep, AuditReport, SweepSummary};
