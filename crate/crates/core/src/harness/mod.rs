//! Configuration, error metrics and the Monte Carlo convergence study.

pub mod config;
pub mod kernel_check;
pub mod metrics;
pub mod montecarlo;
pub mod report;

pub use config::{FieldSpec, KvConfig, RunConfig};
pub use metrics::{normalized_error, normalized_error_values, TRUTH_SPEED_EPS};
pub use montecarlo::{monte_carlo, ConvergenceReport, CycleSummary, TrialRecord, TrialStatus};
pub use report::{emit_report, parse_convergence_csv, write_convergence_csv};
