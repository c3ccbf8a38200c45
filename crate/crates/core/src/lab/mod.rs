//! Experiment orchestration: configuration, the convergence studies, rate
//! fits, reports and the invariant check suites.

pub mod checks;
pub mod config;
pub mod experiments;
pub mod fit;
mod plot;
pub mod report;

pub use config::{DistanceKind, ExperimentConfig, Suite};
pub use experiments::{run_energy_convergence, run_nbody_cell, CellRun, CellSample, run_regularization_study, run_study, run_trace_convergence, StudyFailure};
pub use fit::{loglog_fit, PowerFit};
pub use report::{emit_report, RateReport, RawPoint, ReportMeta, Study, Summary};
