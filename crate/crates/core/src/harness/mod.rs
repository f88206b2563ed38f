//! Coupled Monte Carlo convergence studies.
//!
//! Every sample draws one vector of standard normals at the reference mode
//! count; coarser levels reuse its prefix, so level errors are measured against
//! a single shared reference realisation.

mod config;
mod rates;
mod report;
mod study;

pub use config::{Level, ReferenceConfig, StudyConfig};
pub use rates::{fit_log_log_slope, predicted_rate, predicted_rate_beta, Coupling, RateDecomposition, RATE_TOLERANCE};
pub use report::{
    write_gnuplot, write_report_csv, write_report_files, write_truncation_csv, REPORT_CSV, REPORT_GP, TRUNCATION_CSV,
};
pub use study::{
    moment_estimate, run_study, run_truncation_study, ConvergenceReport, LevelResult, TruncationLevel,
    TruncationReport, THREADS_ENV,
};
