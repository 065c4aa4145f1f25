//! Experiment harness: configuration, the end-to-end pipeline, and figure
//! data reports. The CLI binary is a thin wrapper over these functions.

mod artifacts;
mod config;
mod pipeline;
mod report;

pub use artifacts::{fmt_f64, write_csv, write_json};
pub use config::{
    DecisionSettings, EpsilonConfig, ExperimentConfig, GridConfig, PkConfig, ReservoirSettings,
    SweepSettings, SystemConfig,
};
pub use pipeline::{
    build_trajectory, run_lyapunov, run_pipeline, run_select, run_simulate, subsample,
    LyapunovArtifacts, PipelineSummary,
};
pub use report::{report_run, report_sweep, run_report};
