//! JSON experiment configurations, the staged runner and plot-ready CSV output.

mod config;
mod plots;
mod runner;

pub use config::{
    ApproxSpec, BoundSpec, CertificateSpec, CheckGrid, ExperimentConfig, OperatorSpec, SolverSpec,
    SweepPoint, WSpec,
};
pub use plots::{emit_plots, PlotManifest};
pub use runner::{
    exit_code, run_experiment, run_stages, RunReport, Stage, StageReport, StageStatus,
};
