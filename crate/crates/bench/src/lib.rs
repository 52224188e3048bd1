//! Simulation benchmarks for the planarloc estimators: accuracy against
//! pixel noise, robustness against outliers and run time against match
//! count, with CSV output and SVG charts drawn from those CSVs.

pub mod chart;
pub mod experiment;
pub mod report;
pub mod solve;

pub use experiment::{run, summarize, trial_seed, CellSummary, ExperimentKind, ExperimentPlan};
pub use report::{run_accuracy, run_experiment, run_robustness, run_timing, Report};
pub use solve::{solve_file, SolveReport};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid plan: {0}")]
    Plan(String),
    #[error(transparent)]
    Core(#[from] planarloc::Error),
    #[error("chart: {0}")]
    Chart(String),
}

impl From<std::io::Error> for BenchError {
    fn from(e: std::io::Error) -> Self {
        BenchError::Core(e.into())
    }
}
