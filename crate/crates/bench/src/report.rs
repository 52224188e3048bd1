//! Running a plan and writing its CSVs and charts.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use planarloc::io::{format_float, write_trials, TrialRecord};

use crate::chart::write_charts;
use crate::experiment::{
    self, summarize, CellSummary, ExperimentKind, ExperimentPlan, SUMMARY_COLUMNS,
};
use crate::BenchError;

#[derive(Debug, Clone)]
pub struct Report {
    pub records: Vec<TrialRecord>,
    pub summaries: Vec<CellSummary>,
    /// Files written, trial CSV first.
    pub files: Vec<PathBuf>,
}

pub fn write_summary<W: Write>(out: W, summaries: &[CellSummary]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| BenchError::Core(planarloc::Error::Io(e.to_string()));
    w.write_record(SUMMARY_COLUMNS).map_err(csv_err)?;
    for s in summaries {
        w.write_record([
            s.method.clone(),
            format_float(s.noise_sigma_px),
            format_float(s.outlier_rate),
            s.n_matches.to_string(),
            s.trials.to_string(),
            s.excluded.to_string(),
            format_float(s.mean_rotation_err_deg),
            format_float(s.mean_translation_err_m),
            format_float(s.mean_direction_err_deg),
            format_float(s.success_rate),
            format_float(s.mean_wall_time_ms),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs `plan` and writes `<kind>.csv`, `<kind>_summary.csv` and the charts
/// into `out_dir`.
pub fn run_experiment(plan: &ExperimentPlan, out_dir: &Path) -> Result<Report, BenchError> {
    let records = experiment::run(plan).map_err(BenchError::Plan)?;
    let summaries = summarize(&records);
    fs::create_dir_all(out_dir)?;

    let trials_path = out_dir.join(format!("{}.csv", plan.kind));
    write_trials(BufWriter::new(File::create(&trials_path)?), &records)?;
    let summary_path = out_dir.join(format!("{}_summary.csv", plan.kind));
    write_summary(BufWriter::new(File::create(&summary_path)?), &summaries)?;

    let mut files = vec![trials_path.clone(), summary_path];
    files.extend(write_charts(&trials_path, out_dir)?);
    Ok(Report {
        records,
        summaries,
        files,
    })
}

fn expect(plan: &ExperimentPlan, kind: ExperimentKind) -> Result<(), BenchError> {
    if plan.kind != kind {
        return Err(BenchError::Plan(format!(
            "expected a {kind} plan, got {}",
            plan.kind
        )));
    }
    Ok(())
}

pub fn run_accuracy(plan: &ExperimentPlan, out_dir: &Path) -> Result<Report, BenchError> {
    expect(plan, ExperimentKind::Accuracy)?;
    run_experiment(plan, out_dir)
}

pub fn run_robustness(plan: &ExperimentPlan, out_dir: &Path) -> Result<Report, BenchError> {
    expect(plan, ExperimentKind::Robustness)?;
    run_experiment(plan, out_dir)
}

pub fn run_timing(plan: &ExperimentPlan, out_dir: &Path) -> Result<Report, BenchError> {
    expect(plan, ExperimentKind::Timing)?;
    run_experiment(plan, out_dir)
}
