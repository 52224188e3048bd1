//! Monte-Carlo experiments over synthetic scenes.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use planarloc::io::TrialRecord;
use planarloc::synth::{generate, WorldConfig};
use planarloc::{
    pose_error, success_rate, Error, EstimatorOptions, Method, PoseError, SuccessCriterion,
};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    /// Mean pose errors against pixel noise.
    Accuracy,
    /// Success rate against outlier rate.
    Robustness,
    /// Wall time against match count.
    Timing,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Accuracy => "accuracy",
            ExperimentKind::Robustness => "robustness",
            ExperimentKind::Timing => "timing",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "accuracy" => Ok(ExperimentKind::Accuracy),
            "robustness" => Ok(ExperimentKind::Robustness),
            "timing" => Ok(ExperimentKind::Timing),
            other => Err(format!("unknown experiment {other:?}")),
        }
    }
}

/// What to run. `sweep` holds noise levels (accuracy), outlier rates
/// (robustness) or match counts (timing).
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub kind: ExperimentKind,
    pub methods: Vec<Method>,
    pub sweep: Vec<f64>,
    /// Matches per reference; ignored by timing, which sweeps them.
    pub matches: Vec<usize>,
    pub trials_per_cell: usize,
    pub seed: u64,
    pub references: usize,
    /// Noise for robustness and timing cells.
    pub noise_sigma_px: f64,
    /// Outlier rate for accuracy and timing cells.
    pub outlier_rate: f64,
}

impl ExperimentPlan {
    /// Defaults of each experiment: noise 0..=10 px on 100/50/10 matches,
    /// outliers 0..=60 % on 100/50/20 matches, and 10..500 matches at 5 px
    /// with 10 % outliers.
    pub fn new(kind: ExperimentKind) -> Self {
        let (sweep, matches, noise, outliers) = match kind {
            ExperimentKind::Accuracy => (
                (0..=10).map(f64::from).collect(),
                vec![100, 50, 10],
                0.0,
                0.0,
            ),
            ExperimentKind::Robustness => (
                (0..=6).map(|k| f64::from(k) / 10.0).collect(),
                vec![100, 50, 20],
                0.0,
                0.0,
            ),
            ExperimentKind::Timing => (vec![10.0, 50.0, 100.0, 200.0, 500.0], Vec::new(), 5.0, 0.1),
        };
        Self {
            kind,
            methods: Method::ALL.to_vec(),
            sweep,
            matches,
            trials_per_cell: 100,
            seed: 0,
            references: 5,
            noise_sigma_px: noise,
            outlier_rate: outliers,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.sweep.is_empty() {
            return Err("sweep must not be empty".into());
        }
        if self.trials_per_cell == 0 {
            return Err("trials must be at least 1".into());
        }
        if self.methods.is_empty() {
            return Err("no methods selected".into());
        }
        if self.kind != ExperimentKind::Timing && self.matches.is_empty() {
            return Err("no match counts selected".into());
        }
        if self.kind == ExperimentKind::Timing
            && self.sweep.iter().any(|v| *v < 1.0 || v.fract() != 0.0)
        {
            return Err("timing sweeps whole match counts".into());
        }
        if self.kind == ExperimentKind::Robustness
            && self.sweep.iter().any(|v| !(0.0..=1.0).contains(v))
        {
            return Err("outlier rates must lie in [0, 1]".into());
        }
        Ok(())
    }

    /// Scene settings of every cell, in output order.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        let mut push = |noise, outliers, n| {
            out.push(Cell {
                index: out.len() as u64,
                noise_sigma_px: noise,
                outlier_rate: outliers,
                n_matches: n,
            })
        };
        match self.kind {
            ExperimentKind::Accuracy => {
                for &n in &self.matches {
                    for &sigma in &self.sweep {
                        push(sigma, self.outlier_rate, n);
                    }
                }
            }
            ExperimentKind::Robustness => {
                for &n in &self.matches {
                    for &rate in &self.sweep {
                        push(self.noise_sigma_px, rate, n);
                    }
                }
            }
            ExperimentKind::Timing => {
                for &n in &self.sweep {
                    push(self.noise_sigma_px, self.outlier_rate, n as usize);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub index: u64,
    pub noise_sigma_px: f64,
    pub outlier_rate: f64,
    pub n_matches: usize,
}

/// Scene seed of one trial. Depends only on its coordinates, so trials can
/// run in any order.
pub fn trial_seed(seed: u64, cell: u64, trial: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(cell);
    rng.set_word_pos(2 * u128::from(trial));
    rng.next_u64()
}

/// Short status name of a failed call.
pub fn error_status(e: &Error) -> &'static str {
    match e {
        Error::NoValidSample => "NoValidSample",
        Error::InsufficientMatches { .. } => "InsufficientMatches",
        Error::InfeasibleScene(_) => "InfeasibleScene",
        Error::InvalidProblem(_) => "InvalidProblem",
        _ => "Error",
    }
}

fn row(cell: &Cell, trial: u64, method: Method) -> TrialRecord {
    TrialRecord {
        trial_id: trial,
        method: method.name().to_string(),
        noise_sigma_px: cell.noise_sigma_px,
        outlier_rate: cell.outlier_rate,
        n_matches: cell.n_matches,
        rotation_err_deg: f64::NAN,
        translation_err_m: f64::NAN,
        direction_err_deg: f64::NAN,
        inlier_count: 0,
        status: String::new(),
        wall_time_us: f64::NAN,
    }
}

/// Runs every method on one scene.
pub fn run_trial(plan: &ExperimentPlan, cell: &Cell, trial: u64) -> Vec<TrialRecord> {
    let config = WorldConfig {
        n_matches: cell.n_matches,
        noise_sigma_px: cell.noise_sigma_px,
        outlier_rate: cell.outlier_rate,
        n_references: plan.references,
        seed: trial_seed(plan.seed, cell.index, trial),
        ..WorldConfig::default()
    };
    let scene = match generate(&config) {
        Ok(s) => s,
        Err(e) => {
            log::warn!("cell {} trial {trial}: {e}", cell.index);
            return plan
                .methods
                .iter()
                .map(|&m| TrialRecord {
                    status: error_status(&e).into(),
                    ..row(cell, trial, m)
                })
                .collect();
        }
    };
    let options = EstimatorOptions::default();
    plan.methods
        .iter()
        .map(|&m| {
            let mut r = row(cell, trial, m);
            let start = Instant::now();
            let result = m.estimate(&scene.problem, &options);
            r.wall_time_us = start.elapsed().as_secs_f64() * 1e6;
            match result {
                Ok(res) => {
                    r.status = res.status.to_string();
                    r.inlier_count = res.inlier_count;
                    if res.is_success() {
                        let e = pose_error(&res.pose, &scene.ground_truth);
                        r.rotation_err_deg = e.rotation_deg;
                        r.translation_err_m = e.translation_m;
                        r.direction_err_deg = e.direction_deg;
                    }
                }
                Err(e) => r.status = error_status(&e).into(),
            }
            r
        })
        .collect()
}

/// All trial rows of a plan, ordered by cell, trial and method. Timing runs
/// on one thread so that trials do not compete for cores.
pub fn run(plan: &ExperimentPlan) -> Result<Vec<TrialRecord>, String> {
    plan.validate()?;
    let mut out = Vec::new();
    for cell in plan.cells() {
        log::info!(
            "{} cell {}: sigma {} px, outliers {}, {} matches",
            plan.kind,
            cell.index,
            cell.noise_sigma_px,
            cell.outlier_rate,
            cell.n_matches
        );
        let trials = 0..plan.trials_per_cell as u64;
        let rows: Vec<Vec<TrialRecord>> = if plan.kind == ExperimentKind::Timing {
            trials.map(|t| run_trial(plan, &cell, t)).collect()
        } else {
            trials
                .into_par_iter()
                .map(|t| run_trial(plan, &cell, t))
                .collect()
        };
        out.extend(rows.into_iter().flatten());
    }
    Ok(out)
}

/// Aggregates of one (method, cell) group.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub method: String,
    pub noise_sigma_px: f64,
    pub outlier_rate: f64,
    pub n_matches: usize,
    pub trials: usize,
    /// Failed trials left out of the error means.
    pub excluded: usize,
    pub mean_rotation_err_deg: f64,
    pub mean_translation_err_m: f64,
    pub mean_direction_err_deg: f64,
    /// Under the 0.1 m / 1 degree criterion; failures count as misses.
    pub success_rate: f64,
    pub mean_wall_time_ms: f64,
}

pub const SUMMARY_COLUMNS: [&str; 11] = [
    "method",
    "noise_sigma_px",
    "outlier_rate",
    "n_matches",
    "trials",
    "excluded",
    "mean_rotation_err_deg",
    "mean_translation_err_m",
    "mean_direction_err_deg",
    "success_rate",
    "mean_wall_time_ms",
];

fn failed(r: &TrialRecord) -> bool {
    !(r.status == "Success" || r.status == "RefinementWarning") || !r.translation_err_m.is_finite()
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Groups rows by method and cell, in order of first appearance.
pub fn summarize(records: &[TrialRecord]) -> Vec<CellSummary> {
    let mut order = Vec::new();
    let mut groups: HashMap<(String, u64, u64, usize), Vec<&TrialRecord>> = HashMap::new();
    for r in records {
        let key = (
            r.method.clone(),
            r.noise_sigma_px.to_bits(),
            r.outlier_rate.to_bits(),
            r.n_matches,
        );
        groups
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let rows = &groups[&key];
            let ok: Vec<&&TrialRecord> = rows.iter().filter(|r| !failed(r)).collect();
            let errors: Vec<PoseError> = rows
                .iter()
                .map(|r| PoseError {
                    rotation_deg: r.rotation_err_deg,
                    translation_m: r.translation_err_m,
                    direction_deg: r.direction_err_deg,
                })
                .collect();
            let first = rows[0];
            CellSummary {
                method: first.method.clone(),
                noise_sigma_px: first.noise_sigma_px,
                outlier_rate: first.outlier_rate,
                n_matches: first.n_matches,
                trials: rows.len(),
                excluded: rows.len() - ok.len(),
                mean_rotation_err_deg: mean(ok.iter().map(|r| r.rotation_err_deg)),
                mean_translation_err_m: mean(ok.iter().map(|r| r.translation_err_m)),
                mean_direction_err_deg: mean(ok.iter().map(|r| r.direction_err_deg)),
                success_rate: success_rate(&errors, &SuccessCriterion::SIMULATION)
                    .unwrap_or(f64::NAN),
                mean_wall_time_ms: mean(rows.iter().map(|r| r.wall_time_us / 1000.0)),
            }
        })
        .collect()
}

/// Summary lookup by method name and cell.
pub fn find<'a>(
    summaries: &'a [CellSummary],
    method: &str,
    noise: f64,
    outliers: f64,
    n: usize,
) -> Option<&'a CellSummary> {
    summaries.iter().find(|s| {
        s.method == method
            && s.noise_sigma_px == noise
            && s.outlier_rate == outliers
            && s.n_matches == n
    })
}
