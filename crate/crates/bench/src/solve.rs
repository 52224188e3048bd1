//! Solving a single problem file.

use std::fmt;
use std::path::Path;

use planarloc::io::read_problem;
use planarloc::{pose_error, EstimatorOptions, LocalizationResult, Method, PoseError};

use crate::BenchError;

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub method: Method,
    pub result: LocalizationResult,
    /// Present when the file carries a ground-truth pose.
    pub error: Option<PoseError>,
}

impl SolveReport {
    pub fn is_success(&self) -> bool {
        self.result.is_success()
    }
}

impl fmt::Display for SolveReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = &self.result;
        writeln!(f, "method: {}", self.method)?;
        writeln!(f, "status: {}", r.status)?;
        if r.is_success() {
            let m = &r.pose.rotation;
            for i in 0..3 {
                writeln!(
                    f,
                    "{} [{:+.9} {:+.9} {:+.9}]  t {:+.9}",
                    if i == 0 { "pose:" } else { "     " },
                    m[(i, 0)],
                    m[(i, 1)],
                    m[(i, 2)],
                    r.pose.translation[i]
                )?;
            }
            writeln!(f, "refined: {}", r.refined)?;
        }
        writeln!(f, "inliers: {}", r.inlier_count)?;
        let c = &r.checks;
        writeln!(
            f,
            "checks: samples {} solved {} cheirality {} rcheck {} triangulated {} pdcheck {} consistency {} scored {}",
            c.samples, c.solved, c.cheirality_passed, c.rcheck_passed, c.triangulated, c.pdcheck_passed, c.consistency_passed, c.scored
        )?;
        if let (Some(e), true) = (&self.error, r.is_success()) {
            writeln!(
                f,
                "error: rotation {:.3e} deg, translation {:.3e} m, direction {:.3e} deg",
                e.rotation_deg, e.translation_m, e.direction_deg
            )?;
        }
        Ok(())
    }
}

/// Reads `path` and runs `method` on it. `seed` and `iterations` override
/// the values stored in the file.
pub fn solve_file(
    path: &Path,
    method: Method,
    seed: Option<u64>,
    iterations: Option<usize>,
) -> Result<SolveReport, BenchError> {
    let doc = read_problem(path)?;
    let mut problem = doc.problem;
    if let Some(s) = seed {
        problem.rng_seed = s;
    }
    if let Some(n) = iterations {
        problem.iterations = n;
    }
    let result = method.estimate(&problem, &EstimatorOptions::default())?;
    let error = doc.ground_truth.map(|gt| pose_error(&result.pose, &gt));
    Ok(SolveReport {
        method,
        result,
        error,
    })
}
