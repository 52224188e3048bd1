//! General 6DoF comparison pipeline: normalized 8-point essential matrix per
//! reference, four-candidate decomposition, and two-ray triangulation of the
//! translation scales. Runs inside the same RANSAC shell as the planar
//! solvers, without the check cascade unless asked for.

use nalgebra::{DMatrix, Matrix3, Vector3};
use rand_chacha::ChaCha8Rng;

use crate::absolute::{
    between, consistency_check, pdcheck, rcheck, triangulate_2p2p, ScaleSolution,
};
use crate::error::{Error, Result};
use crate::geometry::{Correspondence, EssentialMatrix, RigidPose};
use crate::planar::select_by_depth;
use crate::ransac::{
    draw, draw_pair, run, CheckCounters, EstimatorOptions, LocalizationProblem, LocalizationResult,
    MinimalSolver,
};

pub const MIN_MATCHES: usize = 8;

/// Hartley similarity moving the centroid to the origin and the mean
/// distance to sqrt(2).
fn hartley(points: impl Iterator<Item = nalgebra::Vector2<f64>> + Clone) -> Matrix3<f64> {
    let n = points.clone().count() as f64;
    let centroid = points
        .clone()
        .fold(nalgebra::Vector2::zeros(), |a, p| a + p)
        / n;
    let mean_dist = points.map(|p| (p - centroid).norm()).sum::<f64>() / n;
    let s = if mean_dist > 0.0 {
        2f64.sqrt() / mean_dist
    } else {
        1.0
    };
    Matrix3::new(
        s,
        0.0,
        -s * centroid.x,
        0.0,
        s,
        -s * centroid.y,
        0.0,
        0.0,
        1.0,
    )
}

/// Projects a matrix onto the essential manifold: two equal singular values
/// and an exact zero.
pub fn project_to_essential(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let s = svd.singular_values;
    let mean = 0.5 * (s[0] + s[1]);
    u * Matrix3::from_diagonal(&Vector3::new(mean, mean, 0.0)) * v_t
}

/// Linear 8-point essential matrix from at least eight correspondences.
pub fn solve_8pt(matches: &[Correspondence]) -> Result<EssentialMatrix> {
    if matches.len() < MIN_MATCHES {
        return Err(Error::DegenerateConfiguration(
            "need at least 8 correspondences",
        ));
    }
    let ti = hartley(matches.iter().map(|c| c.query_point));
    let tj = hartley(matches.iter().map(|c| c.reference_point));

    let rows = matches.len().max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (r, c) in matches.iter().enumerate() {
        let pi = ti * c.query_h();
        let pj = tj * c.reference_h();
        for x in 0..3 {
            for y in 0..3 {
                a[(r, 3 * x + y)] = pj[x] * pi[y];
            }
        }
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let sv = &svd.singular_values;
    if !(sv[0] > 0.0) || sv[7] <= 1e-10 * sv[0] {
        return Err(Error::DegenerateConfiguration(
            "design matrix has rank below eight",
        ));
    }
    let e = v_t.row(8);
    let en = Matrix3::new(e[0], e[1], e[2], e[3], e[4], e[5], e[6], e[7], e[8]);
    let m = tj.transpose() * en * ti;
    let m = project_to_essential(&m);
    Ok(EssentialMatrix::new(m / m.norm()))
}

/// General relative pose with unit direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralCandidate {
    pub rotation: Matrix3<f64>,
    pub direction: Vector3<f64>,
}

impl GeneralCandidate {
    pub fn as_pose(&self) -> RigidPose {
        RigidPose::new(self.rotation, self.direction)
    }
}

/// The four `(R, +-t)` pairs encoded by an essential matrix.
pub fn decompose_essential(e: &EssentialMatrix) -> [GeneralCandidate; 4] {
    let svd = e.matrix.svd(true, true);
    let (mut u, mut v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    // Singular values come sorted, so the null direction is the last column.
    if u.determinant() < 0.0 {
        u = -u;
    }
    if v_t.determinant() < 0.0 {
        v_t = -v_t;
    }
    let w = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
    let r1 = u * w * v_t;
    let r2 = u * w.transpose() * v_t;
    let t: Vector3<f64> = u.column(2).into_owned();
    [
        GeneralCandidate {
            rotation: r1,
            direction: t,
        },
        GeneralCandidate {
            rotation: r1,
            direction: -t,
        },
        GeneralCandidate {
            rotation: r2,
            direction: t,
        },
        GeneralCandidate {
            rotation: r2,
            direction: -t,
        },
    ]
}

/// Cheirality-selected decomposition of `e`.
pub fn select_general(e: &EssentialMatrix, matches: &[Correspondence]) -> Result<GeneralCandidate> {
    let cands = decompose_essential(e);
    select_by_depth(
        &cands,
        matches,
        |c| c.rotation,
        |c| c.direction,
        |c| c.as_pose().essential(),
    )
}

/// Relative poses from two essential matrices, then the least-squares scale
/// solve. No rotation, depth or consistency gate is applied.
pub fn decompose_and_triangulate(
    ea: &EssentialMatrix,
    eb: &EssentialMatrix,
    matches_a: &[Correspondence],
    matches_b: &[Correspondence],
    t_jj2: &RigidPose,
    reference_a: &RigidPose,
) -> Result<ScaleSolution> {
    let a = select_general(ea, matches_a)?;
    let b = select_general(eb, matches_b)?;
    triangulate_2p2p(&a.as_pose(), &b.as_pose(), t_jj2, reference_a)
}

/// Eight correspondences to each of two references.
#[derive(Debug, Clone, Copy, Default)]
pub struct EightPointEightPoint {
    /// Apply the rotation, positive-depth and consistency checks.
    pub checks: bool,
}

impl MinimalSolver for EightPointEightPoint {
    fn name(&self) -> &'static str {
        "8p8p"
    }

    fn sample_size(&self) -> usize {
        16
    }

    fn check_problem(&self, problem: &LocalizationProblem) -> Result<()> {
        if problem.references_with(MIN_MATCHES).len() < 2 {
            return Err(Error::InsufficientMatches {
                needed: MIN_MATCHES,
            });
        }
        Ok(())
    }

    fn hypotheses(
        &self,
        problem: &LocalizationProblem,
        rng: &mut ChaCha8Rng,
        counters: &mut CheckCounters,
    ) -> Vec<RigidPose> {
        let eligible = problem.references_with(MIN_MATCHES);
        let Some((j, j2)) = draw_pair(&eligible, &eligible, rng) else {
            return Vec::new();
        };
        let (va, vb) = (&problem.references[j], &problem.references[j2]);
        let sa: Vec<Correspondence> = draw(va, MIN_MATCHES, rng).into_iter().copied().collect();
        let sb: Vec<Correspondence> = draw(vb, MIN_MATCHES, rng).into_iter().copied().collect();
        let (Ok(ea), Ok(eb)) = (solve_8pt(&sa), solve_8pt(&sb)) else {
            return Vec::new();
        };
        counters.solved += 1;
        let (Ok(a), Ok(b)) = (
            select_general(&ea, &va.correspondences),
            select_general(&eb, &vb.correspondences),
        ) else {
            return Vec::new();
        };
        counters.cheirality_passed += 1;

        let th = &problem.thresholds;
        let t_jj2 = between(&va.pose, &vb.pose);
        if self.checks && !rcheck(&a.rotation, &b.rotation, &t_jj2, th.rcheck_deg).0 {
            return Vec::new();
        }
        counters.rcheck_passed += 1;
        let Ok(s) = triangulate_2p2p(&a.as_pose(), &b.as_pose(), &t_jj2, &va.pose) else {
            return Vec::new();
        };
        counters.triangulated += 1;
        if self.checks && !pdcheck(&s) {
            return Vec::new();
        }
        counters.pdcheck_passed += 1;
        if self.checks {
            let ok = [(&va.pose, a.direction), (&vb.pose, b.direction)]
                .iter()
                .all(|(p, d)| {
                    matches!(
                        consistency_check(&s.query_pose, p, d, th.consistency_deg),
                        Ok((true, _))
                    )
                });
            if !ok {
                return Vec::new();
            }
        }
        counters.consistency_passed += 1;
        vec![s.query_pose]
    }
}

/// The 8p8p baseline with default options (no check cascade).
pub fn estimate_8p8p(problem: &LocalizationProblem) -> Result<LocalizationResult> {
    estimate_8p8p_with(problem, &EstimatorOptions::default())
}

pub fn estimate_8p8p_with(
    problem: &LocalizationProblem,
    options: &EstimatorOptions,
) -> Result<LocalizationResult> {
    let solver = EightPointEightPoint {
        checks: options.baseline_checks,
    };
    run(&solver, problem, options)
}
