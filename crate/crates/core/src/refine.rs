//! 6DoF refinement of the absolute query pose over 2D-2D inliers.
//!
//! The cost is the sum of squared Sampson distances of every inlier against
//! the essential matrix induced by the query pose relative to its reference.
//! Updates are `R <- exp(omega) R`, `t <- t + dt`.

use nalgebra::{Matrix3, Matrix6, Vector3, Vector6};

use crate::absolute::{relative_from_absolute, ReferenceView};
use crate::error::{Error, Result};
use crate::geometry::{skew, Correspondence, RigidPose};

pub const MAX_ITERATIONS: usize = 50;
pub const STEP_TOLERANCE: f64 = 1e-10;
/// Minimum inliers for a well-posed 6DoF refinement.
pub const MIN_INLIERS: usize = 6;

/// Result of [`refine_pose`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Refinement {
    pub pose: RigidPose,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl Refinement {
    pub fn into_result(self) -> Result<RigidPose> {
        if self.converged {
            Ok(self.pose)
        } else {
            Err(Error::DidNotConverge(MAX_ITERATIONS))
        }
    }
}

/// Sampson distance and its gradient with respect to
/// `(omega, dt)` of the query pose.
pub fn sampson_jacobian(
    query: &RigidPose,
    reference: &RigidPose,
    c: &Correspondence,
) -> Option<(f64, Vector6<f64>)> {
    let rel = relative_from_absolute(query, reference);
    let a = rel.rotation;
    let e = skew(&rel.translation) * a;

    let pi = c.query_h();
    let pj = c.reference_h();
    let ep = e * pi;
    let etp = e.transpose() * pj;
    let num = pj.dot(&ep);
    let den = ep.x * ep.x + ep.y * ep.y + etp.x * etp.x + etp.y * etp.y;
    if !(den > 1e-30) {
        return None;
    }
    let sq = den.sqrt();
    let r = num / sq;

    let tx = skew(&rel.translation);
    let mut grad = Vector6::zeros();
    for k in 0..6 {
        let ek = Vector3::ith(k % 3, 1.0);
        let de: Matrix3<f64> = if k < 3 {
            -(skew(&(a * query.translation.cross(&ek))) * a) - tx * a * skew(&ek)
        } else {
            -(skew(&(a * ek)) * a)
        };
        let dep = de * pi;
        let detp = de.transpose() * pj;
        let dnum = pj.dot(&dep);
        let dden = 2.0 * (ep.x * dep.x + ep.y * dep.y + etp.x * detp.x + etp.y * detp.y);
        grad[k] = dnum / sq - 0.5 * num * dden / (den * sq);
    }
    Some((r, grad))
}

fn inlier_iter<'a>(
    references: &'a [ReferenceView],
    inliers: &'a [Vec<usize>],
) -> impl Iterator<Item = (&'a RigidPose, &'a Correspondence)> + 'a {
    references.iter().zip(inliers).flat_map(|(view, idx)| {
        idx.iter()
            .map(move |&i| (&view.pose, &view.correspondences[i]))
    })
}

/// Summed squared Sampson distance of the inliers at `query`.
pub fn inlier_cost(query: &RigidPose, references: &[ReferenceView], inliers: &[Vec<usize>]) -> f64 {
    inlier_iter(references, inliers)
        .map(|(rp, c)| {
            let e = relative_from_absolute(query, rp).essential();
            crate::geometry::signed_sampson(c, &e).map_or(0.0, |r| r * r)
        })
        .sum()
}

/// Residual vector and Jacobian rows for all inliers.
pub fn residuals_and_jacobian(
    query: &RigidPose,
    references: &[ReferenceView],
    inliers: &[Vec<usize>],
) -> Vec<(f64, Vector6<f64>)> {
    inlier_iter(references, inliers)
        .filter_map(|(rp, c)| sampson_jacobian(query, rp, c))
        .collect()
}

fn normal_equations(rows: &[(f64, Vector6<f64>)]) -> (Matrix6<f64>, Vector6<f64>, f64) {
    let mut h = Matrix6::zeros();
    let mut g = Vector6::zeros();
    let mut cost = 0.0;
    for (r, j) in rows {
        h += j * j.transpose();
        g += j * *r;
        cost += r * r;
    }
    (h, g, cost)
}

/// Levenberg-Marquardt refinement of the absolute query pose.
///
/// `inliers[j]` lists correspondence indices of `references[j]`.
pub fn refine_pose(
    initial: &RigidPose,
    references: &[ReferenceView],
    inliers: &[Vec<usize>],
) -> Refinement {
    let mut pose = *initial;
    let (mut h, mut g, mut cost) =
        normal_equations(&residuals_and_jacobian(&pose, references, inliers));
    let initial_cost = cost;
    let mut mu = 1e-4;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut damped = h;
        for k in 0..6 {
            damped[(k, k)] += mu * h[(k, k)].max(1e-12);
        }
        let Some(step) = damped.cholesky().map(|ch| ch.solve(&(-g))) else {
            mu *= 10.0;
            continue;
        };
        if step.norm() < STEP_TOLERANCE {
            converged = true;
            break;
        }
        let omega = Vector3::new(step[0], step[1], step[2]);
        let dt = Vector3::new(step[3], step[4], step[5]);
        let candidate = pose.perturbed(&omega, &dt);
        let rows = residuals_and_jacobian(&candidate, references, inliers);
        let (ch, cg, ccost) = normal_equations(&rows);
        if ccost < cost {
            pose = candidate;
            h = ch;
            g = cg;
            cost = ccost;
            mu = (mu * 0.1).max(1e-12);
        } else {
            mu *= 10.0;
            if mu > 1e16 {
                // No descent direction left at machine precision.
                converged = true;
                break;
            }
        }
    }

    Refinement {
        pose,
        initial_cost,
        final_cost: cost,
        iterations,
        converged,
    }
}
