//! Absolute query pose from per-reference relative poses.
//!
//! Reference poses map world points into the reference camera frame. A
//! relative pose `T_ji` maps query-frame points into reference `j`, so the
//! absolute query pose is `T_i = T_ji^-1 T_j`, and the transform between two
//! references is `T_jj2 = T_j T_j2^-1`.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{rotation_angle_deg, skew, CameraIntrinsics, Correspondence, RigidPose};

/// Condition number of `C^T C` above which the regularized solve is used.
pub const MAX_CONDITION: f64 = 1e12;

/// A database view with known pose and its matches against the query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceView {
    pub pose: RigidPose,
    pub correspondences: Vec<Correspondence>,
}

impl ReferenceView {
    pub fn new(pose: RigidPose, correspondences: Vec<Correspondence>) -> Self {
        Self {
            pose,
            correspondences,
        }
    }
}

/// Transform mapping points of reference `b` into reference `a`.
pub fn between(a: &RigidPose, b: &RigidPose) -> RigidPose {
    a.compose(&b.inverse())
}

/// Absolute query pose from a relative pose to a reference with known pose.
pub fn absolute_from_relative(relative: &RigidPose, reference: &RigidPose) -> RigidPose {
    relative.inverse().compose(reference)
}

/// Relative pose of the query with respect to a reference.
pub fn relative_from_absolute(query: &RigidPose, reference: &RigidPose) -> RigidPose {
    reference.compose(&query.inverse())
}

/// Triangulated scales and the absolute query pose they imply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleSolution {
    pub rho: f64,
    pub rho2: Option<f64>,
    pub query_pose: RigidPose,
    /// Whether the regularized normal equations were used.
    pub regularized: bool,
}

/// Angular thresholds for the check cascade and the inlier gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckThresholds {
    pub rcheck_deg: f64,
    pub consistency_deg: f64,
    /// Sampson distance in normalized image units.
    pub sampson_inlier: f64,
}

impl CheckThresholds {
    /// Default inlier gate in pixels.
    pub const INLIER_PX: f64 = 2.5;

    /// Defaults with the inlier gate converted from pixels using the mean
    /// focal length.
    pub fn for_intrinsics(k: &CameraIntrinsics) -> Self {
        Self {
            rcheck_deg: 2.0,
            consistency_deg: 2.0,
            sampson_inlier: Self::INLIER_PX / k.mean_focal(),
        }
    }

    pub fn is_valid(&self) -> bool {
        self.rcheck_deg > 0.0 && self.consistency_deg > 0.0 && self.sampson_inlier > 0.0
    }
}

/// Rotation check: compares the known rotation between the references with
/// the one implied by the two estimated relative rotations.
///
/// `rel_a` relates the query to reference `j`, `rel_b` to reference `j2`,
/// and `t_jj2` maps reference `j2` into `j`. Returns the pass flag and the
/// angular error in degrees.
pub fn rcheck(
    rel_a: &Matrix3<f64>,
    rel_b: &Matrix3<f64>,
    t_jj2: &RigidPose,
    threshold_deg: f64,
) -> (bool, f64) {
    let implied = rel_a * rel_b.transpose();
    let err = rotation_angle_deg(&(t_jj2.rotation * implied.transpose()));
    (err <= threshold_deg, err)
}

/// Solves `C s = b` for the two translation scales, with
/// `C = [t_a, -R R2^T t_b]` and `b = t_12`.
///
/// `rel_a` / `rel_b` carry the estimated relative rotations; their
/// translations are read as unit directions. `reference_a` is the known
/// pose of reference `j`, used to assemble the absolute query pose.
pub fn triangulate_2p2p(
    rel_a: &RigidPose,
    rel_b: &RigidPose,
    t_jj2: &RigidPose,
    reference_a: &RigidPose,
) -> Result<ScaleSolution> {
    let dir_a = rel_a.translation;
    let dir_b = rel_a.rotation * rel_b.rotation.transpose() * rel_b.translation;
    let cross = dir_a.cross(&dir_b);
    if cross.norm() <= 1e-9 * dir_a.norm() * dir_b.norm() {
        return Err(Error::ParallelDirections);
    }
    let c = nalgebra::Matrix3x2::from_columns(&[dir_a, -dir_b]);
    let ctc: Matrix2<f64> = c.transpose() * c;
    let ctb: Vector2<f64> = c.transpose() * t_jj2.translation;

    let eig = ctc.symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    let regularized = !(lo > 0.0) || hi / lo > MAX_CONDITION;
    let normal = if regularized {
        ctc + Matrix2::identity()
    } else {
        ctc
    };
    let s = normal.try_inverse().ok_or(Error::ParallelDirections)? * ctb;

    let relative = RigidPose::new(rel_a.rotation, dir_a * s.x);
    Ok(ScaleSolution {
        rho: s.x,
        rho2: Some(s.y),
        query_pose: absolute_from_relative(&relative, reference_a),
        regularized,
    })
}

/// Positive-depth check on the triangulated scales.
pub fn pdcheck(s: &ScaleSolution) -> bool {
    s.rho > 0.0 && s.rho2.is_none_or(|r| r > 0.0)
}

/// Angle between the estimated relative direction `t_tilde` and the
/// direction of the query center seen from the reference, in degrees.
pub fn consistency_check(
    query_pose: &RigidPose,
    reference: &RigidPose,
    t_tilde: &Vector3<f64>,
    threshold_deg: f64,
) -> Result<(bool, f64)> {
    let baseline = query_pose.center() - reference.center();
    if baseline.norm() < 1e-12 {
        return Err(Error::UndefinedDirection);
    }
    // Rotate the world-frame baseline into the reference frame.
    let t_hat = reference.rotation * baseline;
    // atan2 of the cross and dot products is the arccos of the normalized
    // dot product, without its loss of precision near zero.
    let alpha = t_tilde
        .cross(&t_hat)
        .norm()
        .atan2(t_tilde.dot(&t_hat))
        .to_degrees();
    Ok((alpha <= threshold_deg, alpha))
}

/// Scale of a relative pose to reference `j` from a single correspondence
/// to a second reference `j2`.
///
/// `rel_a` holds the rotation and unit direction to `j`; `t_j2j` maps
/// reference `j` into `j2`. The epipolar constraint of `c3` is linear in
/// the scale: `rho * alpha + beta = 0`.
pub fn solve_scale_2p1p(rel_a: &RigidPose, t_j2j: &RigidPose, c3: &Correspondence) -> Result<f64> {
    let (alpha, beta) = scale_coefficients(rel_a, t_j2j, c3);
    if alpha.abs() < 1e-12 {
        return Err(Error::DegenerateCorrespondence);
    }
    Ok(-beta / alpha)
}

/// Coefficients `(alpha, beta)` of the scale equation for `c3`.
pub fn scale_coefficients(rel_a: &RigidPose, t_j2j: &RigidPose, c3: &Correspondence) -> (f64, f64) {
    let r21 = &t_j2j.rotation;
    let rot = r21 * rel_a.rotation;
    let pi = rot * c3.query_h();
    let pj = c3.reference_h();
    let alpha = pj.dot(&(skew(&(r21 * rel_a.translation)) * pi));
    let beta = pj.dot(&(skew(&t_j2j.translation) * pi));
    (alpha, beta)
}

/// Absolute pose for a 2p1p sample: relative motion to `j` with the solved
/// scale, chained with the known pose of `j`.
pub fn pose_2p1p(rel_a: &RigidPose, rho: f64, reference_a: &RigidPose) -> ScaleSolution {
    let relative = RigidPose::new(rel_a.rotation, rel_a.translation * rho);
    ScaleSolution {
        rho,
        rho2: None,
        query_pose: absolute_from_relative(&relative, reference_a),
        regularized: false,
    }
}
