//! Pose error metrics and success rates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{rotation_angle_precise_deg, RigidPose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseError {
    pub rotation_deg: f64,
    pub translation_m: f64,
    pub direction_deg: f64,
}

/// Rotation angle of `R R_gt^T` (trace formula, evaluated in its
/// precision-preserving atan2 form), the norm of the translation difference,
/// and the angle between the estimated and true translation vectors.
pub fn pose_error(estimate: &RigidPose, truth: &RigidPose) -> PoseError {
    let rotation_deg =
        rotation_angle_precise_deg(&(estimate.rotation * truth.rotation.transpose()));
    let translation_m = (estimate.translation - truth.translation).norm();
    let (te, tg) = (estimate.translation.norm(), truth.translation.norm());
    let direction_deg = if tg < 1e-12 || te < 1e-12 {
        0.0
    } else {
        let (a, b) = (&estimate.translation, &truth.translation);
        a.cross(b).norm().atan2(a.dot(b)).to_degrees()
    };
    PoseError {
        rotation_deg,
        translation_m,
        direction_deg,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessCriterion {
    pub max_translation_m: f64,
    pub max_rotation_deg: f64,
}

impl SuccessCriterion {
    /// 0.1 m and 1 degree, the simulation criterion.
    pub const SIMULATION: SuccessCriterion = SuccessCriterion {
        max_translation_m: 0.1,
        max_rotation_deg: 1.0,
    };

    /// Strictly below both bounds. NaN errors never succeed.
    pub fn accepts(&self, e: &PoseError) -> bool {
        e.translation_m < self.max_translation_m && e.rotation_deg < self.max_rotation_deg
    }
}

/// Fraction of errors accepted by `criterion`.
pub fn success_rate(errors: &[PoseError], criterion: &SuccessCriterion) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::EmptyInput);
    }
    let ok = errors.iter().filter(|e| criterion.accepts(e)).count();
    Ok(ok as f64 / errors.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::yaw_rotation;
    use nalgebra::Vector3;

    fn err(t: f64, r: f64) -> PoseError {
        PoseError {
            rotation_deg: r,
            translation_m: t,
            direction_deg: 0.0,
        }
    }

    #[test]
    fn identical_poses_have_zero_error() {
        let p = RigidPose::new(yaw_rotation(0.3), Vector3::new(1.0, 0.0, 2.0));
        let e = pose_error(&p, &p);
        assert_eq!(e.translation_m, 0.0);
        assert!(e.rotation_deg < 1e-6 && e.direction_deg < 1e-6);
    }

    #[test]
    fn rotation_offset_about_y() {
        let t = Vector3::new(1.0, 0.0, 2.0);
        let a = RigidPose::new(yaw_rotation(10f64.to_radians()), t);
        let b = RigidPose::new(nalgebra::Matrix3::identity(), t);
        assert!((pose_error(&a, &b).rotation_deg - 10.0).abs() < 1e-9);
    }

    #[test]
    fn three_four_five() {
        let a = RigidPose::new(nalgebra::Matrix3::identity(), Vector3::new(1.3, 2.0, 3.4));
        let b = RigidPose::new(nalgebra::Matrix3::identity(), Vector3::new(1.0, 2.0, 3.0));
        assert!((pose_error(&a, &b).translation_m - 0.5).abs() < 1e-12);
    }

    #[test]
    fn direction_zero_for_vanishing_truth() {
        let a = RigidPose::new(nalgebra::Matrix3::identity(), Vector3::new(1.0, 0.0, 0.0));
        let b = RigidPose::identity();
        assert_eq!(pose_error(&a, &b).direction_deg, 0.0);
    }

    #[test]
    fn success_rate_examples() {
        let c = SuccessCriterion::SIMULATION;
        assert_eq!(success_rate(&[err(0.0, 0.0); 4], &c), Ok(1.0));
        let mixed = [err(0.05, 0.5), err(0.2, 0.5), err(0.05, 0.5), err(0.2, 0.5)];
        assert_eq!(success_rate(&mixed, &c), Ok(0.5));
        assert_eq!(success_rate(&[], &c), Err(Error::EmptyInput));
        assert_eq!(success_rate(&[err(f64::NAN, f64::NAN)], &c), Ok(0.0));
    }
}
