//! Poses, essential matrices and normalized image points.
//!
//! Every [`RigidPose`] maps points from a source frame into a destination
//! frame: `x_dst = rotation * x_src + translation`. A relative pose between a
//! query view `i` and a reference view `j` maps query-frame points into the
//! reference frame, so the matching essential matrix satisfies
//! `p_j^T E p_i = 0`.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Rotation3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Denominators below this value make the Sampson distance undefined.
pub const SAMPSON_EPS: f64 = 1e-15;

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.sin().atan2(a.cos());
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

/// Cross-product matrix `[v]_x`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rotation about the camera y-axis by `theta`, in the layout used for
/// planar motion.
pub fn yaw_rotation(theta: f64) -> Matrix3<f64> {
    let (s, c) = theta.sin_cos();
    Matrix3::new(c, 0.0, -s, 0.0, 1.0, 0.0, s, 0.0, c)
}

/// Unit translation direction for a planar motion with direction `phi`
/// after a yaw of `theta`: `-R(theta) [sin phi, 0, cos phi]^T`.
pub fn planar_direction(theta: f64, phi: f64) -> Vector3<f64> {
    -(yaw_rotation(theta) * Vector3::new(phi.sin(), 0.0, phi.cos()))
}

/// Three degree-of-freedom ground motion: yaw, translation scale, and
/// translation direction in the xz plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarPose {
    pub theta: f64,
    pub rho: f64,
    pub phi: f64,
}

impl PlanarPose {
    /// Builds a planar pose with angles wrapped into `(-pi, pi]`.
    ///
    /// A negative scale is folded into the direction angle so that `rho`
    /// stays non-negative.
    pub fn new(theta: f64, rho: f64, phi: f64) -> Self {
        let (rho, phi) = if rho < 0.0 {
            (-rho, phi + PI)
        } else {
            (rho, phi)
        };
        Self {
            theta: wrap_angle(theta),
            rho,
            phi: wrap_angle(phi),
        }
    }

    pub fn to_rigid(&self) -> RigidPose {
        planar_to_rigid(self)
    }
}

/// Rotation plus translation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidPose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for RigidPose {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidPose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::new(Matrix3::identity(), Vector3::zeros())
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self::new(rt, -(rt * self.translation))
    }

    /// `self * other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &RigidPose) -> Self {
        Self::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Origin of the source frame expressed in the destination frame's
    /// parent, i.e. the camera center for a world-to-camera pose.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    /// Checks orthonormality and orientation within `1e-9`.
    pub fn is_valid(&self) -> bool {
        let ortho = (self.rotation.transpose() * self.rotation - Matrix3::identity()).norm();
        ortho <= 1e-9 && (self.rotation.determinant() - 1.0).abs() <= 1e-9
    }

    /// Essential matrix `[t]_x R` for this pose read as a relative motion.
    pub fn essential(&self) -> EssentialMatrix {
        EssentialMatrix::new(skew(&self.translation) * self.rotation)
    }

    /// Applies a left rotation increment given as an axis-angle vector and
    /// an additive translation increment.
    pub fn perturbed(&self, omega: &Vector3<f64>, dt: &Vector3<f64>) -> Self {
        let r = Rotation3::new(*omega).into_inner();
        Self::new(r * self.rotation, self.translation + dt)
    }
}

/// A 3x3 essential matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EssentialMatrix {
    pub matrix: Matrix3<f64>,
}

impl EssentialMatrix {
    pub fn new(matrix: Matrix3<f64>) -> Self {
        Self { matrix }
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self::new(self.matrix * k)
    }

    /// Algebraic epipolar error `p_j^T E p_i`.
    pub fn algebraic(&self, c: &Correspondence) -> f64 {
        c.reference_h().dot(&(self.matrix * c.query_h()))
    }
}

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Self {
        Self { fx, fy, cx, cy }
    }

    pub fn is_valid(&self) -> bool {
        self.fx > 0.0 && self.fy > 0.0 && self.cx.is_finite() && self.cy.is_finite()
    }

    pub fn mean_focal(&self) -> f64 {
        0.5 * (self.fx + self.fy)
    }

    /// Projects a normalized point back to pixels.
    pub fn denormalize(&self, p: &Vector2<f64>) -> Vector2<f64> {
        Vector2::new(p.x * self.fx + self.cx, p.y * self.fy + self.cy)
    }
}

/// Maps a pixel to normalized image coordinates, `K^-1 [u, v, 1]^T`.
pub fn normalize_pixel(p: &Vector2<f64>, k: &CameraIntrinsics) -> Vector2<f64> {
    Vector2::new((p.x - k.cx) / k.fx, (p.y - k.cy) / k.fy)
}

/// One normalized 2D-2D match between the query and a reference view.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    pub query_point: Vector2<f64>,
    pub reference_point: Vector2<f64>,
    pub reference_index: usize,
}

impl Correspondence {
    pub fn new(
        query_point: Vector2<f64>,
        reference_point: Vector2<f64>,
        reference_index: usize,
    ) -> Self {
        Self {
            query_point,
            reference_point,
            reference_index,
        }
    }

    pub fn query_h(&self) -> Vector3<f64> {
        self.query_point.push(1.0)
    }

    pub fn reference_h(&self) -> Vector3<f64> {
        self.reference_point.push(1.0)
    }

    pub fn is_finite(&self) -> bool {
        self.query_point
            .iter()
            .chain(self.reference_point.iter())
            .all(|v| v.is_finite())
    }
}

/// Rigid motion of a planar pose: yaw rotation `R` and translation
/// `-R rho [sin phi, 0, cos phi]^T`.
pub fn planar_to_rigid(pose: &PlanarPose) -> RigidPose {
    let r = yaw_rotation(pose.theta);
    let t = planar_direction(pose.theta, pose.phi) * pose.rho;
    RigidPose::new(r, t)
}

/// Closed-form essential matrix of a planar motion.
pub fn essential_from_planar(pose: &PlanarPose) -> Result<EssentialMatrix> {
    if !(pose.rho > 0.0) {
        return Err(Error::DegenerateMotion(pose.rho));
    }
    let (s_tp, c_tp) = (pose.theta - pose.phi).sin_cos();
    let (s_p, c_p) = pose.phi.sin_cos();
    let m = Matrix3::new(0.0, c_tp, 0.0, -c_p, 0.0, s_p, 0.0, s_tp, 0.0) * pose.rho;
    Ok(EssentialMatrix::new(m))
}

/// Signed Sampson distance: the algebraic error divided by the norm of its
/// gradient with respect to the four image coordinates. `None` when the
/// gradient vanishes.
pub fn signed_sampson(c: &Correspondence, e: &EssentialMatrix) -> Option<f64> {
    let pi = c.query_h();
    let pj = c.reference_h();
    let ep = e.matrix * pi;
    let etp = e.matrix.transpose() * pj;
    let denom = ep.x * ep.x + ep.y * ep.y + etp.x * etp.x + etp.y * etp.y;
    if denom < SAMPSON_EPS * SAMPSON_EPS || !denom.is_finite() {
        return None;
    }
    Some(pj.dot(&ep) / denom.sqrt())
}

/// Sampson distance of a correspondence to the epipolar constraint of `e`.
///
/// Returns `f64::INFINITY` when the point sits at an epipole and the
/// distance is undefined.
pub fn epipolar_residual(c: &Correspondence, e: &EssentialMatrix) -> f64 {
    signed_sampson(c, e).map_or(f64::INFINITY, f64::abs)
}

/// Angle of a rotation matrix in degrees, `acos((tr R - 1) / 2)` with the
/// argument clamped.
pub fn rotation_angle_deg(r: &Matrix3<f64>) -> f64 {
    clamped_acos(0.5 * r.trace() - 0.5).to_degrees()
}

/// Same angle as [`rotation_angle_deg`], computed as
/// `atan2(|vee(R - R^T)| / 2, (tr R - 1) / 2)` so that angles near zero keep
/// full precision.
pub fn rotation_angle_precise_deg(r: &Matrix3<f64>) -> f64 {
    let s = Vector3::new(
        r[(2, 1)] - r[(1, 2)],
        r[(0, 2)] - r[(2, 0)],
        r[(1, 0)] - r[(0, 1)],
    )
    .norm()
        * 0.5;
    let c = 0.5 * (r.trace() - 1.0);
    s.atan2(c).to_degrees()
}

/// `acos` with its argument clamped to `[-1, 1]`.
pub fn clamped_acos(x: f64) -> f64 {
    x.clamp(-1.0, 1.0).acos()
}
