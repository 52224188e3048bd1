//! Two-point essential matrix estimation under planar motion.
//!
//! With `x = [sin(theta - phi), cos(theta - phi), sin phi, cos phi]`, each
//! correspondence contributes one linear row `a x1 + b x2 + c x3 + d x4 = 0`.
//! Two rows leave a two-dimensional kernel; intersecting it with the two
//! unit-circle constraints gives at most two ratio roots, each emitted with
//! both signs.

use nalgebra::{Matrix2, Matrix4, Vector2, Vector3, Vector4};

use crate::error::{Error, Result};
use crate::geometry::{
    epipolar_residual, essential_from_planar, planar_direction, wrap_angle, yaw_rotation,
    Correspondence, EssentialMatrix, PlanarPose, RigidPose,
};

/// Relative rank tolerance of the 2x4 constraint matrix.
const RANK_TOL: f64 = 1e-10;
/// Roots whose imaginary part is below this fraction of the real part are
/// accepted as real.
const IMAG_TOL: f64 = 1e-10;

/// Coefficients of one correspondence's planar epipolar constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpipolarRow {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl EpipolarRow {
    pub fn as_vector(&self) -> Vector4<f64> {
        Vector4::new(self.a, self.b, self.c, self.d)
    }

    pub fn dot(&self, x: &TrigSolution) -> f64 {
        self.as_vector().dot(&x.as_vector())
    }
}

/// `(sin(theta - phi), cos(theta - phi), sin phi, cos phi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrigSolution {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
    pub x4: f64,
}

impl TrigSolution {
    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self {
            x1: v[0],
            x2: v[1],
            x3: v[2],
            x4: v[3],
        }
    }

    /// Trigonometric vector of a planar motion.
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        let (s_tp, c_tp) = (theta - phi).sin_cos();
        let (s_p, c_p) = phi.sin_cos();
        Self {
            x1: s_tp,
            x2: c_tp,
            x3: s_p,
            x4: c_p,
        }
    }

    pub fn as_vector(&self) -> Vector4<f64> {
        Vector4::new(self.x1, self.x2, self.x3, self.x4)
    }

    /// Largest violation of the two unit-circle constraints.
    pub fn circle_violation(&self) -> f64 {
        let a = (self.x1 * self.x1 + self.x2 * self.x2 - 1.0).abs();
        let b = (self.x3 * self.x3 + self.x4 * self.x4 - 1.0).abs();
        a.max(b)
    }
}

/// A planar relative pose with unit translation direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativePoseCandidate {
    pub theta: f64,
    pub phi: f64,
    pub direction: Vector3<f64>,
}

impl RelativePoseCandidate {
    pub fn new(theta: f64, phi: f64) -> Self {
        let theta = wrap_angle(theta);
        let phi = wrap_angle(phi);
        Self {
            theta,
            phi,
            direction: planar_direction(theta, phi),
        }
    }

    pub fn from_solution(s: &TrigSolution) -> Self {
        let (theta, phi) = angles_from(s);
        Self::new(theta, phi)
    }

    pub fn rotation(&self) -> nalgebra::Matrix3<f64> {
        yaw_rotation(self.theta)
    }

    /// Relative pose with the translation scaled by `rho`.
    pub fn with_scale(&self, rho: f64) -> RigidPose {
        RigidPose::new(self.rotation(), self.direction * rho)
    }

    pub fn essential(&self) -> EssentialMatrix {
        essential_from_planar(&PlanarPose::new(self.theta, 1.0, self.phi))
            .expect("unit scale is never degenerate")
    }
}

/// Planar epipolar row `(v_i, v_i u_j, v_j, -u_i v_j)` of a correspondence.
pub fn build_constraint_row(c: &Correspondence) -> EpipolarRow {
    let (ui, vi) = (c.query_point.x, c.query_point.y);
    let (uj, vj) = (c.reference_point.x, c.reference_point.y);
    EpipolarRow {
        a: vi,
        b: vi * uj,
        c: vj,
        d: -ui * vj,
    }
}

/// Solves the planar relative pose from two correspondences to one
/// reference view. Returns up to four trigonometric solutions, closed under
/// negation.
pub fn solve_2p(c1: &Correspondence, c2: &Correspondence) -> Result<Vec<TrigSolution>> {
    solve_rows(&build_constraint_row(c1), &build_constraint_row(c2))
}

/// Same as [`solve_2p`] from precomputed rows.
pub fn solve_rows(r1: &EpipolarRow, r2: &EpipolarRow) -> Result<Vec<TrigSolution>> {
    let mut a = Matrix4::zeros();
    a.set_row(0, &r1.as_vector().transpose());
    a.set_row(1, &r2.as_vector().transpose());
    if !a.iter().all(|v| v.is_finite()) {
        return Err(Error::DegenerateConfiguration("non-finite coordinates"));
    }

    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let s_max = svd.singular_values[0];
    let s_second = svd.singular_values[1];
    if s_max == 0.0 || s_second <= RANK_TOL * s_max {
        return Err(Error::DegenerateConfiguration(
            "constraint matrix has rank below two",
        ));
    }
    let k1: Vector4<f64> = v_t.row(2).transpose();
    let k2: Vector4<f64> = v_t.row(3).transpose();

    // Quadratic forms of the two circle constraints on the kernel
    // coordinates. Since the kernel basis is orthonormal, m1 + m2 = I.
    let p1 = Vector2::new(k1[0], k1[1]);
    let p2 = Vector2::new(k2[0], k2[1]);
    let m1 = Matrix2::new(p1.dot(&p1), p1.dot(&p2), p1.dot(&p2), p2.dot(&p2));
    let q1 = Vector2::new(k1[2], k1[3]);
    let q2 = Vector2::new(k2[2], k2[3]);
    let m2 = Matrix2::new(q1.dot(&q1), q1.dot(&q2), q1.dot(&q2), q2.dot(&q2));
    let d = m1 - m2;

    let ratios = homogeneous_roots(d[(0, 0)], d[(0, 1)], d[(1, 1)])?;

    let mut out = Vec::with_capacity(4);
    for lambda in ratios {
        let q = lambda.dot(&(m1 * lambda));
        if !(q > 0.0) {
            continue;
        }
        let lambda = lambda / q.sqrt();
        let x = k1 * lambda.x + k2 * lambda.y;
        let s = TrigSolution::from_vector(&x);
        let neg = TrigSolution::from_vector(&(-x));
        out.push(s);
        out.push(neg);
    }
    if out.is_empty() {
        return Err(Error::NoRealSolution);
    }
    Ok(out)
}

/// Real directions `lambda` with `d11 l1^2 + 2 d12 l1 l2 + d22 l2^2 = 0`,
/// solved through the ratio `r = l1 / l2` plus the `l2 = 0` branch.
fn homogeneous_roots(d11: f64, d12: f64, d22: f64) -> Result<Vec<Vector2<f64>>> {
    let scale = d11.abs().max(d12.abs()).max(d22.abs());
    if scale == 0.0 {
        return Err(Error::DegenerateConfiguration(
            "circle constraints coincide on the kernel",
        ));
    }
    let (d11, d12, d22) = (d11 / scale, d12 / scale, d22 / scale);

    let mut roots = Vec::with_capacity(2);
    if d11.abs() <= 1e-14 {
        // Leading coefficient vanishes: one root escapes to l2 = 0.
        roots.push(Vector2::new(1.0, 0.0));
        if d12.abs() > 1e-14 {
            roots.push(Vector2::new(-d22 / (2.0 * d12), 1.0));
        }
        return Ok(roots);
    }

    let disc = d12 * d12 - d11 * d22;
    if disc < 0.0 {
        // Complex pair -d12/d11 +- i sqrt(-disc)/d11.
        let imag = (-disc).sqrt();
        if imag < IMAG_TOL * d12.abs() {
            roots.push(Vector2::new(-d12 / d11, 1.0));
            return Ok(roots);
        }
        return Err(Error::NoRealSolution);
    }
    let sq = disc.sqrt();
    // Stable pair: r1 = (-d12 - sign(d12) sq) / d11, r2 = d22 / (d11 r1).
    let qv = -(d12 + d12.signum() * sq);
    if qv == 0.0 {
        // d12 = 0 and disc = 0: double root at r = 0.
        roots.push(Vector2::new(0.0, 1.0));
        return Ok(roots);
    }
    roots.push(Vector2::new(qv / d11, 1.0));
    if sq > 0.0 {
        // Second root d22 / qv; written as the direction (d22, qv) to stay
        // finite when qv is tiny.
        roots.push(Vector2::new(d22, qv));
    }
    Ok(roots)
}

/// Yaw and translation direction encoded by a trigonometric solution.
pub fn angles_from(s: &TrigSolution) -> (f64, f64) {
    let phi = s.x3.atan2(s.x4);
    let theta = wrap_angle(s.x1.atan2(s.x2) + phi);
    (theta, phi)
}

/// Candidate relative poses for every solution returned by [`solve_2p`].
pub fn candidates(solutions: &[TrigSolution]) -> Vec<RelativePoseCandidate> {
    solutions
        .iter()
        .map(RelativePoseCandidate::from_solution)
        .collect()
}

/// Midpoint triangulation of a correspondence under relative pose `(r, t)`,
/// mapping query-frame points into the reference frame. Returns the depth
/// along the query ray and along the reference ray, or `None` when the rays
/// are parallel.
pub fn midpoint_depths(
    r: &nalgebra::Matrix3<f64>,
    t: &Vector3<f64>,
    c: &Correspondence,
) -> Option<(f64, f64)> {
    // t + a R p_i ~ b p_j, solved in least squares.
    let d1 = r * c.query_h();
    let d2 = c.reference_h();
    let a11 = d1.dot(&d1);
    let a12 = -d1.dot(&d2);
    let a22 = d2.dot(&d2);
    let b1 = -d1.dot(t);
    let b2 = d2.dot(t);
    let det = a11 * a22 - a12 * a12;
    if det.abs() <= 1e-14 * a11 * a22 {
        return None;
    }
    let a = (b1 * a22 - a12 * b2) / det;
    let b = (a11 * b2 - a12 * b1) / det;
    Some((a, b))
}

/// Number of correspondences triangulating in front of both cameras.
pub fn positive_depth_count(
    r: &nalgebra::Matrix3<f64>,
    t: &Vector3<f64>,
    matches: &[Correspondence],
) -> usize {
    matches
        .iter()
        .filter(|c| matches!(midpoint_depths(r, t, c), Some((a, b)) if a > 0.0 && b > 0.0))
        .count()
}

/// Picks the candidate with the most matches in front of both cameras under
/// a unit baseline. Ties fall back to the lower mean Sampson residual.
pub fn cheirality_select(
    candidates: &[RelativePoseCandidate],
    matches: &[Correspondence],
) -> Result<RelativePoseCandidate> {
    select_by_depth(
        candidates,
        matches,
        |c| c.rotation(),
        |c| c.direction,
        |c| c.essential(),
    )
}

/// Shared selection rule for planar and general candidates.
pub(crate) fn select_by_depth<C: Copy>(
    candidates: &[C],
    matches: &[Correspondence],
    rotation: impl Fn(&C) -> nalgebra::Matrix3<f64>,
    direction: impl Fn(&C) -> Vector3<f64>,
    essential: impl Fn(&C) -> EssentialMatrix,
) -> Result<C> {
    match candidates {
        [] => return Err(Error::DegenerateConfiguration("no candidates")),
        [only] => return Ok(*only),
        _ => {}
    }
    let counts: Vec<usize> = candidates
        .iter()
        .map(|cand| positive_depth_count(&rotation(cand), &direction(cand), matches))
        .collect();
    let top = *counts.iter().max().expect("at least two candidates");
    let tied: Vec<usize> = (0..candidates.len())
        .filter(|&i| counts[i] == top)
        .collect();
    if let [only] = tied[..] {
        return Ok(candidates[only]);
    }

    // Mean Sampson residual decides among the candidates sharing the top count.
    let mean = |cand: &C| {
        let e = essential(cand);
        if matches.is_empty() {
            0.0
        } else {
            matches
                .iter()
                .map(|m| epipolar_residual(m, &e))
                .sum::<f64>()
                / matches.len() as f64
        }
    };
    let mut ranked: Vec<(f64, usize)> = tied.iter().map(|&i| (mean(&candidates[i]), i)).collect();
    // Stable sort keeps the input order among exact ties.
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0));
    if (ranked[0].0 - ranked[1].0).abs() <= 1e-12 {
        return Err(Error::CheiralityAmbiguous);
    }
    Ok(candidates[ranked[0].1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn project(pose: &RigidPose, x: &Vector3<f64>) -> nalgebra::Vector2<f64> {
        let p = pose.transform_point(x);
        nalgebra::Vector2::new(p.x / p.z, p.y / p.z)
    }

    fn matches_for(pose: &PlanarPose, points: &[Vector3<f64>]) -> Vec<Correspondence> {
        let t = pose.to_rigid();
        points
            .iter()
            .map(|x| Correspondence::new(project(&RigidPose::identity(), x), project(&t, x), 0))
            .collect()
    }

    #[test]
    fn row_examples() {
        let c = Correspondence::new(nalgebra::Vector2::zeros(), nalgebra::Vector2::zeros(), 0);
        let r = build_constraint_row(&c);
        assert_eq!(r.as_vector(), Vector4::zeros());

        let c = Correspondence::new(
            nalgebra::Vector2::new(0.1, 0.2),
            nalgebra::Vector2::new(0.3, 0.4),
            0,
        );
        let r = build_constraint_row(&c);
        // (0.2, 0.2*0.3, 0.4, -0.1*0.4)
        assert_abs_diff_eq!(
            r.as_vector(),
            Vector4::new(0.2, 0.06, 0.4, -0.04),
            epsilon = 1e-15
        );
    }

    #[test]
    fn row_annihilates_true_motion() {
        let pose = PlanarPose::new(0.7, 2.0, -0.3);
        let x = TrigSolution::from_angles(pose.theta, pose.phi);
        for c in matches_for(
            &pose,
            &[Vector3::new(1.0, -0.5, 6.0), Vector3::new(-2.0, 1.5, 9.0)],
        ) {
            assert!(build_constraint_row(&c).dot(&x).abs() < 1e-12);
        }
    }

    #[test]
    fn angles_examples() {
        let (t, p) = angles_from(&TrigSolution {
            x1: 0.0,
            x2: 1.0,
            x3: 0.0,
            x4: 1.0,
        });
        assert_eq!((t, p), (0.0, 0.0));
        let (t, p) = angles_from(&TrigSolution {
            x1: 1.0,
            x2: 0.0,
            x3: 0.0,
            x4: 1.0,
        });
        assert_abs_diff_eq!(t, FRAC_PI_2);
        assert_eq!(p, 0.0);
        let (t, p) = angles_from(&TrigSolution::from_angles(2.0, -1.0));
        assert_abs_diff_eq!(t, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn duplicate_points_are_degenerate() {
        let pose = PlanarPose::new(0.2, 1.0, 0.4);
        let m = matches_for(&pose, &[Vector3::new(1.0, 1.0, 5.0)]);
        assert!(matches!(
            solve_2p(&m[0], &m[0]),
            Err(Error::DegenerateConfiguration(_))
        ));
    }

    #[test]
    fn horizon_points_are_degenerate() {
        let a = Correspondence::new(
            nalgebra::Vector2::new(0.1, 0.0),
            nalgebra::Vector2::new(0.3, 0.0),
            0,
        );
        let b = Correspondence::new(
            nalgebra::Vector2::new(-0.2, 0.0),
            nalgebra::Vector2::new(0.5, 0.0),
            0,
        );
        assert!(matches!(
            solve_2p(&a, &b),
            Err(Error::DegenerateConfiguration(_))
        ));
    }

    #[test]
    fn recovers_fixed_motion() {
        let pose = PlanarPose::new(0.9, 1.5, -2.1);
        let m = matches_for(
            &pose,
            &[Vector3::new(1.0, -0.8, 6.0), Vector3::new(-2.0, 1.1, 8.0)],
        );
        let sols = solve_2p(&m[0], &m[1]).unwrap();
        assert!(sols.len() % 2 == 0 && !sols.is_empty());
        let hit = sols.iter().map(angles_from).any(|(t, p)| {
            wrap_angle(t - pose.theta).abs() < 1e-9 && wrap_angle(p - pose.phi).abs() < 1e-9
        });
        assert!(hit, "{sols:?}");
    }

    #[test]
    fn cheirality_prefers_true_direction() {
        let pose = PlanarPose::new(0.3, 1.0, 0.6);
        let pts: Vec<_> = (0..10)
            .map(|k| {
                Vector3::new(
                    -2.0 + 0.4 * k as f64,
                    0.3 * (k as f64).sin(),
                    6.0 + k as f64 * 0.5,
                )
            })
            .collect();
        let m = matches_for(&pose, &pts);
        let good = RelativePoseCandidate::new(pose.theta, pose.phi);
        let flipped = RelativePoseCandidate::new(pose.theta, pose.phi + PI);
        let pick = cheirality_select(&[flipped, good], &m).unwrap();
        assert_abs_diff_eq!(pick.phi, good.phi, epsilon = 1e-12);

        let only = cheirality_select(&[flipped], &m).unwrap();
        assert_eq!(only, flipped);
    }

    #[test]
    fn cheirality_rejects_points_behind_query() {
        // Scene behind the query camera: candidate A sees it at negative
        // depth, candidate B with the mirrored geometry in front.
        let pose_b = PlanarPose::new(0.2, 1.0, 0.3);
        let pts: Vec<_> = (0..8)
            .map(|k| {
                Vector3::new(
                    -1.5 + 0.4 * k as f64,
                    0.2 * k as f64 - 0.7,
                    7.0 + 0.3 * k as f64,
                )
            })
            .collect();
        let m = matches_for(&pose_b, &pts);
        let b = RelativePoseCandidate::new(pose_b.theta, pose_b.phi);
        let a = RelativePoseCandidate::new(pose_b.theta, pose_b.phi + PI);
        assert_eq!(positive_depth_count(&a.rotation(), &a.direction, &m), 0);
        let pick = cheirality_select(&[a, b], &m).unwrap();
        assert_eq!(pick, b);
    }

    #[test]
    fn cheirality_exact_tie_is_ambiguous() {
        let c = RelativePoseCandidate::new(0.1, 0.2);
        assert_eq!(
            cheirality_select(&[c, c], &[]),
            Err(Error::CheiralityAmbiguous)
        );
    }
}
