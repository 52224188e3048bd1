#![allow(dead_code)]

use nalgebra::{Vector2, Vector3};
use planarloc::geometry::{Correspondence, PlanarPose, RigidPose};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_planar(rng: &mut impl Rng) -> PlanarPose {
    PlanarPose::new(
        rng.random_range(-PI..PI),
        rng.random_range(0.5..5.0),
        rng.random_range(-PI..PI),
    )
}

fn project(pose: &RigidPose, x: &Vector3<f64>) -> Option<Vector2<f64>> {
    let p = pose.transform_point(x);
    (p.z > 0.1).then(|| Vector2::new(p.x / p.z, p.y / p.z))
}

/// Noise-free matches between the query frame (identity) and a reference at
/// `rel`, from random points in front of both cameras. `None` when the two
/// views share too little.
pub fn planar_matches(
    rng: &mut impl Rng,
    rel: &RigidPose,
    n: usize,
) -> Option<Vec<Correspondence>> {
    let mut out = Vec::with_capacity(n);
    for _ in 0..200 * n {
        let x = Vector3::new(
            rng.random_range(-15.0..15.0),
            rng.random_range(-3.0..3.0),
            rng.random_range(-15.0..15.0),
        );
        if let (Some(q), Some(r)) = (project(&RigidPose::identity(), &x), project(rel, &x)) {
            if q.norm() < 2.0 && r.norm() < 2.0 && q.y.abs() > 1e-3 && r.y.abs() > 1e-3 {
                out.push(Correspondence::new(q, r, 0));
                if out.len() == n {
                    return Some(out);
                }
            }
        }
    }
    None
}

/// A random planar motion whose two views share `n` points, with those
/// matches.
pub fn covisible_planar(rng: &mut impl Rng, n: usize) -> (PlanarPose, Vec<Correspondence>) {
    loop {
        let p = random_planar(rng);
        if let Some(m) = planar_matches(rng, &p.to_rigid(), n) {
            return (p, m);
        }
    }
}

pub fn angle_diff(a: f64, b: f64) -> f64 {
    planarloc::geometry::wrap_angle(a - b).abs()
}
