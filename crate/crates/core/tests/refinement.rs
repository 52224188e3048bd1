use nalgebra::{Rotation3, Vector2, Vector3, Vector6};
use planarloc::absolute::ReferenceView;
use planarloc::geometry::{Correspondence, RigidPose};
use planarloc::refine::*;
use planarloc::synth::{generate, WorldConfig};
use planarloc::{pose_error, SyntheticScene};
use rand::Rng;

mod common;

fn random_rigid(rng: &mut impl Rng) -> RigidPose {
    let axis = Vector3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    );
    let r = Rotation3::new(axis * rng.random_range(0.1..2.5)).into_inner();
    let t = Vector3::new(
        rng.random_range(-3.0..3.0),
        rng.random_range(-3.0..3.0),
        rng.random_range(-3.0..3.0),
    );
    RigidPose::new(r, t)
}

fn central_difference(
    query: &RigidPose,
    reference: &RigidPose,
    c: &Correspondence,
) -> Vector6<f64> {
    let h = 1e-6;
    let mut g = Vector6::zeros();
    for k in 0..6 {
        let mut d = Vector6::zeros();
        d[k] = h;
        let at = |s: f64| {
            let w = Vector3::new(d[0], d[1], d[2]) * s;
            let t = Vector3::new(d[3], d[4], d[5]) * s;
            sampson_jacobian(&query.perturbed(&w, &t), reference, c)
                .unwrap()
                .0
        };
        g[k] = (at(1.0) - at(-1.0)) / (2.0 * h);
    }
    g
}

#[test]
fn jacobian_matches_finite_differences() {
    let mut rng = common::rng(99);
    let mut tested = 0;
    while tested < 100 {
        let query = random_rigid(&mut rng);
        let reference = random_rigid(&mut rng);
        let c = Correspondence::new(
            Vector2::new(rng.random_range(-0.8..0.8), rng.random_range(-0.8..0.8)),
            Vector2::new(rng.random_range(-0.8..0.8), rng.random_range(-0.8..0.8)),
            0,
        );
        let Some((_, analytic)) = sampson_jacobian(&query, &reference, &c) else {
            continue;
        };
        let numeric = central_difference(&query, &reference, &c);
        let rel = (analytic - numeric).norm() / analytic.norm().max(numeric.norm()).max(1e-12);
        assert!(
            rel < 1e-4,
            "relative error {rel}: {analytic:?} vs {numeric:?}"
        );
        tested += 1;
    }
}

fn scene(seed: u64, sigma: f64) -> SyntheticScene {
    generate(&WorldConfig {
        n_matches: 20,
        noise_sigma_px: sigma,
        seed,
        ..WorldConfig::default()
    })
    .unwrap()
}

fn all_inliers(refs: &[ReferenceView]) -> Vec<Vec<usize>> {
    refs.iter()
        .map(|r| (0..r.correspondences.len()).collect())
        .collect()
}

#[test]
fn ground_truth_is_stationary() {
    let s = scene(1, 0.0);
    let refs = &s.problem.references;
    let r = refine_pose(&s.ground_truth, refs, &all_inliers(refs));
    assert!(r.converged);
    let e = pose_error(&r.pose, &s.ground_truth);
    assert!(e.translation_m < 1e-12 && e.rotation_deg < 1e-10);
}

#[test]
fn recovers_from_small_perturbation() {
    let mut rng = common::rng(4);
    for seed in 0..20 {
        let s = scene(seed, 0.0);
        let refs = &s.problem.references;
        let axis = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let dir = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let start = s.ground_truth.perturbed(
            &(axis.normalize() * 1f64.to_radians()),
            &(dir.normalize() * 0.05),
        );
        let r = refine_pose(&start, refs, &all_inliers(refs));
        assert!(r.final_cost <= r.initial_cost);
        let e = pose_error(&r.pose, &s.ground_truth);
        assert!(
            e.translation_m < 1e-6 && e.rotation_deg < 1e-6,
            "seed {seed}: {e:?}"
        );
    }
}

#[test]
fn refinement_never_raises_cost_and_lowers_mean_error() {
    let (mut before, mut after) = ((0.0, 0.0), (0.0, 0.0));
    for seed in 0..100 {
        let s = scene(1000 + seed, 2.0);
        let res = planarloc::estimate_2p1p(&s.problem).unwrap();
        let r = refine_pose(
            &res.unrefined_pose,
            &s.problem.references,
            &res.hypothesis_inliers,
        );
        assert!(r.final_cost <= r.initial_cost);
        let e0 = pose_error(&res.unrefined_pose, &s.ground_truth);
        let e1 = pose_error(&res.pose, &s.ground_truth);
        before = (before.0 + e0.translation_m, before.1 + e0.rotation_deg);
        after = (after.0 + e1.translation_m, after.1 + e1.rotation_deg);
    }
    assert!(
        after.0 < before.0 && after.1 < before.1,
        "{after:?} vs {before:?}"
    );
}

#[test]
fn cost_is_sum_of_squared_sampson() {
    let s = scene(5, 1.0);
    let refs = &s.problem.references;
    let inl = all_inliers(refs);
    let rows = residuals_and_jacobian(&s.ground_truth, refs, &inl);
    let sum: f64 = rows.iter().map(|(r, _)| r * r).sum();
    assert!((sum - inlier_cost(&s.ground_truth, refs, &inl)).abs() < 1e-18);
    assert_eq!(rows.len(), 100);
}
