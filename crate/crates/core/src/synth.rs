//! Synthetic localization scenes: random map points in a cube, planar camera
//! poses, noisy projections and outliers projected through wrong poses.

use std::f64::consts::PI;

use nalgebra::{Vector2, Vector3};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::absolute::{relative_from_absolute, CheckThresholds, ReferenceView};
use crate::error::{Error, Result};
use crate::geometry::{
    epipolar_residual, normalize_pixel, yaw_rotation, CameraIntrinsics, Correspondence,
    EssentialMatrix, RigidPose,
};
use crate::ransac::LocalizationProblem;

/// Layout redraws, and draws of a wrong pose for one outlier, before giving up.
pub const MAX_ATTEMPTS: usize = 1000;
/// Pose draws per reference within one layout.
const REFERENCE_ATTEMPTS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub point_cube_half_width: f64,
    /// Camera centers are drawn from `[-r, r]` along x and z.
    pub translation_range: f64,
    /// Yaw is drawn from `[-r, r]`.
    pub rotation_range: f64,
    pub focal: f64,
    pub resolution: (u32, u32),
    pub principal_point: (f64, f64),
    /// Correspondences per reference view.
    pub n_matches: usize,
    pub noise_sigma_px: f64,
    pub outlier_rate: f64,
    pub n_references: usize,
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            point_cube_half_width: 10.0,
            translation_range: 5.0,
            rotation_range: PI,
            focal: 800.0,
            resolution: (1280, 1080),
            principal_point: (640.0, 540.0),
            n_matches: 100,
            noise_sigma_px: 0.0,
            outlier_rate: 0.0,
            n_references: 5,
            seed: 0,
        }
    }
}

impl WorldConfig {
    pub fn intrinsics(&self) -> CameraIntrinsics {
        CameraIntrinsics::new(
            self.focal,
            self.focal,
            self.principal_point.0,
            self.principal_point.1,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidProblem(m.to_string()));
        if !(0.0..=1.0).contains(&self.outlier_rate) {
            return bad("outlier_rate must lie in [0, 1]");
        }
        if self.n_matches < 1 {
            return bad("n_matches must be at least 1");
        }
        if self.n_references < 2 {
            return bad("n_references must be at least 2");
        }
        if !(self.noise_sigma_px >= 0.0)
            || !(self.focal > 0.0)
            || !(self.point_cube_half_width > 0.0)
        {
            return bad("noise, focal and cube size must be non-negative / positive");
        }
        Ok(())
    }

    fn in_image(&self, px: &Vector2<f64>) -> bool {
        px.x >= 0.0
            && px.y >= 0.0
            && px.x <= self.resolution.0 as f64
            && px.y <= self.resolution.1 as f64
    }

    /// Pixel projection of a world point, or `None` when it is behind the
    /// camera or outside the image.
    pub fn project(&self, pose: &RigidPose, x: &Vector3<f64>) -> Option<Vector2<f64>> {
        let p = pose.transform_point(x);
        if !(p.z > 0.0) {
            return None;
        }
        let px = Vector2::new(
            self.focal * p.x / p.z + self.principal_point.0,
            self.focal * p.y / p.z + self.principal_point.1,
        );
        self.in_image(&px).then_some(px)
    }

    /// World-to-camera pose with yaw and center drawn from the configured
    /// ranges. Roll, pitch and height are zero.
    pub fn random_pose(&self, rng: &mut impl Rng) -> RigidPose {
        let theta = rng.random_range(-self.rotation_range..=self.rotation_range);
        let r = self.translation_range;
        let center = Vector3::new(rng.random_range(-r..=r), 0.0, rng.random_range(-r..=r));
        planar_camera(theta, &center)
    }
}

/// World-to-camera pose of a camera at `center` with yaw `theta`.
pub fn planar_camera(theta: f64, center: &Vector3<f64>) -> RigidPose {
    let r = yaw_rotation(theta);
    RigidPose::new(r, -(r * center))
}

/// A generated problem with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub problem: LocalizationProblem,
    pub ground_truth: RigidPose,
    /// `outlier_mask[j][k]` flags correspondence `k` of reference `j`.
    pub outlier_mask: Vec<Vec<bool>>,
    /// World point behind every correspondence.
    pub world_points: Vec<Vec<Vector3<f64>>>,
    pub config: WorldConfig,
}

impl SyntheticScene {
    pub fn outlier_count(&self) -> usize {
        self.outlier_mask.iter().flatten().filter(|&&o| o).count()
    }
}

struct Sampler<'a> {
    cfg: &'a WorldConfig,
    rng: ChaCha8Rng,
    noise: Option<Normal<f64>>,
}

impl Sampler<'_> {
    fn noisy(&mut self, px: Vector2<f64>) -> Vector2<f64> {
        match &self.noise {
            Some(n) => px + Vector2::new(n.sample(&mut self.rng), n.sample(&mut self.rng)),
            None => px,
        }
    }

    /// Reference-view observation of `x` through a wrongly drawn pose, redrawn
    /// while it still satisfies the true epipolar geometry `truth` of
    /// `query` (normalized) within the default inlier gate.
    fn outlier_pixel(
        &mut self,
        x: &Vector3<f64>,
        query: &Vector2<f64>,
        truth: &EssentialMatrix,
    ) -> Vector2<f64> {
        let k = self.cfg.intrinsics();
        let gate = CheckThresholds::INLIER_PX / self.cfg.focal;
        let wrong_enough = |px: &Vector2<f64>| {
            epipolar_residual(
                &Correspondence::new(*query, normalize_pixel(px, &k), 0),
                truth,
            ) > gate
        };
        for _ in 0..MAX_ATTEMPTS {
            let wrong = self.cfg.random_pose(&mut self.rng);
            if let Some(px) = self.cfg.project(&wrong, x) {
                let px = self.noisy(px);
                if wrong_enough(&px) {
                    return px;
                }
            }
        }
        // A query point at the epipole is consistent with every pixel; the
        // last uniform draw is kept then.
        let mut px = Vector2::zeros();
        for _ in 0..MAX_ATTEMPTS {
            px = Vector2::new(
                self.rng.random_range(0.0..self.cfg.resolution.0 as f64),
                self.rng.random_range(0.0..self.cfg.resolution.1 as f64),
            );
            if wrong_enough(&px) {
                break;
            }
        }
        px
    }
}

/// Generates a scene deterministically from `config.seed`.
pub fn generate(config: &WorldConfig) -> Result<SyntheticScene> {
    config.validate()?;
    let k = config.intrinsics();
    let noise = (config.noise_sigma_px > 0.0)
        .then(|| Normal::new(0.0, config.noise_sigma_px).expect("sigma is finite and positive"));
    let mut s = Sampler {
        cfg: config,
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        noise,
    };

    let h = config.point_cube_half_width;
    let pool_size = (80 * config.n_matches).max(5000);
    let pool: Vec<Vector3<f64>> = (0..pool_size)
        .map(|_| {
            Vector3::new(
                s.rng.random_range(-h..=h),
                s.rng.random_range(-h..=h),
                s.rng.random_range(-h..=h),
            )
        })
        .collect();

    // A query looking out of the cube can leave too little to share, so the
    // whole layout is redrawn until every reference finds enough co-visible
    // points.
    let mut layout = None;
    for _ in 0..MAX_ATTEMPTS {
        let query = config.random_pose(&mut s.rng);
        let seen: Vec<(Vector3<f64>, Vector2<f64>)> = pool
            .iter()
            .filter_map(|x| config.project(&query, x).map(|px| (*x, px)))
            .collect();
        if seen.len() < config.n_matches {
            continue;
        }
        let mut views = Vec::with_capacity(config.n_references);
        for _ in 0..config.n_references {
            let placed = (0..REFERENCE_ATTEMPTS).find_map(|_| {
                let pose = config.random_pose(&mut s.rng);
                let covisible: Vec<(Vector3<f64>, Vector2<f64>, Vector2<f64>)> = seen
                    .iter()
                    .filter_map(|(x, qpx)| config.project(&pose, x).map(|rpx| (*x, *qpx, rpx)))
                    .collect();
                (covisible.len() >= config.n_matches).then_some((pose, covisible))
            });
            match placed {
                Some(v) => views.push(v),
                None => break,
            }
        }
        if views.len() == config.n_references {
            layout = Some((query, views));
            break;
        }
    }
    let Some((query, views)) = layout else {
        return Err(Error::InfeasibleScene(format!(
            "no layout with {} co-visible points per reference after {MAX_ATTEMPTS} attempts",
            config.n_matches
        )));
    };

    let n_out = (config.outlier_rate * config.n_matches as f64).round() as usize;
    let mut references = Vec::with_capacity(config.n_references);
    let mut masks = Vec::with_capacity(config.n_references);
    let mut world = Vec::with_capacity(config.n_references);
    for (j, (pose, covisible)) in views.into_iter().enumerate() {
        let truth = relative_from_absolute(&query, &pose).essential();
        let chosen = sample(&mut s.rng, covisible.len(), config.n_matches).into_vec();
        let outliers: Vec<usize> = sample(&mut s.rng, config.n_matches, n_out).into_vec();
        let mut mask = vec![false; config.n_matches];
        for &o in &outliers {
            mask[o] = true;
        }

        let mut corr = Vec::with_capacity(config.n_matches);
        let mut pts = Vec::with_capacity(config.n_matches);
        for (slot, &idx) in chosen.iter().enumerate() {
            let (x, qpx, rpx) = covisible[idx];
            let q = s.noisy(qpx);
            let qn = normalize_pixel(&q, &k);
            let r = if mask[slot] {
                s.outlier_pixel(&x, &qn, &truth)
            } else {
                s.noisy(rpx)
            };
            corr.push(Correspondence::new(qn, normalize_pixel(&r, &k), j));
            pts.push(x);
        }
        references.push(ReferenceView::new(pose, corr));
        masks.push(mask);
        world.push(pts);
    }

    Ok(SyntheticScene {
        problem: LocalizationProblem::new(k, references).with_seed(config.seed),
        ground_truth: query,
        outlier_mask: masks,
        world_points: world,
        config: *config,
    })
}

/// Turns a further `extra_outlier_rate` of each reference's correspondences
/// into outliers, chosen uniformly among the current inliers.
pub fn corrupt(scene: &SyntheticScene, extra_outlier_rate: f64) -> SyntheticScene {
    let mut out = scene.clone();
    if extra_outlier_rate <= 0.0 {
        return out;
    }
    let cfg = scene.config;
    let noise = (cfg.noise_sigma_px > 0.0)
        .then(|| Normal::new(0.0, cfg.noise_sigma_px).expect("valid sigma"));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ extra_outlier_rate.to_bits());
    rng.set_stream(1);
    let mut s = Sampler {
        cfg: &cfg,
        rng,
        noise,
    };
    let k = cfg.intrinsics();

    for (j, view) in out.problem.references.iter_mut().enumerate() {
        let truth = relative_from_absolute(&out.ground_truth, &view.pose).essential();
        let mask = &mut out.outlier_mask[j];
        let inliers: Vec<usize> = (0..mask.len()).filter(|&i| !mask[i]).collect();
        let want = ((extra_outlier_rate * mask.len() as f64).round() as usize).min(inliers.len());
        for pick in sample(&mut s.rng, inliers.len(), want) {
            let idx = inliers[pick];
            let query = view.correspondences[idx].query_point;
            let px = s.outlier_pixel(&out.world_points[j][idx], &query, &truth);
            view.correspondences[idx].reference_point = normalize_pixel(&px, &k);
            mask[idx] = true;
        }
    }
    out
}
