//! Multiple-checking RANSAC shell shared by every solver.
//!
//! A [`MinimalSolver`] turns one random sample into absolute pose
//! hypotheses that survived its check cascade. The shell scores every
//! hypothesis by Sampson inliers over all references, keeps the best and
//! refines it. Each sample index owns its own RNG stream, so results are
//! reproducible for a given seed.

use std::fmt;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::absolute::{
    between, consistency_check, pdcheck, pose_2p1p, rcheck, relative_from_absolute,
    solve_scale_2p1p, triangulate_2p2p, CheckThresholds, ReferenceView,
};
use crate::error::{Error, Result};
use crate::geometry::{epipolar_residual, CameraIntrinsics, Correspondence, RigidPose};
use crate::planar::{
    candidates, cheirality_select, midpoint_depths, solve_2p, RelativePoseCandidate,
};
use crate::refine::{refine_pose, MIN_INLIERS};

pub const DEFAULT_ITERATIONS: usize = 100;
/// Refine / reclassify rounds after the winning hypothesis is chosen.
pub const REFINE_ROUNDS: usize = 5;

/// Query intrinsics plus the retrieved reference views.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationProblem {
    pub intrinsics: CameraIntrinsics,
    pub references: Vec<ReferenceView>,
    pub thresholds: CheckThresholds,
    pub iterations: usize,
    pub rng_seed: u64,
}

impl LocalizationProblem {
    /// Problem with default thresholds, 100 iterations and seed 0.
    pub fn new(intrinsics: CameraIntrinsics, references: Vec<ReferenceView>) -> Self {
        Self {
            thresholds: CheckThresholds::for_intrinsics(&intrinsics),
            intrinsics,
            references,
            iterations: DEFAULT_ITERATIONS,
            rng_seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }

    pub fn total_correspondences(&self) -> usize {
        self.references
            .iter()
            .map(|r| r.correspondences.len())
            .sum()
    }

    /// Structural checks independent of the solver.
    pub fn validate(&self) -> Result<()> {
        if !self.intrinsics.is_valid() {
            return Err(Error::InvalidProblem(
                "focal lengths must be positive".into(),
            ));
        }
        if self.references.len() < 2 {
            return Err(Error::InvalidProblem(format!(
                "need at least 2 references, got {}",
                self.references.len()
            )));
        }
        if !self.thresholds.is_valid() {
            return Err(Error::InvalidProblem("thresholds must be positive".into()));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidProblem("iterations must be positive".into()));
        }
        for (j, view) in self.references.iter().enumerate() {
            if !view.pose.is_valid() {
                return Err(Error::InvalidProblem(format!(
                    "reference {j} rotation is not orthonormal"
                )));
            }
            if let Some(c) = view.correspondences.iter().find(|c| !c.is_finite()) {
                return Err(Error::InvalidProblem(format!(
                    "reference {j} has non-finite point {c:?}"
                )));
            }
        }
        Ok(())
    }

    /// Indices of references holding at least `n` correspondences.
    pub fn references_with(&self, n: usize) -> Vec<usize> {
        (0..self.references.len())
            .filter(|&j| self.references[j].correspondences.len() >= n)
            .collect()
    }
}

/// Knobs of the RANSAC shell that the problem file does not carry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorOptions {
    /// Stop early once the sample count reaches the standard bound for
    /// `confidence`. Off by default: every run draws exactly
    /// `problem.iterations` samples.
    pub adaptive: bool,
    pub confidence: f64,
    /// Apply the consistency check to both references of a 2p2p sample
    /// rather than only the first.
    pub consistency_both: bool,
    /// Run the rotation, positive-depth and consistency checks in the 8p8p
    /// baseline as well.
    pub baseline_checks: bool,
    pub refine: bool,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            adaptive: false,
            confidence: 0.99,
            consistency_both: true,
            baseline_checks: false,
            refine: true,
        }
    }
}

/// Hypotheses surviving each stage of the check cascade.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckCounters {
    pub samples: usize,
    pub solved: usize,
    pub cheirality_passed: usize,
    pub rcheck_passed: usize,
    pub triangulated: usize,
    pub pdcheck_passed: usize,
    pub consistency_passed: usize,
    pub scored: usize,
}

impl CheckCounters {
    /// Whether each stage passed no more hypotheses than the one before.
    pub fn is_monotone(&self) -> bool {
        self.cheirality_passed >= self.rcheck_passed
            && self.rcheck_passed >= self.triangulated
            && self.triangulated >= self.pdcheck_passed
            && self.pdcheck_passed >= self.consistency_passed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Success,
    NoValidSample,
    RefinementWarning,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Status::Success => "Success",
            Status::NoValidSample => "NoValidSample",
            Status::RefinementWarning => "RefinementWarning",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationResult {
    pub pose: RigidPose,
    /// Best RANSAC hypothesis before refinement.
    pub unrefined_pose: RigidPose,
    pub inlier_count: usize,
    pub inlier_sets: Vec<Vec<usize>>,
    /// Inliers of the best hypothesis, used by the refinement.
    pub hypothesis_inliers: Vec<Vec<usize>>,
    pub checks: CheckCounters,
    pub refined: bool,
    pub status: Status,
}

impl LocalizationResult {
    fn failed(n_refs: usize, checks: CheckCounters) -> Self {
        Self {
            pose: RigidPose::identity(),
            unrefined_pose: RigidPose::identity(),
            inlier_count: 0,
            inlier_sets: vec![Vec::new(); n_refs],
            hypothesis_inliers: vec![Vec::new(); n_refs],
            checks,
            refined: false,
            status: Status::NoValidSample,
        }
    }

    pub fn is_success(&self) -> bool {
        self.status != Status::NoValidSample
    }
}

/// Inlier tally of a pose hypothesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub inliers: usize,
    pub residual_sum: f64,
}

impl Score {
    pub fn mean_residual(&self) -> f64 {
        if self.inliers == 0 {
            f64::INFINITY
        } else {
            self.residual_sum / self.inliers as f64
        }
    }

    /// More inliers wins; ties go to the lower mean inlier residual.
    pub fn beats(&self, other: &Score) -> bool {
        self.inliers > other.inliers
            || (self.inliers == other.inliers && self.mean_residual() < other.mean_residual())
    }
}

/// Sampson residuals of every correspondence against the essential matrix
/// induced by `pose` for its reference.
fn residuals<'a>(
    pose: &'a RigidPose,
    problem: &'a LocalizationProblem,
) -> impl Iterator<Item = (usize, usize, f64)> + 'a {
    problem
        .references
        .iter()
        .enumerate()
        .flat_map(move |(j, view)| {
            let e = relative_from_absolute(pose, &view.pose).essential();
            view.correspondences
                .iter()
                .enumerate()
                .map(move |(k, c)| (j, k, epipolar_residual(c, &e)))
        })
}

/// The single scoring routine used by every solver.
pub fn score_pose(pose: &RigidPose, problem: &LocalizationProblem) -> Score {
    let gate = problem.thresholds.sampson_inlier;
    let mut s = Score {
        inliers: 0,
        residual_sum: 0.0,
    };
    for (_, _, r) in residuals(pose, problem) {
        if r <= gate {
            s.inliers += 1;
            s.residual_sum += r;
        }
    }
    s
}

/// Like [`score_pose`], but gives up with `None` as soon as the hypothesis
/// can no longer reach the inlier count of `best`.
pub fn score_pose_against(
    pose: &RigidPose,
    problem: &LocalizationProblem,
    best: Option<&Score>,
) -> Option<Score> {
    let Some(best) = best else {
        return Some(score_pose(pose, problem));
    };
    let gate = problem.thresholds.sampson_inlier;
    let allowed_misses = problem.total_correspondences().saturating_sub(best.inliers);
    let mut misses = 0;
    let mut s = Score {
        inliers: 0,
        residual_sum: 0.0,
    };
    for (_, _, r) in residuals(pose, problem) {
        if r <= gate {
            s.inliers += 1;
            s.residual_sum += r;
        } else {
            misses += 1;
            if misses > allowed_misses {
                return None;
            }
        }
    }
    Some(s)
}

/// Per-reference indices of correspondences whose Sampson residual is
/// within the inlier gate.
pub fn classify_inliers(pose: &RigidPose, problem: &LocalizationProblem) -> Vec<Vec<usize>> {
    let gate = problem.thresholds.sampson_inlier;
    let mut sets = vec![Vec::new(); problem.references.len()];
    for (j, k, r) in residuals(pose, problem) {
        if r <= gate {
            sets[j].push(k);
        }
    }
    sets
}

/// Produces absolute-pose hypotheses from one random minimal sample.
pub trait MinimalSolver: Sync {
    fn name(&self) -> &'static str;

    /// Correspondences drawn per sample, used by adaptive termination.
    fn sample_size(&self) -> usize;

    /// Rejects problems the solver cannot sample from.
    fn check_problem(&self, problem: &LocalizationProblem) -> Result<()>;

    /// Draws one sample and returns the hypotheses that passed all checks.
    fn hypotheses(
        &self,
        problem: &LocalizationProblem,
        rng: &mut ChaCha8Rng,
        counters: &mut CheckCounters,
    ) -> Vec<RigidPose>;
}

/// RNG stream dedicated to one sample index.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draws `count` distinct correspondence indices from a reference.
pub(crate) fn draw<'a>(
    view: &'a ReferenceView,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<&'a Correspondence> {
    sample(rng, view.correspondences.len(), count)
        .into_iter()
        .map(|i| &view.correspondences[i])
        .collect()
}

/// Draws two distinct references from `eligible_first` / `eligible_second`.
pub(crate) fn draw_pair(
    first: &[usize],
    second: &[usize],
    rng: &mut ChaCha8Rng,
) -> Option<(usize, usize)> {
    let j = first[rng.random_range(0..first.len())];
    let rest: Vec<usize> = second.iter().copied().filter(|&k| k != j).collect();
    if rest.is_empty() {
        return None;
    }
    Some((j, rest[rng.random_range(0..rest.len())]))
}

fn adaptive_bound(inlier_ratio: f64, sample_size: usize, confidence: f64) -> f64 {
    let w = inlier_ratio.powi(sample_size as i32);
    if w >= 1.0 {
        return 1.0;
    }
    if w <= 0.0 {
        return f64::INFINITY;
    }
    ((1.0 - confidence).ln() / (1.0 - w).ln()).ceil()
}

/// Runs the RANSAC shell with `solver`.
pub fn run(
    solver: &dyn MinimalSolver,
    problem: &LocalizationProblem,
    options: &EstimatorOptions,
) -> Result<LocalizationResult> {
    problem.validate()?;
    solver.check_problem(problem)?;

    let total = problem.total_correspondences().max(1);
    let mut counters = CheckCounters::default();
    let mut best: Option<(Score, RigidPose)> = None;

    for index in 0..problem.iterations {
        if options.adaptive {
            if let Some((score, _)) = &best {
                let ratio = score.inliers as f64 / total as f64;
                if (index as f64) >= adaptive_bound(ratio, solver.sample_size(), options.confidence)
                {
                    break;
                }
            }
        }
        let mut rng = sample_rng(problem.rng_seed, index as u64);
        counters.samples += 1;
        for pose in solver.hypotheses(problem, &mut rng, &mut counters) {
            counters.scored += 1;
            let Some(score) = score_pose_against(&pose, problem, best.as_ref().map(|(b, _)| b))
            else {
                continue;
            };
            if best.as_ref().is_none_or(|(b, _)| score.beats(b)) {
                best = Some((score, pose));
            }
        }
    }

    let Some((_, hypothesis)) = best else {
        log::debug!(
            "{}: no valid sample in {} draws",
            solver.name(),
            problem.iterations
        );
        return Ok(LocalizationResult::failed(
            problem.references.len(),
            counters,
        ));
    };

    let hypothesis_inliers = classify_inliers(&hypothesis, problem);
    let n_inliers: usize = hypothesis_inliers.iter().map(Vec::len).sum();
    let mut pose = hypothesis;
    let mut refined = false;
    let mut status = Status::Success;
    if options.refine && n_inliers >= MIN_INLIERS {
        let mut inliers = hypothesis_inliers.clone();
        for _ in 0..REFINE_ROUNDS {
            let r = refine_pose(&pose, &problem.references, &inliers);
            if r.final_cost <= r.initial_cost {
                pose = r.pose;
                refined = true;
            }
            if !r.converged {
                log::debug!(
                    "{}: refinement stopped after {} iterations",
                    solver.name(),
                    r.iterations
                );
                status = Status::RefinementWarning;
                break;
            }
            let next = classify_inliers(&pose, problem);
            if next == inliers || next.iter().map(Vec::len).sum::<usize>() < MIN_INLIERS {
                break;
            }
            inliers = next;
        }
    }

    let inlier_sets = classify_inliers(&pose, problem);
    Ok(LocalizationResult {
        pose,
        unrefined_pose: hypothesis,
        inlier_count: inlier_sets.iter().map(Vec::len).sum(),
        inlier_sets,
        hypothesis_inliers,
        checks: counters,
        refined,
        status,
    })
}

/// Relative pose and unit direction from a cheirality-selected candidate.
fn relative_of(c: &RelativePoseCandidate) -> RigidPose {
    c.with_scale(1.0)
}

/// Solves the planar relative pose from two sampled matches of `view`.
///
/// The sign of each root is fixed by cheirality against all of the view's
/// correspondences. Distinct roots are different essential matrices that
/// depth counting cannot rank reliably once outliers are present, so every
/// sign-resolved root is returned and left to the later checks.
fn planar_relative(
    view: &ReferenceView,
    rng: &mut ChaCha8Rng,
) -> Option<Vec<RelativePoseCandidate>> {
    let pts = draw(view, 2, rng);
    let sols = solve_2p(pts[0], pts[1]).ok()?;
    let cands = candidates(&sols);
    Some(
        cands
            .chunks(2)
            .filter_map(|pair| cheirality_select(pair, &view.correspondences).ok())
            .collect(),
    )
}

/// Whether `c` triangulates in front of both cameras under `relative`.
fn in_front(relative: &RigidPose, c: &Correspondence) -> bool {
    matches!(midpoint_depths(&relative.rotation, &relative.translation, c), Some((a, b)) if a > 0.0 && b > 0.0)
}

/// Two correspondences to each of two references; scale by triangulating
/// the two translation directions.
#[derive(Debug, Clone, Copy, Default)]
pub struct TwoPointTwoPoint {
    pub consistency_both: bool,
}

impl TwoPointTwoPoint {
    fn cascade(
        &self,
        problem: &LocalizationProblem,
        (va, vb): (&ReferenceView, &ReferenceView),
        (a, b): (&RelativePoseCandidate, &RelativePoseCandidate),
        counters: &mut CheckCounters,
    ) -> Option<RigidPose> {
        let th = &problem.thresholds;
        let (rel_a, rel_b) = (relative_of(a), relative_of(b));
        let t_jj2 = between(&va.pose, &vb.pose);
        if !rcheck(&rel_a.rotation, &rel_b.rotation, &t_jj2, th.rcheck_deg).0 {
            return None;
        }
        counters.rcheck_passed += 1;

        let s = triangulate_2p2p(&rel_a, &rel_b, &t_jj2, &va.pose).ok()?;
        counters.triangulated += 1;
        if !pdcheck(&s) {
            return None;
        }
        counters.pdcheck_passed += 1;

        let mut checks = vec![(&va.pose, a.direction)];
        if self.consistency_both {
            checks.push((&vb.pose, b.direction));
        }
        let consistent = checks.iter().all(|(pose, dir)| {
            matches!(
                consistency_check(&s.query_pose, pose, dir, th.consistency_deg),
                Ok((true, _))
            )
        });
        if !consistent {
            return None;
        }
        counters.consistency_passed += 1;
        Some(s.query_pose)
    }
}

impl MinimalSolver for TwoPointTwoPoint {
    fn name(&self) -> &'static str {
        "2p2p"
    }

    fn sample_size(&self) -> usize {
        4
    }

    fn check_problem(&self, problem: &LocalizationProblem) -> Result<()> {
        if problem.references_with(2).len() < 2 {
            return Err(Error::InvalidProblem(
                "2p2p needs two references with at least 2 correspondences".into(),
            ));
        }
        Ok(())
    }

    fn hypotheses(
        &self,
        problem: &LocalizationProblem,
        rng: &mut ChaCha8Rng,
        counters: &mut CheckCounters,
    ) -> Vec<RigidPose> {
        let eligible = problem.references_with(2);
        let Some((j, j2)) = draw_pair(&eligible, &eligible, rng) else {
            return Vec::new();
        };
        let (va, vb) = (&problem.references[j], &problem.references[j2]);
        let (Some(ca), Some(cb)) = (planar_relative(va, rng), planar_relative(vb, rng)) else {
            return Vec::new();
        };
        counters.solved += 1;

        let mut out = Vec::new();
        for a in &ca {
            for b in &cb {
                counters.cheirality_passed += 1;
                out.extend(self.cascade(problem, (va, vb), (a, b), counters));
            }
        }
        out
    }
}

/// Two correspondences to one reference for the relative pose, one to a
/// second reference for the scale.
///
/// Only one rotation is estimated per sample, so the rotation check has
/// nothing to compare and is counted as passed. The positive-depth gate also
/// requires the scale correspondence to land in front of both cameras.
#[derive(Debug, Clone, Copy, Default)]
pub struct TwoPointOnePoint;

impl MinimalSolver for TwoPointOnePoint {
    fn name(&self) -> &'static str {
        "2p1p"
    }

    fn sample_size(&self) -> usize {
        3
    }

    fn check_problem(&self, problem: &LocalizationProblem) -> Result<()> {
        let two = problem.references_with(2);
        let one = problem.references_with(1);
        let ok = two.iter().any(|&j| one.iter().any(|&k| k != j));
        if !ok {
            return Err(Error::InvalidProblem(
                "2p1p needs a reference with 2 correspondences and another with 1".into(),
            ));
        }
        Ok(())
    }

    fn hypotheses(
        &self,
        problem: &LocalizationProblem,
        rng: &mut ChaCha8Rng,
        counters: &mut CheckCounters,
    ) -> Vec<RigidPose> {
        let first = problem.references_with(2);
        let second = problem.references_with(1);
        let Some((j, j2)) = draw_pair(&first, &second, rng) else {
            return Vec::new();
        };
        let (va, vb) = (&problem.references[j], &problem.references[j2]);
        let Some(ca) = planar_relative(va, rng) else {
            return Vec::new();
        };
        counters.solved += 1;
        let c3 = draw(vb, 1, rng)[0];
        let t_j2j = between(&vb.pose, &va.pose);
        let th = &problem.thresholds;

        let mut out = Vec::new();
        for a in &ca {
            counters.cheirality_passed += 1;
            counters.rcheck_passed += 1;
            let rel_a = relative_of(a);
            let Ok(rho) = solve_scale_2p1p(&rel_a, &t_j2j, c3) else {
                continue;
            };
            counters.triangulated += 1;
            let s = pose_2p1p(&rel_a, rho, &va.pose);
            if !pdcheck(&s) || !in_front(&relative_from_absolute(&s.query_pose, &vb.pose), c3) {
                continue;
            }
            counters.pdcheck_passed += 1;
            if !matches!(
                consistency_check(&s.query_pose, &va.pose, &a.direction, th.consistency_deg),
                Ok((true, _))
            ) {
                continue;
            }
            counters.consistency_passed += 1;
            out.push(s.query_pose);
        }
        out
    }
}

/// Absolute pose from 2 + 2 correspondences with the full check cascade.
pub fn estimate_2p2p(problem: &LocalizationProblem) -> Result<LocalizationResult> {
    estimate_2p2p_with(problem, &EstimatorOptions::default())
}

pub fn estimate_2p2p_with(
    problem: &LocalizationProblem,
    options: &EstimatorOptions,
) -> Result<LocalizationResult> {
    let solver = TwoPointTwoPoint {
        consistency_both: options.consistency_both,
    };
    run(&solver, problem, options)
}

/// Absolute pose from 2 + 1 correspondences.
pub fn estimate_2p1p(problem: &LocalizationProblem) -> Result<LocalizationResult> {
    estimate_2p1p_with(problem, &EstimatorOptions::default())
}

pub fn estimate_2p1p_with(
    problem: &LocalizationProblem,
    options: &EstimatorOptions,
) -> Result<LocalizationResult> {
    run(&TwoPointOnePoint, problem, options)
}
