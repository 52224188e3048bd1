//! Planar-motion minimal solvers for visual localization against posed
//! reference images, without a 3D map.
//!
//! The query pose is recovered from 2D-2D matches to several reference views
//! with known poses. Under ground-robot motion (yaw plus translation in the
//! xz plane) the relative pose to one reference needs only two matches
//! ([`planar::solve_2p`]); the absolute scale then comes either from
//! triangulating two relative directions (2p2p) or from a single match to a
//! second reference (2p1p). Both run inside a RANSAC shell with a cascade of
//! geometric checks ([`ransac`]), next to a general 8-point baseline
//! ([`baseline`]).

pub mod absolute;
pub mod baseline;
pub mod error;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod planar;
pub mod ransac;
pub mod refine;
pub mod synth;

pub use absolute::{CheckThresholds, ReferenceView, ScaleSolution};
pub use baseline::estimate_8p8p;
pub use error::{Error, Result};
pub use geometry::{CameraIntrinsics, Correspondence, EssentialMatrix, PlanarPose, RigidPose};
pub use metrics::{pose_error, success_rate, PoseError, SuccessCriterion};
pub use ransac::{
    estimate_2p1p, estimate_2p2p, EstimatorOptions, LocalizationProblem, LocalizationResult, Status,
};
pub use synth::{generate, SyntheticScene, WorldConfig};

/// The three estimators exposed by the benchmarks and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    TwoPointTwoPoint,
    TwoPointOnePoint,
    EightPointEightPoint,
}

impl Method {
    pub const ALL: [Method; 3] = [
        Method::TwoPointTwoPoint,
        Method::TwoPointOnePoint,
        Method::EightPointEightPoint,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::TwoPointTwoPoint => "2p2p",
            Method::TwoPointOnePoint => "2p1p",
            Method::EightPointEightPoint => "8p8p",
        }
    }

    pub fn estimate(
        &self,
        problem: &LocalizationProblem,
        options: &EstimatorOptions,
    ) -> Result<LocalizationResult> {
        match self {
            Method::TwoPointTwoPoint => ransac::estimate_2p2p_with(problem, options),
            Method::TwoPointOnePoint => ransac::estimate_2p1p_with(problem, options),
            Method::EightPointEightPoint => baseline::estimate_8p8p_with(problem, options),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "2p2p" => Ok(Method::TwoPointTwoPoint),
            "2p1p" => Ok(Method::TwoPointOnePoint),
            "8p8p" => Ok(Method::EightPointEightPoint),
            other => Err(format!(
                "unknown method {other:?}; expected 2p2p, 2p1p or 8p8p"
            )),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}
