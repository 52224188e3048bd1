//! Problem files and per-trial result CSVs.
//!
//! A problem file is a JSON document:
//!
//! ```text
//! {
//!   "schema_version": 1,
//!   "intrinsics": { "fx": .., "fy": .., "cx": .., "cy": .. },
//!   "references": [
//!     { "rotation": [9 floats, row-major], "translation": [3 floats],
//!       "correspondences": [ { "qx": .., "qy": .., "rx": .., "ry": .. } ] }
//!   ],
//!   "ground_truth": { "rotation": [..], "translation": [..] },   // optional
//!   "outlier_mask": [[bool, ..], ..],                             // optional
//!   "iterations": 100, "rng_seed": 0, "thresholds": { .. }        // optional
//! }
//! ```
//!
//! Reference poses map world points into the reference camera frame and all
//! image coordinates are normalized.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::absolute::{CheckThresholds, ReferenceView};
use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, Correspondence, RigidPose};
use crate::ransac::LocalizationProblem;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct PoseRecord {
    rotation: [f64; 9],
    translation: [f64; 3],
}

impl From<&RigidPose> for PoseRecord {
    fn from(p: &RigidPose) -> Self {
        let r = &p.rotation;
        Self {
            rotation: [
                r[(0, 0)],
                r[(0, 1)],
                r[(0, 2)],
                r[(1, 0)],
                r[(1, 1)],
                r[(1, 2)],
                r[(2, 0)],
                r[(2, 1)],
                r[(2, 2)],
            ],
            translation: [p.translation.x, p.translation.y, p.translation.z],
        }
    }
}

impl From<&PoseRecord> for RigidPose {
    fn from(p: &PoseRecord) -> Self {
        RigidPose::new(
            Matrix3::from_row_slice(&p.rotation),
            Vector3::from_row_slice(&p.translation),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct MatchRecord {
    qx: f64,
    qy: f64,
    rx: f64,
    ry: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ReferenceRecord {
    #[serde(flatten)]
    pose: PoseRecord,
    correspondences: Vec<MatchRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ProblemRecord {
    schema_version: u32,
    intrinsics: CameraIntrinsics,
    references: Vec<ReferenceRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ground_truth: Option<PoseRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    outlier_mask: Option<Vec<Vec<bool>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rng_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    thresholds: Option<CheckThresholds>,
}

/// A problem plus the optional evaluation data stored alongside it.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemDocument {
    pub problem: LocalizationProblem,
    pub ground_truth: Option<RigidPose>,
    pub outlier_mask: Option<Vec<Vec<bool>>>,
}

impl ProblemDocument {
    pub fn new(problem: LocalizationProblem) -> Self {
        Self {
            problem,
            ground_truth: None,
            outlier_mask: None,
        }
    }
}

impl From<&crate::synth::SyntheticScene> for ProblemDocument {
    fn from(s: &crate::synth::SyntheticScene) -> Self {
        Self {
            problem: s.problem.clone(),
            ground_truth: Some(s.ground_truth),
            outlier_mask: Some(s.outlier_mask.clone()),
        }
    }
}

fn to_record(doc: &ProblemDocument) -> ProblemRecord {
    let p = &doc.problem;
    ProblemRecord {
        schema_version: SCHEMA_VERSION,
        intrinsics: p.intrinsics,
        references: p
            .references
            .iter()
            .map(|r| ReferenceRecord {
                pose: PoseRecord::from(&r.pose),
                correspondences: r
                    .correspondences
                    .iter()
                    .map(|c| MatchRecord {
                        qx: c.query_point.x,
                        qy: c.query_point.y,
                        rx: c.reference_point.x,
                        ry: c.reference_point.y,
                    })
                    .collect(),
            })
            .collect(),
        ground_truth: doc.ground_truth.as_ref().map(PoseRecord::from),
        outlier_mask: doc.outlier_mask.clone(),
        iterations: Some(p.iterations),
        rng_seed: Some(p.rng_seed),
        thresholds: Some(p.thresholds),
    }
}

fn from_record(rec: ProblemRecord) -> Result<ProblemDocument> {
    if rec.schema_version != SCHEMA_VERSION {
        return Err(Error::SchemaVersionMismatch {
            expected: SCHEMA_VERSION,
            found: rec.schema_version,
        });
    }
    let references: Vec<ReferenceView> = rec
        .references
        .iter()
        .enumerate()
        .map(|(j, r)| {
            let corr = r
                .correspondences
                .iter()
                .map(|m| Correspondence::new(Vector2::new(m.qx, m.qy), Vector2::new(m.rx, m.ry), j))
                .collect();
            ReferenceView::new(RigidPose::from(&r.pose), corr)
        })
        .collect();
    if let Some(mask) = &rec.outlier_mask {
        let shape_ok = mask.len() == references.len()
            && mask
                .iter()
                .zip(&references)
                .all(|(m, r)| m.len() == r.correspondences.len());
        if !shape_ok {
            return Err(Error::InvalidProblem(
                "outlier_mask shape does not match correspondences".into(),
            ));
        }
    }
    let mut problem = LocalizationProblem::new(rec.intrinsics, references);
    if let Some(n) = rec.iterations {
        problem.iterations = n;
    }
    if let Some(s) = rec.rng_seed {
        problem.rng_seed = s;
    }
    if let Some(t) = rec.thresholds {
        problem.thresholds = t;
    }
    problem.validate()?;
    Ok(ProblemDocument {
        problem,
        ground_truth: rec.ground_truth.as_ref().map(RigidPose::from),
        outlier_mask: rec.outlier_mask,
    })
}

pub fn problem_to_string(doc: &ProblemDocument) -> String {
    serde_json::to_string_pretty(&to_record(doc)).expect("problem records always serialize")
}

pub fn problem_from_str(text: &str) -> Result<ProblemDocument> {
    let rec: ProblemRecord = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    from_record(rec)
}

pub fn write_problem(path: &Path, doc: &ProblemDocument) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(problem_to_string(doc).as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}

/// Reads and validates a problem file. IO failures are reported as parse
/// errors at line 0 so callers see one error kind for unusable input.
pub fn read_problem(path: &Path) -> Result<ProblemDocument> {
    let mut text = String::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| Error::Parse {
            line: 0,
            column: 0,
            message: format!("{}: {e}", path.display()),
        })?;
    problem_from_str(&text)
}

/// Column order of result CSVs.
pub const CSV_COLUMNS: [&str; 11] = [
    "trial_id",
    "method",
    "noise_sigma_px",
    "outlier_rate",
    "n_matches",
    "rotation_err_deg",
    "translation_err_m",
    "direction_err_deg",
    "inlier_count",
    "status",
    "wall_time_us",
];

/// Comment line written above the header.
pub const CSV_PREAMBLE: &str = "# planarloc results v1; wall_time_us is nondeterministic; \
failed trials carry NaN errors and are excluded from means";

/// One row of a result CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial_id: u64,
    pub method: String,
    pub noise_sigma_px: f64,
    pub outlier_rate: f64,
    pub n_matches: usize,
    pub rotation_err_deg: f64,
    pub translation_err_m: f64,
    pub direction_err_deg: f64,
    pub inlier_count: usize,
    pub status: String,
    pub wall_time_us: f64,
}

/// Formats a float with 17 significant digits.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

pub fn write_trials<W: Write>(out: W, records: &[TrialRecord]) -> Result<()> {
    let mut out = out;
    writeln!(out, "{CSV_PREAMBLE}")?;
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(CSV_COLUMNS).map_err(io)?;
    for r in records {
        w.write_record([
            r.trial_id.to_string(),
            r.method.clone(),
            format_float(r.noise_sigma_px),
            format_float(r.outlier_rate),
            r.n_matches.to_string(),
            format_float(r.rotation_err_deg),
            format_float(r.translation_err_m),
            format_float(r.direction_err_deg),
            r.inlier_count.to_string(),
            r.status.clone(),
            format_float(r.wall_time_us),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trials<R: Read>(input: R) -> Result<Vec<TrialRecord>> {
    let mut rd = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(input);
    let header = rd.headers().map_err(|e| csv_parse(&e))?.clone();
    if header.iter().ne(CSV_COLUMNS.iter().copied()) {
        return Err(Error::Parse {
            line: 1,
            column: 0,
            message: format!("unexpected header {:?}", header),
        });
    }
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| csv_parse(&e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| rec.get(i).unwrap_or("");
        let num = |i: usize| -> Result<f64> {
            field(i).parse().map_err(|_| Error::Parse {
                line,
                column: i,
                message: format!("{}: not a number: {:?}", CSV_COLUMNS[i], field(i)),
            })
        };
        let int = |i: usize| -> Result<u64> {
            field(i).parse().map_err(|_| Error::Parse {
                line,
                column: i,
                message: format!("{}: not an integer: {:?}", CSV_COLUMNS[i], field(i)),
            })
        };
        out.push(TrialRecord {
            trial_id: int(0)?,
            method: field(1).to_string(),
            noise_sigma_px: num(2)?,
            outlier_rate: num(3)?,
            n_matches: int(4)? as usize,
            rotation_err_deg: num(5)?,
            translation_err_m: num(6)?,
            direction_err_deg: num(7)?,
            inlier_count: int(8)? as usize,
            status: field(9).to_string(),
            wall_time_us: num(10)?,
        });
    }
    Ok(out)
}

fn csv_parse(e: &csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse {
        line,
        column: 0,
        message: e.to_string(),
    }
}
