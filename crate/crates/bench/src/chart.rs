//! Static SVG line charts. Everything is derived from a trial CSV, so charts
//! can be redrawn from archived results.

use std::collections::BTreeSet;
use std::fs::File;
use std::path::{Path, PathBuf};

use planarloc::io::read_trials;
use plotters::prelude::*;

use crate::experiment::{summarize, CellSummary, ExperimentKind};
use crate::BenchError;

const COLORS: [RGBColor; 5] = [
    RGBColor(0x1f, 0x77, 0xb4),
    RGBColor(0xd6, 0x27, 0x28),
    RGBColor(0x2c, 0xa0, 0x2c),
    RGBColor(0xff, 0x7f, 0x0e),
    RGBColor(0x94, 0x67, 0xbd),
];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Writes one line chart with a legend. Non-finite points are skipped.
pub fn line_chart(
    path: &Path,
    title: &str,
    x_desc: &str,
    y_desc: &str,
    series: &[Series],
) -> Result<(), BenchError> {
    let err = |e: &dyn std::fmt::Display| BenchError::Chart(format!("{}: {e}", path.display()));
    let finite = || {
        series
            .iter()
            .flat_map(|s| s.points.iter())
            .filter(|p| p.0.is_finite() && p.1.is_finite())
    };
    let (mut x0, mut x1) = finite().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
        (a.min(p.0), b.max(p.0))
    });
    let y1 = finite().fold(0.0f64, |m, p| m.max(p.1));
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    let y1 = if y1 > 0.0 { y1 * 1.1 } else { 1.0 };

    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| err(&e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(x0..x1, 0.0..y1)
        .map_err(|e| err(&e))?;
    chart
        .configure_mesh()
        .x_desc(x_desc)
        .y_desc(y_desc)
        .draw()
        .map_err(|e| err(&e))?;
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<(f64, f64)> = s
            .points
            .iter()
            .copied()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .collect();
        chart
            .draw_series(LineSeries::new(pts.clone(), color.stroke_width(2)))
            .map_err(|e| err(&e))?
            .label(s.label.clone())
            .legend(move |(x, y)| {
                PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2))
            });
        chart
            .draw_series(pts.into_iter().map(|p| Circle::new(p, 3, color.filled())))
            .map_err(|e| err(&e))?;
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| err(&e))?;
    root.present().map_err(|e| err(&e))?;
    Ok(())
}

fn distinct(values: impl Iterator<Item = f64>) -> usize {
    values.map(f64::to_bits).collect::<BTreeSet<_>>().len()
}

/// Which experiment produced `summaries`: the file stem if it names one,
/// otherwise the column that varies.
pub fn infer_kind(stem: &str, summaries: &[CellSummary]) -> ExperimentKind {
    if let Ok(k) = stem.parse() {
        return k;
    }
    if distinct(summaries.iter().map(|s| s.noise_sigma_px)) > 1 {
        ExperimentKind::Accuracy
    } else if distinct(summaries.iter().map(|s| s.outlier_rate)) > 1 {
        ExperimentKind::Robustness
    } else {
        ExperimentKind::Timing
    }
}

fn methods(summaries: &[CellSummary]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for s in summaries {
        if !out.contains(&s.method) {
            out.push(s.method.clone());
        }
    }
    out
}

fn match_counts(summaries: &[CellSummary]) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for s in summaries {
        if !out.contains(&s.n_matches) {
            out.push(s.n_matches);
        }
    }
    out
}

fn series_for(
    summaries: &[CellSummary],
    keep: impl Fn(&CellSummary) -> bool,
    x: impl Fn(&CellSummary) -> f64,
    y: impl Fn(&CellSummary) -> f64,
) -> Vec<Series> {
    methods(summaries)
        .into_iter()
        .map(|m| Series {
            points: summaries
                .iter()
                .filter(|s| s.method == m && keep(s))
                .map(|s| (x(s), y(s)))
                .collect(),
            label: m,
        })
        .collect()
}

/// Draws the charts of a trial CSV into `out_dir` and returns their paths.
pub fn write_charts(csv_path: &Path, out_dir: &Path) -> Result<Vec<PathBuf>, BenchError> {
    let records = read_trials(File::open(csv_path)?)?;
    let summaries = summarize(&records);
    let stem = csv_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("results");
    let kind = infer_kind(stem, &summaries);
    let mut written = Vec::new();
    match kind {
        ExperimentKind::Accuracy => {
            type Metric = (&'static str, &'static str, fn(&CellSummary) -> f64);
            let metrics: [Metric; 3] = [
                ("rotation", "mean rotation error (deg)", |s| {
                    s.mean_rotation_err_deg
                }),
                ("direction", "mean direction error (deg)", |s| {
                    s.mean_direction_err_deg
                }),
                ("translation", "mean translation error (m)", |s| {
                    s.mean_translation_err_m
                }),
            ];
            for n in match_counts(&summaries) {
                for (name, y_desc, y) in metrics {
                    let path = out_dir.join(format!("{stem}_{name}_n{n}.svg"));
                    let series =
                        series_for(&summaries, |s| s.n_matches == n, |s| s.noise_sigma_px, y);
                    line_chart(
                        &path,
                        &format!("{name} error, {n} matches"),
                        "noise sigma (px)",
                        y_desc,
                        &series,
                    )?;
                    written.push(path);
                }
            }
        }
        ExperimentKind::Robustness => {
            for n in match_counts(&summaries) {
                let path = out_dir.join(format!("{stem}_n{n}.svg"));
                let series = series_for(
                    &summaries,
                    |s| s.n_matches == n,
                    |s| s.outlier_rate * 100.0,
                    |s| s.success_rate,
                );
                line_chart(
                    &path,
                    &format!("success rate, {n} matches"),
                    "outlier rate (%)",
                    "success rate",
                    &series,
                )?;
                written.push(path);
            }
        }
        ExperimentKind::Timing => {
            let path = out_dir.join(format!("{stem}.svg"));
            let series = series_for(
                &summaries,
                |_| true,
                |s| s.n_matches as f64,
                |s| s.mean_wall_time_ms,
            );
            line_chart(
                &path,
                "run time",
                "matches per reference",
                "mean time (ms)",
                &series,
            )?;
            written.push(path);
        }
    }
    Ok(written)
}
