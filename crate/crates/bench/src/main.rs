use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use planarloc::io::{write_problem, ProblemDocument};
use planarloc::synth::{generate, WorldConfig};
use planarloc::{Error, Method};
use planarloc_bench::chart::write_charts;
use planarloc_bench::{
    run_experiment, solve_file, trial_seed, BenchError, CellSummary, ExperimentKind, ExperimentPlan,
};

/// Planar-motion visual localization: simulation, solving and benchmarks.
#[derive(Parser)]
#[command(name = "planarloc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic problem files.
    Simulate(SimulateArgs),
    /// Localize the query of one problem file.
    Solve(SolveArgs),
    /// Run a simulation experiment and write CSVs and charts.
    Bench(BenchArgs),
    /// Redraw the charts of a trial CSV.
    Plot(PlotArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    out: PathBuf,
    /// Number of scenes.
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Matches per reference view.
    #[arg(long, default_value_t = 20)]
    matches: usize,
    #[arg(long, default_value_t = 5)]
    refs: usize,
    /// Pixel noise sigma.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0.0)]
    outliers: f64,
}

#[derive(Args)]
struct SolveArgs {
    file: PathBuf,
    #[arg(long, default_value = "2p1p")]
    method: Method,
    /// Overrides the RANSAC seed stored in the file.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    iterations: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Experiment {
    Accuracy,
    Robustness,
    Timing,
}

#[derive(Args)]
struct BenchArgs {
    experiment: Experiment,
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    /// Noise levels, outlier rates or match counts, depending on the experiment.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    sweep: Option<Vec<f64>>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Matches per reference view.
    #[arg(long, value_delimiter = ',')]
    matches: Option<Vec<usize>>,
    #[arg(long, default_value_t = 5)]
    refs: usize,
    /// Pixel noise of robustness and timing scenes.
    #[arg(long)]
    noise: Option<f64>,
    /// Outlier rate of accuracy and timing scenes.
    #[arg(long)]
    outliers: Option<f64>,
}

#[derive(Args)]
struct PlotArgs {
    csv: PathBuf,
    /// Defaults to the directory of the CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::Solve(a) => return solve(&a),
        Command::Bench(a) => bench(a),
        Command::Plot(a) => plot(&a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn simulate(a: &SimulateArgs) -> Result<(), BenchError> {
    std::fs::create_dir_all(&a.out)?;
    for i in 0..a.trials {
        let config = WorldConfig {
            n_matches: a.matches,
            noise_sigma_px: a.noise,
            outlier_rate: a.outliers,
            n_references: a.refs,
            seed: trial_seed(a.seed, 0, i as u64),
            ..WorldConfig::default()
        };
        let scene = generate(&config)?;
        let path = a.out.join(format!("scene_{i:04}.json"));
        write_problem(&path, &ProblemDocument::from(&scene))?;
        println!("{}", path.display());
    }
    Ok(())
}

fn solve(a: &SolveArgs) -> ExitCode {
    match solve_file(&a.file, a.method, a.seed, a.iterations) {
        Ok(report) => {
            print!("{report}");
            if report.is_success() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_FAILURE)
            }
        }
        Err(BenchError::Core(e @ (Error::InsufficientMatches { .. } | Error::NoValidSample))) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FAILURE)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn bench(a: BenchArgs) -> Result<(), BenchError> {
    let kind = match a.experiment {
        Experiment::Accuracy => ExperimentKind::Accuracy,
        Experiment::Robustness => ExperimentKind::Robustness,
        Experiment::Timing => ExperimentKind::Timing,
    };
    let mut plan = ExperimentPlan::new(kind);
    plan.trials_per_cell = a.trials;
    plan.seed = a.seed;
    plan.references = a.refs;
    if let Some(m) = a.methods {
        plan.methods = m;
    }
    if let Some(s) = a.sweep {
        plan.sweep = s;
    }
    if let Some(m) = a.matches {
        plan.matches = m;
    }
    if let Some(n) = a.noise {
        plan.noise_sigma_px = n;
    }
    if let Some(o) = a.outliers {
        plan.outlier_rate = o;
    }
    let report = run_experiment(&plan, &a.out)?;
    print_summary(kind, &report.summaries);
    for f in &report.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn print_summary(kind: ExperimentKind, summaries: &[CellSummary]) {
    println!(
        "{:<6} {:>7} {:>8} {:>7} {:>7} {:>8} {:>11} {:>11} {:>11} {:>8} {:>9}",
        "method",
        "sigma",
        "outliers",
        "matches",
        "trials",
        "excluded",
        "rot_deg",
        "trans_m",
        "dir_deg",
        "success",
        "time_ms"
    );
    for s in summaries {
        println!(
            "{:<6} {:>7.2} {:>8.2} {:>7} {:>7} {:>8} {:>11.4e} {:>11.4e} {:>11.4e} {:>8.3} {:>9.3}",
            s.method,
            s.noise_sigma_px,
            s.outlier_rate,
            s.n_matches,
            s.trials,
            s.excluded,
            s.mean_rotation_err_deg,
            s.mean_translation_err_m,
            s.mean_direction_err_deg,
            s.success_rate,
            s.mean_wall_time_ms
        );
    }
    if kind == ExperimentKind::Accuracy {
        println!("failed trials are excluded from the error means (column 'excluded')");
    }
}

fn plot(a: &PlotArgs) -> Result<(), BenchError> {
    let out = a
        .out
        .clone()
        .unwrap_or_else(|| a.csv.parent().map(Path::to_path_buf).unwrap_or_default());
    std::fs::create_dir_all(&out)?;
    for f in write_charts(&a.csv, &out)? {
        println!("wrote {}", f.display());
    }
    Ok(())
}
