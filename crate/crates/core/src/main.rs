use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use eqmollify::config::{load_config, ExperimentConfig, ExperimentKind};
use eqmollify::experiment::{output_path, run_with_settings};
use eqmollify::Error;

#[derive(Parser)]
#[command(
    name = "eqmollify",
    version,
    about = "Equivariant smoothing of currents and metrics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Weak convergence, support and boundedness of the current smoothing operators.
    MollifyCurrent(Flags),
    /// Locality, invariance and seminorm convergence of the smoothed metric.
    SmoothMetric(Flags),
    /// Curvature bounds of the base and smoothed metrics.
    CurvatureReport(Flags),
    /// Distance dilation of the smoothed metric against the base metric.
    LipschitzSweep(Flags),
    /// Group invariance residuals of the smoothed currents and metrics.
    InvarianceCheck(Flags),
    /// Largest epsilon meeting the seminorm bound for each k.
    SelectEpsilon(Flags),
}

#[derive(Args)]
struct Flags {
    /// JSON experiment config.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Built-in scenario, used when no config is given or to override it.
    #[arg(long)]
    scenario: Option<String>,
    /// Output root; files go to DIR/<scenario>/<kind>/.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Number of epsilon values taken from the schedule.
    #[arg(long, value_name = "K")]
    epsilon_steps: Option<usize>,
    /// Grid resolution per axis.
    #[arg(long, value_name = "N")]
    grid: Option<usize>,
    #[arg(long)]
    quiet: bool,
}

impl Command {
    fn split(self) -> (ExperimentKind, Flags) {
        match self {
            Command::MollifyCurrent(f) => (ExperimentKind::MollifyCurrent, f),
            Command::SmoothMetric(f) => (ExperimentKind::SmoothMetric, f),
            Command::CurvatureReport(f) => (ExperimentKind::CurvatureReport, f),
            Command::LipschitzSweep(f) => (ExperimentKind::LipschitzSweep, f),
            Command::InvarianceCheck(f) => (ExperimentKind::InvarianceCheck, f),
            Command::SelectEpsilon(f) => (ExperimentKind::SelectEpsilon, f),
        }
    }
}

fn build_config(kind: ExperimentKind, f: &Flags) -> eqmollify::Result<ExperimentConfig> {
    let mut config = match (&f.config, &f.scenario) {
        (Some(path), _) => load_config(path)?,
        (None, Some(name)) => ExperimentConfig::for_scenario(name.clone()),
        (None, None) => {
            return Err(Error::Config(
                "either --config or --scenario is required".into(),
            ))
        }
    };
    if let Some(name) = &f.scenario {
        config.scenario = name.clone();
    }
    if let Some(dir) = &f.out {
        config.output_dir = Some(dir.clone());
    }
    if f.seed.is_some() {
        config.seed = f.seed;
    }
    if f.grid.is_some() {
        config.grid = f.grid;
    }
    if let Some(steps) = f.epsilon_steps {
        if steps == 0 {
            return Err(Error::Config("epsilon-steps: must be at least 1".into()));
        }
        config = config.with_epsilon_steps(kind, steps);
    }
    config.validate()?;
    Ok(config)
}

fn configure_threads() -> eqmollify::Result<()> {
    let Ok(value) = std::env::var("EQMOLLIFY_THREADS") else {
        return Ok(());
    };
    let threads: usize = value.parse().ok().filter(|n| *n > 0).ok_or_else(|| {
        Error::Config(format!(
            "EQMOLLIFY_THREADS: expected a positive integer, got '{value}'"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Config(format!("EQMOLLIFY_THREADS: {e}")))
}

fn run(kind: ExperimentKind, flags: &Flags) -> eqmollify::Result<bool> {
    configure_threads()?;
    let settings = build_config(kind, flags)?.resolve(kind)?;
    let report = run_with_settings(&settings).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", settings.scenario)),
        other => other,
    })?;
    let dir = output_path(&settings);
    report.write(&dir)?;
    if !flags.quiet {
        for c in &report.checks {
            let status = if c.pass { "PASS" } else { "FAIL" };
            println!(
                "{status} {:<40} value={:.6e} tolerance={:.6e}",
                c.name, c.value, c.tolerance
            );
        }
        println!("wrote {}", dir.display());
    }
    Ok(report.passed())
}

fn main() -> ExitCode {
    let (kind, flags) = Cli::parse().command.split();
    match run(kind, &flags) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
