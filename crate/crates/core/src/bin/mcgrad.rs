//! Command-line front end: `mcgrad <subcommand> --config PATH [options]`.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mcgrad::harness::{self, ExperimentConfig, Ini, Kind, RunOptions, EXIT_CONFIG};
use mcgrad::Error;

#[derive(Parser)]
#[command(name = "mcgrad", version, about = "Prescribed mean curvature gradient-estimate lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a structural condition on a nonlinearity by sampling.
    CheckConditions(Common),
    /// Integrate a radial profile or solve an annulus problem by shooting.
    SolveRadial(Common),
    /// Solve the Dirichlet problem on a square grid.
    #[command(name = "solve-2d")]
    Solve2d(Common),
    /// Evaluate a gradient bound at every interior node of a solution.
    ValidateBounds(Common),
    /// Fit the decay of the central gradient over growing domains.
    FitDecay(Common),
    /// Evaluate the maximum-principle inequality at the argmax of hFφ.
    Bernstein(Common),
    /// Run an expanding-domain sweep or a blow-up envelope fit.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (INI).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `[experiment] out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Seed for randomized sampling; overrides `[experiment] seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Also write gnuplot scripts next to the CSV reports.
    #[arg(long)]
    gnuplot: bool,
    /// Ignore cached 2-D solutions.
    #[arg(long)]
    force: bool,
}

fn load(kind: Kind, common: &Common) -> Result<ExperimentConfig, Error> {
    let text = std::fs::read_to_string(&common.config)?;
    let mut ini = Ini::parse(&text)?;
    match ini.value("experiment", "kind") {
        None => ini.set("experiment", "kind", kind.name()),
        Some(k) if k == kind.name() => {}
        Some(k) => {
            return Err(Error::Config {
                line: 0,
                message: format!("config is for `{k}`, not `{}`", kind.name()),
            })
        }
    }
    let cfg = ExperimentConfig::from_ini(ini)?;
    Ok(match common.seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, common) = match &cli.command {
        Command::CheckConditions(c) => (Kind::CheckConditions, c),
        Command::SolveRadial(c) => (Kind::SolveRadial, c),
        Command::Solve2d(c) => (Kind::Solve2D, c),
        Command::ValidateBounds(c) => (Kind::ValidateBounds, c),
        Command::FitDecay(c) => (Kind::FitDecay, c),
        Command::Bernstein(c) => (Kind::BernsteinDiagnose, c),
        Command::Sweep(c) => (Kind::Sweep, c),
    };
    let cfg = match load(kind, common) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("mcgrad: {}: {e}", common.config.display());
            let code = match e {
                Error::Io(_) => EXIT_CONFIG,
                ref other => harness::exit_code(other),
            };
            return ExitCode::from(code as u8);
        }
    };
    let out_dir = common
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("mcgrad-out"));
    let opts = RunOptions {
        out_dir,
        jobs: common.jobs,
        gnuplot: common.gnuplot,
        force: common.force,
    };
    match harness::run(&cfg, &opts) {
        Ok(outcome) => {
            // A closed stdout (e.g. piped into `head`) is not an error.
            let mut stdout = std::io::stdout().lock();
            let _ = writeln!(stdout, "{}: {}", kind.name(), outcome.message);
            for f in &outcome.files {
                let _ = writeln!(stdout, "  wrote {}", f.display());
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("mcgrad {}: {e}", kind.name());
            ExitCode::from(harness::exit_code(&e) as u8)
        }
    }
}
