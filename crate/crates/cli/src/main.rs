use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gradflow_core::harness::{self, ExperimentConfig};
use gradflow_core::Error;

/// High-friction relaxation systems and their gradient-flow limits.
#[derive(Debug, Parser)]
#[command(name = "gradflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Parallel sweep workers (overrides `sweep.workers`).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Seed of the perturbed momentum prep (overrides `initial.seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Only print warnings and errors.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// One relaxation run with the limit flow alongside.
    Simulate { config: PathBuf },
    /// ε-sweep and rate fit.
    Sweep { config: PathBuf },
    /// Invariant checks on the configured model.
    Check { config: PathBuf },
    /// Relative energy identities and the stability inequality.
    Identity { config: PathBuf },
    /// Consolidate the JSON outputs under a directory.
    Report { dir: PathBuf },
}

enum Failure {
    Config(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Config(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

fn load(path: &Path, cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    if let Some(w) = cli.workers {
        cfg.sweep.workers = Some(w);
    }
    if let Some(s) = cli.seed {
        cfg.initial.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Returns whether every check passed.
fn run(cli: &Cli) -> Result<bool, Failure> {
    match &cli.command {
        Command::Simulate { config } => {
            let cfg = load(config, cli)?;
            let s = harness::simulate(&cfg, &cfg.output.dir)?;
            println!(
                "{} eps={} steps={} mass drift {:.2e}/{:.2e} max energy increase {:.2e} sup={:.4e}",
                s.model, s.epsilon, s.relax_steps, s.relax_mass_drift, s.limit_mass_drift, s.max_energy_increase, s.sup_value
            );
            Ok(s.pass)
        }
        Command::Sweep { config } => {
            let cfg = load(config, cli)?;
            let start = std::time::Instant::now();
            let runs = harness::sweep_runs(&cfg, cfg.workers())?;
            let grid = cfg.build_grid()?;
            let model = cfg.build_model(&grid)?;
            let report = harness::SweepReport::from_runs(&model, &runs, start.elapsed().as_secs_f64());
            harness::write_sweep(&cfg.output.dir, &report, &runs)?;
            print!("{}", report.table());
            Ok(report.pass)
        }
        Command::Check { config } => {
            let cfg = load(config, cli)?;
            let report = harness::check_suite(&cfg)?;
            report.write_json(&cfg.output.dir.join("check.json"))?;
            print!("{}", report.table());
            Ok(report.pass)
        }
        Command::Identity { config } => {
            let cfg = load(config, cli)?;
            std::fs::create_dir_all(&cfg.output.dir).map_err(|e| Failure::Numerical(e.to_string()))?;
            let s = harness::identity(&cfg, &cfg.output.dir)?;
            println!(
                "{} eps={} relaxation identity {:.3e} inequality {} gradient-flow imbalance {:.3e} of {:.3e}",
                s.model,
                s.epsilon,
                s.relax_identity_relative,
                s.inequality["holds"],
                s.gradflow_integrated_imbalance,
                s.gradflow_integrated_dissipation
            );
            Ok(s.pass)
        }
        Command::Report { dir } => {
            let r = harness::report(dir)?;
            print!("{}", r.table);
            Ok(r.pass)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            log::error!("numerical checks failed");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(m)) => {
            log::error!("{m}");
            ExitCode::from(1)
        }
        Err(Failure::Config(m)) => {
            log::error!("configuration error: {m}");
            ExitCode::from(2)
        }
    }
}
