use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use log::{error, info};

use vortex_damping::config::{OracleConfig, RunConfig, SelftestConfig};
use vortex_damping::report::{write_oracle_outputs, write_report, write_selftest_outputs};
use vortex_damping::run::simulate;

#[derive(Parser)]
#[command(name = "vortex-damping", version, about = "Point vortex perturbation runs and damping diagnostics")]
struct Cli {
    /// Worker threads for the parallel kernels (all cores when unset).
    #[arg(long, global = true, env = "VORTEX_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the perturbed vortex and write series, snapshots and a summary.
    Simulate {
        /// TOML run configuration; built-in defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the configured output directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Decay rates of the linearized stream function from oscillatory integrals.
    Oracle {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Time-dependent weight checks.
    Weights {
        #[command(subcommand)]
        command: WeightsCommand,
    },
    /// Merge the outputs found in a directory into report.json.
    Report { dir: PathBuf },
}

#[derive(Subcommand)]
enum WeightsCommand {
    /// Property sweep of the weight construction; fails on any violation.
    Selftest {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
}

fn load<T: Default>(path: Option<PathBuf>, read: impl Fn(&std::path::Path) -> vortex_damping::Result<T>) -> anyhow::Result<T> {
    match path {
        Some(p) => read(&p).with_context(|| format!("loading {}", p.display())),
        None => Ok(T::default()),
    }
}

fn execute(command: Command) -> anyhow::Result<bool> {
    match command {
        Command::Simulate { config, output_dir } => {
            let mut cfg = load(config, RunConfig::load)?;
            if let Some(d) = output_dir {
                cfg.output_dir = d;
            }
            match simulate(&cfg) {
                Ok(out) => {
                    info!("{} rows written to {}", out.rows.len(), out.dir.display());
                    Ok(true)
                }
                Err((e, _)) => Err(e).context("simulation failed"),
            }
        }
        Command::Oracle { config, output_dir } => {
            let mut cfg = load(config, OracleConfig::load)?;
            if let Some(d) = output_dir {
                cfg.output_dir = d;
            }
            let report = write_oracle_outputs(&cfg)?;
            match &report.slopes {
                Some(s) => info!("slopes: psi {:.3}, dpsi {:.3}", s.psi.slope, s.dpsi.slope),
                None => info!("too few times in the fit window for slopes"),
            }
            Ok(true)
        }
        Command::Weights { command: WeightsCommand::Selftest { config, output_dir } } => {
            let mut cfg = load(config, SelftestConfig::load)?;
            if let Some(d) = output_dir {
                cfg.output_dir = d;
            }
            let report = write_selftest_outputs(&cfg)?;
            if !report.passed {
                error!("weight selftest: {} violations", report.total_violations());
            }
            Ok(report.passed)
        }
        Command::Report { dir } => {
            let m = write_report(&dir)?;
            info!("report written; missing: {:?}", m.missing);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            error!("thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            error!("{e:#}");
            ExitCode::from(2)
        }
    }
}
