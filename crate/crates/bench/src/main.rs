use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stdd_bench::report::{write_run, write_sweep_csv};
use stdd_bench::{Experiment, ExperimentConfig, Result};

/// Space-time domain decomposition benchmarks.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured method and write per-method CSVs, a summary and
    /// an error plot.
    Run {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Also write interface traces and subdomain coefficient arrays.
        #[arg(long)]
        dump_fields: bool,
    },
    /// Evaluate the configured parameter grid and write sweep.csv.
    Sweep {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Worker threads for grid points.
        #[arg(long, default_value_t = default_threads())]
        threads: usize,
    },
}

#[derive(Args)]
struct Common {
    /// Output directory; overrides the config file.
    #[arg(long, env = "STDD_OUT_DIR")]
    out_dir: Option<PathBuf>,
    /// Exit with status 0 even when a method diverges.
    #[arg(long)]
    allow_divergence: bool,
    /// Seed for random initial guesses and assumption sampling; overrides
    /// the config file.
    #[arg(long)]
    seed: Option<u64>,
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Exit status when a method diverges without `--allow-divergence`.
const DIVERGED: u8 = 2;

fn load(path: &Path, common: &Common) -> Result<(Experiment, PathBuf)> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let dir = common.out_dir.clone().or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("stdd-out"));
    Ok((Experiment::new(cfg)?, dir))
}

fn execute(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { config, common, dump_fields } => {
            let (exp, dir) = load(&config, &common)?;
            let report = exp.run()?;
            let out = write_run(&dir, &report, dump_fields)?;
            eprintln!("monolithic e_e = {:e}", report.monolithic.e_e);
            for m in &report.methods {
                let status = if m.trace.converged {
                    "converged"
                } else if m.trace.diverged {
                    "diverged"
                } else if m.trace.stagnated {
                    "stagnated"
                } else {
                    "max iterations"
                };
                eprintln!(
                    "{}: {status} after {} iterations, plateau {:?} at {:?}, L = {:?}",
                    m.label,
                    m.iterations(),
                    m.plateau_value(),
                    m.plateau_index(),
                    m.fitted_l()
                );
            }
            eprintln!("wrote {} and {}", out.summary.display(), out.plot.display());
            Ok(if report.any_diverged() && !common.allow_divergence {
                ExitCode::from(DIVERGED)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Sweep { config, common, threads } => {
            let (exp, dir) = load(&config, &common)?;
            let rows = exp.sweep(threads)?;
            std::fs::create_dir_all(&dir)?;
            let path = dir.join("sweep.csv");
            write_sweep_csv(&path, &rows)?;
            let diverged = rows.iter().filter(|r| r.diverged).count();
            eprintln!("{} grid points, {} diverged; wrote {}", rows.len(), diverged, path.display());
            Ok(if diverged > 0 && !common.allow_divergence { ExitCode::from(DIVERGED) } else { ExitCode::SUCCESS })
        }
    }
}

fn main() -> ExitCode {
    faer::set_global_parallelism(faer::Par::Seq);
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
