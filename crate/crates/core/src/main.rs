use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use driftgp::estimator::process_mission;
use driftgp::flowfield::write_field_csv;
use driftgp::harness::config::{KvConfig, RunConfig};
use driftgp::harness::kernel_check::kernel_check;
use driftgp::harness::montecarlo::monte_carlo;
use driftgp::harness::report::emit_report;
use driftgp::simulator::{ingest_cycles, run_mission, save_cycles};
use driftgp::{Error, KernelKind, Result, Vec2};

#[derive(Parser)]
#[command(
    name = "driftgp",
    version,
    about = "Ocean current estimation from dead-reckoning drift"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one mission and write its cycle log as JSON Lines.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the true field on the evaluation grid as CSV.
        #[arg(long)]
        truth_csv: Option<PathBuf>,
    },
    /// Estimate the current field from a cycle log.
    Estimate {
        #[arg(long)]
        cycles: PathBuf,
        /// Hyperparameter / EM / grid configuration file.
        #[arg(long)]
        hyper: Option<PathBuf>,
        /// `incompressible` or `standard`; defaults to the config's `kernel`.
        #[arg(long)]
        kernel: Option<KernelKind>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the Monte Carlo convergence study.
    Montecarlo {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Print kernel self-checks as JSON.
    KernelCheck {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 40)]
        points: usize,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 100)]
        lags: usize,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            seed,
            out,
            truth_csv,
        } => {
            let cfg = RunConfig::load(&config)?;
            let field = cfg.field.resolve(seed);
            let log = run_mission(&cfg.vehicle, &field, seed)?;
            save_cycles(&out, &log)?;
            if let Some(path) = truth_csv {
                let pts = cfg.grid.points();
                let vals: Vec<Vec2> = pts.iter().map(|&p| field.current(p)).collect();
                write_csv(&path, &pts, &vals)?;
            }
            eprintln!("wrote {} cycles to {}", log.len(), out.display());
            Ok(())
        }
        Command::Estimate {
            cycles,
            hyper,
            kernel,
            out,
        } => {
            let kv = match hyper {
                Some(p) => KvConfig::load(p)?,
                None => KvConfig::default(),
            };
            let hp = kv.hyper()?;
            let em = kv.em(&hp)?;
            let kernel = kernel.map_or_else(|| kv.kernel(), Ok)?;
            let log = ingest_cycles(&cycles)?;
            let est = process_mission(&log, &hp, kernel, &em)?;
            fs::create_dir_all(&out).map_err(|e| Error::Io {
                path: out.clone(),
                source: e,
            })?;
            write_json(&out.join("diagnostics.json"), &est.diagnostics)?;
            write_json(&out.join("model.json"), &est.model.snapshot())?;
            let anchor: Vec<Vec2> = log
                .cycles
                .iter()
                .flat_map(|c| c.dead_reckoned().iter().copied().chain([c.gps_fix()]))
                .collect();
            if !anchor.is_empty() {
                let grid = kv.grid_covering(&anchor, &hp)?;
                let pts = grid.points();
                write_csv(&out.join("field.csv"), &pts, &est.model.predict_mean(&pts))?;
            }
            let failed = est.diagnostics.iter().filter(|d| d.error.is_some()).count();
            eprintln!(
                "processed {} cycles ({failed} failed), {} pseudo-targets",
                log.len(),
                est.model.len()
            );
            Ok(())
        }
        Command::Montecarlo { config, out, threads } => {
            let cfg = RunConfig::load(&config)?;
            let report = match threads {
                Some(n) => rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::Config(e.to_string()))?
                    .install(|| monte_carlo(&cfg))?,
                None => monte_carlo(&cfg)?,
            };
            emit_report(&report, &out)?;
            let resolved = out.join("config.resolved.txt");
            fs::write(&resolved, cfg.render()).map_err(|e| Error::Io {
                path: resolved,
                source: e,
            })?;
            for kind in &report.kinds {
                if let Some(last) = report.summary(*kind).last() {
                    eprintln!(
                        "{kind}: cycle {} median {:.4} [{:.4}, {:.4}]",
                        last.cycle, last.median, last.lower, last.upper
                    );
                }
            }
            eprintln!(
                "{} trials, {} aborted, {} degenerate",
                report.trials.len(),
                report.aborted(),
                report.degenerate()
            );
            Ok(())
        }
        Command::KernelCheck {
            config,
            seed,
            points,
            trials,
            lags,
        } => {
            let hp = match config {
                Some(p) => KvConfig::load(p)?.hyper()?,
                None => driftgp::HyperParams::default(),
            };
            let r = kernel_check(&hp, seed, points, trials, lags);
            let out = json!({ "hyper": hp, "check": r });
            println!("{}", serde_json::to_string_pretty(&out)?);
            Ok(())
        }
    }
}

fn write_json<T: serde::Serialize>(path: &std::path::Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_csv(path: &std::path::Path, pts: &[Vec2], vals: &[Vec2]) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    write_field_csv(std::io::BufWriter::new(f), pts, vals).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}
