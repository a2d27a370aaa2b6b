use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use crs_core::ao::ao_solve;
use crs_core::experiment::{
    compare_report, load_region, run_experiment, worker_pool, ExperimentConfig,
};
use crs_core::oracle::{grid_search_wsr, GridOracleSpec};

#[derive(Parser)]
#[command(
    name = "crs",
    version,
    about = "Cooperative rate-splitting rate regions"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the configured schemes and write region CSVs and a manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides `out` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed of the random scenario generator (overrides `seed`).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare region CSVs of one scenario; the first is the reference.
    Compare {
        #[arg(required = true, num_args = 2..)]
        regions: Vec<PathBuf>,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        /// Write the report here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the optimizer against the exhaustive grid on a two-antenna scenario.
    OracleCheck {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1.0)]
        theta: f64,
        #[arg(long, default_value_t = 1.0)]
        u2: f64,
        /// Largest admissible shortfall of the optimizer, in bits/s/Hz.
        #[arg(long, default_value_t = 0.05)]
        gap: f64,
    },
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg =
        ExperimentConfig::load(path).with_context(|| format!("reading {}", path.display()))?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Run { config, out, seed } => {
            let cfg = load_config(&config, seed)?;
            let Some(out) = out.or_else(|| cfg.out.clone()) else {
                bail!("no output directory: pass --out or set `out` in the config");
            };
            let summary = run_experiment(&cfg, &out, cli.jobs)?;
            for (kind, region) in &summary.regions {
                println!(
                    "{kind}: {} points, {} infeasible, hypervolume {:.6}",
                    region.points.len(),
                    region.infeasible_count(),
                    region.hypervolume()
                );
            }
            println!("wrote {} ({:?})", summary.out_dir.display(), summary.status);
            Ok(summary.status.exit_code() as u8)
        }
        Command::Compare { regions, tol, out } => {
            let loaded = regions
                .iter()
                .map(|p| load_region(p).with_context(|| format!("reading {}", p.display())))
                .collect::<Result<Vec<_>>>()?;
            let report = compare_report(loaded, tol)?;
            match out {
                Some(path) => report.write_text(std::fs::File::create(&path)?)?,
                None => report.write_text(std::io::stdout().lock())?,
            }
            Ok(0)
        }
        Command::OracleCheck {
            config,
            seed,
            theta,
            u2,
            gap,
        } => {
            let cfg = load_config(&config, seed)?;
            let scenario = cfg.scenario()?;
            let u = [1.0, u2];
            let ao_wsr = ao_solve(&scenario, u, theta, &cfg.ao, None)?.wsr;
            let pool = worker_pool(cli.jobs)?;
            let (oracle_wsr, _) =
                pool.install(|| grid_search_wsr(&GridOracleSpec::new(scenario, theta, u)))?;
            let shortfall = oracle_wsr - ao_wsr;
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "theta,u2,ao_wsr,oracle_wsr,shortfall,pass")?;
            writeln!(
                stdout,
                "{theta},{u2},{ao_wsr:.9},{oracle_wsr:.9},{shortfall:.9},{}",
                shortfall <= gap
            )?;
            Ok(if shortfall <= gap { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
