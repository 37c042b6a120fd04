//! Batch drivers for the stream function Stokes experiments.

mod commands;
mod config;

use std::path::PathBuf;

use anyhow::{Context, Result};
use c0ripg::heat::{BenchmarkCase, PicardOptions};
use clap::{Args, Parser, Subcommand};
use config::{resolve, ConfigFile};

#[derive(Parser)]
#[command(name = "c0ripg", version, about = "Divergence-free stream function Stokes solver: convergence studies, convection benchmarks and tracer advection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct CommonFlags {
    /// TOML config file; command-line flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Mesh divisions per direction, comma separated.
    #[arg(long = "N", value_delimiter = ',')]
    divisions: Option<Vec<usize>>,
    /// Polynomial degrees, comma separated.
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<usize>>,
    /// Penalty scaling (coercive above sqrt(2)).
    #[arg(long)]
    delta: Option<f64>,
    /// Output directory root.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Fixed-point iteration cap.
    #[arg(long)]
    max_picard: Option<usize>,
    /// Temperature under-relaxation factor in (0, 1].
    #[arg(long)]
    relax: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Manufactured-solution convergence study on (-1, 1)^2.
    Mms(CommonFlags),
    /// Stability sweep over the penalty scaling delta.
    DeltaSweep {
        #[command(flatten)]
        common: CommonFlags,
        /// Delta values to probe, comma separated.
        #[arg(long, value_delimiter = ',')]
        deltas: Option<Vec<f64>>,
    },
    /// Thermal convection benchmark (BB1a, BB2a, T2, T4).
    Benchmark {
        #[command(flatten)]
        common: CommonFlags,
        #[arg(long)]
        case: Option<String>,
    },
    /// Passive tracer advection through a converged benchmark field.
    Tracers {
        #[command(flatten)]
        common: CommonFlags,
        #[arg(long)]
        case: Option<String>,
        /// Particles per side of the initial equidistant grid.
        #[arg(long)]
        particles: Option<usize>,
        /// Advection time step.
        #[arg(long)]
        dt: Option<f64>,
        /// Total advection time.
        #[arg(long)]
        horizon: Option<f64>,
        /// Steps between occupancy/snapshot outputs.
        #[arg(long)]
        snapshot_every: Option<usize>,
    },
}

fn load_config(common: &CommonFlags, experiment: &str) -> Result<ConfigFile> {
    let cfg = match &common.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    cfg.check_experiment(experiment)?;
    Ok(cfg)
}

fn picard_options(case: &BenchmarkCase, common: &CommonFlags, cfg: &ConfigFile) -> PicardOptions {
    let defaults = PicardOptions::for_case(case);
    PicardOptions {
        max_iterations: resolve(common.max_picard, cfg.max_picard, defaults.max_iterations),
        relaxation: resolve(common.relax, cfg.relax, defaults.relaxation),
        ..defaults
    }
}

fn lookup_case(flag: Option<String>, cfg: &ConfigFile) -> Result<BenchmarkCase> {
    let name = flag.or_else(|| cfg.case.clone()).context("missing --case (BB1a, BB2a, T2 or T4)")?;
    BenchmarkCase::by_name(&name).with_context(|| format!("unknown benchmark case '{name}'"))
}

fn main() -> Result<()> {
    // Reference mode: repeated runs must reproduce output files bit for bit.
    faer::set_global_parallelism(faer::Par::Seq);

    match Cli::parse().command {
        Command::Mms(common) => {
            let cfg = load_config(&common, "mms")?;
            commands::run_mms(&commands::MmsParams {
                divisions: resolve(common.divisions.clone(), cfg.divisions.clone(), vec![8, 16, 32, 64, 128]),
                degrees: resolve(common.p.clone(), cfg.p.clone(), vec![2, 3, 4]),
                delta: resolve(common.delta, cfg.delta, 2.0),
                out: resolve(common.out.clone(), cfg.out.clone(), PathBuf::from("out")),
            })
        }
        Command::DeltaSweep { common, deltas } => {
            let cfg = load_config(&common, "delta_sweep")?;
            commands::run_delta_sweep(&commands::DeltaSweepParams {
                divisions: resolve(common.divisions.clone(), cfg.divisions.clone(), vec![16]),
                degrees: resolve(common.p.clone(), cfg.p.clone(), vec![2, 3]),
                deltas: resolve(
                    deltas,
                    cfg.deltas.clone(),
                    vec![0.025, 0.05, 0.1, 0.2, 0.5, 1.0, 1.5, 2.0, 4.0, 8.0],
                ),
                out: resolve(common.out.clone(), cfg.out.clone(), PathBuf::from("out")),
            })
        }
        Command::Benchmark { common, case } => {
            let cfg = load_config(&common, "benchmark")?;
            let case = lookup_case(case, &cfg)?;
            let opts = picard_options(&case, &common, &cfg);
            commands::run_benchmark(&commands::BenchmarkParams {
                case,
                divisions: resolve(common.divisions.clone(), cfg.divisions.clone(), vec![16, 32, 64]),
                degrees: resolve(common.p.clone(), cfg.p.clone(), vec![2, 3]),
                delta: resolve(common.delta, cfg.delta, 2.0),
                opts,
                out: resolve(common.out.clone(), cfg.out.clone(), PathBuf::from("out")),
            })
        }
        Command::Tracers { common, case, particles, dt, horizon, snapshot_every } => {
            let cfg = load_config(&common, "tracers")?;
            let case = lookup_case(case, &cfg)?;
            let opts = picard_options(&case, &common, &cfg);
            let division = resolve(common.divisions.clone(), cfg.divisions.clone(), vec![8])
                .first()
                .copied()
                .context("tracers needs one mesh size")?;
            let degree = resolve(common.p.clone(), cfg.p.clone(), vec![2]).first().copied().unwrap_or(2);
            commands::run_tracers(&commands::TracerParams {
                case,
                division,
                degree,
                delta: resolve(common.delta, cfg.delta, 2.0),
                opts,
                particles_per_side: resolve(particles, cfg.particles, 256),
                dt: resolve(dt, cfg.dt, 5e-4),
                horizon: resolve(horizon, cfg.horizon, 0.02),
                snapshot_every: resolve(snapshot_every, cfg.snapshot_every, 10),
                out: resolve(common.out.clone(), cfg.out.clone(), PathBuf::from("out")),
            })
        }
    }
}
