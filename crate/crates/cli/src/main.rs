//! Command-line surface: reproducible integral tables, reductions,
//! verification suites, and cycle searches.
//!
//! Every run is driven by a flat key=value config file and/or flags (flags
//! win); the `MELNIKOV_THREADS` environment variable overrides the thread
//! count from either source. Identical configuration and seed produce
//! byte-identical output tables. Commands exit 0 on success, 1 when a
//! verification suite or bound check fails, and 2 on usage errors.

mod commands;
mod config;
mod out;
mod par;
mod pio;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "melnikov", version, about = "Abelian-integral and Melnikov-function toolkit for two piecewise-smooth planar systems")]
struct Cli {
    /// Flat key=value config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default, Clone)]
struct CommonArgs {
    /// System: lv or bt.
    #[arg(long)]
    system: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Grid size (h-samples) where the command sweeps a grid.
    #[arg(long)]
    grid: Option<usize>,
    /// Seed for random perturbations.
    #[arg(long)]
    seed: Option<u64>,
    /// Perturbation degree for random perturbations.
    #[arg(long)]
    degree: Option<u32>,
    /// Perturbation file path (overrides seed/degree).
    #[arg(long)]
    perturbation: Option<PathBuf>,
    /// Quadrature tolerance.
    #[arg(long, allow_negative_numbers = true)]
    tol: Option<f64>,
    /// Worker threads (MELNIKOV_THREADS overrides).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate Abelian integrals I_{i,j}(h) over an h-grid.
    Integrals {
        #[command(flatten)]
        common: CommonArgs,
        /// Semicolon-separated index pairs, e.g. "0,0;0,1;-1,1".
        #[arg(long)]
        pairs: Option<String>,
        #[arg(long, allow_negative_numbers = true)]
        h_min: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        h_max: Option<f64>,
    },
    /// Reduce a perturbation to its basis representation and check it
    /// against the direct line-integral oracle.
    Reduce {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the verification suites (Picard-Fuchs, second-order, Riccati,
    /// reflection, derivative identities, annihilator, BT h0).
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        /// Random representations per system for the annihilator suite.
        #[arg(long)]
        reps: Option<usize>,
        /// Test hook: corrupt one Picard-Fuchs matrix entry.
        #[arg(long, hide = true)]
        inject_pf_fault: bool,
    },
    /// Isolate Melnikov zeros and cross-check them against limit cycles
    /// found by direct simulation.
    Cycles {
        #[command(flatten)]
        common: CommonArgs,
        /// Perturbation strength for the simulation.
        #[arg(long, allow_negative_numbers = true)]
        eps: Option<f64>,
        /// Section samples for the cycle search.
        #[arg(long)]
        samples: Option<usize>,
        /// Also dump one trajectory starting at this section abscissa.
        #[arg(long, allow_negative_numbers = true)]
        trajectory_from: Option<f64>,
        /// Crossings to record for the trajectory dump.
        #[arg(long, default_value_t = 4)]
        trajectory_events: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let file_cfg = match config::FileConfig::load(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let code = match cli.command {
        Command::Integrals { common, pairs, h_min, h_max } => {
            commands::integrals::run(&file_cfg, &common, pairs.as_deref(), h_min, h_max)
        }
        Command::Reduce { common } => commands::reduce::run(&file_cfg, &common),
        Command::Verify { common, reps, inject_pf_fault } => {
            commands::verify::run(&file_cfg, &common, reps, inject_pf_fault)
        }
        Command::Cycles { common, eps, samples, trajectory_from, trajectory_events } => {
            commands::cycles::run(&file_cfg, &common, eps, samples, trajectory_from, trajectory_events)
        }
    };
    match code {
        Ok(c) => ExitCode::from(c),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
