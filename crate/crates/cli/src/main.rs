use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use maxaffine::experiment::TruthKind;
use maxaffine::CovariateLaw;

mod commands;
mod config;

/// Max-affine regression experiment runner
#[derive(Parser, Debug)]
#[command(name = "maxaffine", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a ground truth and a dataset; writes the CSV and a JSON sidecar
    Generate {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        /// gaussian, uniform, or beta(a,b)
        #[arg(long, default_value = "gaussian")]
        law: CovariateLaw,
        /// orthonormal or sphere
        #[arg(long, default_value = "orthonormal", value_parser = parse_truth)]
        truth: TruthKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Dataset path; the sidecar goes next to it with a .json extension
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one solver on a dataset
    Fit {
        #[arg(long)]
        data: PathBuf,
        /// Sidecar JSON with the ground truth; enables error tracking and perturbation init
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Convergence traces over seeded trials
    Trace {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Phase-transition grid over sample sizes
    PhaseGrid {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Geometry estimates and theoretical rates for a configuration
    Diagnose {
        #[arg(long)]
        config: PathBuf,
        /// Report path (JSON)
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_truth(s: &str) -> Result<TruthKind, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "orthonormal" => Ok(TruthKind::Orthonormal),
        "sphere" => Ok(TruthKind::Sphere),
        other => Err(format!("unknown truth kind `{other}` (expected orthonormal or sphere)")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate { k, d, n, sigma, law, truth, seed, out } => {
            commands::generate(k, d, n, sigma, law, truth, seed, &out)
        }
        Command::Fit { data, truth, config, out_dir } => commands::fit(&data, truth.as_deref(), &config, &out_dir),
        Command::Trace { config, out_dir } => commands::trace(&config, &out_dir),
        Command::PhaseGrid { config, out_dir } => commands::phase_grid(&config, &out_dir),
        Command::Diagnose { config, out } => commands::diagnose(&config, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
