//! `mmap-rel`: validate models, build the marked process, compute measures,
//! optimize the vacation policy, simulate, and rerun the published example.

mod commands;
mod reproduce;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde_json::json;

#[derive(Debug, Parser)]
#[command(name = "mmap-rel", version, about = "Multi-state unit with shocks, PM and a vacationing repairperson")]
struct Cli {
    /// On failure, print a JSON error object on stderr.
    #[arg(long, global = true)]
    json_errors: bool,
    /// Directory for written artifacts.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Model configuration (JSON).
    #[arg(long)]
    model: PathBuf,
    /// Vacation policy: model1, model2, model3 or a JSON file with `v` and `p`.
    #[arg(long)]
    params: Option<String>,
    /// Discretize the (continuous) model with this step before use.
    #[arg(long, value_name = "H")]
    discretize: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a model (and optionally economics) and print every problem found.
    Validate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        econ: Option<PathBuf>,
    },
    /// Assemble the marked process.
    Build {
        #[command(flatten)]
        model: ModelArgs,
        /// Write every event block as CSV into `--out`.
        #[arg(long)]
        dump_blocks: bool,
    },
    /// Stationary distribution, availability, profit rate, event rates,
    /// mean time to first failure and break-even time.
    Measures {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        econ: Option<PathBuf>,
    },
    /// Time series of A(t), R(t), expected event counts and Λ(t) as CSV.
    Transient {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        econ: Option<PathBuf>,
        /// Geometric grid `start:stop:points`.
        #[arg(long, default_value = "0.1:1e4:400")]
        grid: String,
    },
    /// Search the vacation policy space for the profit/availability front.
    Optimize {
        /// Continuous model used as the template.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        econ: PathBuf,
        #[arg(long, default_value_t = 80)]
        pop: usize,
        #[arg(long, default_value_t = 120)]
        gens: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// JSON file with `rate_min` and `rate_max`.
        #[arg(long)]
        bounds: Option<PathBuf>,
    },
    /// Monte Carlo estimates checked against the analytic stationary measures.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        econ: Option<PathBuf>,
        /// Run length in time units (periods for a discrete model file).
        #[arg(long, default_value_t = 2e5)]
        horizon: f64,
        #[arg(long, default_value_t = 20)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Discarded initial stretch; defaults to 1% of the horizon.
        #[arg(long)]
        warmup: Option<f64>,
        /// Family-wise error level of the coverage check.
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Rerun the example under the three published policies and compare.
    ReproducePaper {
        #[arg(long, default_value = "data/paper_example.json")]
        model: PathBuf,
        #[arg(long, default_value = "data/paper_economics.json")]
        econ: PathBuf,
    },
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("MMAP_REL_THREADS") {
        let n: usize = v
            .parse()
            .with_context(|| format!("MMAP_REL_THREADS must be a positive integer, got {v:?}"))?;
        anyhow::ensure!(n > 0, "MMAP_REL_THREADS must be positive");
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    init_threads()?;
    let out = &cli.out;
    match &cli.command {
        Command::Validate { model, econ } => commands::validate(model, econ.as_deref()),
        Command::Build { model, dump_blocks } => commands::build(model, *dump_blocks, out),
        Command::Measures { model, econ } => commands::measures(model, econ.as_deref(), out),
        Command::Transient { model, econ, grid } => commands::transient(model, econ.as_deref(), grid, out),
        Command::Optimize {
            model,
            econ,
            pop,
            gens,
            seed,
            bounds,
        } => {
            let mut cfg = mmap_rel_optimizer::GaConfig {
                population: *pop,
                generations: *gens,
                seed: *seed,
                ..Default::default()
            };
            if let Some(b) = bounds {
                cfg.bounds = mmap_rel_optimizer::Bounds::load(b)?;
            }
            commands::optimize(model, econ, &cfg, out)
        }
        Command::Simulate {
            model,
            econ,
            horizon,
            reps,
            seed,
            warmup,
            alpha,
        } => commands::simulate(model, econ.as_deref(), *horizon, *reps, *seed, *warmup, *alpha, out),
        Command::ReproducePaper { model, econ } => reproduce::run(model, econ, out),
    }
}

fn error_json(err: &anyhow::Error) -> serde_json::Value {
    let issues = err
        .chain()
        .find_map(|e| e.downcast_ref::<mmap_rel::ModelError>())
        .map(|e| e.issues().to_vec())
        .unwrap_or_default();
    let causes: Vec<String> = err.chain().skip(1).map(|e| e.to_string()).collect();
    json!({
        "error": {
            "message": err.to_string(),
            "causes": causes,
            "issues": issues,
        }
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            if cli.json_errors {
                eprintln!("{}", error_json(&err));
            } else {
                eprintln!("error: {err:#}");
            }
            ExitCode::FAILURE
        }
    }
}
