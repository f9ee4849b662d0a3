use std::fs;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use pbalign::bisect::run_to_end;
use pbalign::calibrate::{calibrate, default_kappa_grid, default_lambda_grid, read_comparisons, read_estimates};
use pbalign::choice::{DeterministicResponder, OracleParams, Responder, SimulatedResponder};
use pbalign::rng::stream;
use pbalign::{HorizontalRule, MapbConfig};
use pbalign_harness::ExperimentFile;
use pbalign_service::SessionStore;

#[derive(Parser)]
#[command(name = "pbalign", version, about = "Alignment by noisy pairwise comparisons")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Align one scalar against a simulated responder and print the trace.
    Simulate(SimulateArgs),
    /// Run an experiment file and write its CSV output.
    Experiment {
        config: PathBuf,
        /// Output directory; defaults to the file's `output` or `results/`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the choice model and label noise from session logs.
    Calibrate {
        /// CSV with columns theta,theta_star,correct.
        #[arg(long)]
        comparisons: PathBuf,
        /// CSV with columns y,theta_star.
        #[arg(long)]
        estimates: PathBuf,
        #[arg(long, default_value_t = 500)]
        resamples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the session API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Directory for session logs; sessions are kept in memory when omitted.
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct SimulateArgs {
    #[arg(long)]
    truth: f64,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Half-width of the search interval around zero.
    #[arg(long, default_value_t = 1.0)]
    half_width: f64,
    #[arg(long, default_value_t = 0.5)]
    kappa: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Answer every query correctly.
    #[arg(long)]
    deterministic: bool,
    /// Stop after the move count from the stopping-time formula.
    #[arg(long)]
    fixed_moves: bool,
    /// Write the JSONL trace here instead of stdout.
    #[arg(long)]
    trace: Option<PathBuf>,
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let mut config = MapbConfig::new(args.epsilon, args.delta, args.half_width);
    config.kappa = args.kappa;
    config.gamma = args.gamma;
    config.lambda_delta = args.lambda;
    if args.fixed_moves {
        config.horizontal_rule = HorizontalRule::TheoreticalTau;
    }
    config.validate()?;
    let params = OracleParams::kappa(args.truth, args.gamma, args.lambda, args.kappa);
    let mut responder: Box<dyn Responder> = if args.deterministic {
        Box::new(DeterministicResponder::with_params(params))
    } else {
        Box::new(SimulatedResponder::new(params, stream(args.seed, 0))?)
    };
    let (outcome, run) = run_to_end(config, responder.as_mut())?;
    let trace = run.trace_jsonl();
    match args.trace {
        Some(path) => fs::write(&path, trace).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{trace}"),
    }
    eprintln!(
        "theta_hat {} after {} moves and {} comparisons ({:?}); error {:.3e}",
        outcome.theta_hat,
        outcome.horizontal_moves,
        outcome.total_comparisons,
        outcome.reason,
        (outcome.theta_hat - args.truth).abs()
    );
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate(args) => simulate(args),
        Command::Experiment { config, out } => {
            let file = ExperimentFile::read(&config).with_context(|| format!("reading {}", config.display()))?;
            let base = config.parent().map(PathBuf::from).unwrap_or_default();
            let out = out
                .or_else(|| match &file {
                    ExperimentFile::Matched(c) => c.output.clone(),
                    _ => None,
                })
                .unwrap_or_else(|| PathBuf::from("results"));
            let summary = file.run(&base, &out)?;
            println!("{summary}");
            eprintln!("wrote {}", out.display());
            Ok(())
        }
        Command::Calibrate { comparisons, estimates, resamples, seed, out } => {
            let open = |p: &PathBuf| fs::File::open(p).with_context(|| format!("opening {}", p.display()));
            let comparisons = read_comparisons(open(&comparisons)?)?;
            let estimates = read_estimates(open(&estimates)?)?;
            if comparisons.is_empty() {
                bail!("no comparison records");
            }
            let result = calibrate(&comparisons, &estimates, &default_kappa_grid(), &default_lambda_grid(), resamples, seed)?;
            let json = serde_json::to_string_pretty(&result)?;
            match out {
                Some(path) => fs::write(&path, json + "\n").with_context(|| format!("writing {}", path.display()))?,
                None => println!("{json}"),
            }
            Ok(())
        }
        Command::Serve { addr, data_dir } => {
            let store = match data_dir {
                Some(dir) => SessionStore::open(&dir).with_context(|| format!("opening {}", dir.display()))?,
                None => SessionStore::in_memory(),
            };
            let rt = tokio::runtime::Runtime::new()?;
            eprintln!("listening on {addr}");
            rt.block_on(pbalign_service::serve(addr, Arc::new(store)))?;
            Ok(())
        }
    }
}
