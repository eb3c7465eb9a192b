//! `sfpe`: experiment harness for perpetuity left tails.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use config::ExperimentConfig;
use output::{Format, OutputDir};

#[derive(Parser)]
#[command(name = "sfpe", version, about = "Monte Carlo and numerics for perpetuity left tails")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Replaces the config's seed (or seed list).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = "SFPE_OUT_DIR", default_value = "sfpe-out")]
    out: PathBuf,
    /// Worker threads (0 = one per core).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Runs the subcommand named by the config's `subcommand` key.
    Run(RunArgs),
    /// φ on a λ-grid, λ*, and the fixed-point trace.
    Transform(RunArgs),
    /// Trajectories of the chain X_n = A_n X_{n-1} + B_n.
    Simulate(RunArgs),
    /// Left-tail exponents of X_n, the right-tail slope, and an estimate of g.
    Tail(RunArgs),
    /// Running infimum of X_n / H^{-1}(log n) per seed.
    Envelope(RunArgs),
    /// The integer schedule k_n and its inequalities.
    Schedule(RunArgs),
    /// The embedded Fleming-Viot chain and its LIL statistics.
    Fv(RunArgs),
    /// Lists the built-in coefficient laws.
    Laws {
        #[arg(long)]
        json: bool,
    },
}

fn run(args: &RunArgs, requested: Option<&str>) -> Result<bool> {
    let started = Instant::now();
    if let Some(n) = args.threads {
        if !sfpe_core::par::init_threads(n) {
            eprintln!("warning: --threads ignored (sequential build or pool already set)");
        }
    }
    let text = std::fs::read_to_string(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
    let origin = args.config.display().to_string();
    let mut cfg = ExperimentConfig::parse(&text, &origin, requested)?;
    if let Some(seed) = args.seed {
        cfg.override_seed(seed);
    }
    let hash = cfg.hash();
    let mut out = OutputDir::create(&args.out, args.format)?;
    let outcome = match &cfg {
        ExperimentConfig::Transform(c) => commands::transform(c, &hash, &mut out),
        ExperimentConfig::Simulate(c) => commands::simulate(c, &hash, &mut out),
        ExperimentConfig::Tail(c) => commands::tail(c, &hash, &mut out),
        ExperimentConfig::Envelope(c) => commands::envelope(c, &hash, &mut out),
        ExperimentConfig::Schedule(c) => commands::schedule(c, &hash, &mut out),
        ExperimentConfig::Fv(c) => commands::fv(c, &hash, &mut out),
    }?;
    out.summary(&json!({
        "config_hash": hash,
        "subcommand": cfg.subcommand(),
        "seeds": cfg.seeds(),
        "version": env!("CARGO_PKG_VERSION"),
        "parallel": sfpe_core::par::is_parallel(),
        "wall_time_s": started.elapsed().as_secs_f64(),
        "properties_ok": outcome.ok,
        "config": cfg,
        "results": outcome.results,
    }))?;
    for p in &out.written {
        eprintln!("wrote {}", p.display());
    }
    Ok(outcome.ok)
}

fn laws(as_json: bool) -> Result<()> {
    let laws = sfpe_core::laws::list_builtin_laws();
    if as_json {
        println!("{}", serde_json::to_string_pretty(&laws)?);
        return Ok(());
    }
    for l in laws {
        println!("{}", l.kind);
        println!("  anchor: {}", l.anchor);
        for (name, doc) in l.params {
            println!("  {name}: {doc}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => run(a, None),
        Command::Transform(a) => run(a, Some("transform")),
        Command::Simulate(a) => run(a, Some("simulate")),
        Command::Tail(a) => run(a, Some("tail")),
        Command::Envelope(a) => run(a, Some("envelope")),
        Command::Schedule(a) => run(a, Some("schedule")),
        Command::Fv(a) => run(a, Some("fv")),
        Command::Laws { json } => laws(*json).map(|()| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("property check failed; see summary.json");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
