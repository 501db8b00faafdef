mod config;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use dynchunk::Method;

use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "dynchunk", version, args_override_self = true, about = "Chunk-based partitioning and traffic simulation for dynamic GNN training")]
struct Cli {
    /// TOML run configuration; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seeds graph generation, drift and predictor training.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Artifact directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// pgc, pss, pts or pss-ts.
    #[arg(long, global = true)]
    method: Option<Method>,
    /// Simulated training epochs.
    #[arg(long, global = true)]
    epochs: Option<usize>,
    /// Sets `sim.cluster.n_devices`.
    #[arg(long, global = true)]
    devices: Option<usize>,
    /// Sets `graph.path`: an edge-list file instead of a synthetic graph.
    #[arg(long, global = true)]
    graph: Option<PathBuf>,
    /// Sets `graph.synthetic` to a scaled spec with this many instances.
    #[arg(long, global = true)]
    vertices: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Write graph.dg from the configured source.
    Gen,
    /// Write chunks.json for the chosen method.
    Partition,
    /// Write assignment.json.
    Assign,
    /// Write fusion.json (chunk partitions only).
    Fuse,
    /// Simulate the stored plan and write report.json.
    Simulate,
    /// Run every method end to end; write report.json and compare.csv.
    Compare,
    /// Train the workload predictor on synthetic samples; write predictor.json.
    TrainPredictor,
    /// Print the stored report.
    Report,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Gen => "gen",
            Command::Partition => "partition",
            Command::Assign => "assign",
            Command::Fuse => "fuse",
            Command::Simulate => "simulate",
            Command::Compare => "compare",
            Command::TrainPredictor => "train-predictor",
            Command::Report => "report",
        }
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(m) = cli.method {
        cfg.method = m;
    }
    if let Some(e) = cli.epochs {
        cfg.epochs = e;
    }
    if let Some(d) = cli.devices {
        cfg.sim.cluster.n_devices = d;
    }
    if let Some(g) = &cli.graph {
        cfg.graph.path = Some(g.clone());
    }
    if let Some(v) = cli.vertices {
        let s = &cfg.graph.synthetic;
        cfg.graph.synthetic = dynchunk::SyntheticSpec::scaled(
            v,
            s.snapshots,
            s.edges_per_snapshot_stddev / s.edges_per_snapshot_mean.max(f64::MIN_POSITIVE),
            s.seed,
        );
    }
    cfg.apply_seed();
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = resolve(cli).context("config")?;
    let stage = cli.command.name();
    match cli.command {
        Command::Gen => pipeline::gen(&cfg).map(drop),
        Command::Partition => pipeline::partition(&cfg).map(drop),
        Command::Assign => pipeline::assign_chunks(&cfg).map(drop),
        Command::Fuse => pipeline::fuse(&cfg).map(drop),
        Command::Simulate => pipeline::simulate(&cfg).map(drop),
        Command::Compare => pipeline::compare(&cfg).map(drop),
        Command::TrainPredictor => pipeline::train_predictor(&cfg).map(drop),
        Command::Report => pipeline::report(&cfg),
    }
    .with_context(|| stage.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
