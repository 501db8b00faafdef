//! Pipeline stages. Each reads the previous stage's artifacts from the output
//! directory and writes its own.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dynchunk::assign::assign;
use dynchunk::cost::synthetic_samples;
use dynchunk::fusion::plan_device_fusion;
use dynchunk::graph::{generate, load_graph, save_graph};
use dynchunk::partition::{default_size_cap, propagate, ChunkFile};
use dynchunk::sim::{run_methods, workloads, MethodRun, Plan, Simulator};
use dynchunk::{
    true_cost, Assignment, ChunkGraph, Comparison, DynamicGraph, Encoder, FusionPlan, Method, Predictor,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

pub const GRAPH: &str = "graph.dg";
pub const CHUNKS: &str = "chunks.json";
pub const ASSIGNMENT: &str = "assignment.json";
pub const FUSION: &str = "fusion.json";
pub const REPORT: &str = "report.json";
pub const COMPARE: &str = "compare.csv";
pub const PREDICTOR: &str = "predictor.json";

/// Contents of `report.json`: one method's epochs, or a full comparison.
#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Report {
    Compare {
        comparison: Comparison,
        runs: Vec<MethodRun>,
    },
    Single(MethodRun),
}

fn artifact(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.out.join(name)
}

fn require(cfg: &RunConfig, name: &str, producer: &str) -> Result<PathBuf> {
    let p = artifact(cfg, name);
    if !p.exists() {
        bail!("missing {}; run `dynchunk {producer}` first", p.display());
    }
    Ok(p)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn source_graph(cfg: &RunConfig) -> Result<DynamicGraph> {
    Ok(match &cfg.graph.path {
        Some(p) => load_graph(p)?,
        None => generate(&cfg.graph.synthetic)?,
    })
}

fn stored_graph(cfg: &RunConfig) -> Result<DynamicGraph> {
    Ok(load_graph(require(cfg, GRAPH, "gen")?)?)
}

fn predictor(cfg: &RunConfig) -> Result<Option<Predictor>> {
    let path = cfg
        .predictor
        .path
        .clone()
        .unwrap_or_else(|| artifact(cfg, PREDICTOR));
    if path.exists() {
        Ok(Some(Predictor::load(&path)?))
    } else {
        Ok(None)
    }
}

pub fn gen(cfg: &RunConfig) -> Result<DynamicGraph> {
    std::fs::create_dir_all(&cfg.out)?;
    let g = source_graph(cfg)?;
    save_graph(&g, artifact(cfg, GRAPH))?;
    println!(
        "graph: {} instances, {} spatial edges, {} snapshots",
        g.num_instances(),
        g.spatial_edges().len(),
        g.num_snapshots()
    );
    Ok(g)
}

pub fn partition(cfg: &RunConfig) -> Result<ChunkFile> {
    let g = stored_graph(cfg)?;
    let file = match cfg.method {
        Method::Pgc => {
            let cap = cfg
                .sim
                .size_cap
                .unwrap_or_else(|| default_size_cap(g.num_instances(), cfg.sim.cluster.n_devices));
            propagate(&g, &cfg.sim.profile, cap, cfg.sim.max_rounds)?.to_file(&g, Method::Pgc)
        }
        m => {
            let mut sim = cfg.sim.clone();
            sim.fusion = false;
            Plan::build(&g, m, &sim, None)?.chunk_file(&g)
        }
    };
    write_json(&artifact(cfg, CHUNKS), &file)?;
    let inter: u64 = file.inter_cost.iter().map(|c| c.2).sum();
    println!("{}: {} chunks, inter-chunk traffic {inter} B", file.method, file.chunks.len());
    Ok(file)
}

fn stored_chunks(cfg: &RunConfig, g: &DynamicGraph) -> Result<(ChunkFile, ChunkGraph)> {
    let file: ChunkFile = read_json(&require(cfg, CHUNKS, "partition")?)?;
    let cg = file.to_chunk_graph(g, &cfg.sim.profile)?;
    Ok((file, cg))
}

pub fn assign_chunks(cfg: &RunConfig) -> Result<Assignment> {
    let g = stored_graph(cfg)?;
    let (file, cg) = stored_chunks(cfg, &g)?;
    let n = cfg.sim.cluster.n_devices;
    let a = if file.method == Method::Pgc {
        let w = workloads(&cg, &cfg.sim.calibration, predictor(cfg)?.as_ref());
        assign(&cg, &w, n)?
    } else {
        if cg.len() != n {
            bail!("{} chunk file has {} parts for {n} devices", file.method, cg.len());
        }
        // Baseline parts map one-to-one onto devices.
        Assignment {
            device_of: (0..n).collect(),
            queues: (0..n).map(|d| vec![d]).collect(),
            loads: cg
                .chunks
                .iter()
                .map(|c| true_cost(&c.stats, Encoder::Structure, &cfg.sim.calibration))
                .collect(),
        }
    };
    a.save(artifact(cfg, ASSIGNMENT))?;
    println!("assignment: {} chunks on {n} devices", cg.len());
    Ok(a)
}

pub fn fuse(cfg: &RunConfig) -> Result<FusionPlan> {
    let g = stored_graph(cfg)?;
    let (file, cg) = stored_chunks(cfg, &g)?;
    if file.method != Method::Pgc {
        bail!("fusion applies to chunk partitions only, not {}", file.method);
    }
    let a = Assignment::load(require(cfg, ASSIGNMENT, "assign")?)?;
    let plan = plan_device_fusion(&g, &cg, &a, cfg.sim.cluster.memory_budget, &cfg.sim.memory)?;
    plan.save(artifact(cfg, FUSION))?;
    println!(
        "fusion: {} groups, {} B of loading saved",
        plan.groups().count(),
        plan.total_saved_load_bytes()
    );
    Ok(plan)
}

pub fn simulate(cfg: &RunConfig) -> Result<MethodRun> {
    let g = stored_graph(cfg)?;
    let (file, _) = stored_chunks(cfg, &g)?;
    let a = Assignment::load(require(cfg, ASSIGNMENT, "assign")?)?;
    let fusion = if file.method == Method::Pgc && cfg.sim.fusion {
        Some(FusionPlan::load(require(cfg, FUSION, "fuse")?)?)
    } else {
        None
    };
    let plan = Plan::from_parts(&g, &cfg.sim.profile, &file, a, fusion)?;
    let reports = Simulator::new(&g, &plan, &cfg.sim, cfg.epochs)?.run(cfg.epochs)?;
    let run = MethodRun {
        method: plan.method,
        chunks: plan.chunks.len(),
        reports,
    };
    write_json(&artifact(cfg, REPORT), &Report::Single(run.clone()))?;
    print!("{}", Comparison::from_runs(std::slice::from_ref(&run))?.to_table());
    Ok(run)
}

pub fn compare(cfg: &RunConfig) -> Result<Comparison> {
    std::fs::create_dir_all(&cfg.out)?;
    let g = if artifact(cfg, GRAPH).exists() {
        stored_graph(cfg)?
    } else {
        gen(cfg)?
    };
    let p = predictor(cfg)?;
    let runs = run_methods(&g, &cfg.sim, &Method::ALL, cfg.epochs, p.as_ref())?;
    let comparison = Comparison::from_runs(&runs)?;
    std::fs::write(artifact(cfg, COMPARE), comparison.to_csv())?;
    print!("{}", comparison.to_table());
    write_json(
        &artifact(cfg, REPORT),
        &Report::Compare {
            comparison: comparison.clone(),
            runs,
        },
    )?;
    Ok(comparison)
}

pub fn train_predictor(cfg: &RunConfig) -> Result<Predictor> {
    std::fs::create_dir_all(&cfg.out)?;
    let sec = &cfg.predictor;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let samples = synthetic_samples(sec.samples, &cfg.sim.calibration, sec.noise, &mut rng);
    let p = Predictor::train(&samples, &sec.train)?;
    p.save(artifact(cfg, PREDICTOR))?;
    println!(
        "predictor: train MAPE {:.4}, validation MAPE {:.4}",
        p.train_mape.unwrap_or(f64::NAN),
        p.validation_mape.unwrap_or(f64::NAN)
    );
    Ok(p)
}

pub fn report(cfg: &RunConfig) -> Result<()> {
    let report: Report = read_json(&require(cfg, REPORT, "simulate")?)?;
    match report {
        Report::Compare { comparison, .. } => print!("{}", comparison.to_table()),
        Report::Single(run) => {
            println!("epoch  epoch_ms  traffic_bytes  lambda  stale_reduction_pct");
            for r in &run.reports {
                println!(
                    "{:>5}  {:>8.3}  {:>13}  {:>6.4}  {:>19.2}",
                    r.epoch, r.epoch_ms, r.traffic_bytes, r.lambda, r.stale_reduction_pct
                );
            }
        }
    }
    Ok(())
}
