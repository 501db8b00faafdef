//! Score-driven greedy placement of chunks on devices.
//!
//! Chunks are visited in decreasing predicted workload. Device `m` scores
//! `(mean_load - load_m) * affinity_m`, where `affinity_m` is the traffic
//! between the chunk and the chunks already on `m`. The best score wins;
//! ties go to the least-loaded device, then the lowest device id.

use std::cmp::Ordering;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::partition::ChunkGraph;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// Device of every chunk (`x_a`).
    pub device_of: Vec<usize>,
    /// Chunks per device in placement order (`Q_m`).
    pub queues: Vec<Vec<usize>>,
    /// Summed workload per device.
    pub loads: Vec<f64>,
}

impl Assignment {
    fn empty(n_chunks: usize, n_devices: usize) -> Self {
        Self {
            device_of: vec![usize::MAX; n_chunks],
            queues: vec![Vec::new(); n_devices],
            loads: vec![0.0; n_devices],
        }
    }

    fn place(&mut self, chunk: usize, device: usize, load: f64) {
        self.device_of[chunk] = device;
        self.queues[device].push(chunk);
        self.loads[device] += load;
    }

    pub fn n_devices(&self) -> usize {
        self.queues.len()
    }

    /// Per-instance device map induced by the chunk placement.
    pub fn instance_devices(&self, cg: &ChunkGraph) -> Vec<usize> {
        cg.chunk_of.iter().map(|&c| self.device_of[c]).collect()
    }

    /// Checks that `x` and `Q` agree and every chunk is placed exactly once.
    pub fn validate(&self, n_chunks: usize) -> Result<()> {
        if self.device_of.len() != n_chunks {
            return Err(Error::PlanMismatch(format!(
                "assignment covers {} chunks, expected {n_chunks}",
                self.device_of.len()
            )));
        }
        let mut seen = vec![false; n_chunks];
        for (m, q) in self.queues.iter().enumerate() {
            for &a in q {
                if a >= n_chunks || seen[a] || self.device_of[a] != m {
                    return Err(Error::PlanMismatch(format!(
                        "chunk {a} is inconsistently assigned"
                    )));
                }
                seen[a] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::PlanMismatch("unassigned chunk".into()));
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// `(score, load, device)` ordering: higher score, then lower load, then
/// lower id is better.
fn better(a: (f64, f64, usize), b: (f64, f64, usize)) -> bool {
    match a.0.total_cmp(&b.0) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => match b.1.total_cmp(&a.1) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => a.2 < b.2,
        },
    }
}

/// Chunk order: decreasing workload, ties by ascending chunk id.
fn placement_order(workloads: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..workloads.len()).collect();
    order.sort_by(|&a, &b| workloads[b].total_cmp(&workloads[a]).then(a.cmp(&b)));
    order
}

pub fn assign(cg: &ChunkGraph, workloads: &[f64], n_devices: usize) -> Result<Assignment> {
    if n_devices == 0 {
        return Err(Error::invalid("n_devices must be >= 1"));
    }
    if workloads.len() != cg.len() {
        return Err(Error::DimensionMismatch {
            expected: cg.len(),
            got: workloads.len(),
        });
    }
    if let Some(w) = workloads.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
        return Err(Error::invalid(format!("workload {w} must be finite and >= 0")));
    }
    let mean = workloads.iter().sum::<f64>() / n_devices as f64;
    let mut out = Assignment::empty(cg.len(), n_devices);
    let mut affinity = vec![0.0f64; n_devices];

    for a in placement_order(workloads) {
        affinity.iter_mut().for_each(|x| *x = 0.0);
        for &(b, bytes) in cg.neighbors(a) {
            let m = out.device_of[b];
            if m != usize::MAX {
                affinity[m] += bytes as f64;
            }
        }
        let mut best = None;
        for m in 0..n_devices {
            let cand = ((mean - out.loads[m]) * affinity[m], out.loads[m], m);
            if best.is_none_or(|b| better(cand, b)) {
                best = Some(cand);
            }
        }
        out.place(a, best.unwrap().2, workloads[a]);
    }
    Ok(out)
}

/// Baseline: largest chunk first onto the device holding the fewest vertices.
pub fn assign_fewest_vertices(cg: &ChunkGraph, n_devices: usize) -> Result<Assignment> {
    if n_devices == 0 {
        return Err(Error::invalid("n_devices must be >= 1"));
    }
    let sizes: Vec<f64> = cg.chunks.iter().map(|c| c.members.len() as f64).collect();
    let mut out = Assignment::empty(cg.len(), n_devices);
    for a in placement_order(&sizes) {
        let m = (0..n_devices)
            .min_by(|&x, &y| out.loads[x].total_cmp(&out.loads[y]).then(x.cmp(&y)))
            .unwrap();
        out.place(a, m, sizes[a]);
    }
    Ok(out)
}

/// `T_max / T_min` over per-device epoch times.
pub fn lambda_divergence(per_device_time: &[f64]) -> Result<f64> {
    if per_device_time.is_empty() {
        return Err(Error::invalid("no devices"));
    }
    if let Some(t) = per_device_time.iter().find(|t| !(**t > 0.0)) {
        return Err(Error::invalid(format!("device time {t} must be positive")));
    }
    let max = per_device_time.iter().copied().fold(f64::MIN, f64::max);
    let min = per_device_time.iter().copied().fold(f64::MAX, f64::min);
    Ok(max / min)
}
