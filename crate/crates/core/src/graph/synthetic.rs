//! Seeded generator for graphs with controllable spatial and temporal
//! non-uniformity.
//!
//! Per-snapshot edge counts follow a clamped normal distribution around a
//! fixed mean; sequence lengths follow [`LengthDistribution`]. Entities may
//! belong to latent communities that persist over time, so that spatial
//! edges recur among the same entities across snapshots.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{DynamicGraph, Timestep};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LengthDistribution {
    Fixed { length: u32 },
    Uniform { min: u32, max: u32 },
    /// Normal, rounded and clamped to `1..=T`.
    Normal { mean: f64, stddev: f64 },
}

impl LengthDistribution {
    fn sample(&self, rng: &mut impl Rng, max_len: u32) -> u32 {
        let raw = match *self {
            LengthDistribution::Fixed { length } => length,
            LengthDistribution::Uniform { min, max } => rng.random_range(min..=max.max(min)),
            LengthDistribution::Normal { mean, stddev } => {
                let x = if stddev > 0.0 {
                    Normal::new(mean, stddev).unwrap().sample(rng)
                } else {
                    mean
                };
                x.round().max(1.0) as u32
            }
        };
        raw.clamp(1, max_len.max(1))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    /// Total vertex instances across all snapshots.
    pub total_vertices: usize,
    pub total_edges: usize,
    pub snapshots: Timestep,
    pub edges_per_snapshot_mean: f64,
    /// Standard deviation of per-snapshot edge counts before renormalization.
    pub edges_per_snapshot_stddev: f64,
    pub presence_length: LengthDistribution,
    #[serde(default = "default_feature_dim")]
    pub feature_dim: u32,
    /// Latent communities; 1 means edges are uniform within a snapshot.
    #[serde(default = "default_communities")]
    pub communities: usize,
    /// Probability that an edge stays inside its first endpoint's community.
    #[serde(default)]
    pub intra_community_prob: f64,
    pub seed: u64,
}

fn default_feature_dim() -> u32 {
    2
}

fn default_communities() -> usize {
    1
}

impl SyntheticSpec {
    /// Desk-scale analogue of the 5M-vertex / 2M-edge / 100-snapshot setup,
    /// keeping the vertex:edge ratio and a 20K-per-snapshot-equivalent mean.
    pub fn scaled(total_vertices: usize, snapshots: Timestep, stddev_ratio: f64, seed: u64) -> Self {
        let total_edges = total_vertices * 2 / 5;
        let mean = total_edges as f64 / snapshots as f64;
        SyntheticSpec {
            total_vertices,
            total_edges,
            snapshots,
            edges_per_snapshot_mean: mean,
            edges_per_snapshot_stddev: stddev_ratio * mean,
            presence_length: LengthDistribution::Uniform {
                min: 1,
                max: snapshots,
            },
            feature_dim: default_feature_dim(),
            communities: 1,
            intra_community_prob: 0.0,
            seed,
        }
    }
}

/// Largest-remainder rounding of `weights` to integers summing to `total`.
fn apportion(weights: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let n = weights.len();
    if n == 0 {
        return Vec::new();
    }
    let exact: Vec<f64> = if sum > 0.0 {
        weights.iter().map(|w| w / sum * total as f64).collect()
    } else {
        vec![total as f64 / n as f64; n]
    };
    let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

pub fn generate(spec: &SyntheticSpec) -> Result<DynamicGraph> {
    if spec.snapshots == 0 {
        return Err(Error::Infeasible("zero snapshots".into()));
    }
    if !(spec.edges_per_snapshot_mean > 0.0) {
        return Err(Error::Infeasible("edge mean must be positive".into()));
    }
    if !(spec.edges_per_snapshot_stddev >= 0.0) {
        return Err(Error::Infeasible("edge stddev must be non-negative".into()));
    }
    if spec.communities == 0 || !(0.0..=1.0).contains(&spec.intra_community_prob) {
        return Err(Error::Infeasible("bad community parameters".into()));
    }
    let t_count = spec.snapshots as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // Sequences first: each entity occupies consecutive snapshots.
    let mut presence: Vec<Vec<u64>> = vec![Vec::new(); t_count];
    let mut community = Vec::new();
    let mut remaining = spec.total_vertices;
    let mut entity = 0u64;
    while remaining > 0 {
        let cap = (remaining as u32).min(spec.snapshots);
        let len = spec.presence_length.sample(&mut rng, cap);
        let start = rng.random_range(0..=(spec.snapshots - len)) as usize;
        for p in presence.iter_mut().skip(start).take(len as usize) {
            p.push(entity);
        }
        community.push(rng.random_range(0..spec.communities));
        remaining -= len as usize;
        entity += 1;
    }

    let draws: Vec<f64> = if spec.edges_per_snapshot_stddev > 0.0 {
        let normal = Normal::new(spec.edges_per_snapshot_mean, spec.edges_per_snapshot_stddev)
            .map_err(|e| Error::Infeasible(e.to_string()))?;
        (0..t_count).map(|_| normal.sample(&mut rng).max(0.0)).collect()
    } else {
        vec![spec.edges_per_snapshot_mean; t_count]
    };
    let counts = apportion(&draws, spec.total_edges);

    for (ti, (&want, ents)) in counts.iter().zip(&presence).enumerate() {
        let n = ents.len();
        let possible = n * n.saturating_sub(1) / 2;
        if want > possible {
            return Err(Error::Infeasible(format!(
                "snapshot {} needs {want} edges but has only {n} vertices",
                ti + 1
            )));
        }
    }

    let mut b = DynamicGraph::builder(spec.snapshots, spec.feature_dim);
    for (ti, ents) in presence.iter().enumerate() {
        for &e in ents {
            b.vertex(e, ti as Timestep + 1)?;
        }
    }
    for (ti, ents) in presence.iter().enumerate() {
        let t = ti as Timestep + 1;
        for (u, v) in sample_snapshot_edges(ents, &community, counts[ti], spec, &mut rng) {
            b.edge(t, u, v)?;
        }
    }
    b.build()
}

fn sample_snapshot_edges(
    ents: &[u64],
    community: &[usize],
    want: usize,
    spec: &SyntheticSpec,
    rng: &mut ChaCha8Rng,
) -> Vec<(u64, u64)> {
    if want == 0 {
        return Vec::new();
    }
    let n = ents.len();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); spec.communities];
    for (i, &e) in ents.iter().enumerate() {
        members[community[e as usize]].push(i);
    }
    let key = |a: usize, b: usize| (a.min(b), a.max(b));
    let mut chosen = HashSet::with_capacity(want);
    let mut out = Vec::with_capacity(want);
    let mut attempts = 0usize;
    while out.len() < want && attempts < want * 20 + 100 {
        attempts += 1;
        let a = rng.random_range(0..n);
        let b = if spec.communities > 1 && rng.random_bool(spec.intra_community_prob) {
            let group = &members[community[ents[a] as usize]];
            group[rng.random_range(0..group.len())]
        } else {
            rng.random_range(0..n)
        };
        if a != b && chosen.insert(key(a, b)) {
            out.push((ents[a], ents[b]));
        }
    }
    if out.len() < want {
        // Dense snapshot: fill from the complement.
        let mut rest: Vec<(usize, usize)> = (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .filter(|p| !chosen.contains(p))
            .collect();
        rest.shuffle(rng);
        out.extend(
            rest.into_iter()
                .take(want - out.len())
                .map(|(a, b)| (ents[a], ents[b])),
        );
    }
    out
}
