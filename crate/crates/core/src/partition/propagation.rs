use crate::cost::{edge_traffic, EdgeKind, ModelProfile, TemporalFanout};
use crate::graph::DynamicGraph;
use crate::{Error, Result};

use super::ChunkGraph;

/// Initial labels: `sum(|V_tau| for tau < t) + i`, where `i` ranks the
/// instance by entity id within its snapshot.
pub fn init_labels(g: &DynamicGraph) -> Vec<usize> {
    let mut labels = Vec::with_capacity(g.num_instances());
    let mut before = 0;
    for t in 1..=g.num_snapshots() {
        let n_t = g.snapshot_len(t);
        labels.extend((0..n_t).map(|i| before + i));
        before += n_t;
    }
    labels
}

/// `ceil(instances / (4 * n_devices))`, so each device receives at least
/// four chunks' worth of work.
pub fn default_size_cap(n_instances: usize, n_devices: usize) -> usize {
    n_instances.div_ceil(4 * n_devices.max(1)).max(1)
}

/// Labels after propagation, before grouping into chunks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Propagation {
    pub labels: Vec<usize>,
    /// Sweeps executed over all levels, including each level's final sweep
    /// that changed nothing.
    pub rounds: usize,
    /// Coarsening levels run; level 1 works on vertex instances.
    pub levels: usize,
    /// Every level stopped because a sweep changed nothing.
    pub converged: bool,
}

/// Weighted graph with node sizes. Adjacency is CSR, without self loops.
struct Level {
    offsets: Vec<usize>,
    adj: Vec<(usize, u64)>,
    sizes: Vec<usize>,
}

impl Level {
    fn len(&self) -> usize {
        self.sizes.len()
    }

    fn neighbors(&self, v: usize) -> &[(usize, u64)] {
        &self.adj[self.offsets[v]..self.offsets[v + 1]]
    }

    fn from_lists(lists: Vec<Vec<(usize, u64)>>, sizes: Vec<usize>) -> Self {
        let mut offsets = vec![0];
        let mut adj = Vec::new();
        for l in lists {
            adj.extend(l);
            offsets.push(adj.len());
        }
        Self { offsets, adj, sizes }
    }

    /// Vertex instances joined by spatial edges and virtual temporal edges
    /// between consecutive presences. A virtual edge weighs what cutting it
    /// would cost: one temporal message under previous-only fanout, and every
    /// earlier-to-later pair it separates under all-snapshots fanout.
    fn instances(g: &DynamicGraph, profile: &ModelProfile) -> Self {
        let w_spatial = 2 * edge_traffic(profile, EdgeKind::Spatial);
        let w_temporal = edge_traffic(profile, EdgeKind::Temporal);
        let n = g.num_instances();
        let link = |a: usize| -> u64 {
            match profile.temporal_fanout {
                TemporalFanout::PreviousOnly => w_temporal,
                TemporalFanout::AllSnapshots => {
                    let (s, p) = g.sequence_position(a);
                    let len = g.sequences()[s].members.len() as u64;
                    let before = p as u64 + 1;
                    w_temporal * before * (len - before)
                }
            }
        };
        let lists = (0..n)
            .map(|v| {
                let mut l: Vec<(usize, u64)> = Vec::new();
                if w_spatial > 0 {
                    l.extend(g.spatial_neighbors_of(v).iter().map(|&u| (u, w_spatial)));
                }
                if w_temporal > 0 {
                    if let Some(u) = g.temporal_prev(v) {
                        l.push((u, link(u)));
                    }
                    if let Some(u) = g.temporal_next(v) {
                        l.push((u, link(v)));
                    }
                }
                l
            })
            .collect();
        Self::from_lists(lists, vec![1; n])
    }

    /// One node per label, ordered by label; edge weights summed.
    fn coarsen(&self, labels: &[usize]) -> (Self, Vec<usize>) {
        let mut ids: Vec<usize> = labels.to_vec();
        ids.sort_unstable();
        ids.dedup();
        let mut rank = vec![usize::MAX; self.len()];
        for (i, &l) in ids.iter().enumerate() {
            rank[l] = i;
        }
        let node_of: Vec<usize> = labels.iter().map(|&l| rank[l]).collect();
        let k = ids.len();
        let mut sizes = vec![0; k];
        let mut lists: Vec<Vec<(usize, u64)>> = vec![Vec::new(); k];
        for v in 0..self.len() {
            let a = node_of[v];
            sizes[a] += self.sizes[v];
            for &(u, w) in self.neighbors(v) {
                let b = node_of[u];
                if a != b {
                    lists[a].push((b, w));
                }
            }
        }
        for l in &mut lists {
            l.sort_unstable_by_key(|e| e.0);
            l.dedup_by(|x, y| {
                if x.0 == y.0 {
                    y.1 += x.1;
                    true
                } else {
                    false
                }
            });
        }
        (Self::from_lists(lists, sizes), node_of)
    }

    /// In-place sweeps in node order. Labels start as node indices.
    fn propagate(&self, size_cap: usize, max_rounds: usize) -> (Vec<usize>, usize, bool) {
        let n = self.len();
        let mut labels: Vec<usize> = (0..n).collect();
        let mut load = self.sizes.clone();
        let mut weight = vec![0u64; n];
        let mut touched: Vec<usize> = Vec::new();
        let mut rounds = 0;
        while rounds < max_rounds {
            rounds += 1;
            let mut changed = false;
            for v in 0..n {
                for &(u, w) in self.neighbors(v) {
                    let l = labels[u];
                    if weight[l] == 0 {
                        touched.push(l);
                    }
                    weight[l] += w;
                }
                let current = labels[v];
                let size = self.sizes[v];
                let mut best: Option<(usize, u64)> = None;
                for &l in &touched {
                    if l == current || load[l] + size > size_cap {
                        continue;
                    }
                    let w = weight[l];
                    if best.is_none_or(|(bl, bw)| w > bw || (w == bw && l < bl)) {
                        best = Some((l, w));
                    }
                }
                if let Some((l, w)) = best {
                    if w > weight[current] {
                        load[current] -= size;
                        load[l] += size;
                        labels[v] = l;
                        changed = true;
                    }
                }
                for &l in &touched {
                    weight[l] = 0;
                }
                touched.clear();
            }
            if !changed {
                return (labels, rounds, true);
            }
        }
        (labels, rounds, false)
    }
}

/// Runs label propagation over spatial edges and virtual temporal edges
/// between consecutive instances of an entity, then repeats it on the graph
/// of resulting chunks until a level merges nothing.
///
/// A label's weight at a vertex is the traffic its holders would exchange
/// with the vertex: `2 * edge_traffic(spatial)` per spatial neighbor (both
/// directions) and, per temporal neighbor, the temporal traffic that cutting
/// the link would cause (see `Level::instances`). On coarse
/// levels a node is a chunk and edge weights are summed. Nodes are swept in
/// label order and update in place. A node moves only to a label strictly
/// heavier than its current one (ties go to the smaller label), and never to
/// a label whose holders would then exceed `size_cap` instances.
///
/// Every move strictly raises the total weight inside labels, so each level
/// terminates; `max_rounds` bounds each level regardless. Each level has
/// fewer nodes than the last, so coarsening terminates too.
pub fn propagate_labels(
    g: &DynamicGraph,
    profile: &ModelProfile,
    size_cap: usize,
    max_rounds: usize,
) -> Result<Propagation> {
    if size_cap == 0 || max_rounds == 0 {
        return Err(Error::invalid("size_cap and max_rounds must be >= 1"));
    }
    let mut level = Level::instances(g, profile);
    // Node of every instance at the current level. Dense instance indices
    // equal the initial labels.
    let mut node_of_instance: Vec<usize> = init_labels(g);
    let mut rounds = 0;
    let mut levels = 0;
    let mut converged = true;
    loop {
        levels += 1;
        let (labels, r, c) = level.propagate(size_cap, max_rounds);
        rounds += r;
        converged &= c;
        let (coarse, node_of) = level.coarsen(&labels);
        for x in &mut node_of_instance {
            *x = node_of[*x];
        }
        let merged = coarse.len() < level.len();
        level = coarse;
        if !merged {
            break;
        }
    }
    Ok(Propagation {
        labels: node_of_instance,
        rounds,
        levels,
        converged,
    })
}

/// Label propagation followed by grouping same-label vertices into chunks.
pub fn propagate(
    g: &DynamicGraph,
    profile: &ModelProfile,
    size_cap: usize,
    max_rounds: usize,
) -> Result<ChunkGraph> {
    let prop = propagate_labels(g, profile, size_cap, max_rounds)?;
    let mut cg = ChunkGraph::from_labels(g, profile, &prop.labels);
    cg.rounds = prop.rounds;
    cg.converged = prop.converged;
    Ok(cg)
}
