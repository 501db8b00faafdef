//! In-memory dynamic graphs.
//!
//! Vertex instances are stored densely, snapshot-major and by ascending
//! entity id within a snapshot. The dense index of an instance is therefore
//! `sum(|V_tau| for tau < t) + i`, which is also its initial propagation label.

mod io;
mod synthetic;

use std::collections::HashMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use io::{load_graph, parse_edge_list, save_graph, write_edge_list};
pub use synthetic::{generate, LengthDistribution, SyntheticSpec};

pub type EntityId = u64;
/// 1-based snapshot index.
pub type Timestep = u32;

/// One entity at one timestep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VertexInstance {
    pub entity: EntityId,
    pub t: Timestep,
}

impl VertexInstance {
    pub fn new(entity: EntityId, t: Timestep) -> Self {
        Self { entity, t }
    }
}

/// The ordered instances of one entity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sequence {
    pub entity: EntityId,
    /// Dense instance indices, strictly increasing in `t`.
    pub members: Vec<usize>,
}

/// An immutable dynamic graph `G_1..G_T`.
#[derive(Clone, Debug)]
pub struct DynamicGraph {
    feature_dim: u32,
    offsets: Vec<usize>,
    instances: Vec<VertexInstance>,
    index: HashMap<VertexInstance, usize>,
    spatial_edges: Vec<(usize, usize)>,
    adj_offsets: Vec<usize>,
    adj: Vec<usize>,
    temporal_links: Vec<(usize, usize)>,
    sequences: Vec<Sequence>,
    /// (sequence index, position within the sequence) per instance.
    seq_pos: Vec<(usize, usize)>,
}

impl PartialEq for DynamicGraph {
    fn eq(&self, other: &Self) -> bool {
        self.feature_dim == other.feature_dim
            && self.offsets == other.offsets
            && self.instances == other.instances
            && self.spatial_edges == other.spatial_edges
    }
}

impl DynamicGraph {
    pub fn builder(snapshots: Timestep, feature_dim: u32) -> GraphBuilder {
        GraphBuilder::new(snapshots, feature_dim)
    }

    /// Snapshot count `T`.
    pub fn num_snapshots(&self) -> Timestep {
        (self.offsets.len() - 1) as Timestep
    }

    pub fn feature_dim(&self) -> u32 {
        self.feature_dim
    }

    pub fn num_instances(&self) -> usize {
        self.instances.len()
    }

    pub fn num_entities(&self) -> usize {
        self.sequences.len()
    }

    pub fn instances(&self) -> &[VertexInstance] {
        &self.instances
    }

    pub fn instance(&self, idx: usize) -> VertexInstance {
        self.instances[idx]
    }

    pub fn index_of(&self, v: VertexInstance) -> Option<usize> {
        self.index.get(&v).copied()
    }

    /// Dense index range of snapshot `t` (1-based).
    pub fn snapshot_range(&self, t: Timestep) -> Range<usize> {
        let t = t as usize;
        self.offsets[t - 1]..self.offsets[t]
    }

    pub fn snapshot_len(&self, t: Timestep) -> usize {
        self.snapshot_range(t).len()
    }

    /// Spatial edges as `(u, v)` dense index pairs with `u < v`, sorted.
    pub fn spatial_edges(&self) -> &[(usize, usize)] {
        &self.spatial_edges
    }

    /// Consecutive presences of one entity as `(earlier, later)` pairs.
    pub fn temporal_links(&self) -> &[(usize, usize)] {
        &self.temporal_links
    }

    pub fn sequences(&self) -> &[Sequence] {
        &self.sequences
    }

    /// Sequence index and position of an instance within it.
    pub fn sequence_position(&self, idx: usize) -> (usize, usize) {
        self.seq_pos[idx]
    }

    pub fn spatial_neighbors_of(&self, idx: usize) -> &[usize] {
        &self.adj[self.adj_offsets[idx]..self.adj_offsets[idx + 1]]
    }

    pub fn temporal_prev(&self, idx: usize) -> Option<usize> {
        let (s, p) = self.seq_pos[idx];
        (p > 0).then(|| self.sequences[s].members[p - 1])
    }

    pub fn temporal_next(&self, idx: usize) -> Option<usize> {
        let (s, p) = self.seq_pos[idx];
        self.sequences[s].members.get(p + 1).copied()
    }

    /// Every other instance of the same entity, in timestep order.
    pub fn temporal_neighbors_of(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        let (s, _) = self.seq_pos[idx];
        self.sequences[s]
            .members
            .iter()
            .copied()
            .filter(move |&m| m != idx)
    }

    /// Same-snapshot instances sharing an edge with `v`.
    pub fn neighbors_spatial(&self, v: VertexInstance) -> Result<Vec<VertexInstance>> {
        let idx = self.index_of(v).ok_or(Error::UnknownVertex(v))?;
        let mut out: Vec<_> = self
            .spatial_neighbors_of(idx)
            .iter()
            .map(|&u| self.instances[u])
            .collect();
        out.sort_unstable();
        Ok(out)
    }

    /// All other instances of `v.entity`, regardless of gaps.
    pub fn neighbors_temporal(&self, v: VertexInstance) -> Result<Vec<VertexInstance>> {
        let idx = self.index_of(v).ok_or(Error::UnknownVertex(v))?;
        Ok(self
            .temporal_neighbors_of(idx)
            .map(|u| self.instances[u])
            .collect())
    }
}

/// Collects presences and edges, then validates and indexes them.
#[derive(Debug)]
pub struct GraphBuilder {
    snapshots: Timestep,
    feature_dim: u32,
    presence: Vec<Vec<EntityId>>,
    edges: Vec<(Timestep, EntityId, EntityId)>,
}

impl GraphBuilder {
    pub fn new(snapshots: Timestep, feature_dim: u32) -> Self {
        Self {
            snapshots,
            feature_dim,
            presence: vec![Vec::new(); snapshots as usize],
            edges: Vec::new(),
        }
    }

    fn check_t(&self, t: Timestep) -> Result<()> {
        if t == 0 || t > self.snapshots {
            return Err(Error::invalid(format!(
                "timestep {t} outside 1..={}",
                self.snapshots
            )));
        }
        Ok(())
    }

    pub fn vertex(&mut self, entity: EntityId, t: Timestep) -> Result<&mut Self> {
        self.check_t(t)?;
        self.presence[t as usize - 1].push(entity);
        Ok(self)
    }

    pub fn edge(&mut self, t: Timestep, u: EntityId, v: EntityId) -> Result<&mut Self> {
        self.check_t(t)?;
        if u == v {
            return Err(Error::invalid(format!("self-loop on entity {u} at t {t}")));
        }
        self.edges.push((t, u, v));
        Ok(self)
    }

    pub fn build(self) -> Result<DynamicGraph> {
        let mut offsets = Vec::with_capacity(self.presence.len() + 1);
        offsets.push(0);
        let mut instances = Vec::new();
        for (ti, mut ents) in self.presence.into_iter().enumerate() {
            ents.sort_unstable();
            let t = ti as Timestep + 1;
            if let Some(w) = ents.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::DuplicateVertex(VertexInstance::new(w[0], t)));
            }
            instances.extend(ents.into_iter().map(|e| VertexInstance::new(e, t)));
            offsets.push(instances.len());
        }
        let index: HashMap<_, _> = instances.iter().enumerate().map(|(i, &v)| (v, i)).collect();

        let mut spatial_edges = Vec::with_capacity(self.edges.len());
        for (t, u, v) in self.edges {
            let a = VertexInstance::new(u, t);
            let b = VertexInstance::new(v, t);
            let ia = *index.get(&a).ok_or(Error::UnknownVertex(a))?;
            let ib = *index.get(&b).ok_or(Error::UnknownVertex(b))?;
            spatial_edges.push((ia.min(ib), ia.max(ib)));
        }
        spatial_edges.sort_unstable();
        spatial_edges.dedup();

        let n = instances.len();
        let mut degree = vec![0usize; n];
        for &(u, v) in &spatial_edges {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut adj_offsets = vec![0usize; n + 1];
        for i in 0..n {
            adj_offsets[i + 1] = adj_offsets[i] + degree[i];
        }
        let mut fill = adj_offsets[..n].to_vec();
        let mut adj = vec![0usize; adj_offsets[n]];
        for &(u, v) in &spatial_edges {
            adj[fill[u]] = v;
            fill[u] += 1;
            adj[fill[v]] = u;
            fill[v] += 1;
        }

        // Instances are snapshot-major, so grouping by entity in index order
        // yields each sequence already sorted by t.
        let mut by_entity: HashMap<EntityId, Vec<usize>> = HashMap::new();
        for (i, v) in instances.iter().enumerate() {
            by_entity.entry(v.entity).or_default().push(i);
        }
        let mut sequences: Vec<Sequence> = by_entity
            .into_iter()
            .map(|(entity, members)| Sequence { entity, members })
            .collect();
        sequences.sort_unstable_by_key(|s| s.entity);

        let mut seq_pos = vec![(0, 0); n];
        let mut temporal_links = Vec::new();
        for (s, seq) in sequences.iter().enumerate() {
            for (p, &m) in seq.members.iter().enumerate() {
                seq_pos[m] = (s, p);
            }
            temporal_links.extend(seq.members.windows(2).map(|w| (w[0], w[1])));
        }
        temporal_links.sort_unstable();

        Ok(DynamicGraph {
            feature_dim: self.feature_dim,
            offsets,
            instances,
            index,
            spatial_edges,
            adj_offsets,
            adj,
            temporal_links,
            sequences,
            seq_pos,
        })
    }
}
