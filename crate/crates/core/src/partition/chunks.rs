use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::cost::{for_each_message, ChunkStats, ModelProfile};
use crate::graph::{DynamicGraph, VertexInstance};
use crate::{Error, Result};

use super::Method;

/// A set of vertex instances spanning snapshot and sequence boundaries.
#[derive(Clone, Debug, PartialEq)]
pub struct Chunk {
    pub id: usize,
    /// Dense instance indices, ascending.
    pub members: Vec<usize>,
    /// Outside instances whose embeddings members aggregate.
    pub halo: Vec<usize>,
    pub stats: ChunkStats,
}

/// Chunks plus the pairwise traffic `h(a, a')` between them.
#[derive(Clone, Debug, PartialEq)]
pub struct ChunkGraph {
    pub chunks: Vec<Chunk>,
    /// Chunk id of every instance.
    pub chunk_of: Vec<usize>,
    /// Bytes exchanged between two chunks per epoch, both directions summed,
    /// keyed `(a, b)` with `a < b`. Pairs with no traffic are absent.
    pub inter_cost: BTreeMap<(usize, usize), u64>,
    /// Bytes of messages whose endpoints share a chunk.
    pub internal_cost: u64,
    adjacency: Vec<Vec<(usize, u64)>>,
    pub rounds: usize,
    pub converged: bool,
}

impl ChunkGraph {
    /// Groups instances by label. Chunk ids follow ascending label value.
    pub fn from_labels(g: &DynamicGraph, profile: &ModelProfile, labels: &[usize]) -> Self {
        let mut ids: Vec<usize> = labels.to_vec();
        ids.sort_unstable();
        ids.dedup();
        let rank: HashMap<usize, usize> = ids.iter().enumerate().map(|(i, &l)| (l, i)).collect();
        let chunk_of: Vec<usize> = labels.iter().map(|l| rank[l]).collect();
        Self::build(g, profile, chunk_of, ids.len())
    }

    /// One chunk per device, empty chunks included.
    pub fn from_device_map(
        g: &DynamicGraph,
        profile: &ModelProfile,
        device_of: &[usize],
        n_devices: usize,
    ) -> Self {
        Self::build(g, profile, device_of.to_vec(), n_devices)
    }

    fn build(g: &DynamicGraph, profile: &ModelProfile, chunk_of: Vec<usize>, n_chunks: usize) -> Self {
        assert_eq!(chunk_of.len(), g.num_instances());
        let mut members = vec![Vec::new(); n_chunks];
        for (v, &c) in chunk_of.iter().enumerate() {
            members[c].push(v);
        }

        let mut inter_cost = BTreeMap::new();
        let mut internal_cost = 0;
        let mut halo: Vec<Vec<usize>> = vec![Vec::new(); n_chunks];
        for_each_message(g, profile, |m| {
            let (a, b) = (chunk_of[m.src], chunk_of[m.dst]);
            if a == b {
                internal_cost += m.bytes;
            } else {
                *inter_cost.entry((a.min(b), a.max(b))).or_insert(0) += m.bytes;
                halo[b].push(m.src);
            }
        });
        for h in &mut halo {
            h.sort_unstable();
            h.dedup();
        }

        let mut n_edges = vec![0u64; n_chunks];
        for &(u, v) in g.spatial_edges() {
            let (a, b) = (chunk_of[u], chunk_of[v]);
            n_edges[a] += 1;
            if b != a {
                n_edges[b] += 1;
            }
        }

        let layer_dims = profile.layer_dims();
        let chunks = members
            .into_iter()
            .zip(halo)
            .enumerate()
            .map(|(id, (members, halo))| {
                let stats = ChunkStats {
                    n_vertices: members.len() as u64,
                    n_edges: n_edges[id],
                    total_sequence_length: padded_slots(g, &members),
                    feature_dim: g.feature_dim(),
                    layer_dims: layer_dims.clone(),
                };
                Chunk {
                    id,
                    members,
                    halo,
                    stats,
                }
            })
            .collect();

        let mut adjacency = vec![Vec::new(); n_chunks];
        for (&(a, b), &w) in &inter_cost {
            adjacency[a].push((b, w));
            adjacency[b].push((a, w));
        }

        Self {
            chunks,
            chunk_of,
            inter_cost,
            internal_cost,
            adjacency,
            rounds: 0,
            converged: true,
        }
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    /// `h(a, b)`.
    pub fn cost_between(&self, a: usize, b: usize) -> u64 {
        if a == b {
            return 0;
        }
        self.inter_cost
            .get(&(a.min(b), a.max(b)))
            .copied()
            .unwrap_or(0)
    }

    /// Chunks exchanging traffic with `a`, with the bytes exchanged.
    pub fn neighbors(&self, a: usize) -> &[(usize, u64)] {
        &self.adjacency[a]
    }

    pub fn total_inter_cost(&self) -> u64 {
        self.inter_cost.values().sum()
    }

    pub fn to_file(&self, g: &DynamicGraph, method: Method) -> ChunkFile {
        let names = |idx: &[usize]| idx.iter().map(|&i| g.instance(i)).collect::<Vec<_>>();
        ChunkFile {
            method,
            chunks: self
                .chunks
                .iter()
                .map(|c| ChunkRecord {
                    id: c.id,
                    members: names(&c.members),
                    halo: names(&c.halo),
                    stats: c.stats.clone(),
                })
                .collect(),
            inter_cost: self
                .inter_cost
                .iter()
                .map(|(&(a, b), &w)| (a, b, w))
                .collect(),
            internal_cost: self.internal_cost,
            rounds: self.rounds,
            converged: self.converged,
            time_partition: None,
        }
    }
}

/// Lengths of the maximal runs of consecutive instances of one entity inside
/// `members`, ordered by sequence then position.
pub(crate) fn fragment_lengths(g: &DynamicGraph, members: &[usize]) -> Vec<usize> {
    let mut pos: Vec<(usize, usize)> = members.iter().map(|&m| g.sequence_position(m)).collect();
    pos.sort_unstable();
    let mut out = Vec::new();
    let mut run = 0;
    for (i, &(s, p)) in pos.iter().enumerate() {
        if i > 0 && pos[i - 1] == (s, p.wrapping_sub(1)) {
            run += 1;
        } else {
            if run > 0 {
                out.push(run);
            }
            run = 1;
        }
    }
    if run > 0 {
        out.push(run);
    }
    out
}

/// Fragments x longest fragment.
pub(crate) fn padded_slots(g: &DynamicGraph, members: &[usize]) -> u64 {
    let f = fragment_lengths(g, members);
    f.len() as u64 * f.iter().copied().max().unwrap_or(0) as u64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChunkRecord {
    pub id: usize,
    pub members: Vec<VertexInstance>,
    pub halo: Vec<VertexInstance>,
    pub stats: ChunkStats,
}

/// On-disk chunk output: memberships, statistics and the sparse `h` matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChunkFile {
    pub method: Method,
    pub chunks: Vec<ChunkRecord>,
    pub inter_cost: Vec<(usize, usize, u64)>,
    pub internal_cost: u64,
    pub rounds: usize,
    pub converged: bool,
    /// Time-encoder placement for the hybrid baseline, one member list per
    /// device.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_partition: Option<Vec<Vec<VertexInstance>>>,
}

impl ChunkFile {
    /// Rebuilds the chunk graph against `g`, checking that the chunks form a
    /// disjoint cover of its instances.
    pub fn to_chunk_graph(&self, g: &DynamicGraph, profile: &ModelProfile) -> Result<ChunkGraph> {
        let lists: Vec<&[VertexInstance]> = self.chunks.iter().map(|c| c.members.as_slice()).collect();
        let chunk_of = cover(g, &lists)?;
        let mut cg = ChunkGraph::build(g, profile, chunk_of, lists.len());
        cg.rounds = self.rounds;
        cg.converged = self.converged;
        Ok(cg)
    }

    pub fn time_device_map(&self, g: &DynamicGraph) -> Result<Option<Vec<usize>>> {
        self.time_partition
            .as_ref()
            .map(|parts| {
                let lists: Vec<&[VertexInstance]> = parts.iter().map(|p| p.as_slice()).collect();
                cover(g, &lists)
            })
            .transpose()
    }
}

fn cover(g: &DynamicGraph, lists: &[&[VertexInstance]]) -> Result<Vec<usize>> {
    const UNSET: usize = usize::MAX;
    let mut owner = vec![UNSET; g.num_instances()];
    for (c, list) in lists.iter().enumerate() {
        for &v in *list {
            let idx = g.index_of(v).ok_or(Error::UnknownVertex(v))?;
            if owner[idx] != UNSET {
                return Err(Error::PlanMismatch(format!(
                    "instance ({}, {}) appears in two chunks",
                    v.entity, v.t
                )));
            }
            owner[idx] = c;
        }
    }
    if let Some(i) = owner.iter().position(|&o| o == UNSET) {
        let v = g.instance(i);
        return Err(Error::PlanMismatch(format!(
            "instance ({}, {}) is in no chunk",
            v.entity, v.t
        )));
    }
    Ok(owner)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::total_message_bytes;

    fn two_snapshot_graph() -> DynamicGraph {
        let mut b = DynamicGraph::builder(2, 2);
        for t in 1..=2 {
            for e in 0..4 {
                b.vertex(e, t).unwrap();
            }
            b.edge(t, 0, 1).unwrap().edge(t, 2, 3).unwrap().edge(t, 1, 2).unwrap();
        }
        b.build().unwrap()
    }

    #[test]
    fn duality_and_halo() {
        let g = two_snapshot_graph();
        let p = ModelProfile::tgcn(4);
        // Entities {0,1} vs {2,3}: cuts edge 1-2 in both snapshots.
        let labels: Vec<usize> = g.instances().iter().map(|v| (v.entity / 2) as usize).collect();
        let cg = ChunkGraph::from_labels(&g, &p, &labels);
        assert_eq!(cg.len(), 2);
        assert_eq!(cg.cost_between(0, 1), 2 * 2 * 32);
        assert_eq!(cg.cost_between(1, 1), 0);
        assert_eq!(cg.internal_cost + cg.total_inter_cost(), total_message_bytes(&g, &p));
        let halo: Vec<_> = cg.chunks[0].halo.iter().map(|&i| g.instance(i)).collect();
        assert_eq!(halo, vec![VertexInstance::new(2, 1), VertexInstance::new(2, 2)]);
    }

    #[test]
    fn padded_slot_count() {
        let mut b = DynamicGraph::builder(5, 1);
        for t in [1, 2, 4, 5] {
            b.vertex(0, t).unwrap();
        }
        for t in 1..=5 {
            b.vertex(1, t).unwrap();
        }
        let g = b.build().unwrap();
        // Positions of entity 0 are contiguous (gaps in t are not gaps in
        // the sequence): one fragment of 4. Entity 1 split {1,2} + {4,5}.
        let members: Vec<usize> = g
            .instances()
            .iter()
            .enumerate()
            .filter(|(_, v)| v.entity == 0 || v.t != 3)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(padded_slots(&g, &members), 3 * 4);
    }

    #[test]
    fn file_round_trip_and_validation() {
        let g = two_snapshot_graph();
        let p = ModelProfile::tgcn(4);
        let labels: Vec<usize> = g.instances().iter().map(|v| v.t as usize).collect();
        let cg = ChunkGraph::from_labels(&g, &p, &labels);
        let file = cg.to_file(&g, Method::Pgc);
        let json = serde_json::to_string(&file).unwrap();
        let back: ChunkFile = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_chunk_graph(&g, &p).unwrap(), cg);

        let mut broken = file.clone();
        broken.chunks[1].members.pop();
        assert!(matches!(broken.to_chunk_graph(&g, &p), Err(Error::PlanMismatch(_))));
        let mut dup = file;
        let extra = dup.chunks[0].members[0];
        dup.chunks[1].members.push(extra);
        assert!(matches!(dup.to_chunk_graph(&g, &p), Err(Error::PlanMismatch(_))));
    }
}
