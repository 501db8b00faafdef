use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::assign::Assignment;
use crate::graph::DynamicGraph;
use crate::partition::{padded_slots, ChunkGraph};
use crate::{Error, Result};

/// Analytic per-group memory model, in bytes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MemoryCoeffs {
    /// Per loaded vertex (members plus halo).
    pub per_vertex: u64,
    pub per_edge: u64,
    /// Per padded sequence slot.
    pub per_slot: u64,
    pub fixed: u64,
    /// Bytes read from host memory per loaded vertex.
    pub load_bytes_per_vertex: u64,
}

impl Default for MemoryCoeffs {
    fn default() -> Self {
        Self {
            per_vertex: 1024,
            per_edge: 64,
            per_slot: 256,
            fixed: 1 << 20,
            load_bytes_per_vertex: 8,
        }
    }
}

/// What a set of chunks loads when processed as one unit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Footprint {
    /// Members plus halo, each counted once.
    pub vertices: u64,
    /// Spatial edges with at least one member endpoint.
    pub edges: u64,
    pub slots: u64,
}

impl Footprint {
    pub fn of(g: &DynamicGraph, cg: &ChunkGraph, chunks: &[usize]) -> Self {
        let in_group: HashSet<usize> = chunks.iter().copied().collect();
        let member = |v: usize| in_group.contains(&cg.chunk_of[v]);
        let mut members = Vec::new();
        let mut halo = HashSet::new();
        for &c in chunks {
            members.extend_from_slice(&cg.chunks[c].members);
            halo.extend(cg.chunks[c].halo.iter().copied().filter(|&v| !member(v)));
        }
        let mut edges = 0u64;
        for &m in &members {
            for &u in g.spatial_neighbors_of(m) {
                // Count internal edges once, from the lower endpoint.
                if !member(u) || m < u {
                    edges += 1;
                }
            }
        }
        Self {
            vertices: (members.len() + halo.len()) as u64,
            edges,
            slots: padded_slots(g, &members),
        }
    }

    pub fn memory_bytes(&self, coeffs: &MemoryCoeffs) -> u64 {
        coeffs.fixed
            + coeffs.per_vertex * self.vertices
            + coeffs.per_edge * self.edges
            + coeffs.per_slot * self.slots
    }

    pub fn loading_bytes(&self, coeffs: &MemoryCoeffs) -> u64 {
        coeffs.load_bytes_per_vertex * self.vertices
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusionGroup {
    /// Chunk ids, ascending.
    pub chunks: Vec<usize>,
    pub memory_bytes: u64,
    pub loading_bytes: u64,
    /// Loading bytes of the chunks taken separately, minus `loading_bytes`.
    pub saved_load_bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceFusion {
    pub device: usize,
    pub groups: Vec<FusionGroup>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusionPlan {
    pub memory_budget: u64,
    pub devices: Vec<DeviceFusion>,
}

impl FusionPlan {
    pub fn total_saved_load_bytes(&self) -> u64 {
        self.groups().map(|g| g.saved_load_bytes).sum()
    }

    pub fn groups(&self) -> impl Iterator<Item = &FusionGroup> {
        self.devices.iter().flat_map(|d| &d.groups)
    }

    /// Checks that the groups of each device partition exactly the chunks the
    /// assignment put there, and that every group fits the budget.
    pub fn validate(&self, assignment: &Assignment) -> Result<()> {
        if self.devices.len() != assignment.n_devices() {
            return Err(Error::PlanMismatch(format!(
                "fusion plan has {} devices, assignment has {}",
                self.devices.len(),
                assignment.n_devices()
            )));
        }
        for (m, d) in self.devices.iter().enumerate() {
            let mut got: Vec<usize> = d.groups.iter().flat_map(|g| g.chunks.iter().copied()).collect();
            got.sort_unstable();
            let mut want = assignment.queues[m].clone();
            want.sort_unstable();
            if d.device != m || got != want {
                return Err(Error::PlanMismatch(format!(
                    "fusion groups on device {m} do not match its assigned chunks"
                )));
            }
            if let Some(g) = d.groups.iter().find(|g| g.memory_bytes > self.memory_budget) {
                return Err(Error::OverBudget {
                    chunk: g.chunks[0],
                    needed: g.memory_bytes,
                    budget: self.memory_budget,
                });
            }
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

struct Group {
    chunks: Vec<usize>,
    footprint: Footprint,
    separate_load: u64,
}

/// Greedily fuses the chunks of one device. Each step merges the pair of
/// groups exchanging the most traffic among pairs whose merged estimate fits
/// `budget`; merging stops when no pair with traffic fits.
pub fn plan_spatial_fusion(
    g: &DynamicGraph,
    cg: &ChunkGraph,
    chunk_ids: &[usize],
    budget: u64,
    coeffs: &MemoryCoeffs,
) -> Result<Vec<FusionGroup>> {
    let mut ids = chunk_ids.to_vec();
    ids.sort_unstable();
    ids.dedup();

    // Group slots; merged groups get fresh slots so cached verdicts on old
    // pairs never apply to new ones.
    let mut groups: Vec<Option<Group>> = Vec::with_capacity(2 * ids.len());
    let mut slot_of_chunk = BTreeMap::new();
    for &c in &ids {
        if c >= cg.len() {
            return Err(Error::PlanMismatch(format!("unknown chunk {c}")));
        }
        let footprint = Footprint::of(g, cg, &[c]);
        let needed = footprint.memory_bytes(coeffs);
        if needed > budget {
            return Err(Error::OverBudget {
                chunk: c,
                needed,
                budget,
            });
        }
        slot_of_chunk.insert(c, groups.len());
        groups.push(Some(Group {
            chunks: vec![c],
            footprint,
            separate_load: footprint.loading_bytes(coeffs),
        }));
    }

    // Traffic between live groups, keyed by slot pair (low, high).
    let mut traffic: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    for &c in &ids {
        for &(d, w) in cg.neighbors(c) {
            if let Some(&sd) = slot_of_chunk.get(&d) {
                let sc = slot_of_chunk[&c];
                if sc < sd {
                    traffic.insert((sc, sd), w);
                }
            }
        }
    }

    let mut infeasible: HashSet<(usize, usize)> = HashSet::new();
    loop {
        let best = traffic
            .iter()
            .filter(|(k, _)| !infeasible.contains(k))
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .map(|(&k, _)| k);
        let Some((a, b)) = best else { break };

        let ga = groups[a].as_ref().expect("live group");
        let gb = groups[b].as_ref().expect("live group");
        let mut chunks: Vec<usize> = ga.chunks.iter().chain(&gb.chunks).copied().collect();
        chunks.sort_unstable();
        let footprint = Footprint::of(g, cg, &chunks);
        if footprint.memory_bytes(coeffs) > budget {
            infeasible.insert((a, b));
            continue;
        }

        let separate_load = ga.separate_load + gb.separate_load;
        let slot = groups.len();
        groups.push(Some(Group {
            chunks,
            footprint,
            separate_load,
        }));
        groups[a] = None;
        groups[b] = None;

        let mut merged: BTreeMap<usize, u64> = BTreeMap::new();
        traffic.retain(|&(x, y), w| {
            let other = match (x == a || x == b, y == a || y == b) {
                (false, false) => return true,
                (true, true) => return false,
                (true, false) => y,
                (false, true) => x,
            };
            *merged.entry(other).or_insert(0) += *w;
            false
        });
        for (other, w) in merged {
            traffic.insert((other, slot), w);
        }
    }

    let mut out: Vec<FusionGroup> = groups
        .into_iter()
        .flatten()
        .map(|grp| {
            let loading_bytes = grp.footprint.loading_bytes(coeffs);
            FusionGroup {
                memory_bytes: grp.footprint.memory_bytes(coeffs),
                loading_bytes,
                saved_load_bytes: grp.separate_load - loading_bytes,
                chunks: grp.chunks,
            }
        })
        .collect();
    out.sort_by_key(|grp| grp.chunks[0]);
    Ok(out)
}

/// Fuses every device's chunks independently.
pub fn plan_device_fusion(
    g: &DynamicGraph,
    cg: &ChunkGraph,
    assignment: &Assignment,
    budget: u64,
    coeffs: &MemoryCoeffs,
) -> Result<FusionPlan> {
    assignment.validate(cg.len())?;
    let devices = assignment
        .queues
        .iter()
        .enumerate()
        .map(|(device, q)| {
            Ok(DeviceFusion {
                device,
                groups: plan_spatial_fusion(g, cg, q, budget, coeffs)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(FusionPlan {
        memory_budget: budget,
        devices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ModelProfile;

    fn coeffs() -> MemoryCoeffs {
        MemoryCoeffs {
            per_vertex: 10,
            per_edge: 1,
            per_slot: 0,
            fixed: 0,
            load_bytes_per_vertex: 1,
        }
    }

    /// Single snapshot: path 0-1 | 2-3, with the cross edge 1-2.
    fn two_chunks() -> (DynamicGraph, ChunkGraph) {
        let mut b = DynamicGraph::builder(1, 1);
        for e in 0..4 {
            b.vertex(e, 1).unwrap();
        }
        b.edge(1, 0, 1).unwrap().edge(1, 1, 2).unwrap().edge(1, 2, 3).unwrap();
        let g = b.build().unwrap();
        let cg = ChunkGraph::from_labels(&g, &ModelProfile::tgcn(4), &[0, 0, 1, 1]);
        (g, cg)
    }

    #[test]
    fn shared_edge_merges_and_saves_two_halo_loads() {
        let (g, cg) = two_chunks();
        let groups = plan_spatial_fusion(&g, &cg, &[0, 1], u64::MAX, &coeffs()).unwrap();
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].chunks, vec![0, 1]);
        assert_eq!(groups[0].saved_load_bytes, 2);
        assert_eq!(groups[0].loading_bytes, 4);
    }

    #[test]
    fn tight_budget_keeps_singletons() {
        let (g, cg) = two_chunks();
        // Each chunk: 3 vertices, 2 edges = 32; merged: 4 vertices, 3 edges = 43.
        let groups = plan_spatial_fusion(&g, &cg, &[0, 1], 40, &coeffs()).unwrap();
        assert_eq!(groups.len(), 2);
        assert!(groups.iter().all(|g| g.saved_load_bytes == 0 && g.memory_bytes <= 40));
        let err = plan_spatial_fusion(&g, &cg, &[0, 1], 31, &coeffs()).unwrap_err();
        assert!(matches!(err, Error::OverBudget { needed: 32, .. }));
    }

    #[test]
    fn no_traffic_no_merges() {
        let mut b = DynamicGraph::builder(1, 1);
        for e in 0..4 {
            b.vertex(e, 1).unwrap();
        }
        b.edge(1, 0, 1).unwrap().edge(1, 2, 3).unwrap();
        let g = b.build().unwrap();
        let cg = ChunkGraph::from_labels(&g, &ModelProfile::tgcn(4), &[0, 0, 1, 1]);
        let groups = plan_spatial_fusion(&g, &cg, &[0, 1], u64::MAX, &coeffs()).unwrap();
        assert_eq!(groups.len(), 2);
    }

    #[test]
    fn device_plan_validates_and_round_trips() {
        let (g, cg) = two_chunks();
        let a = crate::assign(&cg, &[1.0, 1.0], 2).unwrap();
        let plan = plan_device_fusion(&g, &cg, &a, 1000, &coeffs()).unwrap();
        plan.validate(&a).unwrap();
        let text = serde_json::to_string(&plan).unwrap();
        let back: FusionPlan = serde_json::from_str(&text).unwrap();
        assert_eq!(back, plan);

        let mut broken = plan.clone();
        broken.devices[0].groups.clear();
        assert!(broken.validate(&a).is_err());
    }
}
