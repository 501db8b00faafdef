//! Test-side oracles. Nothing here calls the library's message, cut or
//! packing code; the oracles work from the raw vertex and edge lists.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use dynchunk::cost::Mlp;
use dynchunk::fusion::{PackedBatch, SlotRef};
use dynchunk::{DynamicGraph, GruCell, ModelProfile, TemporalFanout, VertexInstance};
use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A graph kept as plain presence and edge sets.
#[derive(Clone, Debug)]
pub struct RawGraph {
    pub snapshots: u32,
    pub presence: BTreeSet<(u32, u64)>,
    /// `(t, u, v)` with `u < v`.
    pub edges: BTreeSet<(u32, u64, u64)>,
}

impl RawGraph {
    pub fn random(rng: &mut impl Rng, max_instances: usize, max_snapshots: u32) -> Self {
        let snapshots = rng.random_range(1..=max_snapshots);
        let entities = rng.random_range(1..=max_instances.min(30) as u64);
        let p_present = rng.random_range(0.3..1.0);
        let mut presence = BTreeSet::new();
        'fill: for t in 1..=snapshots {
            for e in 0..entities {
                if rng.random_bool(p_present) {
                    presence.insert((t, e));
                    if presence.len() == max_instances {
                        break 'fill;
                    }
                }
            }
        }
        if presence.is_empty() {
            presence.insert((1, 0));
        }
        let p_edge = rng.random_range(0.0..0.4);
        let mut edges = BTreeSet::new();
        for t in 1..=snapshots {
            let here: Vec<u64> = presence.iter().filter(|p| p.0 == t).map(|p| p.1).collect();
            for (i, &u) in here.iter().enumerate() {
                for &v in &here[i + 1..] {
                    if rng.random_bool(p_edge) {
                        edges.insert((t, u, v));
                    }
                }
            }
        }
        Self {
            snapshots,
            presence,
            edges,
        }
    }

    /// A random graph with a device count in `2..=4` that every baseline
    /// accepts: no more devices than snapshots or entities.
    pub fn random_for_devices(rng: &mut impl Rng, max_instances: usize, max_snapshots: u32) -> (Self, usize) {
        loop {
            let raw = Self::random(rng, max_instances, max_snapshots);
            let entities = raw.presence.iter().map(|p| p.1).collect::<BTreeSet<_>>().len();
            let limit = 4.min(raw.snapshots as usize).min(entities);
            if limit >= 2 {
                let n = rng.random_range(2..=limit);
                return (raw, n);
            }
        }
    }

    pub fn build(&self) -> DynamicGraph {
        let mut b = DynamicGraph::builder(self.snapshots, 2);
        for &(t, e) in &self.presence {
            b.vertex(e, t).unwrap();
        }
        for &(t, u, v) in &self.edges {
            b.edge(t, u, v).unwrap();
        }
        b.build().unwrap()
    }

    pub fn instances(&self) -> Vec<VertexInstance> {
        self.presence.iter().map(|&(t, e)| VertexInstance::new(e, t)).collect()
    }

    /// Every `(src, dst, temporal?)` aggregation message, walked from the
    /// raw lists.
    pub fn messages(&self, fanout: TemporalFanout) -> Vec<(VertexInstance, VertexInstance, bool)> {
        let mut out = Vec::new();
        for &(t, u, v) in &self.edges {
            let a = VertexInstance::new(u, t);
            let b = VertexInstance::new(v, t);
            out.push((a, b, false));
            out.push((b, a, false));
        }
        let mut by_entity: BTreeMap<u64, Vec<u32>> = BTreeMap::new();
        for &(t, e) in &self.presence {
            by_entity.entry(e).or_default().push(t);
        }
        for (e, ts) in by_entity {
            for j in 0..ts.len() {
                let sources: Vec<u32> = match fanout {
                    TemporalFanout::PreviousOnly => ts[j.saturating_sub(1)..j].to_vec(),
                    TemporalFanout::AllSnapshots => ts[..j].to_vec(),
                };
                for s in sources {
                    out.push((VertexInstance::new(e, s), VertexInstance::new(e, ts[j]), true));
                }
            }
        }
        out
    }
}

fn per_message(profile: &ModelProfile, temporal: bool) -> u64 {
    let msgs = if temporal {
        profile.temporal_msgs_per_block
    } else {
        profile.spatial_msgs_per_block
    };
    (profile.blocks * msgs * profile.embedding_dim * profile.bytes_per_scalar) as u64
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Traffic {
    pub spatial: u64,
    pub temporal: u64,
    pub shuffle: u64,
}

/// Cross-device bytes of one epoch. Spatial messages use the structure
/// placement, temporal ones the time placement; instances placed
/// differently by the two pay one embedding of shuffle.
pub fn brute_traffic(
    raw: &RawGraph,
    profile: &ModelProfile,
    structure: &BTreeMap<VertexInstance, usize>,
    time: &BTreeMap<VertexInstance, usize>,
) -> Traffic {
    let mut out = Traffic::default();
    for (a, b, temporal) in raw.messages(profile.temporal_fanout) {
        let devs = if temporal { time } else { structure };
        if devs[&a] != devs[&b] {
            let bytes = per_message(profile, temporal);
            if temporal {
                out.temporal += bytes;
            } else {
                out.spatial += bytes;
            }
        }
    }
    for v in raw.instances() {
        if structure[&v] != time[&v] {
            out.shuffle += (profile.embedding_dim * profile.bytes_per_scalar) as u64;
        }
    }
    out
}

/// Bytes of messages whose endpoints get different labels.
pub fn brute_cut(raw: &RawGraph, profile: &ModelProfile, label: &BTreeMap<VertexInstance, usize>) -> u64 {
    raw.messages(profile.temporal_fanout)
        .into_iter()
        .filter(|(a, b, _)| label[a] != label[b])
        .map(|(_, _, t)| per_message(profile, t))
        .sum()
}

/// Smallest cut over every partition of the instances into groups of at
/// most `cap`, by restricted-growth enumeration.
pub fn exhaustive_min_cut(raw: &RawGraph, profile: &ModelProfile, cap: usize) -> u64 {
    let vs = raw.instances();
    let pos: BTreeMap<VertexInstance, usize> = vs.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let msgs: Vec<(usize, usize, u64)> = raw
        .messages(profile.temporal_fanout)
        .into_iter()
        .map(|(a, b, t)| (pos[&a], pos[&b], per_message(profile, t)))
        .collect();
    // Messages indexed by their later endpoint so the cut grows as labels are
    // fixed left to right.
    let mut by_last: Vec<Vec<(usize, u64)>> = vec![Vec::new(); vs.len()];
    for (a, b, w) in msgs {
        by_last[a.max(b)].push((a.min(b), w));
    }
    let mut labels = vec![0usize; vs.len()];
    let mut sizes = vec![0usize; vs.len()];
    let mut best = u64::MAX;
    fn rec(
        i: usize,
        groups: usize,
        cut: u64,
        cap: usize,
        by_last: &[Vec<(usize, u64)>],
        labels: &mut [usize],
        sizes: &mut [usize],
        best: &mut u64,
    ) {
        if cut >= *best {
            return;
        }
        if i == labels.len() {
            *best = cut;
            return;
        }
        for l in 0..=groups {
            if l == labels.len() || sizes[l] == cap {
                continue;
            }
            labels[i] = l;
            sizes[l] += 1;
            let extra: u64 = by_last[i].iter().filter(|(j, _)| labels[*j] != l).map(|x| x.1).sum();
            rec(i + 1, groups.max(l + 1), cut + extra, cap, by_last, labels, sizes, best);
            sizes[l] -= 1;
        }
    }
    rec(0, 0, 0, cap, &by_last, &mut labels, &mut sizes, &mut best);
    best
}

/// Fewest bins of capacity `cap` holding `items`, by exhaustive search.
pub fn exhaustive_bins(items: &[usize], cap: usize) -> usize {
    let mut sorted = items.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    let mut best = sorted.len();
    fn rec(i: usize, items: &[usize], cap: usize, bins: &mut Vec<usize>, best: &mut usize) {
        if bins.len() >= *best {
            return;
        }
        if i == items.len() {
            *best = bins.len();
            return;
        }
        for b in 0..bins.len() {
            if bins[b] + items[i] <= cap {
                bins[b] += items[i];
                rec(i + 1, items, cap, bins, best);
                bins[b] -= items[i];
            }
        }
        bins.push(items[i]);
        rec(i + 1, items, cap, bins, best);
        bins.pop();
    }
    rec(0, &sorted, cap, &mut Vec::new(), &mut best);
    best
}

/// Every set partition of `items`.
pub fn set_partitions(items: &[usize]) -> Vec<Vec<Vec<usize>>> {
    let Some((&first, rest)) = items.split_first() else {
        return vec![Vec::new()];
    };
    let mut out = Vec::new();
    for p in set_partitions(rest) {
        for k in 0..p.len() {
            let mut q = p.clone();
            q[k].insert(0, first);
            out.push(q);
        }
        let mut q = p;
        q.insert(0, vec![first]);
        out.push(q);
    }
    out
}

/// Members plus every outside instance that sends them a message.
pub fn loaded_vertices(raw: &RawGraph, fanout: TemporalFanout, members: &BTreeSet<VertexInstance>) -> usize {
    let mut loaded = members.clone();
    for (a, b, _) in raw.messages(fanout) {
        if members.contains(&b) {
            loaded.insert(a);
        }
    }
    loaded.len()
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Plain nested-vector GRU, kept apart from the library's ndarray version.
pub struct RefGru {
    w: Vec<Vec<Vec<f64>>>,
    u: Vec<Vec<Vec<f64>>>,
    b: Vec<Vec<f64>>,
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn matvec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

impl RefGru {
    pub fn random(input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let mut mat = |r: usize, c: usize| -> Vec<Vec<f64>> {
            (0..r).map(|_| (0..c).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
        };
        let w = (0..3).map(|_| mat(hidden, input)).collect();
        let u = (0..3).map(|_| mat(hidden, hidden)).collect();
        let b = (0..3).map(|_| mat(1, hidden).remove(0)).collect();
        Self { w, u, b }
    }

    pub fn cell(&self) -> GruCell {
        let m = |x: &Vec<Vec<f64>>| {
            Array2::from_shape_fn((x.len(), x[0].len()), |(i, j)| x[i][j])
        };
        let w = [m(&self.w[0]), m(&self.w[1]), m(&self.w[2])];
        let u = [m(&self.u[0]), m(&self.u[1]), m(&self.u[2])];
        let b = [
            Array1::from(self.b[0].clone()),
            Array1::from(self.b[1].clone()),
            Array1::from(self.b[2].clone()),
        ];
        GruCell::new(w, u, b).unwrap()
    }

    pub fn run(&self, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let hidden = self.b[0].len();
        let mut h = vec![0.0; hidden];
        let mut out = Vec::new();
        for x in xs {
            let pre = |g: usize, hh: &[f64]| -> (Vec<f64>, Vec<f64>) {
                let wx = matvec(&self.w[g], x);
                let uh = matvec(&self.u[g], hh);
                let a: Vec<f64> = wx.iter().zip(&self.b[g]).map(|(p, q)| p + q).collect();
                (a, uh)
            };
            let (az, uz) = pre(0, &h);
            let (ar, ur) = pre(1, &h);
            let (an, un) = pre(2, &h);
            let mut next = vec![0.0; hidden];
            for i in 0..hidden {
                let z = sig(az[i] + uz[i]);
                let r = sig(ar[i] + ur[i]);
                let n = (an[i] + r * un[i]).tanh();
                next[i] = (1.0 - z) * n + z * h[i];
            }
            h = next;
            out.push(h.clone());
        }
        out
    }
}

/// Sequences dropped into randomly chosen rows in random order, with random
/// padding gaps between them.
pub fn arbitrary_packing(seqs: &[(u64, usize)], rng: &mut impl Rng) -> PackedBatch {
    let longest = seqs.iter().map(|s| s.1).max().unwrap_or(0);
    let row_length = longest + rng.random_range(0..4);
    let mut order: Vec<usize> = (0..seqs.len()).collect();
    order.shuffle(rng);
    let mut rows: Vec<Vec<Option<SlotRef>>> = Vec::new();
    let mut mask: Vec<Vec<bool>> = Vec::new();
    for i in order {
        let (entity, len) = seqs[i];
        let fits: Vec<usize> = (0..rows.len()).filter(|&r| row_length - rows[r].len() >= len).collect();
        let r = if fits.is_empty() || rng.random_bool(0.2) {
            rows.push(Vec::new());
            mask.push(Vec::new());
            rows.len() - 1
        } else {
            fits[rng.random_range(0..fits.len())]
        };
        let gap = rng.random_range(0..=row_length - rows[r].len() - len);
        for _ in 0..gap {
            if !rows[r].is_empty() {
                mask[r].push(false);
            }
            rows[r].push(None);
        }
        for step in 0..len {
            if !rows[r].is_empty() {
                mask[r].push(step > 0);
            }
            rows[r].push(Some(SlotRef { entity, step }));
        }
    }
    for (row, m) in rows.iter_mut().zip(&mut mask) {
        while row.len() < row_length {
            if !row.is_empty() {
                m.push(false);
            }
            row.push(None);
        }
    }
    let padding_count = rows.iter().flatten().filter(|s| s.is_none()).count();
    PackedBatch {
        rows,
        row_length,
        mask,
        padding_count,
    }
}

/// Central differences on the MAPE loss against the analytic gradient.
pub fn gradient_check(seed: u64, coords: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sizes = [7, 16, 8, 1];
    let mut net = Mlp::<f64>::new(&sizes, 1.0, &mut rng);
    assert!(net.num_params() >= 100);
    let x = Array2::from_shape_fn((32, 7), |_| rng.random_range(-1.0..1.0));
    let y = Array1::from_shape_fn(32, |_| rng.random_range(0.5..3.0));
    let scale = 1.7;
    let (_, grads) = net.mape_loss_and_grad(x.view(), y.view(), scale);
    let flat: Vec<f64> = grads
        .weights
        .iter()
        .zip(&grads.biases)
        .flat_map(|(w, b)| w.iter().chain(b.iter()).copied().collect::<Vec<_>>())
        .collect();
    let eps = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..coords {
        let k = rng.random_range(0..net.num_params());
        let orig = *net.param_mut(k);
        *net.param_mut(k) = orig + eps;
        let up = net.mape_loss_and_grad(x.view(), y.view(), scale).0;
        *net.param_mut(k) = orig - eps;
        let down = net.mape_loss_and_grad(x.view(), y.view(), scale).0;
        *net.param_mut(k) = orig;
        let numeric = (up - down) / (2.0 * eps);
        let analytic = flat[k];
        let denom = numeric.abs().max(analytic.abs());
        if denom > 1e-9 {
            worst = worst.max((numeric - analytic).abs() / denom);
        }
    }
    worst
}
