//! Deterministic epoch simulator.
//!
//! A device's epoch time is its compute, plus host-to-device loading, plus
//! received traffic over the link and a latency per peer batch, plus a
//! constant gradient all-reduce. Nothing overlaps. The wall estimate is the
//! slowest device.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::assign::{assign, lambda_divergence, Assignment};
use crate::cost::{
    for_each_message, true_cost, Calibration, ChunkStats, EdgeKind, Encoder, ModelProfile,
    Predictor,
};
use crate::fusion::{pack_sequences, plan_device_fusion, Footprint, FusionPlan, MemoryCoeffs};
use crate::graph::DynamicGraph;
use crate::partition::{
    default_size_cap, fragment_lengths, partition_pss, partition_pss_ts, partition_pts, propagate,
    ChunkFile, ChunkGraph, DeviceMap, Method,
};
use crate::stale::{
    threshold, DriftSpec, DriftStream, EmbeddingCache, EpochLossTrace, StaleConfig, StaleReport,
};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterSpec {
    pub n_devices: usize,
    /// Per device.
    pub memory_budget: u64,
    /// Device-to-device, bytes per ms.
    pub link_bandwidth: f64,
    /// Per batch of messages from one peer in one phase.
    pub latency_ms: f64,
    /// Host-to-device, bytes per ms.
    pub load_bandwidth: f64,
    /// Gradient synchronization, identical for every plan.
    pub allreduce_ms: f64,
}

impl Default for ClusterSpec {
    fn default() -> Self {
        Self {
            n_devices: 4,
            memory_budget: 256 << 20,
            link_bandwidth: 1.25e5,
            latency_ms: 0.05,
            load_bandwidth: 1.0e6,
            allreduce_ms: 2.0,
        }
    }
}

impl ClusterSpec {
    pub fn validate(&self) -> Result<()> {
        let reals = [
            self.link_bandwidth,
            self.latency_ms,
            self.load_bandwidth,
            self.allreduce_ms,
        ];
        if self.n_devices == 0
            || self.memory_budget == 0
            || reals.iter().any(|x| !(x.is_finite() && *x > 0.0))
        {
            return Err(Error::invalid("cluster parameters must be positive"));
        }
        Ok(())
    }
}

/// Synthetic training loss `floor + (initial - floor) * exp(-(r - 1) / tau)`
/// that drives the adaptive threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossCurve {
    pub initial: f64,
    pub floor: f64,
    pub tau: f64,
}

impl Default for LossCurve {
    fn default() -> Self {
        Self {
            initial: 2.0,
            floor: 0.2,
            tau: 20.0,
        }
    }
}

/// Everything besides the graph that a simulation depends on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub profile: ModelProfile,
    pub cluster: ClusterSpec,
    pub calibration: Calibration,
    pub memory: MemoryCoeffs,
    pub stale: StaleConfig,
    pub drift: DriftSpec,
    pub loss: LossCurve,
    /// Fuse co-located chunks and pack sequences (chunk plans only).
    pub fusion: bool,
    /// Defaults to `ceil(instances / (4 * n_devices))`.
    pub size_cap: Option<usize>,
    pub max_rounds: usize,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            profile: ModelProfile::tgcn(16),
            cluster: ClusterSpec::default(),
            calibration: Calibration::default(),
            memory: MemoryCoeffs::default(),
            stale: StaleConfig::Off,
            drift: DriftSpec::default(),
            loss: LossCurve::default(),
            fusion: true,
            size_cap: None,
            max_rounds: 50,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.profile.validate()?;
        self.cluster.validate()?;
        self.calibration.validate()?;
        self.stale.validate()?;
        self.drift.validate()?;
        if self.max_rounds == 0 || self.size_cap == Some(0) {
            return Err(Error::invalid("size_cap and max_rounds must be >= 1"));
        }
        Ok(())
    }
}

/// Partition, placement and fusion of one method.
#[derive(Clone, Debug, PartialEq)]
pub struct Plan {
    pub method: Method,
    pub chunks: ChunkGraph,
    pub assignment: Assignment,
    /// Time-encoder device per instance, when it differs from the structure
    /// encoder's.
    pub time_devices: Option<Vec<usize>>,
    pub fusion: Option<FusionPlan>,
}

impl Plan {
    /// Predicted workloads when a predictor is given, ground truth otherwise.
    pub fn build(
        g: &DynamicGraph,
        method: Method,
        cfg: &SimConfig,
        predictor: Option<&Predictor>,
    ) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.cluster.n_devices;
        match method {
            Method::Pgc => {
                let cap = cfg
                    .size_cap
                    .unwrap_or_else(|| default_size_cap(g.num_instances(), n));
                let cg = propagate(g, &cfg.profile, cap, cfg.max_rounds)?;
                let workloads = workloads(&cg, &cfg.calibration, predictor);
                let assignment = assign(&cg, &workloads, n)?;
                Self::chunked(g, cg, assignment, cfg)
            }
            Method::Pss => Self::baseline(g, method, DeviceMap::unified(partition_pss(g, n)?, n), cfg),
            Method::Pts => Self::baseline(g, method, DeviceMap::unified(partition_pts(g, n)?, n), cfg),
            Method::PssTs => Self::baseline(g, method, partition_pss_ts(g, n)?, cfg),
        }
    }

    /// A chunk plan with the given placement, fused if `cfg.fusion`.
    pub fn chunked(g: &DynamicGraph, cg: ChunkGraph, assignment: Assignment, cfg: &SimConfig) -> Result<Self> {
        let fusion = if cfg.fusion {
            Some(plan_device_fusion(g, &cg, &assignment, cfg.cluster.memory_budget, &cfg.memory)?)
        } else {
            None
        };
        Ok(Self {
            method: Method::Pgc,
            chunks: cg,
            assignment,
            time_devices: None,
            fusion,
        })
    }

    /// One chunk per device, never fused.
    pub fn baseline(g: &DynamicGraph, method: Method, map: DeviceMap, cfg: &SimConfig) -> Result<Self> {
        let n = map.n_devices;
        let cg = ChunkGraph::from_device_map(g, &cfg.profile, &map.structure, n);
        let loads = cg
            .chunks
            .iter()
            .map(|c| true_cost(&c.stats, Encoder::Structure, &cfg.calibration))
            .collect();
        let assignment = Assignment {
            device_of: (0..n).collect(),
            queues: (0..n).map(|d| vec![d]).collect(),
            loads,
        };
        Ok(Self {
            method,
            chunks: cg,
            assignment,
            time_devices: map.is_split().then_some(map.time),
            fusion: None,
        })
    }

    pub fn n_devices(&self) -> usize {
        self.assignment.n_devices()
    }

    /// Reassembles a plan from its stored chunk, assignment and fusion files.
    pub fn from_parts(
        g: &DynamicGraph,
        profile: &ModelProfile,
        file: &ChunkFile,
        assignment: Assignment,
        fusion: Option<FusionPlan>,
    ) -> Result<Self> {
        let plan = Self {
            method: file.method,
            chunks: file.to_chunk_graph(g, profile)?,
            assignment,
            time_devices: file.time_device_map(g)?,
            fusion,
        };
        plan.validate(g)?;
        Ok(plan)
    }

    /// The chunk file, carrying the hybrid's time-encoder placement.
    pub fn chunk_file(&self, g: &DynamicGraph) -> ChunkFile {
        let mut file = self.chunks.to_file(g, self.method);
        if let Some(t) = &self.time_devices {
            let mut parts = vec![Vec::new(); self.n_devices()];
            for (v, &d) in t.iter().enumerate() {
                parts[d].push(g.instance(v));
            }
            file.time_partition = Some(parts);
        }
        file
    }

    pub fn structure_devices(&self) -> Vec<usize> {
        self.assignment.instance_devices(&self.chunks)
    }

    pub fn time_devices(&self) -> Vec<usize> {
        self.time_devices
            .clone()
            .unwrap_or_else(|| self.structure_devices())
    }

    pub fn validate(&self, g: &DynamicGraph) -> Result<()> {
        if self.chunks.chunk_of.len() != g.num_instances() {
            return Err(Error::PlanMismatch(format!(
                "plan covers {} instances, graph has {}",
                self.chunks.chunk_of.len(),
                g.num_instances()
            )));
        }
        self.assignment.validate(self.chunks.len())?;
        if let Some(t) = &self.time_devices {
            if t.len() != g.num_instances() || t.iter().any(|&d| d >= self.n_devices()) {
                return Err(Error::PlanMismatch("time-encoder placement is invalid".into()));
            }
        }
        if let Some(f) = &self.fusion {
            f.validate(&self.assignment)?;
        }
        Ok(())
    }
}

/// Predicted or ground-truth workload of every chunk.
pub fn workloads(cg: &ChunkGraph, coeffs: &Calibration, predictor: Option<&Predictor>) -> Vec<f64> {
    let stats: Vec<&ChunkStats> = cg.chunks.iter().map(|c| &c.stats).collect();
    match predictor {
        Some(p) => p.predict_many(&stats),
        None => stats
            .iter()
            .map(|s| true_cost(s, Encoder::Structure, coeffs) + true_cost(s, Encoder::Time, coeffs))
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub method: Method,
    pub epoch: usize,
    pub compute_ms: Vec<f64>,
    pub loading_ms: Vec<f64>,
    pub comm_ms: Vec<f64>,
    /// Sum of the above plus the all-reduce term.
    pub device_ms: Vec<f64>,
    pub spatial_bytes: u64,
    pub temporal_bytes: u64,
    pub shuffle_bytes: u64,
    pub traffic_bytes: u64,
    pub loading_bytes: u64,
    pub saved_load_bytes: u64,
    pub lambda: f64,
    pub padding_slots: u64,
    pub naive_padding_slots: u64,
    pub stale: Option<StaleReport>,
    pub stale_reduction_pct: f64,
    pub epoch_ms: f64,
}

/// A message crossing devices.
#[derive(Clone, Copy, Debug)]
struct CutMessage {
    src: usize,
    from: usize,
    to: usize,
    kind: EdgeKind,
    bytes: u64,
}

/// The epoch-invariant part of a simulation.
#[derive(Clone, Debug)]
struct Prepared {
    compute_ms: Vec<f64>,
    loading_bytes: Vec<u64>,
    saved_load_bytes: u64,
    padding_slots: u64,
    naive_padding_slots: u64,
    cut: Vec<CutMessage>,
    /// `(from, to, bytes)` of embeddings moved between encoder phases.
    shuffle: Vec<(usize, usize, u64)>,
    /// Instances that send at least one cut message, ascending.
    boundary: Vec<usize>,
}

fn padding(lengths: &[usize], packed: bool) -> Result<(u64, u64)> {
    let naive = crate::fusion::naive_padding(lengths) as u64;
    if !packed || lengths.is_empty() {
        let longest = lengths.iter().copied().max().unwrap_or(0) as u64;
        return Ok((naive, lengths.len() as u64 * longest));
    }
    let seqs: Vec<(u64, usize)> = lengths.iter().enumerate().map(|(i, &l)| (i as u64, l)).collect();
    let batch = pack_sequences(&seqs)?;
    Ok((
        batch.padding_count as u64,
        (batch.rows.len() * batch.row_length) as u64,
    ))
}

fn prepare(g: &DynamicGraph, plan: &Plan, cfg: &SimConfig) -> Result<Prepared> {
    plan.validate(g)?;
    let n = plan.n_devices();
    if n != cfg.cluster.n_devices {
        return Err(Error::PlanMismatch(format!(
            "plan uses {n} devices, cluster has {}",
            cfg.cluster.n_devices
        )));
    }
    let cg = &plan.chunks;
    let coeffs = &cfg.calibration;
    let mut compute_ms = vec![0.0; n];
    let mut loading_bytes = vec![0u64; n];
    let mut saved_load_bytes = 0;
    let mut padding_slots = 0;
    let mut naive_padding_slots = 0;

    // Structure encoder, plus data loading, per chunk or fused group.
    let units: Vec<(usize, Vec<usize>)> = match &plan.fusion {
        Some(f) => f
            .devices
            .iter()
            .flat_map(|d| d.groups.iter().map(move |grp| (d.device, grp.chunks.clone())))
            .collect(),
        None => (0..cg.len()).map(|c| (plan.assignment.device_of[c], vec![c])).collect(),
    };
    for (d, chunks) in &units {
        for &c in chunks {
            compute_ms[*d] += true_cost(&cg.chunks[c].stats, Encoder::Structure, coeffs);
        }
        let fp = Footprint::of(g, cg, chunks);
        loading_bytes[*d] += fp.loading_bytes(&cfg.memory);
        if chunks.len() > 1 {
            let separate: u64 = chunks
                .iter()
                .map(|&c| Footprint::of(g, cg, &[c]).loading_bytes(&cfg.memory))
                .sum();
            saved_load_bytes += separate - fp.loading_bytes(&cfg.memory);
        }
    }

    // Time encoder. Fused groups pack their fragments into shared rows;
    // otherwise each chunk (or hybrid time partition) pads to its longest.
    let time_units: Vec<(usize, Vec<usize>)> = match &plan.time_devices {
        Some(t) => {
            let mut members = vec![Vec::new(); n];
            for (v, &d) in t.iter().enumerate() {
                members[d].push(v);
            }
            members.into_iter().enumerate().collect()
        }
        None => units
            .iter()
            .map(|(d, chunks)| {
                let members = chunks.iter().flat_map(|&c| cg.chunks[c].members.iter().copied()).collect();
                (*d, members)
            })
            .collect(),
    };
    let packed = plan.fusion.is_some();
    let width = cfg.profile.layer_dims();
    for (d, members) in &time_units {
        let lengths = fragment_lengths(g, members);
        let naive = crate::fusion::naive_padding(&lengths) as u64;
        let (pad, slots) = padding(&lengths, packed)?;
        padding_slots += pad;
        naive_padding_slots += naive;
        if members.is_empty() {
            continue;
        }
        let stats = ChunkStats {
            n_vertices: members.len() as u64,
            n_edges: 0,
            total_sequence_length: slots,
            feature_dim: g.feature_dim(),
            layer_dims: width.clone(),
        };
        compute_ms[*d] += true_cost(&stats, Encoder::Time, coeffs);
    }

    let structure = plan.structure_devices();
    let time = plan.time_devices();
    let mut cut = Vec::new();
    for_each_message(g, &cfg.profile, |m| {
        let devs = match m.kind {
            EdgeKind::Spatial => &structure,
            EdgeKind::Temporal => &time,
        };
        let (from, to) = (devs[m.src], devs[m.dst]);
        if from != to {
            cut.push(CutMessage {
                src: m.src,
                from,
                to,
                kind: m.kind,
                bytes: m.bytes,
            });
        }
    });

    let mut shuffle_matrix = vec![vec![0u64; n]; n];
    if plan.time_devices.is_some() {
        let bytes = cfg.profile.embedding_bytes();
        for v in 0..g.num_instances() {
            if structure[v] != time[v] {
                shuffle_matrix[structure[v]][time[v]] += bytes;
            }
        }
    }
    let mut shuffle = Vec::new();
    for (from, row) in shuffle_matrix.iter().enumerate() {
        for (to, &b) in row.iter().enumerate() {
            if b > 0 {
                shuffle.push((from, to, b));
            }
        }
    }

    let boundary: BTreeSet<usize> = cut.iter().map(|m| m.src).collect();
    Ok(Prepared {
        compute_ms,
        loading_bytes,
        saved_load_bytes,
        padding_slots,
        naive_padding_slots,
        cut,
        shuffle,
        boundary: boundary.into_iter().collect(),
    })
}

/// Cache, drift and loss state that persists across epochs.
#[derive(Clone, Debug)]
pub struct StaleTracker {
    config: StaleConfig,
    trace: EpochLossTrace,
    cache: EmbeddingCache,
    drift: DriftStream,
}

impl StaleTracker {
    pub fn new(g: &DynamicGraph, cfg: &SimConfig, epochs: usize) -> Result<Self> {
        let l = &cfg.loss;
        Ok(Self {
            config: cfg.stale,
            trace: EpochLossTrace::exponential(l.initial, l.floor, l.tau, epochs.max(1))?,
            cache: EmbeddingCache::new(),
            drift: DriftStream::new(g, cfg.drift, cfg.seed)?,
        })
    }

    /// Which boundary instances transmit in 1-based epoch `r`.
    fn decide(&mut self, boundary: &[usize], r: usize) -> Result<(Vec<bool>, f64, f64)> {
        while self.drift.epoch() < r {
            self.drift.advance();
        }
        let current = self.drift.view(boundary);
        let (theta, d_r) = if self.cache.is_empty() {
            (0.0, 0.0)
        } else {
            let d_r = self.cache.max_distance(&current);
            (threshold(&self.trace, r, d_r, self.config)?, d_r)
        };
        let out = self.cache.filter(&current, theta)?;
        let sent: BTreeSet<_> = out.sent.into_iter().collect();
        let mut mask = vec![false; self.drift.len()];
        for &i in boundary {
            mask[i] = sent.contains(&self.drift.key(i));
        }
        Ok((mask, theta, d_r))
    }

    pub fn cache(&self) -> &EmbeddingCache {
        &self.cache
    }
}

fn bill(
    prep: &Prepared,
    plan: &Plan,
    cfg: &SimConfig,
    stale: Option<&mut StaleTracker>,
    epoch: usize,
) -> Result<EpochReport> {
    let n = plan.n_devices();
    let (send, stale_meta) = match stale {
        Some(tr) if tr.config != StaleConfig::Off => {
            let (mask, theta, d_r) = tr.decide(&prep.boundary, epoch)?;
            (Some(mask), Some((theta, d_r)))
        }
        _ => (None, None),
    };

    let mut recv = vec![0u64; n];
    let mut peers = vec![BTreeSet::new(); n];
    let (mut spatial, mut temporal, mut avoided) = (0u64, 0u64, 0u64);
    for m in &prep.cut {
        if send.as_ref().is_some_and(|s| !s[m.src]) {
            avoided += m.bytes;
            continue;
        }
        match m.kind {
            EdgeKind::Spatial => spatial += m.bytes,
            EdgeKind::Temporal => temporal += m.bytes,
        }
        recv[m.to] += m.bytes;
        peers[m.to].insert((m.kind == EdgeKind::Temporal, m.from));
    }
    let mut shuffle = 0;
    for &(from, to, b) in &prep.shuffle {
        shuffle += b;
        recv[to] += b;
        peers[to].insert((true, from + n));
    }

    let c = &cfg.cluster;
    let comm_ms: Vec<f64> = (0..n)
        .map(|d| recv[d] as f64 / c.link_bandwidth + c.latency_ms * peers[d].len() as f64)
        .collect();
    let loading_ms: Vec<f64> = prep
        .loading_bytes
        .iter()
        .map(|&b| b as f64 / c.load_bandwidth)
        .collect();
    let device_ms: Vec<f64> = (0..n)
        .map(|d| prep.compute_ms[d] + loading_ms[d] + comm_ms[d] + c.allreduce_ms)
        .collect();

    let stale = stale_meta.map(|(theta, d_r)| {
        let sent = send
            .as_ref()
            .map_or(0, |s| prep.boundary.iter().filter(|&&i| s[i]).count());
        StaleReport::new(
            epoch,
            theta,
            d_r,
            sent,
            prep.boundary.len() - sent,
            spatial + temporal,
            avoided,
        )
    });
    Ok(EpochReport {
        method: plan.method,
        epoch,
        lambda: lambda_divergence(&device_ms)?,
        epoch_ms: device_ms.iter().copied().fold(0.0, f64::max),
        compute_ms: prep.compute_ms.clone(),
        loading_ms,
        comm_ms,
        device_ms,
        spatial_bytes: spatial,
        temporal_bytes: temporal,
        shuffle_bytes: shuffle,
        traffic_bytes: spatial + temporal + shuffle,
        loading_bytes: prep.loading_bytes.iter().sum(),
        saved_load_bytes: prep.saved_load_bytes,
        padding_slots: prep.padding_slots,
        naive_padding_slots: prep.naive_padding_slots,
        stale_reduction_pct: stale.as_ref().map_or(0.0, |s| s.reduction_pct),
        stale,
    })
}

/// One epoch in isolation. Staleness needs state across epochs; pass a
/// tracker to apply it.
pub fn simulate_epoch(
    g: &DynamicGraph,
    plan: &Plan,
    cfg: &SimConfig,
    stale: Option<&mut StaleTracker>,
    epoch: usize,
) -> Result<EpochReport> {
    let prep = prepare(g, plan, cfg)?;
    bill(&prep, plan, cfg, stale, epoch)
}

/// Runs consecutive epochs of one plan.
#[derive(Debug)]
pub struct Simulator<'a> {
    plan: &'a Plan,
    cfg: &'a SimConfig,
    prep: Prepared,
    stale: StaleTracker,
    epoch: usize,
}

impl<'a> Simulator<'a> {
    pub fn new(g: &DynamicGraph, plan: &'a Plan, cfg: &'a SimConfig, epochs: usize) -> Result<Self> {
        Ok(Self {
            plan,
            cfg,
            prep: prepare(g, plan, cfg)?,
            stale: StaleTracker::new(g, cfg, epochs)?,
            epoch: 0,
        })
    }

    pub fn step(&mut self) -> Result<EpochReport> {
        self.epoch += 1;
        bill(&self.prep, self.plan, self.cfg, Some(&mut self.stale), self.epoch)
    }

    pub fn run(&mut self, epochs: usize) -> Result<Vec<EpochReport>> {
        (0..epochs).map(|_| self.step()).collect()
    }

    pub fn stale(&self) -> &StaleTracker {
        &self.stale
    }
}

/// Mean of a method's epoch reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub epochs: usize,
    pub chunks: usize,
    pub epoch_ms: f64,
    pub max_compute_ms: f64,
    pub max_comm_ms: f64,
    pub spatial_bytes: f64,
    pub temporal_bytes: f64,
    pub shuffle_bytes: f64,
    pub traffic_bytes: f64,
    pub loading_bytes: f64,
    pub lambda: f64,
    pub padding_slots: f64,
    pub naive_padding_slots: f64,
    pub stale_reduction_pct: f64,
}

impl MethodSummary {
    pub fn from_reports(chunks: usize, reports: &[EpochReport]) -> Result<Self> {
        let first = reports.first().ok_or_else(|| Error::invalid("no epochs to summarize"))?;
        let k = reports.len() as f64;
        let mean = |f: &dyn Fn(&EpochReport) -> f64| reports.iter().map(f).sum::<f64>() / k;
        let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
        Ok(Self {
            method: first.method,
            epochs: reports.len(),
            chunks,
            epoch_ms: mean(&|r| r.epoch_ms),
            max_compute_ms: mean(&|r| max(&r.compute_ms)),
            max_comm_ms: mean(&|r| max(&r.comm_ms)),
            spatial_bytes: mean(&|r| r.spatial_bytes as f64),
            temporal_bytes: mean(&|r| r.temporal_bytes as f64),
            shuffle_bytes: mean(&|r| r.shuffle_bytes as f64),
            traffic_bytes: mean(&|r| r.traffic_bytes as f64),
            loading_bytes: mean(&|r| r.loading_bytes as f64),
            lambda: mean(&|r| r.lambda),
            padding_slots: mean(&|r| r.padding_slots as f64),
            naive_padding_slots: mean(&|r| r.naive_padding_slots as f64),
            stale_reduction_pct: mean(&|r| r.stale_reduction_pct),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub summaries: Vec<MethodSummary>,
}

const COLUMNS: [&str; 14] = [
    "method",
    "chunks",
    "epoch_ms",
    "max_compute_ms",
    "max_comm_ms",
    "spatial_bytes",
    "temporal_bytes",
    "shuffle_bytes",
    "traffic_bytes",
    "loading_bytes",
    "lambda",
    "padding_slots",
    "naive_padding_slots",
    "stale_reduction_pct",
];

impl Comparison {
    pub fn get(&self, method: Method) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method)
    }

    fn cells(s: &MethodSummary) -> Vec<String> {
        vec![
            s.method.to_string(),
            s.chunks.to_string(),
            format!("{:.3}", s.epoch_ms),
            format!("{:.3}", s.max_compute_ms),
            format!("{:.3}", s.max_comm_ms),
            format!("{:.0}", s.spatial_bytes),
            format!("{:.0}", s.temporal_bytes),
            format!("{:.0}", s.shuffle_bytes),
            format!("{:.0}", s.traffic_bytes),
            format!("{:.0}", s.loading_bytes),
            format!("{:.4}", s.lambda),
            format!("{:.0}", s.padding_slots),
            format!("{:.0}", s.naive_padding_slots),
            format!("{:.2}", s.stale_reduction_pct),
        ]
    }

    pub fn to_csv(&self) -> String {
        let mut out = COLUMNS.join(",");
        out.push('\n');
        for s in &self.summaries {
            out.push_str(&Self::cells(s).join(","));
            out.push('\n');
        }
        out
    }

    /// Aligned columns for terminals.
    pub fn to_table(&self) -> String {
        let rows: Vec<Vec<String>> = std::iter::once(COLUMNS.iter().map(|c| c.to_string()).collect())
            .chain(self.summaries.iter().map(Self::cells))
            .collect();
        let widths: Vec<usize> = (0..COLUMNS.len())
            .map(|i| rows.iter().map(|r| r[i].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for r in &rows {
            let line: Vec<String> = r
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect();
            let _ = writeln!(out, "{}", line.join("  ").trim_end());
        }
        out
    }
}

/// Every epoch report of one method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodRun {
    pub method: Method,
    pub chunks: usize,
    pub reports: Vec<EpochReport>,
}

/// Builds and simulates every method on the same graph and configuration.
pub fn run_methods(
    g: &DynamicGraph,
    cfg: &SimConfig,
    methods: &[Method],
    epochs: usize,
    predictor: Option<&Predictor>,
) -> Result<Vec<MethodRun>> {
    if epochs == 0 {
        return Err(Error::invalid("epochs must be >= 1"));
    }
    methods
        .iter()
        .map(|&m| {
            let plan = Plan::build(g, m, cfg, predictor)?;
            let reports = Simulator::new(g, &plan, cfg, epochs)?.run(epochs)?;
            Ok(MethodRun {
                method: m,
                chunks: plan.chunks.len(),
                reports,
            })
        })
        .collect()
}

impl Comparison {
    pub fn from_runs(runs: &[MethodRun]) -> Result<Self> {
        let summaries = runs
            .iter()
            .map(|r| MethodSummary::from_reports(r.chunks, &r.reports))
            .collect::<Result<_>>()?;
        Ok(Self { summaries })
    }
}

/// Per-method means of [`run_methods`].
pub fn compare_methods(
    g: &DynamicGraph,
    cfg: &SimConfig,
    methods: &[Method],
    epochs: usize,
    predictor: Option<&Predictor>,
) -> Result<Comparison> {
    Comparison::from_runs(&run_methods(g, cfg, methods, epochs, predictor)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::SyntheticSpec;

    fn small() -> DynamicGraph {
        crate::graph::generate(&SyntheticSpec::scaled(300, 6, 0.3, 7)).unwrap()
    }

    fn cfg(n: usize) -> SimConfig {
        SimConfig {
            cluster: ClusterSpec {
                n_devices: n,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn one_device_has_no_traffic() {
        let g = small();
        let cfg = cfg(1);
        for m in Method::ALL {
            let plan = Plan::build(&g, m, &cfg, None).unwrap();
            let r = simulate_epoch(&g, &plan, &cfg, None, 1).unwrap();
            assert_eq!(r.traffic_bytes, 0, "{m}");
            assert_eq!(r.lambda, 1.0);
        }
    }

    #[test]
    fn three_cut_edges_bill_both_directions() {
        // Entities 0..3 on device 0, 3..6 on device 1, three crossing edges.
        let mut b = DynamicGraph::builder(1, 1);
        for e in 0..6 {
            b.vertex(e, 1).unwrap();
        }
        for (u, v) in [(0, 3), (1, 4), (2, 5), (0, 1)] {
            b.edge(1, u, v).unwrap();
        }
        let g = b.build().unwrap();
        let mut cfg = cfg(2);
        cfg.profile = ModelProfile::tgcn(4);
        let plan = Plan::build(&g, Method::Pts, &cfg, None).unwrap();
        let r = simulate_epoch(&g, &plan, &cfg, None, 1).unwrap();
        assert_eq!(r.spatial_bytes, 2 * 3 * 32);
        assert_eq!(r.temporal_bytes, 0);
    }

    #[test]
    fn hybrid_pays_shuffle() {
        let g = small();
        let cfg = cfg(2);
        let plan = Plan::build(&g, Method::PssTs, &cfg, None).unwrap();
        let r = simulate_epoch(&g, &plan, &cfg, None, 1).unwrap();
        let moved = plan
            .structure_devices()
            .iter()
            .zip(plan.time_devices())
            .filter(|(a, b)| *a != b)
            .count() as u64;
        assert!(moved > 0);
        assert_eq!(r.shuffle_bytes, moved * cfg.profile.embedding_bytes());
    }

    #[test]
    fn fusion_never_increases_loading() {
        let g = small();
        let mut cfg = cfg(2);
        cfg.fusion = false;
        let plain = Plan::build(&g, Method::Pgc, &cfg, None).unwrap();
        cfg.fusion = true;
        let fused = Plan::build(&g, Method::Pgc, &cfg, None).unwrap();
        let a = simulate_epoch(&g, &plain, &cfg, None, 1).unwrap();
        let b = simulate_epoch(&g, &fused, &cfg, None, 1).unwrap();
        assert!(b.loading_bytes <= a.loading_bytes);
        assert_eq!(a.loading_bytes - b.loading_bytes, b.saved_load_bytes);
        assert!(b.padding_slots <= b.naive_padding_slots);
        assert_eq!(a.traffic_bytes, b.traffic_bytes);
    }

    #[test]
    fn staleness_cuts_traffic_after_first_epoch() {
        let g = small();
        let mut cfg = cfg(2);
        cfg.stale = StaleConfig::Static { fraction: 0.5 };
        let plan = Plan::build(&g, Method::Pss, &cfg, None).unwrap();
        let reports = Simulator::new(&g, &plan, &cfg, 5).unwrap().run(5).unwrap();
        assert_eq!(reports[0].stale.as_ref().unwrap().bytes_avoided, 0);
        assert!(reports[1..].iter().all(|r| r.stale_reduction_pct > 0.0));
        assert!(reports[1].traffic_bytes < reports[0].traffic_bytes);
    }

    #[test]
    fn mismatched_cluster_rejected() {
        let g = small();
        let plan = Plan::build(&g, Method::Pss, &cfg(2), None).unwrap();
        assert!(simulate_epoch(&g, &plan, &cfg(3), None, 1).is_err());
    }

    #[test]
    fn comparison_outputs() {
        let g = small();
        let cmp = compare_methods(&g, &cfg(2), &Method::ALL, 2, None).unwrap();
        assert_eq!(cmp.summaries.len(), 4);
        let csv = cmp.to_csv();
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.starts_with("method,chunks,epoch_ms"));
        assert_eq!(cmp.to_table().lines().count(), 5);
        assert_eq!(cmp, compare_methods(&g, &cfg(2), &Method::ALL, 2, None).unwrap());
    }
}
