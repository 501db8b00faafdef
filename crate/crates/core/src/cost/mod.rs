//! Communication weights, ground-truth compute cost and the learned workload
//! predictor.

mod messages;
mod mlp;
mod predictor;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use messages::{for_each_message, total_message_bytes, Message};
pub use mlp::{Adam, Mlp, MlpGradients};
pub use predictor::{Predictor, TrainConfig, TrainingSample};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TemporalFanout {
    /// Each instance aggregates its predecessor only (GRU/LSTM time encoders).
    PreviousOnly,
    /// Each instance aggregates every earlier instance of its entity
    /// (temporal self-attention).
    AllSnapshots,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeKind {
    Spatial,
    Temporal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Encoder {
    Structure,
    Time,
}

/// Per-block message counts and embedding width of a DGNN.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelProfile {
    pub blocks: u32,
    pub spatial_msgs_per_block: u32,
    pub temporal_msgs_per_block: u32,
    pub temporal_fanout: TemporalFanout,
    pub embedding_dim: u32,
    pub bytes_per_scalar: u32,
}

impl ModelProfile {
    /// Two graph-convolution layers and one GRU layer per block.
    pub fn tgcn(embedding_dim: u32) -> Self {
        Self {
            blocks: 1,
            spatial_msgs_per_block: 2,
            temporal_msgs_per_block: 1,
            temporal_fanout: TemporalFanout::PreviousOnly,
            embedding_dim,
            bytes_per_scalar: 4,
        }
    }

    /// One attention layer each over neighbors and over all earlier snapshots.
    pub fn dysat(embedding_dim: u32) -> Self {
        Self {
            blocks: 1,
            spatial_msgs_per_block: 1,
            temporal_msgs_per_block: 1,
            temporal_fanout: TemporalFanout::AllSnapshots,
            embedding_dim,
            bytes_per_scalar: 4,
        }
    }

    /// Two graph-convolution layers and two LSTM layers per block.
    pub fn mpnn_lstm(embedding_dim: u32) -> Self {
        Self {
            blocks: 1,
            spatial_msgs_per_block: 2,
            temporal_msgs_per_block: 2,
            temporal_fanout: TemporalFanout::PreviousOnly,
            embedding_dim,
            bytes_per_scalar: 4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks == 0
            || self.spatial_msgs_per_block == 0
            || self.embedding_dim == 0
            || self.bytes_per_scalar == 0
        {
            return Err(Error::invalid(
                "model profile counts must be >= 1 (temporal messages may be 0)",
            ));
        }
        Ok(())
    }

    /// Bytes of one embedding.
    pub fn embedding_bytes(&self) -> u64 {
        self.embedding_dim as u64 * self.bytes_per_scalar as u64
    }

    /// Widths of every encoder layer, in execution order.
    pub fn layer_dims(&self) -> Vec<u32> {
        let per_block = self.spatial_msgs_per_block + self.temporal_msgs_per_block;
        vec![self.embedding_dim; (self.blocks * per_block) as usize]
    }
}

/// Bytes sent across one edge of `kind`, in one direction, per epoch.
pub fn edge_traffic(profile: &ModelProfile, kind: EdgeKind) -> u64 {
    let msgs = match kind {
        EdgeKind::Spatial => profile.spatial_msgs_per_block,
        EdgeKind::Temporal => profile.temporal_msgs_per_block,
    };
    profile.blocks as u64 * msgs as u64 * profile.embedding_bytes()
}

/// Size description of a chunk, the predictor's input.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChunkStats {
    pub n_vertices: u64,
    /// Spatial edges with at least one endpoint in the chunk.
    pub n_edges: u64,
    /// Time-encoder slots when the chunk's sequence fragments are padded to
    /// the longest one: fragments x longest fragment.
    pub total_sequence_length: u64,
    pub feature_dim: u32,
    pub layer_dims: Vec<u32>,
}

impl ChunkStats {
    pub const FEATURES: usize = 7;

    /// Flat predictor features. Layer widths become (depth, max, total).
    pub fn features(&self) -> [f64; Self::FEATURES] {
        let depth = self.layer_dims.len() as f64;
        let max_w = self.layer_dims.iter().copied().max().unwrap_or(0) as f64;
        [
            self.n_vertices as f64,
            self.n_edges as f64,
            self.total_sequence_length as f64,
            self.feature_dim as f64,
            depth,
            max_w,
            self.total_width() as f64,
        ]
    }

    pub fn total_width(&self) -> u64 {
        self.layer_dims.iter().map(|&w| w as u64).sum()
    }
}

/// Coefficients of the analytic ground-truth cost, in milliseconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Calibration {
    /// Per edge per unit of feature-plus-layer width.
    pub alpha_edge: f64,
    /// Per vertex.
    pub alpha_vertex: f64,
    /// Per sequence slot per unit of layer width.
    pub beta_slot: f64,
    /// Fixed time-encoder launch overhead.
    pub beta_fixed: f64,
}

impl Default for Calibration {
    fn default() -> Self {
        Self {
            alpha_edge: 2.0e-4,
            alpha_vertex: 1.0e-3,
            beta_slot: 1.0e-4,
            beta_fixed: 0.5,
        }
    }
}

impl Calibration {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.alpha_edge,
            self.alpha_vertex,
            self.beta_slot,
            self.beta_fixed,
        ];
        if all.iter().all(|c| c.is_finite() && *c > 0.0) {
            Ok(())
        } else {
            Err(Error::invalid("calibration coefficients must be positive"))
        }
    }
}

/// Deterministic execution time of one encoder over a chunk.
pub fn true_cost(stats: &ChunkStats, encoder: Encoder, coeffs: &Calibration) -> f64 {
    let width = stats.total_width() as f64;
    match encoder {
        Encoder::Structure => {
            let feature_work = stats.feature_dim as f64 + width;
            coeffs.alpha_edge * stats.n_edges as f64 * feature_work
                + coeffs.alpha_vertex * stats.n_vertices as f64
        }
        Encoder::Time => {
            coeffs.beta_slot * stats.total_sequence_length as f64 * width + coeffs.beta_fixed
        }
    }
}

pub fn total_true_cost(stats: &ChunkStats, coeffs: &Calibration) -> f64 {
    true_cost(stats, Encoder::Structure, coeffs) + true_cost(stats, Encoder::Time, coeffs)
}

/// Mean absolute percentage error of `(predicted, measured)` pairs.
pub fn mape(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::invalid("MAPE of an empty set"));
    }
    let mut sum = 0.0;
    for &(p, m) in pairs {
        if !(m > 0.0) {
            return Err(Error::invalid(format!("measured value {m} must be positive")));
        }
        sum += (p - m).abs() / m;
    }
    Ok(sum / pairs.len() as f64)
}

/// Random chunk descriptions spanning the sizes the partitioner produces,
/// with per-encoder times drawn as `true_cost * U[1 - noise, 1 + noise]`.
pub fn synthetic_samples(
    n: usize,
    coeffs: &Calibration,
    noise: f64,
    rng: &mut impl Rng,
) -> Vec<TrainingSample> {
    (0..n)
        .map(|_| {
            let stats = random_chunk_stats(rng);
            let mut jitter = || {
                if noise > 0.0 {
                    rng.random_range(1.0 - noise..=1.0 + noise)
                } else {
                    1.0
                }
            };
            let structure_ms = true_cost(&stats, Encoder::Structure, coeffs) * jitter();
            let time_ms = true_cost(&stats, Encoder::Time, coeffs) * jitter();
            TrainingSample {
                stats,
                structure_ms,
                time_ms,
            }
        })
        .collect()
}

pub fn random_chunk_stats(rng: &mut impl Rng) -> ChunkStats {
    let n_vertices: u64 = rng.random_range(1..=4000);
    let avg_degree = rng.random_range(0.0..4.0);
    let n_edges = (n_vertices as f64 * avg_degree) as u64;
    let fragments = rng.random_range(1..=n_vertices);
    let longest = n_vertices.div_ceil(fragments) + rng.random_range(0..=n_vertices / fragments);
    let total_sequence_length = fragments * longest.min(100);
    let feature_dim = *[2u32, 4, 8, 16].get(rng.random_range(0..4)).unwrap();
    let width = *[4u32, 8, 16, 32].get(rng.random_range(0..4)).unwrap();
    let depth = rng.random_range(2..=4);
    ChunkStats {
        n_vertices,
        n_edges,
        total_sequence_length,
        feature_dim,
        layer_dims: vec![width; depth],
    }
}
