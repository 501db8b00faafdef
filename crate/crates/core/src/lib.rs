//! Chunk-based partitioning and traffic simulation for distributed training
//! of dynamic graph neural networks.
//!
//! A dynamic graph is a sequence of snapshots; every vertex instance is one
//! entity at one timestep. The pipeline is:
//!
//! 1. [`partition::propagate`] groups vertex instances into chunks by weighted
//!    label propagation over spatial edges and virtual temporal edges.
//! 2. [`assign::assign`] places chunks on devices, trading balance against
//!    co-location of communicating chunks.
//! 3. [`fusion`] merges co-located chunks under a memory budget and packs
//!    variable-length sequences without padding.
//! 4. [`stale`] decides which boundary embeddings must be re-sent each epoch.
//! 5. [`sim`] bills compute, traffic and data loading per device and compares
//!    the chunk pipeline with snapshot, sequence and hybrid baselines.

pub mod assign;
pub mod cost;
mod error;
pub mod fusion;
pub mod graph;
pub mod partition;
pub mod sim;
pub mod stale;

pub use assign::{assign, lambda_divergence, Assignment};
pub use cost::{
    edge_traffic, mape, true_cost, Calibration, ChunkStats, EdgeKind, Encoder, ModelProfile,
    Predictor, TemporalFanout,
};
pub use error::{Error, Result};
pub use fusion::{FusionPlan, GruCell, MemoryCoeffs, PackedBatch};
pub use graph::{DynamicGraph, EntityId, SyntheticSpec, Timestep, VertexInstance};
pub use partition::{Chunk, ChunkGraph, DeviceMap, Method};
pub use sim::{
    compare_methods, run_methods, simulate_epoch, ClusterSpec, Comparison, EpochReport, MethodRun,
    Plan, SimConfig, Simulator,
};
pub use stale::{EmbeddingCache, EpochLossTrace, StaleConfig};
