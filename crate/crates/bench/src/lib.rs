//! Shared fixtures for the benchmarks.

use dynchunk::graph::generate;
use dynchunk::{DynamicGraph, SyntheticSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Synthetic graph with `instances` vertex instances over 20 snapshots.
pub fn graph(instances: usize) -> DynamicGraph {
    generate(&SyntheticSpec::scaled(instances, 20, 0.5, 0)).expect("feasible spec")
}

/// `(entity, length)` pairs with lengths in `1..=max_len`.
pub fn sequences(n: usize, max_len: usize, seed: u64) -> Vec<(u64, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n as u64).map(|e| (e, rng.random_range(1..=max_len))).collect()
}
