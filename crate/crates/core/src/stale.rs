//! Stale embedding aggregation.
//!
//! Receivers keep the last embedding actually transmitted for every boundary
//! vertex. Each epoch a vertex is re-sent only if it moved more than `θ_r`
//! away from that cached copy; otherwise the receiver reuses the cache.
//! Because the comparison is against the last transmitted vector rather than
//! the previous epoch's, the receiver's error never exceeds the largest
//! threshold used.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::graph::{DynamicGraph, VertexInstance};
use crate::{Error, Result};

/// How `θ_r` is derived from `D_r` and the loss trace.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum StaleConfig {
    /// Always transmit.
    Off,
    /// `θ_r = fraction * D_r`.
    Static { fraction: f64 },
    /// `θ_r = D_r / (1 + exp(norm))`: shrinks as the loss falls.
    AdaptiveShrink,
    /// `θ_r = D_r / (1 + exp(-norm))`: grows as the loss falls.
    #[default]
    AdaptiveGrow,
}

impl StaleConfig {
    pub fn validate(&self) -> Result<()> {
        match *self {
            StaleConfig::Static { fraction } if !(0.0..=1.0).contains(&fraction) => Err(
                Error::invalid(format!("static staleness fraction {fraction} not in [0, 1]")),
            ),
            _ => Ok(()),
        }
    }
}

/// Per-epoch training loss, first epoch first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLossTrace {
    pub losses: Vec<f64>,
}

impl EpochLossTrace {
    pub fn new(losses: Vec<f64>) -> Result<Self> {
        match losses.first() {
            Some(&l1) if l1 > 0.0 && l1.is_finite() => Ok(Self { losses }),
            Some(&l1) => Err(Error::invalid(format!("first loss {l1} must be > 0"))),
            None => Err(Error::invalid("empty loss trace")),
        }
    }

    /// `floor + (initial - floor) * exp(-(r - 1) / tau)` for `r = 1..=epochs`.
    pub fn exponential(initial: f64, floor: f64, tau: f64, epochs: usize) -> Result<Self> {
        let losses = (0..epochs)
            .map(|r| floor + (initial - floor) * (-(r as f64) / tau).exp())
            .collect();
        Self::new(losses)
    }

    /// `(l_1 - l_r) / l_1` for 1-based `r`.
    pub fn norm(&self, r: usize) -> Result<f64> {
        let l1 = self.losses[0];
        let lr = r
            .checked_sub(1)
            .and_then(|i| self.losses.get(i))
            .ok_or_else(|| Error::invalid(format!("no loss recorded for epoch {r}")))?;
        Ok((l1 - lr) / l1)
    }
}

/// Threshold for 1-based epoch `r >= 2`, from the loss of epoch `r - 1`.
pub fn threshold(trace: &EpochLossTrace, r: usize, d_r: f64, cfg: StaleConfig) -> Result<f64> {
    if r < 2 {
        return Err(Error::invalid("thresholds start at epoch 2"));
    }
    if !(d_r >= 0.0) {
        return Err(Error::invalid(format!("D_r = {d_r} must be >= 0")));
    }
    if trace.losses[0] <= 0.0 {
        return Err(Error::invalid("first loss must be > 0"));
    }
    Ok(match cfg {
        StaleConfig::Off => 0.0,
        StaleConfig::Static { fraction } => fraction * d_r,
        StaleConfig::AdaptiveShrink => d_r / (1.0 + trace.norm(r - 1)?.exp()),
        StaleConfig::AdaptiveGrow => d_r / (1.0 + (-trace.norm(r - 1)?).exp()),
    })
}

fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Last transmitted embedding per vertex instance.
#[derive(Clone, Debug, Default)]
pub struct EmbeddingCache {
    entries: HashMap<VertexInstance, Vec<f64>>,
}

/// Outcome of one filtering round.
#[derive(Clone, Debug, PartialEq)]
pub struct Filtered {
    pub sent: Vec<VertexInstance>,
    pub reused: Vec<VertexInstance>,
    /// Largest current-vs-cached distance before filtering.
    pub d_r: f64,
}

impl EmbeddingCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, v: VertexInstance) -> Option<&[f64]> {
        self.entries.get(&v).map(Vec::as_slice)
    }

    /// `D_r`: max L2 distance from current to cached over vertices already
    /// cached. Uncached vertices are ignored; they are always sent.
    pub fn max_distance(&self, current: &[(VertexInstance, &[f64])]) -> f64 {
        current
            .iter()
            .filter_map(|(v, x)| self.entries.get(v).map(|c| l2(c, x)))
            .fold(0.0, f64::max)
    }

    /// Sends every vertex that is uncached or moved more than `theta`, and
    /// caches what was sent.
    pub fn filter(&mut self, current: &[(VertexInstance, &[f64])], theta: f64) -> Result<Filtered> {
        let d_r = self.max_distance(current);
        let mut sent = Vec::new();
        let mut reused = Vec::new();
        for &(v, x) in current {
            match self.entries.get_mut(&v) {
                Some(c) if c.len() != x.len() => {
                    return Err(Error::DimensionMismatch {
                        expected: c.len(),
                        got: x.len(),
                    })
                }
                Some(c) if l2(c, x) <= theta => reused.push(v),
                Some(c) => {
                    c.copy_from_slice(x);
                    sent.push(v);
                }
                None => {
                    self.entries.insert(v, x.to_vec());
                    sent.push(v);
                }
            }
        }
        Ok(Filtered { sent, reused, d_r })
    }
}

/// Standalone form of [`EmbeddingCache::filter`].
pub fn filter_transmissions(
    current: &[(VertexInstance, &[f64])],
    cache: &mut EmbeddingCache,
    theta: f64,
) -> Result<Filtered> {
    cache.filter(current, theta)
}

/// Largest gap between what receivers hold and the true embeddings.
pub fn accumulate_error_bound(cache: &EmbeddingCache, current: &[(VertexInstance, &[f64])]) -> f64 {
    cache.max_distance(current)
}

/// The rejected alternative: decide by comparing with the previous epoch's
/// embedding, not the last transmitted one. Small steps are never sent, so
/// the receiver's copy can fall arbitrarily far behind.
#[derive(Clone, Debug, Default)]
pub struct PreviousEpochComparator {
    previous: HashMap<VertexInstance, Vec<f64>>,
    received: HashMap<VertexInstance, Vec<f64>>,
}

impl PreviousEpochComparator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the number of vertices sent.
    pub fn step(&mut self, current: &[(VertexInstance, &[f64])], theta: f64) -> usize {
        let mut sent = 0;
        for &(v, x) in current {
            let moved = self.previous.get(&v).map_or(f64::INFINITY, |p| l2(p, x));
            if moved > theta {
                self.received.insert(v, x.to_vec());
                sent += 1;
            }
            self.previous.insert(v, x.to_vec());
        }
        sent
    }

    pub fn max_gap(&self, current: &[(VertexInstance, &[f64])]) -> f64 {
        current
            .iter()
            .filter_map(|(v, x)| self.received.get(v).map(|c| l2(c, x)))
            .fold(0.0, f64::max)
    }
}

/// Distribution of per-vertex step lengths in the first epoch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StepLength {
    Constant { length: f64 },
    /// Exponential with the given rate. `rate = -ln(0.15)` puts 85% of steps
    /// below 1.0.
    Exponential { rate: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftSpec {
    pub dim: usize,
    pub step: StepLength,
    /// Step lengths are multiplied by this every epoch.
    pub decay: f64,
    /// Keep each vertex's direction fixed instead of redrawing it per epoch.
    #[serde(default)]
    pub persistent_direction: bool,
}

impl Default for DriftSpec {
    fn default() -> Self {
        Self {
            dim: 8,
            step: StepLength::Exponential {
                rate: -(0.15f64.ln()),
            },
            decay: 0.97,
            persistent_direction: false,
        }
    }
}

impl DriftSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.dim > 0
            && self.decay > 0.0
            && self.decay.is_finite()
            && match self.step {
                StepLength::Constant { length } => length >= 0.0 && length.is_finite(),
                StepLength::Exponential { rate } => rate > 0.0 && rate.is_finite(),
            };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid drift spec {self:?}")))
        }
    }
}

/// Synthetic embeddings, one row per vertex instance, that take a random
/// step every epoch. Step lengths shrink by `decay` per epoch.
#[derive(Clone, Debug)]
pub struct DriftStream {
    spec: DriftSpec,
    rng: ChaCha8Rng,
    epoch: usize,
    keys: Vec<VertexInstance>,
    values: Vec<f64>,
    directions: Vec<f64>,
    /// Length of the most recent step per vertex.
    last_step: Vec<f64>,
}

impl DriftStream {
    /// Epoch-1 embeddings are standard normal.
    pub fn new(g: &DynamicGraph, spec: DriftSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let keys = g.instances().to_vec();
        let n = keys.len() * spec.dim;
        let values = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let mut stream = Self {
            spec,
            rng,
            epoch: 1,
            keys,
            values,
            directions: Vec::new(),
            last_step: vec![0.0; g.num_instances()],
        };
        if spec.persistent_direction {
            stream.directions = stream.draw_directions();
        }
        Ok(stream)
    }

    fn draw_directions(&mut self) -> Vec<f64> {
        let d = self.spec.dim;
        let mut dirs: Vec<f64> = (0..self.keys.len() * d)
            .map(|_| self.rng.sample(StandardNormal))
            .collect();
        for row in dirs.chunks_mut(d) {
            let n = row.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            row.iter_mut().for_each(|x| *x /= n);
        }
        dirs
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn spec(&self) -> &DriftSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn key(&self, idx: usize) -> VertexInstance {
        self.keys[idx]
    }

    pub fn row(&self, idx: usize) -> &[f64] {
        let d = self.spec.dim;
        &self.values[idx * d..(idx + 1) * d]
    }

    pub fn last_step(&self) -> &[f64] {
        &self.last_step
    }

    /// `(instance, embedding)` pairs for the given dense indices.
    pub fn view(&self, indices: &[usize]) -> Vec<(VertexInstance, &[f64])> {
        indices.iter().map(|&i| (self.keys[i], self.row(i))).collect()
    }

    /// Moves every embedding one step.
    pub fn advance(&mut self) {
        let scale = self.spec.decay.powi(self.epoch as i32 - 1);
        let d = self.spec.dim;
        let lengths: Vec<f64> = match self.spec.step {
            StepLength::Constant { length } => vec![length * scale; self.keys.len()],
            StepLength::Exponential { rate } => {
                let exp = Exp::new(rate).expect("validated rate");
                (0..self.keys.len()).map(|_| exp.sample(&mut self.rng) * scale).collect()
            }
        };
        let dirs = if self.spec.persistent_direction {
            std::mem::take(&mut self.directions)
        } else {
            self.draw_directions()
        };
        for (i, &len) in lengths.iter().enumerate() {
            for k in 0..d {
                self.values[i * d + k] += len * dirs[i * d + k];
            }
        }
        if self.spec.persistent_direction {
            self.directions = dirs;
        }
        self.last_step = lengths;
        self.epoch += 1;
    }
}

/// Embeddings of every instance for epochs `1..=epochs`, row-major per epoch.
pub fn drift_stream(g: &DynamicGraph, epochs: usize, spec: DriftSpec, seed: u64) -> Result<Vec<Vec<f64>>> {
    if epochs == 0 {
        return Err(Error::invalid("epochs must be >= 1"));
    }
    let mut s = DriftStream::new(g, spec, seed)?;
    let mut out = vec![s.values.clone()];
    for _ in 1..epochs {
        s.advance();
        out.push(s.values.clone());
    }
    Ok(out)
}

/// Per-epoch staleness accounting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StaleReport {
    pub epoch: usize,
    pub theta: f64,
    pub d_r: f64,
    pub sent: usize,
    pub reused: usize,
    pub bytes_sent: u64,
    pub bytes_avoided: u64,
    pub reduction_pct: f64,
}

impl StaleReport {
    pub fn new(epoch: usize, theta: f64, d_r: f64, sent: usize, reused: usize, bytes_sent: u64, bytes_avoided: u64) -> Self {
        let total = bytes_sent + bytes_avoided;
        let reduction_pct = if total == 0 {
            0.0
        } else {
            100.0 * bytes_avoided as f64 / total as f64
        };
        Self {
            epoch,
            theta,
            d_r,
            sent,
            reused,
            bytes_sent,
            bytes_avoided,
            reduction_pct,
        }
    }
}
