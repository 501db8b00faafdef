//! Two-network workload predictor: one MLP for the structure encoder, one for
//! the time encoder. Trained with MAPE loss and Adam.

use std::path::Path;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{Adam, LayerData, Mlp};
use super::{mape, ChunkStats};
use crate::{Error, Result};

const FORMAT_VERSION: u32 = 1;
const NF: usize = ChunkStats::FEATURES;

/// A chunk with measured per-encoder execution times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub stats: ChunkStats,
    pub structure_ms: f64,
    pub time_ms: f64,
}

impl TrainingSample {
    pub fn measured_ms(&self) -> f64 {
        self.structure_ms + self.time_ms
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub validation_fraction: f64,
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 128,
            learning_rate: 1e-3,
            validation_fraction: 0.1,
            hidden: vec![256, 256, 256],
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Standardizer {
    mean: [f64; NF],
    std: [f64; NF],
}

impl Standardizer {
    fn fit(rows: &[[f64; NF]]) -> Self {
        let n = rows.len().max(1) as f64;
        let mut mean = [0.0; NF];
        for r in rows {
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x / n;
            }
        }
        let mut std = [0.0; NF];
        for r in rows {
            for ((s, x), m) in std.iter_mut().zip(r).zip(&mean) {
                *s += (x - m) * (x - m) / n;
            }
        }
        // Constant features map to zero instead of dividing by zero.
        for (s, m) in std.iter_mut().zip(&mean) {
            let sd = s.sqrt();
            *s = if sd > 1e-9 * (1.0 + m.abs()) { sd } else { 1.0 };
        }
        Self { mean, std }
    }

    fn apply(&self, f: &[f64; NF]) -> [f32; NF] {
        std::array::from_fn(|i| ((f[i] - self.mean[i]) / self.std[i]) as f32)
    }

    fn matrix(&self, stats: &[&ChunkStats]) -> Array2<f32> {
        let mut x = Array2::zeros((stats.len(), NF));
        for (mut row, s) in x.rows_mut().into_iter().zip(stats) {
            row.assign(&Array1::from(self.apply(&s.features()).to_vec()));
        }
        x
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Head {
    net: Mlp<f32>,
    /// Multiplies the network output; set to the mean training target so the
    /// network learns values near 1.
    scale: f64,
}

/// Learned chunk workload `g_a` in milliseconds.
#[derive(Clone, Debug, PartialEq)]
pub struct Predictor {
    norm: Standardizer,
    structure: Head,
    time: Head,
    pub train_mape: Option<f64>,
    pub validation_mape: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct HeadFile {
    scale: f64,
    layers: Vec<LayerData<f32>>,
}

#[derive(Serialize, Deserialize)]
struct PredictorFile {
    version: u32,
    feature_mean: [f64; NF],
    feature_std: [f64; NF],
    structure: HeadFile,
    time: HeadFile,
    train_mape: Option<f64>,
    validation_mape: Option<f64>,
}

fn layer_sizes(hidden: &[usize]) -> Vec<usize> {
    let mut sizes = vec![NF];
    sizes.extend_from_slice(hidden);
    sizes.push(1);
    sizes
}

impl Predictor {
    /// All-zero networks; every prediction clamps to 0.
    pub fn untrained(hidden: &[usize]) -> Self {
        let sizes = layer_sizes(hidden);
        let head = || Head {
            net: Mlp::zeros(&sizes),
            scale: 1.0,
        };
        Self {
            norm: Standardizer {
                mean: [0.0; NF],
                std: [1.0; NF],
            },
            structure: head(),
            time: head(),
            train_mape: None,
            validation_mape: None,
        }
    }

    pub fn train(samples: &[TrainingSample], cfg: &TrainConfig) -> Result<Self> {
        if samples.len() < 100 {
            return Err(Error::invalid(format!(
                "need at least 100 samples, got {}",
                samples.len()
            )));
        }
        if let Some(s) = samples
            .iter()
            .find(|s| !(s.structure_ms > 0.0 && s.time_ms > 0.0))
        {
            return Err(Error::invalid(format!(
                "measured times must be positive (got {} / {})",
                s.structure_ms, s.time_ms
            )));
        }
        if cfg.batch_size == 0 || cfg.hidden.is_empty() {
            return Err(Error::invalid("batch size and hidden layers must be non-empty"));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.shuffle(&mut rng);
        let n_val = ((samples.len() as f64 * cfg.validation_fraction).round() as usize)
            .min(samples.len() - 1);
        let (val_idx, train_idx) = order.split_at(n_val);

        let train: Vec<&TrainingSample> = train_idx.iter().map(|&i| &samples[i]).collect();
        let rows: Vec<[f64; NF]> = train.iter().map(|s| s.stats.features()).collect();
        let norm = Standardizer::fit(&rows);
        let stats: Vec<&ChunkStats> = train.iter().map(|s| &s.stats).collect();
        let x = norm.matrix(&stats);

        let sizes = layer_sizes(&cfg.hidden);
        let mut heads = Vec::new();
        for encoder in 0..2 {
            let target = |s: &TrainingSample| if encoder == 0 { s.structure_ms } else { s.time_ms };
            let y: Array1<f32> = train.iter().map(|s| target(s) as f32).collect();
            let scale = train.iter().map(|s| target(s)).sum::<f64>() / train.len() as f64;
            let mut net = Mlp::<f32>::new(&sizes, 1.0, &mut rng);
            fit(&mut net, &x, &y, scale as f32, cfg, &mut rng)?;
            heads.push(Head { net, scale });
        }
        let time = heads.pop().unwrap();
        let structure = heads.pop().unwrap();
        let mut p = Self {
            norm,
            structure,
            time,
            train_mape: None,
            validation_mape: None,
        };
        p.train_mape = Some(p.evaluate(&train)?);
        if !val_idx.is_empty() {
            let val: Vec<&TrainingSample> = val_idx.iter().map(|&i| &samples[i]).collect();
            p.validation_mape = Some(p.evaluate(&val)?);
        }
        Ok(p)
    }

    fn evaluate(&self, samples: &[&TrainingSample]) -> Result<f64> {
        let stats: Vec<&ChunkStats> = samples.iter().map(|s| &s.stats).collect();
        let pred = self.predict_many(&stats);
        let pairs: Vec<(f64, f64)> = pred
            .into_iter()
            .zip(samples)
            .map(|(p, s)| (p, s.measured_ms()))
            .collect();
        mape(&pairs)
    }

    /// `g_a`: structure plus time prediction, clamped at zero.
    pub fn predict(&self, stats: &ChunkStats) -> f64 {
        self.predict_many(&[stats])[0]
    }

    pub fn predict_many(&self, stats: &[&ChunkStats]) -> Vec<f64> {
        if stats.is_empty() {
            return Vec::new();
        }
        let x = self.norm.matrix(stats);
        let s = self.structure.net.forward(x.view());
        let t = self.time.net.forward(x.view());
        s.iter()
            .zip(t.iter())
            .map(|(&a, &b)| {
                let v = self.structure.scale * a as f64 + self.time.scale * b as f64;
                v.max(0.0)
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let head = |h: &Head| HeadFile {
            scale: h.scale,
            layers: h.net.layers(),
        };
        let file = PredictorFile {
            version: FORMAT_VERSION,
            feature_mean: self.norm.mean,
            feature_std: self.norm.std,
            structure: head(&self.structure),
            time: head(&self.time),
            train_mape: self.train_mape,
            validation_mape: self.validation_mape,
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: PredictorFile = serde_json::from_str(text)?;
        if file.version != FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported predictor format version {}",
                file.version
            )));
        }
        let head = |h: HeadFile| -> Result<Head> {
            let net = Mlp::from_layers(h.layers)?;
            if net.input_dim() != NF {
                return Err(Error::DimensionMismatch {
                    expected: NF,
                    got: net.input_dim(),
                });
            }
            Ok(Head {
                net,
                scale: h.scale,
            })
        };
        Ok(Self {
            norm: Standardizer {
                mean: file.feature_mean,
                std: file.feature_std,
            },
            structure: head(file.structure)?,
            time: head(file.time)?,
            train_mape: file.train_mape,
            validation_mape: file.validation_mape,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

fn fit(
    net: &mut Mlp<f32>,
    x: &Array2<f32>,
    y: &Array1<f32>,
    scale: f32,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let n = x.nrows();
    let mut opt = Adam::new(net, cfg.learning_rate as f32);
    let mut idx: Vec<usize> = (0..n).collect();
    let mut xb = Array2::<f32>::zeros((cfg.batch_size, NF));
    let mut yb = Array1::<f32>::zeros(cfg.batch_size);
    for epoch in 0..cfg.epochs {
        // Cosine decay to 5% of the initial rate.
        let progress = epoch as f64 / cfg.epochs.max(1) as f64;
        let lr = cfg.learning_rate * (0.05 + 0.95 * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos()));
        opt.set_lr(lr as f32);
        idx.shuffle(rng);
        let mut epoch_loss = 0.0f64;
        for batch in idx.chunks(cfg.batch_size) {
            let b = batch.len();
            if b != xb.nrows() {
                xb = Array2::zeros((b, NF));
                yb = Array1::zeros(b);
            }
            for (r, &i) in batch.iter().enumerate() {
                xb.row_mut(r).assign(&x.row(i));
                yb[r] = y[i];
            }
            let (loss, grads) = net.mape_loss_and_grad(xb.view(), yb.view(), scale);
            if !loss.is_finite() {
                return Err(Error::Diverged(format!(
                    "non-finite loss at epoch {epoch}"
                )));
            }
            epoch_loss += loss as f64 * b as f64;
            opt.step(net, &grads);
        }
        if !epoch_loss.is_finite() {
            return Err(Error::Diverged(format!("non-finite loss at epoch {epoch}")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{synthetic_samples, Calibration};

    #[test]
    fn untrained_predicts_zero() {
        let p = Predictor::untrained(&[8, 8, 8]);
        let s = ChunkStats {
            n_vertices: 10,
            n_edges: 20,
            total_sequence_length: 10,
            feature_dim: 2,
            layer_dims: vec![4, 4],
        };
        assert_eq!(p.predict(&s), 0.0);
    }

    #[test]
    fn rejects_too_few_or_nonpositive_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let c = Calibration::default();
        let few = synthetic_samples(50, &c, 0.05, &mut rng);
        assert!(Predictor::train(&few, &TrainConfig::default()).is_err());
        let mut bad = synthetic_samples(100, &c, 0.05, &mut rng);
        bad[3].time_ms = 0.0;
        assert!(Predictor::train(&bad, &TrainConfig::default()).is_err());
    }

    #[test]
    fn constant_target_converges_and_round_trips() {
        let stats = ChunkStats {
            n_vertices: 100,
            n_edges: 300,
            total_sequence_length: 200,
            feature_dim: 4,
            layer_dims: vec![8, 8],
        };
        let samples: Vec<_> = (0..200)
            .map(|_| TrainingSample {
                stats: stats.clone(),
                structure_ms: 3.0,
                time_ms: 1.0,
            })
            .collect();
        let cfg = TrainConfig {
            epochs: 20,
            hidden: vec![16, 16, 16],
            ..TrainConfig::default()
        };
        let p = Predictor::train(&samples, &cfg).unwrap();
        assert!((p.predict(&stats) - 4.0).abs() < 0.1);
        assert!(p.validation_mape.unwrap() < 0.03);
        assert_eq!(p.predict(&stats), p.predict(&stats));

        let back = Predictor::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(back.predict(&stats), p.predict(&stats));
    }
}
