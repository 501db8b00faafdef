use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dynchunk::cost::TrainConfig;
use dynchunk::{Method, SimConfig, SyntheticSpec};
use serde::{Deserialize, Serialize};

/// Everything one pipeline run needs. Read from TOML; flags override keys.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub method: Method,
    pub epochs: usize,
    pub graph: GraphSource,
    pub sim: SimConfig,
    pub predictor: PredictorSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            method: Method::Pgc,
            epochs: 10,
            graph: GraphSource::default(),
            sim: SimConfig::default(),
            predictor: PredictorSection::default(),
        }
    }
}

/// An edge-list file, or a synthetic spec when `path` is unset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphSource {
    pub path: Option<PathBuf>,
    pub synthetic: SyntheticSpec,
}

impl Default for GraphSource {
    fn default() -> Self {
        Self {
            path: None,
            synthetic: SyntheticSpec::scaled(2000, 20, 0.5, 0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictorSection {
    /// Trained predictor used for chunk workloads. Falls back to
    /// `<out>/predictor.json`, then to ground-truth costs.
    pub path: Option<PathBuf>,
    pub samples: usize,
    /// Relative half-width of the uniform noise on training targets.
    pub noise: f64,
    pub train: TrainConfig,
}

impl Default for PredictorSection {
    fn default() -> Self {
        Self {
            path: None,
            samples: 50_000,
            noise: 0.05,
            train: TrainConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Propagates the run seed into every seeded component.
    pub fn apply_seed(&mut self) {
        self.sim.seed = self.seed;
        self.graph.synthetic.seed = self.seed;
        self.predictor.train.seed = self.seed;
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            bail!("epochs must be >= 1");
        }
        self.sim.validate()?;
        if let Some(p) = &self.graph.path {
            if !p.exists() {
                bail!("graph file {} does not exist", p.display());
            }
        }
        if let Some(p) = &self.predictor.path {
            if !p.exists() {
                bail!("predictor file {} does not exist", p.display());
            }
        }
        if !(0.0..1.0).contains(&self.predictor.noise) {
            bail!("predictor noise {} not in [0, 1)", self.predictor.noise);
        }
        Ok(())
    }
}
