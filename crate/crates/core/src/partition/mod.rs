//! Chunk generation by weighted label propagation, plus the snapshot,
//! sequence and hybrid baseline partitioners.

mod baselines;
mod chunks;
mod propagation;

use serde::{Deserialize, Serialize};

pub use baselines::{partition_pss, partition_pss_ts, partition_pts, DeviceMap};
pub use chunks::{Chunk, ChunkFile, ChunkGraph, ChunkRecord};
pub(crate) use chunks::{fragment_lengths, padded_slots};
pub use propagation::{default_size_cap, init_labels, propagate, propagate_labels, Propagation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Chunks from label propagation, placed by the score-driven assigner.
    Pgc,
    /// Contiguous snapshot blocks.
    Pss,
    /// Equal-count entity sequences.
    Pts,
    /// Snapshot blocks for the structure encoder, sequences for the time
    /// encoder, with a shuffle in between.
    PssTs,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Pgc, Method::Pss, Method::Pts, Method::PssTs];

    pub fn name(self) -> &'static str {
        match self {
            Method::Pgc => "pgc",
            Method::Pss => "pss",
            Method::Pts => "pts",
            Method::PssTs => "pss-ts",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| crate::Error::invalid(format!("unknown method `{s}`")))
    }
}
