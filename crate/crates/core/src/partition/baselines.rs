use serde::{Deserialize, Serialize};

use crate::graph::DynamicGraph;
use crate::{Error, Result};

/// Device of every instance during the structure and the time encoder.
/// Only the hybrid baseline uses different maps.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceMap {
    pub n_devices: usize,
    pub structure: Vec<usize>,
    pub time: Vec<usize>,
}

impl DeviceMap {
    pub fn unified(device_of: Vec<usize>, n_devices: usize) -> Self {
        Self {
            n_devices,
            time: device_of.clone(),
            structure: device_of,
        }
    }

    pub fn is_split(&self) -> bool {
        self.structure != self.time
    }
}

/// Block of `item` when `count` items are split into `n` contiguous blocks
/// whose sizes differ by at most one (larger blocks first).
fn block_of(item: usize, count: usize, n: usize) -> usize {
    let q = count / n;
    let r = count % n;
    let big = r * (q + 1);
    if item < big {
        item / (q + 1)
    } else {
        r + (item - big) / q
    }
}

fn check_devices(n_devices: usize, units: usize, what: &str) -> Result<()> {
    if n_devices == 0 {
        return Err(Error::invalid("n_devices must be >= 1"));
    }
    if n_devices > units {
        return Err(Error::invalid(format!(
            "{n_devices} devices exceed the {units} {what}"
        )));
    }
    Ok(())
}

/// Contiguous blocks of equally many snapshots per device.
pub fn partition_pss(g: &DynamicGraph, n_devices: usize) -> Result<Vec<usize>> {
    let t = g.num_snapshots() as usize;
    check_devices(n_devices, t, "snapshots")?;
    Ok(g.instances()
        .iter()
        .map(|v| block_of(v.t as usize - 1, t, n_devices))
        .collect())
}

/// Equally many whole entity sequences per device, by ascending entity id.
pub fn partition_pts(g: &DynamicGraph, n_devices: usize) -> Result<Vec<usize>> {
    let n_seq = g.num_entities();
    check_devices(n_devices, n_seq, "entities")?;
    let mut device = vec![0; g.num_instances()];
    for (s, seq) in g.sequences().iter().enumerate() {
        let d = block_of(s, n_seq, n_devices);
        for &m in &seq.members {
            device[m] = d;
        }
    }
    Ok(device)
}

/// Snapshot blocks for the structure encoder, sequences for the time encoder.
pub fn partition_pss_ts(g: &DynamicGraph, n_devices: usize) -> Result<DeviceMap> {
    Ok(DeviceMap {
        n_devices,
        structure: partition_pss(g, n_devices)?,
        time: partition_pts(g, n_devices)?,
    })
}
