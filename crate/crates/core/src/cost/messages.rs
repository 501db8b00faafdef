use super::{edge_traffic, EdgeKind, ModelProfile, TemporalFanout};
use crate::graph::DynamicGraph;

/// One embedding transfer per epoch: `src` sends to `dst`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Message {
    pub src: usize,
    pub dst: usize,
    pub kind: EdgeKind,
    pub bytes: u64,
}

/// Every aggregation message the model sends over `g` in one epoch.
///
/// Spatial edges carry one message per direction. Temporal messages flow
/// from earlier to later instances: from the predecessor only, or from every
/// earlier instance under [`TemporalFanout::AllSnapshots`].
pub fn for_each_message(g: &DynamicGraph, profile: &ModelProfile, mut f: impl FnMut(Message)) {
    let s = edge_traffic(profile, EdgeKind::Spatial);
    if s > 0 {
        for &(u, v) in g.spatial_edges() {
            f(Message { src: u, dst: v, kind: EdgeKind::Spatial, bytes: s });
            f(Message { src: v, dst: u, kind: EdgeKind::Spatial, bytes: s });
        }
    }
    let t = edge_traffic(profile, EdgeKind::Temporal);
    if t == 0 {
        return;
    }
    match profile.temporal_fanout {
        TemporalFanout::PreviousOnly => {
            for &(a, b) in g.temporal_links() {
                f(Message { src: a, dst: b, kind: EdgeKind::Temporal, bytes: t });
            }
        }
        TemporalFanout::AllSnapshots => {
            for seq in g.sequences() {
                for (j, &dst) in seq.members.iter().enumerate() {
                    for &src in &seq.members[..j] {
                        f(Message { src, dst, kind: EdgeKind::Temporal, bytes: t });
                    }
                }
            }
        }
    }
}

/// Total message bytes of one epoch; independent of any partitioning.
pub fn total_message_bytes(g: &DynamicGraph, profile: &ModelProfile) -> u64 {
    let mut total = 0;
    for_each_message(g, profile, |m| total += m.bytes);
    total
}
