mod support;

use dynchunk::assign::assign;
use dynchunk::cost::total_message_bytes;
use dynchunk::fusion::{naive_padding, pack_sequences, plan_device_fusion};
use dynchunk::partition::propagate;
use dynchunk::sim::{simulate_epoch, Plan, SimConfig};
use dynchunk::{MemoryCoeffs, Method, ModelProfile};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::RawGraph;

fn profile(k: u8) -> ModelProfile {
    match k % 3 {
        0 => ModelProfile::tgcn(4),
        1 => ModelProfile::dysat(4),
        _ => ModelProfile::mpnn_lstm(4),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chunks_cover_once_within_cap(seed in any::<u64>(), cap in 1usize..30, k in any::<u8>()) {
        let raw = RawGraph::random(&mut ChaCha8Rng::seed_from_u64(seed), 80, 5);
        let g = raw.build();
        let p = profile(k);
        let cg = propagate(&g, &p, cap, 50).unwrap();
        let mut seen = vec![0u32; g.num_instances()];
        for c in &cg.chunks {
            prop_assert!(!c.members.is_empty() && c.members.len() <= cap);
            for &m in &c.members {
                seen[m] += 1;
                prop_assert_eq!(cg.chunk_of[m], c.id);
            }
        }
        prop_assert!(seen.iter().all(|&s| s == 1));
        prop_assert_eq!(cg.internal_cost + cg.total_inter_cost(), total_message_bytes(&g, &p));
    }

    #[test]
    fn assignment_places_every_chunk(seed in any::<u64>(), n in 1usize..6) {
        let raw = RawGraph::random(&mut ChaCha8Rng::seed_from_u64(seed), 60, 4);
        let g = raw.build();
        let cg = propagate(&g, &ModelProfile::tgcn(4), 6, 50).unwrap();
        let w: Vec<f64> = cg.chunks.iter().map(|c| c.members.len() as f64).collect();
        let a = assign(&cg, &w, n).unwrap();
        a.validate(cg.len()).unwrap();
        let total: f64 = a.loads.iter().sum();
        prop_assert!((total - w.iter().sum::<f64>()).abs() < 1e-9);
    }

    #[test]
    fn fusion_respects_budget(seed in any::<u64>(), extra in 0u64..40_000) {
        let raw = RawGraph::random(&mut ChaCha8Rng::seed_from_u64(seed), 60, 4);
        let g = raw.build();
        let cg = propagate(&g, &ModelProfile::tgcn(4), 5, 50).unwrap();
        let w: Vec<f64> = cg.chunks.iter().map(|c| c.members.len() as f64).collect();
        let a = assign(&cg, &w, 2).unwrap();
        let coeffs = MemoryCoeffs::default();
        let budget = coeffs.fixed + 5 * 1024 * 8 + extra;
        if let Ok(plan) = plan_device_fusion(&g, &cg, &a, budget, &coeffs) {
            plan.validate(&a).unwrap();
            prop_assert!(plan.groups().all(|grp| grp.memory_bytes <= budget));
        }
    }

    #[test]
    fn packing_never_pads_more_than_naive(lens in prop::collection::vec(1usize..40, 0..30)) {
        let seqs: Vec<(u64, usize)> = lens.iter().enumerate().map(|(i, &l)| (i as u64, l)).collect();
        let b = pack_sequences(&seqs).unwrap();
        prop_assert!(b.padding_count <= naive_padding(&lens));
        let mut got = b.sequence_lengths();
        got.sort_unstable();
        let mut want = lens.clone();
        want.sort_unstable();
        prop_assert_eq!(got, want);
        for (row, mask) in b.rows.iter().zip(&b.mask) {
            prop_assert_eq!(row.len(), b.row_length);
            prop_assert_eq!(mask.len(), b.row_length.saturating_sub(1));
        }
    }

    #[test]
    fn traffic_plus_internal_is_constant(seed in any::<u64>(), k in any::<u8>(), n in 1usize..5) {
        let raw = RawGraph::random(&mut ChaCha8Rng::seed_from_u64(seed), 60, 4);
        let g = raw.build();
        let mut cfg = SimConfig::default();
        cfg.profile = profile(k);
        cfg.cluster.n_devices = n;
        let total = total_message_bytes(&g, &cfg.profile);
        let too_many = n > g.num_snapshots() as usize || n > g.num_entities();
        for m in Method::ALL {
            let Ok(plan) = Plan::build(&g, m, &cfg, None) else {
                prop_assert!(too_many && m != Method::Pgc);
                continue;
            };
            let r = simulate_epoch(&g, &plan, &cfg, None, 1).unwrap();
            let mut internal = 0;
            let s = plan.structure_devices();
            let t = plan.time_devices();
            dynchunk::cost::for_each_message(&g, &cfg.profile, |msg| {
                let d = if msg.kind == dynchunk::EdgeKind::Spatial { &s } else { &t };
                if d[msg.src] == d[msg.dst] {
                    internal += msg.bytes;
                }
            });
            prop_assert_eq!(r.spatial_bytes + r.temporal_bytes + internal, total);
            prop_assert!(r.lambda >= 1.0);
            if n == 1 {
                prop_assert_eq!(r.traffic_bytes, 0);
            }
        }
    }

    #[test]
    fn fusion_never_increases_loading(seed in any::<u64>()) {
        let raw = RawGraph::random(&mut ChaCha8Rng::seed_from_u64(seed), 80, 5);
        let g = raw.build();
        let mut cfg = SimConfig::default();
        cfg.cluster.n_devices = 2;
        cfg.size_cap = Some(6);
        let fused = Plan::build(&g, Method::Pgc, &cfg, None).unwrap();
        cfg.fusion = false;
        let plain = Plan::build(&g, Method::Pgc, &cfg, None).unwrap();
        let a = simulate_epoch(&g, &fused, &cfg, None, 1).unwrap();
        let b = simulate_epoch(&g, &plain, &cfg, None, 1).unwrap();
        prop_assert!(a.loading_bytes <= b.loading_bytes);
        prop_assert_eq!(a.traffic_bytes, b.traffic_bytes);
        if g.spatial_edges().is_empty() && g.temporal_links().is_empty() {
            prop_assert_eq!(a.loading_bytes, b.loading_bytes);
        }
    }
}
