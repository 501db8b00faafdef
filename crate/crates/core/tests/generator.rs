use dynchunk::graph::{generate, LengthDistribution};
use dynchunk::SyntheticSpec;

fn spec(stddev: f64, seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        total_vertices: 3000,
        total_edges: 600,
        snapshots: 20,
        edges_per_snapshot_mean: 30.0,
        edges_per_snapshot_stddev: stddev,
        presence_length: LengthDistribution::Uniform { min: 1, max: 20 },
        feature_dim: 2,
        communities: 1,
        intra_community_prob: 0.0,
        seed,
    }
}

fn sample_variance(counts: &[f64]) -> f64 {
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<f64>() / n;
    counts.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (n - 1.0)
}

#[test]
fn larger_stddev_gives_larger_edge_count_variance() {
    let mut means = Vec::new();
    for stddev in [0.0, 3.0, 6.0, 12.0] {
        let mut total = 0.0;
        for seed in 0..30 {
            let g = generate(&spec(stddev, seed)).unwrap();
            let mut counts = vec![0.0; 20];
            for &(u, _) in g.spatial_edges() {
                counts[g.instance(u).t as usize - 1] += 1.0;
            }
            assert_eq!(counts.iter().sum::<f64>(), 600.0);
            total += sample_variance(&counts);
        }
        means.push(total / 30.0);
    }
    assert_eq!(means[0], 0.0);
    assert!(means.windows(2).all(|w| w[1] > w[0]), "{means:?}");
}

#[test]
fn presence_totals_hold_across_seeds() {
    for seed in 0..30 {
        let g = generate(&spec(6.0, seed)).unwrap();
        assert_eq!(g.num_instances(), 3000);
        for s in g.sequences() {
            assert!((1..=20).contains(&s.members.len()));
        }
    }
}
