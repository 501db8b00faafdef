use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use dynchunk::assign::assign;
use dynchunk::fusion::pack_sequences;
use dynchunk::partition::{default_size_cap, propagate};
use dynchunk::sim::{simulate_epoch, workloads, Plan, SimConfig};
use dynchunk::{Calibration, Method, ModelProfile};
use dynchunk_bench::{graph, sequences};

fn bench_propagate(c: &mut Criterion) {
    let mut group = c.benchmark_group("propagate");
    group.sample_size(20);
    for n in [5_000, 20_000] {
        let g = graph(n);
        group.throughput(Throughput::Elements(n as u64));
        for (name, profile) in [("tgcn", ModelProfile::tgcn(16)), ("dysat", ModelProfile::dysat(16))] {
            group.bench_with_input(BenchmarkId::new(name, n), &g, |b, g| {
                b.iter(|| propagate(g, &profile, default_size_cap(n, 4), 50).unwrap())
            });
        }
    }
    group.finish();
}

fn bench_assign(c: &mut Criterion) {
    let mut group = c.benchmark_group("assign");
    let g = graph(20_000);
    let profile = ModelProfile::tgcn(16);
    for cap in [50, 200] {
        let cg = propagate(&g, &profile, cap, 50).unwrap();
        let w = workloads(&cg, &Calibration::default(), None);
        group.throughput(Throughput::Elements(cg.len() as u64));
        group.bench_with_input(BenchmarkId::new("chunks", cg.len()), &cg, |b, cg| {
            b.iter(|| assign(cg, &w, 4).unwrap())
        });
    }
    group.finish();
}

fn bench_pack(c: &mut Criterion) {
    let mut group = c.benchmark_group("pack_sequences");
    for n in [100, 1_000, 10_000] {
        let seqs = sequences(n, 100, 1);
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &seqs, |b, s| {
            b.iter(|| pack_sequences(s).unwrap())
        });
    }
    group.finish();
}

fn bench_simulate(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate_epoch");
    group.sample_size(20);
    let g = graph(20_000);
    let mut cfg = SimConfig::default();
    cfg.cluster.n_devices = 4;
    for method in Method::ALL {
        let plan = Plan::build(&g, method, &cfg, None).unwrap();
        group.bench_function(method.name(), |b| {
            b.iter(|| simulate_epoch(&g, &plan, &cfg, None, 1).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_propagate, bench_assign, bench_pack, bench_simulate);
criterion_main!(benches);
