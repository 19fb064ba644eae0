use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use braingraph::parallel::{par_map, seq_map};

fn workload(seed: u64) -> f64 {
    // enough floating-point work per item that scheduling overhead
    // does not dominate
    let mut acc = seed as f64 * 1e-3;
    for _ in 0..20_000 {
        acc = (acc.sin() * 1.7 + 0.3).cos();
    }
    acc
}

fn map_backends(c: &mut Criterion) {
    let items: Vec<u64> = (0..64).collect();
    let mut group = c.benchmark_group("map_backends");
    group.bench_with_input(BenchmarkId::new("seq", items.len()), &items, |b, it| {
        b.iter(|| seq_map(it, |&s| workload(s)))
    });
    group.bench_with_input(BenchmarkId::new("par", items.len()), &items, |b, it| {
        b.iter(|| par_map(it, |&s| workload(s)))
    });
    group.finish();
}

criterion_group!(benches, map_backends);
criterion_main!(benches);
