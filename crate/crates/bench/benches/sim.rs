use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use tmsim::kernels::KernelKind;
use tmsim::mem::{CacheBank, CacheConfig};
use tmsim::sim::run_simulation;
use tmsim_bench::{small_machine, workload};

fn cache_access(c: &mut Criterion) {
    c.bench_function("l1_access_stream", |b| {
        let mut bank = CacheBank::new(CacheConfig::l1_default()).unwrap();
        let mut x = 0u64;
        b.iter(|| {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let block = (x >> 40) & !63;
            let r = bank.access(block, false, 0);
            if r == tmsim::mem::Access::Miss {
                bank.fill(block);
            }
            black_box(r)
        })
    });
}

fn kernels(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate");
    group.sample_size(10);
    for kind in [KernelKind::Pagerank, KernelKind::Bfs, KernelKind::Sssp] {
        let kr = workload(kind, 2000, 6.0, 16);
        for pf in [false, true] {
            let cfg = small_machine(pf);
            let id = BenchmarkId::new(kind.name(), if pf { "pf" } else { "base" });
            group.bench_with_input(id, &cfg, |b, cfg| b.iter(|| run_simulation(&kr, cfg).unwrap().total_cycles));
        }
    }
    group.finish();
}

fn kernel_generation(c: &mut Criterion) {
    c.bench_function("pagerank_streams_n2000", |b| {
        b.iter(|| workload(KernelKind::Pagerank, black_box(2000), 6.0, 16).total_refs())
    });
}

criterion_group!(benches, cache_access, kernels, kernel_generation);
criterion_main!(benches);
