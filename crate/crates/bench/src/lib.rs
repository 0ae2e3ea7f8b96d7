//! Shared workloads for the benchmarks.

use std::sync::Arc;

use tmsim::graph::GraphSpec;
use tmsim::kernels::{run_kernel, KernelKind, KernelParams, KernelRun};
use tmsim::sim::TmConfig;

/// Kernel run over a uniform-random graph, weighted when the kernel needs it.
pub fn workload(kind: KernelKind, n: usize, avg_degree: f64, gpes: usize) -> KernelRun {
    let spec = GraphSpec::UniformRandom {
        n,
        avg_degree,
        seed: 1,
        max_weight: kind.needs_weights().then_some(16),
    };
    let g = Arc::new(spec.build().expect("graph"));
    let params = KernelParams {
        iters: 2,
        ..Default::default()
    };
    run_kernel(kind, g, gpes, params, 64).expect("kernel")
}

/// A 2x8 machine; small enough to iterate on quickly.
pub fn small_machine(pf: bool) -> TmConfig {
    let mut c = TmConfig::new(2, 8);
    c.pf.enabled = pf;
    c
}
