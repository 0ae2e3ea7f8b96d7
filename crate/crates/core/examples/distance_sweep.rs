//! Sweeps the prefetch distance for one kernel and graph.
//!
//! cargo run --release --example distance_sweep -- sssp uniform:n=10000,deg=8 private

use std::sync::Arc;

use tmsim::graph::GraphSpec;
use tmsim::harness::AUTO_MAX_WEIGHT;
use tmsim::kernels::{run_kernel, KernelKind, KernelParams};
use tmsim::mem::CacheMode;
use tmsim::metrics::{contention_ratio, miss_rate, prefetch_accuracy};
use tmsim::sim::{run_simulation, TmConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let kernel: KernelKind = args.first().map_or("pagerank", |s| s.as_str()).parse()?;
    let graph = GraphSpec::parse_compact(args.get(1).map_or("uniform:n=10000,deg=8", |s| s.as_str()))?;
    let mode = match args.get(2).map(|s| s.as_str()) {
        Some("private") => CacheMode::Private,
        _ => CacheMode::Shared,
    };

    let g = graph.build()?;
    let g = if kernel.needs_weights() && !g.is_weighted() {
        g.with_random_weights(AUTO_MAX_WEIGHT, 1)
    } else {
        g
    };
    let cfg = TmConfig {
        mode,
        ..TmConfig::default()
    };
    let params = KernelParams {
        iters: 3,
        ..Default::default()
    };
    let kr = run_kernel(kernel, Arc::new(g), cfg.num_gpes(), params, cfg.l1.block_bytes)?;
    println!("{} on {graph} ({mode}), {} refs", kernel.name(), kr.total_refs());

    let mut base = None;
    for d in [0, 1, 2, 4, 8, 16] {
        let mut c = cfg;
        c.pf.enabled = d > 0;
        c.pf.distance = d.max(1);
        let r = run_simulation(&kr, &c)?;
        let b = *base.get_or_insert(r.total_cycles);
        let acc = prefetch_accuracy(&r.stats).map_or("-".into(), |a| format!("{a:.3}"));
        println!(
            "d={d:<2} cycles={:>9} speedup={:.3} miss={:.4} accuracy={acc} contention={:.3}",
            r.total_cycles,
            b as f64 / r.total_cycles as f64,
            miss_rate(&r.stats)?,
            contention_ratio(&r.stats).unwrap_or(0.0),
        );
    }
    Ok(())
}
