mod common;

use std::collections::HashSet;

use proptest::prelude::*;
use tmsim::graph::gen_uniform_random;
use tmsim::kernels::{GpeStream, KernelKind, MemRef, RefKind};
use tmsim::mem::{Access, CacheMode, HbmConfig};
use tmsim::metrics::{check_conservation, flat_record, placement_accuracy};
use tmsim::sim::{run_simulation, run_simulation_logged, SimResult, TmConfig};

use common::{kernel, small_tm};

fn kinds() -> impl Strategy<Value = KernelKind> {
    prop_oneof![Just(KernelKind::Pagerank), Just(KernelKind::Bfs), Just(KernelKind::Sssp)]
}

/// One GPE, one cold load, HBM latency pinned at 100:
/// cycle 0 L1 miss, packet enqueued; 1 crossbar delivers, L2 miss;
/// 2 HBM request issued, done at 2 + 8 (channel occupancy) + 100 = 110;
/// 110 L2 fill; 111 L1 fill wakes the load.
#[test]
fn single_cold_load_hand_walk() {
    let mut kr = kernel(KernelKind::Pagerank, gen_uniform_random(4, 1.0, 1).unwrap(), 1, 1);
    let address = kr.streams[0].refs[0].address;
    kr.streams = vec![GpeStream {
        refs: vec![MemRef {
            address,
            gpe_id: 0,
            kind: RefKind::Load,
            compute_gap: 0,
        }],
        phase_ends: vec![1],
    }];
    let mut cfg = TmConfig::new(1, 1);
    cfg.pf.enabled = false;
    cfg.hbm = HbmConfig {
        latency_min: 100,
        latency_max: 100,
        ..HbmConfig::default()
    };
    let r = run_simulation(&kr, &cfg).unwrap();
    assert_eq!(r.total_cycles, 111);
    assert_eq!(r.stats.hbm.reads, 1);
    assert_eq!(r.stats.l1_total().misses, 1);
}

#[test]
fn zero_hbm_latency_never_slows_down() {
    let kr = kernel(KernelKind::Bfs, gen_uniform_random(800, 6.0, 4).unwrap(), 16, 1);
    for pf in [false, true] {
        let slow = small_tm(pf);
        let mut fast = slow;
        fast.hbm.latency_min = 0;
        fast.hbm.latency_max = 0;
        let a = run_simulation(&kr, &slow).unwrap().total_cycles;
        let b = run_simulation(&kr, &fast).unwrap().total_cycles;
        assert!(b <= a, "{b} > {a}");
    }
}

fn check_log(r: &SimResult, cfg: &TmConfig) -> Result<(), TestCaseError> {
    let log = r.log.as_ref().unwrap();
    let s = &r.stats;

    // Port discipline: one PFHR access per bank per cycle.
    let mut seen = HashSet::new();
    for e in &log.pfhr_ports {
        prop_assert!(seen.insert((e.cycle, e.tile, e.bank)), "two PFHR accesses at {:?}", e);
    }
    prop_assert_eq!(log.pfhr_ports.len() as u64, s.pf_total().pfhr_accesses);

    prop_assert!(log.squashes.iter().all(|q| q.requester_gpe == q.victim_gpe));
    prop_assert_eq!(log.squashes.len() as u64, s.pfhr_squashes);
    prop_assert!(log.inherit.iter().all(|(p, c)| p == c));

    // Dual accounting: per-bank counters against the event log.
    let banks = cfg.num_gpes();
    let mut acc = vec![0u64; banks];
    let mut hits = vec![0u64; banks];
    let mut merges = vec![0u64; banks];
    let mut fills = vec![0u64; banks];
    let mut pf_fills = vec![0u64; banks];
    let mut first = vec![0u64; banks];
    for &(b, a) in &log.l1_accesses {
        acc[b as usize] += 1;
        hits[b as usize] += u64::from(a == Access::Hit);
        merges[b as usize] += u64::from(a == Access::Merged);
    }
    for &(b, p) in &log.l1_fills {
        fills[b as usize] += 1;
        pf_fills[b as usize] += u64::from(p);
    }
    for &b in &log.prefetch_first_use {
        first[b as usize] += 1;
    }
    for (i, st) in s.l1.iter().enumerate() {
        prop_assert_eq!(st.accesses, acc[i]);
        prop_assert_eq!(st.hits, hits[i]);
        prop_assert_eq!(st.mshr_merges, merges[i]);
        prop_assert_eq!(st.fills, fills[i]);
        prop_assert_eq!(st.prefetch_fills, pf_fills[i]);
        prop_assert_eq!(st.prefetch_fills_used, first[i]);
    }
    prop_assert_eq!(log.xbar_through.len() as u64, s.xbar_through());
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn logged_runs_are_consistent(
        kind in kinds(),
        n in 100usize..900,
        deg in 2.0f64..7.0,
        seed in 0u64..10_000,
        shared: bool,
        fused: bool,
        distance in 1u32..17,
    ) {
        let kr = kernel(kind, gen_uniform_random(n, deg, seed).unwrap(), 16, 2);
        let mut cfg = small_tm(true);
        cfg.mode = if shared { CacheMode::Shared } else { CacheMode::Private };
        cfg.pf.fused = fused;
        cfg.pf.distance = distance;
        cfg.seed = seed;
        let r = run_simulation_logged(&kr, &cfg).unwrap();
        check_log(&r, &cfg)?;
        let bad = check_conservation(&r.stats, kr.total_refs() as u64, kr.total_loads() as u64);
        prop_assert!(bad.is_empty(), "{:?}", bad);
        if shared {
            prop_assert_eq!(r.stats.l1_total().misplaced_prefetch_fills, 0);
            prop_assert_eq!(r.stats.pf_total().misplaced_requests, 0);
        }
    }

    #[test]
    fn prefetcher_is_transparent(kind in kinds(), n in 100usize..700, seed in 0u64..10_000, shared: bool) {
        let kr = kernel(kind, gen_uniform_random(n, 4.0, seed).unwrap(), 16, 2);
        let mut on = small_tm(true);
        on.mode = if shared { CacheMode::Shared } else { CacheMode::Private };
        let mut off = on;
        off.pf.enabled = false;
        let a = run_simulation(&kr, &on).unwrap();
        let b = run_simulation(&kr, &off).unwrap();
        prop_assert_eq!(&a.result, &kr.result);
        prop_assert_eq!(&b.result, &kr.result);
        prop_assert_eq!(a.stats.core_total().refs_retired(), b.stats.core_total().refs_retired());
        prop_assert_eq!(a.stats.core_total().loads_retired, kr.total_loads() as u64);
    }

    #[test]
    fn same_seed_same_result(kind in kinds(), seed in 0u64..10_000) {
        let kr = kernel(kind, gen_uniform_random(400, 5.0, seed).unwrap(), 16, 2);
        let mut cfg = small_tm(true);
        cfg.seed = seed;
        let a = run_simulation(&kr, &cfg).unwrap();
        let b = run_simulation(&kr, &cfg).unwrap();
        prop_assert_eq!(a.total_cycles, b.total_cycles);
        let fa: Vec<String> = flat_record(a.total_cycles, &a.stats).iter().map(|(_, v)| v.to_string()).collect();
        let fb: Vec<String> = flat_record(b.total_cycles, &b.stats).iter().map(|(_, v)| v.to_string()).collect();
        prop_assert_eq!(fa, fb);
    }
}

#[test]
fn ablated_handshake_misplaces_fills() {
    let kr = kernel(KernelKind::Pagerank, gen_uniform_random(2000, 6.0, 9).unwrap(), 16, 2);
    let mut cfg = small_tm(true);
    cfg.pf.handshake = false;
    let r = run_simulation(&kr, &cfg).unwrap();
    let placed = placement_accuracy(&r.stats).unwrap();
    assert!(placed < 0.5, "{placed}");
    cfg.pf.handshake = true;
    let r = run_simulation(&kr, &cfg).unwrap();
    assert_eq!(placement_accuracy(&r.stats).unwrap(), 1.0);
}
