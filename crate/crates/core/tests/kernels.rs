mod common;

use std::sync::Arc;

use proptest::prelude::*;
use tmsim::graph::{gen_kronecker, gen_uniform_random, Graph};
use tmsim::kernels::{replay, run_kernel, KernelKind, KernelParams, KernelResult};

use common::{dense_pagerank, dijkstra, kernel, queue_bfs};

fn graphs() -> Vec<Graph> {
    let mut v = vec![];
    for seed in 0..12 {
        v.push(gen_uniform_random(50 + 37 * seed as usize, 3.0 + (seed % 4) as f64, seed).unwrap());
    }
    for seed in 0..10 {
        v.push(gen_kronecker(5 + (seed % 5) as u32, 4 + (seed % 3) as usize, seed).unwrap());
    }
    v
}

#[test]
fn pagerank_matches_power_iteration() {
    for g in graphs() {
        let want = dense_pagerank(&g, 0.85, 12);
        let kr = kernel(KernelKind::Pagerank, g, 16, 12);
        let KernelResult::Ranks(got) = &kr.result else { panic!() };
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
        }
    }
}

#[test]
fn bfs_matches_queue_bfs() {
    for g in graphs() {
        let want = queue_bfs(&g, 0);
        let kr = kernel(KernelKind::Bfs, g, 16, 1);
        assert_eq!(kr.result, KernelResult::Hops(want));
    }
}

#[test]
fn sssp_matches_dijkstra() {
    for g in graphs() {
        let kr = kernel(KernelKind::Sssp, g, 16, 1);
        let want = dijkstra(&kr.graph, 0);
        assert_eq!(kr.result, KernelResult::Distances(want));
    }
}

#[test]
fn replay_reproduces_results() {
    for kind in [KernelKind::Pagerank, KernelKind::Bfs, KernelKind::Sssp] {
        for g in graphs().into_iter().take(6) {
            let kr = kernel(kind, g, 8, 3);
            assert_eq!(replay(&kr).unwrap(), kr.result, "{kind:?}");
        }
    }
}

#[test]
fn streams_stay_inside_the_image() {
    for kind in [KernelKind::Pagerank, KernelKind::Bfs, KernelKind::Sssp] {
        let kr = kernel(kind, gen_kronecker(8, 6, 3).unwrap(), 16, 2);
        for s in &kr.streams {
            for r in &s.refs {
                assert!(kr.image.locate(r.address).is_some(), "{:#x}", r.address);
            }
        }
    }
}

#[test]
fn pagerank_mass_bounds() {
    let g = gen_kronecker(9, 4, 11).unwrap();
    let n = g.num_vertices() as f64;
    let kr = kernel(KernelKind::Pagerank, g, 8, 10);
    let KernelResult::Ranks(r) = &kr.result else { panic!() };
    assert!(r.iter().sum::<f64>() <= 1.0 + 1e-9);
    assert!(r.iter().all(|&x| x >= 0.15 / n - 1e-15));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn traversal_results_ignore_partitioning(n in 20usize..300, deg in 1.0f64..6.0, seed in 0u64..1000, gpes in 1usize..40) {
        let g = Arc::new(gen_uniform_random(n, deg, seed).unwrap().with_random_weights(9, seed));
        for kind in [KernelKind::Bfs, KernelKind::Sssp] {
            let one = run_kernel(kind, g.clone(), 1, KernelParams::default(), 64).unwrap();
            let many = run_kernel(kind, g.clone(), gpes, KernelParams::default(), 64).unwrap();
            prop_assert_eq!(one.result, many.result);
        }
    }

    #[test]
    fn every_kernel_replays(n in 10usize..200, deg in 1.0f64..5.0, seed in 0u64..1000) {
        let g = gen_uniform_random(n, deg, seed).unwrap();
        for kind in [KernelKind::Pagerank, KernelKind::Bfs, KernelKind::Sssp] {
            let kr = kernel(kind, g.clone(), 7, 2);
            prop_assert_eq!(replay(&kr).unwrap(), kr.result);
        }
    }
}
