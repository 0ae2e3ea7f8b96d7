use proptest::prelude::*;
use tmsim::graph::{load_edge_list, read_csc, write_csc, write_edge_list, Graph, GraphSpec};

fn arb_edges() -> impl Strategy<Value = (usize, Vec<(u32, u32, f32)>)> {
    (1usize..60).prop_flat_map(|n| {
        let e = (0..n as u32, 0..n as u32, 1u32..20).prop_map(|(u, v, w)| (u, v, w as f32));
        (Just(n), prop::collection::vec(e, 0..300))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn degrees_sum_to_edge_count((n, edges) in arb_edges()) {
        let g = Graph::from_edges(n, &edges, true).unwrap();
        let sum: usize = (0..n).map(|v| g.in_degree(v)).sum();
        prop_assert_eq!(sum, g.num_edges());
        prop_assert_eq!(g.num_edges(), edges.len());
        prop_assert_eq!(g.out_degrees().iter().map(|&d| d as usize).sum::<usize>(), edges.len());
    }

    #[test]
    fn generators_are_pure(n in 2usize..500, deg in 0.5f64..8.0, scale in 1u32..10, ef in 1usize..8, seed: u64) {
        let u = GraphSpec::UniformRandom { n, avg_degree: deg.min((n - 1) as f64), seed, max_weight: None };
        prop_assert_eq!(u.build().unwrap(), u.build().unwrap());
        let k = GraphSpec::Kronecker { scale, edge_factor: ef, seed, max_weight: Some(5) };
        let (a, b) = (k.build().unwrap(), k.build().unwrap());
        prop_assert_eq!(a.num_edges(), (1usize << scale) * ef);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn edge_list_round_trip((n, edges) in arb_edges()) {
        let g = Graph::from_edges(n, &edges, true).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.el");
        write_edge_list(&g, &p).unwrap();
        let h = load_edge_list(&p, true).unwrap();
        prop_assert_eq!(h.col_ptr(), g.col_ptr());
        prop_assert_eq!(h.row_idx(), g.row_idx());
        prop_assert_eq!(h.edge_weight(), g.edge_weight());
        let c = dir.path().join("g.csc");
        write_csc(&g, &c).unwrap();
        prop_assert_eq!(read_csc(&c, true).unwrap(), g);
    }
}
