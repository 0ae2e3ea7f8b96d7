#![allow(dead_code)]

use std::collections::{BinaryHeap, VecDeque};
use std::cmp::Reverse;
use std::sync::Arc;

use tmsim::graph::Graph;
use tmsim::kernels::{run_kernel, KernelKind, KernelParams, KernelRun};
use tmsim::sim::TmConfig;

/// Dense power iteration: r' = (1-d)/n + d * M r with M[v][u] = mult(u->v)/outdeg(u).
pub fn dense_pagerank(g: &Graph, damping: f64, iters: usize) -> Vec<f64> {
    let n = g.num_vertices();
    let mut m = vec![vec![0.0f64; n]; n];
    let mut outdeg = vec![0.0f64; n];
    for (u, _, _) in g.edges() {
        outdeg[u as usize] += 1.0;
    }
    for (u, v, _) in g.edges() {
        m[v as usize][u as usize] += 1.0 / outdeg[u as usize];
    }
    let mut r = vec![1.0 / n as f64; n];
    for _ in 0..iters {
        r = (0..n)
            .map(|v| (1.0 - damping) / n as f64 + damping * (0..n).map(|u| m[v][u] * r[u]).sum::<f64>())
            .collect();
    }
    r
}

fn out_adjacency(g: &Graph) -> Vec<Vec<(usize, f64)>> {
    let mut adj = vec![vec![]; g.num_vertices()];
    for (u, v, w) in g.edges() {
        adj[u as usize].push((v as usize, w as f64));
    }
    adj
}

/// Queue BFS over out-edges; `u32::MAX` marks unreached.
pub fn queue_bfs(g: &Graph, src: usize) -> Vec<u32> {
    let adj = out_adjacency(g);
    let mut hops = vec![u32::MAX; g.num_vertices()];
    hops[src] = 0;
    let mut q = VecDeque::from([src]);
    while let Some(u) = q.pop_front() {
        for &(v, _) in &adj[u] {
            if hops[v] == u32::MAX {
                hops[v] = hops[u] + 1;
                q.push_back(v);
            }
        }
    }
    hops
}

/// Binary-heap Dijkstra; integer weights keep sums exact.
pub fn dijkstra(g: &Graph, src: usize) -> Vec<f64> {
    let adj = out_adjacency(g);
    let mut dist = vec![u64::MAX; g.num_vertices()];
    dist[src] = 0;
    let mut heap = BinaryHeap::from([Reverse((0u64, src))]);
    while let Some(Reverse((d, u))) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, w) in &adj[u] {
            let nd = d + w as u64;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Reverse((nd, v)));
            }
        }
    }
    dist.into_iter()
        .map(|d| if d == u64::MAX { f64::INFINITY } else { d as f64 })
        .collect()
}

pub fn kernel(kind: KernelKind, g: Graph, gpes: usize, iters: usize) -> KernelRun {
    let g = if kind.needs_weights() && !g.is_weighted() {
        g.with_random_weights(16, 7)
    } else {
        g
    };
    let params = KernelParams {
        iters,
        ..Default::default()
    };
    run_kernel(kind, Arc::new(g), gpes, params, 64).unwrap()
}

/// A 2-tile x 8-GPE machine with small caches, fast to simulate.
pub fn small_tm(pf: bool) -> TmConfig {
    let mut c = TmConfig::new(2, 8);
    c.l1.size_bytes = 2048;
    c.pf.enabled = pf;
    c
}
