use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Graph, VertexId};
use crate::error::{Result, SimError};

/// R-MAT quadrant probabilities (A, B, C, D), Graph500 values.
pub const RMAT_INITIATOR: [f64; 4] = [0.57, 0.19, 0.19, 0.05];

const MAX_SCALE: u32 = 24;

/// Directed G(n, m) with `m = round(n * avg_degree)` distinct edges and no
/// self-loops.
pub fn gen_uniform_random(n: usize, avg_degree: f64, seed: u64) -> Result<Graph> {
    if n == 0 {
        return Err(SimError::Validation("uniform-random graph needs n >= 1".into()));
    }
    if !(avg_degree >= 0.0) {
        return Err(SimError::Validation(format!("avg_degree must be >= 0, got {avg_degree}")));
    }
    let m = (n as f64 * avg_degree).round() as u64;
    let slots = n as u64 * (n as u64 - 1);
    if m > slots {
        return Err(SimError::Infeasible(format!(
            "{m} edges requested but only {slots} non-loop slots exist for n={n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges: Vec<(VertexId, VertexId, f32)> = if m * 2 > slots {
        // Dense request: shuffle the full slot list instead of rejection sampling.
        let mut all: Vec<u64> = (0..slots).collect();
        let (picked, _) = all.partial_shuffle(&mut rng, m as usize);
        picked.iter().map(|&s| slot_to_edge(s, n as u64)).collect()
    } else {
        let mut seen = HashSet::with_capacity(m as usize);
        let mut out = Vec::with_capacity(m as usize);
        while (out.len() as u64) < m {
            let s = rng.gen_range(0..slots);
            if seen.insert(s) {
                out.push(slot_to_edge(s, n as u64));
            }
        }
        out
    };
    Graph::from_edges(n, &edges, false)
}

/// Maps a slot in `0..n*(n-1)` to an ordered pair with `src != dst`.
fn slot_to_edge(slot: u64, n: u64) -> (VertexId, VertexId, f32) {
    let src = slot / (n - 1);
    let mut dst = slot % (n - 1);
    if dst >= src {
        dst += 1;
    }
    (src as VertexId, dst as VertexId, 1.0)
}

/// R-MAT Kronecker graph with `2^scale` vertices and `edge_factor * 2^scale`
/// edges. Self-loops and duplicates are kept; vertex labels are permuted
/// with the same seed so hubs are not clustered at low ids.
pub fn gen_kronecker(scale: u32, edge_factor: usize, seed: u64) -> Result<Graph> {
    if scale > MAX_SCALE {
        return Err(SimError::Validation(format!("kronecker scale {scale} exceeds {MAX_SCALE}")));
    }
    if edge_factor == 0 {
        return Err(SimError::Validation("kronecker edge_factor must be >= 1".into()));
    }
    let n = 1usize << scale;
    let m = edge_factor * n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [a, b, c, _] = RMAT_INITIATOR;
    let mut edges = Vec::with_capacity(m);
    for _ in 0..m {
        let (mut src, mut dst) = (0u32, 0u32);
        for level in 0..scale {
            let r: f64 = rng.gen();
            let bit = 1u32 << (scale - 1 - level);
            if r < a {
            } else if r < a + b {
                dst |= bit;
            } else if r < a + b + c {
                src |= bit;
            } else {
                src |= bit;
                dst |= bit;
            }
        }
        edges.push((src, dst, 1.0));
    }
    let mut perm: Vec<VertexId> = (0..n as VertexId).collect();
    perm.shuffle(&mut rng);
    for e in &mut edges {
        e.0 = perm[e.0 as usize];
        e.1 = perm[e.1 as usize];
    }
    Graph::from_edges(n, &edges, false)
}
