use std::sync::Arc;

use super::{build_dig, layout_graph, partition_vertices, ArrayId, KernelKind, KernelParams, KernelResult, KernelRun, StreamBuilder};
use crate::error::{Result, SimError};
use crate::graph::Graph;

/// Jacobi-style Bellman-Ford: each round every vertex relaxes over its
/// in-edges into PROP_NEXT; rounds repeat until nothing improves.
pub(super) fn run(g: Arc<Graph>, num_gpes: usize, params: KernelParams, block_size: u64) -> Result<KernelRun> {
    let n = g.num_vertices();
    let src = params.source as usize;
    if src >= n {
        return Err(SimError::Validation(format!("source {src} >= n={n}")));
    }
    let partition = partition_vertices(n, num_gpes);
    let mut image = layout_graph(&g, block_size, true);
    let mut dist = vec![f64::INFINITY; n];
    dist[src] = 0.0;
    image.region_mut(ArrayId::Prop).unwrap().payload = dist.iter().map(|d| d.to_bits()).collect();

    let offsets = image.region(ArrayId::Offsets).unwrap().span();
    let neighbors = image.region(ArrayId::Neighbors).unwrap().span();
    let weights = image.region(ArrayId::Weights).unwrap().span();
    let prop = image.region(ArrayId::Prop).unwrap().span();
    let next = image.region(ArrayId::PropNext).unwrap().span();

    let mut sb = StreamBuilder::new(num_gpes, &params);
    let mut new_dist = dist.clone();
    // Nonnegative weights converge within n rounds, plus one quiet round.
    for _ in 0..=n {
        let mut changed = false;
        for (gpe, part) in partition.iter().enumerate() {
            for v in part.clone() {
                sb.load(gpe, offsets.addr(v));
                sb.load(gpe, offsets.addr(v + 1));
                sb.load(gpe, prop.addr(v));
                let mut best = dist[v];
                for j in g.in_range(v) {
                    let u = g.row_idx()[j] as usize;
                    sb.load(gpe, neighbors.addr(j));
                    sb.load(gpe, weights.addr(j));
                    sb.load(gpe, prop.addr(u));
                    let cand = dist[u] + g.edge_weight()[j] as f64;
                    if cand < best {
                        best = cand;
                    }
                }
                sb.store(gpe, next.addr(v));
                if best < dist[v] {
                    changed = true;
                }
                new_dist[v] = best;
            }
        }
        sb.end_phase();
        std::mem::swap(&mut dist, &mut new_dist);
        if !changed {
            break;
        }
    }
    if dist.iter().any(|d| d.is_nan()) {
        return Err(SimError::Validation("sssp produced NaN distances".into()));
    }

    let dig = build_dig(KernelKind::Sssp, &image)?;
    Ok(KernelRun {
        kernel: KernelKind::Sssp,
        graph: g,
        params,
        num_gpes,
        partition,
        result: KernelResult::Distances(dist),
        streams: sb.finish(),
        image,
        dig,
    })
}
