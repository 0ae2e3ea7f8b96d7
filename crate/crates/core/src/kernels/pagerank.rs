use std::sync::Arc;

use super::{build_dig, layout_graph, partition_vertices, ArrayId, KernelKind, KernelParams, KernelResult, KernelRun, StreamBuilder};
use crate::error::{Result, SimError};
use crate::graph::Graph;

/// Synchronous pull PageRank. Mass held by vertices without out-edges is
/// dropped, not redistributed.
pub(super) fn run(g: Arc<Graph>, num_gpes: usize, params: KernelParams, block_size: u64) -> Result<KernelRun> {
    if !(params.damping > 0.0 && params.damping < 1.0) {
        return Err(SimError::Validation(format!("damping must be in (0,1), got {}", params.damping)));
    }
    if params.iters == 0 {
        return Err(SimError::Validation("pagerank needs iters >= 1".into()));
    }
    let n = g.num_vertices();
    let outdeg = g.out_degrees();
    let partition = partition_vertices(n, num_gpes);
    let mut image = layout_graph(&g, block_size, false);

    let init = if n > 0 { 1.0 / n as f64 } else { 0.0 };
    let mut rank = vec![init; n];
    image.region_mut(ArrayId::Prop).unwrap().payload = rank.iter().map(|r| r.to_bits()).collect();

    let offsets = image.region(ArrayId::Offsets).unwrap().span();
    let neighbors = image.region(ArrayId::Neighbors).unwrap().span();
    let prop = image.region(ArrayId::Prop).unwrap().span();
    let next = image.region(ArrayId::PropNext).unwrap().span();

    let base = (1.0 - params.damping) / n.max(1) as f64;
    let mut sb = StreamBuilder::new(num_gpes, &params);
    let mut new_rank = vec![0.0; n];
    for _ in 0..params.iters {
        for (gpe, part) in partition.iter().enumerate() {
            for v in part.clone() {
                sb.load(gpe, offsets.addr(v));
                sb.load(gpe, offsets.addr(v + 1));
                let mut sum = 0.0;
                for j in g.in_range(v) {
                    let u = g.row_idx()[j] as usize;
                    sb.load(gpe, neighbors.addr(j));
                    sb.load(gpe, prop.addr(u));
                    sum += rank[u] / outdeg[u] as f64;
                }
                sb.store(gpe, next.addr(v));
                new_rank[v] = base + params.damping * sum;
            }
        }
        sb.end_phase();
        std::mem::swap(&mut rank, &mut new_rank);
    }

    let dig = build_dig(KernelKind::Pagerank, &image)?;
    Ok(KernelRun {
        kernel: KernelKind::Pagerank,
        graph: g,
        params,
        num_gpes,
        partition,
        result: KernelResult::Ranks(rank),
        streams: sb.finish(),
        image,
        dig,
    })
}
