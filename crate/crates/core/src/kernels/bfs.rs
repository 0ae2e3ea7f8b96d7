use std::sync::Arc;

use super::{build_dig, layout_graph, partition_vertices, ArrayId, KernelKind, KernelParams, KernelResult, KernelRun, StreamBuilder, UNREACHED};
use crate::error::{Result, SimError};
use crate::graph::Graph;

/// Level-synchronous pull BFS. Each round, every unvisited vertex scans its
/// in-neighbors and stops at the first one on the current level.
pub(super) fn run(g: Arc<Graph>, num_gpes: usize, params: KernelParams, block_size: u64) -> Result<KernelRun> {
    let n = g.num_vertices();
    let src = params.source as usize;
    if src >= n {
        return Err(SimError::Validation(format!("source {src} >= n={n}")));
    }
    let partition = partition_vertices(n, num_gpes);
    let mut image = layout_graph(&g, block_size, false);
    let mut dist = vec![UNREACHED; n];
    dist[src] = 0;
    image.region_mut(ArrayId::Prop).unwrap().payload = dist.iter().map(|&d| d as u64).collect();

    let offsets = image.region(ArrayId::Offsets).unwrap().span();
    let neighbors = image.region(ArrayId::Neighbors).unwrap().span();
    let prop = image.region(ArrayId::Prop).unwrap().span();

    let mut sb = StreamBuilder::new(num_gpes, &params);
    let mut level = 0u32;
    loop {
        let mut changed = false;
        for (gpe, part) in partition.iter().enumerate() {
            for v in part.clone() {
                sb.load(gpe, prop.addr(v));
                if dist[v] != UNREACHED {
                    continue;
                }
                sb.load(gpe, offsets.addr(v));
                sb.load(gpe, offsets.addr(v + 1));
                for j in g.in_range(v) {
                    let u = g.row_idx()[j] as usize;
                    sb.load(gpe, neighbors.addr(j));
                    sb.load(gpe, prop.addr(u));
                    if dist[u] == level {
                        sb.store(gpe, prop.addr(v));
                        dist[v] = level + 1;
                        changed = true;
                        break;
                    }
                }
            }
        }
        sb.end_phase();
        if !changed {
            break;
        }
        level += 1;
    }

    let dig = build_dig(KernelKind::Bfs, &image)?;
    Ok(KernelRun {
        kernel: KernelKind::Bfs,
        graph: g,
        params,
        num_gpes,
        partition,
        result: KernelResult::Hops(dist),
        streams: sb.finish(),
        image,
        dig,
    })
}
