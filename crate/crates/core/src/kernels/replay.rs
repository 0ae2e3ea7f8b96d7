//! Functional interpreter for kernel streams.
//!
//! Executes a [`KernelRun`]'s streams against a private copy of its memory
//! image, phase by phase and GPE by GPE, deriving every value from what the
//! stream actually loads. A barrier publishes PROP_NEXT into PROP for the
//! double-buffered kernels. The interpreter rejects streams whose addresses
//! fall outside the image or break the kernel's indirection pattern.

use super::{ArrayId, KernelKind, KernelResult, KernelRun, MemRef, RefKind, UNREACHED};
use crate::error::{Result, SimError};

struct Memory {
    arrays: Vec<(ArrayId, Vec<u64>)>,
}

impl Memory {
    fn get(&self, id: ArrayId, i: usize) -> u64 {
        self.arrays.iter().find(|(a, _)| *a == id).unwrap().1[i]
    }

    fn set(&mut self, id: ArrayId, i: usize, v: u64) {
        self.arrays.iter_mut().find(|(a, _)| *a == id).unwrap().1[i] = v;
    }

    fn publish_next(&mut self) {
        let next = self.arrays.iter().find(|(a, _)| *a == ArrayId::PropNext).unwrap().1.clone();
        self.arrays.iter_mut().find(|(a, _)| *a == ArrayId::Prop).unwrap().1 = next;
    }
}

fn bad(msg: impl Into<String>) -> SimError {
    SimError::Validation(format!("stream replay: {}", msg.into()))
}

/// Replays `run`'s streams and returns the result they compute.
pub fn replay(run: &KernelRun) -> Result<KernelResult> {
    let mut mem = Memory {
        arrays: run.image.regions().iter().map(|r| (r.array, r.payload.clone())).collect(),
    };
    let outdeg = run.graph.out_degrees();
    let n = run.graph.num_vertices();
    for phase in 0..run.num_phases() {
        for stream in &run.streams {
            let refs = stream.phase(phase);
            let mut cur = Cursor { refs, pos: 0, run };
            while !cur.done() {
                match run.kernel {
                    KernelKind::Pagerank => pagerank_vertex(&mut cur, &mut mem, &outdeg, n)?,
                    KernelKind::Bfs => bfs_vertex(&mut cur, &mut mem, phase as u32)?,
                    KernelKind::Sssp => sssp_vertex(&mut cur, &mut mem)?,
                }
            }
        }
        if run.kernel != KernelKind::Bfs {
            mem.publish_next();
        }
    }
    let prop: Vec<u64> = (0..n).map(|i| mem.get(ArrayId::Prop, i)).collect();
    Ok(match run.kernel {
        KernelKind::Pagerank => KernelResult::Ranks(prop.into_iter().map(f64::from_bits).collect()),
        KernelKind::Bfs => KernelResult::Hops(prop.into_iter().map(|d| d as u32).collect()),
        KernelKind::Sssp => KernelResult::Distances(prop.into_iter().map(f64::from_bits).collect()),
    })
}

struct Cursor<'a> {
    refs: &'a [MemRef],
    pos: usize,
    run: &'a KernelRun,
}

impl Cursor<'_> {
    fn done(&self) -> bool {
        self.pos >= self.refs.len()
    }

    fn peek(&self) -> Option<(RefKind, ArrayId, usize)> {
        let r = self.refs.get(self.pos)?;
        let (a, i) = self.run.image.locate(r.address)?;
        Some((r.kind, a, i))
    }

    fn next(&mut self, kind: RefKind, array: ArrayId) -> Result<usize> {
        let r = self.refs.get(self.pos).ok_or_else(|| bad("stream ended mid-vertex"))?;
        let (a, i) = self
            .run
            .image
            .locate(r.address)
            .ok_or_else(|| bad(format!("address {:#x} outside the image", r.address)))?;
        if a != array || r.kind != kind {
            return Err(bad(format!("expected {kind:?} {array:?}, found {:?} {a:?}[{i}]", r.kind)));
        }
        self.pos += 1;
        Ok(i)
    }
}

/// OFFSETS[v], OFFSETS[v+1] → (v, start, end).
fn read_range(cur: &mut Cursor, mem: &Memory) -> Result<(usize, usize, usize)> {
    let v = cur.next(RefKind::Load, ArrayId::Offsets)?;
    let v1 = cur.next(RefKind::Load, ArrayId::Offsets)?;
    if v1 != v + 1 {
        return Err(bad(format!("offset pair ({v}, {v1}) is not consecutive")));
    }
    Ok((v, mem.get(ArrayId::Offsets, v) as usize, mem.get(ArrayId::Offsets, v1) as usize))
}

/// NEIGHBORS[j] followed by a PROP load of the index it holds.
fn read_neighbor(cur: &mut Cursor, mem: &Memory, j: usize, weighted: bool) -> Result<(usize, Option<f64>)> {
    let jj = cur.next(RefKind::Load, ArrayId::Neighbors)?;
    if jj != j {
        return Err(bad(format!("expected NEIGHBORS[{j}], found [{jj}]")));
    }
    let u = mem.get(ArrayId::Neighbors, j) as usize;
    let w = if weighted {
        let wj = cur.next(RefKind::Load, ArrayId::Weights)?;
        if wj != j {
            return Err(bad(format!("expected WEIGHTS[{j}], found [{wj}]")));
        }
        Some(f32::from_bits(mem.get(ArrayId::Weights, j) as u32) as f64)
    } else {
        None
    };
    let pu = cur.next(RefKind::Load, ArrayId::Prop)?;
    if pu != u {
        return Err(bad(format!("NEIGHBORS[{j}] holds {u} but PROP[{pu}] was loaded")));
    }
    Ok((u, w))
}

fn pagerank_vertex(cur: &mut Cursor, mem: &mut Memory, outdeg: &[u32], n: usize) -> Result<()> {
    let (v, start, end) = read_range(cur, mem)?;
    let mut sum = 0.0;
    for j in start..end {
        let (u, _) = read_neighbor(cur, mem, j, false)?;
        sum += f64::from_bits(mem.get(ArrayId::Prop, u)) / outdeg[u] as f64;
    }
    let sv = cur.next(RefKind::Store, ArrayId::PropNext)?;
    if sv != v {
        return Err(bad(format!("vertex {v} stored PROP_NEXT[{sv}]")));
    }
    let d = cur.run.params.damping;
    let rank = (1.0 - d) / n.max(1) as f64 + d * sum;
    mem.set(ArrayId::PropNext, v, rank.to_bits());
    Ok(())
}

fn bfs_vertex(cur: &mut Cursor, mem: &mut Memory, level: u32) -> Result<()> {
    let v = cur.next(RefKind::Load, ArrayId::Prop)?;
    if mem.get(ArrayId::Prop, v) as u32 != UNREACHED {
        return Ok(());
    }
    let (vv, start, end) = read_range(cur, mem)?;
    if vv != v {
        return Err(bad(format!("visited check on {v} but scanned {vv}")));
    }
    for j in start..end {
        let (u, _) = read_neighbor(cur, mem, j, false)?;
        if mem.get(ArrayId::Prop, u) as u32 == level {
            let sv = cur.next(RefKind::Store, ArrayId::Prop)?;
            if sv != v {
                return Err(bad(format!("vertex {v} stored PROP[{sv}]")));
            }
            mem.set(ArrayId::Prop, v, (level + 1) as u64);
            return Ok(());
        }
    }
    if let Some((RefKind::Store, _, _)) = cur.peek() {
        return Err(bad(format!("vertex {v} stored without a neighbor on level {level}")));
    }
    Ok(())
}

fn sssp_vertex(cur: &mut Cursor, mem: &mut Memory) -> Result<()> {
    let (v, start, end) = read_range(cur, mem)?;
    let pv = cur.next(RefKind::Load, ArrayId::Prop)?;
    if pv != v {
        return Err(bad(format!("vertex {v} loaded its distance from PROP[{pv}]")));
    }
    let mut best = f64::from_bits(mem.get(ArrayId::Prop, v));
    for j in start..end {
        let (u, w) = read_neighbor(cur, mem, j, true)?;
        let cand = f64::from_bits(mem.get(ArrayId::Prop, u)) + w.unwrap();
        if cand < best {
            best = cand;
        }
    }
    let sv = cur.next(RefKind::Store, ArrayId::PropNext)?;
    if sv != v {
        return Err(bad(format!("vertex {v} stored PROP_NEXT[{sv}]")));
    }
    mem.set(ArrayId::PropNext, v, best.to_bits());
    Ok(())
}
