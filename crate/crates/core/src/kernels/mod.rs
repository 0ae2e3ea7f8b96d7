//! Pull-mode graph kernels.
//!
//! Each kernel computes its functional result and, in the same pass, the
//! per-GPE memory reference streams the simulator replays. Streams address a
//! flat [`MemoryImage`] whose layout the kernel's DIG describes.

mod bfs;
mod layout;
mod pagerank;
mod replay;
mod sssp;
pub mod trace;

pub use layout::{layout_graph, ArrayId, MemoryImage, Region, RegionSpan};
pub use replay::replay;

use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::graph::Graph;
use crate::prefetch::{Dig, DigEdge, DigNode, EdgeKind};

/// Hop distance marking an unreached vertex.
pub const UNREACHED: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    #[serde(alias = "pr")]
    Pagerank,
    Bfs,
    Sssp,
}

impl KernelKind {
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Pagerank => "pagerank",
            KernelKind::Bfs => "bfs",
            KernelKind::Sssp => "sssp",
        }
    }

    pub fn needs_weights(self) -> bool {
        matches!(self, KernelKind::Sssp)
    }
}

impl std::str::FromStr for KernelKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pagerank" | "pr" => Ok(KernelKind::Pagerank),
            "bfs" => Ok(KernelKind::Bfs),
            "sssp" => Ok(KernelKind::Sssp),
            other => Err(SimError::Validation(format!("unknown kernel `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RefKind {
    Load,
    Store,
}

/// One memory reference issued by a GPE.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemRef {
    pub address: u64,
    pub gpe_id: u16,
    pub kind: RefKind,
    /// Core work preceding this reference, in cycles.
    pub compute_gap: u16,
}

/// The ordered references of one GPE, cut into barrier-separated phases.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GpeStream {
    pub refs: Vec<MemRef>,
    /// `phase_ends[p]` is the index one past the last reference of phase `p`.
    pub phase_ends: Vec<usize>,
}

impl GpeStream {
    pub fn phase(&self, p: usize) -> &[MemRef] {
        let start = if p == 0 { 0 } else { self.phase_ends[p - 1] };
        &self.refs[start..self.phase_ends[p]]
    }

    pub fn num_phases(&self) -> usize {
        self.phase_ends.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelResult {
    Ranks(Vec<f64>),
    Hops(Vec<u32>),
    Distances(Vec<f64>),
}

/// Knobs shared by all kernels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelParams {
    pub damping: f64,
    pub iters: usize,
    pub source: u32,
    /// Cycles of work before each load.
    pub load_gap: u16,
    /// Cycles of work before each store.
    pub store_gap: u16,
}

impl Default for KernelParams {
    fn default() -> Self {
        KernelParams {
            damping: 0.85,
            iters: 10,
            source: 0,
            load_gap: 1,
            store_gap: 4,
        }
    }
}

/// A kernel's functional result together with everything the simulator needs
/// to replay it.
#[derive(Debug, Clone)]
pub struct KernelRun {
    pub kernel: KernelKind,
    pub graph: Arc<Graph>,
    pub params: KernelParams,
    pub num_gpes: usize,
    pub partition: Vec<Range<usize>>,
    pub result: KernelResult,
    pub streams: Vec<GpeStream>,
    pub image: MemoryImage,
    pub dig: Dig,
}

impl KernelRun {
    pub fn num_phases(&self) -> usize {
        self.streams.first().map_or(0, |s| s.num_phases())
    }

    pub fn total_refs(&self) -> usize {
        self.streams.iter().map(|s| s.refs.len()).sum()
    }

    pub fn total_loads(&self) -> usize {
        self.streams
            .iter()
            .flat_map(|s| &s.refs)
            .filter(|r| r.kind == RefKind::Load)
            .count()
    }
}

/// Contiguous block partition: GPE `k` owns `[k*c, min(n, (k+1)*c))` with
/// `c = ceil(n / num_gpes)`.
pub fn partition_vertices(n: usize, num_gpes: usize) -> Vec<Range<usize>> {
    assert!(num_gpes >= 1, "partition needs at least one GPE");
    let chunk = n.div_ceil(num_gpes);
    (0..num_gpes)
        .map(|k| (k * chunk).min(n)..((k + 1) * chunk).min(n))
        .collect()
}

pub fn run_kernel(kind: KernelKind, g: Arc<Graph>, num_gpes: usize, params: KernelParams, block_size: u64) -> Result<KernelRun> {
    if num_gpes == 0 || num_gpes > u16::MAX as usize {
        return Err(SimError::Validation(format!("num_gpes {num_gpes} out of range")));
    }
    match kind {
        KernelKind::Pagerank => pagerank::run(g, num_gpes, params, block_size),
        KernelKind::Bfs => bfs::run(g, num_gpes, params, block_size),
        KernelKind::Sssp => sssp::run(g, num_gpes, params, block_size),
    }
}

pub fn run_pagerank(g: Arc<Graph>, num_gpes: usize, damping: f64, iters: usize) -> Result<KernelRun> {
    let params = KernelParams { damping, iters, ..Default::default() };
    run_kernel(KernelKind::Pagerank, g, num_gpes, params, 64)
}

pub fn run_bfs(g: Arc<Graph>, num_gpes: usize, source: u32) -> Result<KernelRun> {
    let params = KernelParams { source, ..Default::default() };
    run_kernel(KernelKind::Bfs, g, num_gpes, params, 64)
}

pub fn run_sssp(g: Arc<Graph>, num_gpes: usize, source: u32) -> Result<KernelRun> {
    let params = KernelParams { source, ..Default::default() };
    run_kernel(KernelKind::Sssp, g, num_gpes, params, 64)
}

/// Hand-built DIG for a kernel: OFFSETS triggers, a ranged edge into
/// NEIGHBORS, a single-valued edge into PROP, and for SSSP a same-index edge
/// into WEIGHTS.
pub fn build_dig(kernel: KernelKind, image: &MemoryImage) -> Result<Dig> {
    let node = |id: u8, array: ArrayId, trigger: bool| -> Result<DigNode> {
        let r = image
            .region(array)
            .ok_or_else(|| SimError::Dig(format!("{} needs array {array:?}", kernel.name())))?;
        Ok(DigNode {
            id,
            array,
            base: r.base,
            length: r.len() as u64,
            element_size: r.element_size,
            is_trigger: trigger,
        })
    };
    let mut nodes = vec![
        node(0, ArrayId::Offsets, true)?,
        node(1, ArrayId::Neighbors, false)?,
        node(2, ArrayId::Prop, false)?,
    ];
    let mut edges = vec![
        DigEdge { src: 0, dst: 1, kind: EdgeKind::Ranged },
        DigEdge { src: 1, dst: 2, kind: EdgeKind::SingleValued },
    ];
    if kernel == KernelKind::Sssp {
        nodes.push(node(3, ArrayId::Weights, false)?);
        edges.push(DigEdge { src: 1, dst: 3, kind: EdgeKind::SameIndex });
    }
    Dig::new(nodes, edges)
}

/// Accumulates references into per-GPE streams.
pub(crate) struct StreamBuilder {
    streams: Vec<GpeStream>,
    load_gap: u16,
    store_gap: u16,
}

impl StreamBuilder {
    pub(crate) fn new(num_gpes: usize, params: &KernelParams) -> Self {
        StreamBuilder {
            streams: vec![GpeStream::default(); num_gpes],
            load_gap: params.load_gap,
            store_gap: params.store_gap,
        }
    }

    #[inline]
    pub(crate) fn load(&mut self, gpe: usize, address: u64) {
        self.streams[gpe].refs.push(MemRef {
            address,
            gpe_id: gpe as u16,
            kind: RefKind::Load,
            compute_gap: self.load_gap,
        });
    }

    #[inline]
    pub(crate) fn store(&mut self, gpe: usize, address: u64) {
        self.streams[gpe].refs.push(MemRef {
            address,
            gpe_id: gpe as u16,
            kind: RefKind::Store,
            compute_gap: self.store_gap,
        });
    }

    pub(crate) fn end_phase(&mut self) {
        for s in &mut self.streams {
            s.phase_ends.push(s.refs.len());
        }
    }

    pub(crate) fn finish(self) -> Vec<GpeStream> {
        self.streams
    }
}
