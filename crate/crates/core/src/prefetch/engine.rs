use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::dig::{load_index, Dig, DigNode, EdgeKind};
use super::pfhr::{EntryRef, PfhrEntry};
use crate::error::{Result, SimError};
use crate::kernels::MemoryImage;
use crate::mem::block_of;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrefetchConfig {
    pub enabled: bool,
    /// Elements ahead of the demand stream a trigger prefetch targets.
    pub distance: u32,
    /// Cap on elements taken from one ranged expansion.
    pub max_range: u32,
    pub inbox_depth: usize,
    /// Queue for candidates an engine issues itself.
    pub local_queue_depth: usize,
    pub entries_per_gpe: usize,
    pub handshake: bool,
    pub fused: bool,
}

impl Default for PrefetchConfig {
    fn default() -> Self {
        PrefetchConfig {
            enabled: true,
            distance: 8,
            max_range: 64,
            inbox_depth: 16,
            local_queue_depth: 64,
            entries_per_gpe: 8,
            handshake: true,
            fused: true,
        }
    }
}

impl PrefetchConfig {
    pub fn disabled() -> Self {
        PrefetchConfig { enabled: false, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.distance == 0 {
            return Err(SimError::Validation("prefetch distance must be at least 1".into()));
        }
        if self.max_range == 0 || self.inbox_depth == 0 || self.local_queue_depth == 0 || self.entries_per_gpe == 0 {
            return Err(SimError::Validation(
                "pf_max_range, pf_inbox_depth and pfhr_entries_per_gpe must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A block-sized prefetch request for elements `lo..hi` of a DIG node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Candidate {
    pub block: u64,
    pub node: u8,
    pub lo: u64,
    pub hi: u64,
    pub gpe_id: u16,
    pub depth: u8,
    /// PFHR entry tracking this request, once allocated.
    pub entry: Option<EntryRef>,
}

impl Candidate {
    pub fn to_entry(&self, cycle: u64) -> PfhrEntry {
        PfhrEntry {
            gpe_id: self.gpe_id,
            node: self.node,
            element_index: self.lo,
            range_end: self.hi,
            chain_depth: self.depth,
            issued_block: self.block,
            alloc_cycle: cycle,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PfStats {
    pub triggers: u64,
    pub generated: u64,
    pub issued: u64,
    pub redundant_resident: u64,
    pub redundant_inflight: u64,
    pub dropped_inbox_full: u64,
    pub dropped_queue_full: u64,
    pub dropped_pfhr_full: u64,
    pub discarded_at_end: u64,
    /// Loaded indices that fell outside the destination node.
    pub bad_index: u64,
    pub handoffs: u64,
    pub expansions: u64,
    pub pfhr_accesses: u64,
    pub squashed_alloc: u64,
    pub squashed_catch_up: u64,
    /// Requests resolved at an L1 bank other than the block's color (shared
    /// mode only), whether they filled or were redundant.
    pub misplaced_requests: u64,
}

impl PfStats {
    pub fn merge(&mut self, o: &PfStats) {
        self.triggers += o.triggers;
        self.generated += o.generated;
        self.issued += o.issued;
        self.redundant_resident += o.redundant_resident;
        self.redundant_inflight += o.redundant_inflight;
        self.dropped_inbox_full += o.dropped_inbox_full;
        self.dropped_queue_full += o.dropped_queue_full;
        self.dropped_pfhr_full += o.dropped_pfhr_full;
        self.discarded_at_end += o.discarded_at_end;
        self.bad_index += o.bad_index;
        self.handoffs += o.handoffs;
        self.expansions += o.expansions;
        self.pfhr_accesses += o.pfhr_accesses;
        self.squashed_alloc += o.squashed_alloc;
        self.squashed_catch_up += o.squashed_catch_up;
        self.misplaced_requests += o.misplaced_requests;
    }

    /// Candidates whose fate is recorded. Equals `generated` once a run has
    /// drained.
    pub fn accounted(&self) -> u64 {
        self.issued
            + self.redundant_resident
            + self.redundant_inflight
            + self.dropped_inbox_full
            + self.dropped_queue_full
            + self.dropped_pfhr_full
            + self.discarded_at_end
    }

    pub fn dropped(&self) -> u64 {
        self.dropped_inbox_full + self.dropped_queue_full + self.dropped_pfhr_full + self.bad_index
    }
}

/// Work an engine needs the PFHR array for, besides allocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PfhrOp {
    /// The entry's block is available; follow its edges.
    Expand(EntryRef),
    /// The demand stream of `gpe` reached `block`; drop its stale entries.
    CatchUp { gpe: u16, block: u64 },
}

#[derive(Debug, Clone, Copy)]
pub struct Queued {
    pub ready: u64,
    pub cand: Candidate,
    foreign: bool,
}

/// One prefetch engine, attached to an L1 bank.
#[derive(Debug, Clone)]
pub struct PfEngine {
    pub id: usize,
    distance: u32,
    queue: VecDeque<Queued>,
    inbox_len: usize,
    local_len: usize,
    pub ops: VecDeque<PfhrOp>,
    pub stats: PfStats,
}

impl PfEngine {
    pub fn new(id: usize, distance: u32) -> Self {
        PfEngine {
            id,
            distance: distance.max(1),
            queue: VecDeque::new(),
            inbox_len: 0,
            local_len: 0,
            ops: VecDeque::new(),
            stats: PfStats::default(),
        }
    }

    pub fn distance(&self) -> u32 {
        self.distance
    }

    pub fn set_aggressiveness(&mut self, d: u32) -> Result<()> {
        if d == 0 {
            return Err(SimError::Validation("prefetch distance must be at least 1".into()));
        }
        self.distance = d;
        Ok(())
    }

    /// Accepts a candidate. Foreign candidates arrive through the inbox,
    /// local ones through the engine's own queue; either drops when full.
    pub fn enqueue(&mut self, cand: Candidate, ready: u64, foreign: bool, cfg: &PrefetchConfig) -> bool {
        if foreign {
            if self.inbox_len >= cfg.inbox_depth {
                self.stats.dropped_inbox_full += 1;
                return false;
            }
            self.inbox_len += 1;
            self.stats.handoffs += 1;
        } else {
            if self.local_len >= cfg.local_queue_depth {
                self.stats.dropped_queue_full += 1;
                return false;
            }
            self.local_len += 1;
        }
        self.queue.push_back(Queued { ready, cand, foreign });
        true
    }

    pub fn head(&mut self, cycle: u64) -> Option<&mut Candidate> {
        self.queue.front_mut().filter(|q| q.ready <= cycle).map(|q| &mut q.cand)
    }

    pub fn pop_head(&mut self) -> Option<Candidate> {
        let q = self.queue.pop_front()?;
        if q.foreign {
            self.inbox_len -= 1;
        } else {
            self.local_len -= 1;
        }
        Some(q.cand)
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    pub fn inbox_len(&self) -> usize {
        self.inbox_len
    }

    /// Cycle at which this engine next has something to do, if any.
    pub fn next_ready(&self) -> Option<u64> {
        if !self.ops.is_empty() {
            return Some(0);
        }
        self.queue.front().map(|q| q.ready)
    }

    /// Drops all queued work at the end of a run.
    pub fn discard(&mut self) {
        self.stats.discarded_at_end += self.queue.len() as u64;
        self.queue.clear();
        self.inbox_len = 0;
        self.local_len = 0;
        self.ops.clear();
    }
}

/// Element targeted by a trigger access to element `index` of `node`, or
/// None when it would run past the end of the node.
pub fn trigger_target(dig: &Dig, node: &DigNode, index: u64, distance: u32) -> Option<u64> {
    let target = index + distance as u64;
    let needs_pair = dig.out_edges(node.id).any(|e| e.kind == EdgeKind::Ranged);
    let limit = if needs_pair { node.length.saturating_sub(1) } else { node.length };
    (target < limit).then_some(target)
}

/// Splits elements `lo..hi` of `node` into one candidate per block.
pub fn block_candidates(node: &DigNode, lo: u64, hi: u64, block_size: u64, gpe_id: u16, depth: u8, out: &mut Vec<Candidate>) {
    let es = node.element_size as u64;
    let mut i = lo;
    while i < hi {
        let block = block_of(node.addr(i), block_size);
        let next = (block + block_size - node.base).div_ceil(es);
        let j = next.min(hi);
        out.push(Candidate {
            block,
            node: node.id,
            lo: i,
            hi: j,
            gpe_id,
            depth,
            entry: None,
        });
        i = j;
    }
}

/// Follows every outgoing edge of a filled entry and appends the resulting
/// candidates. Returns the number of loaded indices that were out of range.
pub fn expand(dig: &Dig, image: &MemoryImage, entry: &PfhrEntry, max_range: u32, block_size: u64, out: &mut Vec<Candidate>) -> u64 {
    let src = dig.node(entry.node);
    let gpe = entry.gpe_id;
    let depth = entry.chain_depth.saturating_add(1);
    let mut bad = 0;
    for e in dig.out_edges(entry.node) {
        let dst = dig.node(e.dst);
        match e.kind {
            EdgeKind::Ranged => {
                for i in entry.element_index..entry.range_end {
                    let (Some(start), Some(end)) = (load_index(image, src.array, i), load_index(image, src.array, i + 1)) else {
                        bad += 1;
                        continue;
                    };
                    if start > end || end > dst.length {
                        bad += 1;
                        continue;
                    }
                    let end = end.min(start + max_range as u64);
                    block_candidates(dst, start, end, block_size, gpe, depth, out);
                }
            }
            EdgeKind::SingleValued => {
                let first = out.len();
                for j in entry.element_index..entry.range_end {
                    let Some(v) = load_index(image, src.array, j).filter(|&v| v < dst.length) else {
                        bad += 1;
                        continue;
                    };
                    let block = block_of(dst.addr(v), block_size);
                    if out[first..].iter().any(|c| c.block == block) {
                        continue;
                    }
                    out.push(Candidate {
                        block,
                        node: dst.id,
                        lo: v,
                        hi: v + 1,
                        gpe_id: gpe,
                        depth,
                        entry: None,
                    });
                }
            }
            EdgeKind::SameIndex => {
                let hi = entry.range_end.min(dst.length);
                block_candidates(dst, entry.element_index.min(hi), hi, block_size, gpe, depth, out);
            }
        }
    }
    bad
}
