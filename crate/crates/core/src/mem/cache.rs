use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CacheMode {
    Private,
    Shared,
}

impl std::fmt::Display for CacheMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CacheMode::Private => "private",
            CacheMode::Shared => "shared",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheConfig {
    pub size_bytes: u64,
    pub assoc: u32,
    pub block_bytes: u64,
    pub mshrs: u32,
    pub ports: u32,
}

impl CacheConfig {
    /// 16 kB, 4-way, 64 B blocks, 8 MSHRs, single ported.
    pub fn l1_default() -> Self {
        CacheConfig {
            size_bytes: 16 * 1024,
            assoc: 4,
            block_bytes: 64,
            mshrs: 8,
            ports: 1,
        }
    }

    /// 4 kB per bank, otherwise as the L1.
    pub fn l2_default() -> Self {
        CacheConfig {
            size_bytes: 4 * 1024,
            ..Self::l1_default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.block_bytes.is_power_of_two() || self.block_bytes < 8 {
            return Err(SimError::Validation(format!("block size {} must be a power of two >= 8", self.block_bytes)));
        }
        if self.assoc == 0 || self.assoc > 255 {
            return Err(SimError::Validation(format!("associativity {} out of range", self.assoc)));
        }
        let way_bytes = self.assoc as u64 * self.block_bytes;
        if self.size_bytes == 0 || !self.size_bytes.is_multiple_of(way_bytes) {
            return Err(SimError::Validation(format!(
                "cache size {} B is not a multiple of associativity x block ({way_bytes} B)",
                self.size_bytes
            )));
        }
        if self.mshrs == 0 {
            return Err(SimError::Validation("a cache needs at least one MSHR".into()));
        }
        if self.ports != 1 {
            return Err(SimError::Validation("only single-ported banks are modeled".into()));
        }
        Ok(())
    }

    pub fn num_sets(&self) -> usize {
        (self.size_bytes / (self.assoc as u64 * self.block_bytes)) as usize
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Line {
    block: u64,
    valid: bool,
    dirty: bool,
    prefetch: bool,
    used: bool,
    /// 0 = most recently used.
    lru: u8,
}

/// Outstanding miss. `waiters` are opaque requestor ids (cores for the L1,
/// L1 banks for the L2).
#[derive(Debug, Clone)]
pub struct Mshr {
    pub block: u64,
    pub waiters: SmallVec<[u32; 4]>,
    pub is_prefetch: bool,
    pub dirty_on_fill: bool,
    pub demand_touched: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Access {
    Hit,
    /// Joined an existing MSHR for the block.
    Merged,
    /// Allocated a fresh MSHR; the caller must send the request downstream.
    Miss,
    /// Every MSHR is busy; retry later.
    Blocked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Eviction {
    pub block: u64,
    pub dirty: bool,
    pub unused_prefetch: bool,
}

#[derive(Debug, Clone)]
pub struct FillOutcome {
    pub waiters: SmallVec<[u32; 4]>,
    pub was_prefetch: bool,
    pub eviction: Option<Eviction>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BankStats {
    /// Demand accesses (blocked attempts are not accesses).
    pub accesses: u64,
    pub hits: u64,
    pub misses: u64,
    /// Misses that joined an in-flight MSHR.
    pub mshr_merges: u64,
    /// Demand misses that allocated an MSHR.
    pub mshr_allocs: u64,
    pub blocked: u64,
    pub fills: u64,
    pub replacements: u64,
    pub writebacks: u64,
    pub prefetch_fills: u64,
    pub prefetch_fills_used: u64,
    pub prefetch_fills_evicted_unused: u64,
    /// Prefetch fills into a bank other than the block's color.
    pub misplaced_prefetch_fills: u64,
}

impl BankStats {
    pub fn merge(&mut self, o: &BankStats) {
        self.accesses += o.accesses;
        self.hits += o.hits;
        self.misses += o.misses;
        self.mshr_merges += o.mshr_merges;
        self.mshr_allocs += o.mshr_allocs;
        self.blocked += o.blocked;
        self.fills += o.fills;
        self.replacements += o.replacements;
        self.writebacks += o.writebacks;
        self.prefetch_fills += o.prefetch_fills;
        self.prefetch_fills_used += o.prefetch_fills_used;
        self.prefetch_fills_evicted_unused += o.prefetch_fills_evicted_unused;
        self.misplaced_prefetch_fills += o.misplaced_prefetch_fills;
    }
}

/// One set-associative, non-coherent, write-back/write-allocate bank with
/// true-LRU replacement.
#[derive(Debug, Clone)]
pub struct CacheBank {
    cfg: CacheConfig,
    sets: usize,
    ways: usize,
    /// Banks sharing the address space by coloring; their select bits are
    /// skipped when indexing sets.
    interleave: u64,
    lines: Vec<Line>,
    mshrs: Vec<Mshr>,
    pub stats: BankStats,
}

impl CacheBank {
    pub fn new(cfg: CacheConfig) -> Result<Self> {
        cfg.validate()?;
        let sets = cfg.num_sets();
        let ways = cfg.assoc as usize;
        let lines = (0..sets * ways)
            .map(|i| Line {
                lru: (i % ways) as u8,
                ..Default::default()
            })
            .collect();
        Ok(CacheBank {
            cfg,
            sets,
            ways,
            interleave: 1,
            lines,
            mshrs: Vec::with_capacity(cfg.mshrs as usize),
            stats: BankStats::default(),
        })
    }

    pub fn config(&self) -> &CacheConfig {
        &self.cfg
    }

    #[inline]
    pub fn set_of(&self, block: u64) -> usize {
        ((block / self.cfg.block_bytes / self.interleave) % self.sets as u64) as usize
    }

    /// Sets how many colored banks interleave with this one. Only allowed
    /// while the bank is empty.
    pub fn set_interleave(&mut self, banks: usize) -> Result<()> {
        if self.lines.iter().any(|l| l.valid) || !self.mshrs.is_empty() {
            return Err(SimError::Precondition("cannot re-index a non-empty bank".into()));
        }
        self.interleave = banks.max(1) as u64;
        Ok(())
    }

    #[inline]
    fn set_range(&self, set: usize) -> std::ops::Range<usize> {
        set * self.ways..(set + 1) * self.ways
    }

    fn find(&self, block: u64) -> Option<usize> {
        self.set_range(self.set_of(block))
            .find(|&i| self.lines[i].valid && self.lines[i].block == block)
    }

    pub fn probe(&self, block: u64) -> bool {
        self.find(block).is_some()
    }

    fn touch(&mut self, idx: usize) {
        let set = idx / self.ways;
        let r = self.lines[idx].lru;
        for i in self.set_range(set) {
            if self.lines[i].lru < r {
                self.lines[i].lru += 1;
            }
        }
        self.lines[idx].lru = 0;
    }

    pub fn mshr_for(&self, block: u64) -> Option<&Mshr> {
        self.mshrs.iter().find(|m| m.block == block)
    }

    pub fn outstanding(&self) -> usize {
        self.mshrs.len()
    }

    pub fn has_free_mshr(&self) -> bool {
        self.mshrs.len() < self.cfg.mshrs as usize
    }

    /// Whether a read of `block` would be accepted right now.
    pub fn can_accept(&self, block: u64) -> bool {
        self.has_free_mshr() || self.probe(block) || self.mshr_for(block).is_some()
    }

    /// Demand access. Loads register `waiter` on the MSHR; stores are posted
    /// and only mark the line (or the pending fill) dirty.
    pub fn access(&mut self, block: u64, is_store: bool, waiter: u32) -> Access {
        if let Some(idx) = self.find(block) {
            self.stats.accesses += 1;
            self.stats.hits += 1;
            self.touch(idx);
            let line = &mut self.lines[idx];
            if is_store {
                line.dirty = true;
            }
            if line.prefetch && !line.used {
                self.stats.prefetch_fills_used += 1;
            }
            line.used = true;
            return Access::Hit;
        }
        if let Some(m) = self.mshrs.iter_mut().find(|m| m.block == block) {
            self.stats.accesses += 1;
            self.stats.misses += 1;
            self.stats.mshr_merges += 1;
            m.demand_touched = true;
            if is_store {
                m.dirty_on_fill = true;
            } else {
                m.waiters.push(waiter);
            }
            return Access::Merged;
        }
        if !self.has_free_mshr() {
            self.stats.blocked += 1;
            return Access::Blocked;
        }
        self.stats.accesses += 1;
        self.stats.misses += 1;
        self.stats.mshr_allocs += 1;
        let mut waiters = SmallVec::new();
        if !is_store {
            waiters.push(waiter);
        }
        self.mshrs.push(Mshr {
            block,
            waiters,
            is_prefetch: false,
            dirty_on_fill: is_store,
            demand_touched: true,
        });
        Access::Miss
    }

    /// Allocates an MSHR for a prefetch. The caller has already checked that
    /// the block is neither resident nor in flight.
    pub fn alloc_prefetch(&mut self, block: u64) -> bool {
        debug_assert!(!self.probe(block) && self.mshr_for(block).is_none());
        if !self.has_free_mshr() {
            return false;
        }
        self.mshrs.push(Mshr {
            block,
            waiters: SmallVec::new(),
            is_prefetch: true,
            dirty_on_fill: false,
            demand_touched: false,
        });
        true
    }

    /// Marks an in-flight fill dirty (a write-back raced with the read).
    pub fn mark_pending_dirty(&mut self, block: u64) -> bool {
        match self.mshrs.iter_mut().find(|m| m.block == block) {
            Some(m) => {
                m.dirty_on_fill = true;
                true
            }
            None => false,
        }
    }

    /// Chooses a way in `set` to receive a new block, evicting the LRU line
    /// if the set is full.
    pub fn evict(&mut self, set: usize) -> (usize, Option<Eviction>) {
        let range = self.set_range(set);
        if let Some(i) = range.clone().find(|&i| !self.lines[i].valid) {
            return (i, None);
        }
        let victim = range
            .max_by_key(|&i| self.lines[i].lru)
            .expect("sets have at least one way");
        let line = self.lines[victim];
        let unused_prefetch = line.prefetch && !line.used;
        self.stats.replacements += 1;
        if unused_prefetch {
            self.stats.prefetch_fills_evicted_unused += 1;
        }
        if line.dirty {
            self.stats.writebacks += 1;
        }
        self.lines[victim].valid = false;
        (
            victim,
            Some(Eviction {
                block: line.block,
                dirty: line.dirty,
                unused_prefetch,
            }),
        )
    }

    fn install(&mut self, block: u64, dirty: bool, prefetch: bool, used: bool) -> Option<Eviction> {
        let (way, ev) = self.evict(self.set_of(block));
        self.lines[way] = Line {
            block,
            valid: true,
            dirty,
            prefetch,
            used,
            lru: self.lines[way].lru,
        };
        self.touch(way);
        ev
    }

    /// Completes the MSHR for `block`. Panics if none is outstanding: every
    /// fill must match a request.
    pub fn fill(&mut self, block: u64) -> FillOutcome {
        let pos = self
            .mshrs
            .iter()
            .position(|m| m.block == block)
            .unwrap_or_else(|| panic!("fill for {block:#x} without an MSHR"));
        let m = self.mshrs.swap_remove(pos);
        self.stats.fills += 1;
        if m.is_prefetch {
            self.stats.prefetch_fills += 1;
            if m.demand_touched {
                self.stats.prefetch_fills_used += 1;
            }
        }
        let eviction = self.install(block, m.dirty_on_fill, m.is_prefetch, m.demand_touched);
        FillOutcome {
            waiters: m.waiters,
            was_prefetch: m.is_prefetch,
            eviction,
        }
    }

    /// Absorbs a write-back of a whole block. Returns the line it displaced.
    pub fn write_back(&mut self, block: u64) -> Option<Eviction> {
        if let Some(idx) = self.find(block) {
            self.lines[idx].dirty = true;
            self.touch(idx);
            return None;
        }
        if self.mark_pending_dirty(block) {
            return None;
        }
        self.install(block, true, false, true)
    }

    /// Drops every line; returns how many were dirty. Requires no
    /// outstanding misses.
    pub fn invalidate_all(&mut self) -> Result<u64> {
        if !self.mshrs.is_empty() {
            return Err(SimError::Precondition(format!(
                "{} outstanding MSHRs at invalidation",
                self.mshrs.len()
            )));
        }
        let mut dirty = 0;
        for l in &mut self.lines {
            if l.valid && l.dirty {
                dirty += 1;
            }
            if l.valid && l.prefetch && !l.used {
                self.stats.prefetch_fills_evicted_unused += 1;
            }
            l.valid = false;
            l.dirty = false;
        }
        self.stats.writebacks += dirty;
        Ok(dirty)
    }

    pub fn resident_blocks(&self) -> impl Iterator<Item = u64> + '_ {
        self.lines.iter().filter(|l| l.valid).map(|l| l.block)
    }

    /// Checks that every set's LRU ranks form a permutation.
    pub fn lru_is_consistent(&self) -> bool {
        (0..self.sets).all(|s| {
            let mut seen = vec![false; self.ways];
            self.set_range(s).all(|i| {
                let r = self.lines[i].lru as usize;
                r < self.ways && !std::mem::replace(&mut seen[r], true)
            })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(sets: u64, ways: u32, mshrs: u32) -> CacheBank {
        CacheBank::new(CacheConfig {
            size_bytes: sets * ways as u64 * 64,
            assoc: ways,
            block_bytes: 64,
            mshrs,
            ports: 1,
        })
        .unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(CacheConfig::l1_default().validate().is_ok());
        let bad = CacheConfig { assoc: 3, ..CacheConfig::l1_default() };
        assert!(bad.validate().is_err());
        assert_eq!(CacheConfig::l1_default().num_sets(), 64);
        assert_eq!(CacheConfig::l2_default().num_sets(), 16);
    }

    #[test]
    fn second_access_after_fill_hits() {
        let mut c = small(4, 4, 8);
        assert_eq!(c.access(0x1000, false, 0), Access::Miss);
        c.fill(0x1000);
        assert_eq!(c.access(0x1000, false, 0), Access::Hit);
        assert_eq!((c.stats.accesses, c.stats.hits, c.stats.misses), (2, 1, 1));
    }

    #[test]
    fn ninth_distinct_miss_blocks() {
        let mut c = small(64, 4, 8);
        for i in 0..8 {
            assert_eq!(c.access(i * 64, false, 0), Access::Miss);
        }
        assert_eq!(c.access(8 * 64, false, 0), Access::Blocked);
        assert_eq!(c.stats.accesses, 8);
        assert_eq!(c.stats.blocked, 1);
    }

    #[test]
    fn same_block_misses_merge() {
        let mut c = small(4, 4, 8);
        assert_eq!(c.access(0x40, false, 1), Access::Miss);
        assert_eq!(c.access(0x40, false, 2), Access::Merged);
        assert_eq!(c.outstanding(), 1);
        let out = c.fill(0x40);
        assert_eq!(out.waiters.as_slice(), &[1, 2]);
    }

    #[test]
    fn five_blocks_in_one_set_replace_once() {
        let mut c = small(4, 4, 8);
        // Blocks 0, 4, 8, 12, 16 (in block units) all map to set 0.
        for k in 0..5u64 {
            let b = k * 4 * 64;
            assert_eq!(c.access(b, false, 0), Access::Miss);
            c.fill(b);
        }
        assert_eq!(c.stats.replacements, 1);
        // Block 0 was least recently used.
        assert!(!c.probe(0));
        assert!(c.probe(4 * 4 * 64));
        assert!(c.lru_is_consistent());
    }

    #[test]
    fn interleaved_bank_uses_all_sets() {
        let mut c = small(4, 1, 8);
        c.set_interleave(4).unwrap();
        // Blocks colored to bank 1 of 4: indices 1, 5, 9, 13.
        for k in 0..4u64 {
            let b = (1 + 4 * k) * 64;
            c.access(b, false, 0);
            c.fill(b);
        }
        assert_eq!(c.stats.replacements, 0);
        assert!(c.set_interleave(2).is_err());
    }

    #[test]
    fn lru_respects_recent_use() {
        let mut c = small(1, 2, 8);
        for b in [0u64, 64] {
            c.access(b, false, 0);
            c.fill(b);
        }
        c.access(0, false, 0);
        c.access(128, false, 0);
        c.fill(128);
        assert!(c.probe(0) && !c.probe(64));
    }

    #[test]
    fn fill_into_free_way_is_not_a_replacement() {
        let mut c = small(1, 4, 8);
        c.access(0, false, 0);
        c.fill(0);
        assert_eq!(c.stats.replacements, 0);
    }

    #[test]
    fn unused_prefetch_eviction_counts() {
        let mut c = small(1, 1, 8);
        assert!(c.alloc_prefetch(0));
        c.fill(0);
        c.access(64, false, 0);
        let out = c.fill(64);
        assert!(out.eviction.unwrap().unused_prefetch);
        assert_eq!(c.stats.prefetch_fills_evicted_unused, 1);
        assert_eq!(c.stats.prefetch_fills, 1);
    }

    #[test]
    fn used_prefetch_is_counted_once() {
        let mut c = small(1, 2, 8);
        c.alloc_prefetch(0);
        c.fill(0);
        c.access(0, false, 0);
        c.access(0, false, 0);
        assert_eq!(c.stats.prefetch_fills_used, 1);
    }

    #[test]
    fn dirty_victims_write_back() {
        let mut c = small(1, 1, 8);
        c.access(0, true, 0);
        c.fill(0);
        c.access(64, false, 0);
        let ev = c.fill(64).eviction.unwrap();
        assert!(ev.dirty);
        assert_eq!(c.stats.writebacks, 1);
    }

    #[test]
    fn invalidate_requires_drained_mshrs() {
        let mut c = small(1, 2, 8);
        c.access(0, false, 0);
        assert!(c.invalidate_all().is_err());
        c.fill(0);
        assert_eq!(c.invalidate_all().unwrap(), 0);
        assert_eq!(c.resident_blocks().count(), 0);
    }

    #[test]
    #[should_panic(expected = "without an MSHR")]
    fn fill_without_request_panics() {
        small(1, 2, 8).fill(0);
    }
}
