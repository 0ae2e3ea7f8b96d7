use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};

use smallvec::SmallVec;

use super::{SimResult, Tile, TmConfig};
use crate::error::{Result, SimError};
use crate::kernels::{KernelRun, MemRef, RefKind};
use crate::mem::{block_of, color, Access, CacheBank, CacheMode, Crossbar, HbmModel, Packet, PacketKind};
use crate::metrics::{CoreStats, CycleStats};
use crate::prefetch::{
    arbitrate, block_candidates, expand, trigger_target, AllocOutcome, Candidate, EntryRef, PfhrOp, SquashEvent,
};

/// A granted PFHR bank access.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PortEvent {
    pub cycle: u64,
    pub tile: u16,
    pub bank: u16,
}

/// Optional per-event record of a run, for cross-checking the counters.
#[derive(Debug, Clone, Default)]
pub struct SimLog {
    /// (global L1 bank, outcome) per demand access that was accepted.
    pub l1_accesses: Vec<(u32, Access)>,
    /// (global L1 bank, was a prefetch) per L1 fill.
    pub l1_fills: Vec<(u32, bool)>,
    /// Global L1 bank each time a prefetched line is first touched by demand.
    pub prefetch_first_use: Vec<u32>,
    pub pfhr_ports: Vec<PortEvent>,
    pub squashes: Vec<SquashEvent>,
    /// (parent GPE, child GPE) for every candidate produced by an expansion.
    pub inherit: Vec<(u16, u16)>,
    /// (cycle, tile) per crossbar delivery.
    pub xbar_through: Vec<(u64, u16)>,
}

#[derive(Debug, Clone, Copy)]
enum Ev {
    L1Fill { bank: u32, block: u64 },
    L2Fill { bank: u32, block: u64 },
}

#[derive(Debug, Clone, Copy)]
struct Timed {
    cycle: u64,
    seq: u64,
    ev: Ev,
}

impl PartialEq for Timed {
    fn eq(&self, o: &Self) -> bool {
        (self.cycle, self.seq) == (o.cycle, o.seq)
    }
}
impl Eq for Timed {}
impl PartialOrd for Timed {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Timed {
    fn cmp(&self, o: &Self) -> Ordering {
        (self.cycle, self.seq).cmp(&(o.cycle, o.seq))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CoreState {
    Ready,
    WaitLoad,
    Barrier(u64),
    Done,
}

#[derive(Debug, Clone)]
struct Core {
    pos: usize,
    phase: usize,
    state: CoreState,
    ready_at: u64,
    issued_at: u64,
    stats: CoreStats,
}

#[derive(Debug, Clone, Copy)]
enum Req {
    Op,
    Alloc,
}

pub(crate) struct Simulator<'a> {
    kr: &'a KernelRun,
    cfg: &'a TmConfig,
    g: usize,
    bs: u64,
    tiles: Vec<Tile>,
    l2: Vec<CacheBank>,
    l2_writebacks_in: u64,
    xbar: Crossbar,
    hbm: HbmModel,
    events: BinaryHeap<Reverse<Timed>>,
    seq: u64,
    cores: Vec<Core>,
    port_used: Vec<u64>,
    waiting: HashMap<(u32, u64), SmallVec<[EntryRef; 2]>>,
    last_trigger: Vec<Option<u64>>,
    pf_on: bool,
    log: Option<SimLog>,
    last_progress: u64,
    last_done: u64,
    cycle: u64,
    // Scratch buffers reused across cycles.
    delivered: Vec<Packet>,
    requests: Vec<(usize, usize)>,
    req_kind: Vec<Req>,
    granted: Vec<bool>,
    children: Vec<Candidate>,
    routed: Vec<(usize, Candidate)>,
}

impl<'a> Simulator<'a> {
    pub(crate) fn new(kr: &'a KernelRun, cfg: &'a TmConfig, logged: bool) -> Result<Self> {
        cfg.validate()?;
        if kr.num_gpes != cfg.num_gpes() || kr.streams.len() != cfg.num_gpes() {
            return Err(SimError::Validation(format!(
                "kernel was built for {} GPEs but the machine has {}",
                kr.num_gpes,
                cfg.num_gpes()
            )));
        }
        if kr.image.block_size != cfg.l1.block_bytes {
            return Err(SimError::Validation(format!(
                "image laid out for {} B blocks, caches use {} B",
                kr.image.block_size, cfg.l1.block_bytes
            )));
        }
        kr.dig.check_image(&kr.image)?;
        let g = cfg.gpes_per_tile;
        let mut tiles = (0..cfg.tiles)
            .map(|t| Tile::new(t, g, cfg.l1, cfg.mode, &cfg.pf))
            .collect::<Result<Vec<_>>>()?;
        if logged {
            for t in &mut tiles {
                t.pfhr.squash_log = Some(vec![]);
            }
        }
        let mut l2 = (0..cfg.num_l2_banks())
            .map(|_| CacheBank::new(cfg.l2))
            .collect::<Result<Vec<_>>>()?;
        for b in &mut l2 {
            b.set_interleave(cfg.num_l2_banks())?;
        }
        let n = cfg.num_gpes();
        let mut sim = Simulator {
            kr,
            cfg,
            g,
            bs: cfg.l1.block_bytes,
            tiles,
            l2,
            l2_writebacks_in: 0,
            xbar: Crossbar::new(n, cfg.num_l2_banks(), g, cfg.contention_window),
            hbm: HbmModel::new(cfg.hbm, cfg.l1.block_bytes, cfg.seed)?,
            events: BinaryHeap::new(),
            seq: 0,
            cores: vec![
                Core {
                    pos: 0,
                    phase: 0,
                    state: CoreState::Ready,
                    ready_at: 0,
                    issued_at: 0,
                    stats: CoreStats::default(),
                };
                n
            ],
            port_used: vec![u64::MAX; n],
            waiting: HashMap::new(),
            last_trigger: vec![None; n],
            pf_on: cfg.pf.enabled,
            log: logged.then(SimLog::default),
            last_progress: 0,
            last_done: 0,
            cycle: 0,
            delivered: vec![],
            requests: vec![],
            req_kind: vec![],
            granted: vec![],
            children: vec![],
            routed: vec![],
        };
        for c in 0..n {
            sim.enter_phase(c, 0);
        }
        Ok(sim)
    }

    fn schedule(&mut self, cycle: u64, ev: Ev) {
        self.seq += 1;
        self.events.push(Reverse(Timed { cycle, seq: self.seq, ev }));
    }

    fn l2_bank(&self, block: u64) -> u32 {
        color(block, self.bs, self.l2.len()) as u32
    }

    fn send(&mut self, kind: PacketKind, src: usize, block: u64, is_prefetch: bool) {
        let dst = self.l2_bank(block);
        self.xbar.send(Packet {
            kind,
            block,
            src: src as u32,
            dst,
            enqueued: self.cycle,
            is_prefetch,
        });
    }

    fn bank(&mut self, global: usize) -> &mut CacheBank {
        &mut self.tiles[global / self.g].banks[global % self.g]
    }

    /// Positions core `c` at the start of its current phase, at cycle `at`.
    fn enter_phase(&mut self, c: usize, at: u64) {
        let stream = &self.kr.streams[c];
        let core = &mut self.cores[c];
        if core.phase >= stream.num_phases() {
            core.state = CoreState::Done;
        } else if core.pos < stream.phase_ends[core.phase] {
            core.state = CoreState::Ready;
            core.ready_at = at + stream.refs[core.pos].compute_gap as u64;
        } else if core.phase + 1 >= stream.num_phases() {
            core.state = CoreState::Done;
        } else {
            core.state = CoreState::Barrier(at);
        }
    }

    /// Retires the current reference of core `c` at cycle `done`.
    fn complete(&mut self, c: usize, done: u64, kind: RefKind) {
        self.last_done = self.last_done.max(done);
        self.last_progress = self.cycle;
        let stream = &self.kr.streams[c];
        let core = &mut self.cores[c];
        match kind {
            RefKind::Load => core.stats.loads_retired += 1,
            RefKind::Store => core.stats.stores_retired += 1,
        }
        core.pos += 1;
        if core.pos < stream.phase_ends[core.phase] {
            core.state = CoreState::Ready;
            core.ready_at = done + stream.refs[core.pos].compute_gap as u64;
        } else if core.phase + 1 >= stream.num_phases() {
            core.state = CoreState::Done;
        } else {
            core.state = CoreState::Barrier(done);
        }
    }

    pub(crate) fn run(mut self) -> Result<SimResult> {
        loop {
            self.process_events();
            self.issue_cores();
            if self.pf_on {
                self.step_prefetchers();
            }
            self.tick_xbar();
            self.barrier();
            let cores_done = self.cores.iter().all(|c| c.state == CoreState::Done);
            if cores_done && self.pf_on {
                self.pf_on = false;
                for t in &mut self.tiles {
                    for e in &mut t.engines {
                        e.discard();
                    }
                }
                self.waiting.clear();
            }
            if cores_done && self.events.is_empty() && self.xbar.pending() == 0 {
                break;
            }
            let next = self.next_cycle();
            if next == u64::MAX {
                return Err(self.abort("no pending work but cores are not finished"));
            }
            if next > self.cfg.max_cycles {
                return Err(self.abort("cycle limit exceeded"));
            }
            if next - self.last_progress > self.cfg.livelock_cycles {
                return Err(self.abort("no progress within the livelock window"));
            }
            self.cycle = next;
        }
        Ok(self.finish())
    }

    fn next_cycle(&self) -> u64 {
        let soon = self.cycle + 1;
        if self.xbar.pending() > 0 {
            return soon;
        }
        let mut next = u64::MAX;
        for c in &self.cores {
            if c.state == CoreState::Ready {
                next = next.min(c.ready_at.max(soon));
            }
        }
        if self.pf_on {
            for t in &self.tiles {
                for e in &t.engines {
                    if let Some(r) = e.next_ready() {
                        next = next.min(r.max(soon));
                    }
                }
            }
        }
        if let Some(Reverse(ev)) = self.events.peek() {
            next = next.min(ev.cycle.max(soon));
        }
        next
    }

    fn abort(&self, reason: &str) -> SimError {
        let waiting = self.cores.iter().filter(|c| c.state == CoreState::WaitLoad).count();
        let ready = self.cores.iter().filter(|c| c.state == CoreState::Ready).count();
        let barrier = self.cores.iter().filter(|c| matches!(c.state, CoreState::Barrier(_))).count();
        let mshrs: usize = self.tiles.iter().map(|t| t.outstanding()).sum();
        SimError::Abort {
            cycle: self.cycle,
            reason: format!(
                "{reason}; cores ready={ready} waiting={waiting} at-barrier={barrier}; \
                 L1 MSHRs={mshrs}; xbar pending={}; events={}; last progress at {}",
                self.xbar.pending(),
                self.events.len(),
                self.last_progress
            ),
        }
    }

    fn process_events(&mut self) {
        while let Some(Reverse(t)) = self.events.peek() {
            if t.cycle > self.cycle {
                break;
            }
            let Reverse(t) = self.events.pop().expect("peeked");
            self.last_progress = self.cycle;
            match t.ev {
                Ev::L1Fill { bank, block } => self.l1_fill(bank as usize, block),
                Ev::L2Fill { bank, block } => {
                    let out = self.l2[bank as usize].fill(block);
                    for &w in &out.waiters {
                        self.schedule(self.cycle + 1, Ev::L1Fill { bank: w, block });
                    }
                    if let Some(ev) = out.eviction.filter(|e| e.dirty) {
                        self.hbm.write(ev.block, self.cycle);
                    }
                }
            }
        }
    }

    fn l1_fill(&mut self, bank: usize, block: u64) {
        let now = self.cycle;
        let g = self.g;
        let shared = self.tiles[bank / g].mode() == CacheMode::Shared;
        let b = self.bank(bank);
        let used_before = b.stats.prefetch_fills_used;
        let out = b.fill(block);
        if out.was_prefetch && shared && color(block, b.config().block_bytes, g) != bank % g {
            b.stats.misplaced_prefetch_fills += 1;
        }
        let first_use = b.stats.prefetch_fills_used > used_before;
        if let Some(log) = &mut self.log {
            log.l1_fills.push((bank as u32, out.was_prefetch));
            if first_use {
                log.prefetch_first_use.push(bank as u32);
            }
        }
        if !out.was_prefetch {
            self.last_done = self.last_done.max(now);
        }
        for &w in &out.waiters {
            let c = w as usize;
            let core = &mut self.cores[c];
            debug_assert_eq!(core.state, CoreState::WaitLoad);
            core.stats.cycles_stalled += now.saturating_sub(core.issued_at + 1);
            self.complete(c, now, RefKind::Load);
        }
        if let Some(ev) = out.eviction.filter(|e| e.dirty) {
            self.send(PacketKind::Writeback, bank, ev.block, false);
        }
        if self.pf_on {
            if let Some(refs) = self.waiting.remove(&(bank as u32, block)) {
                let e = &mut self.tiles[bank / g].engines[bank % g];
                e.ops.extend(refs.into_iter().map(PfhrOp::Expand));
            }
        }
    }

    fn issue_cores(&mut self) {
        let now = self.cycle;
        let n = self.cores.len();
        let start = (now % n as u64) as usize;
        for k in 0..n {
            let c = (start + k) % n;
            let core = &self.cores[c];
            if core.state != CoreState::Ready || core.ready_at > now {
                continue;
            }
            let r: MemRef = self.kr.streams[c].refs[core.pos];
            let tile = c / self.g;
            let bank = tile * self.g + self.tiles[tile].bank_for(c % self.g, r.address);
            if self.port_used[bank] == now {
                self.cores[c].stats.retries += 1;
                continue;
            }
            self.port_used[bank] = now;
            let block = block_of(r.address, self.bs);
            let is_store = r.kind == RefKind::Store;
            let b = self.bank(bank);
            let used_before = b.stats.prefetch_fills_used;
            let res = b.access(block, is_store, c as u32);
            let first_use = b.stats.prefetch_fills_used > used_before;
            if res == Access::Blocked {
                self.cores[c].stats.retries += 1;
                continue;
            }
            if let Some(log) = &mut self.log {
                log.l1_accesses.push((bank as u32, res));
                if first_use {
                    log.prefetch_first_use.push(bank as u32);
                }
            }
            if res == Access::Miss {
                self.send(PacketKind::Read, bank, block, false);
            }
            match (res, is_store) {
                (Access::Hit, _) | (_, true) => self.complete(c, now + 1, r.kind),
                _ => {
                    let core = &mut self.cores[c];
                    core.state = CoreState::WaitLoad;
                    core.issued_at = now;
                    self.last_progress = now;
                }
            }
            if self.pf_on {
                self.observe(bank, c, r.address, block);
            }
        }
    }

    /// Demand traffic seen by the engine at `bank`.
    fn observe(&mut self, bank: usize, c: usize, addr: u64, block: u64) {
        let (t, local) = (bank / self.g, bank % self.g);
        let gpe = c as u16;
        let tile = &mut self.tiles[t];
        if tile.pfhr.has_match(local, gpe, block) {
            tile.engines[local].ops.push_back(PfhrOp::CatchUp { gpe, block });
        }
        let dig = &self.kr.dig;
        let Some(node) = dig.triggers().find(|n| n.contains(addr)) else {
            return;
        };
        let index = (addr - node.base) / node.element_size as u64;
        if self.last_trigger[c] == Some(index) {
            return;
        }
        self.last_trigger[c] = Some(index);
        let engine = &mut tile.engines[local];
        engine.stats.triggers += 1;
        if let Some(target) = trigger_target(dig, node, index, engine.distance()) {
            self.children.clear();
            block_candidates(node, target, target + 1, self.bs, gpe, 0, &mut self.children);
            let cands = std::mem::take(&mut self.children);
            for &cand in &cands {
                self.route(bank, cand);
            }
            self.children = cands;
        }
    }

    /// Hands a candidate generated at `from` to the engine that will issue it.
    fn route(&mut self, from: usize, cand: Candidate) {
        let now = self.cycle;
        let t = from / self.g;
        let tile = &mut self.tiles[t];
        tile.engines[from % self.g].stats.generated += 1;
        let owner = if tile.mode() == CacheMode::Shared && self.cfg.pf.handshake {
            t * self.g + color(cand.block, self.bs, self.g)
        } else {
            from
        };
        let foreign = owner != from;
        let ready = if foreign { now + 1 } else { now };
        tile.engines[owner % self.g].enqueue(cand, ready, foreign, &self.cfg.pf);
    }

    fn step_prefetchers(&mut self) {
        let now = self.cycle;
        let g = self.g;
        let dig = &self.kr.dig;
        self.routed.clear();
        for t in 0..self.tiles.len() {
            let tile = &mut self.tiles[t];
            self.requests.clear();
            self.req_kind.clear();
            for (e, eng) in tile.engines.iter_mut().enumerate() {
                if let Some(op) = eng.ops.front() {
                    let bank = match *op {
                        PfhrOp::Expand(r) => r.bank as usize,
                        PfhrOp::CatchUp { .. } => e,
                    };
                    self.requests.push((e, bank));
                    self.req_kind.push(Req::Op);
                } else if let Some(h) = eng.head(now) {
                    if h.entry.is_none() && !dig.is_leaf(h.node) {
                        self.requests.push((e, tile.pfhr.pick_bank(e)));
                        self.req_kind.push(Req::Alloc);
                    }
                }
            }
            if !self.requests.is_empty() {
                arbitrate(&self.requests, g, tile.pfhr.is_fused(), now, &mut self.granted);
            }
            for k in 0..self.requests.len() {
                if !self.granted[k] {
                    continue;
                }
                let (e, pbank) = self.requests[k];
                if let Some(log) = &mut self.log {
                    log.pfhr_ports.push(PortEvent { cycle: now, tile: t as u16, bank: pbank as u16 });
                }
                let eng = &mut tile.engines[e];
                eng.stats.pfhr_accesses += 1;
                match self.req_kind[k] {
                    Req::Op => match eng.ops.pop_front().expect("requested op") {
                        PfhrOp::Expand(r) => {
                            let Some(entry) = tile.pfhr.get(r).copied() else { continue };
                            tile.pfhr.retire(r);
                            eng.stats.expansions += 1;
                            self.children.clear();
                            eng.stats.bad_index +=
                                expand(dig, &self.kr.image, &entry, self.cfg.pf.max_range, self.bs, &mut self.children);
                            for &ch in &self.children {
                                if let Some(log) = &mut self.log {
                                    log.inherit.push((entry.gpe_id, ch.gpe_id));
                                }
                                self.routed.push((t * g + e, ch));
                            }
                        }
                        PfhrOp::CatchUp { gpe, block } => {
                            eng.stats.squashed_catch_up += tile.pfhr.squash_caught_up(e, gpe, block, now) as u64;
                        }
                    },
                    Req::Alloc => {
                        let cand = eng.head(now).expect("requested alloc");
                        match tile.pfhr.allocate(pbank, cand.to_entry(now), now) {
                            AllocOutcome::Free(r) => cand.entry = Some(r),
                            AllocOutcome::Squashed { slot, .. } => {
                                cand.entry = Some(slot);
                                eng.stats.squashed_alloc += 1;
                            }
                            AllocOutcome::Failed => {
                                eng.pop_head();
                                eng.stats.dropped_pfhr_full += 1;
                            }
                        }
                    }
                }
            }
        }
        let routed = std::mem::take(&mut self.routed);
        for &(from, cand) in &routed {
            self.route(from, cand);
        }
        self.routed = routed;
        self.issue_prefetches();
    }

    fn issue_prefetches(&mut self) {
        let now = self.cycle;
        let g = self.g;
        let dig = &self.kr.dig;
        for t in 0..self.tiles.len() {
            for e in 0..g {
                let bank = t * g + e;
                if self.port_used[bank] == now {
                    continue;
                }
                let tile = &mut self.tiles[t];
                let shared = tile.mode() == CacheMode::Shared;
                let eng = &mut tile.engines[e];
                let Some(cand) = eng.head(now).copied() else { continue };
                if cand.entry.is_none() && !dig.is_leaf(cand.node) {
                    continue;
                }
                self.port_used[bank] = now;
                let l1 = &mut tile.banks[e];
                let block = cand.block;
                let misplaced = shared && color(block, self.bs, g) != e;
                if l1.probe(block) {
                    eng.pop_head();
                    eng.stats.redundant_resident += 1;
                    eng.stats.misplaced_requests += u64::from(misplaced);
                    if let Some(r) = cand.entry {
                        eng.ops.push_back(PfhrOp::Expand(r));
                    }
                } else if l1.mshr_for(block).is_some() {
                    eng.pop_head();
                    eng.stats.redundant_inflight += 1;
                    eng.stats.misplaced_requests += u64::from(misplaced);
                    if let Some(r) = cand.entry {
                        self.waiting.entry((bank as u32, block)).or_default().push(r);
                    }
                } else if l1.alloc_prefetch(block) {
                    eng.pop_head();
                    eng.stats.issued += 1;
                    eng.stats.misplaced_requests += u64::from(misplaced);
                    if let Some(r) = cand.entry {
                        self.waiting.entry((bank as u32, block)).or_default().push(r);
                    }
                    self.send(PacketKind::Read, bank, block, true);
                    self.last_progress = now;
                }
            }
        }
    }

    fn tick_xbar(&mut self) {
        let now = self.cycle;
        let mut delivered = std::mem::take(&mut self.delivered);
        delivered.clear();
        let l2 = &self.l2;
        self.xbar.tick(
            now,
            |p| p.kind == PacketKind::Writeback || l2[p.dst as usize].can_accept(p.block),
            &mut delivered,
        );
        for p in &delivered {
            self.last_progress = now;
            if let Some(log) = &mut self.log {
                log.xbar_through.push((now, (p.src as usize / self.g) as u16));
            }
            let bank = &mut self.l2[p.dst as usize];
            match p.kind {
                PacketKind::Read => match bank.access(p.block, false, p.src) {
                    Access::Hit => self.schedule(now + 2, Ev::L1Fill { bank: p.src, block: p.block }),
                    Access::Miss => {
                        let done = self.hbm.read(p.block, now + 1);
                        self.schedule(done, Ev::L2Fill { bank: p.dst, block: p.block });
                    }
                    Access::Merged => {}
                    Access::Blocked => unreachable!("crossbar delivered to a full L2 bank"),
                },
                PacketKind::Writeback => {
                    self.l2_writebacks_in += 1;
                    if let Some(ev) = bank.write_back(p.block).filter(|e| e.dirty) {
                        self.hbm.write(ev.block, now);
                    }
                }
            }
        }
        self.delivered = delivered;
    }

    fn barrier(&mut self) {
        let mut arrivals: SmallVec<[u64; 64]> = SmallVec::new();
        for c in &self.cores {
            match c.state {
                CoreState::Ready | CoreState::WaitLoad => return,
                CoreState::Barrier(a) => arrivals.push(a),
                CoreState::Done => {}
            }
        }
        let Some(release) = super::phase_barrier(&arrivals) else { return };
        for c in 0..self.cores.len() {
            if let CoreState::Barrier(_) = self.cores[c].state {
                self.cores[c].phase += 1;
                self.enter_phase(c, release);
            }
        }
    }

    fn finish(mut self) -> SimResult {
        self.xbar.finish();
        let mut stats = CycleStats {
            l1: vec![],
            l2: self.l2.iter().map(|b| b.stats.clone()).collect(),
            l2_writebacks_in: self.l2_writebacks_in,
            xbar: self.xbar.stats.clone(),
            pf: vec![],
            cores: self.cores.iter().map(|c| c.stats.clone()).collect(),
            hbm: self.hbm.stats.clone(),
            pfhr_squashes: 0,
        };
        let mut squashes = vec![];
        for t in &mut self.tiles {
            stats.l1.extend(t.banks.iter().map(|b| b.stats.clone()));
            stats.pf.extend(t.engines.iter().map(|e| e.stats.clone()));
            stats.pfhr_squashes += t.pfhr.squashes;
            if let Some(l) = t.pfhr.squash_log.take() {
                squashes.extend(l);
            }
        }
        let log = self.log.take().map(|mut l| {
            l.squashes = squashes;
            l
        });
        SimResult {
            total_cycles: self.last_done,
            stats,
            result: self.kr.result.clone(),
            log,
        }
    }
}
