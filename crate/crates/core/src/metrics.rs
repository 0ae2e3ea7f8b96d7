//! Run counters and the metrics derived from them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::mem::{BankStats, HbmStats, XbarStats};
use crate::prefetch::PfStats;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoreStats {
    pub loads_retired: u64,
    pub stores_retired: u64,
    /// Cycles spent waiting on load misses.
    pub cycles_stalled: u64,
    /// Issue attempts refused for a busy port or full MSHRs.
    pub retries: u64,
}

impl CoreStats {
    pub fn refs_retired(&self) -> u64 {
        self.loads_retired + self.stores_retired
    }
}

/// Every counter a run produces.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CycleStats {
    pub l1: Vec<BankStats>,
    pub l2: Vec<BankStats>,
    /// Write-backs absorbed by the L2.
    pub l2_writebacks_in: u64,
    /// One entry per tile.
    pub xbar: Vec<XbarStats>,
    pub pf: Vec<PfStats>,
    pub cores: Vec<CoreStats>,
    pub hbm: HbmStats,
    pub pfhr_squashes: u64,
}

impl CycleStats {
    pub fn l1_total(&self) -> BankStats {
        let mut t = BankStats::default();
        self.l1.iter().for_each(|b| t.merge(b));
        t
    }

    pub fn l2_total(&self) -> BankStats {
        let mut t = BankStats::default();
        self.l2.iter().for_each(|b| t.merge(b));
        t
    }

    pub fn pf_total(&self) -> PfStats {
        let mut t = PfStats::default();
        self.pf.iter().for_each(|p| t.merge(p));
        t
    }

    pub fn core_total(&self) -> CoreStats {
        let mut t = CoreStats::default();
        for c in &self.cores {
            t.loads_retired += c.loads_retired;
            t.stores_retired += c.stores_retired;
            t.cycles_stalled += c.cycles_stalled;
            t.retries += c.retries;
        }
        t
    }

    pub fn xbar_queued(&self) -> u64 {
        self.xbar.iter().map(|x| x.queued).sum()
    }

    pub fn xbar_through(&self) -> u64 {
        self.xbar.iter().map(|x| x.through).sum()
    }
}

/// Demand L1 miss rate over all banks.
pub fn miss_rate(s: &CycleStats) -> Result<f64> {
    let t = s.l1_total();
    if t.accesses == 0 {
        return Err(SimError::UndefinedMetric("miss rate with zero L1 accesses"));
    }
    Ok(t.misses as f64 / t.accesses as f64)
}

/// Fraction of prefetch fills touched by a demand access before eviction.
pub fn prefetch_accuracy(s: &CycleStats) -> Result<f64> {
    let t = s.l1_total();
    if t.prefetch_fills == 0 {
        return Err(SimError::UndefinedMetric("prefetch accuracy with zero prefetch fills"));
    }
    Ok(t.prefetch_fills_used as f64 / t.prefetch_fills as f64)
}

/// Fraction of prefetch fills that landed in the bank their block colors to.
pub fn placement_accuracy(s: &CycleStats) -> Result<f64> {
    let t = s.l1_total();
    if t.prefetch_fills == 0 {
        return Err(SimError::UndefinedMetric("placement with zero prefetch fills"));
    }
    Ok(1.0 - t.misplaced_prefetch_fills as f64 / t.prefetch_fills as f64)
}

/// Fraction of prefetch requests resolved at the bank their block colors to,
/// counting redundant requests as well as fills.
pub fn request_placement_accuracy(s: &CycleStats) -> Result<f64> {
    let pf = s.pf_total();
    let n = pf.issued + pf.redundant_resident + pf.redundant_inflight;
    if n == 0 {
        return Err(SimError::UndefinedMetric("placement with zero prefetch requests"));
    }
    Ok(1.0 - pf.misplaced_requests as f64 / n as f64)
}

/// Crossbar queued/through ratio, computed per window across all tiles and
/// averaged over windows that delivered at least one packet.
pub fn contention_ratio(s: &CycleStats) -> Result<f64> {
    let mut per_window: BTreeMap<u64, (u64, u64)> = BTreeMap::new();
    for x in &s.xbar {
        for &(w, q, t) in &x.windows {
            let e = per_window.entry(w).or_default();
            e.0 += q;
            e.1 += t;
        }
    }
    let ratios: Vec<f64> = per_window
        .values()
        .filter(|(_, t)| *t > 0)
        .map(|&(q, t)| q as f64 / t as f64)
        .collect();
    if ratios.is_empty() {
        return Err(SimError::UndefinedMetric("contention ratio with zero crossbar throughput"));
    }
    Ok(ratios.iter().sum::<f64>() / ratios.len() as f64)
}

/// Relative drop in miss rate from `base` to `with`.
pub fn miss_rate_reduction(base: f64, with: f64) -> Result<f64> {
    if base <= 0.0 {
        return Err(SimError::UndefinedMetric("miss-rate reduction from a zero baseline"));
    }
    Ok((base - with) / base)
}

pub fn speedup(baseline_cycles: u64, cycles: u64) -> Result<f64> {
    if cycles == 0 {
        return Err(SimError::UndefinedMetric("speedup over a zero-cycle run"));
    }
    Ok(baseline_cycles as f64 / cycles as f64)
}

/// Relative cost of each event class in the energy proxy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyWeights {
    pub l1_access: f64,
    pub l2_access: f64,
    pub hbm_block: f64,
    pub pf_op: f64,
}

impl Default for EnergyWeights {
    fn default() -> Self {
        EnergyWeights {
            l1_access: 1.0,
            l2_access: 4.0,
            hbm_block: 100.0,
            pf_op: 0.5,
        }
    }
}

/// Event counts entering the energy proxy.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EnergyEvents {
    pub l1_accesses: u64,
    pub l2_accesses: u64,
    pub hbm_blocks: u64,
    pub pf_ops: u64,
}

impl EnergyEvents {
    /// L1: demand accesses plus fills. L2: reads plus absorbed write-backs.
    /// HBM: blocks read or written. PF: PFHR accesses plus issue probes.
    pub fn from_stats(s: &CycleStats) -> Self {
        let l1 = s.l1_total();
        let l2 = s.l2_total();
        let pf = s.pf_total();
        EnergyEvents {
            l1_accesses: l1.accesses + l1.fills,
            l2_accesses: l2.accesses + s.l2_writebacks_in,
            hbm_blocks: s.hbm.reads + s.hbm.writes,
            pf_ops: pf.pfhr_accesses + pf.issued + pf.redundant_resident + pf.redundant_inflight,
        }
    }

    pub fn energy(&self, w: &EnergyWeights) -> f64 {
        w.l1_access * self.l1_accesses as f64
            + w.l2_access * self.l2_accesses as f64
            + w.hbm_block * self.hbm_blocks as f64
            + w.pf_op * self.pf_ops as f64
    }
}

/// Abstract energy units; only ratios between runs are meaningful.
pub fn energy_proxy(s: &CycleStats, w: &EnergyWeights) -> f64 {
    EnergyEvents::from_stats(s).energy(w)
}

/// A cell of a flat metrics record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MetricValue {
    Count(u64),
    /// None when the metric is undefined for the run.
    Real(Option<f64>),
}

impl std::fmt::Display for MetricValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MetricValue::Count(n) => write!(f, "{n}"),
            MetricValue::Real(Some(x)) => write!(f, "{x:.6}"),
            MetricValue::Real(None) => Ok(()),
        }
    }
}

/// Field names of [`flat_record`], in output order.
pub const RECORD_FIELDS: &[&str] = &[
    "total_cycles",
    "refs_retired",
    "loads_retired",
    "cycles_stalled",
    "l1_accesses",
    "l1_hits",
    "l1_misses",
    "l1_miss_rate",
    "l1_mshr_merges",
    "l1_replacements",
    "l1_writebacks",
    "prefetch_fills",
    "prefetch_fills_used",
    "prefetch_fills_evicted_unused",
    "misplaced_prefetch_fills",
    "prefetch_accuracy",
    "placement_accuracy",
    "request_placement_accuracy",
    "pf_triggers",
    "pf_generated",
    "pf_issued",
    "pf_redundant",
    "pf_dropped",
    "pf_squashes",
    "xbar_through",
    "xbar_queued",
    "contention_ratio",
    "l2_accesses",
    "l2_misses",
    "l2_miss_rate",
    "hbm_reads",
    "hbm_writes",
    "energy",
];

/// One run as a flat record with the names in [`RECORD_FIELDS`].
pub fn flat_record(total_cycles: u64, s: &CycleStats) -> Vec<(&'static str, MetricValue)> {
    use MetricValue::{Count, Real};
    let l1 = s.l1_total();
    let l2 = s.l2_total();
    let pf = s.pf_total();
    let core = s.core_total();
    let l2_rate = (l2.accesses > 0).then(|| l2.misses as f64 / l2.accesses as f64);
    let values = [
        Count(total_cycles),
        Count(core.refs_retired()),
        Count(core.loads_retired),
        Count(core.cycles_stalled),
        Count(l1.accesses),
        Count(l1.hits),
        Count(l1.misses),
        Real(miss_rate(s).ok()),
        Count(l1.mshr_merges),
        Count(l1.replacements),
        Count(l1.writebacks),
        Count(l1.prefetch_fills),
        Count(l1.prefetch_fills_used),
        Count(l1.prefetch_fills_evicted_unused),
        Count(l1.misplaced_prefetch_fills),
        Real(prefetch_accuracy(s).ok()),
        Real(placement_accuracy(s).ok()),
        Real(request_placement_accuracy(s).ok()),
        Count(pf.triggers),
        Count(pf.generated),
        Count(pf.issued),
        Count(pf.redundant_resident + pf.redundant_inflight),
        Count(pf.dropped()),
        Count(s.pfhr_squashes),
        Count(s.xbar_through()),
        Count(s.xbar_queued()),
        Real(contention_ratio(s).ok()),
        Count(l2.accesses),
        Count(l2.misses),
        Real(l2_rate),
        Count(s.hbm.reads),
        Count(s.hbm.writes),
        Real(Some(energy_proxy(s, &EnergyWeights::default()))),
    ];
    RECORD_FIELDS.iter().copied().zip(values).collect()
}

/// Problems found by [`check_conservation`].
pub fn check_conservation(s: &CycleStats, stream_refs: u64, stream_loads: u64) -> Vec<String> {
    let mut bad = vec![];
    for (i, b) in s.l1.iter().chain(&s.l2).enumerate() {
        if b.hits + b.misses != b.accesses {
            bad.push(format!("bank {i}: hits + misses != accesses"));
        }
        if b.fills != b.mshr_allocs + b.prefetch_fills {
            bad.push(format!("bank {i}: fills {} != demand allocs {} + prefetch fills {}", b.fills, b.mshr_allocs, b.prefetch_fills));
        }
        if b.prefetch_fills_used + b.prefetch_fills_evicted_unused > b.prefetch_fills {
            bad.push(format!("bank {i}: used + evicted-unused exceeds prefetch fills"));
        }
    }
    let c = s.core_total();
    if c.refs_retired() != stream_refs {
        bad.push(format!("retired {} of {} references", c.refs_retired(), stream_refs));
    }
    if c.loads_retired != stream_loads {
        bad.push(format!("retired {} of {} loads", c.loads_retired, stream_loads));
    }
    let pf = s.pf_total();
    if pf.generated != pf.accounted() {
        bad.push(format!("prefetch candidates: {} generated, {} accounted", pf.generated, pf.accounted()));
    }
    let rates = [
        ("miss rate", miss_rate(s)),
        ("accuracy", prefetch_accuracy(s)),
        ("placement", placement_accuracy(s)),
        ("request placement", request_placement_accuracy(s)),
    ];
    for (name, v) in rates {
        if let Ok(v) = v {
            if !(0.0..=1.0).contains(&v) {
                bad.push(format!("{name} {v} outside [0, 1]"));
            }
        }
    }
    if let Ok(r) = contention_ratio(s) {
        if r < 0.0 {
            bad.push(format!("contention ratio {r} negative"));
        }
    }
    bad
}
