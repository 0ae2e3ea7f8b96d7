//! Cycle driver: runs a kernel's reference streams through the tiles, the
//! crossbar, the L2 and HBM, with or without the prefetcher.

mod driver;
mod tile;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::kernels::{KernelResult, KernelRun};
use crate::mem::{CacheConfig, CacheMode, HbmConfig};
use crate::metrics::{self, CycleStats};
use crate::prefetch::{PrefetchConfig, SquashEvent};

pub use driver::{PortEvent, SimLog};
pub use tile::Tile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TmConfig {
    pub tiles: usize,
    pub gpes_per_tile: usize,
    /// Per-bank L1 geometry; one bank per GPE.
    pub l1: CacheConfig,
    /// Per-bank L2 geometry.
    pub l2: CacheConfig,
    pub l2_banks_per_tile: usize,
    pub mode: CacheMode,
    pub hbm: HbmConfig,
    pub pf: PrefetchConfig,
    pub seed: u64,
    pub max_cycles: u64,
    /// Abort after this many cycles without any progress.
    pub livelock_cycles: u64,
    /// Window length for contention averaging.
    pub contention_window: u64,
}

impl Default for TmConfig {
    fn default() -> Self {
        TmConfig {
            tiles: 4,
            gpes_per_tile: 16,
            l1: CacheConfig::l1_default(),
            l2: CacheConfig::l2_default(),
            l2_banks_per_tile: 4,
            mode: CacheMode::Shared,
            hbm: HbmConfig::default(),
            pf: PrefetchConfig::default(),
            seed: 1,
            max_cycles: 2_000_000_000,
            livelock_cycles: 1_000_000,
            contention_window: 1000,
        }
    }
}

impl TmConfig {
    pub fn new(tiles: usize, gpes_per_tile: usize) -> Self {
        TmConfig {
            tiles,
            gpes_per_tile,
            ..Default::default()
        }
    }

    pub fn num_gpes(&self) -> usize {
        self.tiles * self.gpes_per_tile
    }

    pub fn num_l2_banks(&self) -> usize {
        self.tiles * self.l2_banks_per_tile
    }

    pub fn l2_total_bytes(&self) -> u64 {
        self.l2.size_bytes * self.num_l2_banks() as u64
    }

    /// Sets the L2 size by total capacity, split evenly over all banks.
    pub fn set_l2_total_bytes(&mut self, total: u64) -> Result<()> {
        let banks = self.num_l2_banks() as u64;
        if banks == 0 || !total.is_multiple_of(banks) {
            return Err(SimError::Validation(format!("L2 total {total} B does not split over {banks} banks")));
        }
        self.l2.size_bytes = total / banks;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.tiles == 0 || self.gpes_per_tile == 0 {
            return Err(SimError::Validation("tiles and GPEs per tile must be at least 1".into()));
        }
        if self.num_gpes() > u16::MAX as usize {
            return Err(SimError::Validation("too many GPEs".into()));
        }
        if self.l2_banks_per_tile == 0 {
            return Err(SimError::Validation("need at least one L2 bank per tile".into()));
        }
        self.l1.validate()?;
        self.l2.validate()?;
        if self.l1.block_bytes != self.l2.block_bytes {
            return Err(SimError::Validation("L1 and L2 block sizes differ".into()));
        }
        self.hbm.validate()?;
        self.pf.validate()?;
        if self.contention_window == 0 || self.livelock_cycles == 0 {
            return Err(SimError::Validation("window and livelock limits must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SimResult {
    pub total_cycles: u64,
    pub stats: CycleStats,
    pub result: KernelResult,
    pub log: Option<SimLog>,
}

impl SimResult {
    pub fn miss_rate(&self) -> Result<f64> {
        metrics::miss_rate(&self.stats)
    }
}

/// Runs `kr` on the configured machine.
pub fn run_simulation(kr: &KernelRun, cfg: &TmConfig) -> Result<SimResult> {
    driver::Simulator::new(kr, cfg, false)?.run()
}

/// Like [`run_simulation`], also recording the event log.
pub fn run_simulation_logged(kr: &KernelRun, cfg: &TmConfig) -> Result<SimResult> {
    driver::Simulator::new(kr, cfg, true)?.run()
}

#[derive(Debug, Clone)]
pub struct BaselineAndPf {
    pub baseline: SimResult,
    pub pf: SimResult,
    pub speedup: f64,
}

/// Runs once without and once with the prefetcher, same seed.
pub fn run_baseline_and_pf(kr: &KernelRun, cfg: &TmConfig) -> Result<BaselineAndPf> {
    let mut off = *cfg;
    off.pf.enabled = false;
    let mut on = *cfg;
    on.pf.enabled = true;
    let baseline = run_simulation(kr, &off)?;
    let pf = run_simulation(kr, &on)?;
    let speedup = metrics::speedup(baseline.total_cycles, pf.total_cycles)?;
    Ok(BaselineAndPf { baseline, pf, speedup })
}

/// Release cycle for a barrier given each participant's arrival: the cycle
/// after the last arrival. None when nobody arrived.
pub fn phase_barrier(arrivals: &[u64]) -> Option<u64> {
    arrivals.iter().max().map(|&m| m + 1)
}

/// Squash events whose victim belonged to a different GPE.
pub fn cross_gpe_squashes(log: &SimLog) -> impl Iterator<Item = &SquashEvent> + '_ {
    log.squashes.iter().filter(|s| s.requester_gpe != s.victim_gpe)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn barrier_examples() {
        assert_eq!(phase_barrier(&[5]), Some(6));
        assert_eq!(phase_barrier(&[5, 9]), Some(10));
        assert_eq!(phase_barrier(&[]), None);
    }

    #[test]
    fn l2_total_splits_over_banks() {
        let mut c = TmConfig::default();
        assert_eq!(c.l2_total_bytes(), 64 * 1024);
        c.l2_banks_per_tile = 8;
        c.set_l2_total_bytes(64 * 1024).unwrap();
        assert_eq!(c.l2.size_bytes, 2048);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn rejects_zero_tiles() {
        assert!(TmConfig::new(0, 16).validate().is_err());
    }
}
