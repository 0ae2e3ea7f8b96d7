use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HbmConfig {
    pub channels: u32,
    pub latency_min: u64,
    pub latency_max: u64,
    /// Cycles a channel stays busy per block transferred.
    pub occupancy: u64,
}

impl Default for HbmConfig {
    fn default() -> Self {
        HbmConfig {
            channels: 16,
            latency_min: 80,
            latency_max: 150,
            occupancy: 8,
        }
    }
}

impl HbmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 {
            return Err(SimError::Validation("HBM needs at least one channel".into()));
        }
        if self.latency_min > self.latency_max {
            return Err(SimError::Validation(format!(
                "HBM latency range [{}, {}] is empty",
                self.latency_min, self.latency_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HbmStats {
    pub reads: u64,
    pub writes: u64,
    /// Cycles requests spent waiting for a busy channel.
    pub queue_cycles: u64,
}

/// Channel-interleaved main memory. Each channel serializes transfers; the
/// access latency is drawn uniformly from the configured range.
#[derive(Debug, Clone)]
pub struct HbmModel {
    cfg: HbmConfig,
    block_bytes: u64,
    free_at: Vec<u64>,
    rng: ChaCha8Rng,
    pub stats: HbmStats,
}

impl HbmModel {
    pub fn new(cfg: HbmConfig, block_bytes: u64, seed: u64) -> Result<Self> {
        cfg.validate()?;
        Ok(HbmModel {
            cfg,
            block_bytes,
            free_at: vec![0; cfg.channels as usize],
            rng: ChaCha8Rng::seed_from_u64(seed),
            stats: HbmStats::default(),
        })
    }

    pub fn channel_of(&self, block: u64) -> usize {
        ((block / self.block_bytes) % self.cfg.channels as u64) as usize
    }

    fn occupy(&mut self, block: u64, cycle: u64) -> u64 {
        let ch = self.channel_of(block);
        let start = self.free_at[ch].max(cycle);
        self.stats.queue_cycles += start - cycle;
        self.free_at[ch] = start + self.cfg.occupancy;
        start
    }

    /// Issues a read at `cycle` and returns the cycle its data is available.
    pub fn read(&mut self, block: u64, cycle: u64) -> u64 {
        self.stats.reads += 1;
        let start = self.occupy(block, cycle);
        let lat = self.rng.gen_range(self.cfg.latency_min..=self.cfg.latency_max);
        start + self.cfg.occupancy + lat
    }

    /// Posted write: consumes channel bandwidth, nothing waits on it.
    pub fn write(&mut self, block: u64, cycle: u64) {
        self.stats.writes += 1;
        self.occupy(block, cycle);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn latency_within_range() {
        let mut h = HbmModel::new(HbmConfig::default(), 64, 1).unwrap();
        for i in 0..1000u64 {
            let t = i * 1000;
            let done = h.read(i * 64, t);
            let lat = done - t - 8;
            assert!((80..=150).contains(&lat), "latency {lat}");
        }
    }

    #[test]
    fn same_channel_serializes() {
        let cfg = HbmConfig { latency_min: 100, latency_max: 100, ..Default::default() };
        let mut h = HbmModel::new(cfg, 64, 0).unwrap();
        let a = h.read(0, 0);
        let b = h.read(16 * 64, 0);
        let c = h.read(64, 0);
        assert_eq!(a, 108);
        assert_eq!(b, 116);
        assert_eq!(c, 108);
        assert_eq!(h.stats.queue_cycles, 8);
    }

    #[test]
    fn seeded_draws_repeat() {
        let mut a = HbmModel::new(HbmConfig::default(), 64, 9).unwrap();
        let mut b = HbmModel::new(HbmConfig::default(), 64, 9).unwrap();
        for i in 0..100 {
            assert_eq!(a.read(i * 64, i), b.read(i * 64, i));
        }
    }

    #[test]
    fn empty_range_rejected() {
        let cfg = HbmConfig { latency_min: 10, latency_max: 5, ..Default::default() };
        assert!(HbmModel::new(cfg, 64, 0).is_err());
    }
}
