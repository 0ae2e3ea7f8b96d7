use crate::error::{Result, SimError};
use crate::mem::{color, CacheBank, CacheConfig, CacheMode};
use crate::prefetch::{PfEngine, PfhrArray, PrefetchConfig};

/// One tile: an L1 bank and PF engine per GPE, and the tile's PFHR array.
#[derive(Debug, Clone)]
pub struct Tile {
    pub id: usize,
    mode: CacheMode,
    fuse_when_shared: bool,
    pub banks: Vec<CacheBank>,
    pub engines: Vec<PfEngine>,
    pub pfhr: PfhrArray,
}

impl Tile {
    pub fn new(id: usize, gpes: usize, l1: CacheConfig, mode: CacheMode, pf: &PrefetchConfig) -> Result<Tile> {
        let mut banks = (0..gpes).map(|_| CacheBank::new(l1)).collect::<Result<Vec<_>>>()?;
        if mode == CacheMode::Shared {
            for b in &mut banks {
                b.set_interleave(gpes)?;
            }
        }
        let engines = (0..gpes).map(|e| PfEngine::new(id * gpes + e, pf.distance)).collect();
        Ok(Tile {
            id,
            mode,
            fuse_when_shared: pf.fused,
            banks,
            engines,
            pfhr: PfhrArray::new(gpes, pf.entries_per_gpe, mode == CacheMode::Shared && pf.fused),
        })
    }

    pub fn mode(&self) -> CacheMode {
        self.mode
    }

    pub fn num_banks(&self) -> usize {
        self.banks.len()
    }

    /// Local bank serving `addr` for local GPE `gpe`.
    #[inline]
    pub fn bank_for(&self, gpe: usize, addr: u64) -> usize {
        match self.mode {
            CacheMode::Private => gpe,
            CacheMode::Shared => color(addr, self.banks[0].config().block_bytes, self.banks.len()),
        }
    }

    pub fn outstanding(&self) -> usize {
        self.banks.iter().map(|b| b.outstanding()).sum()
    }

    /// Switches cache mode at a phase boundary: every L1 line is dropped
    /// (dirty ones counted as flushed) and the PFHR array is fused or split
    /// to match. Returns the number of flushed dirty lines.
    pub fn reconfigure(&mut self, mode: CacheMode) -> Result<u64> {
        if self.outstanding() > 0 {
            return Err(SimError::Precondition(format!(
                "tile {} has {} outstanding misses",
                self.id,
                self.outstanding()
            )));
        }
        if mode == self.mode {
            return Ok(0);
        }
        let mut flushed = 0;
        let n = self.banks.len();
        for b in &mut self.banks {
            flushed += b.invalidate_all()?;
            b.set_interleave(if mode == CacheMode::Shared { n } else { 1 })?;
        }
        self.mode = mode;
        self.pfhr.set_fused(mode == CacheMode::Shared && self.fuse_when_shared);
        Ok(flushed)
    }

    /// In shared mode, whether every resident block sits in its colored bank.
    pub fn coloring_holds(&self) -> bool {
        if self.mode == CacheMode::Private {
            return true;
        }
        let n = self.banks.len();
        self.banks.iter().enumerate().all(|(i, b)| {
            let bs = b.config().block_bytes;
            b.resident_blocks().all(|blk| color(blk, bs, n) == i)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tile(mode: CacheMode) -> Tile {
        Tile::new(0, 4, CacheConfig::l1_default(), mode, &PrefetchConfig::default()).unwrap()
    }

    #[test]
    fn private_to_shared_empties_banks() {
        let mut t = tile(CacheMode::Private);
        t.banks[1].access(0x40, true, 0);
        t.banks[1].fill(0x40);
        assert!(!t.pfhr.is_fused());
        assert_eq!(t.reconfigure(CacheMode::Shared).unwrap(), 1);
        assert_eq!(t.mode(), CacheMode::Shared);
        assert!(t.pfhr.is_fused());
        assert!(t.banks.iter().all(|b| b.resident_blocks().next().is_none()));
    }

    #[test]
    fn same_mode_is_noop() {
        let mut t = tile(CacheMode::Shared);
        t.banks[1].access(0x40, false, 0);
        t.banks[1].fill(0x40);
        assert_eq!(t.reconfigure(CacheMode::Shared).unwrap(), 0);
        assert!(t.banks[1].probe(0x40));
    }

    #[test]
    fn mid_miss_reconfigure_fails() {
        let mut t = tile(CacheMode::Shared);
        t.banks[0].access(0x0, false, 0);
        assert!(matches!(t.reconfigure(CacheMode::Private), Err(SimError::Precondition(_))));
    }

    #[test]
    fn shared_routing_uses_color() {
        let t = tile(CacheMode::Shared);
        assert_eq!(t.bank_for(0, 64 * 5), 1);
        let p = tile(CacheMode::Private);
        assert_eq!(p.bank_for(3, 64 * 5), 3);
    }
}
