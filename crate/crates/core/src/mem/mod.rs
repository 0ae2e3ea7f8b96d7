//! Reconfigurable cache and interconnect model: set-associative banks with
//! MSHRs, the L1-to-L2 crossbar, and the HBM channel model.

mod cache;
mod hbm;
mod xbar;

pub use cache::{Access, BankStats, CacheBank, CacheConfig, CacheMode, Eviction, FillOutcome, Mshr};
pub use hbm::{HbmConfig, HbmModel, HbmStats};
pub use xbar::{Crossbar, Packet, PacketKind, XbarStats};

/// Bank that owns `address` under block-interleaved coloring.
#[inline]
pub fn color(address: u64, block_size: u64, num_banks: usize) -> usize {
    debug_assert!(num_banks >= 1);
    ((address / block_size) % num_banks as u64) as usize
}

/// Aligns an address down to its block.
#[inline]
pub fn block_of(address: u64, block_size: u64) -> u64 {
    address & !(block_size - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn color_examples() {
        assert_eq!(color(0, 64, 16), 0);
        assert_eq!(color(64, 64, 16), 1);
        assert_eq!(color(64 * 16, 64, 16), 0);
        assert_eq!(color(63, 64, 16), 0);
        assert_eq!(color(12345, 64, 1), 0);
    }
}
