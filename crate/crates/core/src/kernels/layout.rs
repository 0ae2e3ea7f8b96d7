use serde::{Deserialize, Serialize};

use crate::graph::Graph;

/// Base of the first region; arbitrary but block aligned for any sane block size.
const IMAGE_BASE: u64 = 0x1000_0000;

/// Stable identities of the arrays a kernel touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ArrayId {
    Offsets,
    Neighbors,
    Weights,
    Prop,
    PropNext,
}

/// A contiguous array in the simulated address space. `payload` holds the
/// raw element values widened to 64 bits; `element_size` is the footprint in
/// memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub array: ArrayId,
    pub base: u64,
    pub element_size: u32,
    pub payload: Vec<u64>,
}

impl Region {
    pub fn len(&self) -> usize {
        self.payload.len()
    }

    pub fn is_empty(&self) -> bool {
        self.payload.is_empty()
    }

    pub fn end(&self) -> u64 {
        self.base + self.payload.len() as u64 * self.element_size as u64
    }

    #[inline]
    pub fn addr(&self, index: usize) -> u64 {
        self.base + index as u64 * self.element_size as u64
    }

    #[inline]
    pub fn contains(&self, addr: u64) -> bool {
        addr >= self.base && addr < self.end()
    }

    pub fn span(&self) -> RegionSpan {
        RegionSpan {
            base: self.base,
            element_size: self.element_size,
            len: self.len(),
        }
    }
}

/// Placement of a region without its payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegionSpan {
    pub base: u64,
    pub element_size: u32,
    pub len: usize,
}

impl RegionSpan {
    #[inline]
    pub fn addr(&self, index: usize) -> u64 {
        debug_assert!(index < self.len);
        self.base + index as u64 * self.element_size as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryImage {
    pub block_size: u64,
    regions: Vec<Region>,
}

impl MemoryImage {
    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn region(&self, id: ArrayId) -> Option<&Region> {
        self.regions.iter().find(|r| r.array == id)
    }

    pub(crate) fn region_mut(&mut self, id: ArrayId) -> Option<&mut Region> {
        self.regions.iter_mut().find(|r| r.array == id)
    }

    /// Address of element `index` of `id`. Panics if the array is absent.
    #[inline]
    pub fn addr(&self, id: ArrayId, index: usize) -> u64 {
        self.region(id).expect("array laid out").addr(index)
    }

    /// Maps an address back to `(array, element index)`.
    pub fn locate(&self, addr: u64) -> Option<(ArrayId, usize)> {
        self.regions.iter().find(|r| r.contains(addr)).map(|r| {
            (r.array, ((addr - r.base) / r.element_size as u64) as usize)
        })
    }

    pub fn value(&self, id: ArrayId, index: usize) -> Option<u64> {
        self.region(id).and_then(|r| r.payload.get(index).copied())
    }
}

fn align_up(x: u64, a: u64) -> u64 {
    x.div_ceil(a) * a
}

/// Lays out OFFSETS (8 B), NEIGHBORS (4 B), optionally WEIGHTS (4 B), and the
/// PROP / PROP_NEXT property arrays (4 B per vertex) in consecutive
/// block-aligned regions.
pub fn layout_graph(g: &Graph, block_size: u64, include_weights: bool) -> MemoryImage {
    assert!(block_size.is_power_of_two(), "block size must be a power of two");
    let n = g.num_vertices();
    let mut arrays: Vec<(ArrayId, u32, Vec<u64>)> = vec![
        (ArrayId::Offsets, 8, g.col_ptr().to_vec()),
        (ArrayId::Neighbors, 4, g.row_idx().iter().map(|&u| u as u64).collect()),
    ];
    if include_weights {
        arrays.push((
            ArrayId::Weights,
            4,
            g.edge_weight().iter().map(|w| w.to_bits() as u64).collect(),
        ));
    }
    arrays.push((ArrayId::Prop, 4, vec![0; n]));
    arrays.push((ArrayId::PropNext, 4, vec![0; n]));

    let mut next = IMAGE_BASE;
    let regions = arrays
        .into_iter()
        .map(|(array, element_size, payload)| {
            let base = align_up(next, block_size);
            let r = Region { array, base, element_size, payload };
            // Keep at least one block between regions so empty arrays stay disjoint.
            next = align_up(r.end(), block_size) + block_size;
            r
        })
        .collect();
    MemoryImage { block_size, regions }
}
