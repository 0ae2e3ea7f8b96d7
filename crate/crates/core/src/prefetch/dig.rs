use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::kernels::{ArrayId, MemoryImage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeKind {
    /// Each source element holds one index into the destination.
    SingleValued,
    /// Consecutive source elements (val[i], val[i+1]) bound a destination range.
    Ranged,
    /// Source element i pairs with destination element i.
    SameIndex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DigNode {
    pub id: u8,
    pub array: ArrayId,
    pub base: u64,
    pub length: u64,
    pub element_size: u32,
    pub is_trigger: bool,
}

impl DigNode {
    pub fn end(&self) -> u64 {
        self.base + self.length * self.element_size as u64
    }

    pub fn contains(&self, addr: u64) -> bool {
        addr >= self.base && addr < self.end()
    }

    pub fn index_of(&self, addr: u64) -> Option<u64> {
        self.contains(addr).then(|| (addr - self.base) / self.element_size as u64)
    }

    pub fn addr(&self, index: u64) -> u64 {
        self.base + index * self.element_size as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DigEdge {
    pub src: u8,
    pub dst: u8,
    pub kind: EdgeKind,
}

/// Data indirection graph: array descriptors plus the indirections the
/// prefetcher follows between them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dig {
    nodes: Vec<DigNode>,
    edges: Vec<DigEdge>,
}

impl Dig {
    pub fn new(nodes: Vec<DigNode>, edges: Vec<DigEdge>) -> Result<Dig> {
        for (i, n) in nodes.iter().enumerate() {
            if n.id as usize != i {
                return Err(SimError::Dig(format!("node at position {i} has id {}", n.id)));
            }
            if n.element_size == 0 {
                return Err(SimError::Dig(format!("node {i} has zero element size")));
            }
        }
        for (i, a) in nodes.iter().enumerate() {
            for b in &nodes[i + 1..] {
                if a.length > 0 && b.length > 0 && a.base < b.end() && b.base < a.end() {
                    return Err(SimError::Dig(format!("nodes {} and {} overlap", a.id, b.id)));
                }
            }
        }
        for e in &edges {
            if e.src as usize >= nodes.len() || e.dst as usize >= nodes.len() {
                return Err(SimError::Dig(format!("edge {}->{} references a missing node", e.src, e.dst)));
            }
            if e.kind == EdgeKind::SameIndex && nodes[e.src as usize].length > nodes[e.dst as usize].length {
                return Err(SimError::Dig(format!("same-index edge {}->{} has a shorter destination", e.src, e.dst)));
            }
        }
        Ok(Dig { nodes, edges })
    }

    /// A graph with no nodes: the prefetcher never triggers.
    pub fn empty() -> Dig {
        Dig { nodes: vec![], edges: vec![] }
    }

    pub fn nodes(&self) -> &[DigNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[DigEdge] {
        &self.edges
    }

    pub fn node(&self, id: u8) -> &DigNode {
        &self.nodes[id as usize]
    }

    pub fn out_edges(&self, id: u8) -> impl Iterator<Item = &DigEdge> + '_ {
        self.edges.iter().filter(move |e| e.src == id)
    }

    pub fn is_leaf(&self, id: u8) -> bool {
        self.out_edges(id).next().is_none()
    }

    pub fn triggers(&self) -> impl Iterator<Item = &DigNode> + '_ {
        self.nodes.iter().filter(|n| n.is_trigger)
    }

    /// Node whose region holds `addr`.
    pub fn node_at(&self, addr: u64) -> Option<&DigNode> {
        self.nodes.iter().find(|n| n.contains(addr))
    }

    /// Checks every node against the image region of the same array.
    pub fn check_image(&self, image: &MemoryImage) -> Result<()> {
        for n in &self.nodes {
            let r = image
                .region(n.array)
                .ok_or_else(|| SimError::Dig(format!("image has no {:?} region", n.array)))?;
            if r.base != n.base || r.len() as u64 != n.length || r.element_size != n.element_size {
                return Err(SimError::Dig(format!("node {} disagrees with the {:?} region", n.id, n.array)));
            }
        }
        Ok(())
    }
}

/// Reads element `index` of `array` from the image as an index value.
pub(crate) fn load_index(image: &MemoryImage, array: ArrayId, index: u64) -> Option<u64> {
    image.value(array, usize::try_from(index).ok()?)
}
