//! Compressed-sparse-column graphs, their loaders, and synthetic generators.
//!
//! Column `v` of the CSC lists the in-neighbors of `v`: an edge `u -> v` is
//! stored as `row_idx[k] = u` for some `k` in `col_ptr[v]..col_ptr[v + 1]`.
//! Every kernel in this crate runs in pull mode, so out-edges are never
//! materialized.

mod gen;
mod io;

pub use gen::{gen_kronecker, gen_uniform_random, RMAT_INITIATOR};
pub use io::{load_edge_list, read_csc, write_csc, write_edge_list};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// Vertex ids are 32-bit.
pub type VertexId = u32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    num_vertices: usize,
    col_ptr: Vec<u64>,
    row_idx: Vec<VertexId>,
    edge_weight: Vec<f32>,
    weighted: bool,
}

impl Graph {
    /// Builds a CSC graph from `(src, dst, weight)` triples. Edge order
    /// within a column follows the input order.
    pub fn from_edges(num_vertices: usize, edges: &[(VertexId, VertexId, f32)], weighted: bool) -> Result<Self> {
        let mut counts = vec![0u64; num_vertices + 1];
        for &(src, dst, w) in edges {
            if src as usize >= num_vertices || dst as usize >= num_vertices {
                return Err(SimError::Validation(format!(
                    "edge {src}->{dst} out of range for {num_vertices} vertices"
                )));
            }
            if !(w >= 0.0) {
                return Err(SimError::Validation(format!("edge {src}->{dst} has negative weight {w}")));
            }
            counts[dst as usize + 1] += 1;
        }
        for v in 0..num_vertices {
            counts[v + 1] += counts[v];
        }
        let col_ptr = counts;
        let mut cursor: Vec<u64> = col_ptr[..num_vertices].to_vec();
        let mut row_idx = vec![0; edges.len()];
        let mut edge_weight = vec![1.0; edges.len()];
        for &(src, dst, w) in edges {
            let slot = cursor[dst as usize] as usize;
            cursor[dst as usize] += 1;
            row_idx[slot] = src;
            edge_weight[slot] = if weighted { w } else { 1.0 };
        }
        Ok(Graph {
            num_vertices,
            col_ptr,
            row_idx,
            edge_weight,
            weighted,
        })
    }

    /// Assembles a graph from raw CSC arrays, checking every invariant.
    pub fn from_csc(col_ptr: Vec<u64>, row_idx: Vec<VertexId>, edge_weight: Vec<f32>, weighted: bool) -> Result<Self> {
        if col_ptr.is_empty() {
            return Err(SimError::Validation("col_ptr must have n+1 entries".into()));
        }
        let g = Graph {
            num_vertices: col_ptr.len() - 1,
            col_ptr,
            row_idx,
            edge_weight,
            weighted,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vertices;
        if self.col_ptr.len() != n + 1 || self.col_ptr[0] != 0 {
            return Err(SimError::Validation("col_ptr must start at 0 and hold n+1 entries".into()));
        }
        if self.col_ptr.windows(2).any(|w| w[0] > w[1]) {
            return Err(SimError::Validation("col_ptr is not nondecreasing".into()));
        }
        if self.col_ptr[n] as usize != self.row_idx.len() || self.edge_weight.len() != self.row_idx.len() {
            return Err(SimError::Validation("col_ptr[n] must equal the edge count".into()));
        }
        if let Some(bad) = self.row_idx.iter().find(|&&u| u as usize >= n) {
            return Err(SimError::Validation(format!("row index {bad} >= n={n}")));
        }
        if let Some(bad) = self.edge_weight.iter().find(|w| !(**w >= 0.0)) {
            return Err(SimError::Validation(format!("negative edge weight {bad}")));
        }
        Ok(())
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_edges(&self) -> usize {
        self.row_idx.len()
    }

    pub fn col_ptr(&self) -> &[u64] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[VertexId] {
        &self.row_idx
    }

    pub fn edge_weight(&self) -> &[f32] {
        &self.edge_weight
    }

    pub fn is_weighted(&self) -> bool {
        self.weighted
    }

    /// Range of edge slots holding the in-neighbors of `v`.
    pub fn in_range(&self, v: usize) -> std::ops::Range<usize> {
        self.col_ptr[v] as usize..self.col_ptr[v + 1] as usize
    }

    pub fn in_neighbors(&self, v: usize) -> &[VertexId] {
        &self.row_idx[self.in_range(v)]
    }

    pub fn in_degree(&self, v: usize) -> usize {
        (self.col_ptr[v + 1] - self.col_ptr[v]) as usize
    }

    /// Out-degree of every vertex, counted from appearances in `row_idx`.
    pub fn out_degrees(&self) -> Vec<u32> {
        let mut deg = vec![0u32; self.num_vertices];
        for &u in &self.row_idx {
            deg[u as usize] += 1;
        }
        deg
    }

    /// Edges as `(src, dst, weight)` in column order.
    pub fn edges(&self) -> impl Iterator<Item = (VertexId, VertexId, f32)> + '_ {
        (0..self.num_vertices).flat_map(move |v| {
            self.in_range(v)
                .map(move |k| (self.row_idx[k], v as VertexId, self.edge_weight[k]))
        })
    }

    /// Replaces the weights with integers drawn uniformly from `1..=max_weight`.
    pub fn with_random_weights(mut self, max_weight: u32, seed: u64) -> Self {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x5745_4947_4854);
        let hi = max_weight.max(1);
        for w in &mut self.edge_weight {
            *w = rng.gen_range(1..=hi) as f32;
        }
        self.weighted = true;
        self
    }
}

/// In-degree summary of a graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DegreeStats {
    pub min: usize,
    pub max: usize,
    pub mean: f64,
}

pub fn degree_stats(g: &Graph) -> DegreeStats {
    let n = g.num_vertices();
    if n == 0 {
        return DegreeStats { min: 0, max: 0, mean: 0.0 };
    }
    let (mut min, mut max) = (usize::MAX, 0);
    for v in 0..n {
        let d = g.in_degree(v);
        min = min.min(d);
        max = max.max(d);
    }
    DegreeStats {
        min,
        max,
        mean: g.num_edges() as f64 / n as f64,
    }
}

/// How a workload graph is obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GraphSpec {
    EdgeListFile {
        path: std::path::PathBuf,
        #[serde(default)]
        weighted: bool,
    },
    UniformRandom {
        n: usize,
        avg_degree: f64,
        #[serde(default)]
        seed: u64,
        /// Integer weights in `1..=max_weight` when set.
        #[serde(default)]
        max_weight: Option<u32>,
    },
    Kronecker {
        scale: u32,
        edge_factor: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        max_weight: Option<u32>,
    },
}

impl GraphSpec {
    pub fn build(&self) -> Result<Graph> {
        match self {
            GraphSpec::EdgeListFile { path, weighted } => load_edge_list(path, *weighted),
            GraphSpec::UniformRandom { n, avg_degree, seed, max_weight } => {
                let g = gen_uniform_random(*n, *avg_degree, *seed)?;
                Ok(match max_weight {
                    Some(w) => g.with_random_weights(*w, *seed),
                    None => g,
                })
            }
            GraphSpec::Kronecker { scale, edge_factor, seed, max_weight } => {
                let g = gen_kronecker(*scale, *edge_factor, *seed)?;
                Ok(match max_weight {
                    Some(w) => g.with_random_weights(*w, *seed),
                    None => g,
                })
            }
        }
    }

    /// Parses the compact command-line form, e.g. `uniform:n=10000,deg=8,seed=1`,
    /// `kronecker:scale=12,ef=8` or `file:graph.el`.
    pub fn parse_compact(s: &str) -> Result<Self> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let bad = |msg: String| SimError::config("graph", msg);
        if kind == "file" {
            let (path, weighted) = match rest.strip_suffix(",weighted") {
                Some(p) => (p, true),
                None => (rest, false),
            };
            return Ok(GraphSpec::EdgeListFile {
                path: path.into(),
                weighted,
            });
        }
        let mut kv = std::collections::BTreeMap::new();
        for part in rest.split(',').filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got `{part}`")))?;
            kv.insert(k.trim(), v.trim());
        }
        let num = |key: &str, default: Option<f64>| -> Result<f64> {
            match kv.get(key) {
                Some(v) => v.parse().map_err(|_| bad(format!("`{key}` is not a number: {v}"))),
                None => default.ok_or_else(|| bad(format!("missing `{key}`"))),
            }
        };
        let max_weight = kv.get("w").map(|v| v.parse()).transpose().map_err(|_| bad("bad `w`".into()))?;
        match kind {
            "uniform" => Ok(GraphSpec::UniformRandom {
                n: num("n", None)? as usize,
                avg_degree: num("deg", Some(8.0))?,
                seed: num("seed", Some(1.0))? as u64,
                max_weight,
            }),
            "kronecker" => Ok(GraphSpec::Kronecker {
                scale: num("scale", None)? as u32,
                edge_factor: num("ef", Some(8.0))? as usize,
                seed: num("seed", Some(1.0))? as u64,
                max_weight,
            }),
            other => Err(bad(format!("unknown graph kind `{other}`"))),
        }
    }
}

impl std::fmt::Display for GraphSpec {
    /// Writes the compact form accepted by [`GraphSpec::parse_compact`].
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let w = |f: &mut std::fmt::Formatter<'_>, mw: &Option<u32>| match mw {
            Some(w) => write!(f, ",w={w}"),
            None => Ok(()),
        };
        match self {
            GraphSpec::EdgeListFile { path, weighted } => {
                write!(f, "file:{}{}", path.display(), if *weighted { ",weighted" } else { "" })
            }
            GraphSpec::UniformRandom { n, avg_degree, seed, max_weight } => {
                write!(f, "uniform:n={n},deg={avg_degree},seed={seed}")?;
                w(f, max_weight)
            }
            GraphSpec::Kronecker { scale, edge_factor, seed, max_weight } => {
                write!(f, "kronecker:scale={scale},ef={edge_factor},seed={seed}")?;
                w(f, max_weight)
            }
        }
    }
}
