//! Cycle-approximate simulator of a reconfigurable manycore memory hierarchy
//! with a data-indirect graph prefetcher.
//!
//! ```
//! # fn main() -> tmsim::Result<()> {
//! use std::sync::Arc;
//! use tmsim::{run_kernel, run_simulation, GraphSpec, KernelKind, KernelParams, TmConfig};
//!
//! let g = Arc::new(GraphSpec::parse_compact("uniform:n=500,deg=4")?.build()?);
//! let cfg = TmConfig::new(2, 4);
//! let kr = run_kernel(KernelKind::Bfs, g, cfg.num_gpes(), KernelParams::default(), cfg.l1.block_bytes)?;
//! let r = run_simulation(&kr, &cfg)?;
//! assert_eq!(r.result, kr.result);
//! assert!(r.miss_rate()? <= 1.0);
//! # Ok(())
//! # }
//! ```

pub mod error;
pub mod graph;
pub mod harness;
pub mod kernels;
pub mod mem;
pub mod metrics;
pub mod prefetch;
pub mod sim;

pub use error::{Result, SimError};
pub use graph::{Graph, GraphSpec};
pub use kernels::{run_kernel, KernelKind, KernelParams, KernelResult, KernelRun};
pub use sim::{run_baseline_and_pf, run_simulation, SimResult, TmConfig};
