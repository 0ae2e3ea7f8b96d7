//! Data-indirect prefetcher: the DIG description of a kernel's arrays, the
//! per-tile PFHR array, and the per-bank prefetch engines.

mod dig;
mod engine;
mod pfhr;

pub use dig::{Dig, DigEdge, DigNode, EdgeKind};
pub use engine::{block_candidates, expand, trigger_target, Candidate, PfEngine, PfStats, PfhrOp, PrefetchConfig, Queued};
pub use pfhr::{arbitrate, AllocOutcome, EntryRef, PfhrArray, PfhrEntry, SquashEvent};
