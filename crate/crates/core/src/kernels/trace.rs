//! Binary dump of kernel streams for debugging.
//!
//! The file is a flat array of little-endian 17-byte records
//! `address: u64, gpe_id: u32, compute_gap: u32, kind: u8`, GPE-major in
//! stream order. `kind` is 0 for a load, 1 for a store and 2 for a phase
//! barrier (address and gap are zero).

use std::io::Write;
use std::path::Path;

use super::{KernelRun, MemRef, RefKind};
use crate::error::{Result, SimError};

pub const RECORD_BYTES: usize = 17;

const KIND_LOAD: u8 = 0;
const KIND_STORE: u8 = 1;
const KIND_BARRIER: u8 = 2;

fn record(out: &mut Vec<u8>, address: u64, gpe: u32, gap: u32, kind: u8) {
    out.extend_from_slice(&address.to_le_bytes());
    out.extend_from_slice(&gpe.to_le_bytes());
    out.extend_from_slice(&gap.to_le_bytes());
    out.push(kind);
}

pub fn encode(run: &KernelRun) -> Vec<u8> {
    let mut out = Vec::with_capacity((run.total_refs() + run.num_gpes * run.num_phases()) * RECORD_BYTES);
    for (gpe, s) in run.streams.iter().enumerate() {
        for p in 0..s.num_phases() {
            for r in s.phase(p) {
                let kind = match r.kind {
                    RefKind::Load => KIND_LOAD,
                    RefKind::Store => KIND_STORE,
                };
                record(&mut out, r.address, r.gpe_id as u32, r.compute_gap as u32, kind);
            }
            record(&mut out, 0, gpe as u32, 0, KIND_BARRIER);
        }
    }
    out
}

pub fn write(run: &KernelRun, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut f = std::fs::File::create(path).map_err(|e| SimError::io(path, e))?;
    f.write_all(&encode(run)).map_err(|e| SimError::io(path, e))
}

/// Decoded trace entry; `None` marks a barrier.
pub fn decode(bytes: &[u8]) -> Result<Vec<Option<MemRef>>> {
    if !bytes.len().is_multiple_of(RECORD_BYTES) {
        return Err(SimError::Validation("trace length is not a whole number of records".into()));
    }
    bytes
        .chunks_exact(RECORD_BYTES)
        .map(|c| {
            let address = u64::from_le_bytes(c[0..8].try_into().unwrap());
            let gpe = u32::from_le_bytes(c[8..12].try_into().unwrap());
            let gap = u32::from_le_bytes(c[12..16].try_into().unwrap());
            let kind = match c[16] {
                KIND_LOAD => RefKind::Load,
                KIND_STORE => RefKind::Store,
                KIND_BARRIER => return Ok(None),
                k => return Err(SimError::Validation(format!("bad trace record kind {k}"))),
            };
            Ok(Some(MemRef {
                address,
                gpe_id: gpe as u16,
                kind,
                compute_gap: gap as u16,
            }))
        })
        .collect()
}
