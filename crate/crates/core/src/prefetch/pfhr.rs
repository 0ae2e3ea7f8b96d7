use serde::{Deserialize, Serialize};

/// Live state of one prefetch sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PfhrEntry {
    pub gpe_id: u16,
    pub node: u8,
    /// First element covered by the issued block.
    pub element_index: u64,
    /// One past the last covered element.
    pub range_end: u64,
    pub chain_depth: u8,
    pub issued_block: u64,
    pub alloc_cycle: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EntryRef {
    pub bank: u16,
    pub slot: u16,
    /// Allocation serial; a stale ref no longer matches the slot.
    pub serial: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AllocOutcome {
    Free(EntryRef),
    Squashed { slot: EntryRef, victim: PfhrEntry },
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SquashEvent {
    pub cycle: u64,
    pub bank: u16,
    pub requester_gpe: u16,
    pub victim_gpe: u16,
    pub catch_up: bool,
}

#[derive(Debug, Clone, Copy)]
struct Slot {
    entry: PfhrEntry,
    serial: u64,
    valid: bool,
}

/// Per-tile PFHR storage: one single-ported bank per PF engine. When fused,
/// engines may place entries in any bank; when split, each engine only uses
/// its own.
#[derive(Debug, Clone)]
pub struct PfhrArray {
    banks: Vec<Vec<Slot>>,
    fused: bool,
    serial: u64,
    pub squash_log: Option<Vec<SquashEvent>>,
    pub squashes: u64,
}

impl PfhrArray {
    pub fn new(num_banks: usize, entries_per_bank: usize, fused: bool) -> Self {
        assert!(num_banks > 0 && entries_per_bank > 0);
        let empty = Slot {
            entry: PfhrEntry {
                gpe_id: 0,
                node: 0,
                element_index: 0,
                range_end: 0,
                chain_depth: 0,
                issued_block: 0,
                alloc_cycle: 0,
            },
            serial: 0,
            valid: false,
        };
        PfhrArray {
            banks: vec![vec![empty; entries_per_bank]; num_banks],
            fused,
            serial: 0,
            squash_log: None,
            squashes: 0,
        }
    }

    pub fn num_banks(&self) -> usize {
        self.banks.len()
    }

    pub fn is_fused(&self) -> bool {
        self.fused
    }

    /// Switches between fused and split organization, dropping all entries.
    pub fn set_fused(&mut self, fused: bool) {
        self.fused = fused;
        for b in &mut self.banks {
            for s in b.iter_mut() {
                s.valid = false;
            }
        }
    }

    fn has_free(&self, bank: usize) -> bool {
        self.banks[bank].iter().any(|s| !s.valid)
    }

    /// Bank an engine should request for a new entry: its own if it has room,
    /// otherwise (fused only) the next bank with room, otherwise its own so
    /// that a squash can be attempted.
    pub fn pick_bank(&self, engine: usize) -> usize {
        if self.has_free(engine) || !self.fused {
            return engine;
        }
        let n = self.banks.len();
        (1..n)
            .map(|k| (engine + k) % n)
            .find(|&b| self.has_free(b))
            .unwrap_or(engine)
    }

    /// Allocates in `bank`, squashing the oldest entry of the same GPE when
    /// the bank is full. Entries of other GPEs are never victims.
    pub fn allocate(&mut self, bank: usize, entry: PfhrEntry, cycle: u64) -> AllocOutcome {
        self.serial += 1;
        let serial = self.serial;
        let slots = &mut self.banks[bank];
        if let Some(i) = slots.iter().position(|s| !s.valid) {
            slots[i] = Slot { entry, serial, valid: true };
            return AllocOutcome::Free(EntryRef { bank: bank as u16, slot: i as u16, serial });
        }
        let victim = slots
            .iter()
            .enumerate()
            .filter(|(_, s)| s.entry.gpe_id == entry.gpe_id)
            .min_by_key(|(_, s)| (s.entry.alloc_cycle, s.serial))
            .map(|(i, _)| i);
        let Some(i) = victim else {
            return AllocOutcome::Failed;
        };
        let old = slots[i].entry;
        slots[i] = Slot { entry, serial, valid: true };
        self.record(cycle, bank, entry.gpe_id, old.gpe_id, false);
        AllocOutcome::Squashed {
            slot: EntryRef { bank: bank as u16, slot: i as u16, serial },
            victim: old,
        }
    }

    fn record(&mut self, cycle: u64, bank: usize, requester: u16, victim: u16, catch_up: bool) {
        self.squashes += 1;
        if let Some(log) = &mut self.squash_log {
            log.push(SquashEvent {
                cycle,
                bank: bank as u16,
                requester_gpe: requester,
                victim_gpe: victim,
                catch_up,
            });
        }
    }

    pub fn get(&self, r: EntryRef) -> Option<&PfhrEntry> {
        let s = &self.banks[r.bank as usize][r.slot as usize];
        (s.valid && s.serial == r.serial).then_some(&s.entry)
    }

    /// Frees a finished entry. Returns false if it was already gone.
    pub fn retire(&mut self, r: EntryRef) -> bool {
        let s = &mut self.banks[r.bank as usize][r.slot as usize];
        if s.valid && s.serial == r.serial {
            s.valid = false;
            true
        } else {
            false
        }
    }

    /// Whether `bank` holds a live entry of `gpe` waiting on `block`.
    pub fn has_match(&self, bank: usize, gpe: u16, block: u64) -> bool {
        self.banks[bank]
            .iter()
            .any(|s| s.valid && s.entry.gpe_id == gpe && s.entry.issued_block == block)
    }

    /// Squashes entries of `gpe` in `bank` whose block the demand stream has
    /// reached. Returns how many were dropped.
    pub fn squash_caught_up(&mut self, bank: usize, gpe: u16, block: u64, cycle: u64) -> usize {
        let mut n = 0;
        for i in 0..self.banks[bank].len() {
            let s = &mut self.banks[bank][i];
            if s.valid && s.entry.gpe_id == gpe && s.entry.issued_block == block {
                s.valid = false;
                n += 1;
                self.record(cycle, bank, gpe, gpe, true);
            }
        }
        n
    }

    pub fn live(&self) -> usize {
        self.banks.iter().flatten().filter(|s| s.valid).count()
    }

    pub fn live_in(&self, bank: usize) -> impl Iterator<Item = &PfhrEntry> + '_ {
        self.banks[bank].iter().filter(|s| s.valid).map(|s| &s.entry)
    }
}

/// Grants at most one requester per bank per cycle. Priority rotates with
/// the cycle so contending engines are served in turn. `requests` holds
/// (engine, bank); the result marks which requests were granted.
pub fn arbitrate(requests: &[(usize, usize)], num_engines: usize, fused: bool, cycle: u64, granted: &mut Vec<bool>) {
    granted.clear();
    granted.resize(requests.len(), false);
    let rot = (cycle % num_engines as u64) as usize;
    let mut winner: Vec<Option<(usize, usize)>> = vec![None; num_engines];
    for (k, &(engine, bank)) in requests.iter().enumerate() {
        assert!(fused || engine == bank, "engine {engine} touched foreign PFHR bank {bank} while split");
        let prio = (engine + num_engines - rot) % num_engines;
        if winner[bank].is_none_or(|(p, _)| prio < p) {
            winner[bank] = Some((prio, k));
        }
    }
    for (_, k) in winner.into_iter().flatten() {
        granted[k] = true;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(gpe: u16, cycle: u64) -> PfhrEntry {
        PfhrEntry {
            gpe_id: gpe,
            node: 0,
            element_index: 0,
            range_end: 1,
            chain_depth: 0,
            issued_block: 0,
            alloc_cycle: cycle,
        }
    }

    #[test]
    fn squash_spares_other_gpes() {
        let mut a = PfhrArray::new(1, 2, false);
        a.allocate(0, entry(0, 1), 1);
        let other = match a.allocate(0, entry(1, 2), 2) {
            AllocOutcome::Free(r) => r,
            o => panic!("{o:?}"),
        };
        match a.allocate(0, entry(0, 3), 3) {
            AllocOutcome::Squashed { victim, .. } => assert_eq!(victim.gpe_id, 0),
            o => panic!("{o:?}"),
        }
        assert!(a.get(other).is_some());
    }

    #[test]
    fn no_same_gpe_entry_fails() {
        let mut a = PfhrArray::new(1, 8, false);
        for c in 0..8 {
            a.allocate(0, entry(2, c), c);
        }
        assert_eq!(a.allocate(0, entry(5, 9), 9), AllocOutcome::Failed);
    }

    #[test]
    fn oldest_is_squashed() {
        let mut a = PfhrArray::new(1, 2, false);
        a.allocate(0, entry(0, 20), 20);
        a.allocate(0, entry(0, 10), 10);
        match a.allocate(0, entry(0, 30), 30) {
            AllocOutcome::Squashed { victim, .. } => assert_eq!(victim.alloc_cycle, 10),
            o => panic!("{o:?}"),
        }
    }

    #[test]
    fn stale_refs_are_ignored() {
        let mut a = PfhrArray::new(1, 1, false);
        let r = match a.allocate(0, entry(0, 1), 1) {
            AllocOutcome::Free(r) => r,
            o => panic!("{o:?}"),
        };
        a.allocate(0, entry(0, 2), 2);
        assert!(a.get(r).is_none());
        assert!(!a.retire(r));
    }

    #[test]
    fn fused_spills_to_neighbor_bank() {
        let mut a = PfhrArray::new(4, 1, true);
        a.allocate(2, entry(0, 0), 0);
        assert_eq!(a.pick_bank(2), 3);
        let mut s = PfhrArray::new(4, 1, false);
        s.allocate(2, entry(0, 0), 0);
        assert_eq!(s.pick_bank(2), 2);
    }

    #[test]
    fn round_robin_over_two_cycles() {
        let reqs = [(0, 5), (1, 5)];
        let mut g = vec![];
        arbitrate(&reqs, 16, true, 0, &mut g);
        assert_eq!(g, vec![true, false]);
        arbitrate(&reqs, 16, true, 1, &mut g);
        assert_eq!(g, vec![false, true]);
    }

    #[test]
    fn split_mode_grants_all() {
        let reqs: Vec<_> = (0..16).map(|e| (e, e)).collect();
        let mut g = vec![];
        arbitrate(&reqs, 16, false, 7, &mut g);
        assert!(g.iter().all(|&x| x));
    }

    #[test]
    #[should_panic(expected = "foreign PFHR bank")]
    fn split_mode_foreign_bank_panics() {
        let mut g = vec![];
        arbitrate(&[(0, 1)], 4, false, 0, &mut g);
    }

    #[test]
    fn catch_up_squash_is_logged() {
        let mut a = PfhrArray::new(1, 4, false);
        a.squash_log = Some(vec![]);
        let mut e = entry(3, 0);
        e.issued_block = 0x40;
        a.allocate(0, e, 0);
        assert!(a.has_match(0, 3, 0x40));
        assert_eq!(a.squash_caught_up(0, 3, 0x40, 5), 1);
        assert_eq!(a.live(), 0);
        assert_eq!(a.squash_log.as_ref().unwrap()[0].victim_gpe, 3);
    }
}
