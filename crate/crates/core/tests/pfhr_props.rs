use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tmsim::prefetch::{arbitrate, AllocOutcome, PfhrArray, PfhrEntry};

fn entry(gpe: u16, block: u64, cycle: u64) -> PfhrEntry {
    PfhrEntry {
        gpe_id: gpe,
        node: 0,
        element_index: 0,
        range_end: 0,
        chain_depth: 0,
        issued_block: block,
        alloc_cycle: cycle,
    }
}

/// Random allocate / retire / catch-up traffic against a reference model of
/// each bank's contents, checking every squash only ever hits the requester.
fn squash_isolation(seed: u64, events: usize, banks: usize, entries: usize, gpes: u16, fused: bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut arr = PfhrArray::new(banks, entries, fused);
    arr.squash_log = Some(vec![]);
    let mut refs = vec![];
    for cycle in 0..events as u64 {
        let gpe = rng.gen_range(0..gpes);
        match rng.gen_range(0..10) {
            0..=6 => {
                let bank = arr.pick_bank(rng.gen_range(0..banks));
                let full = arr.live_in(bank).count() == entries;
                let same_gpe = arr.live_in(bank).any(|e| e.gpe_id == gpe);
                let mut oldest = arr.live_in(bank).filter(|e| e.gpe_id == gpe).map(|e| e.alloc_cycle).collect::<Vec<_>>();
                oldest.sort();
                match arr.allocate(bank, entry(gpe, rng.gen_range(0..64), cycle), cycle) {
                    AllocOutcome::Free(r) => {
                        assert!(!full);
                        refs.push(r);
                    }
                    AllocOutcome::Squashed { slot, victim } => {
                        assert!(full && same_gpe);
                        assert_eq!(victim.gpe_id, gpe);
                        assert_eq!(victim.alloc_cycle, oldest[0]);
                        refs.push(slot);
                    }
                    AllocOutcome::Failed => assert!(full && !same_gpe, "failed with a same-GPE entry present"),
                }
            }
            7 | 8 => {
                if !refs.is_empty() {
                    let r = refs.swap_remove(rng.gen_range(0..refs.len()));
                    arr.retire(r);
                }
            }
            _ => {
                let bank = rng.gen_range(0..banks);
                let before: Vec<u16> = arr.live_in(bank).map(|e| e.gpe_id).filter(|&g| g != gpe).collect();
                arr.squash_caught_up(bank, gpe, rng.gen_range(0..64), cycle);
                let after: Vec<u16> = arr.live_in(bank).map(|e| e.gpe_id).filter(|&g| g != gpe).collect();
                assert_eq!(before, after);
            }
        }
    }
    let log = arr.squash_log.take().unwrap();
    assert!(log.iter().all(|s| s.requester_gpe == s.victim_gpe));
    assert_eq!(log.len() as u64, arr.squashes);
}

#[test]
fn squash_isolation_hundred_thousand_events() {
    squash_isolation(1, 100_000, 16, 8, 16, true);
    squash_isolation(2, 100_000, 16, 8, 16, false);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn squash_isolation_random_shapes(seed: u64, banks in 1usize..8, entries in 1usize..6, gpes in 1u16..12, fused: bool) {
        squash_isolation(seed, 2000, banks, entries, gpes, fused);
    }

    #[test]
    fn arbitration_grants_one_per_bank(
        reqs in prop::collection::vec((0usize..16, 0usize..16), 0..40),
        cycle in 0u64..1000,
    ) {
        let mut granted = vec![];
        arbitrate(&reqs, 16, true, cycle, &mut granted);
        for bank in 0..16 {
            let asked = reqs.iter().any(|r| r.1 == bank);
            let n = reqs.iter().zip(&granted).filter(|(r, g)| r.1 == bank && **g).count();
            prop_assert_eq!(n, usize::from(asked));
        }
    }
}
