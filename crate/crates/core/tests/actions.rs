mod support;

use big2_core::action::{
    available_actions, LookupTables, Selection, NUM_ACTIONS, PASS, RANGE_OFFSETS, TABLE_SIZES,
};
use big2_core::ActionIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::*;

#[test]
fn table_sizes_match_position_counting() {
    let counted: Vec<usize> = (1..=5).map(|k| oracle_tuples(k).len()).collect();
    assert_eq!(counted, vec![13, 33, 31, 330, 1287]);
    assert_eq!(counted, TABLE_SIZES.to_vec());
    assert_eq!(counted.iter().sum::<usize>() + 1, NUM_ACTIONS);
    assert_eq!(PASS.value(), 1694);
}

#[test]
fn every_index_matches_lexicographic_rank() {
    let tables = LookupTables::global();
    for k in 1..=5 {
        for (local, tuple) in oracle_tuples(k).iter().enumerate() {
            let action = ActionIndex::new(RANGE_OFFSETS[k - 1] + local).unwrap();
            let positions: Vec<usize> = tables.positions(action).unwrap().iter().map(|&p| p as usize).collect();
            assert_eq!(&positions, tuple);
            assert_eq!(oracle_action(tuple), Some(action.value()));
        }
    }
}

#[test]
fn mask_matches_brute_force_on_random_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..1000 {
        let n = rng.random_range(1..=13);
        let hand = random_hand(&mut rng, n);
        let target = if rng.random_bool(0.3) { None } else { Some(random_target(&mut rng, &hand)) };
        let got = available_actions(&hand, context_for(target.as_deref()));
        let want = brute_force_mask(&hand, target.as_deref());
        assert_eq!(got, want, "case {case}: hand {hand:?} target {target:?}");
    }
}

#[test]
fn legal_actions_round_trip_through_cards() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let tables = LookupTables::global();
    for _ in 0..200 {
        let hand = random_hand(&mut rng, 13);
        let mask = available_actions(&hand, context_for(None));
        for a in mask.iter() {
            let Selection::Cards { .. } = tables.action_to_cards(a, &hand).unwrap() else {
                panic!("control never offers pass");
            };
            let sel = tables.action_to_cards(a, &hand).unwrap();
            assert_eq!(tables.cards_to_action(sel.cards(), &hand), Some(a));
        }
    }
}
