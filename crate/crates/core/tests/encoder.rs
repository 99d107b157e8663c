mod support;

use big2_core::action::LookupTables;
use big2_core::cards::{Card, CardSet};
use big2_core::encoder::{encode, membership, HistoryDigest, OPPONENT_OFFSET, OPPONENT_WIDTH, TOP16_OFFSET};
use big2_core::game::{GameState, SEATS};
use big2_core::hand::HandCategory;
use big2_core::Table;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::*;

/// Bits that come from the history digest and may only switch on.
fn monotone_bits() -> Vec<usize> {
    let mut bits: Vec<usize> = (0..3)
        .flat_map(|j| (13..27).map(move |k| OPPONENT_OFFSET + j * OPPONENT_WIDTH + k))
        .collect();
    bits.extend(TOP16_OFFSET..TOP16_OFFSET + 16);
    bits
}

#[test]
fn every_state_encodes_to_412_binary_features() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let tracked = monotone_bits();
    for seed in 0..300 {
        let mut table = Table::deal(seed);
        let mut previous: Vec<Vec<u8>> = vec![vec![0; 412]; SEATS];
        let mut digest = *table.digest();
        loop {
            for seat in 0..SEATS as u8 {
                let e = table.observe(seat);
                assert_eq!(e.bits().len(), 412);
                assert!(e.bits().iter().all(|&b| b <= 1));
                let own: usize = e.bits()[..286].iter().map(|&b| b as usize).sum::<usize>();
                assert!(own >= 2 * table.state().hand(seat).len());
                for &i in &tracked {
                    assert!(e.bits()[i] >= previous[seat as usize][i], "bit {i} switched off");
                }
                previous[seat as usize] = e.bits().to_vec();
            }
            if table.is_done() {
                break;
            }
            let mask = table.legal_mask();
            let a = mask.iter().nth(rng.random_range(0..mask.count())).unwrap();
            table.step(a).unwrap();
            assert!(table.digest().dominates(&digest));
            digest = *table.digest();
        }
    }
}

#[test]
fn membership_matches_subset_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..300 {
        let n = rng.random_range(1..=13);
        let hand = random_hand(&mut rng, n);
        let flags = membership(card_set(&hand));
        for (card, m) in flags {
            let mut found = [false; 5];
            for bits in 1u32..(1 << n) {
                let k = bits.count_ones();
                if !(2..=5).contains(&k) {
                    continue;
                }
                let cards: Vec<Card> = (0..n).filter(|i| bits & (1 << i) != 0).map(|i| hand[i]).collect();
                if !cards.contains(&card) {
                    continue;
                }
                let Some(h) = naive_classify(&cards) else { continue };
                use HandCategory::*;
                match h.category {
                    Pair => found[0] = true,
                    Triple => found[1] = true,
                    Straight => found[2] = true,
                    Flush => found[3] = true,
                    StraightFlush => {
                        found[2] = true;
                        found[3] = true;
                    }
                    FullHouse => found[4] = true,
                    _ => {}
                }
            }
            assert_eq!(
                [m.pair, m.triple, m.straight, m.flush, m.full_house],
                found,
                "{card} in {hand:?}"
            );
        }
    }
}

/// Replays the same public history on a deal where the unplayed cards of
/// the other three seats are reshuffled among them; the observer's
/// encoding must not change.
#[test]
fn hidden_cards_do_not_leak() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let tables = LookupTables::global();
    let mut changed = 0;
    for seed in 0..400 {
        let mut original = GameState::reset(seed);
        let stop = rng.random_range(0..40);
        while !original.is_done() && original.turn_count() < stop {
            let mask = original.legal_mask();
            let a = mask.iter().nth(rng.random_range(0..mask.count())).unwrap();
            original.step(a).unwrap();
        }
        let observer = rng.random_range(0..SEATS as u8);

        // Unplayed cards of the others, redistributed with equal counts.
        let mut hidden: Vec<Card> = Vec::new();
        for s in 0..SEATS as u8 {
            if s != observer {
                hidden.extend(original.hand(s).iter());
            }
        }
        hidden.shuffle(&mut rng);
        let mut remaining = [CardSet::EMPTY; SEATS];
        let mut it = hidden.into_iter();
        for s in 0..SEATS as u8 {
            remaining[s as usize] = if s == observer {
                original.hand(s)
            } else {
                (&mut it).take(original.hand(s).len()).collect()
            };
        }
        let mut initial = remaining;
        for m in original.history() {
            for &c in m.cards() {
                initial[m.seat as usize].insert(c);
            }
        }
        let mut replay = GameState::from_hands(initial, seed);
        let mut digest = HistoryDigest::new();
        let mut reference = HistoryDigest::new();
        for m in original.history() {
            let hand = replay.hand(m.seat).to_vec();
            let action = match &m.hand {
                None => m.action,
                Some(h) => tables.cards_to_action(h.cards(), &hand).unwrap(),
            };
            replay.step(action).unwrap();
            let last = replay.history().last().unwrap();
            digest.update(last.seat, last.hand.as_ref());
            reference.update(m.seat, m.hand.as_ref());
        }
        let a = encode(&original.perspective_view(observer), &reference);
        let b = encode(&replay.perspective_view(observer), &digest);
        assert_eq!(a, b, "seed {seed}, observer {observer}");
        if (0..SEATS as u8).any(|s| replay.hand(s) != original.hand(s)) {
            changed += 1;
        }
    }
    assert!(changed > 300, "only {changed} deals differed");
}
