mod support;

use big2_core::cards::{parse_cards, Card, CardSet};
use big2_core::game::{terminal_rewards, GameState, SEATS};
use big2_core::hand::{beats, classify};
use proptest::prelude::*;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::*;

fn hand(text: &str) -> big2_core::ClassifiedHand {
    classify(&parse_cards(text).unwrap()).unwrap()
}

#[test]
fn worked_comparisons() {
    assert!(beats(&hand("10D 10S"), &hand("10C 10H")));
    assert!(beats(&hand("KC KH 4C 4H"), &hand("QD QS JH JS")));
    assert!(beats(&hand("3S 3H 10H 10S 10C"), &hand("2S 2H 5C 5H 5S")));
    assert!(beats(&hand("3D 3C 3H 3S"), &hand("AS AH 2S 2H")));
}

#[test]
fn worked_reward_vector() {
    assert_eq!(terminal_rewards([0, 5, 7, 10]), [22, -5, -7, -10]);
    assert_eq!(terminal_rewards([3, 0, 1, 13]), [-3, 17, -1, -13]);
}

#[test]
fn classifier_agrees_with_counting_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let deck: Vec<Card> = Card::deck().collect();
    let mut by_size: Vec<Vec<(Vec<Card>, NaiveHand)>> = vec![Vec::new(); 6];
    for _ in 0..100_000 {
        let k = rng.random_range(1..=5);
        let cards: Vec<Card> = deck.choose_multiple(&mut rng, k).copied().collect();
        let fast = classify(&cards).map(|h| h.category());
        let slow = naive_classify(&cards);
        assert_eq!(fast, slow.as_ref().map(|h| h.category), "{cards:?}");
        if let Some(h) = slow {
            by_size[k].push((cards, h));
        }
    }
    for group in &by_size {
        for pair in group.windows(2) {
            let (a, na) = &pair[0];
            let (b, nb) = &pair[1];
            let (ha, hb) = (classify(a).unwrap(), classify(b).unwrap());
            assert_eq!(beats(&ha, &hb), naive_beats(na, nb), "{a:?} vs {b:?}");
            assert_eq!(beats(&hb, &ha), naive_beats(nb, na), "{b:?} vs {a:?}");
        }
    }
}

#[test]
fn random_games_terminate_zero_sum_and_conserve_cards() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for seed in 0..2_000u64 {
        let mut g = GameState::reset(seed);
        while !g.is_done() {
            let mask = g.legal_mask();
            assert!(!mask.is_empty());
            let a = mask.iter().nth(rng.random_range(0..mask.count())).unwrap();
            g.step(a).unwrap();
            let mut seen = CardSet::EMPTY;
            let mut total = 0;
            for s in 0..SEATS as u8 {
                seen = seen.union(g.hand(s));
                total += g.hand(s).len();
            }
            for m in g.history() {
                for &c in m.cards() {
                    assert!(seen.insert(c), "{c} appears twice");
                    total += 1;
                }
            }
            assert_eq!((seen, total), (CardSet::FULL, 52));
            assert!(g.turn_count() <= 500);
        }
        assert_eq!(g.rewards().unwrap().iter().sum::<i32>(), 0);
    }
}

#[test]
fn three_of_diamonds_holder_is_uniform() {
    let mut counts = [0f64; SEATS];
    let n = 8_000;
    for seed in 0..n {
        counts[GameState::reset(seed).to_act() as usize] += 1.0;
    }
    let expected = n as f64 / 4.0;
    let chi2: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
    // 99.9th percentile of chi-squared with 3 degrees of freedom.
    assert!(chi2 < 16.27, "chi2 = {chi2}, counts = {counts:?}");
}

#[test]
fn opening_move_is_forced() {
    for seed in 0..50 {
        let g = GameState::reset(seed);
        let mask = g.legal_mask();
        assert_eq!(mask.count(), 1);
        assert_eq!(mask.iter().next().unwrap().value(), 0);
        assert!(g.hand(g.to_act()).contains(Card::THREE_OF_DIAMONDS));
    }
}

fn any_hand() -> impl Strategy<Value = Vec<Card>> {
    (1usize..=5).prop_flat_map(|k| {
        proptest::sample::subsequence((0u8..52).collect::<Vec<_>>(), k)
            .prop_map(|v| v.into_iter().map(|o| Card::from_order(o).unwrap()).collect())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn beats_is_a_strict_order(a in any_hand(), b in any_hand(), c in any_hand()) {
        let (Some(a), Some(b), Some(c)) = (classify(&a), classify(&b), classify(&c)) else {
            return Ok(());
        };
        prop_assert!(!beats(&a, &a));
        prop_assert!(!(beats(&a, &b) && beats(&b, &a)));
        if beats(&a, &b) && beats(&b, &c) {
            prop_assert!(beats(&a, &c));
        }
        if a.len() == b.len() && a.cards() != b.cards() {
            prop_assert!(beats(&a, &b) || beats(&b, &a) || a.key() == b.key());
        }
    }

    #[test]
    fn card_text_round_trips(order in 0u8..52) {
        let card = Card::from_order(order).unwrap();
        prop_assert_eq!(card.to_string().parse::<Card>().unwrap(), card);
    }
}
