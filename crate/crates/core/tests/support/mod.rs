//! Independent reference implementations used by the integration tests.
//!
//! Nothing here calls into the code under test for the property being
//! checked: the mask oracle enumerates subsets and ranks them by plain
//! lexicographic counting, the classifier works from rank and suit
//! histograms, and the advantage oracle evaluates the discounted sum term
//! by term.

#![allow(dead_code)]

use big2_core::action::{ActionMask, MoveContext, NUM_ACTIONS, PASS, RANGE_OFFSETS};
use big2_core::cards::{Card, CardSet};
use big2_core::game::GameState;
use big2_core::hand::{classify, HandCategory};
use big2_core::net::Network;
use big2_core::ppo::{minibatch_gradient, LossCoefficients, MinibatchRef};
use big2_core::ActionIndex;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

/// Whether a strictly increasing position tuple can hold a legal hand of
/// its size in a value-sorted hand.
fn representable(p: &[usize]) -> bool {
    match p.len() {
        1 | 5 => true,
        2 => p[1] - p[0] <= 3,
        3 => p[2] - p[0] <= 3,
        4 => p[1] - p[0] <= 3 && p[3] - p[2] <= 3,
        _ => false,
    }
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Position tuples of each size in index order: lexicographic over the
/// representable tuples of 13 positions.
pub fn oracle_tuples(k: usize) -> Vec<Vec<usize>> {
    combinations(13, k).into_iter().filter(|t| representable(t)).collect()
}

/// Global action index for a position tuple.
pub fn oracle_action(positions: &[usize]) -> Option<usize> {
    let k = positions.len();
    let local = oracle_tuples(k).iter().position(|t| t == positions)?;
    Some(RANGE_OFFSETS[k - 1] + local)
}

/// Every subset of the hand checked directly against the rules.
pub fn brute_force_mask(hand: &[Card], must_beat: Option<&[Card]>) -> ActionMask {
    let target = must_beat.map(|c| naive_classify(c).expect("target is a hand"));
    let tables: Vec<Vec<Vec<usize>>> = (1..=5).map(oracle_tuples).collect();
    let mut mask = ActionMask::none();
    if target.is_some() {
        mask.allow(PASS);
    }
    let n = hand.len();
    for bits in 1u32..(1 << n) {
        let k = bits.count_ones() as usize;
        if k > 5 {
            continue;
        }
        let positions: Vec<usize> = (0..n).filter(|i| bits & (1 << i) != 0).collect();
        let cards: Vec<Card> = positions.iter().map(|&i| hand[i]).collect();
        let Some(candidate) = naive_classify(&cards) else { continue };
        if let Some(t) = &target {
            if !naive_beats(&candidate, t) {
                continue;
            }
        }
        let local = tables[k - 1]
            .iter()
            .position(|t| *t == positions)
            .unwrap_or_else(|| panic!("legal hand {cards:?} has no index"));
        mask.allow(ActionIndex::new(RANGE_OFFSETS[k - 1] + local).unwrap());
    }
    mask
}

/// `(category, comparison key)` from rank and suit counts alone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NaiveHand {
    pub size: usize,
    pub category: HandCategory,
    pub key: Vec<u32>,
}

pub fn naive_classify(cards: &[Card]) -> Option<NaiveHand> {
    let size = cards.len();
    let mut sorted = cards.to_vec();
    sorted.sort();
    sorted.dedup();
    if size == 0 || size > 5 || sorted.len() != size {
        return None;
    }
    let rank = |c: &Card| c.rank().index() as u32;
    let suit = |c: &Card| c.suit().index() as u32;
    let value = |c: &Card| rank(c) * 4 + suit(c);
    let mut counts = [0u32; 13];
    for c in &sorted {
        counts[rank(c) as usize] += 1;
    }
    let mut groups: Vec<u32> = counts.iter().copied().filter(|&x| x > 0).collect();
    groups.sort_unstable_by(|a, b| b.cmp(a));
    let top = sorted.iter().map(value).max().unwrap();
    let with_count = |k: u32| (0..13u32).filter(|&r| counts[r as usize] == k).collect::<Vec<_>>();
    let highest_of_rank = |r: u32| sorted.iter().filter(|c| rank(c) == r).map(value).max().unwrap();
    let (category, key) = match (size, groups.as_slice()) {
        (1, _) => (HandCategory::Single, vec![0, top]),
        (2, [2]) => (HandCategory::Pair, vec![0, top]),
        (3, [3]) => (HandCategory::Triple, vec![0, top / 4]),
        (4, [4]) => (HandCategory::FourOfAKind, vec![1, top / 4]),
        (4, [2, 2]) => {
            let high = *with_count(2).iter().max().unwrap();
            (HandCategory::TwoPair, vec![0, highest_of_rank(high)])
        }
        (5, _) => {
            let flush = sorted.iter().all(|c| suit(c) == suit(&sorted[0]));
            let ranks: Vec<u32> = sorted.iter().map(rank).collect();
            let straight = groups.len() == 5 && ranks[4] - ranks[0] == 4 && ranks[4] <= 11;
            if straight && flush {
                (HandCategory::StraightFlush, vec![3, top])
            } else if flush {
                (HandCategory::Flush, vec![1, top])
            } else if straight {
                (HandCategory::Straight, vec![0, top])
            } else if groups == [3, 2] {
                (HandCategory::FullHouse, vec![2, with_count(3)[0]])
            } else {
                return None;
            }
        }
        _ => return None,
    };
    Some(NaiveHand { size, category, key })
}

pub fn naive_beats(a: &NaiveHand, b: &NaiveHand) -> bool {
    a.size == b.size && a.key > b.key
}

/// Random value-sorted hand of `n` cards.
pub fn random_hand<R: Rng>(rng: &mut R, n: usize) -> Vec<Card> {
    let mut deck: Vec<Card> = Card::deck().collect();
    deck.shuffle(rng);
    let mut hand = deck[..n].to_vec();
    hand.sort();
    hand
}

/// A random legal hand drawn from cards outside `exclude`.
pub fn random_target<R: Rng>(rng: &mut R, exclude: &[Card]) -> Vec<Card> {
    let pool: Vec<Card> = Card::deck().filter(|c| !exclude.contains(c)).collect();
    loop {
        let k = rng.random_range(1..=5);
        // Bias toward structured hands so larger sizes show up often.
        let cards: Vec<Card> = match rng.random_range(0..3) {
            0 => pool.choose_multiple(rng, k).copied().collect(),
            1 => {
                let r = rng.random_range(0..13u8);
                let same: Vec<Card> = pool.iter().copied().filter(|c| c.rank().index() == r).collect();
                same.choose_multiple(rng, k.min(same.len())).copied().collect()
            }
            _ => {
                let s = rng.random_range(0..4u8);
                let same: Vec<Card> = pool.iter().copied().filter(|c| c.suit().index() == s).collect();
                same.choose_multiple(rng, 5.min(same.len())).copied().collect()
            }
        };
        if naive_classify(&cards).is_some() {
            return cards;
        }
    }
}

pub fn context_for(target: Option<&[Card]>) -> MoveContext {
    match target {
        None => MoveContext::control(),
        Some(cards) => MoveContext::must_beat(classify(cards).unwrap()),
    }
}

/// Advantages as the explicit discounted sum of TD residuals, truncated
/// at the first terminal step.
pub fn gae_direct_sum(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> Vec<f64> {
    let n = rewards.len();
    let next_value = |t: usize| {
        if dones[t] {
            0.0
        } else if t + 1 < n {
            values[t + 1]
        } else {
            bootstrap
        }
    };
    let delta: Vec<f64> = (0..n).map(|t| rewards[t] + gamma * next_value(t) - values[t]).collect();
    (0..n)
        .map(|t| {
            let mut sum = 0.0;
            let mut weight = 1.0;
            for l in 0..(n - t) {
                sum += weight * delta[t + l];
                if dones[t + l] {
                    break;
                }
                weight *= gamma * lambda;
            }
            sum
        })
        .collect()
}

/// Owned minibatch for gradient tests.
pub struct OwnedBatch {
    pub inputs: Vec<f64>,
    pub masks: Vec<f64>,
    pub actions: Vec<ActionIndex>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl OwnedBatch {
    pub fn view(&self) -> MinibatchRef<'_, f64> {
        MinibatchRef {
            inputs: &self.inputs,
            masks: &self.masks,
            actions: &self.actions,
            old_log_probs: &self.old_log_probs,
            advantages: &self.advantages,
            returns: &self.returns,
        }
    }
}

/// Random batch for `net` whose old log-probabilities sit within
/// `ratio_spread` of the current ones in log space.
pub fn random_batch<R: Rng>(net: &Network<f64>, batch: usize, ratio_spread: f64, rng: &mut R) -> OwnedBatch {
    let s = net.shape;
    let inputs: Vec<f64> = (0..batch * s.input).map(|_| f64::from(rng.random_range(0..2u8))).collect();
    let mut masks = vec![f64::NEG_INFINITY; batch * s.actions];
    let mut actions = Vec::new();
    for row in 0..batch {
        let allowed: Vec<usize> = (0..s.actions).filter(|_| rng.random_bool(0.4)).collect();
        let allowed = if allowed.is_empty() { vec![rng.random_range(0..s.actions)] } else { allowed };
        for &a in &allowed {
            masks[row * s.actions + a] = 0.0;
        }
        actions.push(ActionIndex::new(*allowed.choose(rng).unwrap()).unwrap());
    }
    let cache = net.forward_batch(&inputs, &masks, batch).unwrap();
    let old_log_probs = (0..batch)
        .map(|i| cache.log_probs_row(i)[actions[i].value()] + rng.random_range(-ratio_spread..=ratio_spread))
        .collect();
    OwnedBatch {
        inputs,
        masks,
        actions,
        old_log_probs,
        advantages: (0..batch).map(|_| rng.random_range(-2.0..2.0)).collect(),
        returns: (0..batch).map(|_| rng.random_range(-5.0..5.0)).collect(),
    }
}

/// Mean minimised loss of the batch.
pub fn batch_loss(net: &Network<f64>, batch: &OwnedBatch, coeffs: LossCoefficients) -> f64 {
    let mut scratch = Network::zeros(net.shape);
    let stats = minibatch_gradient(net, batch.view(), coeffs, 1.0, &mut scratch).unwrap();
    stats.loss / batch.actions.len() as f64
}

#[derive(Debug, Clone)]
pub struct GradientProbe {
    pub tensor: usize,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl GradientProbe {
    pub fn relative_error(&self) -> f64 {
        let scale = self.analytic.abs().max(self.numeric.abs()).max(1e-7);
        (self.analytic - self.numeric).abs() / scale
    }
}

/// Central differences with step `h` on `per_tensor` random coordinates of
/// every weight and bias tensor.
pub fn finite_difference_probes<R: Rng>(
    net: &Network<f64>,
    batch: &OwnedBatch,
    coeffs: LossCoefficients,
    per_tensor: usize,
    h: f64,
    rng: &mut R,
) -> Vec<GradientProbe> {
    let mut grads = Network::zeros(net.shape);
    let n = batch.actions.len() as f64;
    minibatch_gradient(net, batch.view(), coeffs, 1.0 / n, &mut grads).unwrap();
    let analytic: Vec<Vec<f64>> = grads.tensors().map(|t| t.to_vec()).collect();
    let mut probes = Vec::new();
    for (tensor, values) in analytic.iter().enumerate() {
        for _ in 0..per_tensor.min(values.len()) {
            let index = rng.random_range(0..values.len());
            let shifted = |delta: f64| {
                let mut copy = net.clone();
                copy.tensors_mut().nth(tensor).unwrap()[index] += delta;
                batch_loss(&copy, batch, coeffs)
            };
            let numeric = (shifted(h) - shifted(-h)) / (2.0 * h);
            probes.push(GradientProbe {
                tensor,
                index,
                analytic: values[index],
                numeric,
            });
        }
    }
    probes
}

/// Plays a game with uniformly random legal moves, returning every state
/// visited including the terminal one.
pub fn random_game<R: Rng>(seed: u64, rng: &mut R) -> Vec<GameState> {
    let mut g = GameState::reset(seed);
    let mut states = vec![g.clone()];
    while !g.is_done() {
        let mask = g.legal_mask();
        let k = rng.random_range(0..mask.count());
        let a = mask.iter().nth(k).unwrap();
        g.step(a).unwrap();
        states.push(g.clone());
    }
    states
}

pub fn card_set(cards: &[Card]) -> CardSet {
    cards.iter().copied().collect()
}

pub fn action_count() -> usize {
    NUM_ACTIONS
}
