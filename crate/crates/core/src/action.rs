//! The global action index.
//!
//! A move is named by the positions of its cards inside the mover's
//! value-sorted hand. Positions are mapped to a dense per-size local index by
//! nested-loop lookup tables, and the local index is offset into one global
//! range:
//!
//! | cards | local count | global range |
//! |-------|-------------|--------------|
//! | 1     | 13          | 0..=12       |
//! | 2     | 33          | 13..=45      |
//! | 3     | 31          | 46..=76      |
//! | 4     | 330         | 77..=406     |
//! | 5     | 1287        | 407..=1693   |
//! | pass  | 1           | 1694         |
//!
//! The two-, three- and four-card loops only admit position tuples that can
//! possibly hold a pair, triple, two-pair or four-of-a-kind in a sorted hand
//! (cards of equal rank sit within three positions of each other).

use core::fmt;

use num_traits::Float;
use thiserror::Error;

use crate::cards::Card;
use crate::hand::{beats, classify, ClassifiedHand};

pub const NUM_ACTIONS: usize = 1695;
pub const PASS: ActionIndex = ActionIndex(1694);
pub const MAX_HAND: usize = 13;

/// Number of local actions for 1..=5 cards.
pub const TABLE_SIZES: [usize; 5] = [13, 33, 31, 330, 1287];
/// Global offset of the first action for 1..=5 cards.
pub const RANGE_OFFSETS: [usize; 5] = [0, 13, 46, 77, 407];

const DIM2: usize = 13 * 13;
const DIM3: usize = 13 * 13 * 13;
const DIM4: usize = 13 * 13 * 13 * 13;
const DIM5: usize = 13 * 13 * 13 * 13 * 13;
const UNSET: u16 = u16::MAX;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActionIndex(u16);

impl ActionIndex {
    pub fn new(value: usize) -> Option<ActionIndex> {
        (value < NUM_ACTIONS).then_some(ActionIndex(value as u16))
    }

    pub fn value(self) -> usize {
        self.0 as usize
    }

    pub fn is_pass(self) -> bool {
        self == PASS
    }

    /// Number of cards played, 0 for pass.
    pub fn card_count(self) -> usize {
        if self.is_pass() {
            return 0;
        }
        let v = self.value();
        RANGE_OFFSETS.iter().rposition(|&o| v >= o).unwrap() + 1
    }

    /// Index within the table for this action's card count.
    pub fn local(self) -> Option<usize> {
        let count = self.card_count();
        (count > 0).then(|| self.value() - RANGE_OFFSETS[count - 1])
    }
}

impl fmt::Debug for ActionIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_pass() {
            f.write_str("Pass")
        } else {
            write!(f, "Action({})", self.0)
        }
    }
}

impl fmt::Display for ActionIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Maps a card count and a local index to the global action index.
/// Panics when `local` is outside the table for `count`.
pub fn to_global(count: usize, local: usize) -> ActionIndex {
    assert!((1..=5).contains(&count), "card count {count} out of range");
    assert!(
        local < TABLE_SIZES[count - 1],
        "local index {local} out of range for {count} cards"
    );
    ActionIndex((RANGE_OFFSETS[count - 1] + local) as u16)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ActionError {
    #[error("action {action} references hand position {position} but the hand has {hand_len} cards")]
    IndexOutOfHand {
        action: usize,
        position: usize,
        hand_len: usize,
    },
}

/// Dense forward maps and inverse tables between sorted-hand positions and
/// local action indices.
pub struct LookupTables {
    index2: [u16; DIM2],
    index3: [u16; DIM3],
    index4: [u16; DIM4],
    index5: [u16; DIM5],
    inverse2: [[u8; 2]; 33],
    inverse3: [[u8; 3]; 31],
    inverse4: [[u8; 4]; 330],
    inverse5: [[u8; 5]; 1287],
}

static TABLES: LookupTables = LookupTables::build();

const fn flat(idx: &[usize]) -> usize {
    let mut out = 0;
    let mut i = 0;
    while i < idx.len() {
        out = out * 13 + idx[i];
        i += 1;
    }
    out
}

const fn min(a: usize, b: usize) -> usize {
    if a < b {
        a
    } else {
        b
    }
}

impl LookupTables {
    /// Shared tables, computed at compile time.
    pub fn global() -> &'static LookupTables {
        &TABLES
    }

    /// Builds the tables by running the nested position loops; local indices
    /// are assigned in loop order starting at zero.
    pub const fn build() -> LookupTables {
        let mut t = LookupTables {
            index2: [UNSET; DIM2],
            index3: [UNSET; DIM3],
            index4: [UNSET; DIM4],
            index5: [UNSET; DIM5],
            inverse2: [[0; 2]; 33],
            inverse3: [[0; 3]; 31],
            inverse4: [[0; 4]; 330],
            inverse5: [[0; 5]; 1287],
        };

        // Five cards: every strictly increasing tuple.
        let mut i = 0;
        let mut c1 = 0;
        while c1 <= 8 {
            let mut c2 = c1 + 1;
            while c2 <= 9 {
                let mut c3 = c2 + 1;
                while c3 <= 10 {
                    let mut c4 = c3 + 1;
                    while c4 <= 11 {
                        let mut c5 = c4 + 1;
                        while c5 <= 12 {
                            t.index5[flat(&[c1, c2, c3, c4, c5])] = i as u16;
                            t.inverse5[i] = [c1 as u8, c2 as u8, c3 as u8, c4 as u8, c5 as u8];
                            i += 1;
                            c5 += 1;
                        }
                        c4 += 1;
                    }
                    c3 += 1;
                }
                c2 += 1;
            }
            c1 += 1;
        }
        assert!(i == 1287);

        // Four cards: two position windows of width four.
        let mut i = 0;
        let mut c1 = 0;
        while c1 <= 9 {
            let n1 = min(c1 + 3, 10);
            let mut c2 = c1 + 1;
            while c2 <= n1 {
                let mut c3 = c2 + 1;
                while c3 <= 11 {
                    let n2 = min(c3 + 3, 12);
                    let mut c4 = c3 + 1;
                    while c4 <= n2 {
                        t.index4[flat(&[c1, c2, c3, c4])] = i as u16;
                        t.inverse4[i] = [c1 as u8, c2 as u8, c3 as u8, c4 as u8];
                        i += 1;
                        c4 += 1;
                    }
                    c3 += 1;
                }
                c2 += 1;
            }
            c1 += 1;
        }
        assert!(i == 330);

        // Three cards: all within a window of four positions.
        let mut i = 0;
        let mut c1 = 0;
        while c1 <= 10 {
            let n1 = min(c1 + 2, 11);
            let mut c2 = c1 + 1;
            while c2 <= n1 {
                let n2 = min(c1 + 3, 12);
                let mut c3 = c2 + 1;
                while c3 <= n2 {
                    t.index3[flat(&[c1, c2, c3])] = i as u16;
                    t.inverse3[i] = [c1 as u8, c2 as u8, c3 as u8];
                    i += 1;
                    c3 += 1;
                }
                c2 += 1;
            }
            c1 += 1;
        }
        assert!(i == 31);

        // Two cards: within a window of four positions.
        let mut i = 0;
        let mut c1 = 0;
        while c1 <= 11 {
            let n1 = min(c1 + 3, 12);
            let mut c2 = c1 + 1;
            while c2 <= n1 {
                t.index2[flat(&[c1, c2])] = i as u16;
                t.inverse2[i] = [c1 as u8, c2 as u8];
                i += 1;
                c2 += 1;
            }
            c1 += 1;
        }
        assert!(i == 33);

        t
    }

    /// Local index of a strictly increasing position tuple, if the tables
    /// contain it.
    pub fn local_index(&self, positions: &[u8]) -> Option<usize> {
        if positions.iter().any(|&p| p as usize >= MAX_HAND)
            || positions.windows(2).any(|w| w[0] >= w[1])
        {
            return None;
        }
        let mut key = [0usize; 5];
        for (k, &p) in key.iter_mut().zip(positions) {
            *k = p as usize;
        }
        let n = positions.len();
        let raw = match n {
            1 => return Some(positions[0] as usize),
            2 => self.index2[flat(&key[..2])],
            3 => self.index3[flat(&key[..3])],
            4 => self.index4[flat(&key[..4])],
            5 => self.index5[flat(&key[..5])],
            _ => return None,
        };
        (raw != UNSET).then_some(raw as usize)
    }

    /// Global action for a position tuple.
    pub fn action_for_positions(&self, positions: &[u8]) -> Option<ActionIndex> {
        self.local_index(positions)
            .map(|local| to_global(positions.len(), local))
    }

    /// Positions referenced by a non-pass action.
    pub fn positions(&self, action: ActionIndex) -> Option<&[u8]> {
        static SINGLES: [u8; 13] = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12];
        let local = action.local()?;
        Some(match action.card_count() {
            1 => &SINGLES[local..=local],
            2 => &self.inverse2[local],
            3 => &self.inverse3[local],
            4 => &self.inverse4[local],
            5 => &self.inverse5[local],
            _ => unreachable!(),
        })
    }

    /// Resolves an action against a value-sorted hand.
    pub fn action_to_cards(
        &self,
        action: ActionIndex,
        hand: &[Card],
    ) -> Result<Selection, ActionError> {
        let Some(positions) = self.positions(action) else {
            return Ok(Selection::Pass);
        };
        let mut cards = [Card::THREE_OF_DIAMONDS; 5];
        for (slot, &p) in cards.iter_mut().zip(positions) {
            *slot = *hand.get(p as usize).ok_or(ActionError::IndexOutOfHand {
                action: action.value(),
                position: p as usize,
                hand_len: hand.len(),
            })?;
        }
        Ok(Selection::Cards {
            cards,
            len: positions.len() as u8,
        })
    }

    /// Inverse of [`action_to_cards`](Self::action_to_cards): the action
    /// that plays exactly `cards` from `hand`, if one exists.
    pub fn cards_to_action(&self, cards: &[Card], hand: &[Card]) -> Option<ActionIndex> {
        if cards.is_empty() || cards.len() > 5 {
            return None;
        }
        let mut positions = [0u8; 5];
        for (slot, card) in positions.iter_mut().zip(cards) {
            *slot = hand.iter().position(|c| c == card)? as u8;
        }
        let positions = &mut positions[..cards.len()];
        positions.sort_unstable();
        self.action_for_positions(positions)
    }

    /// Legal-move mask for `hand` (value-sorted, 1 to 13 cards).
    pub fn available_actions(&self, hand: &[Card], context: MoveContext) -> ActionMask {
        let mut mask = ActionMask::none();
        let n = hand.len();
        debug_assert!(n <= MAX_HAND);
        debug_assert!(hand.windows(2).all(|w| w[0] < w[1]), "hand must be sorted");
        let must_beat = context.must_beat;
        if context.pass_allowed {
            mask.allow(PASS);
        }
        let counts: &[usize] = match &must_beat {
            Some(h) => &[h.len()][..],
            None => &[1, 2, 3, 4, 5][..],
        };
        let profile = HandProfile::of(hand);
        for &count in counts {
            if !profile.may_hold(count) {
                continue;
            }
            let offset = RANGE_OFFSETS[count - 1];
            let mut check = |local: usize, positions: &[u8]| {
                // Positions beyond a short hand are never playable.
                if positions[positions.len() - 1] as usize >= n {
                    return;
                }
                let mut cards = [Card::THREE_OF_DIAMONDS; 5];
                for (slot, &p) in cards.iter_mut().zip(positions) {
                    *slot = hand[p as usize];
                }
                if let Some(candidate) = classify(&cards[..positions.len()]) {
                    if must_beat.as_ref().is_none_or(|h| beats(&candidate, h)) {
                        mask.allow(ActionIndex((offset + local) as u16));
                    }
                }
            };
            match count {
                1 => (0..n as u8).for_each(|p| check(p as usize, &[p])),
                2 => self.inverse2.iter().enumerate().for_each(|(i, t)| check(i, t)),
                3 => self.inverse3.iter().enumerate().for_each(|(i, t)| check(i, t)),
                4 => self.inverse4.iter().enumerate().for_each(|(i, t)| check(i, t)),
                5 => self.inverse5.iter().enumerate().for_each(|(i, t)| check(i, t)),
                _ => unreachable!(),
            }
        }
        mask
    }
}

/// Cheap rank/suit summary used to skip whole card counts that cannot hold
/// any legal hand.
struct HandProfile {
    max_rank_count: u8,
    has_second_pair: bool,
    full_house: bool,
    flush: bool,
    straight: bool,
}

impl HandProfile {
    fn of(hand: &[Card]) -> HandProfile {
        let mut ranks = [0u8; 13];
        let mut suits = [0u8; 4];
        for c in hand {
            ranks[c.rank().index() as usize] += 1;
            suits[c.suit().index() as usize] += 1;
        }
        let pairs = ranks.iter().filter(|&&r| r >= 2).count();
        let trips = ranks.iter().filter(|&&r| r >= 3).count();
        HandProfile {
            max_rank_count: ranks.iter().copied().max().unwrap_or(0),
            has_second_pair: pairs >= 2,
            full_house: trips >= 1 && pairs >= 2,
            flush: suits.iter().any(|&s| s >= 5),
            straight: ranks[..12].windows(5).any(|w| w.iter().all(|&r| r > 0)),
        }
    }

    fn may_hold(&self, count: usize) -> bool {
        match count {
            1 => self.max_rank_count >= 1,
            2 => self.max_rank_count >= 2,
            3 => self.max_rank_count >= 3,
            4 => self.max_rank_count >= 4 || self.has_second_pair,
            5 => self.flush || self.straight || self.full_house,
            _ => false,
        }
    }
}

/// What the mover must do: open freely (`must_beat == None`) or beat a hand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MoveContext {
    pub must_beat: Option<ClassifiedHand>,
    pub pass_allowed: bool,
}

impl MoveContext {
    pub fn control() -> MoveContext {
        MoveContext {
            must_beat: None,
            pass_allowed: false,
        }
    }

    pub fn must_beat(hand: ClassifiedHand) -> MoveContext {
        MoveContext {
            must_beat: Some(hand),
            pass_allowed: true,
        }
    }
}

/// Cards selected by an action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    Pass,
    Cards { cards: [Card; 5], len: u8 },
}

impl Selection {
    pub fn cards(&self) -> &[Card] {
        match self {
            Selection::Pass => &[],
            Selection::Cards { cards, len } => &cards[..*len as usize],
        }
    }

    pub fn is_pass(&self) -> bool {
        matches!(self, Selection::Pass)
    }
}

const MASK_WORDS: usize = NUM_ACTIONS.div_ceil(64);

/// Boolean legality mask over all 1695 actions.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct ActionMask([u64; MASK_WORDS]);

impl ActionMask {
    pub fn none() -> ActionMask {
        ActionMask([0; MASK_WORDS])
    }

    pub fn only(action: ActionIndex) -> ActionMask {
        let mut m = ActionMask::none();
        m.allow(action);
        m
    }

    pub fn allow(&mut self, action: ActionIndex) {
        let v = action.value();
        self.0[v / 64] |= 1 << (v % 64);
    }

    pub fn is_allowed(&self, action: ActionIndex) -> bool {
        let v = action.value();
        self.0[v / 64] & (1 << (v % 64)) != 0
    }

    pub fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(|&w| w == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = ActionIndex> + '_ {
        self.0.iter().enumerate().flat_map(|(w, &bits)| {
            let mut bits = bits;
            core::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let b = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(ActionIndex((w * 64 + b) as u16))
            })
        })
    }

    /// `{0, 1}` rendering.
    pub fn to_binary(&self) -> alloc::vec::Vec<u8> {
        (0..NUM_ACTIONS)
            .map(|v| self.is_allowed(ActionIndex(v as u16)) as u8)
            .collect()
    }

    /// Additive `{0, -inf}` rendering for masking logits before a softmax.
    pub fn write_additive<T: Float>(&self, out: &mut [T]) {
        assert_eq!(out.len(), NUM_ACTIONS);
        for (v, slot) in out.iter_mut().enumerate() {
            *slot = if self.is_allowed(ActionIndex(v as u16)) {
                T::zero()
            } else {
                T::neg_infinity()
            };
        }
    }

    pub fn to_additive<T: Float>(&self) -> alloc::vec::Vec<T> {
        let mut out = alloc::vec![T::zero(); NUM_ACTIONS];
        self.write_additive(&mut out);
        out
    }
}

impl fmt::Debug for ActionMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Convenience wrapper over the shared tables.
pub fn available_actions(hand: &[Card], context: MoveContext) -> ActionMask {
    LookupTables::global().available_actions(hand, context)
}

/// Convenience wrapper over the shared tables.
pub fn action_to_cards(action: ActionIndex, hand: &[Card]) -> Result<Selection, ActionError> {
    LookupTables::global().action_to_cards(action, hand)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cards::parse_cards;
    use alloc::vec::Vec;

    fn cards(text: &str) -> Vec<Card> {
        let mut v = parse_cards(text).unwrap();
        v.sort();
        v
    }

    #[test]
    fn table_sizes_and_ranges() {
        assert_eq!(TABLE_SIZES.iter().sum::<usize>() + 1, NUM_ACTIONS);
        for k in 0..4 {
            assert_eq!(RANGE_OFFSETS[k] + TABLE_SIZES[k], RANGE_OFFSETS[k + 1]);
        }
        assert_eq!(RANGE_OFFSETS[4] + TABLE_SIZES[4], PASS.value());
    }

    #[test]
    fn first_and_last_entries() {
        let t = LookupTables::global();
        assert_eq!(t.local_index(&[0, 1, 2, 3, 4]), Some(0));
        assert_eq!(t.local_index(&[8, 9, 10, 11, 12]), Some(1286));
        assert_eq!(t.local_index(&[10, 11, 12]), Some(30));
        assert_eq!(t.local_index(&[11, 12]), Some(32));
        assert_eq!(t.local_index(&[2, 8, 9, 10]), None);
        assert_eq!(t.local_index(&[0, 5]), None);
    }

    #[test]
    fn global_offsets() {
        assert_eq!(to_global(1, 0), ActionIndex(0));
        assert_eq!(to_global(5, 0), ActionIndex(407));
        assert_eq!(to_global(2, 32).value(), 45);
        assert!(ActionIndex::new(1694).unwrap().is_pass());
        assert!(ActionIndex::new(1695).is_none());
        assert_eq!(ActionIndex(406).card_count(), 4);
        assert_eq!(ActionIndex(407).card_count(), 5);
        assert_eq!(ActionIndex(407).local(), Some(0));
        assert_eq!(PASS.card_count(), 0);
    }

    #[test]
    #[should_panic]
    fn out_of_range_local_panics() {
        to_global(3, 31);
    }

    #[test]
    fn round_trip_every_local_index() {
        let t = LookupTables::global();
        for v in 0..PASS.value() {
            let a = ActionIndex(v as u16);
            let pos = t.positions(a).unwrap();
            assert_eq!(pos.len(), a.card_count());
            assert_eq!(t.action_for_positions(pos), Some(a));
        }
    }

    #[cfg(feature = "std")]
    #[test]
    fn runtime_build_matches_static() {
        // The tables are about 1 MiB; build them on a roomy stack.
        std::thread::Builder::new()
            .stack_size(32 << 20)
            .spawn(|| {
                let rebuilt = alloc::boxed::Box::new(LookupTables::build());
                let t = LookupTables::global();
                assert_eq!(rebuilt.inverse4, t.inverse4);
                assert_eq!(rebuilt.inverse5[..], t.inverse5[..]);
                assert_eq!(rebuilt.index5[..], t.index5[..]);
            })
            .unwrap()
            .join()
            .unwrap();
    }

    #[test]
    fn worked_example_tuples() {
        let hand = cards("3C 3S 4H 6D 7H 8C 9D 10C KS AC AS 2C 2S");
        let t = LookupTables::global();
        let straight = t.action_for_positions(&[3, 4, 5, 6, 7]).unwrap();
        assert_eq!(
            t.action_to_cards(straight, &hand).unwrap().cards(),
            &cards("6D 7H 8C 9D 10C")[..]
        );
        let flush = t.action_for_positions(&[0, 5, 7, 9, 11]).unwrap();
        assert_eq!(
            t.action_to_cards(flush, &hand).unwrap().cards(),
            &cards("3C 8C 10C AC 2C")[..]
        );
        assert_eq!(t.cards_to_action(&cards("3C 8C 10C AC 2C"), &hand), Some(flush));
        assert!(t.action_to_cards(PASS, &hand).unwrap().is_pass());
    }

    #[test]
    fn index_out_of_hand() {
        let hand = cards("3D 4D");
        let err = action_to_cards(ActionIndex(5), &hand).unwrap_err();
        assert!(matches!(err, ActionError::IndexOutOfHand { position: 5, .. }));
    }

    #[test]
    fn lone_card_in_control() {
        let hand = cards("3D");
        let mask = available_actions(&hand, MoveContext::control());
        assert_eq!(mask.count(), 1);
        assert!(mask.is_allowed(ActionIndex(0)));
        assert!(!mask.is_allowed(PASS));
    }

    #[test]
    fn nothing_beats_two_of_spades() {
        let hand = cards("3D 5C 9H 2D 2C 2H AS");
        let top = classify(&cards("2S")).unwrap();
        let mask = available_actions(&hand, MoveContext::must_beat(top));
        assert_eq!(mask.iter().collect::<Vec<_>>(), [PASS]);
    }

    #[test]
    fn additive_agrees_with_binary() {
        let hand = cards("3D 3C 4H 5S 6D 7D 7H");
        let mask = available_actions(&hand, MoveContext::control());
        let add: Vec<f32> = mask.to_additive();
        let bin = mask.to_binary();
        for (a, b) in add.iter().zip(&bin) {
            assert_eq!(*a == 0.0, *b == 1);
            assert!(*a == 0.0 || *a == f32::NEG_INFINITY);
        }
    }
}
