//! Fixed-width binary observation of one seat's view.
//!
//! | segment          | offset | width | contents                                             |
//! |------------------|--------|-------|------------------------------------------------------|
//! | own cards        | 0      | 286   | 13 slots x (rank 13, suit 4, membership 5)           |
//! | opponents        | 286    | 81    | 3 x (cards left 13, top-8 played 8, types played 6)  |
//! | previous hand    | 367    | 26    | category 9, key-card rank 13, key-card suit 4        |
//! | passes           | 393    | 2     | passes >= 1, passes >= 2                             |
//! | control          | 395    | 1     | seat to act holds control                            |
//! | top-16 played    | 396    | 16    | 2S, 2H, 2C, 2D, AS, ... QD                           |
//!
//! Card slots follow the sorted hand; slots past the hand size are zero.
//! Membership flags per card: in a pair, in a three-of-a-kind, in a
//! straight, in a flush, in a full house (quads set pair and triple).
//! Opponents are listed clockwise from the observing seat. The top-8 cards
//! are AD..2S in ascending order; hand types are pair, two-pair,
//! three-of-a-kind, straight, flush, full house (a straight flush sets both
//! straight and flush).

use crate::cards::{Card, CardSet, Rank};
use crate::game::{PerspectiveView, SEATS};
use crate::hand::{ClassifiedHand, HandCategory};

pub const ENCODING_LEN: usize = 412;
/// Bumped whenever the layout below changes; stored in checkpoints.
pub const LAYOUT_VERSION: u32 = 1;

pub const CARD_SLOTS: usize = 13;
pub const SLOT_WIDTH: usize = 22;
pub const OPPONENT_OFFSET: usize = CARD_SLOTS * SLOT_WIDTH;
pub const OPPONENT_WIDTH: usize = 27;
pub const PREVIOUS_OFFSET: usize = OPPONENT_OFFSET + 3 * OPPONENT_WIDTH;
pub const PASSES_OFFSET: usize = PREVIOUS_OFFSET + 9 + 13 + 4;
pub const CONTROL_OFFSET: usize = PASSES_OFFSET + 2;
pub const TOP16_OFFSET: usize = CONTROL_OFFSET + 1;

/// `(name, offset, width)` for each segment.
pub const LAYOUT: [(&str, usize, usize); 6] = [
    ("own_cards", 0, OPPONENT_OFFSET),
    ("opponents", OPPONENT_OFFSET, 3 * OPPONENT_WIDTH),
    ("previous_hand", PREVIOUS_OFFSET, 26),
    ("passes", PASSES_OFFSET, 2),
    ("control", CONTROL_OFFSET, 1),
    ("top16_played", TOP16_OFFSET, 16),
];

const _: () = assert!(TOP16_OFFSET + 16 == ENCODING_LEN);

const TOP8_FIRST: u8 = 44; // AD
const TOP16_LAST: u8 = 36; // QD

const FLAG_PAIR: u8 = 1 << 0;
const FLAG_TWO_PAIR: u8 = 1 << 1;
const FLAG_TRIPLE: u8 = 1 << 2;
const FLAG_STRAIGHT: u8 = 1 << 3;
const FLAG_FLUSH: u8 = 1 << 4;
const FLAG_FULL_HOUSE: u8 = 1 << 5;

/// Running per-game record of public facts that the encoder needs beyond the
/// current state: which high cards each seat has played, which hand types
/// each seat has played. All flags only ever turn on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct HistoryDigest {
    top8_by_seat: [u8; SEATS],
    types_by_seat: [u8; SEATS],
    top16: u16,
}

impl HistoryDigest {
    pub fn new() -> HistoryDigest {
        HistoryDigest::default()
    }

    /// Records a move by `seat`; `None` is a pass and changes nothing.
    pub fn update(&mut self, seat: u8, played: Option<&ClassifiedHand>) {
        let Some(hand) = played else { return };
        let s = seat as usize;
        for card in hand.cards() {
            let order = card.order();
            if order >= TOP8_FIRST {
                self.top8_by_seat[s] |= 1 << (order - TOP8_FIRST);
            }
            if order >= TOP16_LAST {
                self.top16 |= 1 << (51 - order);
            }
        }
        self.types_by_seat[s] |= match hand.category() {
            HandCategory::Pair => FLAG_PAIR,
            HandCategory::TwoPair => FLAG_TWO_PAIR,
            HandCategory::Triple => FLAG_TRIPLE,
            HandCategory::Straight => FLAG_STRAIGHT,
            HandCategory::Flush => FLAG_FLUSH,
            HandCategory::FullHouse => FLAG_FULL_HOUSE,
            HandCategory::StraightFlush => FLAG_STRAIGHT | FLAG_FLUSH,
            HandCategory::Single | HandCategory::FourOfAKind => 0,
        };
    }

    /// Top-8 bits for `seat`: bit `k` is card order `44 + k`.
    pub fn top8_played(&self, seat: u8) -> u8 {
        self.top8_by_seat[seat as usize]
    }

    /// Hand-type bits for `seat` in the order pair, two-pair, triple,
    /// straight, flush, full house.
    pub fn types_played(&self, seat: u8) -> u8 {
        self.types_by_seat[seat as usize]
    }

    /// Bit `k` is card order `51 - k`.
    pub fn top16_played(&self) -> u16 {
        self.top16
    }

    /// True when every flag set in `earlier` is also set here.
    pub fn dominates(&self, earlier: &HistoryDigest) -> bool {
        (0..SEATS).all(|s| {
            self.top8_by_seat[s] & earlier.top8_by_seat[s] == earlier.top8_by_seat[s]
                && self.types_by_seat[s] & earlier.types_by_seat[s] == earlier.types_by_seat[s]
        }) && self.top16 & earlier.top16 == earlier.top16
    }
}

/// Functional form of [`HistoryDigest::update`].
pub fn update_digest(
    digest: HistoryDigest,
    seat: u8,
    played: Option<&ClassifiedHand>,
) -> HistoryDigest {
    let mut next = digest;
    next.update(seat, played);
    next
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct EncodedState {
    bits: [u8; ENCODING_LEN],
}

impl EncodedState {
    pub fn zeros() -> EncodedState {
        EncodedState {
            bits: [0; ENCODING_LEN],
        }
    }

    pub fn bits(&self) -> &[u8; ENCODING_LEN] {
        &self.bits
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b != 0).count()
    }

    pub fn write_to<T: num_traits::Float>(&self, out: &mut [T]) {
        assert_eq!(out.len(), ENCODING_LEN);
        for (o, &b) in out.iter_mut().zip(&self.bits) {
            *o = if b != 0 { T::one() } else { T::zero() };
        }
    }

    fn set(&mut self, index: usize) {
        self.bits[index] = 1;
    }
}

impl core::fmt::Debug for EncodedState {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "EncodedState(")?;
        for b in &self.bits {
            write!(f, "{b}")?;
        }
        write!(f, ")")
    }
}

/// Per-card combination membership for a hand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Membership {
    pub pair: bool,
    pub triple: bool,
    pub straight: bool,
    pub flush: bool,
    pub full_house: bool,
}

/// Membership flags for every card of `hand`, in sorted order.
pub fn membership(hand: CardSet) -> alloc::vec::Vec<(Card, Membership)> {
    let mut rank_counts = [0u8; 13];
    let mut suit_counts = [0u8; 4];
    for c in hand {
        rank_counts[c.rank().index() as usize] += 1;
        suit_counts[c.suit().index() as usize] += 1;
    }
    // Ranks covered by some straight of five consecutive ranks up to the ace.
    let mut in_straight = [false; 13];
    for start in 0..=(Rank::Ace.index() as usize - 4) {
        if rank_counts[start..start + 5].iter().all(|&n| n > 0) {
            in_straight[start..start + 5].iter_mut().for_each(|x| *x = true);
        }
    }
    let trips = rank_counts.iter().filter(|&&n| n >= 3).count();
    let pairs = rank_counts.iter().filter(|&&n| n >= 2).count();
    hand.iter()
        .map(|c| {
            let n = rank_counts[c.rank().index() as usize];
            let other_trips = trips - usize::from(n >= 3);
            let full_house = (n >= 3 && pairs >= 2) || (n >= 2 && other_trips >= 1);
            (
                c,
                Membership {
                    pair: n >= 2,
                    triple: n >= 3,
                    straight: in_straight[c.rank().index() as usize],
                    flush: suit_counts[c.suit().index() as usize] >= 5,
                    full_house,
                },
            )
        })
        .collect()
}

/// Encodes `view` together with the game's digest.
pub fn encode(view: &PerspectiveView<'_>, digest: &HistoryDigest) -> EncodedState {
    let mut out = EncodedState::zeros();

    for (slot, (card, m)) in membership(view.hand).into_iter().enumerate() {
        let base = slot * SLOT_WIDTH;
        out.set(base + card.rank().index() as usize);
        out.set(base + 13 + card.suit().index() as usize);
        let flags = [m.pair, m.triple, m.straight, m.flush, m.full_house];
        for (i, f) in flags.into_iter().enumerate() {
            if f {
                out.set(base + 17 + i);
            }
        }
    }

    for (j, opp) in view.opponents().into_iter().enumerate() {
        let base = OPPONENT_OFFSET + j * OPPONENT_WIDTH;
        let left = view.card_counts[opp as usize] as usize;
        if left > 0 {
            out.set(base + left - 1);
        }
        let top8 = digest.top8_played(opp);
        for k in 0..8 {
            if top8 & (1 << k) != 0 {
                out.set(base + 13 + k);
            }
        }
        let types = digest.types_played(opp);
        for k in 0..6 {
            if types & (1 << k) != 0 {
                out.set(base + 21 + k);
            }
        }
    }

    if !view.in_control {
        if let Some((_, last)) = view.last_played {
            let key = last.key_card();
            out.set(PREVIOUS_OFFSET + last.category().index());
            out.set(PREVIOUS_OFFSET + 9 + key.rank().index() as usize);
            out.set(PREVIOUS_OFFSET + 22 + key.suit().index() as usize);
        }
    }

    if view.consecutive_passes >= 1 {
        out.set(PASSES_OFFSET);
    }
    if view.consecutive_passes >= 2 {
        out.set(PASSES_OFFSET + 1);
    }
    if view.in_control {
        out.set(CONTROL_OFFSET);
    }

    let top16 = digest.top16_played();
    for k in 0..16 {
        if top16 & (1 << k) != 0 {
            out.set(TOP16_OFFSET + k);
        }
    }
    out
}
