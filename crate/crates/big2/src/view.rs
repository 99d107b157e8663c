//! Serializable per-seat views. Everything here is built from a
//! [`PerspectiveView`], so concealed cards cannot leak into it.

use big2_core::action::{action_to_cards, ActionIndex};
use big2_core::cards::Card;
use big2_core::game::{GameState, Move, PerspectiveView, SEATS};
use big2_core::hand::ClassifiedHand;
use serde::{Deserialize, Serialize};

pub fn card_strings(cards: &[Card]) -> Vec<String> {
    cards.iter().map(Card::to_string).collect()
}

/// `PASS` or the cards separated by spaces.
pub fn describe(cards: &[Card]) -> String {
    if cards.is_empty() {
        "PASS".into()
    } else {
        card_strings(cards).join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LegalAction {
    pub action: u16,
    pub cards: Vec<String>,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlayedHand {
    pub seat: u8,
    pub cards: Vec<String>,
    pub category: String,
}

impl PlayedHand {
    fn new(seat: u8, hand: &ClassifiedHand) -> PlayedHand {
        PlayedHand {
            seat,
            cards: card_strings(hand.cards()),
            category: hand.category().name().into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveRecord {
    /// 1-based position in the game's history.
    pub turn: u32,
    pub seat: u8,
    pub action: u16,
    pub pass: bool,
    pub cards: Vec<String>,
}

impl MoveRecord {
    pub fn new(turn: u32, m: &Move) -> MoveRecord {
        MoveRecord {
            turn,
            seat: m.seat,
            action: m.action.value() as u16,
            pass: m.is_pass(),
            cards: card_strings(m.cards()),
        }
    }
}

/// History entries from index `from` onwards.
pub fn moves_since(history: &[Move], from: usize) -> Vec<MoveRecord> {
    history
        .iter()
        .enumerate()
        .skip(from)
        .map(|(i, m)| MoveRecord::new(i as u32 + 1, m))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeatView {
    pub seat: u8,
    pub hand: Vec<String>,
    /// Cards held by every seat, indexed by absolute seat.
    pub card_counts: [u8; SEATS],
    pub to_act: u8,
    pub last_played: Option<PlayedHand>,
    pub consecutive_passes: u8,
    pub in_control: bool,
    pub history: Vec<MoveRecord>,
}

impl SeatView {
    pub fn new(view: &PerspectiveView<'_>) -> SeatView {
        SeatView {
            seat: view.seat,
            hand: card_strings(&view.hand.to_vec()),
            card_counts: view.card_counts,
            to_act: view.to_act,
            last_played: view.last_played.as_ref().map(|(s, h)| PlayedHand::new(*s, h)),
            consecutive_passes: view.consecutive_passes,
            in_control: view.in_control,
            history: moves_since(view.history, 0),
        }
    }
}

/// Legal moves for the seat to act, in action-index order.
pub fn legal_actions(state: &GameState) -> Vec<LegalAction> {
    if state.is_done() {
        return Vec::new();
    }
    let hand = state.hand(state.to_act()).to_vec();
    state
        .legal_mask()
        .iter()
        .map(|a| legal_action(a, &hand))
        .collect()
}

fn legal_action(a: ActionIndex, hand: &[Card]) -> LegalAction {
    let selection = action_to_cards(a, hand).expect("legal actions resolve against the hand");
    LegalAction {
        action: a.value() as u16,
        cards: card_strings(selection.cards()),
        label: describe(selection.cards()),
    }
}
