//! Four-player Big 2 state machine.
//!
//! Deals use `ChaCha8Rng::seed_from_u64(seed)` and a Fisher-Yates shuffle
//! (`rand 0.9`, `SliceRandom::shuffle`) of the 52 cards in ascending order;
//! seat `s` receives shuffled positions `13*s .. 13*s + 13`. The holder of the
//! 3D opens with it as a single. Play proceeds clockwise (seat + 1 mod 4);
//! three consecutive passes hand control to the last player who played, who
//! must then lead (a player in control cannot pass).

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::action::{ActionIndex, ActionMask, LookupTables, MoveContext};
use crate::cards::{Card, CardSet};
use crate::hand::{classify, ClassifiedHand};

pub const SEATS: usize = 4;
pub const HAND_SIZE: usize = 13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum GameError {
    #[error("action {0} is not legal in the current state")]
    IllegalAction(usize),
    #[error("the game is already over")]
    GameOver,
}

/// One entry of the public play history; `hand == None` is a pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Move {
    pub seat: u8,
    pub action: ActionIndex,
    pub hand: Option<ClassifiedHand>,
}

impl Move {
    pub fn is_pass(&self) -> bool {
        self.hand.is_none()
    }

    pub fn cards(&self) -> &[Card] {
        self.hand.as_ref().map_or(&[], |h| h.cards())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StepInfo {
    pub turns: u32,
    pub winner: Option<u8>,
    pub cards_remaining: [u8; SEATS],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepResult {
    pub rewards: [i32; SEATS],
    pub done: bool,
    pub info: StepInfo,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GameState {
    hands: [CardSet; SEATS],
    to_act: u8,
    last_played: Option<(u8, ClassifiedHand)>,
    consecutive_passes: u8,
    in_control: bool,
    history: Vec<Move>,
    turn_count: u32,
    seed: u64,
    rewards: Option<[i32; SEATS]>,
}

impl GameState {
    /// Deals a new game from `seed`.
    pub fn reset(seed: u64) -> GameState {
        let mut deck: Vec<Card> = Card::deck().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        deck.shuffle(&mut rng);
        let mut hands = [CardSet::EMPTY; SEATS];
        for (seat, chunk) in deck.chunks(HAND_SIZE).enumerate() {
            hands[seat] = chunk.iter().copied().collect();
        }
        Self::from_hands(hands, seed)
    }

    /// Starts a game from an explicit deal. Panics unless the hands
    /// partition the deck into four 13-card hands.
    pub fn from_hands(hands: [CardSet; SEATS], seed: u64) -> GameState {
        let union = hands.iter().fold(CardSet::EMPTY, |acc, h| acc.union(*h));
        assert!(
            union == CardSet::FULL && hands.iter().all(|h| h.len() == HAND_SIZE),
            "hands must partition the deck"
        );
        let to_act = hands
            .iter()
            .position(|h| h.contains(Card::THREE_OF_DIAMONDS))
            .unwrap() as u8;
        GameState {
            hands,
            to_act,
            last_played: None,
            consecutive_passes: 0,
            in_control: false,
            history: Vec::new(),
            turn_count: 0,
            seed,
            rewards: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn to_act(&self) -> u8 {
        self.to_act
    }

    pub fn hand(&self, seat: u8) -> CardSet {
        self.hands[seat as usize]
    }

    pub fn card_counts(&self) -> [u8; SEATS] {
        core::array::from_fn(|s| self.hands[s].len() as u8)
    }

    pub fn last_played(&self) -> Option<(u8, ClassifiedHand)> {
        self.last_played
    }

    pub fn consecutive_passes(&self) -> u8 {
        self.consecutive_passes
    }

    /// Whether the seat to act holds control.
    pub fn in_control(&self) -> bool {
        self.in_control
    }

    pub fn history(&self) -> &[Move] {
        &self.history
    }

    pub fn turn_count(&self) -> u32 {
        self.turn_count
    }

    pub fn is_opening_turn(&self) -> bool {
        self.history.is_empty()
    }

    pub fn is_done(&self) -> bool {
        self.rewards.is_some()
    }

    /// Terminal rewards, once the game is over.
    pub fn rewards(&self) -> Option<[i32; SEATS]> {
        self.rewards
    }

    /// Legal actions for the seat to act; empty once the game is over.
    pub fn legal_mask(&self) -> ActionMask {
        if self.is_done() {
            return ActionMask::none();
        }
        if self.is_opening_turn() {
            // The 3D is the lowest card, so it always sits at position 0.
            return ActionMask::only(crate::action::to_global(1, 0));
        }
        let mut hand = [Card::THREE_OF_DIAMONDS; HAND_SIZE];
        let n = self.hands[self.to_act as usize].write_sorted(&mut hand);
        let context = match (self.in_control, self.last_played) {
            (false, Some((_, last))) => MoveContext::must_beat(last),
            _ => MoveContext::control(),
        };
        LookupTables::global().available_actions(&hand[..n], context)
    }

    /// Applies `action` for the seat to act. On error the state is unchanged.
    pub fn step(&mut self, action: ActionIndex) -> Result<StepResult, GameError> {
        if self.is_done() {
            return Err(GameError::GameOver);
        }
        if !self.legal_mask().is_allowed(action) {
            return Err(GameError::IllegalAction(action.value()));
        }
        let seat = self.to_act;
        let mut played = None;
        if action.is_pass() {
            self.consecutive_passes += 1;
        } else {
            let hand_set = self.hands[seat as usize];
            let mut sorted = [Card::THREE_OF_DIAMONDS; HAND_SIZE];
            let n = hand_set.write_sorted(&mut sorted);
            let selection = LookupTables::global()
                .action_to_cards(action, &sorted[..n])
                .expect("legal actions reference cards in hand");
            let hand = classify(selection.cards()).expect("legal actions form hands");
            for &card in hand.cards() {
                self.hands[seat as usize].remove(card);
            }
            self.last_played = Some((seat, hand));
            self.consecutive_passes = 0;
            self.in_control = false;
            played = Some(hand);
        }
        self.history.push(Move {
            seat,
            action,
            hand: played,
        });
        self.turn_count += 1;
        self.to_act = (seat + 1) % SEATS as u8;

        if self.consecutive_passes == 3 {
            // Everyone else passed: the last player to play leads again.
            debug_assert_eq!(self.last_played.map(|(s, _)| s), Some(self.to_act));
            self.consecutive_passes = 0;
            self.last_played = None;
            self.in_control = true;
        }

        let counts = self.card_counts();
        let mut result = StepResult {
            rewards: [0; SEATS],
            done: false,
            info: StepInfo {
                turns: self.turn_count,
                winner: None,
                cards_remaining: counts,
            },
        };
        if counts[seat as usize] == 0 {
            let rewards = terminal_rewards(counts);
            self.rewards = Some(rewards);
            result.rewards = rewards;
            result.done = true;
            result.info.winner = Some(seat);
        }
        Ok(result)
    }

    /// The information available to `seat`.
    pub fn perspective_view(&self, seat: u8) -> PerspectiveView<'_> {
        PerspectiveView {
            seat,
            hand: self.hands[seat as usize],
            card_counts: self.card_counts(),
            to_act: self.to_act,
            history: &self.history,
            last_played: self.last_played,
            consecutive_passes: self.consecutive_passes,
            in_control: self.in_control && self.to_act == seat,
        }
    }
}

/// Rewards once some seat has no cards left: the winner collects the sum
/// of the other seats' card counts and every other seat loses its own count.
pub fn terminal_rewards(cards_left: [u8; SEATS]) -> [i32; SEATS] {
    let total: i32 = cards_left.iter().map(|&c| c as i32).sum();
    cards_left.map(|c| if c == 0 { total } else { -(c as i32) })
}

/// One seat's view of a game: its own cards plus public information.
#[derive(Debug, Clone, Copy)]
pub struct PerspectiveView<'a> {
    pub seat: u8,
    pub hand: CardSet,
    /// Cards held per absolute seat (public).
    pub card_counts: [u8; SEATS],
    pub to_act: u8,
    pub history: &'a [Move],
    pub last_played: Option<(u8, ClassifiedHand)>,
    pub consecutive_passes: u8,
    /// Whether this seat is to act and holds control.
    pub in_control: bool,
}

impl PerspectiveView<'_> {
    /// Seats of the three opponents, clockwise from this seat.
    pub fn opponents(&self) -> [u8; 3] {
        core::array::from_fn(|i| (self.seat + 1 + i as u8) % SEATS as u8)
    }

    pub fn opponent_counts(&self) -> [u8; 3] {
        self.opponents().map(|s| self.card_counts[s as usize])
    }
}
