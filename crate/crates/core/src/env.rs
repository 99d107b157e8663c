//! A game bundled with the history digest its observations need.

use crate::action::{ActionIndex, ActionMask};
use crate::encoder::{encode, EncodedState, HistoryDigest};
use crate::game::{GameError, GameState, StepResult};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    state: GameState,
    digest: HistoryDigest,
}

impl Table {
    pub fn new(state: GameState) -> Table {
        let mut digest = HistoryDigest::new();
        for m in state.history() {
            digest.update(m.seat, m.hand.as_ref());
        }
        Table { state, digest }
    }

    pub fn deal(seed: u64) -> Table {
        Table::new(GameState::reset(seed))
    }

    pub fn state(&self) -> &GameState {
        &self.state
    }

    pub fn digest(&self) -> &HistoryDigest {
        &self.digest
    }

    pub fn to_act(&self) -> u8 {
        self.state.to_act()
    }

    pub fn is_done(&self) -> bool {
        self.state.is_done()
    }

    pub fn legal_mask(&self) -> ActionMask {
        self.state.legal_mask()
    }

    /// Observation for `seat`, whether or not it is that seat's turn.
    pub fn observe(&self, seat: u8) -> EncodedState {
        encode(&self.state.perspective_view(seat), &self.digest)
    }

    pub fn step(&mut self, action: ActionIndex) -> Result<StepResult, GameError> {
        let result = self.state.step(action)?;
        let last = self.state.history().last().expect("a move was just recorded");
        self.digest.update(last.seat, last.hand.as_ref());
        Ok(result)
    }
}
