//! Plain-text game records.
//!
//! ```text
//! # big2 game seed=<seed>
//! <turn> <seat> <action> <cards|PASS>
//! ...
//! # rewards <r0> <r1> <r2> <r3>
//! ```
//!
//! Cards are comma-separated in the usual text form (`3D,3S`). Replaying
//! deals from the seed and applies the actions, checking every card list.

use std::fmt::Write as _;

use big2_core::action::ActionIndex;
use big2_core::cards::{parse_cards, Card};
use big2_core::game::{GameState, SEATS};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GameLogError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {message}")]
    Mismatch { line: usize, message: String },
    #[error("missing header line")]
    MissingHeader,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoggedMove {
    pub turn: u32,
    pub seat: u8,
    pub action: ActionIndex,
    /// Empty for a pass.
    pub cards: Vec<Card>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GameLog {
    pub seed: u64,
    pub moves: Vec<LoggedMove>,
    pub rewards: Option<[i32; SEATS]>,
}

impl GameLog {
    /// Records a game dealt with `GameState::reset(state.seed())`.
    pub fn from_state(state: &GameState) -> GameLog {
        GameLog {
            seed: state.seed(),
            moves: state
                .history()
                .iter()
                .enumerate()
                .map(|(i, m)| LoggedMove {
                    turn: i as u32 + 1,
                    seat: m.seat,
                    action: m.action,
                    cards: m.cards().to_vec(),
                })
                .collect(),
            rewards: state.rewards(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("# big2 game seed={}\n", self.seed);
        for m in &self.moves {
            let cards = if m.cards.is_empty() {
                "PASS".to_string()
            } else {
                m.cards.iter().map(Card::to_string).collect::<Vec<_>>().join(",")
            };
            let _ = writeln!(out, "{} {} {} {}", m.turn, m.seat, m.action.value(), cards);
        }
        if let Some(r) = self.rewards {
            let _ = writeln!(out, "# rewards {} {} {} {}", r[0], r[1], r[2], r[3]);
        }
        out
    }

    pub fn parse(text: &str) -> Result<GameLog, GameLogError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(GameLogError::MissingHeader)?;
        let seed = header
            .trim()
            .strip_prefix("# big2 game seed=")
            .and_then(|s| s.trim().parse().ok())
            .ok_or(GameLogError::MissingHeader)?;
        let mut log = GameLog {
            seed,
            moves: Vec::new(),
            rewards: None,
        };
        for (i, line) in lines {
            let line_no = i + 1;
            let err = |message: &str| GameLogError::Parse {
                line: line_no,
                message: message.into(),
            };
            let line = line.trim();
            if let Some(rest) = line.strip_prefix("# rewards") {
                let r: Vec<i32> = rest
                    .split_whitespace()
                    .map(str::parse)
                    .collect::<Result<_, _>>()
                    .map_err(|_| err("bad reward"))?;
                log.rewards = Some(r.try_into().map_err(|_| err("expected four rewards"))?);
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [turn, seat, action, cards] = fields[..] else {
                return Err(err("expected `<turn> <seat> <action> <cards|PASS>`"));
            };
            let seat: u8 = seat.parse().ok().filter(|&s| (s as usize) < SEATS).ok_or_else(|| err("bad seat"))?;
            let action = action
                .parse::<usize>()
                .ok()
                .and_then(ActionIndex::new)
                .ok_or_else(|| err("bad action index"))?;
            let cards = if cards == "PASS" {
                Vec::new()
            } else {
                parse_cards(&cards.replace(',', " ")).map_err(|e| err(&e.to_string()))?
            };
            log.moves.push(LoggedMove {
                turn: turn.parse().map_err(|_| err("bad turn number"))?,
                seat,
                action,
                cards,
            });
        }
        Ok(log)
    }

    /// Re-deals from the seed and plays every move, checking that seats,
    /// card lists and rewards agree with the record.
    pub fn replay(&self) -> Result<GameState, GameLogError> {
        let mut state = GameState::reset(self.seed);
        for (i, m) in self.moves.iter().enumerate() {
            let mismatch = |message: String| GameLogError::Mismatch {
                line: i + 2,
                message,
            };
            if state.to_act() != m.seat {
                return Err(mismatch(format!("seat {} to act, log says {}", state.to_act(), m.seat)));
            }
            state.step(m.action).map_err(|e| mismatch(e.to_string()))?;
            let played = state.history().last().expect("just stepped").cards();
            let mut logged = m.cards.clone();
            logged.sort();
            if played != logged.as_slice() {
                return Err(mismatch(format!("action {} plays {played:?}", m.action.value())));
            }
        }
        if let Some(r) = self.rewards {
            if state.rewards() != Some(r) {
                return Err(GameLogError::Mismatch {
                    line: self.moves.len() + 2,
                    message: format!("recorded rewards {r:?}, replay gives {:?}", state.rewards()),
                });
            }
        }
        Ok(state)
    }
}
