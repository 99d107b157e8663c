//! Terminal game: one human against three policy-driven seats.

use std::io::{self, BufRead, Write};
use std::sync::Arc;

use big2_core::action::ActionIndex;
use big2_core::env::Table;
use big2_core::game::SEATS;
use big2_core::policy::{Decision, Policy};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::evaluation::{build_policies, EvalError, PolicySpec};
use crate::gamelog::GameLog;
use crate::view::{describe, legal_actions, SeatView};

#[derive(Debug, Error)]
pub enum PlayError {
    #[error("{0}")]
    Policy(#[from] EvalError),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("human seat must be 0-3, got {0}")]
    BadSeat(u8),
}

#[derive(Debug, Clone)]
pub struct PlayOptions {
    pub seed: u64,
    pub human_seat: u8,
    pub opponent: PolicySpec,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlayOutcome {
    Finished { rewards: [i32; SEATS], log: GameLog },
    /// The human quit or the input ended.
    Abandoned { log: GameLog },
}

const SEAT_NAMES: [&str; SEATS] = ["North", "East", "South", "West"];

fn render(out: &mut dyn Write, view: &SeatView) -> io::Result<()> {
    writeln!(out)?;
    let counts: Vec<String> = (0..SEATS)
        .filter(|&s| s != view.seat as usize)
        .map(|s| format!("seat {s} ({}): {} cards", SEAT_NAMES[s], view.card_counts[s]))
        .collect();
    writeln!(out, "{}", counts.join(" | "))?;
    match &view.last_played {
        Some(h) if !view.in_control => writeln!(out, "to beat: {} ({}) by seat {}", h.cards.join(" "), h.category, h.seat)?,
        _ => writeln!(out, "you have control: play anything")?,
    }
    writeln!(out, "your hand: {}", view.hand.join(" "))?;
    Ok(())
}

/// Plays one game. Options are numbered from 1; `q` quits.
pub fn run(input: &mut dyn BufRead, out: &mut dyn Write, opts: &PlayOptions) -> Result<PlayOutcome, PlayError> {
    if opts.human_seat as usize >= SEATS {
        return Err(PlayError::BadSeat(opts.human_seat));
    }
    let specs = std::array::from_fn(|_| opts.opponent.clone());
    let policies: [Arc<dyn Policy + Send>; SEATS] = build_policies(&specs)?;
    let ai = policies[0].clone();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut table = Table::deal(opts.seed);
    let human = opts.human_seat;
    writeln!(out, "Big 2, game seed {}. You are seat {human} ({}).", opts.seed, SEAT_NAMES[human as usize])?;

    let mut line = String::new();
    while !table.is_done() {
        let seat = table.to_act();
        let action = if seat == human {
            render(out, &SeatView::new(&table.state().perspective_view(human)))?;
            let options = legal_actions(table.state());
            for (i, o) in options.iter().enumerate() {
                writeln!(out, "  [{}] {}", i + 1, o.label)?;
            }
            loop {
                write!(out, "choose 1-{} (q to quit): ", options.len())?;
                out.flush()?;
                line.clear();
                if input.read_line(&mut line)? == 0 || line.trim().eq_ignore_ascii_case("q") {
                    writeln!(out)?;
                    return Ok(PlayOutcome::Abandoned {
                        log: GameLog::from_state(table.state()),
                    });
                }
                match line.trim().parse::<usize>() {
                    Ok(k) if (1..=options.len()).contains(&k) => {
                        break ActionIndex::new(options[k - 1].action as usize).expect("legal action index");
                    }
                    _ => writeln!(out, "not an option: {:?}", line.trim())?,
                }
            }
        } else {
            let mut decisions = [Decision {
                table: &table,
                mask: table.legal_mask(),
                rng: &mut rng,
            }];
            ai.act(&mut decisions).map_err(EvalError::from)?[0]
        };
        table.step(action).expect("actions come from the legal mask");
        let m = table.state().history().last().expect("just stepped");
        if seat != human {
            writeln!(out, "seat {seat} ({}): {}", SEAT_NAMES[seat as usize], describe(m.cards()))?;
        }
    }

    let rewards = table.state().rewards().expect("game over");
    writeln!(out)?;
    for (s, r) in rewards.iter().enumerate() {
        let who = if s == human as usize { " (you)" } else { "" };
        writeln!(out, "seat {s}{who}: {r:+}")?;
    }
    Ok(PlayOutcome::Finished {
        rewards,
        log: GameLog::from_state(table.state()),
    })
}
