//! Head-to-head matches and their statistics.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::Table;
use crate::game::SEATS;
use crate::net::NetError;
use crate::policy::{Decision, Policy};

/// Scores lie in `[-MAX_SCORE, MAX_SCORE]`.
pub const MAX_SCORE: i32 = 39;

/// Games at most this long are played together per policy call.
pub const LOCKSTEP_BATCH: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GameOutcome {
    pub seed: u64,
    /// `seat_of[p]` is the seat player `p` occupied.
    pub seat_of: [u8; SEATS],
    /// Rewards indexed by player.
    pub rewards: [i32; SEATS],
    pub turns: u32,
}

/// Deal seeds for a match.
pub fn game_seeds(seed: u64, games: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..games).map(|_| rng.random()).collect()
}

/// Duplicate format: each of `games / SEATS` deals is repeated `SEATS`
/// times in a row. With seat rotation and a block-aligned first game,
/// every player holds every hand of the deal once.
pub fn duplicate_seeds(seed: u64, games: usize) -> Vec<u64> {
    game_seeds(seed, games / SEATS)
        .into_iter()
        .flat_map(|s| [s; SEATS])
        .collect()
}

/// Seat of player `p` in game number `game`.
pub fn seat_for(player: usize, game: u64, rotate: bool) -> u8 {
    let shift = if rotate { (game % SEATS as u64) as usize } else { 0 };
    ((player + shift) % SEATS) as u8
}

/// Plays one game per seed with `players[p]` as player `p`. `first_game`
/// is the match-wide number of `seeds[0]`, which drives seat rotation.
/// Games run in lockstep so network policies can batch their inference.
pub fn play_games(
    players: [&dyn Policy; SEATS],
    seeds: &[u64],
    first_game: u64,
    rotate: bool,
) -> Result<Vec<GameOutcome>, NetError> {
    let mut outcomes = Vec::with_capacity(seeds.len());
    for (c, chunk) in seeds.chunks(LOCKSTEP_BATCH).enumerate() {
        let base = first_game + (c * LOCKSTEP_BATCH) as u64;
        outcomes.extend(play_chunk(players, chunk, base, rotate)?);
    }
    Ok(outcomes)
}

fn play_chunk(
    players: [&dyn Policy; SEATS],
    seeds: &[u64],
    first_game: u64,
    rotate: bool,
) -> Result<Vec<GameOutcome>, NetError> {
    let mut tables: Vec<Table> = seeds.iter().map(|&s| Table::deal(s)).collect();
    // Action randomness is separate from the deal but fixed by the seed.
    let mut rngs: Vec<ChaCha8Rng> = seeds
        .iter()
        .map(|&s| ChaCha8Rng::seed_from_u64(s ^ 0x9e37_79b9_7f4a_7c15))
        .collect();
    let seat_maps: Vec<[u8; SEATS]> = (0..seeds.len())
        .map(|g| core::array::from_fn(|p| seat_for(p, first_game + g as u64, rotate)))
        .collect();

    loop {
        let mut chosen: Vec<(usize, crate::action::ActionIndex)> = Vec::new();
        for (p, policy) in players.iter().enumerate() {
            let mut idx = Vec::new();
            let mut decisions = Vec::new();
            for ((g, table), rng) in tables.iter().enumerate().zip(rngs.iter_mut()) {
                if !table.is_done() && seat_maps[g][p] == table.to_act() {
                    idx.push(g);
                    decisions.push(Decision {
                        table,
                        mask: table.legal_mask(),
                        rng,
                    });
                }
            }
            if decisions.is_empty() {
                continue;
            }
            let actions = policy.act(&mut decisions)?;
            for (d, &a) in decisions.iter().zip(&actions) {
                assert!(d.mask.is_allowed(a), "policy chose an illegal action");
            }
            chosen.extend(idx.into_iter().zip(actions));
        }
        if chosen.is_empty() {
            break;
        }
        for (g, a) in chosen {
            tables[g].step(a).expect("checked against the legal mask");
        }
    }

    Ok(tables
        .iter()
        .enumerate()
        .map(|(g, t)| {
            let by_seat = t.state().rewards().expect("every game finished");
            let seat_of = seat_maps[g];
            GameOutcome {
                seed: seeds[g],
                seat_of,
                rewards: core::array::from_fn(|p| by_seat[seat_of[p] as usize]),
                turns: t.state().turn_count(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlayerStats {
    pub mean: f64,
    pub std_dev: f64,
    /// `std_dev / sqrt(games)`.
    pub std_error: f64,
    pub win_rate: f64,
    pub total: i64,
    /// `histogram[i]` counts games scoring `i - MAX_SCORE`.
    pub histogram: Vec<u64>,
}

impl PlayerStats {
    pub fn probability(&self, score: i32) -> f64 {
        let games: u64 = self.histogram.iter().sum();
        let i = (score + MAX_SCORE) as usize;
        self.histogram.get(i).map_or(0.0, |&c| c as f64 / games as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchReport {
    pub games: usize,
    pub players: [PlayerStats; SEATS],
    /// Mean reward by absolute seat, whoever sat there.
    pub seat_means: [f64; SEATS],
}

impl MatchReport {
    pub fn from_outcomes(outcomes: &[GameOutcome]) -> MatchReport {
        MatchReport::from_blocks(outcomes, 1)
    }

    /// Like [`from_outcomes`](Self::from_outcomes) for matches whose games
    /// come in correlated runs of `block` (duplicate deals). The standard
    /// error is taken from the spread of the block means.
    pub fn from_blocks(outcomes: &[GameOutcome], block: usize) -> MatchReport {
        assert!(block > 0 && outcomes.len() % block == 0, "outcomes must fill whole blocks");
        let n = outcomes.len();
        let blocks = n / block;
        let mut seat_sums = [0i64; SEATS];
        for o in outcomes {
            for p in 0..SEATS {
                seat_sums[o.seat_of[p] as usize] += o.rewards[p] as i64;
            }
        }
        let players = core::array::from_fn(|p| {
            let mut histogram = vec![0u64; (2 * MAX_SCORE + 1) as usize];
            let mut total = 0i64;
            let mut wins = 0usize;
            for o in outcomes {
                let r = o.rewards[p];
                histogram[(r + MAX_SCORE) as usize] += 1;
                total += r as i64;
                wins += usize::from(r > 0);
            }
            let mean = if n == 0 { 0.0 } else { total as f64 / n as f64 };
            let var = if n > 1 {
                outcomes
                    .iter()
                    .map(|o| {
                        let d = o.rewards[p] as f64 - mean;
                        d * d
                    })
                    .sum::<f64>()
                    / (n - 1) as f64
            } else {
                0.0
            };
            let std_dev = libm::sqrt(var);
            let std_error = if block == 1 {
                if n == 0 { 0.0 } else { std_dev / libm::sqrt(n as f64) }
            } else if blocks > 1 {
                let block_var = outcomes
                    .chunks(block)
                    .map(|c| {
                        let m = c.iter().map(|o| o.rewards[p] as f64).sum::<f64>() / block as f64;
                        (m - mean) * (m - mean)
                    })
                    .sum::<f64>()
                    / (blocks - 1) as f64;
                libm::sqrt(block_var / blocks as f64)
            } else {
                0.0
            };
            PlayerStats {
                mean,
                std_dev,
                std_error,
                win_rate: if n == 0 { 0.0 } else { wins as f64 / n as f64 },
                total,
                histogram,
            }
        });
        MatchReport {
            games: n,
            players,
            seat_means: seat_sums.map(|s| if n == 0 { 0.0 } else { s as f64 / n as f64 }),
        }
    }

    /// True when player `p`'s mean exceeds `threshold` by `sigmas` standard
    /// errors.
    pub fn exceeds(&self, p: usize, threshold: f64, sigmas: f64) -> bool {
        let s = &self.players[p];
        s.mean - sigmas * s.std_error > threshold
    }

    /// True when player `p`'s mean is within `sigmas` standard errors of
    /// `value`.
    pub fn within(&self, p: usize, value: f64, sigmas: f64) -> bool {
        let s = &self.players[p];
        (s.mean - value).abs() <= sigmas * s.std_error
    }
}
