//! Self-play experience collection.
//!
//! Each game slot keeps a short queue of samples that have been played but
//! not yet handed to the trainer. A segment hands over exactly `T` samples
//! per slot and keeps the newest four back. Four steps always cover the
//! next decision of every seat whose game is still running, so every
//! emitted sample either ends its seat's game or can bootstrap from the
//! value of that seat's next decision. Terminal rewards are written onto
//! each seat's final sample, which is still queued when the game ends.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::action::{ActionIndex, NUM_ACTIONS};
use crate::encoder::ENCODING_LEN;
use crate::env::Table;
use crate::game::SEATS;
use crate::net::{sample_index, NetError, Network};
use crate::ppo::{fill_advantages, TrajectorySample};
use crate::scalar::Scalar;

/// Samples held back per slot between segments.
pub const CARRY: usize = SEATS;

#[derive(Debug, Clone)]
struct Pending {
    sample: TrajectorySample,
    seat: u8,
    game: u64,
}

/// One of the N parallel games plus its sample queue.
#[derive(Debug, Clone)]
pub struct GameSlot {
    table: Table,
    game: u64,
    rng: ChaCha8Rng,
    pending: Vec<Pending>,
    last_of_seat: [Option<usize>; SEATS],
    finished: Vec<[i32; SEATS]>,
}

impl GameSlot {
    pub fn new(seed: u64) -> GameSlot {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let table = Table::deal(rng.random());
        GameSlot {
            table,
            game: 0,
            rng,
            pending: Vec::new(),
            last_of_seat: [None; SEATS],
            finished: Vec::new(),
        }
    }

    pub fn table(&self) -> &Table {
        &self.table
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    fn record(&mut self, sample: TrajectorySample) -> Result<(), NetError> {
        let seat = self.table.to_act();
        let action = sample.action;
        self.last_of_seat[seat as usize] = Some(self.pending.len());
        self.pending.push(Pending {
            sample,
            seat,
            game: self.game,
        });
        let result = self
            .table
            .step(action)
            .expect("sampled actions come from the legal mask");
        if result.done {
            for (s, idx) in self.last_of_seat.iter().enumerate() {
                let i = idx.expect("every seat acts before a game can end");
                self.pending[i].sample.reward = result.rewards[s] as f32;
                self.pending[i].sample.done = true;
            }
            self.finished.push(result.rewards);
            self.table = Table::deal(self.rng.random());
            self.game += 1;
            self.last_of_seat = [None; SEATS];
        }
        Ok(())
    }
}

/// Plays `steps` self-play moves in every slot, batching inference across
/// slots. All seats use `net`.
pub fn run_steps<T: Scalar>(slots: &mut [GameSlot], net: &Network<T>, steps: usize) -> Result<(), NetError> {
    let b = slots.len();
    let mut inputs = vec![T::zero(); b * ENCODING_LEN];
    let mut masks = vec![T::zero(); b * NUM_ACTIONS];
    for _ in 0..steps {
        let mut states = Vec::with_capacity(b);
        let mut legal = Vec::with_capacity(b);
        for (i, slot) in slots.iter().enumerate() {
            let state = slot.table.observe(slot.table.to_act());
            let mask = slot.table.legal_mask();
            state.write_to(&mut inputs[i * ENCODING_LEN..(i + 1) * ENCODING_LEN]);
            mask.write_additive(&mut masks[i * NUM_ACTIONS..(i + 1) * NUM_ACTIONS]);
            states.push(state);
            legal.push(mask);
        }
        let out = net.forward_batch(&inputs, &masks, b)?;
        for (i, ((slot, state), mask)) in slots.iter_mut().zip(states).zip(legal).enumerate() {
            let a = sample_index(out.probs_row(i), &mut slot.rng);
            let sample = TrajectorySample {
                state,
                mask,
                action: ActionIndex::new(a).expect("index within the action space"),
                log_prob_old: out.log_probs_row(i)[a].as_f64() as f32,
                value_old: out.values[i].as_f64() as f32,
                reward: 0.0,
                done: false,
                advantage: 0.0,
                return_target: 0.0,
            };
            slot.record(sample)?;
        }
    }
    Ok(())
}

/// Output of one collection round.
#[derive(Debug, Clone, Default)]
pub struct Segment {
    /// Exactly `N * T` samples with advantages and return targets filled.
    pub samples: Vec<TrajectorySample>,
    /// Terminal rewards of games that ended during the round.
    pub finished_games: Vec<[i32; SEATS]>,
}

impl Segment {
    /// Mean terminal reward per seat over the finished games.
    pub fn mean_reward_by_seat(&self) -> Option<[f64; SEATS]> {
        if self.finished_games.is_empty() {
            return None;
        }
        let n = self.finished_games.len() as f64;
        let mut sums = [0.0; SEATS];
        for r in &self.finished_games {
            for s in 0..SEATS {
                sums[s] += r[s] as f64;
            }
        }
        Some(sums.map(|x| x / n))
    }
}

#[derive(Debug, Clone)]
pub struct SelfPlayCollector {
    slots: Vec<GameSlot>,
    steps_per_segment: usize,
}

impl SelfPlayCollector {
    /// Slot `i` draws deals and action samples from its own stream derived
    /// from `(seed, i)`, so results do not depend on how slots are split
    /// across workers.
    pub fn new(parallel_games: usize, steps_per_segment: usize, seed: u64) -> SelfPlayCollector {
        let mut seeder = ChaCha8Rng::seed_from_u64(seed);
        let slots = (0..parallel_games).map(|_| GameSlot::new(seeder.random())).collect();
        SelfPlayCollector {
            slots,
            steps_per_segment,
        }
    }

    pub fn parallel_games(&self) -> usize {
        self.slots.len()
    }

    pub fn steps_per_segment(&self) -> usize {
        self.steps_per_segment
    }

    /// Moves each slot must play before [`finish`](Self::finish).
    pub fn steps_needed(&self) -> usize {
        let queued = self.slots.first().map_or(0, GameSlot::pending_len);
        self.steps_per_segment + CARRY - queued
    }

    pub fn slots_mut(&mut self) -> &mut [GameSlot] {
        &mut self.slots
    }

    /// Plays and emits one segment on the calling thread.
    pub fn collect<T: Scalar>(&mut self, net: &Network<T>, gamma: f64, lambda: f64) -> Result<Segment, NetError> {
        let steps = self.steps_needed();
        run_steps(&mut self.slots, net, steps)?;
        Ok(self.finish(gamma, lambda))
    }

    /// Computes advantages for the oldest `T` samples of every slot and
    /// hands them over. Panics if the slots have not been stepped.
    pub fn finish(&mut self, gamma: f64, lambda: f64) -> Segment {
        let t = self.steps_per_segment;
        let mut segment = Segment {
            samples: Vec::with_capacity(self.slots.len() * t),
            finished_games: Vec::new(),
        };
        for slot in &mut self.slots {
            assert_eq!(slot.pending.len(), t + CARRY, "slot not stepped for this segment");
            // Group the emitted part into per-seat, per-game trajectories.
            let mut groups: Vec<(u64, u8, Vec<usize>)> = Vec::new();
            for (i, p) in slot.pending[..t].iter().enumerate() {
                match groups.iter_mut().find(|g| g.0 == p.game && g.1 == p.seat) {
                    Some(g) => g.2.push(i),
                    None => groups.push((p.game, p.seat, vec![i])),
                }
            }
            for (game, seat, rows) in groups {
                let last = *rows.last().expect("groups are non-empty");
                let bootstrap = if slot.pending[last].sample.done {
                    0.0
                } else {
                    slot.pending[t..]
                        .iter()
                        .find(|p| p.game == game && p.seat == seat)
                        .expect("a running game's next decision is queued")
                        .sample
                        .value_old as f64
                };
                let mut trajectory: Vec<TrajectorySample> =
                    rows.iter().map(|&i| slot.pending[i].sample.clone()).collect();
                fill_advantages(&mut trajectory, bootstrap, gamma, lambda);
                for (&i, s) in rows.iter().zip(trajectory) {
                    slot.pending[i].sample = s;
                }
            }
            segment
                .samples
                .extend(slot.pending.drain(..t).map(|p| p.sample));
            for idx in slot.last_of_seat.iter_mut() {
                *idx = idx.and_then(|i| i.checked_sub(t));
            }
            segment.finished_games.append(&mut slot.finished);
        }
        segment
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::NetworkShape;

    fn net() -> Network<f32> {
        Network::zeros(NetworkShape {
            input: ENCODING_LEN,
            shared: 4,
            head: 4,
            actions: NUM_ACTIONS,
        })
    }

    #[test]
    fn segments_have_exactly_n_times_t_samples() {
        let mut c = SelfPlayCollector::new(3, 5, 1);
        for _ in 0..30 {
            let seg = c.collect(&net(), 0.99, 0.95).unwrap();
            assert_eq!(seg.samples.len(), 15);
        }
        let mut one = SelfPlayCollector::new(1, 1, 2);
        assert_eq!(one.collect(&net(), 0.99, 0.95).unwrap().samples.len(), 1);
    }

    #[test]
    fn every_terminal_reward_is_emitted_once() {
        let mut c = SelfPlayCollector::new(2, 7, 9);
        let mut reward_sum = 0.0f64;
        let mut done_count = 0;
        let mut games = 0;
        let mut total_abs = 0i64;
        for _ in 0..200 {
            let seg = c.collect(&net(), 0.99, 0.95).unwrap();
            for s in &seg.samples {
                reward_sum += s.reward as f64;
                if s.done {
                    done_count += 1;
                } else {
                    assert_eq!(s.reward, 0.0);
                }
            }
            games += seg.finished_games.len();
            total_abs += seg
                .finished_games
                .iter()
                .flat_map(|r| r.iter())
                .map(|&x| x.abs() as i64)
                .sum::<i64>();
        }
        assert!(games > 10);
        // Games finishing in the final carry window are not emitted yet.
        assert!(done_count <= 4 * games && done_count + 16 >= 4 * games);
        assert!(reward_sum.abs() <= 4.0 * 39.0);
        assert!(total_abs > 0);
    }
}
