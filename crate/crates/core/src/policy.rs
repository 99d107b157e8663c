//! Move-selection strategies used for evaluation and play.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::action::{ActionIndex, ActionMask, NUM_ACTIONS, PASS};
use crate::encoder::ENCODING_LEN;
use crate::env::Table;
use crate::net::{argmax, sample_index, NetError, Network};

/// A pending move: the table, its legal actions and the game's random stream.
#[derive(Debug)]
pub struct Decision<'a> {
    pub table: &'a Table,
    pub mask: ActionMask,
    pub rng: &'a mut ChaCha8Rng,
}

pub trait Policy: Sync {
    /// Chooses one legal action per decision. Decisions may come from
    /// different games; each must draw randomness only from its own `rng`.
    fn act(&self, decisions: &mut [Decision<'_>]) -> Result<Vec<ActionIndex>, NetError>;
}

/// Uniform over the legal actions.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomUniform;

impl Policy for RandomUniform {
    fn act(&self, decisions: &mut [Decision<'_>]) -> Result<Vec<ActionIndex>, NetError> {
        Ok(decisions
            .iter_mut()
            .map(|d| {
                let k = d.rng.random_range(0..d.mask.count());
                d.mask.iter().nth(k).expect("k is below the legal count")
            })
            .collect())
    }
}

/// Plays the legal move using the most cards, weakest first; passes only
/// when nothing else is legal.
#[derive(Debug, Clone, Copy, Default)]
pub struct Greedy;

impl Greedy {
    pub fn choose(mask: &ActionMask) -> ActionIndex {
        mask.iter()
            .filter(|a| !a.is_pass())
            .max_by_key(|a| (a.card_count(), core::cmp::Reverse(a.value())))
            .unwrap_or(PASS)
    }
}

impl Policy for Greedy {
    fn act(&self, decisions: &mut [Decision<'_>]) -> Result<Vec<ActionIndex>, NetError> {
        Ok(decisions.iter().map(|d| Greedy::choose(&d.mask)).collect())
    }
}

/// The policy head of a network, sampled or taken greedily.
#[derive(Debug, Clone)]
pub struct NetworkPolicy {
    pub net: Arc<Network<f32>>,
    pub deterministic: bool,
}

impl NetworkPolicy {
    pub fn new(net: Arc<Network<f32>>, deterministic: bool) -> NetworkPolicy {
        NetworkPolicy { net, deterministic }
    }
}

impl Policy for NetworkPolicy {
    fn act(&self, decisions: &mut [Decision<'_>]) -> Result<Vec<ActionIndex>, NetError> {
        let b = decisions.len();
        let mut inputs = vec![0.0f32; b * ENCODING_LEN];
        let mut masks = vec![0.0f32; b * NUM_ACTIONS];
        for (i, d) in decisions.iter().enumerate() {
            d.table
                .observe(d.table.to_act())
                .write_to(&mut inputs[i * ENCODING_LEN..(i + 1) * ENCODING_LEN]);
            d.mask.write_additive(&mut masks[i * NUM_ACTIONS..(i + 1) * NUM_ACTIONS]);
        }
        let out = self.net.policy_batch(&inputs, &masks, b)?;
        Ok(decisions
            .iter_mut()
            .enumerate()
            .map(|(i, d)| {
                let probs = out.probs_row(i);
                let a = if self.deterministic {
                    argmax(probs)
                } else {
                    sample_index(probs, d.rng)
                };
                ActionIndex::new(a).expect("index within the action space")
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn greedy_prefers_bigger_then_weaker_moves() {
        let table = Table::deal(5);
        let mut mask = ActionMask::none();
        for a in [3, 20, 21, 1694] {
            mask.allow(ActionIndex::new(a).unwrap());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut d = [Decision {
            table: &table,
            mask,
            rng: &mut rng,
        }];
        assert_eq!(Greedy.act(&mut d).unwrap()[0].value(), 20);
        assert_eq!(Greedy::choose(&ActionMask::only(PASS)), PASS);
    }

    #[test]
    fn random_stays_inside_mask() {
        let table = Table::deal(5);
        let mut mask = ActionMask::none();
        for a in [7, 500, 1694] {
            mask.allow(ActionIndex::new(a).unwrap());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let mut d = [Decision {
                table: &table,
                mask: mask.clone(),
                rng: &mut rng,
            }];
            let a = RandomUniform.act(&mut d).unwrap()[0];
            assert!(mask.is_allowed(a));
        }
    }
}
