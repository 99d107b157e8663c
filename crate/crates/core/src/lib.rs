//! Big 2 game engine and learning core.
//!
//! Everything in this crate is pure computation over values: card and hand
//! rules, the 1695-way action index, the four-player state machine, the
//! 412-bit observation encoder, a masked policy/value network with analytic
//! gradients, generalized advantage estimation and the PPO update.
//!
//! The crate builds without `std` (an allocator is required). The default
//! `std` feature only enables runtime SIMD detection in the matrix kernels
//! and the platform math library.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod action;
pub mod adam;
pub mod cards;
pub mod encoder;
pub mod env;
pub mod eval;
pub mod game;
pub mod hand;
mod linalg;
pub mod net;
pub mod policy;
pub mod ppo;
pub mod rollout;
pub mod scalar;

pub use action::{ActionIndex, ActionMask, LookupTables, MoveContext, NUM_ACTIONS, PASS};
pub use cards::{Card, CardSet, Rank, Suit};
pub use encoder::{EncodedState, HistoryDigest, ENCODING_LEN, LAYOUT_VERSION};
pub use game::{GameError, GameState, Move, PerspectiveView, StepResult};
pub use hand::{beats, classify, ClassifiedHand, HandCategory};
pub use env::Table;
pub use eval::{MatchReport, GameOutcome};
pub use net::{NetError, Network, NetworkShape, PolicyValueOutput};
pub use policy::{Greedy, NetworkPolicy, Policy, RandomUniform};
pub use ppo::{compute_gae, Hyperparameters, TrajectorySample};
pub use rollout::{SelfPlayCollector, Segment};
