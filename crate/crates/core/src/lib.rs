//! Discrete-time simulator and multi-objective learning core for
//! non-orthogonal (superposition coding + SIC) status-update dissemination
//! from a roadside unit to moving vehicles.
//!
//! The crate is `no_std` with `alloc`. All randomness flows through explicit
//! seeded [`rand_chacha::ChaCha8Rng`] streams so runs are reproducible.
//!
//! Layout follows the processing chain:
//!
//! * [`geometry`]: road, mobility, distance/angle/Doppler per slot.
//! * [`channel`]: ULA steering vectors, channel vectors, MRT beamformer.
//! * [`phy`]: SINR under a decoding order, finite-blocklength error, SIC chain.
//! * [`aoi`]: demand matrix, age evolution, bounds and scalarized objective.
//! * [`env`]: the episodic MDP tying the above together.
//! * [`nn`]: dense networks, reverse-mode gradients, Adam, soft updates.
//! * [`agents`]: replay buffer, DQN + DDPG agents and the hybrid trainer.
//! * [`meta`]: multi-step MAML over preference weights and fine-tuning.
//! * [`pareto`]: dominance filtering, hypervolume and baselines.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod agents;
pub mod aoi;
pub mod channel;
pub mod env;
mod error;
pub mod geometry;
pub mod meta;
pub mod nn;
pub mod pareto;
pub mod phy;
pub mod rng;

pub use error::{Error, Result};
