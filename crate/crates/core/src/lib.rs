//! Allocation-only core of a peg-in-hole adversarial imitation learning
//! pipeline.
//!
//! The crate is `no_std` (it needs `alloc`) and contains every algorithmic
//! piece: the quasi-static contact simulator with impedance control
//! ([`sim`]), a small network library with exact backpropagation ([`nn`]),
//! the discrete-action generator ([`policy`]), the discriminator
//! ([`discriminator`]), PPO with generalized advantage estimation ([`ppo`]),
//! scripted demonstrations and teleoperation discretization ([`demos`]) and
//! the alternating training loop ([`trainer`]). File formats, configuration
//! files, the CLI and the teleoperation server live in the `peg-gail` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod demos;
pub mod discriminator;
pub mod episode;
mod error;
pub mod math;
pub mod nn;
pub mod policy;
pub mod ppo;
pub mod sim;
pub mod teleop;
pub mod trainer;

pub use error::{Error, Result};

/// Deterministic generator used everywhere randomness is consumed.
pub type SimRng = rand_chacha::ChaCha8Rng;

/// Builds the crate's RNG from a 64-bit seed.
pub fn rng_from_seed(seed: u64) -> SimRng {
    use rand::SeedableRng;
    SimRng::seed_from_u64(seed)
}
