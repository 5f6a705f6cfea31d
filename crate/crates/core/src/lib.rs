//! Networked MDPs with per-agent transition kernels and neighborhood-coupled
//! rewards, plus everything needed to study them at tabular scale: exact
//! value/gradient oracles on the joint chain, distributed policy-gradient and
//! actor-critic learners that only read one-hop information, the wireless
//! access-control and power-control environments, and the classical ALOHA and
//! power-control baselines.
//!
//! The crate is `no_std`-compatible (`default-features = false` plus the
//! `libm` feature); everything allocates through `alloc`.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod baselines;
pub mod env;
pub mod graph;
pub mod index;
pub mod learners;
pub mod linalg;
mod math;
pub mod mdp;
pub mod oracle;
pub mod policy;
pub mod rollout;
pub mod verify;

pub use graph::Graph;
pub use mdp::{BuildError, NetworkMdp};
pub use policy::SoftmaxPolicy;
pub use rollout::Trajectory;

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;

/// The deterministic generator used for every sampling operation.
pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent stream for sub-tasks (evaluation rollouts, per-seed
/// workers) so they never share draws with the main stream.
pub fn rng_substream(seed: u64, stream: u64) -> Rng {
    let mixed = seed
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(stream)
        .rotate_left(17)
        .wrapping_mul(0xbf58_476d_1ce4_e5b9);
    ChaCha8Rng::seed_from_u64(mixed)
}
