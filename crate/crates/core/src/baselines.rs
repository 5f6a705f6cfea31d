//! Non-learning reference policies: slotted-ALOHA access and discrete power
//! control by best response.

use alloc::vec::Vec;

use crate::env::{AccessEnv, PowerEnv};
use crate::mdp::{sample_index, u01};
use crate::Rng;

/// Attempt probability that backs off by the worst contention among the APs
/// this node can reach: 1 / max contenders.
pub fn aloha_default_prob(env: &AccessEnv, n: usize) -> f64 {
    let worst = env
        .availability(n)
        .iter()
        .map(|&ap| env.contenders(ap))
        .max()
        .unwrap_or(1);
    1.0 / worst as f64
}

/// One ALOHA decision. An empty queue stays silent; otherwise the node
/// transmits with `transmit_prob`, picking an access point with probability
/// proportional to its delivery rate over its contention.
pub fn aloha_action(
    env: &AccessEnv,
    n: usize,
    queue: usize,
    transmit_prob: f64,
    rng: &mut Rng,
) -> usize {
    if queue == 0 {
        return 0;
    }
    if u01(rng) >= transmit_prob {
        return 0;
    }
    let aps = env.availability(n);
    let mut weights: Vec<f64> = aps
        .iter()
        .map(|&ap| env.delivery_prob(ap) / env.contenders(ap) as f64)
        .collect();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return 0;
    }
    for w in &mut weights {
        *w /= total;
    }
    1 + sample_index(&weights, rng)
}

/// Best power level for link n against the current profile, ties to the
/// lower level.
pub fn dpc_best_response(env: &PowerEnv, powers: &[usize], n: usize) -> usize {
    let denom = env.interference(n, powers) + env.sigma();
    let gain = env.gain(n, n);
    let mut best = 0usize;
    let mut best_value = f64::NEG_INFINITY;
    for p in 0..=env.p_max() {
        let value = crate::math::ln(1.0 + p as f64 * gain / denom) - env.price() * p as f64;
        if value > best_value {
            best_value = value;
            best = p;
        }
    }
    best
}

/// One synchronous best-response round: every link responds to the same
/// starting profile. Returns true when any level changed.
pub fn dpc_round(env: &PowerEnv, powers: &mut [usize]) -> bool {
    let snapshot: Vec<usize> = powers.to_vec();
    let mut changed = false;
    for n in 0..powers.len() {
        let next = dpc_best_response(env, &snapshot, n);
        if next != powers[n] {
            changed = true;
        }
        powers[n] = next;
    }
    changed
}
