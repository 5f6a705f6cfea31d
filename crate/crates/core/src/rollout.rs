//! Trajectory sampling through the product kernel.

use alloc::vec;
use alloc::vec::Vec;

use crate::mdp::NetworkMdp;
use crate::policy::SoftmaxPolicy;
use crate::Rng;

/// `states` has one more entry than `actions`/`rewards`; `rewards[h][n]` is
/// agent n's (expected-form) reward at step h, recomputable from the stored
/// neighborhood coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vec<usize>>,
    pub actions: Vec<Vec<usize>>,
    pub rewards: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.actions.len()
    }

    /// Time average of the network reward (1/N) sum_n r_n over all steps.
    pub fn average_global_reward(&self) -> f64 {
        if self.rewards.is_empty() {
            return 0.0;
        }
        let n = self.rewards[0].len() as f64;
        let total: f64 = self.rewards.iter().map(|r| r.iter().sum::<f64>() / n).sum();
        total / self.rewards.len() as f64
    }

    /// sum_h gamma^h * (1/N) sum_n r_n(h), a single-rollout estimate of the
    /// discounted return from the initial distribution.
    pub fn discounted_global_return(&self, gamma: f64) -> f64 {
        let mut total = 0.0;
        let mut weight = 1.0;
        for r in &self.rewards {
            let n = r.len() as f64;
            total += weight * r.iter().sum::<f64>() / n;
            weight *= gamma;
        }
        total
    }
}

/// Samples the initial state from the MDP's initial distribution, then takes
/// `horizon` steps choosing each agent's action with `decide(n, s_n, rng)`.
pub fn rollout_with(
    mdp: &NetworkMdp,
    decide: &mut dyn FnMut(usize, usize, &mut Rng) -> usize,
    horizon: usize,
    rng: &mut Rng,
) -> Trajectory {
    let n = mdp.agent_count();
    let mut states = Vec::with_capacity(horizon + 1);
    let mut actions = Vec::with_capacity(horizon);
    let mut rewards = Vec::with_capacity(horizon);
    let mut state = vec![0; n];
    mdp.sample_init(rng, &mut state);
    states.push(state.clone());
    let mut action = vec![0; n];
    let mut next = vec![0; n];
    for _ in 0..horizon {
        for agent in 0..n {
            action[agent] = decide(agent, state[agent], rng);
        }
        let r: Vec<f64> = (0..n).map(|agent| mdp.reward_at(agent, &state, &action)).collect();
        mdp.step(&state, &action, rng, &mut next);
        actions.push(action.clone());
        rewards.push(r);
        state.copy_from_slice(&next);
        states.push(state.clone());
    }
    Trajectory { states, actions, rewards }
}

pub fn rollout(
    mdp: &NetworkMdp,
    policy: &SoftmaxPolicy,
    horizon: usize,
    rng: &mut Rng,
) -> Trajectory {
    let max_actions = (0..mdp.agent_count())
        .map(|n| mdp.local(n).action_count)
        .max()
        .unwrap_or(1);
    let mut scratch = vec![0.0; max_actions];
    rollout_with(
        mdp,
        &mut |agent, s, rng| {
            let a = mdp.local(agent).action_count;
            policy.sample_action(agent, s, rng, &mut scratch[..a])
        },
        horizon,
        rng,
    )
}
