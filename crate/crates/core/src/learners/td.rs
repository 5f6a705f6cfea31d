//! Actor-critic over neighborhood value tables. Each outer iteration draws
//! one shared rollout, every agent TD-sweeps its own table along it, TD
//! errors go to graph neighbors through the exchange, and the aggregated
//! errors drive a regularized softmax update.

use alloc::vec;
use alloc::vec::Vec;

use super::{
    evaluate_policy, max_abs_reward, IterationRecord, LearnerConfig, LearnerError, RunRecord,
};
use crate::index::MixedRadix;
use crate::learners::exchange::{LocalityViolation, NeighborExchange};
use crate::math;
use crate::mdp::NetworkMdp;
use crate::policy::SoftmaxPolicy;
use crate::rollout::{rollout, Trajectory};
use crate::rng_from_seed;

/// Critic state for one agent: one value per neighborhood joint state.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    pub values: Vec<f64>,
}

impl ValueTable {
    pub fn zeros(mdp: &NetworkMdp, agent: usize) -> Self {
        ValueTable { values: vec![0.0; mdp.neighborhood_states(agent).len()] }
    }

    pub fn reset(&mut self) {
        for v in &mut self.values {
            *v = 0.0;
        }
    }

    pub fn max_abs(&self) -> f64 {
        let mut worst = 0.0;
        for &v in &self.values {
            let a = math::abs(v);
            if a > worst {
                worst = a;
            }
        }
        worst
    }
}

#[inline]
fn nbhd_state_index(mdp: &NetworkMdp, agent: usize, joint: &[usize]) -> usize {
    MixedRadix::project(
        mdp.neighborhood_states(agent),
        mdp.graph().neighborhood(agent),
        joint,
    )
}

/// One TD(0) sweep for `agent` along the shared trajectory, updating only
/// the visited neighborhood entry at each step. The sweep starts at step 1
/// and covers every step with an observed successor.
pub fn td_inner_loop(
    mdp: &NetworkMdp,
    agent: usize,
    traj: &Trajectory,
    alpha: f64,
    table: &mut ValueTable,
) {
    let gamma = mdp.gamma();
    let mut cur = nbhd_state_index(mdp, agent, &traj.states[1]);
    for h in 1..traj.horizon() {
        let next = nbhd_state_index(mdp, agent, &traj.states[h + 1]);
        let target = traj.rewards[h][agent] + gamma * table.values[next];
        table.values[cur] += alpha * (target - table.values[cur]);
        cur = next;
    }
}

/// One-step Bellman residuals r + gamma*V(s') - V(s) for every trajectory
/// step, all evaluated with the final (post-sweep) table.
pub fn compute_td_errors(
    mdp: &NetworkMdp,
    agent: usize,
    table: &ValueTable,
    traj: &Trajectory,
) -> Vec<f64> {
    let gamma = mdp.gamma();
    let mut out = Vec::with_capacity(traj.horizon());
    let mut cur = nbhd_state_index(mdp, agent, &traj.states[0]);
    for h in 0..traj.horizon() {
        let next = nbhd_state_index(mdp, agent, &traj.states[h + 1]);
        out.push(traj.rewards[h][agent] + gamma * table.values[next] - table.values[cur]);
        cur = next;
    }
    out
}

/// Gradient estimate for `agent`'s logits: discounted sum over steps h >= 1
/// of the neighborhood-averaged TD error times the softmax score at the
/// agent's own (state, action). Neighbor TD errors come through the
/// exchange, which rejects any out-of-neighborhood read.
pub fn estimate_agent_gradient(
    mdp: &NetworkMdp,
    agent: usize,
    policy: &SoftmaxPolicy,
    traj: &Trajectory,
    exchange: &NeighborExchange<'_>,
) -> Result<Vec<f64>, LocalityViolation> {
    let (s_cnt, a_cnt) = policy.dims(agent);
    let mut grad = vec![0.0; s_cnt * a_cnt];
    let gamma = mdp.gamma();
    let scale_all = 1.0 / mdp.agent_count() as f64;
    let logs: Vec<&[f64]> = mdp
        .graph()
        .neighborhood(agent)
        .iter()
        .map(|&k| exchange.read(agent, k))
        .collect::<Result<_, _>>()?;
    let mut probs = vec![0.0; a_cnt];
    let mut weight = gamma;
    for h in 1..traj.horizon() {
        let mut delta = 0.0;
        for log in &logs {
            delta += log[h];
        }
        let w = weight * delta * scale_all;
        weight *= gamma;
        if w == 0.0 {
            continue;
        }
        let s = traj.states[h][agent];
        let a = traj.actions[h][agent];
        policy.probs_into(agent, s, &mut probs);
        let row = &mut grad[s * a_cnt..(s + 1) * a_cnt];
        for (ai, g) in row.iter_mut().enumerate() {
            let score = if ai == a { 1.0 - probs[ai] } else { -probs[ai] };
            *g += w * score;
        }
    }
    let prefactor = 1.0 / (1.0 - gamma);
    for g in &mut grad {
        *g *= prefactor;
    }
    Ok(grad)
}

#[derive(Debug, Clone)]
pub struct TdRun {
    pub record: RunRecord,
    pub policy: SoftmaxPolicy,
}

/// The full training loop. Per outer iteration: (re)zero the critics unless
/// warm-starting, draw one shared rollout of horizon H+1, sweep every
/// critic, publish TD errors, estimate each agent's gradient from its
/// neighborhood, and apply
///   theta_n += eta * grad_n + (lambda/|S_n|) (1/|A_n| - pi_n)
/// with the regularizer unscaled by eta. Evaluation rows are produced every
/// `eval_interval` iterations from a (seed, iteration) stream.
pub fn td_rdac(
    mdp: &NetworkMdp,
    policy0: &SoftmaxPolicy,
    cfg: &LearnerConfig,
) -> Result<TdRun, LearnerError> {
    cfg.validate()?;
    let n_agents = mdp.agent_count();
    let alpha = cfg.effective_alpha();
    let value_bound = max_abs_reward(mdp) / (1.0 - mdp.gamma()) * 1.1;

    let mut policy = policy0.clone();
    let mut tables: Vec<ValueTable> =
        (0..n_agents).map(|n| ValueTable::zeros(mdp, n)).collect();
    let mut exchange = NeighborExchange::new(mdp.graph());
    let mut grads: Vec<Vec<f64>> = Vec::with_capacity(n_agents);
    let max_actions = (0..n_agents).map(|n| policy.dims(n).1).max().unwrap_or(1);
    let mut scratch = vec![0.0; max_actions];
    let mut rng = rng_from_seed(cfg.seed);
    let mut rows = Vec::new();

    for t in 1..=cfg.iterations {
        if !cfg.warm_start {
            for table in &mut tables {
                table.reset();
            }
        }
        let traj = rollout(mdp, &policy, cfg.horizon + 1, &mut rng);

        for (n, table) in tables.iter_mut().enumerate() {
            td_inner_loop(mdp, n, &traj, alpha, table);
            debug_assert!(
                table.max_abs() <= value_bound,
                "critic table escaped the reward-implied bound"
            );
        }
        exchange.clear();
        for (n, table) in tables.iter().enumerate() {
            exchange.post(n, compute_td_errors(mdp, n, table, &traj));
        }
        grads.clear();
        for n in 0..n_agents {
            grads.push(estimate_agent_gradient(mdp, n, &policy, &traj, &exchange)?);
        }

        let mut sq_norm = 0.0;
        for (n, grad) in grads.iter_mut().enumerate() {
            if let Some(c) = cfg.grad_clip {
                for g in grad.iter_mut() {
                    *g = g.clamp(-c, c);
                }
            }
            for &g in grad.iter() {
                sq_norm += g * g;
            }
            let (s_cnt, a_cnt) = policy.dims(n);
            let reg = cfg.lambda / s_cnt as f64;
            let uniform = 1.0 / a_cnt as f64;
            for s in 0..s_cnt {
                policy.probs_into(n, s, &mut scratch[..a_cnt]);
                let logits = policy.logits_mut(n);
                for a in 0..a_cnt {
                    logits[s * a_cnt + a] +=
                        cfg.eta * grad[s * a_cnt + a] + reg * (uniform - scratch[a]);
                }
            }
        }

        if t % cfg.eval_interval == 0 {
            let (avg, disc) = evaluate_policy(mdp, &policy, cfg, t);
            rows.push(IterationRecord {
                iteration: t,
                avg_reward: avg,
                disc_return: disc,
                grad_norm: Some(math::sqrt(sq_norm)),
            });
        }
    }

    Ok(TdRun { record: RunRecord { rows }, policy })
}
