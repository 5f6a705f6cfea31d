//! Oracle-driven policy gradient, exact and with a pluggable estimator.

use alloc::string::String;
use alloc::vec::Vec;

use super::{evaluate_policy, IterationRecord, LearnerConfig, LearnerError, RunRecord};
use crate::math;
use crate::mdp::NetworkMdp;
use crate::oracle::{GradientBundle, Oracle};
use crate::policy::SoftmaxPolicy;

#[derive(Debug, Clone)]
pub struct ExactRun {
    /// V(rho) at every iterate, initial policy first, final policy last.
    pub values: Vec<f64>,
    /// min over joint states of the probability the policy puts on the
    /// optimal joint action, per iterate; None when the joint MDP is too
    /// large to solve.
    pub min_optimal_prob: Option<Vec<f64>>,
    /// V*(rho) from joint policy iteration, when available.
    pub optimal_value: Option<f64>,
    pub record: RunRecord,
    pub policy: SoftmaxPolicy,
}

/// Plain gradient ascent theta_n += eta * grad_n V(rho) with the exact
/// oracle gradient. Every iterate's value is recorded; the optimal policy is
/// solved once up front (when the joint space permits) so the run can report
/// its optimality gap and the probability mass on optimal actions.
pub fn run_dpg_exact(
    mdp: &NetworkMdp,
    policy0: &SoftmaxPolicy,
    cfg: &LearnerConfig,
) -> Result<ExactRun, LearnerError> {
    cfg.validate()?;
    let oracle = Oracle::new(mdp);
    let optimal = oracle.optimal_values().ok();
    let optimal_value = optimal.as_ref().map(|(v, _)| {
        let rho = oracle.joint_init_dist();
        v.iter().zip(&rho).map(|(a, b)| a * b).sum()
    });

    let mut policy = policy0.clone();
    let mut values = Vec::with_capacity(cfg.iterations + 1);
    let mut min_probs = optimal.as_ref().map(|_| Vec::with_capacity(cfg.iterations + 1));
    let mut rows = Vec::new();

    for t in 1..=cfg.iterations {
        values.push(oracle.value_at_init(&policy)?);
        if let (Some(series), Some((_, actions))) = (min_probs.as_mut(), optimal.as_ref()) {
            series.push(oracle.min_optimal_action_prob(&policy, actions));
        }
        let grad = oracle.exact_gradient(&policy)?;
        let norm = math::sqrt(grad.sq_norm());
        for (n, table) in grad.0.iter().enumerate() {
            let logits = policy.logits_mut(n);
            for (x, g) in logits.iter_mut().zip(table) {
                *x += cfg.eta * g;
            }
        }
        if t % cfg.eval_interval == 0 {
            let (avg, _) = evaluate_policy(mdp, &policy, cfg, t);
            rows.push(IterationRecord {
                iteration: t,
                avg_reward: avg,
                disc_return: oracle.value_at_init(&policy)?,
                grad_norm: Some(norm),
            });
        }
    }
    values.push(oracle.value_at_init(&policy)?);
    if let (Some(series), Some((_, actions))) = (min_probs.as_mut(), optimal.as_ref()) {
        series.push(oracle.min_optimal_action_prob(&policy, actions));
    }

    Ok(ExactRun {
        values,
        min_optimal_prob: min_probs,
        optimal_value,
        record: RunRecord { rows },
        policy,
    })
}

#[derive(Debug, Clone)]
pub struct InexactRun {
    /// Logit snapshots at every iterate, initial policy first.
    pub thetas: Vec<Vec<Vec<f64>>>,
    /// Norm of the estimate actually applied, per iteration.
    pub applied_norms: Vec<f64>,
    /// Exact norm of the regularized gradient at each pre-update iterate,
    /// when the oracle fits; stops at the first oracle size failure.
    pub exact_norms: Option<Vec<f64>>,
    /// Regularized objective at every iterate (initial first), when the
    /// oracle fits.
    pub objectives: Option<Vec<f64>>,
    pub record: RunRecord,
    pub policy: SoftmaxPolicy,
}

/// Ascent on the regularized objective with a caller-supplied estimator:
/// theta_n += eta * estimate_n. The estimator sees the current policy and
/// the 1-based iteration index; its failures abort the run with the
/// iteration attached. On instances small enough for the oracle, the exact
/// regularized gradient norm and objective are recorded alongside.
pub fn run_dpg_inexact<F>(
    mdp: &NetworkMdp,
    policy0: &SoftmaxPolicy,
    cfg: &LearnerConfig,
    mut estimator: F,
) -> Result<InexactRun, LearnerError>
where
    F: FnMut(&SoftmaxPolicy, usize) -> Result<GradientBundle, String>,
{
    cfg.validate()?;
    let oracle = Oracle::new(mdp);
    let mut track = true;

    let mut policy = policy0.clone();
    let mut thetas = Vec::with_capacity(cfg.iterations + 1);
    let mut applied_norms = Vec::with_capacity(cfg.iterations);
    let mut exact_norms = Some(Vec::with_capacity(cfg.iterations));
    let mut objectives = Some(Vec::with_capacity(cfg.iterations + 1));
    let mut rows = Vec::new();

    let snapshot = |p: &SoftmaxPolicy| -> Vec<Vec<f64>> {
        (0..p.agent_count()).map(|n| p.logits(n).to_vec()).collect()
    };

    for t in 1..=cfg.iterations {
        thetas.push(snapshot(&policy));
        if track {
            match (
                oracle.exact_regularized_gradient(&policy, cfg.lambda),
                oracle.regularized_objective(&policy, cfg.lambda),
            ) {
                (Ok(g), Ok(l)) => {
                    exact_norms.as_mut().unwrap().push(math::sqrt(g.sq_norm()));
                    objectives.as_mut().unwrap().push(l);
                }
                _ => {
                    track = false;
                    exact_norms = None;
                    objectives = None;
                }
            }
        }
        let est = estimator(&policy, t)
            .map_err(|message| LearnerError::Estimator { iteration: t, message })?;
        let norm = math::sqrt(est.sq_norm());
        applied_norms.push(norm);
        for (n, table) in est.0.iter().enumerate() {
            let logits = policy.logits_mut(n);
            for (x, g) in logits.iter_mut().zip(table) {
                *x += cfg.eta * g;
            }
        }
        if t % cfg.eval_interval == 0 {
            let (avg, disc) = evaluate_policy(mdp, &policy, cfg, t);
            rows.push(IterationRecord {
                iteration: t,
                avg_reward: avg,
                disc_return: disc,
                grad_norm: Some(norm),
            });
        }
    }
    thetas.push(snapshot(&policy));
    if let Some(series) = objectives.as_mut() {
        series.push(oracle.regularized_objective(&policy, cfg.lambda)?);
    }

    Ok(InexactRun {
        thetas,
        applied_norms,
        exact_norms,
        objectives,
        record: RunRecord { rows },
        policy,
    })
}
