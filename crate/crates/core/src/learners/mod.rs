//! Training algorithms: exact distributed policy gradient, inexact policy
//! gradient around a pluggable estimator, and the TD actor-critic whose
//! agents exchange TD-errors only with graph neighbors.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::math;
use crate::mdp::NetworkMdp;
use crate::oracle::SizeError;
use crate::policy::SoftmaxPolicy;
use crate::rollout::rollout;
use crate::rng_substream;

mod dpg;
mod exchange;
mod td;

pub use dpg::{run_dpg_exact, run_dpg_inexact, ExactRun, InexactRun};
pub use exchange::{LocalityViolation, NeighborExchange};
pub use td::{
    compute_td_errors, estimate_agent_gradient, td_inner_loop, td_rdac, TdRun, ValueTable,
};

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    ZeroIterations,
    ZeroHorizon,
    ZeroEvalInterval,
    ZeroEvalSteps,
    BadEta(f64),
    BadAlpha(f64),
    BadLambda(f64),
    BadClip(f64),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::ZeroIterations => write!(f, "iteration count must be at least 1"),
            ConfigError::ZeroHorizon => write!(f, "inner horizon must be at least 1"),
            ConfigError::ZeroEvalInterval => write!(f, "eval interval must be at least 1"),
            ConfigError::ZeroEvalSteps => write!(f, "eval rollout length must be at least 1"),
            ConfigError::BadEta(x) => write!(f, "step size {x} must be finite and >= 0"),
            ConfigError::BadAlpha(x) => write!(f, "TD step size {x} must be in [0, 1]"),
            ConfigError::BadLambda(x) => write!(f, "regularization {x} must be finite and >= 0"),
            ConfigError::BadClip(x) => write!(f, "gradient clip {x} must be finite and > 0"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq)]
pub enum LearnerError {
    Config(ConfigError),
    Oracle(SizeError),
    Locality(LocalityViolation),
    Estimator { iteration: usize, message: String },
}

impl fmt::Display for LearnerError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LearnerError::Config(e) => write!(f, "invalid learner config: {e}"),
            LearnerError::Oracle(e) => write!(f, "{e}"),
            LearnerError::Locality(e) => write!(f, "{e}"),
            LearnerError::Estimator { iteration, message } => {
                write!(f, "gradient estimator failed at iteration {iteration}: {message}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for LearnerError {}

impl From<ConfigError> for LearnerError {
    fn from(e: ConfigError) -> Self {
        LearnerError::Config(e)
    }
}

impl From<SizeError> for LearnerError {
    fn from(e: SizeError) -> Self {
        LearnerError::Oracle(e)
    }
}

impl From<LocalityViolation> for LearnerError {
    fn from(e: LocalityViolation) -> Self {
        LearnerError::Locality(e)
    }
}

/// Hyperparameters shared by the three learners. Fields a given learner does
/// not use (`alpha` and `horizon` for the gradient methods, for instance)
/// are ignored by it.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    pub iterations: usize,
    pub horizon: usize,
    pub eta: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub seed: u64,
    pub eval_interval: usize,
    pub eval_steps: usize,
    pub warm_start: bool,
    pub grad_clip: Option<f64>,
    /// Replace the constant TD step with log(H)/H.
    pub alpha_log_schedule: bool,
}

impl LearnerConfig {
    /// Theory-guided defaults for the given problem: eta = 1/sqrt(T), the
    /// size-dependent lambda from [`default_lambda`], alpha = 0.1. Note the
    /// default lambda grows like |S||A|/(1-gamma)^2 and is far too large for
    /// short desk-scale runs; experiment configs almost always override it.
    pub fn for_mdp(mdp: &NetworkMdp, iterations: usize, horizon: usize, seed: u64) -> Self {
        LearnerConfig {
            iterations,
            horizon,
            eta: default_eta(iterations),
            alpha: 0.1,
            lambda: default_lambda(mdp, iterations),
            seed,
            eval_interval: (iterations / 100).max(1),
            eval_steps: 500,
            warm_start: false,
            grad_clip: None,
            alpha_log_schedule: false,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.iterations == 0 {
            return Err(ConfigError::ZeroIterations);
        }
        if self.horizon == 0 {
            return Err(ConfigError::ZeroHorizon);
        }
        if self.eval_interval == 0 {
            return Err(ConfigError::ZeroEvalInterval);
        }
        if self.eval_steps == 0 {
            return Err(ConfigError::ZeroEvalSteps);
        }
        if !self.eta.is_finite() || self.eta < 0.0 {
            return Err(ConfigError::BadEta(self.eta));
        }
        if !self.alpha.is_finite() || !(0.0..=1.0).contains(&self.alpha) {
            return Err(ConfigError::BadAlpha(self.alpha));
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(ConfigError::BadLambda(self.lambda));
        }
        if let Some(c) = self.grad_clip {
            if !c.is_finite() || c <= 0.0 {
                return Err(ConfigError::BadClip(c));
            }
        }
        Ok(())
    }

    /// The TD step size actually used: `alpha`, or `min(ln H / H, 1)` when
    /// the log schedule is on.
    pub fn effective_alpha(&self) -> f64 {
        if self.alpha_log_schedule {
            let h = self.horizon as f64;
            (math::ln(h) / h).min(1.0)
        } else {
            self.alpha
        }
    }
}

/// Decayed step size 1/sqrt(T).
pub fn default_eta(iterations: usize) -> f64 {
    1.0 / math::sqrt(iterations.max(1) as f64)
}

/// The conservative step size (1-gamma)^3 / (48 N^2) under which the exact
/// method's iterates are provably monotone.
pub fn dpg_default_eta(mdp: &NetworkMdp) -> f64 {
    let n = mdp.agent_count() as f64;
    let g = 1.0 - mdp.gamma();
    g * g * g / (48.0 * n * n)
}

/// Regularization weight 2 S_max A_max (log T)^{1/6} / ((1-gamma)^2 T^{1/6}).
pub fn default_lambda(mdp: &NetworkMdp, iterations: usize) -> f64 {
    let s_max = (0..mdp.agent_count()).map(|n| mdp.local(n).state_count).max().unwrap_or(1);
    let a_max = (0..mdp.agent_count()).map(|n| mdp.local(n).action_count).max().unwrap_or(1);
    let t = (iterations.max(2)) as f64;
    let g = 1.0 - mdp.gamma();
    let sixth = |x: f64| math::exp(math::ln(x) / 6.0);
    2.0 * (s_max * a_max) as f64 * sixth(math::ln(t)) / (g * g * sixth(t))
}

/// Largest absolute reward in the tabulated reward functions, the scale that
/// bounds value-table entries via r_max/(1-gamma).
pub fn max_abs_reward(mdp: &NetworkMdp) -> f64 {
    let mut worst = 0.0;
    for n in 0..mdp.agent_count() {
        for si in 0..mdp.neighborhood_states(n).len() {
            for ai in 0..mdp.neighborhood_actions(n).len() {
                let r = math::abs(mdp.reward_by_index(n, si, ai));
                if r > worst {
                    worst = r;
                }
            }
        }
    }
    worst
}

/// One row of a training curve.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub avg_reward: f64,
    pub disc_return: f64,
    pub grad_norm: Option<f64>,
}

/// Evaluation rows collected every `eval_interval` iterations.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunRecord {
    pub rows: Vec<IterationRecord>,
}

impl RunRecord {
    /// Mean evaluation reward over the final 10% of rows (at least one), the
    /// reported "converged" level.
    pub fn converged_avg_reward(&self) -> Option<f64> {
        if self.rows.is_empty() {
            return None;
        }
        let tail = (self.rows.len() / 10).max(1);
        let slice = &self.rows[self.rows.len() - tail..];
        Some(slice.iter().map(|r| r.avg_reward).sum::<f64>() / tail as f64)
    }
}

/// Fresh-stream policy evaluation at iteration `t`: a rollout on a stream
/// derived from (seed, t), so training draws are untouched and re-runs
/// reproduce rows exactly.
pub(crate) fn evaluate_policy(
    mdp: &NetworkMdp,
    policy: &SoftmaxPolicy,
    cfg: &LearnerConfig,
    t: usize,
) -> (f64, f64) {
    let mut rng = rng_substream(cfg.seed, t as u64);
    let traj = rollout(mdp, policy, cfg.eval_steps, &mut rng);
    (traj.average_global_reward(), traj.discounted_global_return(mdp.gamma()))
}
