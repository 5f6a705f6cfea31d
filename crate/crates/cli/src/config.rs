//! Experiment configuration: a strict TOML schema, cross-field validation,
//! and construction of the environment, MDP, and learner settings it names.

use std::path::Path;

use serde::{Deserialize, Serialize};

use recmarl_core::env::{AccessEnv, PowerEnv};
use recmarl_core::learners::{default_lambda, dpg_default_eta, LearnerConfig};
use recmarl_core::NetworkMdp;

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvBlock,
    pub topology: TopologyBlock,
    pub learner: LearnerBlock,
    pub trial: TrialBlock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    Access,
    Power,
}

/// Environment parameters. Access-control runs read `arrival`, `delivery`,
/// and `deadline`; power-control runs read `p_max`, `kappa`, `sigma`,
/// `price`, and optionally an affine reward rescaling.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvBlock {
    pub kind: EnvKind,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arrival: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delivery: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deadline: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward_offset: Option<f64>,
}

fn default_gamma() -> f64 {
    0.9
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopoKind {
    Line,
    Grid,
    Edges,
}

/// Network shape. Access networks support `line` (one access point between
/// each adjacent pair). Power networks support `line`, `grid` (with
/// `spacing`), and `edges` (explicit edge list plus link positions).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyBlock {
    pub kind: TopoKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cols: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<[usize; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    DpgExact,
    DpgInexact,
    TdRdac,
    Aloha,
    Dpc,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::DpgExact => "dpg_exact",
            Algorithm::DpgInexact => "dpg_inexact",
            Algorithm::TdRdac => "td_rdac",
            Algorithm::Aloha => "aloha",
            Algorithm::Dpc => "dpc",
        }
    }

    fn trains(self) -> bool {
        matches!(self, Algorithm::DpgExact | Algorithm::DpgInexact | Algorithm::TdRdac)
    }
}

/// Algorithm choice plus the training hyperparameters. Omitted entries fall
/// back to the instance-derived defaults (eta = 1/sqrt(T) for the
/// actor-critic, the smoothness-constant step for policy gradient, the
/// T- and size-dependent exploration weight for lambda).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerBlock {
    pub algorithm: Algorithm,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_interval: Option<usize>,
    #[serde(default)]
    pub warm_start: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grad_clip: Option<f64>,
    #[serde(default)]
    pub alpha_log_schedule: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transmit_prob: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialBlock {
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_steps: Option<usize>,
}

pub enum BuiltEnv {
    Access(AccessEnv),
    Power(PowerEnv),
}

/// Everything a run needs, constructed once and shared across seed workers.
pub struct Built {
    pub mdp: NetworkMdp,
    pub env: BuiltEnv,
    /// Learner settings with every default resolved; `seed` is a
    /// placeholder overwritten per worker.
    pub base: LearnerConfig,
}

pub fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    let cfg: ExperimentConfig = toml::from_str(&text)
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}

fn bad(msg: String) -> CliError {
    CliError::Validation(msg)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let lb = &self.learner;
        match self.env.kind {
            EnvKind::Access => {
                if self.env.arrival.is_none()
                    || self.env.delivery.is_none()
                    || self.env.deadline.is_none()
                {
                    return Err(bad(String::from(
                        "env: access needs arrival, delivery, and deadline",
                    )));
                }
                if self.topology.kind != TopoKind::Line {
                    return Err(bad(String::from(
                        "topology: access networks support kind = \"line\" only",
                    )));
                }
                let nodes = self.env.arrival.as_ref().unwrap().len();
                if let Some(n) = self.topology.nodes {
                    if n != nodes {
                        return Err(bad(format!(
                            "topology.nodes = {n} but env.arrival has {nodes} entries"
                        )));
                    }
                }
                for key in [
                    ("p_max", self.env.p_max.is_some()),
                    ("kappa", self.env.kappa.is_some()),
                    ("sigma", self.env.sigma.is_some()),
                    ("price", self.env.price.is_some()),
                    ("reward_scale", self.env.reward_scale.is_some()),
                    ("reward_offset", self.env.reward_offset.is_some()),
                ] {
                    if key.1 {
                        return Err(bad(format!("env.{}: not an access parameter", key.0)));
                    }
                }
                if lb.algorithm == Algorithm::Dpc {
                    return Err(bad(String::from("learner: dpc needs a power environment")));
                }
            }
            EnvKind::Power => {
                if self.env.p_max.is_none()
                    || self.env.kappa.is_none()
                    || self.env.sigma.is_none()
                    || self.env.price.is_none()
                {
                    return Err(bad(String::from(
                        "env: power needs p_max, kappa, sigma, and price",
                    )));
                }
                for key in [
                    ("arrival", self.env.arrival.is_some()),
                    ("delivery", self.env.delivery.is_some()),
                    ("deadline", self.env.deadline.is_some()),
                ] {
                    if key.1 {
                        return Err(bad(format!("env.{}: not a power parameter", key.0)));
                    }
                }
                match self.topology.kind {
                    TopoKind::Line => {
                        if self.topology.nodes.is_none() {
                            return Err(bad(String::from("topology: line needs nodes")));
                        }
                        if self.topology.spacing.is_none() {
                            return Err(bad(String::from(
                                "topology: power line needs spacing between links",
                            )));
                        }
                    }
                    TopoKind::Grid => {
                        if self.topology.rows.is_none()
                            || self.topology.cols.is_none()
                            || self.topology.spacing.is_none()
                        {
                            return Err(bad(String::from(
                                "topology: grid needs rows, cols, and spacing",
                            )));
                        }
                    }
                    TopoKind::Edges => {
                        if self.topology.edges.is_none() || self.topology.positions.is_none() {
                            return Err(bad(String::from(
                                "topology: edges needs the edge list and link positions",
                            )));
                        }
                    }
                }
                if lb.algorithm == Algorithm::Aloha {
                    return Err(bad(String::from("learner: aloha needs an access environment")));
                }
            }
        }

        if !(self.env.gamma > 0.0 && self.env.gamma < 1.0) {
            return Err(bad(format!("env.gamma = {} must lie in (0, 1)", self.env.gamma)));
        }
        if lb.iterations == 0 {
            return Err(bad(String::from("learner.iterations must be positive")));
        }
        if matches!(lb.algorithm, Algorithm::TdRdac | Algorithm::DpgInexact) && lb.horizon.is_none()
        {
            return Err(bad(format!(
                "learner.horizon is required for {}",
                lb.algorithm.name()
            )));
        }
        if let Some(p) = lb.transmit_prob {
            if lb.algorithm != Algorithm::Aloha {
                return Err(bad(String::from(
                    "learner.transmit_prob only applies to aloha",
                )));
            }
            if !(p > 0.0 && p <= 1.0) {
                return Err(bad(format!("learner.transmit_prob = {p} must lie in (0, 1]")));
            }
        }
        if lb.grad_clip.is_some()
            && !matches!(lb.algorithm, Algorithm::TdRdac | Algorithm::DpgInexact)
        {
            return Err(bad(String::from(
                "learner.grad_clip only applies to sampled-gradient learners",
            )));
        }

        if self.trial.seeds.is_empty() {
            return Err(bad(String::from("trial.seeds must not be empty")));
        }
        let mut sorted = self.trial.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.trial.seeds.len() {
            return Err(bad(String::from(
                "trial.seeds contains duplicates; each seed writes its own files",
            )));
        }
        if self.trial.eval_steps == Some(0) {
            return Err(bad(String::from("trial.eval_steps must be positive")));
        }
        Ok(())
    }

    /// Builds the environment and MDP and resolves every learner default.
    pub fn build(&self) -> Result<Built, CliError> {
        let (env, mdp) = match self.env.kind {
            EnvKind::Access => {
                let access = AccessEnv::line(
                    self.env.arrival.as_ref().unwrap().len(),
                    self.env.arrival.clone().unwrap(),
                    self.env.delivery.clone().unwrap(),
                    self.env.deadline.unwrap(),
                )
                .map_err(|e| bad(format!("env: {e}")))?;
                let mdp = access
                    .build_mdp(self.env.gamma)
                    .map_err(|e| bad(format!("env: {e}")))?;
                (BuiltEnv::Access(access), mdp)
            }
            EnvKind::Power => {
                let power = self.build_power()?;
                let scale = self.env.reward_scale.unwrap_or(1.0);
                let offset = self.env.reward_offset.unwrap_or(0.0);
                let mdp = power
                    .build_mdp_scaled(self.env.gamma, scale, offset)
                    .map_err(|e| bad(format!("env: {e}")))?;
                (BuiltEnv::Power(power), mdp)
            }
        };

        let lb = &self.learner;
        let horizon = lb.horizon.unwrap_or(1);
        let mut base = LearnerConfig::for_mdp(&mdp, lb.iterations, horizon, 0);
        base.eta = match (lb.eta, lb.algorithm) {
            (Some(x), _) => x,
            (None, Algorithm::DpgExact | Algorithm::DpgInexact) => dpg_default_eta(&mdp),
            (None, Algorithm::TdRdac) => base.eta,
            (None, Algorithm::Aloha | Algorithm::Dpc) => 0.0,
        };
        if let Some(x) = lb.alpha {
            base.alpha = x;
        }
        base.lambda = match lb.lambda {
            Some(x) => x,
            None if lb.algorithm.trains() => default_lambda(&mdp, lb.iterations),
            None => 0.0,
        };
        if let Some(x) = lb.eval_interval {
            base.eval_interval = x;
        }
        if let Some(x) = self.trial.eval_steps {
            base.eval_steps = x;
        }
        base.warm_start = lb.warm_start;
        base.grad_clip = lb.grad_clip;
        base.alpha_log_schedule = lb.alpha_log_schedule;
        base.validate().map_err(|e| bad(format!("learner: {e}")))?;
        Ok(Built { mdp, env, base })
    }

    fn build_power(&self) -> Result<PowerEnv, CliError> {
        let p_max = self.env.p_max.unwrap();
        let kappa = self.env.kappa.unwrap();
        let sigma = self.env.sigma.unwrap();
        let price = self.env.price.unwrap();
        let env = match self.topology.kind {
            TopoKind::Grid => PowerEnv::grid(
                self.topology.rows.unwrap(),
                self.topology.cols.unwrap(),
                self.topology.spacing.unwrap(),
                p_max,
                kappa,
                sigma,
                price,
            ),
            TopoKind::Line => {
                let n = self.topology.nodes.unwrap();
                let spacing = self.topology.spacing.unwrap();
                PowerEnv::grid(1, n, spacing, p_max, kappa, sigma, price)
            }
            TopoKind::Edges => {
                let edges: Vec<(usize, usize)> = self
                    .topology
                    .edges
                    .as_ref()
                    .unwrap()
                    .iter()
                    .map(|e| (e[0], e[1]))
                    .collect();
                let positions: Vec<(f64, f64)> = self
                    .topology
                    .positions
                    .as_ref()
                    .unwrap()
                    .iter()
                    .map(|p| (p[0], p[1]))
                    .collect();
                let nodes = positions.len();
                let graph = recmarl_core::Graph::from_edges(nodes, &edges)
                    .map_err(|e| bad(format!("topology: {e}")))?;
                PowerEnv::new(positions, graph, p_max, kappa, sigma, price)
            }
        };
        env.map_err(|e| bad(format!("env: {e}")))
    }

    /// A copy with every default filled in and the seed list narrowed to one
    /// entry, for embedding in that seed's metadata. Feeding the echo back
    /// through `run` reproduces the metric rows byte for byte.
    pub fn echo(&self, base: &LearnerConfig, out_dir: &Path, seed: u64) -> ExperimentConfig {
        let mut c = self.clone();
        c.learner.horizon = Some(base.horizon);
        c.learner.eta = Some(base.eta);
        c.learner.alpha = Some(base.alpha);
        c.learner.lambda = Some(base.lambda);
        c.learner.eval_interval = Some(base.eval_interval);
        c.trial.seeds = vec![seed];
        c.trial.out_dir = Some(out_dir.display().to_string());
        c.trial.eval_steps = Some(base.eval_steps);
        c
    }
}
