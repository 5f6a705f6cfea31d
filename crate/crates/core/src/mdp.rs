//! The networked MDP: per-agent kernels, neighborhood-coupled rewards, one
//! shared discount, product-form initial distribution.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::graph::Graph;
use crate::index::MixedRadix;
use crate::math;
use crate::Rng;
use rand_core::RngCore;

const KERNEL_ROW_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum BuildError {
    GammaOutOfRange(f64),
    AgentCountMismatch { graph: usize, locals: usize },
    KernelRow { agent: usize, state: usize, action: usize, sum: f64 },
    KernelEntryNegative { agent: usize, state: usize, action: usize },
    KernelSizeMismatch { agent: usize },
    InitDist { agent: usize, reason: String },
    RewardTableSize { agent: usize, expected: usize, got: usize },
    NonFiniteReward { agent: usize },
}

impl fmt::Display for BuildError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BuildError::GammaOutOfRange(g) => write!(f, "discount {g} not in (0,1)"),
            BuildError::AgentCountMismatch { graph, locals } => {
                write!(f, "graph has {graph} nodes but {locals} local MDPs given")
            }
            BuildError::KernelRow { agent, state, action, sum } => write!(
                f,
                "agent {agent} kernel row (s={state}, a={action}) sums to {sum}, expected 1"
            ),
            BuildError::KernelEntryNegative { agent, state, action } => write!(
                f,
                "agent {agent} kernel row (s={state}, a={action}) has a negative entry"
            ),
            BuildError::KernelSizeMismatch { agent } => {
                write!(f, "agent {agent} kernel length does not match |S|*|A|*|S|")
            }
            BuildError::InitDist { agent, reason } => {
                write!(f, "agent {agent} initial distribution invalid: {reason}")
            }
            BuildError::RewardTableSize { agent, expected, got } => write!(
                f,
                "agent {agent} reward table has {got} entries, neighborhood needs {expected}"
            ),
            BuildError::NonFiniteReward { agent } => {
                write!(f, "agent {agent} reward table contains a non-finite value")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for BuildError {}

/// One agent's private MDP: `kernel[s][a][s']` flattened row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalMdp {
    pub state_count: usize,
    pub action_count: usize,
    pub kernel: Vec<f64>,
}

impl LocalMdp {
    pub fn new(state_count: usize, action_count: usize, kernel: Vec<f64>) -> Self {
        LocalMdp { state_count, action_count, kernel }
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize, s_next: usize) -> f64 {
        self.kernel[(s * self.action_count + a) * self.state_count + s_next]
    }

    fn row(&self, s: usize, a: usize) -> &[f64] {
        let base = (s * self.action_count + a) * self.state_count;
        &self.kernel[base..base + self.state_count]
    }

    fn validate(&self, agent: usize) -> Result<(), BuildError> {
        if self.kernel.len() != self.state_count * self.action_count * self.state_count {
            return Err(BuildError::KernelSizeMismatch { agent });
        }
        for s in 0..self.state_count {
            for a in 0..self.action_count {
                let mut sum = 0.0;
                for &p in self.row(s, a) {
                    if !(p >= 0.0) {
                        return Err(BuildError::KernelEntryNegative { agent, state: s, action: a });
                    }
                    sum += p;
                }
                if math::abs(sum - 1.0) > KERNEL_ROW_TOL {
                    return Err(BuildError::KernelRow { agent, state: s, action: a, sum });
                }
            }
        }
        Ok(())
    }
}

/// Reward tables are dense over each agent's closed neighborhood, indexed by
/// the neighborhood's own mixed-radix spaces (members ascending).
#[derive(Debug, Clone)]
pub struct NetworkMdp {
    graph: Graph,
    locals: Vec<LocalMdp>,
    rewards: Vec<Vec<f64>>,
    nbhd_states: Vec<MixedRadix>,
    nbhd_actions: Vec<MixedRadix>,
    gamma: f64,
    init: Vec<Vec<f64>>,
}

impl NetworkMdp {
    /// `reward` is evaluated once per (agent, neighborhood state, neighborhood
    /// action) during construction; the coordinate slices follow the closed
    /// neighborhood in ascending agent order.
    pub fn new(
        graph: Graph,
        locals: Vec<LocalMdp>,
        mut reward: impl FnMut(usize, &[usize], &[usize]) -> f64,
        gamma: f64,
        init: Vec<Vec<f64>>,
    ) -> Result<Self, BuildError> {
        let n = graph.node_count();
        let mut tables = Vec::with_capacity(n);
        for agent in 0..n {
            let nbhd = graph.neighborhood(agent);
            let s_dims: Vec<usize> = nbhd.iter().map(|&k| locals[k].state_count).collect();
            let a_dims: Vec<usize> = nbhd.iter().map(|&k| locals[k].action_count).collect();
            let s_ix = MixedRadix::new(&s_dims);
            let a_ix = MixedRadix::new(&a_dims);
            let mut table = vec![0.0; s_ix.len() * a_ix.len()];
            let mut s_coords = vec![0; nbhd.len()];
            let mut a_coords = vec![0; nbhd.len()];
            for si in 0..s_ix.len() {
                s_ix.decode_into(si, &mut s_coords);
                for ai in 0..a_ix.len() {
                    a_ix.decode_into(ai, &mut a_coords);
                    table[si * a_ix.len() + ai] = reward(agent, &s_coords, &a_coords);
                }
            }
            tables.push(table);
        }
        Self::from_tables(graph, locals, tables, gamma, init)
    }

    /// Same as [`NetworkMdp::new`] but with the reward tables already laid
    /// out (agent-major, then neighborhood state index, then action index).
    pub fn from_tables(
        graph: Graph,
        locals: Vec<LocalMdp>,
        rewards: Vec<Vec<f64>>,
        gamma: f64,
        init: Vec<Vec<f64>>,
    ) -> Result<Self, BuildError> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(BuildError::GammaOutOfRange(gamma));
        }
        let n = graph.node_count();
        if locals.len() != n {
            return Err(BuildError::AgentCountMismatch { graph: n, locals: locals.len() });
        }
        for (agent, local) in locals.iter().enumerate() {
            local.validate(agent)?;
        }
        if init.len() != n {
            return Err(BuildError::InitDist {
                agent: init.len().min(n),
                reason: format!("{} components for {} agents", init.len(), n),
            });
        }
        for (agent, dist) in init.iter().enumerate() {
            if dist.len() != locals[agent].state_count {
                return Err(BuildError::InitDist {
                    agent,
                    reason: format!(
                        "{} entries for {} states",
                        dist.len(),
                        locals[agent].state_count
                    ),
                });
            }
            let mut sum = 0.0;
            for &p in dist {
                if !(p > 0.0) {
                    return Err(BuildError::InitDist {
                        agent,
                        reason: String::from("every entry must be strictly positive"),
                    });
                }
                sum += p;
            }
            if math::abs(sum - 1.0) > 1e-9 {
                return Err(BuildError::InitDist {
                    agent,
                    reason: format!("sums to {sum}"),
                });
            }
        }
        let mut nbhd_states = Vec::with_capacity(n);
        let mut nbhd_actions = Vec::with_capacity(n);
        for agent in 0..n {
            let nbhd = graph.neighborhood(agent);
            let s_dims: Vec<usize> = nbhd.iter().map(|&k| locals[k].state_count).collect();
            let a_dims: Vec<usize> = nbhd.iter().map(|&k| locals[k].action_count).collect();
            nbhd_states.push(MixedRadix::new(&s_dims));
            nbhd_actions.push(MixedRadix::new(&a_dims));
        }
        if rewards.len() != n {
            return Err(BuildError::RewardTableSize {
                agent: rewards.len().min(n),
                expected: n,
                got: rewards.len(),
            });
        }
        for agent in 0..n {
            let expected = nbhd_states[agent].len() * nbhd_actions[agent].len();
            if rewards[agent].len() != expected {
                return Err(BuildError::RewardTableSize {
                    agent,
                    expected,
                    got: rewards[agent].len(),
                });
            }
            if rewards[agent].iter().any(|r| !r.is_finite()) {
                return Err(BuildError::NonFiniteReward { agent });
            }
        }
        Ok(NetworkMdp { graph, locals, rewards, nbhd_states, nbhd_actions, gamma, init })
    }

    pub fn agent_count(&self) -> usize {
        self.locals.len()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn local(&self, n: usize) -> &LocalMdp {
        &self.locals[n]
    }

    pub fn init_dist(&self, n: usize) -> &[f64] {
        &self.init[n]
    }

    pub fn state_dims(&self) -> Vec<usize> {
        self.locals.iter().map(|l| l.state_count).collect()
    }

    pub fn action_dims(&self) -> Vec<usize> {
        self.locals.iter().map(|l| l.action_count).collect()
    }

    pub fn neighborhood_states(&self, n: usize) -> &MixedRadix {
        &self.nbhd_states[n]
    }

    pub fn neighborhood_actions(&self, n: usize) -> &MixedRadix {
        &self.nbhd_actions[n]
    }

    #[inline]
    pub fn reward_by_index(&self, n: usize, nbhd_s: usize, nbhd_a: usize) -> f64 {
        self.rewards[n][nbhd_s * self.nbhd_actions[n].len() + nbhd_a]
    }

    /// r_n read off full joint coordinates; only the neighborhood entries are
    /// touched.
    pub fn reward_at(&self, n: usize, s: &[usize], a: &[usize]) -> f64 {
        let nbhd = self.graph.neighborhood(n);
        let si = MixedRadix::project(&self.nbhd_states[n], nbhd, s);
        let ai = MixedRadix::project(&self.nbhd_actions[n], nbhd, a);
        self.reward_by_index(n, si, ai)
    }

    /// (1/N) sum of the per-agent rewards.
    pub fn global_reward(&self, s: &[usize], a: &[usize]) -> f64 {
        let n = self.agent_count();
        let mut total = 0.0;
        for agent in 0..n {
            total += self.reward_at(agent, s, a);
        }
        total / n as f64
    }

    /// One transition of the product kernel; coordinate n only reads
    /// (s[n], a[n]).
    pub fn step(&self, s: &[usize], a: &[usize], rng: &mut Rng, out: &mut [usize]) {
        for n in 0..self.agent_count() {
            out[n] = sample_index(self.locals[n].row(s[n], a[n]), rng);
        }
    }

    pub fn sample_init(&self, rng: &mut Rng, out: &mut [usize]) {
        for n in 0..self.agent_count() {
            out[n] = sample_index(&self.init[n], rng);
        }
    }

    /// Joint-state index space (agent 0 least significant). Built on demand;
    /// only the exact solvers enumerate it.
    pub fn joint_states(&self) -> MixedRadix {
        MixedRadix::new(&self.state_dims())
    }

    pub fn joint_actions(&self) -> MixedRadix {
        MixedRadix::new(&self.action_dims())
    }
}

pub(crate) fn u01(rng: &mut Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub(crate) fn sample_index(weights: &[f64], rng: &mut Rng) -> usize {
    let u = u01(rng);
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}
