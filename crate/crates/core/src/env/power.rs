//! Distributed power control: each link holds a discrete power level and can
//! keep, decrease, or increase it by one per slot. Reward is the Shannon-style
//! rate against neighbor interference minus a linear power price.

use alloc::vec;
use alloc::vec::Vec;

use super::EnvError;
use crate::graph::Graph;
use crate::math;
use crate::mdp::{BuildError, LocalMdp, NetworkMdp};

pub const ACTION_KEEP: usize = 0;
pub const ACTION_DECREASE: usize = 1;
pub const ACTION_INCREASE: usize = 2;

#[derive(Debug, Clone)]
pub struct PowerEnv {
    positions: Vec<(f64, f64)>,
    graph: Graph,
    p_max: usize,
    kappa: f64,
    sigma: f64,
    price: f64,
    gains: Vec<f64>,
}

impl PowerEnv {
    pub fn new(
        positions: Vec<(f64, f64)>,
        graph: Graph,
        p_max: usize,
        kappa: f64,
        sigma: f64,
        price: f64,
    ) -> Result<Self, EnvError> {
        let n = graph.node_count();
        if positions.len() != n {
            return Err(EnvError::LengthMismatch {
                what: "positions",
                expected: n,
                got: positions.len(),
            });
        }
        if p_max == 0 {
            return Err(EnvError::ZeroPowerRange);
        }
        if !(sigma > 0.0) {
            return Err(EnvError::NonPositive { what: "sigma", value: sigma });
        }
        if !(kappa > 0.0) {
            return Err(EnvError::NonPositive { what: "kappa", value: kappa });
        }
        // direct gain 1, cross gain kappa / squared distance
        let mut gains = vec![0.0; n * n];
        for a in 0..n {
            gains[a * n + a] = 1.0;
            for b in a + 1..n {
                let dx = positions[a].0 - positions[b].0;
                let dy = positions[a].1 - positions[b].1;
                let d2 = dx * dx + dy * dy;
                if d2 == 0.0 && graph.are_neighbors(a, b) {
                    return Err(EnvError::CoincidentNeighbors { a, b });
                }
                let g = if d2 > 0.0 { kappa / d2 } else { 0.0 };
                gains[a * n + b] = g;
                gains[b * n + a] = g;
            }
        }
        Ok(PowerEnv { positions, graph, p_max, kappa, sigma, price, gains })
    }

    /// rows x cols lattice of links with the given spacing.
    pub fn grid(
        rows: usize,
        cols: usize,
        spacing: f64,
        p_max: usize,
        kappa: f64,
        sigma: f64,
        price: f64,
    ) -> Result<Self, EnvError> {
        if !(spacing > 0.0) {
            return Err(EnvError::NonPositive { what: "spacing", value: spacing });
        }
        let mut positions = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                positions.push((c as f64 * spacing, r as f64 * spacing));
            }
        }
        Self::new(positions, Graph::grid(rows, cols), p_max, kappa, sigma, price)
    }

    pub fn link_count(&self) -> usize {
        self.positions.len()
    }

    pub fn p_max(&self) -> usize {
        self.p_max
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn price(&self) -> f64 {
        self.price
    }

    pub fn gain(&self, from: usize, to: usize) -> f64 {
        self.gains[from * self.link_count() + to]
    }

    /// Interference-plus-nothing at link n: sum over graph neighbors of their
    /// power times the cross gain (noise is added by the reward).
    pub fn interference(&self, n: usize, powers: &[usize]) -> f64 {
        let mut total = 0.0;
        for &m in self.graph.neighborhood(n) {
            if m != n {
                total += powers[m] as f64 * self.gain(m, n);
            }
        }
        total
    }

    /// Rate minus power cost given the closed neighborhood's power levels
    /// (`members` ascending). Actions do not enter; this is a state reward.
    pub fn reward(&self, n: usize, members: &[usize], powers: &[usize]) -> f64 {
        let own = members.iter().position(|&k| k == n).expect("n is in its own neighborhood");
        let p_n = powers[own] as f64;
        let mut interference = 0.0;
        for (i, &k) in members.iter().enumerate() {
            if k != n {
                interference += powers[i] as f64 * self.gain(k, n);
            }
        }
        math::ln(1.0 + p_n * self.gain(n, n) / (interference + self.sigma)) - self.price * p_n
    }

    pub fn transition(&self, p: usize, action: usize) -> usize {
        match action {
            ACTION_DECREASE => p.saturating_sub(1),
            ACTION_INCREASE => (p + 1).min(self.p_max),
            _ => p,
        }
    }

    /// The networked MDP: clamped random-walk kernels per link, interference
    /// rewards on the grid neighborhoods, uniform initial power levels.
    pub fn build_mdp(&self, gamma: f64) -> Result<NetworkMdp, BuildError> {
        self.build_mdp_scaled(gamma, 1.0, 0.0)
    }

    /// Same MDP with every reward mapped to scale * r + offset, for callers
    /// that want rewards inside a fixed range.
    pub fn build_mdp_scaled(
        &self,
        gamma: f64,
        scale: f64,
        offset: f64,
    ) -> Result<NetworkMdp, BuildError> {
        let n = self.link_count();
        let states = self.p_max + 1;
        let mut kernel = vec![0.0; states * 3 * states];
        for p in 0..states {
            for a in 0..3 {
                kernel[(p * 3 + a) * states + self.transition(p, a)] = 1.0;
            }
        }
        let locals = vec![LocalMdp::new(states, 3, kernel); n];
        let init = vec![vec![1.0 / states as f64; states]; n];
        let graph = self.graph.clone();
        NetworkMdp::new(
            graph.clone(),
            locals,
            |agent, s, _a| scale * self.reward(agent, graph.neighborhood(agent), s) + offset,
            gamma,
            init,
        )
    }

    /// The reward range over all neighborhood power profiles, handy for
    /// choosing a normalization.
    pub fn reward_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for n in 0..self.link_count() {
            let members = self.graph.neighborhood(n);
            let mut powers = vec![0usize; members.len()];
            loop {
                let r = self.reward(n, members, &powers);
                lo = lo.min(r);
                hi = hi.max(r);
                let mut i = 0;
                loop {
                    if i == powers.len() {
                        break;
                    }
                    powers[i] += 1;
                    if powers[i] <= self.p_max {
                        break;
                    }
                    powers[i] = 0;
                    i += 1;
                }
                if i == powers.len() {
                    break;
                }
            }
        }
        (lo, hi)
    }
}
