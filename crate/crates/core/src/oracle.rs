//! Exact computations on the joint chain of a [`NetworkMdp`]: Bellman solves,
//! occupancy measures, exact policy gradients, the entropy-regularized
//! objective, and joint policy iteration.
//!
//! Everything here is dense and exact; sizes beyond the configured cap are
//! rejected rather than approximated.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::index::MixedRadix;
use crate::linalg;
use crate::math;
use crate::mdp::NetworkMdp;
use crate::policy::SoftmaxPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SizeError {
    pub size: usize,
    pub cap: usize,
}

impl fmt::Display for SizeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "state space of size {} exceeds the oracle cap {}", self.size, self.cap)
    }
}

#[cfg(feature = "std")]
impl std::error::Error for SizeError {}

pub const DEFAULT_CAP: usize = 1_000_000;

#[derive(Debug, Clone)]
pub struct GlobalValue {
    pub v: Vec<f64>,
    q: Vec<f64>,
    action_count: usize,
}

impl GlobalValue {
    pub fn q(&self, s: usize, a: usize) -> f64 {
        self.q[s * self.action_count + a]
    }

    pub fn advantage(&self, s: usize, a: usize) -> f64 {
        self.q(s, a) - self.v[s]
    }
}

/// Per-agent gradient tables, flat `[s * |A_n| + a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle(pub Vec<Vec<f64>>);

impl GradientBundle {
    pub fn inf_norm(&self) -> f64 {
        let mut m = 0.0;
        for table in &self.0 {
            for &x in table {
                let a = math::abs(x);
                if a > m {
                    m = a;
                }
            }
        }
        m
    }

    pub fn sq_norm(&self) -> f64 {
        self.0.iter().flat_map(|t| t.iter()).map(|x| x * x).sum()
    }

    pub fn max_abs_diff(&self, other: &GradientBundle) -> f64 {
        let mut m = 0.0;
        for (a, b) in self.0.iter().zip(&other.0) {
            for (x, y) in a.iter().zip(b) {
                let d = math::abs(x - y);
                if d > m {
                    m = d;
                }
            }
        }
        m
    }
}

pub struct Oracle<'a> {
    mdp: &'a NetworkMdp,
    cap: usize,
    js: MixedRadix,
    ja: MixedRadix,
}

impl<'a> Oracle<'a> {
    pub fn new(mdp: &'a NetworkMdp) -> Self {
        Self::with_cap(mdp, DEFAULT_CAP)
    }

    pub fn with_cap(mdp: &'a NetworkMdp, cap: usize) -> Self {
        Oracle { mdp, cap, js: mdp.joint_states(), ja: mdp.joint_actions() }
    }

    pub fn joint_state_count(&self) -> usize {
        self.js.len()
    }

    fn check_cap(&self, size: usize) -> Result<(), SizeError> {
        if size > self.cap {
            Err(SizeError { size, cap: self.cap })
        } else {
            Ok(())
        }
    }

    /// Probabilities of every local action, cached per (agent, state).
    fn all_probs(&self, policy: &SoftmaxPolicy) -> Vec<Vec<Vec<f64>>> {
        (0..self.mdp.agent_count())
            .map(|n| {
                (0..self.mdp.local(n).state_count).map(|s| policy.probs(n, s)).collect()
            })
            .collect()
    }

    /// Joint transition row P(. | s, a) as a tensor product of the local rows,
    /// written into `out` (length = joint state count).
    fn transition_row(&self, s: &[usize], a: &[usize], out: &mut [f64]) {
        out[0] = 1.0;
        let mut filled = 1;
        for n in 0..self.mdp.agent_count() {
            let local = self.mdp.local(n);
            let sn = local.state_count;
            for sn_next in (0..sn).rev() {
                let p = local.prob(s[n], a[n], sn_next);
                for i in 0..filled {
                    out[sn_next * filled + i] = out[i] * p;
                }
            }
            filled *= sn;
        }
        debug_assert_eq!(filled, out.len());
    }

    /// Kernel and reward of the joint chain under the policy:
    /// P_pi[s][s'] and r_pi[s].
    fn policy_chain(&self, policy: &SoftmaxPolicy) -> (Vec<f64>, Vec<f64>) {
        let ns = self.js.len();
        let na = self.ja.len();
        let probs = self.all_probs(policy);
        let mut p = vec![0.0; ns * ns];
        let mut r = vec![0.0; ns];
        let mut s_coords = vec![0; self.mdp.agent_count()];
        let mut a_coords = vec![0; self.mdp.agent_count()];
        let mut row = vec![0.0; ns];
        for s in 0..ns {
            self.js.decode_into(s, &mut s_coords);
            for a in 0..na {
                self.ja.decode_into(a, &mut a_coords);
                let mut pi = 1.0;
                for n in 0..self.mdp.agent_count() {
                    pi *= probs[n][s_coords[n]][a_coords[n]];
                }
                if pi == 0.0 {
                    continue;
                }
                r[s] += pi * self.mdp.global_reward(&s_coords, &a_coords);
                self.transition_row(&s_coords, &a_coords, &mut row);
                for (dst, &x) in p[s * ns..(s + 1) * ns].iter_mut().zip(&row) {
                    *dst += pi * x;
                }
            }
        }
        (p, r)
    }

    /// V and Q of the joint chain by a dense Bellman solve.
    pub fn solve_global_value(&self, policy: &SoftmaxPolicy) -> Result<GlobalValue, SizeError> {
        let ns = self.js.len();
        self.check_cap(ns)?;
        let gamma = self.mdp.gamma();
        let (p, r) = self.policy_chain(policy);
        let mut m = vec![0.0; ns * ns];
        for s in 0..ns {
            for t in 0..ns {
                m[s * ns + t] = if s == t { 1.0 } else { 0.0 } - gamma * p[s * ns + t];
            }
        }
        let mut v = r;
        linalg::solve_in_place(&mut m, ns, &mut v)
            .expect("Bellman system is nonsingular for gamma < 1");
        let na = self.ja.len();
        let mut q = vec![0.0; ns * na];
        let mut s_coords = vec![0; self.mdp.agent_count()];
        let mut a_coords = vec![0; self.mdp.agent_count()];
        let mut row = vec![0.0; ns];
        for s in 0..ns {
            self.js.decode_into(s, &mut s_coords);
            for a in 0..na {
                self.ja.decode_into(a, &mut a_coords);
                self.transition_row(&s_coords, &a_coords, &mut row);
                let mut cont = 0.0;
                for (next, &x) in row.iter().enumerate() {
                    cont += x * v[next];
                }
                q[s * na + a] =
                    self.mdp.global_reward(&s_coords, &a_coords) + gamma * cont;
            }
        }
        Ok(GlobalValue { v, q, action_count: na })
    }

    /// The joint initial distribution (product of the per-agent ones).
    pub fn joint_init_dist(&self) -> Vec<f64> {
        let ns = self.js.len();
        let mut rho = vec![0.0; ns];
        let mut coords = vec![0; self.mdp.agent_count()];
        for s in 0..ns {
            self.js.decode_into(s, &mut coords);
            let mut p = 1.0;
            for (n, &c) in coords.iter().enumerate() {
                p *= self.mdp.init_dist(n)[c];
            }
            rho[s] = p;
        }
        rho
    }

    /// V(rho): the value averaged over the initial distribution.
    pub fn value_at_init(&self, policy: &SoftmaxPolicy) -> Result<f64, SizeError> {
        let gv = self.solve_global_value(policy)?;
        let rho = self.joint_init_dist();
        Ok(rho.iter().zip(&gv.v).map(|(p, v)| p * v).sum())
    }

    /// Discounted occupancy d(s) = (1-gamma) sum_t gamma^t P(s_t = s), solved
    /// as the row system d = (1-gamma) rho (I - gamma P_pi)^{-1}.
    pub fn occupancy(&self, policy: &SoftmaxPolicy) -> Result<Vec<f64>, SizeError> {
        let ns = self.js.len();
        self.check_cap(ns)?;
        let gamma = self.mdp.gamma();
        let (p, _) = self.policy_chain(policy);
        // transpose turns the row system into an ordinary solve
        let mut m = vec![0.0; ns * ns];
        for s in 0..ns {
            for t in 0..ns {
                m[t * ns + s] = if s == t { 1.0 } else { 0.0 } - gamma * p[s * ns + t];
            }
        }
        let mut d = self.joint_init_dist();
        for x in d.iter_mut() {
            *x *= 1.0 - gamma;
        }
        linalg::solve_in_place(&mut m, ns, &mut d)
            .expect("occupancy system is nonsingular for gamma < 1");
        Ok(d)
    }

    /// Marginal kernel of one agent's chain under its policy:
    /// M[s][s'] = sum_a pi(a|s) P(s'|s,a).
    fn marginal_kernel(&self, policy: &SoftmaxPolicy, n: usize) -> Vec<f64> {
        let local = self.mdp.local(n);
        let (sn, an) = (local.state_count, local.action_count);
        let mut m = vec![0.0; sn * sn];
        for s in 0..sn {
            let probs = policy.probs(n, s);
            for a in 0..an {
                for s_next in 0..sn {
                    m[s * sn + s_next] += probs[a] * local.prob(s, a, s_next);
                }
            }
        }
        m
    }

    /// V_n over agent n's closed neighborhood. The neighborhood tuple is
    /// itself a Markov chain because every member's kernel and policy read
    /// only that member's own coordinate.
    pub fn solve_local_value(
        &self,
        policy: &SoftmaxPolicy,
        n: usize,
    ) -> Result<Vec<f64>, SizeError> {
        Ok(self.solve_local_value_q(policy, n)?.0)
    }

    /// Neighborhood V_n and Q_n (the latter over neighborhood joint actions).
    pub fn solve_local_value_q(
        &self,
        policy: &SoftmaxPolicy,
        n: usize,
    ) -> Result<(Vec<f64>, Vec<f64>), SizeError> {
        let nbhd = self.mdp.graph().neighborhood(n);
        let s_ix = self.mdp.neighborhood_states(n);
        let a_ix = self.mdp.neighborhood_actions(n);
        let ns = s_ix.len();
        let na = a_ix.len();
        self.check_cap(ns)?;
        let gamma = self.mdp.gamma();
        let marginals: Vec<Vec<f64>> =
            nbhd.iter().map(|&k| self.marginal_kernel(policy, k)).collect();

        let mut s_coords = vec![0; nbhd.len()];
        let mut a_coords = vec![0; nbhd.len()];

        // chain kernel: product of member marginals
        let mut p = vec![0.0; ns * ns];
        let mut row = vec![0.0; ns];
        for s in 0..ns {
            s_ix.decode_into(s, &mut s_coords);
            row[0] = 1.0;
            let mut filled = 1;
            for (i, &k) in nbhd.iter().enumerate() {
                let sk = self.mdp.local(k).state_count;
                for sk_next in (0..sk).rev() {
                    let pr = marginals[i][s_coords[i] * sk + sk_next];
                    for j in 0..filled {
                        row[sk_next * filled + j] = row[j] * pr;
                    }
                }
                filled *= sk;
            }
            p[s * ns..(s + 1) * ns].copy_from_slice(&row);
        }

        // expected reward under the members' policies
        let mut r = vec![0.0; ns];
        for s in 0..ns {
            s_ix.decode_into(s, &mut s_coords);
            for a in 0..na {
                a_ix.decode_into(a, &mut a_coords);
                let mut pi = 1.0;
                for (i, &k) in nbhd.iter().enumerate() {
                    pi *= policy.prob(k, s_coords[i], a_coords[i]);
                }
                r[s] += pi * self.mdp.reward_by_index(n, s, a);
            }
        }

        let mut m = vec![0.0; ns * ns];
        for s in 0..ns {
            for t in 0..ns {
                m[s * ns + t] = if s == t { 1.0 } else { 0.0 } - gamma * p[s * ns + t];
            }
        }
        let mut v = r;
        linalg::solve_in_place(&mut m, ns, &mut v)
            .expect("neighborhood Bellman system is nonsingular for gamma < 1");

        // Q over neighborhood joint actions: action-conditioned one-step
        // product kernel, then the continuation through v
        let mut q = vec![0.0; ns * na];
        for s in 0..ns {
            s_ix.decode_into(s, &mut s_coords);
            for a in 0..na {
                a_ix.decode_into(a, &mut a_coords);
                row[0] = 1.0;
                let mut filled = 1;
                for (i, &k) in nbhd.iter().enumerate() {
                    let local = self.mdp.local(k);
                    let sk = local.state_count;
                    for sk_next in (0..sk).rev() {
                        let pr = local.prob(s_coords[i], a_coords[i], sk_next);
                        for j in 0..filled {
                            row[sk_next * filled + j] = row[j] * pr;
                        }
                    }
                    filled *= sk;
                }
                let mut cont = 0.0;
                for (next, &x) in row.iter().enumerate() {
                    cont += x * v[next];
                }
                q[s * na + a] = self.mdp.reward_by_index(n, s, a) + gamma * cont;
            }
        }
        Ok((v, q))
    }

    /// Max over joint states of |V(s) - (1/N) sum_n V_n(s_nbhd)|.
    pub fn value_decomposition_error(&self, policy: &SoftmaxPolicy) -> Result<f64, SizeError> {
        let gv = self.solve_global_value(policy)?;
        let n_agents = self.mdp.agent_count();
        let locals: Vec<Vec<f64>> = (0..n_agents)
            .map(|n| self.solve_local_value(policy, n))
            .collect::<Result<_, _>>()?;
        let mut coords = vec![0; n_agents];
        let mut worst = 0.0;
        for s in 0..self.js.len() {
            self.js.decode_into(s, &mut coords);
            let mut sum = 0.0;
            for n in 0..n_agents {
                let nbhd = self.mdp.graph().neighborhood(n);
                let si = MixedRadix::project(self.mdp.neighborhood_states(n), nbhd, &coords);
                sum += locals[n][si];
            }
            let err = math::abs(gv.v[s] - sum / n_agents as f64);
            if err > worst {
                worst = err;
            }
        }
        Ok(worst)
    }

    fn gradient_common(
        &self,
        policy: &SoftmaxPolicy,
        weight_for: &mut dyn FnMut(usize, &[usize], &[usize], usize) -> f64,
    ) -> Result<GradientBundle, SizeError> {
        let n_agents = self.mdp.agent_count();
        let gamma = self.mdp.gamma();
        let d = self.occupancy(policy)?;
        let probs = self.all_probs(policy);
        let mut grads: Vec<Vec<f64>> = (0..n_agents)
            .map(|n| vec![0.0; self.mdp.local(n).state_count * self.mdp.local(n).action_count])
            .collect();
        let mut s_coords = vec![0; n_agents];
        let mut a_coords = vec![0; n_agents];
        for s in 0..self.js.len() {
            if d[s] == 0.0 {
                continue;
            }
            self.js.decode_into(s, &mut s_coords);
            for a in 0..self.ja.len() {
                self.ja.decode_into(a, &mut a_coords);
                let mut pi = 1.0;
                for n in 0..n_agents {
                    pi *= probs[n][s_coords[n]][a_coords[n]];
                }
                let base = d[s] * pi / (1.0 - gamma);
                if base == 0.0 {
                    continue;
                }
                for n in 0..n_agents {
                    let w = base * weight_for(n, &s_coords, &a_coords, s * self.ja.len() + a);
                    if w == 0.0 {
                        continue;
                    }
                    let an = self.mdp.local(n).action_count;
                    let row = &mut grads[n][s_coords[n] * an..(s_coords[n] + 1) * an];
                    let pn = &probs[n][s_coords[n]];
                    for (ai, g) in row.iter_mut().enumerate() {
                        let score = if ai == a_coords[n] { 1.0 - pn[ai] } else { -pn[ai] };
                        *g += w * score;
                    }
                }
            }
        }
        Ok(GradientBundle(grads))
    }

    /// Exact gradient of V(rho) in each agent's logits, computed through the
    /// neighborhood advantages: the occupancy-weighted score of agent n is
    /// scaled by (1/N) sum over n's closed neighborhood of A_k at k's
    /// neighborhood coordinates.
    pub fn exact_gradient(&self, policy: &SoftmaxPolicy) -> Result<GradientBundle, SizeError> {
        let n_agents = self.mdp.agent_count();
        let mut adv: Vec<Vec<f64>> = Vec::with_capacity(n_agents);
        for k in 0..n_agents {
            let (v, mut q) = self.solve_local_value_q(policy, k)?;
            let na = self.mdp.neighborhood_actions(k).len();
            for (s, &vs) in v.iter().enumerate() {
                for x in &mut q[s * na..(s + 1) * na] {
                    *x -= vs;
                }
            }
            adv.push(q);
        }
        let graph = self.mdp.graph();
        let mut s_proj = vec![0; n_agents];
        let mut a_proj = vec![0; n_agents];
        self.gradient_common(policy, &mut |n, s_coords, a_coords, _| {
            for k in graph.neighborhood(n) {
                let k = *k;
                s_proj[k] = MixedRadix::project(
                    self.mdp.neighborhood_states(k),
                    graph.neighborhood(k),
                    s_coords,
                );
                a_proj[k] = MixedRadix::project(
                    self.mdp.neighborhood_actions(k),
                    graph.neighborhood(k),
                    a_coords,
                );
            }
            let mut sum = 0.0;
            for &k in graph.neighborhood(n) {
                let na = self.mdp.neighborhood_actions(k).len();
                sum += adv[k][s_proj[k] * na + a_proj[k]];
            }
            sum / n_agents as f64
        })
    }

    /// Same gradient through the global Q function, with no use of the
    /// neighborhood structure. Kept as an independent path; the two agree to
    /// floating-point accuracy.
    pub fn naive_gradient(&self, policy: &SoftmaxPolicy) -> Result<GradientBundle, SizeError> {
        let gv = self.solve_global_value(policy)?;
        let na = self.ja.len();
        self.gradient_common(policy, &mut |_, _, _, sa| gv.q[sa] - gv.v[sa / na])
    }

    /// Central finite differences of V(rho) in every logit coordinate.
    pub fn fd_gradient(
        &self,
        policy: &SoftmaxPolicy,
        h: f64,
    ) -> Result<GradientBundle, SizeError> {
        let n_agents = self.mdp.agent_count();
        let mut work = policy.clone();
        let mut grads = Vec::with_capacity(n_agents);
        for n in 0..n_agents {
            let len = policy.logits(n).len();
            let mut table = vec![0.0; len];
            for i in 0..len {
                work.logits_mut(n)[i] += h;
                let up = self.value_at_init(&work)?;
                work.logits_mut(n)[i] -= 2.0 * h;
                let down = self.value_at_init(&work)?;
                work.logits_mut(n)[i] += h;
                table[i] = (up - down) / (2.0 * h);
            }
            grads.push(table);
        }
        Ok(GradientBundle(grads))
    }

    /// V(rho) plus the entropy-style regularizer
    /// sum_n (lambda / (|S_n| |A_n|)) sum_{s,a} log pi_n(a|s).
    pub fn regularized_objective(
        &self,
        policy: &SoftmaxPolicy,
        lambda: f64,
    ) -> Result<f64, SizeError> {
        let mut total = self.value_at_init(policy)?;
        for n in 0..self.mdp.agent_count() {
            let local = self.mdp.local(n);
            let scale = lambda / (local.state_count * local.action_count) as f64;
            for s in 0..local.state_count {
                for p in policy.probs(n, s) {
                    total += scale * math::ln(p);
                }
            }
        }
        Ok(total)
    }

    /// Gradient of the regularized objective: the exact gradient plus
    /// (lambda/|S_n|)(1/|A_n| - pi) per coordinate.
    pub fn exact_regularized_gradient(
        &self,
        policy: &SoftmaxPolicy,
        lambda: f64,
    ) -> Result<GradientBundle, SizeError> {
        let mut bundle = self.exact_gradient(policy)?;
        for n in 0..self.mdp.agent_count() {
            let local = self.mdp.local(n);
            let scale = lambda / local.state_count as f64;
            let uniform = 1.0 / local.action_count as f64;
            for s in 0..local.state_count {
                let probs = policy.probs(n, s);
                let row =
                    &mut bundle.0[n][s * local.action_count..(s + 1) * local.action_count];
                for (a, g) in row.iter_mut().enumerate() {
                    *g += scale * (uniform - probs[a]);
                }
            }
        }
        Ok(bundle)
    }

    /// V* of the joint MDP by policy iteration over deterministic joint
    /// policies, together with the greedy joint action per state.
    pub fn optimal_values(&self) -> Result<(Vec<f64>, Vec<usize>), SizeError> {
        let ns = self.js.len();
        self.check_cap(ns)?;
        let na = self.ja.len();
        // the dense (s, a) -> s' kernel below is the big allocation
        self.check_cap(ns.saturating_mul(na))?;
        let gamma = self.mdp.gamma();
        let n_agents = self.mdp.agent_count();

        // dense r(s,a) and P(s'|s,a) once
        let mut s_coords = vec![0; n_agents];
        let mut a_coords = vec![0; n_agents];
        let mut rewards = vec![0.0; ns * na];
        let mut kernel = vec![0.0; ns * na * ns];
        for s in 0..ns {
            self.js.decode_into(s, &mut s_coords);
            for a in 0..na {
                self.ja.decode_into(a, &mut a_coords);
                rewards[s * na + a] = self.mdp.global_reward(&s_coords, &a_coords);
                let base = (s * na + a) * ns;
                self.transition_row(&s_coords, &a_coords, &mut kernel[base..base + ns]);
            }
        }

        // start from the myopic greedy policy
        let mut actions: Vec<usize> = (0..ns)
            .map(|s| {
                let row = &rewards[s * na..(s + 1) * na];
                let mut best = 0;
                for (a, &r) in row.iter().enumerate() {
                    if r > row[best] {
                        best = a;
                    }
                }
                best
            })
            .collect();

        let mut v = vec![0.0; ns];
        for _round in 0..10_000 {
            // evaluate the current deterministic policy
            let mut m = vec![0.0; ns * ns];
            let mut rhs = vec![0.0; ns];
            for s in 0..ns {
                let a = actions[s];
                rhs[s] = rewards[s * na + a];
                let base = (s * na + a) * ns;
                for t in 0..ns {
                    m[s * ns + t] =
                        if s == t { 1.0 } else { 0.0 } - gamma * kernel[base + t];
                }
            }
            linalg::solve_in_place(&mut m, ns, &mut rhs)
                .expect("policy evaluation system is nonsingular for gamma < 1");
            v = rhs;

            // greedy improvement
            let mut changed = false;
            for s in 0..ns {
                let mut best_a = actions[s];
                let mut best_q = f64::NEG_INFINITY;
                for a in 0..na {
                    let base = (s * na + a) * ns;
                    let mut q = rewards[s * na + a];
                    let mut cont = 0.0;
                    for t in 0..ns {
                        cont += kernel[base + t] * v[t];
                    }
                    q += gamma * cont;
                    if q > best_q + 1e-12 {
                        best_q = q;
                        best_a = a;
                    }
                }
                if best_a != actions[s] {
                    actions[s] = best_a;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        Ok((v, actions))
    }

    /// min over joint states of the joint probability the policy puts on the
    /// optimal action, given the greedy actions from [`Oracle::optimal_values`].
    pub fn min_optimal_action_prob(
        &self,
        policy: &SoftmaxPolicy,
        optimal_actions: &[usize],
    ) -> f64 {
        let mut s_coords = vec![0; self.mdp.agent_count()];
        let mut a_coords = vec![0; self.mdp.agent_count()];
        let mut worst = f64::INFINITY;
        for s in 0..self.js.len() {
            self.js.decode_into(s, &mut s_coords);
            self.ja.decode_into(optimal_actions[s], &mut a_coords);
            let p = policy.joint_prob(&s_coords, &a_coords);
            if p < worst {
                worst = p;
            }
        }
        worst
    }
}
