//! Reference machinery shared by the validation tests: an independent
//! mixed-radix walk, joint-chain construction by direct enumeration, plain
//! value iteration, and a deterministic fixture with mixed local sizes.

#![allow(dead_code)]

use recmarl_core::graph::Graph;
use recmarl_core::mdp::{LocalMdp, NetworkMdp};
use recmarl_core::policy::SoftmaxPolicy;

/// Advances `coords` through the product space, agent 0 fastest. Returns
/// false once every combination has been visited.
pub fn advance(coords: &mut [usize], dims: &[usize]) -> bool {
    for (c, &d) in coords.iter_mut().zip(dims) {
        *c += 1;
        if *c < d {
            return true;
        }
        *c = 0;
    }
    false
}

pub fn space_size(dims: &[usize]) -> usize {
    dims.iter().product()
}

pub fn encode(coords: &[usize], dims: &[usize]) -> usize {
    let mut idx = 0;
    let mut stride = 1;
    for (&c, &d) in coords.iter().zip(dims) {
        idx += c * stride;
        stride *= d;
    }
    idx
}

pub fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Joint chain under the policy: kernel rows `p[s * ns + s']` and expected
/// network reward `r[s]`, built by direct enumeration of states and actions.
pub fn joint_chain(mdp: &NetworkMdp, policy: &SoftmaxPolicy) -> (Vec<f64>, Vec<f64>) {
    let s_dims = mdp.state_dims();
    let a_dims = mdp.action_dims();
    let ns = space_size(&s_dims);
    let mut p = vec![0.0; ns * ns];
    let mut r = vec![0.0; ns];
    let mut s = vec![0; s_dims.len()];
    loop {
        let si = encode(&s, &s_dims);
        let mut a = vec![0; a_dims.len()];
        loop {
            let mut pi = 1.0;
            for n in 0..s.len() {
                pi *= policy.prob(n, s[n], a[n]);
            }
            r[si] += pi * mdp.global_reward(&s, &a);
            let mut next = vec![0; s_dims.len()];
            loop {
                let mut pt = pi;
                for n in 0..s.len() {
                    pt *= mdp.local(n).prob(s[n], a[n], next[n]);
                }
                p[si * ns + encode(&next, &s_dims)] += pt;
                if !advance(&mut next, &s_dims) {
                    break;
                }
            }
            if !advance(&mut a, &a_dims) {
                break;
            }
        }
        if !advance(&mut s, &s_dims) {
            break;
        }
    }
    (p, r)
}

/// One agent's expected reward under the policy, per joint state.
pub fn expected_agent_reward(mdp: &NetworkMdp, policy: &SoftmaxPolicy, agent: usize) -> Vec<f64> {
    let s_dims = mdp.state_dims();
    let a_dims = mdp.action_dims();
    let ns = space_size(&s_dims);
    let mut out = vec![0.0; ns];
    let mut s = vec![0; s_dims.len()];
    loop {
        let si = encode(&s, &s_dims);
        let mut a = vec![0; a_dims.len()];
        loop {
            let mut pi = 1.0;
            for n in 0..s.len() {
                pi *= policy.prob(n, s[n], a[n]);
            }
            out[si] += pi * mdp.reward_at(agent, &s, &a);
            if !advance(&mut a, &a_dims) {
                break;
            }
        }
        if !advance(&mut s, &s_dims) {
            break;
        }
    }
    out
}

/// Bellman iteration V <- r + gamma P V until the sup-norm change is below
/// `tol`. Purely iterative, no matrix solve.
pub fn value_iterate(p: &[f64], r: &[f64], gamma: f64, tol: f64) -> Vec<f64> {
    let ns = r.len();
    let mut v = vec![0.0; ns];
    let mut next = vec![0.0; ns];
    loop {
        let mut change: f64 = 0.0;
        for s in 0..ns {
            let mut x = r[s];
            for t in 0..ns {
                x += gamma * p[s * ns + t] * v[t];
            }
            change = change.max((x - v[s]).abs());
            next[s] = x;
        }
        core::mem::swap(&mut v, &mut next);
        if change < tol {
            return v;
        }
    }
}

pub fn product_init(mdp: &NetworkMdp) -> Vec<f64> {
    let s_dims = mdp.state_dims();
    let mut rho = vec![0.0; space_size(&s_dims)];
    let mut s = vec![0; s_dims.len()];
    loop {
        let mut m = 1.0;
        for (n, &c) in s.iter().enumerate() {
            m *= mdp.init_dist(n)[c];
        }
        rho[encode(&s, &s_dims)] = m;
        if !advance(&mut s, &s_dims) {
            break;
        }
    }
    rho
}

// ---------------------------------------------------------------------------
// deterministic fixtures

pub fn unit_hash(h: u64) -> f64 {
    (h.wrapping_mul(0x9e37_79b9_7f4a_7c15) >> 40) as f64 / (1u64 << 24) as f64
}

pub fn mix(agent: usize, s: &[usize], a: &[usize]) -> u64 {
    let mut h = agent as u64 + 1;
    for &c in s {
        h = h.wrapping_mul(31).wrapping_add(c as u64 + 1);
    }
    for &c in a {
        h = h.wrapping_mul(37).wrapping_add(c as u64 + 2);
    }
    h
}

/// Kernel row over `states` outcomes, entries bounded away from zero.
pub fn kernel_row(seed: u64, states: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..states)
        .map(|i| 0.25 + unit_hash(seed.wrapping_mul(101).wrapping_add(i as u64)))
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

pub fn local(agent: usize, states: usize, actions: usize) -> LocalMdp {
    let mut kernel = Vec::with_capacity(states * actions * states);
    for s in 0..states {
        for a in 0..actions {
            kernel.extend(kernel_row(mix(agent, &[s], &[a]), states));
        }
    }
    LocalMdp::new(states, actions, kernel)
}

/// 3 agents on a line with state sizes [2, 3, 2], action sizes [3, 2, 2],
/// hash-derived kernels and rewards, and a fixed non-uniform policy.
pub fn mixed_line(gamma: f64, reward_scale: f64) -> (NetworkMdp, SoftmaxPolicy) {
    let graph = Graph::line(3);
    let locals = vec![local(0, 2, 3), local(1, 3, 2), local(2, 2, 2)];
    let init = vec![vec![0.6, 0.4], vec![0.2, 0.5, 0.3], vec![0.45, 0.55]];
    let mdp = NetworkMdp::new(
        graph,
        locals,
        |agent, s, a| reward_scale * unit_hash(mix(agent, s, a)),
        gamma,
        init,
    )
    .unwrap();
    let dims: Vec<(usize, usize)> = (0..3)
        .map(|n| (mdp.local(n).state_count, mdp.local(n).action_count))
        .collect();
    let theta = dims
        .iter()
        .enumerate()
        .map(|(n, &(s, a))| {
            (0..s * a)
                .map(|i| ((i * 37 + n * 11) % 13) as f64 / 6.0 - 1.0)
                .collect()
        })
        .collect();
    let policy = SoftmaxPolicy::from_tables(dims, theta).unwrap();
    (mdp, policy)
}
