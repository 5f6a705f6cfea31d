//! Cross-checks the dense oracle against reference implementations that share
//! no code with it: plain value iteration, truncated power series, forward
//! distribution propagation, and brute-force policy enumeration.

mod common;

use common::*;
use recmarl_core::graph::Graph;
use recmarl_core::mdp::NetworkMdp;
use recmarl_core::oracle::Oracle;
use recmarl_core::policy::SoftmaxPolicy;

#[test]
fn global_value_matches_independent_value_iteration() {
    let (mdp, policy) = mixed_line(0.9, 1.0);
    let oracle = Oracle::new(&mdp);
    let gv = oracle.solve_global_value(&policy).unwrap();

    let (p, r) = joint_chain(&mdp, &policy);
    let v = value_iterate(&p, &r, 0.9, 1e-13);
    assert!(sup_diff(&gv.v, &v) < 1e-9, "sup diff {}", sup_diff(&gv.v, &v));

    let rho = product_init(&mdp);
    let v_rho: f64 = rho.iter().zip(&v).map(|(p, v)| p * v).sum();
    let got = oracle.value_at_init(&policy).unwrap();
    assert!((got - v_rho).abs() < 1e-9, "V(rho) {got} vs {v_rho}");
}

#[test]
fn value_at_init_matches_iteration_across_random_instances() {
    for inst in recmarl_core::verify::certification_instances().iter().take(24) {
        let oracle = Oracle::new(&inst.mdp);
        let got = oracle.value_at_init(&inst.policy).unwrap();
        let (p, r) = joint_chain(&inst.mdp, &inst.policy);
        let v = value_iterate(&p, &r, inst.mdp.gamma(), 1e-13);
        let rho = product_init(&inst.mdp);
        let want: f64 = rho.iter().zip(&v).map(|(p, v)| p * v).sum();
        assert!((got - want).abs() < 1e-9, "{}: {got} vs {want}", inst.label);
    }
}

#[test]
fn occupancy_matches_truncated_power_series() {
    let (mdp, policy) = mixed_line(0.9, 1.0);
    let oracle = Oracle::new(&mdp);
    let d = oracle.occupancy(&policy).unwrap();

    let total: f64 = d.iter().sum();
    assert!((total - 1.0).abs() < 1e-9, "occupancy mass {total}");

    // (1-gamma) sum_{t<=200} gamma^t rho P^t; the dropped tail is below
    // 0.9^201 ~ 6e-10 in total variation
    let (p, _) = joint_chain(&mdp, &policy);
    let ns = d.len();
    let mut dist = product_init(&mdp);
    let mut acc = vec![0.0; ns];
    let mut w = 1.0 - 0.9;
    for _ in 0..=200 {
        for s in 0..ns {
            acc[s] += w * dist[s];
        }
        let mut next = vec![0.0; ns];
        for s in 0..ns {
            for t in 0..ns {
                next[t] += dist[s] * p[s * ns + t];
            }
        }
        dist = next;
        w *= 0.9;
    }
    assert!(sup_diff(&d, &acc) < 1e-8, "sup diff {}", sup_diff(&d, &acc));
}

#[test]
fn local_value_matches_forward_propagation() {
    // small rewards keep the 50-step truncation error under 1e-6 at gamma=0.8
    let (mdp, policy) = mixed_line(0.8, 0.01);
    let oracle = Oracle::new(&mdp);
    let (p, _) = joint_chain(&mdp, &policy);
    let s_dims = mdp.state_dims();
    let ns = space_size(&s_dims);

    for agent in [0usize, 1] {
        let vn = oracle.solve_local_value(&policy, agent).unwrap();
        let members = mdp.graph().neighborhood(agent);
        let rbar = expected_agent_reward(&mdp, &policy, agent);
        let member_dims: Vec<usize> = members.iter().map(|&k| s_dims[k]).collect();
        let mut nbhd = vec![0; members.len()];
        let mut entry = 0;
        loop {
            // start the joint chain from the neighborhood state, with every
            // outside agent pinned; the answer must not depend on the pin
            let mut results = [0.0; 2];
            for (run, far) in [0usize, 1].into_iter().enumerate() {
                let mut start = vec![0; s_dims.len()];
                for (i, &k) in members.iter().enumerate() {
                    start[k] = nbhd[i];
                }
                for k in 0..s_dims.len() {
                    if !members.contains(&k) {
                        start[k] = far.min(s_dims[k] - 1);
                    }
                }
                let mut dist = vec![0.0; ns];
                dist[encode(&start, &s_dims)] = 1.0;
                let mut total = 0.0;
                let mut w = 1.0;
                for _ in 0..=50 {
                    total += w * dist.iter().zip(&rbar).map(|(d, r)| d * r).sum::<f64>();
                    let mut next = vec![0.0; ns];
                    for s in 0..ns {
                        if dist[s] == 0.0 {
                            continue;
                        }
                        for t in 0..ns {
                            next[t] += dist[s] * p[s * ns + t];
                        }
                    }
                    dist = next;
                    w *= 0.8;
                }
                results[run] = total;
            }
            assert!(
                (results[0] - results[1]).abs() < 1e-6,
                "agent {agent} entry {entry}: value depends on an outside coordinate"
            );
            assert!(
                (vn[entry] - results[0]).abs() < 1e-5,
                "agent {agent} entry {entry}: {} vs {}",
                vn[entry],
                results[0]
            );
            entry += 1;
            if !advance(&mut nbhd, &member_dims) {
                break;
            }
        }
        assert_eq!(entry, vn.len());
    }
}

#[test]
fn finite_difference_gradient_converges_quadratically() {
    let (mdp, policy) = mixed_line(0.9, 1.0);
    let oracle = Oracle::new(&mdp);
    let exact = oracle.exact_gradient(&policy).unwrap();
    let d: Vec<f64> = [1e-3, 5e-4, 2.5e-4]
        .iter()
        .map(|&h| exact.max_abs_diff(&oracle.fd_gradient(&policy, h).unwrap()))
        .collect();
    // central differences are second order: halving h should cut the
    // disagreement by about four
    assert!(d[0] / d[1] > 3.0, "ratio {} from {:?}", d[0] / d[1], d);
    assert!(d[1] / d[2] > 3.0, "ratio {} from {:?}", d[1] / d[2], d);
    assert!(d[0] < 1e-5, "coarse fd already off by {}", d[0]);
}

#[test]
fn constant_reward_closed_forms() {
    let graph = Graph::line(2);
    let locals = vec![local(0, 2, 2), local(1, 2, 2)];
    let init = vec![vec![0.5, 0.5], vec![0.3, 0.7]];
    let mdp = NetworkMdp::new(graph, locals, |_, _, _| 0.7, 0.85, init).unwrap();
    let dims = vec![(2, 2), (2, 2)];
    let theta = vec![vec![0.4, -0.9, 1.3, 0.2], vec![-0.6, 0.8, 0.1, -1.1]];
    let policy = SoftmaxPolicy::from_tables(dims, theta).unwrap();

    let oracle = Oracle::new(&mdp);
    let gv = oracle.solve_global_value(&policy).unwrap();
    let want = 0.7 / (1.0 - 0.85);
    for (s, v) in gv.v.iter().enumerate() {
        assert!((v - want).abs() < 1e-9, "state {s}: {v} vs {want}");
    }
    // a constant objective has zero gradient everywhere
    let grad = oracle.exact_gradient(&policy).unwrap();
    assert!(grad.inf_norm() < 1e-9, "gradient norm {}", grad.inf_norm());
}

#[test]
fn small_gamma_value_matches_two_term_series() {
    let gamma = 1e-3;
    let (mdp, policy) = mixed_line(gamma, 1.0);
    let oracle = Oracle::new(&mdp);
    let gv = oracle.solve_global_value(&policy).unwrap();
    let (p, r) = joint_chain(&mdp, &policy);
    let ns = r.len();
    // V = r + gamma P r + O(gamma^2 / (1-gamma))
    for s in 0..ns {
        let mut want = r[s];
        for t in 0..ns {
            want += gamma * p[s * ns + t] * r[t];
        }
        assert!((gv.v[s] - want).abs() < 3e-6, "state {s}: {} vs {want}", gv.v[s]);
    }
}

#[test]
fn optimal_values_match_brute_force_policy_enumeration() {
    let graph = Graph::line(2);
    let locals = vec![local(0, 2, 2), local(1, 2, 2)];
    let init = vec![vec![0.5, 0.5], vec![0.4, 0.6]];
    let mdp = NetworkMdp::new(
        graph,
        locals,
        |agent, s, a| unit_hash(mix(agent, s, a)),
        0.9,
        init,
    )
    .unwrap();
    let oracle = Oracle::new(&mdp);
    let (v_star, greedy) = oracle.optimal_values().unwrap();

    // dense joint model by direct enumeration
    let s_dims = mdp.state_dims();
    let a_dims = mdp.action_dims();
    let (ns, na) = (space_size(&s_dims), space_size(&a_dims));
    let mut reward = vec![0.0; ns * na];
    let mut kernel = vec![0.0; ns * na * ns];
    let mut s = vec![0; 2];
    loop {
        let si = encode(&s, &s_dims);
        let mut a = vec![0; 2];
        loop {
            let ai = encode(&a, &a_dims);
            reward[si * na + ai] = mdp.global_reward(&s, &a);
            let mut next = vec![0; 2];
            loop {
                let mut pt = 1.0;
                for n in 0..2 {
                    pt *= mdp.local(n).prob(s[n], a[n], next[n]);
                }
                kernel[(si * na + ai) * ns + encode(&next, &s_dims)] = pt;
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

    let evaluate = |choice: &[usize]| -> Vec<f64> {
        let mut p = vec![0.0; ns * ns];
        let mut r = vec![0.0; ns];
        for s in 0..ns {
            let a = choice[s];
            r[s] = reward[s * na + a];
            p[s * ns..(s + 1) * ns]
                .copy_from_slice(&kernel[(s * na + a) * ns..(s * na + a + 1) * ns]);
        }
        value_iterate(&p, &r, 0.9, 1e-13)
    };

    // all na^ns deterministic stationary joint policies; one of them attains
    // the optimum simultaneously in every state
    let action_dims = vec![na; ns];
    let mut best = vec![f64::NEG_INFINITY; ns];
    let mut choice = vec![0; ns];
    loop {
        let v = evaluate(&choice);
        for s in 0..ns {
            best[s] = best[s].max(v[s]);
        }
        if !advance(&mut choice, &action_dims) {
            break;
        }
    }
    assert!(sup_diff(&v_star, &best) < 1e-8, "sup diff {}", sup_diff(&v_star, &best));

    // the reported greedy actions must themselves achieve V*
    let v_greedy = evaluate(&greedy);
    assert!(sup_diff(&v_star, &v_greedy) < 1e-8, "greedy actions fall short");
}
