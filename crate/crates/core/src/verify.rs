//! Certification suites: randomized cross-checks of the oracle identities
//! plus behavior checks on the learners, packaged as machine-readable
//! reports for the `verify` command.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::env::AccessEnv;
use crate::graph::Graph;
use crate::learners::{
    dpg_default_eta, run_dpg_exact, run_dpg_inexact, td_inner_loop, LearnerConfig, ValueTable,
};
use crate::math;
use crate::mdp::{u01, LocalMdp, NetworkMdp};
use crate::oracle::Oracle;
use crate::policy::SoftmaxPolicy;
use crate::rollout::rollout;
use crate::{rng_substream, Rng};

/// One named measurement against its bound.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub bound: f64,
    pub note: String,
}

impl Check {
    fn under(name: &str, measured: f64, bound: f64, note: String) -> Self {
        Check { name: String::from(name), passed: measured <= bound, measured, bound, note }
    }

    fn failed(name: &str, note: String) -> Self {
        Check { name: String::from(name), passed: false, measured: f64::NAN, bound: 0.0, note }
    }
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub suite: &'static str,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub fn all_suites() -> Vec<SuiteReport> {
    vec![decomposition_suite(), gradient_suite(), monotone_suite(), td_accuracy_suite()]
}

/// A randomized problem with a random softmax policy attached.
pub struct RandomInstance {
    pub mdp: NetworkMdp,
    pub policy: SoftmaxPolicy,
    pub label: String,
}

fn random_dist(rng: &mut Rng, len: usize, floor: f64) -> Vec<f64> {
    let mut row: Vec<f64> = (0..len).map(|_| u01(rng) + floor).collect();
    let sum: f64 = row.iter().sum();
    for x in &mut row {
        *x /= sum;
    }
    row
}

fn random_instance(
    rng: &mut Rng,
    n_agents: usize,
    kind: usize,
    s_dim: usize,
    a_dim: usize,
    gamma: f64,
    label: String,
) -> RandomInstance {
    let graph = match kind {
        0 => Graph::line(n_agents),
        1 => Graph::star(n_agents),
        _ => Graph::cycle(n_agents),
    };
    let locals: Vec<LocalMdp> = (0..n_agents)
        .map(|_| {
            let mut kernel = Vec::with_capacity(s_dim * a_dim * s_dim);
            for _ in 0..s_dim * a_dim {
                kernel.extend(random_dist(rng, s_dim, 0.05));
            }
            LocalMdp::new(s_dim, a_dim, kernel)
        })
        .collect();
    let init: Vec<Vec<f64>> = (0..n_agents).map(|_| random_dist(rng, s_dim, 0.1)).collect();
    let mdp = NetworkMdp::new(graph, locals, |_, _, _| u01(rng), gamma, init)
        .expect("randomized instance is always well-formed");
    let theta: Vec<Vec<f64>> = (0..n_agents)
        .map(|_| (0..s_dim * a_dim).map(|_| 2.0 * u01(rng) - 1.0).collect())
        .collect();
    let dims = vec![(s_dim, a_dim); n_agents];
    let policy = SoftmaxPolicy::from_tables(dims, theta).expect("finite random logits");
    RandomInstance { mdp, policy, label }
}

/// The shared certification set: 360 instances sweeping agent count, graph
/// shape, local sizes, and discount, five random draws each.
pub fn certification_instances() -> Vec<RandomInstance> {
    let mut rng = rng_substream(0x5eed, 1);
    let mut out = Vec::new();
    for &n_agents in &[2usize, 3, 4] {
        for (kind, kind_name) in [(0, "line"), (1, "star"), (2, "cycle")] {
            for &s_dim in &[2usize, 3] {
                for &a_dim in &[2usize, 3] {
                    for &gamma in &[0.5, 0.9] {
                        for rep in 0..5 {
                            let label = format!(
                                "N={n_agents} {kind_name} S={s_dim} A={a_dim} gamma={gamma} rep={rep}"
                            );
                            out.push(random_instance(
                                &mut rng, n_agents, kind, s_dim, a_dim, gamma, label,
                            ));
                        }
                    }
                }
            }
        }
    }
    out
}

/// Global value vs the average of neighborhood values, across the whole
/// certification set.
pub fn decomposition_suite() -> SuiteReport {
    let instances = certification_instances();
    let mut worst = 0.0;
    let mut worst_label = String::new();
    let mut checks = Vec::new();
    for inst in &instances {
        let oracle = Oracle::new(&inst.mdp);
        match oracle.value_decomposition_error(&inst.policy) {
            Ok(err) => {
                if err > worst {
                    worst = err;
                    worst_label = inst.label.clone();
                }
            }
            Err(e) => {
                checks.push(Check::failed(
                    "decomposition solves",
                    format!("{} failed: {e}", inst.label),
                ));
            }
        }
    }
    checks.push(Check {
        name: String::from("instance count"),
        passed: instances.len() >= 300,
        measured: instances.len() as f64,
        bound: 300.0,
        note: String::from("at least 300 randomized instances"),
    });
    checks.push(Check::under(
        "max decomposition error",
        worst,
        1e-8,
        format!("worst at {worst_label}"),
    ));
    SuiteReport { suite: "decomposition", checks }
}

/// Exact gradient against central finite differences and against the
/// global-Q gradient path, across the whole certification set.
pub fn gradient_suite() -> SuiteReport {
    let instances = certification_instances();
    let mut worst_fd = 0.0;
    let mut worst_fd_label = String::new();
    let mut worst_paths = 0.0;
    let mut worst_paths_label = String::new();
    let mut checks = Vec::new();
    for inst in &instances {
        let oracle = Oracle::new(&inst.mdp);
        let run = || -> Result<(f64, f64), crate::oracle::SizeError> {
            let exact = oracle.exact_gradient(&inst.policy)?;
            let fd = oracle.fd_gradient(&inst.policy, 1e-5)?;
            let naive = oracle.naive_gradient(&inst.policy)?;
            let rel = exact.max_abs_diff(&fd) / exact.inf_norm().max(1e-8);
            Ok((rel, exact.max_abs_diff(&naive)))
        };
        match run() {
            Ok((rel, paths)) => {
                if rel > worst_fd {
                    worst_fd = rel;
                    worst_fd_label = inst.label.clone();
                }
                if paths > worst_paths {
                    worst_paths = paths;
                    worst_paths_label = inst.label.clone();
                }
            }
            Err(e) => {
                checks.push(Check::failed(
                    "gradient solves",
                    format!("{} failed: {e}", inst.label),
                ));
            }
        }
    }
    checks.push(Check::under(
        "max finite-difference relative error",
        worst_fd,
        1e-4,
        format!("central differences h=1e-5, worst at {worst_fd_label}"),
    ));
    checks.push(Check::under(
        "max disagreement between gradient paths",
        worst_paths,
        1e-9,
        format!("neighborhood-advantage vs global-Q, worst at {worst_paths_label}"),
    ));
    SuiteReport { suite: "gradient", checks }
}

/// Two agents on one edge, near-static kernels, and a pure coordination
/// reward: both play action 1 for `scale`, both play 0 for a quarter of
/// that, and mixed actions pay nothing. The optimum is easy to solve yet
/// far from the uniform start, which makes the instance a sharp probe for
/// ascent behavior.
pub fn coordination_instance(scale: f64) -> (NetworkMdp, SoftmaxPolicy) {
    let sticky = vec![
        0.95, 0.05, 0.95, 0.05, // s=0
        0.05, 0.95, 0.05, 0.95, // s=1
    ];
    let locals = vec![LocalMdp::new(2, 2, sticky.clone()), LocalMdp::new(2, 2, sticky)];
    let mdp = NetworkMdp::new(
        Graph::line(2),
        locals,
        |_, _, a| match (a[0], a[1]) {
            (1, 1) => scale,
            (0, 0) => 0.25 * scale,
            _ => 0.0,
        },
        0.9,
        vec![vec![0.5, 0.5]; 2],
    )
    .expect("coordination instance is well-formed");
    let policy = SoftmaxPolicy::uniform_for(&mdp);
    (mdp, policy)
}

/// Exact-gradient ascent on the coordination instance at the conservative
/// step size: the value sequence must never dip, must close at least 95% of
/// the optimality gap, and t*(gap) must not grow over the late run.
pub fn monotone_suite() -> SuiteReport {
    let (mdp, policy) = coordination_instance(400.0);
    let mut cfg = LearnerConfig::for_mdp(&mdp, 5000, 1, 0);
    cfg.eta = dpg_default_eta(&mdp);
    cfg.eval_interval = cfg.iterations;
    cfg.eval_steps = 1;
    let run = match run_dpg_exact(&mdp, &policy, &cfg) {
        Ok(run) => run,
        Err(e) => {
            return SuiteReport {
                suite: "monotone",
                checks: vec![Check::failed("run completes", format!("{e}"))],
            }
        }
    };
    let v_star = run.optimal_value.expect("joint space is tiny");
    let v0 = run.values[0];
    let v_end = *run.values.last().unwrap();
    let mut worst_drop = 0.0;
    for pair in run.values.windows(2) {
        let drop = pair[0] - pair[1];
        if drop > worst_drop {
            worst_drop = drop;
        }
    }
    let gap0 = v_star - v0;
    let ratio = (v_star - v_end) / gap0;
    let mut worst_rise = f64::NEG_INFINITY;
    let half = run.values.len() / 2;
    for (i, pair) in run.values.windows(2).enumerate().skip(half) {
        let rise = (i + 1) as f64 * (v_star - pair[1]) - i as f64 * (v_star - pair[0]);
        if rise > worst_rise {
            worst_rise = rise;
        }
    }
    let checks = vec![
        Check::under(
            "worst value drop between iterates",
            worst_drop,
            1e-6,
            format!("T={} eta={:.3e}", cfg.iterations, cfg.eta),
        ),
        Check::under(
            "final gap over initial gap",
            ratio,
            0.05,
            format!("V*={v_star:.3} V_0={v0:.3} V_T={v_end:.3}"),
        ),
        Check::under(
            "late-run growth of t*(gap)",
            worst_rise,
            1e-3 * gap0,
            String::from("qualitative 1/t decay over the last half"),
        ),
    ];
    SuiteReport { suite: "monotone", checks }
}

/// TD estimates on a short line of access-control agents against the
/// linear-solve neighborhood values: longer sweeps must come out strictly
/// more accurate, and the longest sweep must land within 5%.
pub fn td_accuracy_suite() -> SuiteReport {
    let env = match AccessEnv::line(3, vec![0.7; 3], vec![0.9, 0.9], 2) {
        Ok(env) => env,
        Err(e) => {
            return SuiteReport {
                suite: "td_accuracy",
                checks: vec![Check::failed("environment builds", format!("{e}"))],
            }
        }
    };
    let mdp = match env.build_mdp(0.97) {
        Ok(mdp) => mdp,
        Err(e) => {
            return SuiteReport {
                suite: "td_accuracy",
                checks: vec![Check::failed("model builds", format!("{e}"))],
            }
        }
    };
    let policy = SoftmaxPolicy::uniform_for(&mdp);
    let oracle = Oracle::new(&mdp);
    let mut exact = Vec::new();
    for n in 0..3 {
        match oracle.solve_local_value(&policy, n) {
            Ok(v) => exact.push(v),
            Err(e) => {
                return SuiteReport {
                    suite: "td_accuracy",
                    checks: vec![Check::failed("oracle solves", format!("{e}"))],
                }
            }
        }
    }
    let norms: Vec<f64> =
        exact.iter().map(|v| v.iter().fold(0.0, |m: f64, &x| m.max(math::abs(x)))).collect();

    let horizons = [1_000usize, 10_000, 100_000];
    let mut rel = vec![[0.0f64; 3]; 3]; // [horizon][agent]
    for (i, &h) in horizons.iter().enumerate() {
        let mut rng = rng_substream(7, h as u64);
        let traj = rollout(&mdp, &policy, h + 1, &mut rng);
        for n in 0..3 {
            let mut table = ValueTable::zeros(&mdp, n);
            td_inner_loop(&mdp, n, &traj, 0.1, &mut table);
            let mut err = 0.0f64;
            for (est, tru) in table.values.iter().zip(&exact[n]) {
                err = err.max(math::abs(est - tru));
            }
            rel[i][n] = err / norms[n];
        }
    }

    let mut checks = Vec::new();
    for n in 0..3 {
        let mut worst_ratio = 0.0f64;
        for i in 1..horizons.len() {
            worst_ratio = worst_ratio.max(rel[i][n] / rel[i - 1][n]);
        }
        checks.push(Check {
            name: format!("agent {n} error shrinks with horizon"),
            passed: worst_ratio < 1.0,
            measured: worst_ratio,
            bound: 1.0,
            note: format!(
                "relative errors {:.4} / {:.4} / {:.4} at H=1e3/1e4/1e5",
                rel[0][n], rel[1][n], rel[2][n]
            ),
        });
    }
    let final_worst =
        (0..3).map(|n| rel[2][n]).fold(0.0f64, f64::max);
    checks.push(Check::under(
        "max relative error at H=100000",
        final_worst,
        0.05,
        String::from("against linear-solve neighborhood values"),
    ));
    SuiteReport { suite: "td_accuracy", checks }
}

/// Summed squared gradient norms against the smoothness budget: with the
/// exact regularized gradient and step 1/beta', the telescoped ascent bound
/// caps the total at 2*beta'*(objective headroom), and the headroom itself
/// is capped by the unregularized optimum. Checked with 10% slack on a
/// unit-reward instance.
pub fn smoothness_slack_check() -> Check {
    let (mdp, policy) = coordination_instance(1.0);
    let lambda = 0.1;
    let n = mdp.agent_count() as f64;
    let g = 1.0 - mdp.gamma();
    let beta: f64 = 48.0 * n * n / (g * g * g)
        + (0..mdp.agent_count())
            .map(|k| 2.0 * lambda / mdp.local(k).state_count as f64)
            .sum::<f64>();
    let mut cfg = LearnerConfig::for_mdp(&mdp, 200, 1, 0);
    cfg.eta = 1.0 / beta;
    cfg.lambda = lambda;
    cfg.eval_interval = cfg.iterations;
    cfg.eval_steps = 1;
    let oracle = Oracle::new(&mdp);
    let run = match run_dpg_inexact(&mdp, &policy, &cfg, |p, _| {
        oracle.exact_regularized_gradient(p, lambda).map_err(|e| format!("{e}"))
    }) {
        Ok(run) => run,
        Err(e) => return Check::failed("gradient-sum smoothness bound", format!("{e}")),
    };
    let norms = run.exact_norms.expect("instance fits the oracle");
    let objectives = run.objectives.expect("instance fits the oracle");
    let lhs: f64 = norms.iter().map(|x| x * x).sum();
    let v_star = {
        let (v, _) = oracle.optimal_values().expect("tiny joint space");
        let rho = oracle.joint_init_dist();
        v.iter().zip(&rho).map(|(a, b)| a * b).sum::<f64>()
    };
    let rhs = 1.1 * 2.0 * beta * (v_star - objectives[0]);
    Check::under(
        "gradient-sum smoothness bound",
        lhs,
        rhs,
        format!("T={} beta'={beta:.1} headroom={:.4}", cfg.iterations, v_star - objectives[0]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instance_set_is_deterministic_and_large_enough() {
        let a = certification_instances();
        let b = certification_instances();
        assert!(a.len() >= 300);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.label, y.label);
            assert_eq!(x.policy, y.policy);
        }
    }

    #[test]
    fn coordination_optimum_is_joint_action_one() {
        let (mdp, _) = coordination_instance(400.0);
        let oracle = Oracle::new(&mdp);
        let (v, actions) = oracle.optimal_values().unwrap();
        assert!(actions.iter().all(|&a| a == 3), "optimal joint action is (1,1)");
        for &x in &v {
            assert!((x - 4000.0).abs() < 1e-6);
        }
    }
}
