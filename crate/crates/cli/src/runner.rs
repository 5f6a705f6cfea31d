//! Seeded trial execution: one worker pool over the seed list, per-seed
//! metric files written as each seed finishes, and a cross-seed aggregate at
//! the end. Every seed's computation depends only on (config, seed), so the
//! thread count never changes the bytes on disk.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde_json::json;

use recmarl_core::baselines::{aloha_action, aloha_default_prob, dpc_round};
use recmarl_core::learners::{
    compute_td_errors, estimate_agent_gradient, run_dpg_exact, run_dpg_inexact, td_inner_loop,
    td_rdac, IterationRecord, LearnerConfig, NeighborExchange, RunRecord, ValueTable,
};
use recmarl_core::oracle::GradientBundle;
use recmarl_core::rollout::{rollout, rollout_with};
use recmarl_core::{rng_from_seed, rng_substream, SoftmaxPolicy};

use crate::config::{Algorithm, Built, BuiltEnv, ExperimentConfig};
use crate::error::CliError;
use crate::output;

#[derive(Debug)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub stem: String,
    pub seeds: Vec<u64>,
    pub curve_files: Vec<PathBuf>,
    pub aggregate_file: PathBuf,
    pub converged: Vec<Option<f64>>,
}

/// Output root precedence: command-line flag, then the config's `trial`
/// block, then `RECMARL_OUT`, then `./results`.
pub fn resolve_out_dir(flag: Option<&Path>, from_config: Option<&str>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = from_config {
        return PathBuf::from(p);
    }
    if let Ok(p) = std::env::var("RECMARL_OUT") {
        if !p.is_empty() {
            return PathBuf::from(p);
        }
    }
    PathBuf::from("results")
}

pub fn run_config_file(
    path: &Path,
    seed_override: Option<u64>,
    threads: Option<usize>,
    out_dir_flag: Option<&Path>,
) -> Result<RunSummary, CliError> {
    let cfg = crate::config::load(path)?;
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| CliError::validation(format!("{}: no usable file stem", path.display())))?
        .to_string();
    let seeds: Vec<u64> = match seed_override {
        Some(s) => vec![s],
        None => cfg.trial.seeds.clone(),
    };
    let out_dir = resolve_out_dir(out_dir_flag, cfg.trial.out_dir.as_deref());
    run_prepared(&cfg, &stem, &seeds, threads, &out_dir)
}

pub fn run_prepared(
    cfg: &ExperimentConfig,
    stem: &str,
    seeds: &[u64],
    threads: Option<usize>,
    out_dir: &Path,
) -> Result<RunSummary, CliError> {
    if let Some(0) = threads {
        return Err(CliError::validation("--threads must be positive"));
    }
    let built = cfg.build()?;
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::runtime(format!("{}: {e}", out_dir.display())))?;

    let workers = threads
        .unwrap_or_else(|| {
            std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
        })
        .min(seeds.len())
        .max(1);

    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<SeedOutcome, CliError>>>> =
        Mutex::new((0..seeds.len()).map(|_| None).collect());

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= seeds.len() {
                    break;
                }
                let result = run_seed(cfg, &built, seeds[i], stem, out_dir);
                slots.lock().unwrap()[i] = Some(result);
            });
        }
    });

    let outcomes = slots.into_inner().unwrap();
    let mut curves = Vec::with_capacity(seeds.len());
    let mut curve_files = Vec::with_capacity(seeds.len());
    let mut converged = Vec::with_capacity(seeds.len());
    for (i, slot) in outcomes.into_iter().enumerate() {
        let outcome = slot.expect("worker pool covered every seed").map_err(|e| {
            CliError::runtime(format!("seed {}: {e}", seeds[i]))
        })?;
        curve_files.push(outcome.curve_file);
        converged.push(outcome.converged);
        curves.push(outcome.rows);
    }

    let aggregate_file = out_dir.join(format!("{stem}_aggregate.csv"));
    std::fs::write(&aggregate_file, output::aggregate_csv(&curves)?)
        .map_err(|e| CliError::runtime(format!("{}: {e}", aggregate_file.display())))?;

    Ok(RunSummary {
        out_dir: out_dir.to_path_buf(),
        stem: stem.to_string(),
        seeds: seeds.to_vec(),
        curve_files,
        aggregate_file,
        converged,
    })
}

struct SeedOutcome {
    rows: Vec<IterationRecord>,
    curve_file: PathBuf,
    converged: Option<f64>,
}

fn run_seed(
    cfg: &ExperimentConfig,
    built: &Built,
    seed: u64,
    stem: &str,
    out_dir: &Path,
) -> Result<SeedOutcome, CliError> {
    let start = Instant::now();
    let mut lc = built.base.clone();
    lc.seed = seed;
    let (record, extras) = dispatch(cfg, built, &lc)?;

    let curve_file = out_dir.join(format!("{stem}_seed{seed}.csv"));
    std::fs::write(&curve_file, output::curve_csv(&record.rows))
        .map_err(|e| CliError::runtime(format!("{}: {e}", curve_file.display())))?;

    let echo = cfg.echo(&lc, out_dir, seed);
    let echo_toml = toml::to_string_pretty(&echo)
        .map_err(|e| CliError::runtime(format!("config echo: {e}")))?;
    let sidecar = output::Sidecar {
        seed,
        algorithm: cfg.learner.algorithm.name(),
        version: env!("CARGO_PKG_VERSION"),
        wall_clock_s: start.elapsed().as_secs_f64(),
        converged_avg_reward: record.converged_avg_reward(),
        extras: &extras,
        config: &echo_toml,
    };
    let sidecar_file = out_dir.join(format!("{stem}_seed{seed}.json"));
    std::fs::write(&sidecar_file, output::sidecar_json(&sidecar))
        .map_err(|e| CliError::runtime(format!("{}: {e}", sidecar_file.display())))?;

    Ok(SeedOutcome {
        converged: record.converged_avg_reward(),
        rows: record.rows,
        curve_file,
    })
}

fn dispatch(
    cfg: &ExperimentConfig,
    built: &Built,
    lc: &LearnerConfig,
) -> Result<(RunRecord, serde_json::Value), CliError> {
    let mdp = &built.mdp;
    let uniform = SoftmaxPolicy::uniform_for(mdp);
    match cfg.learner.algorithm {
        Algorithm::TdRdac => {
            let run = td_rdac(mdp, &uniform, lc).map_err(|e| CliError::runtime(e.to_string()))?;
            Ok((run.record, json!({})))
        }
        Algorithm::DpgExact => {
            let run =
                run_dpg_exact(mdp, &uniform, lc).map_err(|e| CliError::runtime(e.to_string()))?;
            let extras = json!({
                "optimal_value": run.optimal_value,
                "final_value": run.values.last(),
                "final_min_optimal_prob": run.min_optimal_prob.as_ref().and_then(|v| v.last()),
            });
            Ok((run.record, extras))
        }
        Algorithm::DpgInexact => {
            let estimator = td_estimator(mdp, lc);
            let run = run_dpg_inexact(mdp, &uniform, lc, estimator)
                .map_err(|e| CliError::runtime(e.to_string()))?;
            let extras = json!({
                "exact_diagnostics_tracked": run.exact_norms.is_some(),
                "final_applied_norm": run.applied_norms.last(),
            });
            Ok((run.record, extras))
        }
        Algorithm::Aloha => {
            let BuiltEnv::Access(env) = &built.env else {
                return Err(CliError::runtime("aloha dispatched without an access env"));
            };
            run_aloha(cfg, env, built, lc)
        }
        Algorithm::Dpc => {
            let BuiltEnv::Power(env) = &built.env else {
                return Err(CliError::runtime("dpc dispatched without a power env"));
            };
            Ok(run_dpc(env, built, lc))
        }
    }
}

/// The sampled-gradient estimator behind `dpg_inexact`: the same shared
/// rollout, per-agent critics, and exchange-mediated TD errors the
/// actor-critic loop uses, with the exploration regularizer folded into the
/// returned estimate (the plain-ascent runner scales everything by eta).
fn td_estimator<'a>(
    mdp: &'a recmarl_core::NetworkMdp,
    lc: &LearnerConfig,
) -> impl FnMut(&SoftmaxPolicy, usize) -> Result<GradientBundle, String> + 'a {
    let n_agents = mdp.agent_count();
    let mut rng = rng_from_seed(lc.seed);
    let mut tables: Vec<ValueTable> = (0..n_agents).map(|k| ValueTable::zeros(mdp, k)).collect();
    let alpha = lc.effective_alpha();
    let horizon = lc.horizon;
    let warm = lc.warm_start;
    let clip = lc.grad_clip;
    let lambda = lc.lambda;
    move |policy, _t| {
        if !warm {
            for table in &mut tables {
                table.reset();
            }
        }
        let traj = rollout(mdp, policy, horizon + 1, &mut rng);
        for (k, table) in tables.iter_mut().enumerate() {
            td_inner_loop(mdp, k, &traj, alpha, table);
        }
        let mut exchange = NeighborExchange::new(mdp.graph());
        for (k, table) in tables.iter().enumerate() {
            exchange.post(k, compute_td_errors(mdp, k, table, &traj));
        }
        let mut out = Vec::with_capacity(n_agents);
        for agent in 0..n_agents {
            let mut g = estimate_agent_gradient(mdp, agent, policy, &traj, &exchange)
                .map_err(|e| e.to_string())?;
            if let Some(c) = clip {
                for x in &mut g {
                    *x = x.clamp(-c, c);
                }
            }
            let (s_cnt, a_cnt) = policy.dims(agent);
            let reg = lambda / s_cnt as f64;
            let target = 1.0 / a_cnt as f64;
            for s in 0..s_cnt {
                let probs = policy.probs(agent, s);
                for a in 0..a_cnt {
                    g[s * a_cnt + a] += reg * (target - probs[a]);
                }
            }
            out.push(g);
        }
        Ok(GradientBundle(out))
    }
}

/// Static slotted-ALOHA policy: no training, one evaluation rollout per
/// recorded row, same evaluation protocol as the learners.
fn run_aloha(
    cfg: &ExperimentConfig,
    env: &recmarl_core::env::AccessEnv,
    built: &Built,
    lc: &LearnerConfig,
) -> Result<(RunRecord, serde_json::Value), CliError> {
    let mdp = &built.mdp;
    let probs: Vec<f64> = (0..env.node_count())
        .map(|n| cfg.learner.transmit_prob.unwrap_or_else(|| aloha_default_prob(env, n)))
        .collect();
    let gamma = mdp.gamma();
    let mut rows = Vec::new();
    let mut t = lc.eval_interval;
    while t <= lc.iterations {
        let mut rng = rng_substream(lc.seed, t as u64);
        let traj = rollout_with(
            mdp,
            &mut |n, s, rng| aloha_action(env, n, s, probs[n], rng),
            lc.eval_steps,
            &mut rng,
        );
        rows.push(IterationRecord {
            iteration: t,
            avg_reward: traj.average_global_reward(),
            disc_return: traj.discounted_global_return(gamma),
            grad_norm: None,
        });
        t += lc.eval_interval;
    }
    Ok((RunRecord { rows }, json!({ "transmit_prob": probs })))
}

/// Synchronous discrete best-response rounds from all-zero power. Each round
/// is one recorded row; after the profile stops changing the remaining
/// rounds double as a stability check.
fn run_dpc(
    env: &recmarl_core::env::PowerEnv,
    built: &Built,
    lc: &LearnerConfig,
) -> (RunRecord, serde_json::Value) {
    let mdp = &built.mdp;
    let gamma = mdp.gamma();
    let n = env.link_count();
    let mut powers = vec![0usize; n];
    let hold = vec![0usize; n];
    let mut rows = Vec::with_capacity(lc.iterations);
    let mut fixed_at: Option<usize> = None;
    let mut stable = true;
    for round in 1..=lc.iterations {
        let changed = dpc_round(env, &mut powers);
        if !changed && fixed_at.is_none() {
            fixed_at = Some(round);
        }
        if changed && fixed_at.is_some() {
            stable = false;
        }
        // the reward is a function of the power profile alone, so any action
        // vector reads back the same value
        let avg = mdp.global_reward(&powers, &hold);
        rows.push(IterationRecord {
            iteration: round,
            avg_reward: avg,
            disc_return: avg / (1.0 - gamma),
            grad_norm: None,
        });
    }
    let extras = json!({
        "fixed_point": powers,
        "fixed_point_round": fixed_at,
        "stable": fixed_at.is_some() && stable,
    });
    (RunRecord { rows }, extras)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn scratch_dir(tag: &str) -> PathBuf {
        static NEXT: AtomicUsize = AtomicUsize::new(0);
        let dir = std::env::temp_dir().join(format!(
            "recmarl_run_{tag}_{}_{}",
            std::process::id(),
            NEXT.fetch_add(1, Ordering::Relaxed)
        ));
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    const ACCESS_TD: &str = "\
[env]
kind = \"access\"
gamma = 0.9
arrival = [0.5, 0.5, 0.5]
delivery = [0.9, 0.9]
deadline = 2

[topology]
kind = \"line\"
nodes = 3

[learner]
algorithm = \"td_rdac\"
iterations = 6
horizon = 10
eval_interval = 3

[trial]
seeds = [1, 2]
eval_steps = 40
";

    #[test]
    fn trained_run_writes_curves_sidecars_and_aggregate() {
        let dir = scratch_dir("td");
        let cfg_path = dir.join("tiny.toml");
        std::fs::write(&cfg_path, ACCESS_TD).unwrap();
        let out = dir.join("out");
        let summary = run_config_file(&cfg_path, None, Some(2), Some(&out)).unwrap();

        assert_eq!(summary.seeds, [1, 2]);
        assert_eq!(summary.curve_files.len(), 2);
        for (path, seed) in summary.curve_files.iter().zip([1u64, 2]) {
            assert_eq!(
                path.file_name().unwrap().to_str().unwrap(),
                format!("tiny_seed{seed}.csv")
            );
            let rows =
                output::parse_curve_csv(&std::fs::read_to_string(path).unwrap(), path).unwrap();
            let iters: Vec<_> = rows.iter().map(|r| r.iteration).collect();
            assert_eq!(iters, [3, 6]);

            let sidecar: serde_json::Value = serde_json::from_str(
                &std::fs::read_to_string(path.with_extension("json")).unwrap(),
            )
            .unwrap();
            assert_eq!(sidecar["seed"], seed);
            assert_eq!(sidecar["algorithm"], "td_rdac");
            // the echoed config is itself valid TOML with everything resolved
            let echoed: crate::config::ExperimentConfig =
                toml::from_str(sidecar["config"].as_str().unwrap()).unwrap();
            assert_eq!(echoed.trial.seeds, [seed]);
            assert!(echoed.learner.eta.is_some());
            assert!(echoed.learner.lambda.is_some());
        }
        let agg = std::fs::read_to_string(&summary.aggregate_file).unwrap();
        assert_eq!(agg.lines().count(), 3);
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn metric_files_do_not_depend_on_the_thread_count() {
        let dir = scratch_dir("threads");
        let cfg_path = dir.join("tiny.toml");
        std::fs::write(&cfg_path, ACCESS_TD).unwrap();
        let one = dir.join("one");
        let two = dir.join("two");
        let a = run_config_file(&cfg_path, None, Some(1), Some(&one)).unwrap();
        let b = run_config_file(&cfg_path, None, Some(2), Some(&two)).unwrap();
        for (pa, pb) in a
            .curve_files
            .iter()
            .chain([&a.aggregate_file])
            .zip(b.curve_files.iter().chain([&b.aggregate_file]))
        {
            assert_eq!(std::fs::read(pa).unwrap(), std::fs::read(pb).unwrap());
        }
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn seed_override_replaces_the_config_list() {
        let dir = scratch_dir("override");
        let cfg_path = dir.join("tiny.toml");
        std::fs::write(&cfg_path, ACCESS_TD).unwrap();
        let out = dir.join("out");
        let summary = run_config_file(&cfg_path, Some(7), None, Some(&out)).unwrap();
        assert_eq!(summary.seeds, [7]);
        assert!(out.join("tiny_seed7.csv").is_file());
        assert!(!out.join("tiny_seed1.csv").exists());
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn zero_threads_is_rejected_up_front() {
        let dir = scratch_dir("zero");
        let cfg_path = dir.join("tiny.toml");
        std::fs::write(&cfg_path, ACCESS_TD).unwrap();
        let err = run_config_file(&cfg_path, None, Some(0), Some(&dir)).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn aloha_rows_have_no_gradient_column() {
        let dir = scratch_dir("aloha");
        let cfg_path = dir.join("static.toml");
        std::fs::write(
            &cfg_path,
            "\
[env]
kind = \"access\"
gamma = 0.9
arrival = [0.5, 0.5, 0.5]
delivery = [0.9, 0.9]
deadline = 2

[topology]
kind = \"line\"
nodes = 3

[learner]
algorithm = \"aloha\"
iterations = 4
eval_interval = 2
transmit_prob = 1.0

[trial]
seeds = [3]
eval_steps = 30
",
        )
        .unwrap();
        let out = dir.join("out");
        let summary = run_config_file(&cfg_path, None, None, Some(&out)).unwrap();
        let rows = output::parse_curve_csv(
            &std::fs::read_to_string(&summary.curve_files[0]).unwrap(),
            &summary.curve_files[0],
        )
        .unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.grad_norm.is_none()));
        assert!(rows.iter().all(|r| r.avg_reward.is_finite()));
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn dpc_reaches_a_stable_fixed_point_on_a_two_link_grid() {
        let dir = scratch_dir("dpc");
        let cfg_path = dir.join("pc.toml");
        std::fs::write(
            &cfg_path,
            "\
[env]
kind = \"power\"
gamma = 0.9
p_max = 2
kappa = 0.1
sigma = 0.1
price = 0.1

[topology]
kind = \"grid\"
rows = 1
cols = 2
spacing = 4.0

[learner]
algorithm = \"dpc\"
iterations = 5

[trial]
seeds = [0]
",
        )
        .unwrap();
        let out = dir.join("out");
        let summary = run_config_file(&cfg_path, None, None, Some(&out)).unwrap();
        let rows = output::parse_curve_csv(
            &std::fs::read_to_string(&summary.curve_files[0]).unwrap(),
            &summary.curve_files[0],
        )
        .unwrap();
        assert_eq!(rows.len(), 5);
        let sidecar: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(summary.curve_files[0].with_extension("json")).unwrap(),
        )
        .unwrap();
        assert_eq!(sidecar["extras"]["stable"], true);
        assert!(sidecar["extras"]["fixed_point_round"].as_u64().unwrap() <= 5);
        let _ = std::fs::remove_dir_all(&dir);
    }
}
