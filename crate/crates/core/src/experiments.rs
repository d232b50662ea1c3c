//! Desk-scale experiment drivers shared by the CLI and the test suites.
//!
//! Two studies on the random toy MDP: the error-versus-order trade-off
//! of the sampled expansions, and how the best truncation order moves with
//! the noise level of the base estimates. Both are deterministic given
//! their seed; repetitions, trajectories and replicates fan out through
//! [`crate::seed::split_seed`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{self, ExpansionConfig};
use crate::mdp::{induce, random_mdp_with_noise, InducedChain, PolicyTable, TabularMdp};
use crate::sampling::{self, taylor_value_curve_samples};
use crate::seed::split_seed;

/// Parameters of the error-versus-order study.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct TradeoffConfig {
    pub num_states: usize,
    pub num_actions: usize,
    pub dirichlet_alpha: f64,
    pub reward_noise_std: f64,
    pub gamma: f64,
    pub gamma_prime: f64,
    pub k_max: usize,
    /// Trajectories per repetition.
    pub trajectories: usize,
    /// Independent time tuples per trajectory.
    pub replicates: usize,
    pub repetitions: usize,
    pub horizon: usize,
    pub start: usize,
    pub seed: u64,
}

impl Default for TradeoffConfig {
    fn default() -> Self {
        TradeoffConfig {
            num_states: 10,
            num_actions: 2,
            dirichlet_alpha: 0.01,
            reward_noise_std: 0.2,
            gamma: 0.2,
            gamma_prime: 0.8,
            k_max: 20,
            trajectories: 10,
            replicates: 8,
            repetitions: 50,
            horizon: 1000,
            start: 0,
            seed: 0,
        }
    }
}

/// One order of the trade-off study. Errors measure the gap to the exact
/// value at `gamma'` from the start state; relative errors divide by its
/// magnitude.
#[derive(Clone, Debug, Serialize)]
pub struct TradeoffRow {
    pub k: usize,
    pub exact_abs_error: f64,
    pub exact_rel_error: f64,
    pub sampled_mean_abs_error: f64,
    pub sampled_std_abs_error: f64,
    pub sampled_mean_rel_error: f64,
    pub sampled_mean_log10_rel_error: f64,
    pub sampled_std_log10_rel_error: f64,
    pub excluded_samples: usize,
}

fn build_toy(
    cfg_states: usize,
    actions: usize,
    alpha: f64,
    noise: f64,
    seed: u64,
) -> Result<(TabularMdp, InducedChain)> {
    let mdp = random_mdp_with_noise(cfg_states, actions, alpha, noise, seed)?;
    let policy = PolicyTable::uniform(cfg_states, actions);
    let chain = induce(&mdp, &policy)?;
    Ok((mdp, chain))
}

/// Exact per-order errors `|V_{g'}(x0) - V_K(x0)|` for K = 0..=k_max,
/// computed through the increment recursion in one sweep.
pub fn exact_error_curve(
    chain: &InducedChain,
    gamma: f64,
    gamma_prime: f64,
    k_max: usize,
    start: usize,
) -> Result<Vec<f64>> {
    let target = exact::value(chain, gamma_prime)?.values[start];
    let mut errors = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let cfg = ExpansionConfig::new(gamma, gamma_prime, k)?;
        let vk = exact::taylor_value(chain, &cfg)?.values[start];
        errors.push((vk - target).abs());
    }
    Ok(errors)
}

/// Run the error-versus-order study with Monte-Carlo return bases.
pub fn tradeoff_experiment(cfg: &TradeoffConfig) -> Result<Vec<TradeoffRow>> {
    let (mdp, chain) = build_toy(
        cfg.num_states,
        cfg.num_actions,
        cfg.dirichlet_alpha,
        cfg.reward_noise_std,
        cfg.seed,
    )?;
    let policy = PolicyTable::uniform(cfg.num_states, cfg.num_actions);
    let target = exact::value(&chain, cfg.gamma_prime)?.values[cfg.start];
    let exact_errors = exact_error_curve(&chain, cfg.gamma, cfg.gamma_prime, cfg.k_max, cfg.start)?;

    let mut per_k_abs: Vec<Vec<f64>> = vec![Vec::with_capacity(cfg.repetitions); cfg.k_max + 1];
    let mut excluded = vec![0usize; cfg.k_max + 1];
    for rep in 0..cfg.repetitions {
        let mut sums = vec![0.0; cfg.k_max + 1];
        let mut counts = vec![0usize; cfg.k_max + 1];
        for j in 0..cfg.trajectories {
            let traj_seed = split_seed(cfg.seed, (1 + rep * cfg.trajectories + j) as u64);
            let traj = sampling::simulate(&mdp, &policy, cfg.start, cfg.horizon, traj_seed)?;
            let suffix = sampling::mc_suffix_returns(&traj, cfg.gamma);
            let mut base = |t: usize, _x: usize| suffix[t];
            let samples = taylor_value_curve_samples(
                &traj,
                cfg.k_max,
                cfg.gamma,
                cfg.gamma_prime,
                &mut base,
                cfg.replicates,
                split_seed(
                    cfg.seed.wrapping_add(0x5eed),
                    (rep * cfg.trajectories + j) as u64,
                ),
            )?;
            for k in 0..=cfg.k_max {
                sums[k] += samples.per_order[k].iter().sum::<f64>();
                counts[k] += samples.per_order[k].len();
                excluded[k] += samples.excluded[k];
            }
        }
        for k in 0..=cfg.k_max {
            if counts[k] == 0 {
                return Err(Error::Truncation(format!(
                    "all order-{k} samples overran the horizon in repetition {rep}"
                )));
            }
            per_k_abs[k].push((sums[k] / counts[k] as f64 - target).abs());
        }
    }

    let scale = target.abs();
    let rows = (0..=cfg.k_max)
        .map(|k| {
            let abs = &per_k_abs[k];
            let (mean_abs, std_abs) = mean_std(abs);
            let logs: Vec<f64> = abs
                .iter()
                .map(|e| (e / scale).max(1e-300).log10())
                .collect();
            let (mean_log, std_log) = mean_std(&logs);
            TradeoffRow {
                k,
                exact_abs_error: exact_errors[k],
                exact_rel_error: exact_errors[k] / scale,
                sampled_mean_abs_error: mean_abs,
                sampled_std_abs_error: std_abs,
                sampled_mean_rel_error: mean_abs / scale,
                sampled_mean_log10_rel_error: mean_log,
                sampled_std_log10_rel_error: std_log,
                excluded_samples: excluded[k],
            }
        })
        .collect();
    Ok(rows)
}

/// Parameters of the noise-versus-best-order study.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimalKConfig {
    pub num_states: usize,
    pub num_actions: usize,
    pub dirichlet_alpha: f64,
    pub reward_noise_std: f64,
    pub gamma: f64,
    pub gamma_prime: f64,
    pub k_max: usize,
    pub sigmas: Vec<f64>,
    pub trajectories: usize,
    pub replicates: usize,
    pub repetitions: usize,
    pub horizon: usize,
    pub start: usize,
    pub seed: u64,
}

impl Default for OptimalKConfig {
    fn default() -> Self {
        OptimalKConfig {
            num_states: 10,
            num_actions: 2,
            dirichlet_alpha: 0.01,
            reward_noise_std: 0.2,
            gamma: 0.2,
            gamma_prime: 0.8,
            k_max: 10,
            sigmas: vec![0.0, 0.05, 0.1, 0.2, 0.5, 1.0],
            trajectories: 10,
            replicates: 8,
            repetitions: 100,
            horizon: 200,
            start: 0,
            seed: 0,
        }
    }
}

/// Per-noise-level summary of the best order.
#[derive(Clone, Debug, Serialize)]
pub struct OptimalKRow {
    pub sigma: f64,
    pub mean_k_star: f64,
    pub std_k_star: f64,
    pub k_stars: Vec<usize>,
}

/// Best truncation order per run under noisy exact-value bases.
/// Ties break toward the smaller order.
pub fn optimal_k_experiment(cfg: &OptimalKConfig) -> Result<Vec<OptimalKRow>> {
    let (mdp, chain) = build_toy(
        cfg.num_states,
        cfg.num_actions,
        cfg.dirichlet_alpha,
        cfg.reward_noise_std,
        cfg.seed,
    )?;
    let policy = PolicyTable::uniform(cfg.num_states, cfg.num_actions);
    let v_base = exact::value(&chain, cfg.gamma)?;
    let target = exact::value(&chain, cfg.gamma_prime)?.values[cfg.start];

    let mut rows = Vec::with_capacity(cfg.sigmas.len());
    for (si, &sigma) in cfg.sigmas.iter().enumerate() {
        if sigma < 0.0 {
            return Err(Error::Parameter("sigma must be >= 0".into()));
        }
        let mut k_stars = Vec::with_capacity(cfg.repetitions);
        for rep in 0..cfg.repetitions {
            let run_index = (si * cfg.repetitions + rep) as u64;
            let mut noisy = sampling::noisy_exact_values(
                &v_base,
                sigma,
                split_seed(cfg.seed.wrapping_add(0xba5e), run_index),
            )?;
            let mut sums = vec![0.0; cfg.k_max + 1];
            let mut counts = vec![0usize; cfg.k_max + 1];
            for j in 0..cfg.trajectories {
                let traj = sampling::simulate(
                    &mdp,
                    &policy,
                    cfg.start,
                    cfg.horizon,
                    split_seed(cfg.seed, 1 + run_index * cfg.trajectories as u64 + j as u64),
                )?;
                let mut base = |_t: usize, x: usize| noisy.query(x);
                let samples = taylor_value_curve_samples(
                    &traj,
                    cfg.k_max,
                    cfg.gamma,
                    cfg.gamma_prime,
                    &mut base,
                    cfg.replicates,
                    split_seed(
                        cfg.seed.wrapping_add(0x7157),
                        run_index * cfg.trajectories as u64 + j as u64,
                    ),
                )?;
                for k in 0..=cfg.k_max {
                    sums[k] += samples.per_order[k].iter().sum::<f64>();
                    counts[k] += samples.per_order[k].len();
                }
            }
            let mut best_k = 0usize;
            let mut best_err = f64::INFINITY;
            for k in 0..=cfg.k_max {
                if counts[k] == 0 {
                    continue;
                }
                let err = (sums[k] / counts[k] as f64 - target).abs();
                if err < best_err {
                    best_err = err;
                    best_k = k;
                }
            }
            k_stars.push(best_k);
        }
        let floats: Vec<f64> = k_stars.iter().map(|k| *k as f64).collect();
        let (mean, std) = mean_std(&floats);
        rows.push(OptimalKRow {
            sigma,
            mean_k_star: mean,
            std_k_star: std,
            k_stars,
        });
    }
    Ok(rows)
}

/// Sample mean and standard deviation (n - 1 normalization).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Sum of squared residuals of the best non-decreasing fit (pool adjacent
/// violators).
pub fn isotonic_increasing_sse(ys: &[f64]) -> f64 {
    // blocks of (sum, count), merged while means decrease
    let mut blocks: Vec<(f64, usize, usize)> = Vec::new(); // (sum, count, end_index)
    for (i, &y) in ys.iter().enumerate() {
        blocks.push((y, 1, i));
        while blocks.len() >= 2 {
            let last = blocks[blocks.len() - 1];
            let prev = blocks[blocks.len() - 2];
            if prev.0 / prev.1 as f64 > last.0 / last.1 as f64 {
                blocks.pop();
                let merged = (prev.0 + last.0, prev.1 + last.1, last.2);
                blocks.pop();
                blocks.push(merged);
            } else {
                break;
            }
        }
    }
    let mut fit = Vec::with_capacity(ys.len());
    for (sum, count, _) in &blocks {
        let level = sum / *count as f64;
        fit.extend(std::iter::repeat_n(level, *count));
    }
    ys.iter().zip(&fit).map(|(y, f)| (y - f).powi(2)).sum()
}

/// Sum of squared residuals of the best non-increasing fit.
pub fn isotonic_decreasing_sse(ys: &[f64]) -> f64 {
    let negated: Vec<f64> = ys.iter().map(|y| -y).collect();
    isotonic_increasing_sse(&negated)
}

/// Least-squares slope of `ys` against `xs`.
pub fn linear_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    cov / var
}
