//! Seeded trajectory simulation and Monte-Carlo estimators of the
//! discount-gap expansions.
//!
//! The estimators consume *base* estimates through closures so that the
//! same machinery runs with Monte-Carlo return bases, exact-oracle bases,
//! or noise-injected bases. A value base has signature
//! `FnMut(time_index, state) -> f64`; a Q base additionally receives the
//! action.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::exact::{ExpansionConfig, ValueVector};
use crate::mdp::{PolicyTable, TabularMdp};

/// A simulated rollout. `states[t]`, `actions[t]`, `rewards[t]` describe
/// the `t`-th transition; all three have length `horizon`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub horizon: usize,
    pub seed: u64,
    /// Number of sampled rewards clamped into `[0, r_max]`.
    pub clamp_count: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Point estimate with its uncertainty.
#[derive(Clone, Debug, serde::Serialize)]
pub struct EstimatorOutput {
    pub estimator_id: String,
    pub point: f64,
    /// Sample standard deviation divided by sqrt(num_samples).
    pub std_error: f64,
    pub num_samples: usize,
    /// Replicates dropped because a sampled time ran past the horizon.
    pub excluded: usize,
}

fn summarize(id: &str, samples: &[f64], excluded: usize) -> Result<EstimatorOutput> {
    if samples.is_empty() {
        return Err(Error::Truncation(format!(
            "{id}: every replicate ran past the trajectory horizon"
        )));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = if samples.len() > 1 {
        samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(EstimatorOutput {
        estimator_id: id.to_string(),
        point: mean,
        std_error: (var / n).sqrt(),
        num_samples: samples.len(),
        excluded,
    })
}

/// Roll a trajectory of exactly `horizon` transitions.
///
/// Rewards pick up multiplicative Gaussian noise when the MDP carries
/// `reward_noise_std > 0`, clamped to `[0, r_max]` with clamp events
/// counted. Identical seeds replay identical trajectories.
pub fn simulate(
    mdp: &TabularMdp,
    policy: &PolicyTable,
    start: usize,
    horizon: usize,
    seed: u64,
) -> Result<Trajectory> {
    if start >= mdp.num_states {
        return Err(Error::Parameter(format!(
            "start state {start} out of range for {} states",
            mdp.num_states
        )));
    }
    if policy.num_states() != mdp.num_states || policy.num_actions() != mdp.num_actions {
        return Err(Error::Parameter(
            "policy does not match the MDP shape".into(),
        ));
    }
    if horizon < 1 {
        return Err(Error::Parameter("horizon must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = if mdp.reward_noise_std > 0.0 {
        Some(Normal::new(0.0, mdp.reward_noise_std).expect("finite std"))
    } else {
        None
    };
    let mut states = Vec::with_capacity(horizon);
    let mut actions = Vec::with_capacity(horizon);
    let mut rewards = Vec::with_capacity(horizon);
    let mut clamp_count = 0usize;
    let mut x = start;
    for _ in 0..horizon {
        let a = sample_index(&mut rng, &policy.probs[x]);
        let mean = mdp.reward_mean[x][a];
        let r = match &noise {
            Some(dist) => {
                let raw = mean * (1.0 + dist.sample(&mut rng));
                let clamped = raw.clamp(0.0, mdp.r_max);
                if clamped != raw {
                    clamp_count += 1;
                }
                clamped
            }
            None => mean,
        };
        let y = sample_index(&mut rng, &mdp.transition[x][a]);
        states.push(x);
        actions.push(a);
        rewards.push(r);
        x = y;
    }
    Ok(Trajectory {
        states,
        actions,
        rewards,
        horizon,
        seed,
        clamp_count,
    })
}

fn sample_index(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Discounted tail return `sum_{t' >= t} g^{t'-t} r_{t'}`, truncated at the
/// trajectory end (truncation bias at most `g^{L-t} r_max / (1-g)`).
pub fn mc_return(traj: &Trajectory, t: usize, gamma: f64) -> Result<f64> {
    if t >= traj.len() {
        return Err(Error::Parameter(format!(
            "time index {t} out of range for trajectory of length {}",
            traj.len()
        )));
    }
    let mut acc = 0.0;
    for r in traj.rewards[t..].iter().rev() {
        acc = r + gamma * acc;
    }
    Ok(acc)
}

/// All suffix returns of a trajectory in one backward sweep; entry `t` is
/// `mc_return(traj, t, gamma)`.
pub fn mc_suffix_returns(traj: &Trajectory, gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; traj.len()];
    let mut acc = 0.0;
    for t in (0..traj.len()).rev() {
        acc = traj.rewards[t] + gamma * acc;
        out[t] = acc;
    }
    out
}

/// Random-time sampler with `P(tau = t) = (1 - g) g^{t-1}` on `t >= 1`.
///
/// The inverse-CDF construction keeps the mean at `1 / (1 - g)` and makes
/// `(1-g) E[P^tau] = (1-g)(I - gP)^{-1} P`, which is exactly the operator
/// each expansion order applies.
#[derive(Clone, Debug)]
pub struct GeometricTimeSampler {
    gamma: f64,
    rng: ChaCha8Rng,
}

impl GeometricTimeSampler {
    pub fn new(gamma: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::Domain(format!("gamma = {gamma} must lie in [0, 1)")));
        }
        Ok(GeometricTimeSampler {
            gamma,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// Draw one random time (always >= 1).
    pub fn sample_time(&mut self) -> u64 {
        sample_geometric(self.gamma, &mut self.rng)
    }
}

fn sample_geometric(gamma: f64, rng: &mut ChaCha8Rng) -> u64 {
    if gamma == 0.0 {
        return 1;
    }
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return 1 + (u.ln() / gamma.ln()).floor() as u64;
        }
    }
}

/// Per-order partial-sum samples of the value expansion along one
/// trajectory.
///
/// Each replicate draws one tuple of `k_max` geometric times; its order-`k`
/// sample is the Algorithm-style partial sum
/// `sum_{j<=k} ((g'-g)/(1-g))^j base(t_j, x_{t_j})` with `t_j` the prefix
/// sums of the times. Orders whose time index runs past the horizon are
/// recorded as excluded for that replicate.
#[derive(Clone, Debug)]
pub struct CurveSamples {
    /// `per_order[k]` holds the included replicate samples at order `k`.
    pub per_order: Vec<Vec<f64>>,
    /// `excluded[k]` counts replicates whose order-`k` sample was dropped.
    pub excluded: Vec<usize>,
}

pub fn taylor_value_curve_samples<F>(
    traj: &Trajectory,
    k_max: usize,
    gamma: f64,
    gamma_prime: f64,
    base: &mut F,
    replicates: usize,
    seed: u64,
) -> Result<CurveSamples>
where
    F: FnMut(usize, usize) -> f64,
{
    if traj.is_empty() {
        return Err(Error::Parameter("empty trajectory".into()));
    }
    if replicates < 1 {
        return Err(Error::Parameter("replicates must be >= 1".into()));
    }
    let mut sampler = GeometricTimeSampler::new(gamma, seed)?;
    let coeff = (gamma_prime - gamma) / (1.0 - gamma);
    let mut per_order = vec![Vec::with_capacity(replicates); k_max + 1];
    let mut excluded = vec![0usize; k_max + 1];
    for _ in 0..replicates {
        let mut t_index = 0usize;
        let mut weight = 1.0;
        let mut partial = 0.0;
        let mut alive = true;
        for (k, bucket) in per_order.iter_mut().enumerate() {
            if k > 0 {
                let tau = sampler.sample_time();
                t_index = t_index.saturating_add(tau as usize);
                weight *= coeff;
            }
            if alive && t_index < traj.len() {
                partial += weight * base(t_index, traj.states[t_index]);
                bucket.push(partial);
            } else {
                alive = false;
                excluded[k] += 1;
            }
        }
    }
    Ok(CurveSamples {
        per_order,
        excluded,
    })
}

/// Order-`K` expansion estimate from one trajectory: the mean over
/// `replicates` independent time tuples of the partial sum
/// `sum_{k<=K} ((g'-g)/(1-g))^k base(t_k, x_{t_k})`.
///
/// Unbiased for the order-`K` expansion at `x_0` whenever `base` is
/// unbiased. Replicates whose sampled times overrun the horizon are
/// excluded and counted.
pub fn taylor_value_estimate<F>(
    traj: &Trajectory,
    cfg: &ExpansionConfig,
    base: &mut F,
    replicates: usize,
    seed: u64,
) -> Result<EstimatorOutput>
where
    F: FnMut(usize, usize) -> f64,
{
    let samples = taylor_value_curve_samples(
        traj,
        cfg.order_k,
        cfg.gamma,
        cfg.gamma_prime,
        base,
        replicates,
        seed,
    )?;
    summarize(
        "taylor-value",
        &samples.per_order[cfg.order_k],
        samples.excluded[cfg.order_k],
    )
}

/// Order-`K` *term* estimate of the Q expansion at step `t`:
/// `((g'-g)/(1-g))^K base(t + tau, x, a)` with `tau` a sum of `K`
/// geometric times. Summing the terms for k = 0..K reproduces the value
/// form above on the state-action chain.
pub fn taylor_q_term_estimate<F>(
    traj: &Trajectory,
    t: usize,
    cfg: &ExpansionConfig,
    base: &mut F,
    replicates: usize,
    seed: u64,
) -> Result<EstimatorOutput>
where
    F: FnMut(usize, usize, usize) -> f64,
{
    if t >= traj.len() {
        return Err(Error::Parameter(format!(
            "time index {t} out of range for trajectory of length {}",
            traj.len()
        )));
    }
    if replicates < 1 {
        return Err(Error::Parameter("replicates must be >= 1".into()));
    }
    let mut sampler = GeometricTimeSampler::new(cfg.gamma, seed)?;
    let coeff = cfg.contraction_ratio().powi(cfg.order_k as i32);
    let mut samples = Vec::with_capacity(replicates);
    let mut excluded = 0usize;
    for _ in 0..replicates {
        let mut idx = t;
        let mut ok = true;
        for _ in 0..cfg.order_k {
            idx = idx.saturating_add(sampler.sample_time() as usize);
            if idx >= traj.len() {
                ok = false;
                break;
            }
        }
        if !ok {
            excluded += 1;
            continue;
        }
        samples.push(coeff * base(idx, traj.states[idx], traj.actions[idx]));
    }
    summarize("taylor-q-term", &samples, excluded)
}

/// Variance-reduced first-order Q estimate that marginalizes the random
/// time over a window of `h` steps:
/// `base(t) + ((g'-g)/(1-g)) sum_{s=1}^{h} (g^s / sum_{s'} g^{s'}) base(t+s)`.
/// The `h -> infinity` limit is the time-marginalized order-1 term
/// estimator.
pub fn truncated_q_estimate<F>(
    traj: &Trajectory,
    t: usize,
    cfg: &ExpansionConfig,
    h: usize,
    base: &mut F,
) -> Result<f64>
where
    F: FnMut(usize, usize, usize) -> f64,
{
    if cfg.order_k != 1 {
        return Err(Error::Parameter(
            "the truncated estimator is defined for first-order expansions only".into(),
        ));
    }
    if h < 1 {
        return Err(Error::Parameter("window h must be >= 1".into()));
    }
    if t >= traj.len() {
        return Err(Error::Parameter(format!(
            "time index {t} out of range for trajectory of length {}",
            traj.len()
        )));
    }
    if t + h >= traj.len() {
        return Err(Error::Truncation(format!(
            "window t + h = {} runs past the trajectory horizon {}",
            t + h,
            traj.len()
        )));
    }
    let head = base(t, traj.states[t], traj.actions[t]);
    let coeff = cfg.contraction_ratio();
    if cfg.gamma == 0.0 {
        // The geometric time collapses onto tau = 1.
        let nxt = base(t + 1, traj.states[t + 1], traj.actions[t + 1]);
        return Ok(head + coeff * nxt);
    }
    let z: f64 = (1..=h).map(|s| cfg.gamma.powi(s as i32)).sum();
    let mut tail = 0.0;
    for s in 1..=h {
        let w = cfg.gamma.powi(s as i32) / z;
        tail += w * base(t + s, traj.states[t + s], traj.actions[t + s]);
    }
    Ok(head + coeff * tail)
}

/// Base-estimate oracle returning exact values plus fresh Gaussian noise
/// per query, deterministically seeded by `(seed, call index)` through a
/// sequential stream.
#[derive(Clone, Debug)]
pub struct NoisyValueBase {
    values: Vec<f64>,
    sigma: f64,
    rng: ChaCha8Rng,
}

impl NoisyValueBase {
    pub fn query(&mut self, state: usize) -> f64 {
        let v = self.values[state];
        if self.sigma == 0.0 {
            v
        } else {
            let z: f64 = Normal::new(0.0, self.sigma)
                .expect("finite sigma")
                .sample(&mut self.rng);
            v + z
        }
    }
}

pub fn noisy_exact_values(values: &ValueVector, sigma: f64, seed: u64) -> Result<NoisyValueBase> {
    if sigma < 0.0 || !sigma.is_finite() {
        return Err(Error::Parameter("sigma must be >= 0".into()));
    }
    Ok(NoisyValueBase {
        values: values.values.clone(),
        sigma,
        rng: ChaCha8Rng::seed_from_u64(seed),
    })
}
