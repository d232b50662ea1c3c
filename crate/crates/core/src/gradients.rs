//! Tabular softmax policy-gradient machinery.
//!
//! Gradients are exact matrix computations wherever possible: the vanilla
//! gradient of `V_g(x0)`, the first partial gradient through the value
//! argument at a higher discount, and the full/first/second decomposition.
//! Sample-based updates weight per-step local gradients
//! `Q_t * grad log pi(a_t|x_t)` with the analytic schedules from
//! [`crate::exact::update_weight`]. A small training loop runs the
//! different update variants at matched budgets.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{self, ExpansionConfig};
use crate::linalg::factor_guarded;
use crate::mdp::{absorbing_decompose, induce, InducedChain, PolicyTable, TabularMdp};
use crate::sampling::{self, GeometricTimeSampler, Trajectory};
use crate::seed::split_seed;

/// Logit table of a tabular softmax policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxPolicyParams {
    pub logits: Vec<Vec<f64>>,
}

impl SoftmaxPolicyParams {
    pub fn new(logits: Vec<Vec<f64>>) -> Result<Self> {
        if logits.is_empty() || logits[0].is_empty() {
            return Err(Error::Parameter("empty logit table".into()));
        }
        let a = logits[0].len();
        if logits.iter().any(|row| row.len() != a) {
            return Err(Error::Parameter("ragged logit table".into()));
        }
        if logits.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("non-finite logit".into()));
        }
        Ok(SoftmaxPolicyParams { logits })
    }

    pub fn zeros(num_states: usize, num_actions: usize) -> Self {
        SoftmaxPolicyParams {
            logits: vec![vec![0.0; num_actions]; num_states],
        }
    }

    pub fn num_states(&self) -> usize {
        self.logits.len()
    }

    pub fn num_actions(&self) -> usize {
        self.logits.first().map_or(0, Vec::len)
    }

    /// Row-wise softmax with max subtraction.
    pub fn policy(&self) -> PolicyTable {
        let probs = self
            .logits
            .iter()
            .map(|row| {
                let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = row.iter().map(|v| (v - m).exp()).collect();
                let z: f64 = exps.iter().sum();
                exps.iter().map(|e| e / z).collect()
            })
            .collect();
        PolicyTable { probs }
    }

    pub fn inf_norm(&self) -> f64 {
        self.logits
            .iter()
            .flatten()
            .map(|v| v.abs())
            .fold(0.0, f64::max)
    }
}

/// Which objective a gradient table differentiates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum GradientKind {
    /// Gradient of the value at the evaluation discount.
    Full,
    /// Partial gradient through the value argument only.
    FirstPartial,
    /// Partial gradient through the state-weighting argument only.
    SecondPartial,
    /// Gradient of the value at the estimation discount.
    Vanilla,
    /// Sample estimate with order-`K` update weights.
    Weighted,
}

/// Per-parameter derivative table `g[x][a] = d objective / d theta[x][a]`.
#[derive(Clone, Debug)]
pub struct GradientTable {
    pub partials: Vec<Vec<f64>>,
    pub kind: GradientKind,
}

impl GradientTable {
    fn zeros(num_states: usize, num_actions: usize, kind: GradientKind) -> Self {
        GradientTable {
            partials: vec![vec![0.0; num_actions]; num_states],
            kind,
        }
    }

    pub fn max_abs_diff(&self, other: &GradientTable) -> f64 {
        self.partials
            .iter()
            .flatten()
            .zip(other.partials.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn inf_norm(&self) -> f64 {
        self.partials
            .iter()
            .flatten()
            .map(|v| v.abs())
            .fold(0.0, f64::max)
    }

    /// Per-state row sums; zero for every exact softmax gradient.
    pub fn row_sums(&self) -> Vec<f64> {
        self.partials.iter().map(|row| row.iter().sum()).collect()
    }

    pub fn difference(&self, other: &GradientTable, kind: GradientKind) -> GradientTable {
        let partials = self
            .partials
            .iter()
            .zip(&other.partials)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect();
        GradientTable { partials, kind }
    }
}

fn check_shapes(mdp: &TabularMdp, params: &SoftmaxPolicyParams, start: usize) -> Result<()> {
    if params.num_states() != mdp.num_states || params.num_actions() != mdp.num_actions {
        return Err(Error::Parameter(
            "logit table does not match the MDP shape".into(),
        ));
    }
    if start >= mdp.num_states {
        return Err(Error::Parameter(format!(
            "start state {start} out of range for {} states",
            mdp.num_states
        )));
    }
    Ok(())
}

/// Gradient table from a resolvent row and the advantage:
/// `g[x][a] = m[x] * pi(a|x) * A(x,a)`, where `m` is the start-state row of
/// the relevant resolvent. This is the softmax contraction of the local
/// gradient vectors `sum_a grad pi(a|x) Q(x,a)`.
fn gradient_from_row(
    chain: &InducedChain,
    row: &[f64],
    advantage: &[f64],
    kind: GradientKind,
) -> GradientTable {
    let s = chain.num_states();
    let a_n = chain.num_actions();
    let mut table = GradientTable::zeros(s, a_n, kind);
    for x in 0..s {
        if row[x] == 0.0 {
            continue;
        }
        for a in 0..a_n {
            table.partials[x][a] =
                row[x] * chain.policy.probs[x][a] * advantage[chain.sa_index(x, a)];
        }
    }
    table
}

/// Exact gradient of `V_g(start)` for the softmax policy: one transposed
/// solve against `I - g P` plus the advantage at `g`.
pub fn exact_policy_gradient(
    mdp: &TabularMdp,
    params: &SoftmaxPolicyParams,
    gamma: f64,
    start: usize,
) -> Result<GradientTable> {
    check_shapes(mdp, params, start)?;
    let chain = induce(mdp, &params.policy())?;
    let q = exact::q_value(&chain, gamma)?;
    let adv = q.advantage(&chain);
    let lu = factor_guarded(&chain.p_pi.resolvent_operand(gamma), "I - gamma * P")?;
    let mut rhs = vec![0.0; chain.num_states()];
    rhs[start] = 1.0;
    let row = lu.solve_transpose(&rhs);
    Ok(gradient_from_row(&chain, &row, &adv, GradientKind::Vanilla))
}

/// Exact first partial gradient: the resolvent moves to the evaluation
/// discount `gamma'` while the advantage stays at `gamma`.
pub fn exact_first_partial(
    mdp: &TabularMdp,
    params: &SoftmaxPolicyParams,
    gamma: f64,
    gamma_prime: f64,
    start: usize,
) -> Result<GradientTable> {
    check_shapes(mdp, params, start)?;
    if !(gamma..1.0).contains(&gamma_prime) {
        return Err(Error::Domain(format!(
            "gamma_prime = {gamma_prime} must lie in [gamma, 1); gamma_prime = 1 needs absorbing structure"
        )));
    }
    let chain = induce(mdp, &params.policy())?;
    let q = exact::q_value(&chain, gamma)?;
    let adv = q.advantage(&chain);
    let lu = factor_guarded(&chain.p_pi.resolvent_operand(gamma_prime), "I - gamma' * P")?;
    let mut rhs = vec![0.0; chain.num_states()];
    rhs[start] = 1.0;
    let row = lu.solve_transpose(&rhs);
    Ok(gradient_from_row(
        &chain,
        &row,
        &adv,
        GradientKind::FirstPartial,
    ))
}

/// First partial gradient at `gamma' = 1` over an absorbing chain: the
/// solve restricts to the transient block.
pub fn exact_first_partial_undiscounted(
    mdp: &TabularMdp,
    params: &SoftmaxPolicyParams,
    gamma: f64,
    absorbing_states: &BTreeSet<usize>,
    start: usize,
) -> Result<GradientTable> {
    check_shapes(mdp, params, start)?;
    let chain = induce(mdp, &params.policy())?;
    let dec = absorbing_decompose(&chain, absorbing_states)?;
    let s = chain.num_states();
    let a_n = chain.num_actions();
    if dec.transient_index(start).is_none() {
        // Starting absorbed: the objective is identically zero.
        return Ok(GradientTable::zeros(s, a_n, GradientKind::FirstPartial));
    }
    let q = exact::q_value(&chain, gamma)?;
    let adv = q.advantage(&chain);
    let t = dec.transient_states.len();
    let i_minus_p = dec.transient_block.resolvent_operand(1.0);
    let lu = factor_guarded(&i_minus_p, "transient block I - P")?;
    let mut rhs = vec![0.0; t];
    rhs[dec.transient_index(start).unwrap()] = 1.0;
    let row_t = lu.solve_transpose(&rhs);
    let mut row = vec![0.0; s];
    for (i, &x) in dec.transient_states.iter().enumerate() {
        row[x] = row_t[i];
    }
    Ok(gradient_from_row(
        &chain,
        &row,
        &adv,
        GradientKind::FirstPartial,
    ))
}

/// Full gradient at `gamma'` with its first/second partial split.
#[derive(Clone, Debug)]
pub struct GradientDecomposition {
    pub full: GradientTable,
    pub first: GradientTable,
    pub second: GradientTable,
}

/// `full = exact gradient at gamma'`, `first = first partial`,
/// `second = full - first`.
pub fn exact_gradient_decomposition(
    mdp: &TabularMdp,
    params: &SoftmaxPolicyParams,
    gamma: f64,
    gamma_prime: f64,
    start: usize,
) -> Result<GradientDecomposition> {
    if !(gamma..1.0).contains(&gamma_prime) {
        return Err(Error::Domain(format!(
            "decomposition requires gamma <= gamma_prime < 1, got ({gamma}, {gamma_prime})"
        )));
    }
    let mut full = exact_policy_gradient(mdp, params, gamma_prime, start)?;
    full.kind = GradientKind::Full;
    let first = exact_first_partial(mdp, params, gamma, gamma_prime, start)?;
    let second = full.difference(&first, GradientKind::SecondPartial);
    Ok(GradientDecomposition {
        full,
        first,
        second,
    })
}

/// Batch sample update: averages `sum_t w_K(t) Q_t grad log pi(a_t|x_t)`
/// over trajectories, with `w_K` the analytic order-`K` schedule.
/// `q_estimates[i][t]` must align with trajectory `i`'s steps.
pub fn weighted_pg_estimate(
    policy: &PolicyTable,
    trajectories: &[Trajectory],
    q_estimates: &[Vec<f64>],
    cfg: &ExpansionConfig,
) -> Result<GradientTable> {
    if trajectories.is_empty() {
        return Err(Error::Parameter("empty trajectory batch".into()));
    }
    if trajectories.len() != q_estimates.len() {
        return Err(Error::Parameter(
            "one Q-estimate sequence per trajectory is required".into(),
        ));
    }
    let s = policy.num_states();
    let a_n = policy.num_actions();
    let max_len = trajectories.iter().map(Trajectory::len).max().unwrap_or(0);
    let weights: Vec<f64> = (0..max_len)
        .map(|t| exact::update_weight(cfg.order_k, t, cfg.gamma, cfg.gamma_prime))
        .collect();

    let mut table = GradientTable::zeros(s, a_n, GradientKind::Weighted);
    for (traj, qs) in trajectories.iter().zip(q_estimates) {
        if qs.len() != traj.len() {
            return Err(Error::Parameter(
                "Q-estimate length does not match trajectory length".into(),
            ));
        }
        for t in 0..traj.len() {
            let (x, a) = (traj.states[t], traj.actions[t]);
            if x >= s || a >= a_n {
                return Err(Error::Parameter(
                    "trajectory does not match policy shape".into(),
                ));
            }
            let scale = weights[t] * qs[t];
            if scale == 0.0 {
                continue;
            }
            // grad log pi(a|x) wrt theta[x][b] = 1[b=a] - pi(b|x)
            table.partials[x][a] += scale;
            for b in 0..a_n {
                table.partials[x][b] -= scale * policy.probs[x][b];
            }
        }
    }
    let inv = 1.0 / trajectories.len() as f64;
    for row in table.partials.iter_mut() {
        for v in row.iter_mut() {
            *v *= inv;
        }
    }
    Ok(table)
}

/// Central finite differences of an arbitrary scalar objective over the
/// logit table. Verification oracle for the exact gradients.
pub fn finite_difference_gradient<F>(
    objective: &mut F,
    params: &SoftmaxPolicyParams,
    step: f64,
) -> Result<GradientTable>
where
    F: FnMut(&SoftmaxPolicyParams) -> Result<f64>,
{
    if step <= 0.0 || !step.is_finite() {
        return Err(Error::Parameter("step must be positive".into()));
    }
    let s = params.num_states();
    let a_n = params.num_actions();
    let mut table = GradientTable::zeros(s, a_n, GradientKind::Full);
    let mut work = params.clone();
    for x in 0..s {
        for a in 0..a_n {
            let origin = work.logits[x][a];
            work.logits[x][a] = origin + step;
            let plus = objective(&work)?;
            work.logits[x][a] = origin - step;
            let minus = objective(&work)?;
            work.logits[x][a] = origin;
            table.partials[x][a] = (plus - minus) / (2.0 * step);
        }
    }
    Ok(table)
}

/// Which update rule the training loop applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainVariant {
    /// Uniform weights with the order-`K` Q-estimate mixed in via `eta`.
    QExpansion,
    /// Order-`K` analytic update weights on plain Q-estimates.
    UpdateWeighting,
    /// Weights `gamma^t` (the order-0 schedule).
    Vanilla,
    /// Uniform weights `1`.
    Heuristic,
}

impl TrainVariant {
    pub fn label(&self) -> &'static str {
        match self {
            TrainVariant::QExpansion => "q-expansion",
            TrainVariant::UpdateWeighting => "update-weighting",
            TrainVariant::Vanilla => "vanilla",
            TrainVariant::Heuristic => "heuristic",
        }
    }
}

/// Training-loop configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    pub variant: TrainVariant,
    pub cfg: ExpansionConfig,
    pub learning_rate: f64,
    pub iterations: usize,
    /// Trajectories collected per iteration.
    pub batch_size: usize,
    pub seed: u64,
    /// Mixing weight of the expanded Q-estimate in the q-expansion variant.
    pub eta: f64,
    pub start_state: usize,
    /// Rollout length for data collection.
    pub sim_horizon: usize,
    /// Horizon of the undiscounted evaluation objective.
    pub eval_horizon: usize,
    /// Marginalization window for the first-order Q-expansion estimate.
    pub q_truncation_h: usize,
    /// Normalize the per-batch update weights to sum to one.
    pub self_normalize: bool,
    /// Subtract a per-state mean-return baseline from the Q plug-ins.
    pub use_baseline: bool,
    /// When set, evaluate through the undiscounted absorbing-chain value
    /// instead of the finite-horizon objective.
    pub absorbing_states: Option<Vec<usize>>,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate < 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::Parameter("learning rate must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::Parameter("eta must lie in [0, 1]".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Parameter("batch size must be >= 1".into()));
        }
        if self.sim_horizon < 1 || self.eval_horizon < 1 {
            return Err(Error::Parameter("horizons must be >= 1".into()));
        }
        Ok(())
    }
}

/// One learning-curve row.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TrainPoint {
    pub iteration: usize,
    pub undiscounted_return: f64,
}

/// Outcome of a training run.
#[derive(Clone, Debug)]
pub struct TrainResult {
    pub curve: Vec<TrainPoint>,
    pub final_params: SoftmaxPolicyParams,
    pub diverged: bool,
}

/// Exact expected undiscounted return over `horizon` steps from `start`:
/// `horizon` applications of `v <- r + P v`.
pub fn finite_horizon_return(chain: &InducedChain, start: usize, horizon: usize) -> f64 {
    let mut v = vec![0.0; chain.num_states()];
    for _ in 0..horizon {
        let pv = chain.p_pi.matvec(&v);
        for (x, out) in v.iter_mut().enumerate() {
            *out = chain.r_pi[x] + pv[x];
        }
    }
    v[start]
}

fn evaluate(tc: &TrainConfig, chain: &InducedChain) -> Result<f64> {
    match &tc.absorbing_states {
        Some(states) => {
            let set: BTreeSet<usize> = states.iter().copied().collect();
            let dec = absorbing_decompose(chain, &set)?;
            Ok(exact::value_undiscounted(&dec).values[tc.start_state])
        }
        None => Ok(finite_horizon_return(
            chain,
            tc.start_state,
            tc.eval_horizon,
        )),
    }
}

/// Per-step Q plug-ins for one trajectory under the configured variant.
fn step_q_estimates(
    tc: &TrainConfig,
    traj: &Trajectory,
    sampler: &mut GeometricTimeSampler,
) -> Vec<f64> {
    let qhat = sampling::mc_suffix_returns(traj, tc.cfg.gamma);
    if tc.variant != TrainVariant::QExpansion || tc.cfg.order_k == 0 || tc.eta == 0.0 {
        return qhat;
    }
    let coeff = tc.cfg.contraction_ratio();
    let len = traj.len();
    let mut out = vec![0.0; len];
    for t in 0..len {
        let expanded = if tc.cfg.order_k == 1 {
            // marginalized first-order window, shrunk near the horizon
            let h = tc.q_truncation_h.min(len - 1 - t);
            if h == 0 {
                qhat[t]
            } else if tc.cfg.gamma == 0.0 {
                qhat[t] + coeff * qhat[t + 1]
            } else {
                let z: f64 = (1..=h).map(|s| tc.cfg.gamma.powi(s as i32)).sum();
                let tail: f64 = (1..=h)
                    .map(|s| tc.cfg.gamma.powi(s as i32) / z * qhat[t + s])
                    .sum();
                qhat[t] + coeff * tail
            }
        } else {
            // shared random-time partial sums, orders past the horizon dropped
            let mut acc = qhat[t];
            let mut idx = t;
            let mut weight = 1.0;
            for _ in 1..=tc.cfg.order_k {
                idx = idx.saturating_add(sampler.sample_time() as usize);
                weight *= coeff;
                if idx >= len {
                    break;
                }
                acc += weight * qhat[idx];
            }
            acc
        };
        out[t] = (1.0 - tc.eta) * qhat[t] + tc.eta * expanded;
    }
    out
}

/// Run gradient-ascent training and evaluate the undiscounted return after
/// every iteration. Deterministic given the seed; aborts with the
/// `diverged` flag once the logits pass the guard `1e4`.
pub fn train_tabular(
    mdp: &TabularMdp,
    init_params: &SoftmaxPolicyParams,
    tc: &TrainConfig,
) -> Result<TrainResult> {
    tc.validate()?;
    check_shapes(mdp, init_params, tc.start_state)?;
    let s = mdp.num_states;
    let a_n = mdp.num_actions;
    let mut params = init_params.clone();
    let mut curve = Vec::with_capacity(tc.iterations);
    let mut diverged = false;

    for iter in 0..tc.iterations {
        let policy = params.policy();
        let chain = induce(mdp, &policy)?;
        curve.push(TrainPoint {
            iteration: iter,
            undiscounted_return: evaluate(tc, &chain)?,
        });

        // collect a batch
        let mut trajectories = Vec::with_capacity(tc.batch_size);
        let mut q_lists: Vec<Vec<f64>> = Vec::with_capacity(tc.batch_size);
        let mut sampler =
            GeometricTimeSampler::new(tc.cfg.gamma, split_seed(tc.seed, (2 * iter + 1) as u64))?;
        for b in 0..tc.batch_size {
            let traj_seed = split_seed(tc.seed, (iter * tc.batch_size + b) as u64 * 2);
            let traj = sampling::simulate(mdp, &policy, tc.start_state, tc.sim_horizon, traj_seed)?;
            q_lists.push(step_q_estimates(tc, &traj, &mut sampler));
            trajectories.push(traj);
        }

        if tc.use_baseline {
            // per-state mean of the plug-ins over the batch
            let mut sums = vec![0.0; s];
            let mut counts = vec![0usize; s];
            for (traj, qs) in trajectories.iter().zip(&q_lists) {
                for (t, q) in qs.iter().enumerate() {
                    sums[traj.states[t]] += q;
                    counts[traj.states[t]] += 1;
                }
            }
            let baseline: Vec<f64> = sums
                .iter()
                .zip(&counts)
                .map(|(sm, c)| if *c > 0 { sm / *c as f64 } else { 0.0 })
                .collect();
            for (traj, qs) in trajectories.iter().zip(q_lists.iter_mut()) {
                for (t, q) in qs.iter_mut().enumerate() {
                    *q -= baseline[traj.states[t]];
                }
            }
        }

        let weight_of = |t: usize| -> f64 {
            match tc.variant {
                TrainVariant::QExpansion | TrainVariant::Heuristic => 1.0,
                TrainVariant::Vanilla => tc.cfg.gamma.powi(t as i32),
                TrainVariant::UpdateWeighting => {
                    exact::update_weight(tc.cfg.order_k, t, tc.cfg.gamma, tc.cfg.gamma_prime)
                }
            }
        };

        let normalizer = if tc.self_normalize {
            let total: f64 = trajectories
                .iter()
                .map(|traj| (0..traj.len()).map(&weight_of).sum::<f64>())
                .sum();
            if total > 0.0 {
                total
            } else {
                1.0
            }
        } else {
            tc.batch_size as f64
        };

        let mut grad = vec![vec![0.0; a_n]; s];
        for (traj, qs) in trajectories.iter().zip(&q_lists) {
            for t in 0..traj.len() {
                let scale = weight_of(t) * qs[t] / normalizer;
                if scale == 0.0 {
                    continue;
                }
                let (x, a) = (traj.states[t], traj.actions[t]);
                grad[x][a] += scale;
                for b in 0..a_n {
                    grad[x][b] -= scale * policy.probs[x][b];
                }
            }
        }

        for x in 0..s {
            for a in 0..a_n {
                params.logits[x][a] += tc.learning_rate * grad[x][a];
            }
        }
        if params.inf_norm() > 1e4 {
            diverged = true;
            break;
        }
    }

    Ok(TrainResult {
        curve,
        final_params: params,
        diverged,
    })
}
