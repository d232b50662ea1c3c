//! Tabular MDPs, policies, policy-induced chains and the absorbing-chain
//! decomposition.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{factor_guarded, Matrix};

/// Tolerance for probability-simplex validation.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// A finite MDP given by explicit transition and mean-reward tables.
///
/// `transition[x][a][y]` is the probability of moving to `y` when taking
/// action `a` in state `x`. Rewards are stored as noiseless means;
/// multiplicative reward noise (when `reward_noise_std > 0`) is applied only
/// at simulation time, and sampled rewards are clamped to `[0, r_max]`.
/// Exact oracles always consume the means.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabularMdp {
    pub num_states: usize,
    pub num_actions: usize,
    pub transition: Vec<Vec<Vec<f64>>>,
    pub reward_mean: Vec<Vec<f64>>,
    pub r_max: f64,
    pub reward_noise_std: f64,
}

impl TabularMdp {
    pub fn new(
        transition: Vec<Vec<Vec<f64>>>,
        reward_mean: Vec<Vec<f64>>,
        r_max: f64,
        reward_noise_std: f64,
    ) -> Result<Self> {
        let num_states = transition.len();
        let num_actions = transition.first().map_or(0, Vec::len);
        let mdp = TabularMdp {
            num_states,
            num_actions,
            transition,
            reward_mean,
            r_max,
            reward_noise_std,
        };
        mdp.validate()?;
        Ok(mdp)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_states < 1 || self.num_actions < 1 {
            return Err(Error::Parameter(
                "MDP needs at least one state and one action".into(),
            ));
        }
        if self.r_max <= 0.0 || !self.r_max.is_finite() {
            return Err(Error::Parameter("r_max must be positive".into()));
        }
        if self.reward_noise_std < 0.0 || !self.reward_noise_std.is_finite() {
            return Err(Error::Parameter("reward_noise_std must be >= 0".into()));
        }
        if self.transition.len() != self.num_states || self.reward_mean.len() != self.num_states {
            return Err(Error::Parameter(
                "table sizes disagree with num_states".into(),
            ));
        }
        for x in 0..self.num_states {
            if self.transition[x].len() != self.num_actions
                || self.reward_mean[x].len() != self.num_actions
            {
                return Err(Error::Parameter(
                    "table sizes disagree with num_actions".into(),
                ));
            }
            for a in 0..self.num_actions {
                let row = &self.transition[x][a];
                if row.len() != self.num_states {
                    return Err(Error::Parameter("transition row has wrong length".into()));
                }
                if row.iter().any(|p| *p < 0.0 || !p.is_finite()) {
                    return Err(Error::Parameter(format!(
                        "negative or non-finite transition probability at ({x},{a})"
                    )));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > SIMPLEX_TOL {
                    return Err(Error::Parameter(format!(
                        "transition row ({x},{a}) sums to {sum}, not 1"
                    )));
                }
                let r = self.reward_mean[x][a];
                if !(0.0..=self.r_max).contains(&r) {
                    return Err(Error::Parameter(format!(
                        "reward mean at ({x},{a}) is {r}, outside [0, {}]",
                        self.r_max
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn transition_prob(&self, x: usize, a: usize, y: usize) -> f64 {
        self.transition[x][a][y]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mdp: TabularMdp = serde_json::from_str(text)?;
        mdp.validate()?;
        Ok(mdp)
    }
}

/// A stationary stochastic policy: `probs[x][a]` is the probability of
/// action `a` in state `x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyTable {
    pub probs: Vec<Vec<f64>>,
}

impl PolicyTable {
    pub fn new(probs: Vec<Vec<f64>>) -> Result<Self> {
        let table = PolicyTable { probs };
        table.validate()?;
        Ok(table)
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        let p = 1.0 / num_actions as f64;
        PolicyTable {
            probs: vec![vec![p; num_actions]; num_states],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let num_actions = self.probs.first().map_or(0, Vec::len);
        if num_actions == 0 {
            return Err(Error::Parameter("policy table is empty".into()));
        }
        for (x, row) in self.probs.iter().enumerate() {
            if row.len() != num_actions {
                return Err(Error::Parameter("ragged policy table".into()));
            }
            if row.iter().any(|p| *p < 0.0 || !p.is_finite()) {
                return Err(Error::Parameter(format!(
                    "negative or non-finite policy probability in state {x}"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > SIMPLEX_TOL {
                return Err(Error::Parameter(format!(
                    "policy row {x} sums to {sum}, not 1"
                )));
            }
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.probs.len()
    }

    pub fn num_actions(&self) -> usize {
        self.probs.first().map_or(0, Vec::len)
    }
}

/// The Markov chain a policy induces on an MDP.
///
/// `p_pi` is the state chain, `p_bar` the state-action chain with entries
/// `p_bar[(x,a),(y,b)] = p(y|x,a) * pi(b|y)`, `r_pi` the policy-averaged
/// state rewards and `r_sa` the flat state-action reward vector.
#[derive(Clone, Debug)]
pub struct InducedChain {
    pub p_pi: Matrix,
    pub r_pi: Vec<f64>,
    pub p_bar: Matrix,
    pub r_sa: Vec<f64>,
    pub policy: PolicyTable,
}

impl InducedChain {
    pub fn num_states(&self) -> usize {
        self.p_pi.rows()
    }

    pub fn num_actions(&self) -> usize {
        self.policy.num_actions()
    }

    /// Flat index of a state-action pair in `p_bar` / `r_sa`.
    pub fn sa_index(&self, x: usize, a: usize) -> usize {
        x * self.num_actions() + a
    }
}

/// Build the policy-induced chain. Uses reward means only; reward noise is
/// a simulation-time concern.
pub fn induce(mdp: &TabularMdp, policy: &PolicyTable) -> Result<InducedChain> {
    if policy.num_states() != mdp.num_states || policy.num_actions() != mdp.num_actions {
        return Err(Error::Parameter(format!(
            "policy is {}x{}, MDP is {}x{}",
            policy.num_states(),
            policy.num_actions(),
            mdp.num_states,
            mdp.num_actions
        )));
    }
    let s = mdp.num_states;
    let a_n = mdp.num_actions;

    let mut p_pi = Matrix::zeros(s, s);
    let mut r_pi = vec![0.0; s];
    for x in 0..s {
        for a in 0..a_n {
            let pa = policy.probs[x][a];
            r_pi[x] += pa * mdp.reward_mean[x][a];
            if pa == 0.0 {
                continue;
            }
            for y in 0..s {
                let v = p_pi.get(x, y) + pa * mdp.transition[x][a][y];
                p_pi.set(x, y, v);
            }
        }
    }

    let sa = s * a_n;
    let mut p_bar = Matrix::zeros(sa, sa);
    let mut r_sa = vec![0.0; sa];
    for x in 0..s {
        for a in 0..a_n {
            let row = x * a_n + a;
            r_sa[row] = mdp.reward_mean[x][a];
            for y in 0..s {
                let p = mdp.transition[x][a][y];
                if p == 0.0 {
                    continue;
                }
                for b in 0..a_n {
                    p_bar.set(row, y * a_n + b, p * policy.probs[y][b]);
                }
            }
        }
    }

    Ok(InducedChain {
        p_pi,
        r_pi,
        p_bar,
        r_sa,
        policy: policy.clone(),
    })
}

/// Transient/absorbing split of an induced chain, with the fundamental
/// matrix `N = (I - P_transient)^{-1}` of the transient block.
#[derive(Clone, Debug)]
pub struct AbsorbingDecomposition {
    pub absorbing_states: BTreeSet<usize>,
    /// Sorted list of transient states; row/column `i` of the transient
    /// block corresponds to `transient_states[i]`.
    pub transient_states: Vec<usize>,
    pub transient_block: Matrix,
    pub transient_rewards: Vec<f64>,
    pub fundamental_matrix: Matrix,
    pub num_states: usize,
}

impl AbsorbingDecomposition {
    /// Position of `state` among the transient states, if transient.
    pub fn transient_index(&self, state: usize) -> Option<usize> {
        self.transient_states.binary_search(&state).ok()
    }
}

/// Validate the declared absorbing set against the chain and split it.
///
/// Absorbing states are declared, not inferred. Each must self-loop under
/// every action and carry zero policy-averaged reward; the remaining block
/// must actually be transient, which is detected through the solvability of
/// `I - P_transient`.
pub fn absorbing_decompose(
    chain: &InducedChain,
    absorbing_states: &BTreeSet<usize>,
) -> Result<AbsorbingDecomposition> {
    let s = chain.num_states();
    let a_n = chain.num_actions();
    if let Some(&bad) = absorbing_states.iter().find(|&&x| x >= s) {
        return Err(Error::Parameter(format!(
            "absorbing state {bad} out of range for {s} states"
        )));
    }
    for &x in absorbing_states {
        // Self-loop under every action: row sums of p_bar restricted to the
        // same state recover p(x|x,a).
        for a in 0..a_n {
            let row = chain.sa_index(x, a);
            let self_mass: f64 = (0..a_n)
                .map(|b| chain.p_bar.get(row, chain.sa_index(x, b)))
                .sum();
            if (self_mass - 1.0).abs() > SIMPLEX_TOL {
                return Err(Error::Assumption(format!(
                    "state {x} is declared absorbing but p({x}|{x},{a}) = {self_mass}"
                )));
            }
        }
        if chain.r_pi[x].abs() > SIMPLEX_TOL {
            return Err(Error::Assumption(format!(
                "absorbing state {x} has nonzero reward {}",
                chain.r_pi[x]
            )));
        }
    }

    let transient_states: Vec<usize> = (0..s).filter(|x| !absorbing_states.contains(x)).collect();
    let t = transient_states.len();
    let mut transient_block = Matrix::zeros(t, t);
    let mut transient_rewards = vec![0.0; t];
    for (i, &x) in transient_states.iter().enumerate() {
        transient_rewards[i] = chain.r_pi[x];
        for (j, &y) in transient_states.iter().enumerate() {
            transient_block.set(i, j, chain.p_pi.get(x, y));
        }
    }

    let fundamental_matrix = if t == 0 {
        Matrix::zeros(0, 0)
    } else {
        let i_minus_p = transient_block.resolvent_operand(1.0);
        let lu = factor_guarded(&i_minus_p, "transient block I - P").map_err(|e| {
            Error::NonAbsorbing(format!(
                "transient block does not reach the absorbing set ({e})"
            ))
        })?;
        let mut n = Matrix::zeros(t, t);
        for j in 0..t {
            let mut e = vec![0.0; t];
            e[j] = 1.0;
            let col = lu.solve(&e);
            for i in 0..t {
                n.set(i, j, col[i]);
            }
        }
        // N (I - P) = I must hold to 1e-8 or the split is not trustworthy.
        let check = n.matmul(&i_minus_p);
        for i in 0..t {
            for j in 0..t {
                let want = if i == j { 1.0 } else { 0.0 };
                if (check.get(i, j) - want).abs() > 1e-8 {
                    return Err(Error::NonAbsorbing(
                        "fundamental matrix failed the N(I - P) = I check".into(),
                    ));
                }
            }
        }
        n
    };

    Ok(AbsorbingDecomposition {
        absorbing_states: absorbing_states.clone(),
        transient_states,
        transient_block,
        transient_rewards,
        fundamental_matrix,
        num_states: s,
    })
}

/// Draw a random MDP: transition rows from a symmetric Dirichlet, reward
/// means from Uniform(0,1), multiplicative reward noise of width
/// `reward_noise_std`. Sampled rewards are later clamped to `[0, r_max]`
/// with `r_max = 1 + 6 * reward_noise_std` so the reward range stays
/// bounded despite the Gaussian noise.
pub fn random_mdp_with_noise(
    num_states: usize,
    num_actions: usize,
    dirichlet_alpha: f64,
    reward_noise_std: f64,
    seed: u64,
) -> Result<TabularMdp> {
    if num_states < 2 {
        return Err(Error::Parameter(
            "random MDP needs at least 2 states".into(),
        ));
    }
    if num_actions < 1 {
        return Err(Error::Parameter(
            "random MDP needs at least 1 action".into(),
        ));
    }
    if dirichlet_alpha <= 0.0 || !dirichlet_alpha.is_finite() {
        return Err(Error::Parameter("dirichlet alpha must be > 0".into()));
    }
    if reward_noise_std < 0.0 || !reward_noise_std.is_finite() {
        return Err(Error::Parameter("reward noise std must be >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Dirichlet rows through the Gamma-ratio construction: S independent
    // Gamma(alpha, 1) draws, normalized.
    let gamma_dist = Gamma::new(dirichlet_alpha, 1.0)
        .map_err(|e| Error::Parameter(format!("bad Dirichlet parameter: {e}")))?;

    let mut transition = Vec::with_capacity(num_states);
    for _ in 0..num_states {
        let mut per_action = Vec::with_capacity(num_actions);
        for _ in 0..num_actions {
            let row = loop {
                let draws: Vec<f64> = (0..num_states)
                    .map(|_| gamma_dist.sample(&mut rng))
                    .collect();
                let sum: f64 = draws.iter().sum();
                // With very small alpha, individual draws can underflow to
                // zero; redraw in the (practically unreachable) event that
                // the whole row did.
                if sum > 0.0 {
                    break draws.iter().map(|d| d / sum).collect::<Vec<f64>>();
                }
            };
            per_action.push(row);
        }
        transition.push(per_action);
    }

    let mut reward_mean = Vec::with_capacity(num_states);
    for _ in 0..num_states {
        let row: Vec<f64> = (0..num_actions)
            .map(|_| rand::Rng::random_range(&mut rng, 0.0..1.0))
            .collect();
        reward_mean.push(row);
    }

    let r_max = 1.0 + 6.0 * reward_noise_std;
    TabularMdp::new(transition, reward_mean, r_max, reward_noise_std)
}

/// [`random_mdp_with_noise`] with the default multiplicative noise width 0.2.
pub fn random_mdp(
    num_states: usize,
    num_actions: usize,
    dirichlet_alpha: f64,
    seed: u64,
) -> Result<TabularMdp> {
    random_mdp_with_noise(num_states, num_actions, dirichlet_alpha, 0.2, seed)
}
