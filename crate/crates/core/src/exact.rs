//! Closed-form linear-algebra oracles.
//!
//! Everything here is exact up to floating point: values, Q-values and
//! visitation distributions at any admissible discount, their truncated
//! expansions in the discount gap, the mixture-weight vectors relating two
//! discounts, residual bounds and the analytic update-weight schedules.
//!
//! Truncated expansions are evaluated through the increment recursion
//! `delta_{k+1} = (g' - g) (I - g P)^{-1} P delta_k` — one linear solve per
//! order against a single cached factorization, never through matrix
//! powers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{factor_guarded, LuFactor, Matrix};
use crate::mdp::{AbsorbingDecomposition, InducedChain, SIMPLEX_TOL};

/// The `(gamma, gamma', K)` triple governing an expansion.
///
/// `gamma_prime = 1` is admissible only together with an absorbing
/// decomposition (see [`taylor_value_undiscounted`]). `gamma_prime = gamma`
/// is permitted as the degenerate zero-gap case.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionConfig {
    pub gamma: f64,
    pub gamma_prime: f64,
    pub order_k: usize,
}

impl ExpansionConfig {
    pub fn new(gamma: f64, gamma_prime: f64, order_k: usize) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::Domain(format!("gamma = {gamma} must lie in [0, 1)")));
        }
        if !(gamma..=1.0).contains(&gamma_prime) {
            return Err(Error::Domain(format!(
                "gamma_prime = {gamma_prime} must lie in [gamma, 1] = [{gamma}, 1]"
            )));
        }
        Ok(ExpansionConfig {
            gamma,
            gamma_prime,
            order_k,
        })
    }

    /// Discount gap `gamma' - gamma`.
    pub fn gap(&self) -> f64 {
        self.gamma_prime - self.gamma
    }

    /// Per-order error contraction `(gamma' - gamma) / (1 - gamma)`.
    pub fn contraction_ratio(&self) -> f64 {
        self.gap() / (1.0 - self.gamma)
    }
}

/// Which discount a vector belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum DiscountTag {
    Exact {
        gamma: f64,
    },
    Expansion {
        gamma: f64,
        gamma_prime: f64,
        order: usize,
    },
    Undiscounted,
}

/// State-value vector.
#[derive(Clone, Debug)]
pub struct ValueVector {
    pub values: Vec<f64>,
    pub tag: DiscountTag,
}

/// State-action value vector, flat over `(state, action)` pairs in the
/// same order as [`InducedChain::sa_index`].
#[derive(Clone, Debug)]
pub struct QVector {
    pub values: Vec<f64>,
    pub tag: DiscountTag,
}

impl QVector {
    /// `V(x) = sum_a pi(a|x) Q(x,a)`.
    pub fn state_values(&self, chain: &InducedChain) -> Vec<f64> {
        let s = chain.num_states();
        let a_n = chain.num_actions();
        (0..s)
            .map(|x| {
                (0..a_n)
                    .map(|a| chain.policy.probs[x][a] * self.values[chain.sa_index(x, a)])
                    .sum()
            })
            .collect()
    }

    /// Advantage view `A(x,a) = Q(x,a) - V(x)`.
    pub fn advantage(&self, chain: &InducedChain) -> Vec<f64> {
        let v = self.state_values(chain);
        let a_n = chain.num_actions();
        self.values
            .iter()
            .enumerate()
            .map(|(i, q)| q - v[i / a_n])
            .collect()
    }
}

/// Discounted visitation distribution from a start state. For truncated
/// expansions the entries need not sum to one.
#[derive(Clone, Debug)]
pub struct VisitationVector {
    pub probs: Vec<f64>,
    pub start: usize,
    pub tag: DiscountTag,
}

/// Signed state weights relating values at two discounts; not a
/// distribution in general.
#[derive(Clone, Debug)]
pub struct RhoWeightVector {
    pub weights: Vec<f64>,
    pub start: usize,
}

fn check_discount(gamma: f64) -> Result<()> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::Domain(format!(
            "discount {gamma} outside [0, 1); gamma' = 1 needs an absorbing decomposition"
        )));
    }
    Ok(())
}

fn check_start(chain: &InducedChain, start: usize) -> Result<()> {
    if start >= chain.num_states() {
        return Err(Error::Parameter(format!(
            "start state {start} out of range for {} states",
            chain.num_states()
        )));
    }
    Ok(())
}

fn resolvent_lu(p: &Matrix, gamma: f64) -> Result<LuFactor> {
    factor_guarded(&p.resolvent_operand(gamma), "I - gamma * P")
}

/// `sum_{k=0}^{order} gap^k ((I - g P)^{-1} P)^k base` via the increment
/// recursion. `order = 0` returns `base` unchanged.
fn primal_expansion(p: &Matrix, lu: &LuFactor, base: Vec<f64>, gap: f64, order: usize) -> Vec<f64> {
    let mut total = base.clone();
    let mut delta = base;
    for _ in 0..order {
        let pv = p.matvec(&delta);
        delta = lu.solve(&pv);
        for (t, d) in delta.iter_mut().enumerate() {
            *d *= gap;
            total[t] += *d;
        }
    }
    total
}

/// Transposed variant: `sum_k gap^k ((I - g P^T)^{-1} P^T)^k base`.
fn dual_expansion(p: &Matrix, lu: &LuFactor, base: Vec<f64>, gap: f64, order: usize) -> Vec<f64> {
    let mut total = base.clone();
    let mut delta = base;
    for _ in 0..order {
        let pv = p.tr_matvec(&delta);
        delta = lu.solve_transpose(&pv);
        for (t, d) in delta.iter_mut().enumerate() {
            *d *= gap;
            total[t] += *d;
        }
    }
    total
}

/// Exact value vector at discount `gamma`: solves `(I - g P) V = r`.
pub fn value(chain: &InducedChain, gamma: f64) -> Result<ValueVector> {
    check_discount(gamma)?;
    let lu = resolvent_lu(&chain.p_pi, gamma)?;
    Ok(ValueVector {
        values: lu.solve(&chain.r_pi),
        tag: DiscountTag::Exact { gamma },
    })
}

/// Undiscounted value of an absorbing chain: `N r` on the transient
/// states, zero on the absorbing ones.
pub fn value_undiscounted(dec: &AbsorbingDecomposition) -> ValueVector {
    let mut values = vec![0.0; dec.num_states];
    if !dec.transient_states.is_empty() {
        let vt = dec.fundamental_matrix.matvec(&dec.transient_rewards);
        for (i, &x) in dec.transient_states.iter().enumerate() {
            values[x] = vt[i];
        }
    }
    ValueVector {
        values,
        tag: DiscountTag::Undiscounted,
    }
}

/// Exact Q-vector at discount `gamma` over the state-action chain.
pub fn q_value(chain: &InducedChain, gamma: f64) -> Result<QVector> {
    check_discount(gamma)?;
    let lu = resolvent_lu(&chain.p_bar, gamma)?;
    Ok(QVector {
        values: lu.solve(&chain.r_sa),
        tag: DiscountTag::Exact { gamma },
    })
}

/// Discounted visitation distribution: solves the balance equation
/// `d = (1 - g) delta_x + g P^T d`.
pub fn visitation(chain: &InducedChain, start: usize, gamma: f64) -> Result<VisitationVector> {
    check_discount(gamma)?;
    check_start(chain, start)?;
    let lu = resolvent_lu(&chain.p_pi, gamma)?;
    let mut rhs = vec![0.0; chain.num_states()];
    rhs[start] = 1.0 - gamma;
    Ok(VisitationVector {
        probs: lu.solve_transpose(&rhs),
        start,
        tag: DiscountTag::Exact { gamma },
    })
}

/// Truncated expansion of the value function at `gamma'` around `gamma`.
/// `K = 0` returns the exact value at `gamma` bitwise.
pub fn taylor_value(chain: &InducedChain, cfg: &ExpansionConfig) -> Result<ValueVector> {
    if cfg.gamma_prime >= 1.0 {
        return Err(Error::Domain(
            "gamma_prime = 1 requires an absorbing decomposition; use taylor_value_undiscounted"
                .into(),
        ));
    }
    let lu = resolvent_lu(&chain.p_pi, cfg.gamma)?;
    let base = lu.solve(&chain.r_pi);
    let values = primal_expansion(&chain.p_pi, &lu, base, cfg.gap(), cfg.order_k);
    Ok(ValueVector {
        values,
        tag: DiscountTag::Expansion {
            gamma: cfg.gamma,
            gamma_prime: cfg.gamma_prime,
            order: cfg.order_k,
        },
    })
}

/// Truncated expansion toward the undiscounted value (`gamma' = 1`) of an
/// absorbing chain. The recursion runs on the full chain; absorbing
/// entries carry zero reward, so their increments vanish identically.
pub fn taylor_value_undiscounted(
    chain: &InducedChain,
    dec: &AbsorbingDecomposition,
    cfg: &ExpansionConfig,
) -> Result<ValueVector> {
    if cfg.gamma_prime != 1.0 {
        return Err(Error::Parameter(
            "taylor_value_undiscounted requires gamma_prime = 1".into(),
        ));
    }
    if dec.num_states != chain.num_states() {
        return Err(Error::Parameter(
            "decomposition and chain disagree on the state count".into(),
        ));
    }
    for &x in &dec.absorbing_states {
        if (chain.p_pi.get(x, x) - 1.0).abs() > SIMPLEX_TOL || chain.r_pi[x].abs() > SIMPLEX_TOL {
            return Err(Error::Assumption(format!(
                "state {x} is not absorbing with zero reward under this chain"
            )));
        }
    }
    let lu = resolvent_lu(&chain.p_pi, cfg.gamma)?;
    let base = lu.solve(&chain.r_pi);
    let values = primal_expansion(&chain.p_pi, &lu, base, cfg.gap(), cfg.order_k);
    Ok(ValueVector {
        values,
        tag: DiscountTag::Expansion {
            gamma: cfg.gamma,
            gamma_prime: 1.0,
            order: cfg.order_k,
        },
    })
}

/// Worst-case gap between the exact value at `gamma'` and its order-`K`
/// expansion: `((g' - g) / (1 - g))^{K+1} * r_max / (1 - g')`.
pub fn residual_bound(cfg: &ExpansionConfig, r_max: f64) -> Result<f64> {
    if cfg.gamma_prime >= 1.0 {
        return Err(Error::Domain(
            "residual bound is vacuous (infinite) at gamma_prime = 1".into(),
        ));
    }
    Ok(cfg.contraction_ratio().powi(cfg.order_k as i32 + 1) * r_max / (1.0 - cfg.gamma_prime))
}

/// Truncated expansion of the Q-function at `gamma'` around `gamma`.
pub fn taylor_q(chain: &InducedChain, cfg: &ExpansionConfig) -> Result<QVector> {
    if cfg.gamma_prime >= 1.0 {
        return Err(Error::Domain(
            "gamma_prime = 1 is not supported for Q expansions".into(),
        ));
    }
    let lu = resolvent_lu(&chain.p_bar, cfg.gamma)?;
    let base = lu.solve(&chain.r_sa);
    let values = primal_expansion(&chain.p_bar, &lu, base, cfg.gap(), cfg.order_k);
    Ok(QVector {
        values,
        tag: DiscountTag::Expansion {
            gamma: cfg.gamma,
            gamma_prime: cfg.gamma_prime,
            order: cfg.order_k,
        },
    })
}

/// Truncated dual expansion of the visitation distribution at `gamma'`.
/// Entries need not sum to one at finite order.
pub fn taylor_visitation(
    chain: &InducedChain,
    start: usize,
    cfg: &ExpansionConfig,
) -> Result<VisitationVector> {
    if cfg.gamma_prime >= 1.0 {
        return Err(Error::Domain(
            "gamma_prime = 1 is not supported for visitation expansions".into(),
        ));
    }
    check_start(chain, start)?;
    let lu = resolvent_lu(&chain.p_pi, cfg.gamma)?;
    let mut rhs = vec![0.0; chain.num_states()];
    rhs[start] = 1.0 - cfg.gamma;
    let base = lu.solve_transpose(&rhs);
    let mut probs = dual_expansion(&chain.p_pi, &lu, base, cfg.gap(), cfg.order_k);
    let scale = (1.0 - cfg.gamma_prime) / (1.0 - cfg.gamma);
    for p in probs.iter_mut() {
        *p *= scale;
    }
    Ok(VisitationVector {
        probs,
        start,
        tag: DiscountTag::Expansion {
            gamma: cfg.gamma,
            gamma_prime: cfg.gamma_prime,
            order: cfg.order_k,
        },
    })
}

/// Exact mixture weights: `rho = (I - g P^T)(I - g' P^T)^{-1} delta_x`,
/// satisfying `rho^T V_g = V_{g'}(x)`.
pub fn rho_weight(
    chain: &InducedChain,
    start: usize,
    gamma: f64,
    gamma_prime: f64,
) -> Result<RhoWeightVector> {
    check_discount(gamma)?;
    check_start(chain, start)?;
    if gamma_prime >= 1.0 {
        return Err(Error::Domain(
            "mixture weights may be undefined at gamma_prime = 1".into(),
        ));
    }
    if gamma_prime < gamma {
        return Err(Error::Domain(format!(
            "gamma_prime = {gamma_prime} must be >= gamma = {gamma}"
        )));
    }
    let lu = resolvent_lu(&chain.p_pi, gamma_prime)?;
    let mut delta = vec![0.0; chain.num_states()];
    delta[start] = 1.0;
    let y = lu.solve_transpose(&delta);
    let py = chain.p_pi.tr_matvec(&y);
    let weights = y.iter().zip(&py).map(|(yi, pi)| yi - gamma * pi).collect();
    Ok(RhoWeightVector { weights, start })
}

/// Truncated expansion of the mixture weights:
/// `rho_K = sum_{k<=K} (gap (I - g P^T)^{-1} P^T)^k delta_x`, satisfying
/// `rho_K^T V_g = V_K(x)`.
pub fn taylor_rho(
    chain: &InducedChain,
    start: usize,
    cfg: &ExpansionConfig,
) -> Result<RhoWeightVector> {
    if cfg.gamma_prime >= 1.0 {
        return Err(Error::Domain(
            "gamma_prime = 1 is not supported for weight expansions".into(),
        ));
    }
    check_start(chain, start)?;
    let lu = resolvent_lu(&chain.p_pi, cfg.gamma)?;
    let mut base = vec![0.0; chain.num_states()];
    base[start] = 1.0;
    let weights = dual_expansion(&chain.p_pi, &lu, base, cfg.gap(), cfg.order_k);
    Ok(RhoWeightVector { weights, start })
}

/// State-weight schedule of the order-`K` expansion expressed over elapsed
/// time: `f(K, t) = sum_{u=1}^{min(K,t)} gap^u g^{t-u} C(t-1, u-1)`, with
/// `f(0, t) = f(K, 0) = 0`. Defined for `gamma <= gamma_prime`.
pub fn f_weight(k_order: usize, t: usize, gamma: f64, gamma_prime: f64) -> f64 {
    let gap = gamma_prime - gamma;
    debug_assert!(gap >= 0.0, "f_weight requires gamma <= gamma_prime");
    let m = k_order.min(t);
    if t == 0 || m == 0 || gap <= 0.0 {
        return 0.0;
    }
    if gamma == 0.0 {
        // gamma^{t-u} survives only at u = t, which needs K >= t.
        return if k_order >= t {
            gap.powi(t as i32)
        } else {
            0.0
        };
    }
    // Terms in log space; binomial prefix updated multiplicatively so large
    // t stays accurate.
    let ln_gap = gap.ln();
    let ln_g = gamma.ln();
    let mut ln_binom = 0.0; // ln C(t-1, 0)
    let mut logs = Vec::with_capacity(m);
    let mut max_log = f64::NEG_INFINITY;
    for u in 1..=m {
        if u >= 2 {
            // C(t-1, u-1) = C(t-1, u-2) * (t-u+1) / (u-1)
            ln_binom += ((t - u + 1) as f64 / (u - 1) as f64).ln();
        }
        let l = ln_binom + u as f64 * ln_gap + (t - u) as f64 * ln_g;
        max_log = max_log.max(l);
        logs.push(l);
    }
    let sum: f64 = logs.iter().map(|l| (l - max_log).exp()).sum();
    max_log.exp() * sum
}

/// Per-step weight applied to the time-`t` local gradient by the order-`K`
/// update: `w_K(t) = sum_{k=0}^{min(K,t)} C(t,k) gap^k g^{t-k}`.
/// Endpoints: `w_0(t) = g^t` and `w_K(t) = (g')^t` once `K >= t`.
/// Defined for `gamma <= gamma_prime`.
pub fn update_weight(k_order: usize, t: usize, gamma: f64, gamma_prime: f64) -> f64 {
    debug_assert!(
        gamma_prime >= gamma,
        "update_weight requires gamma <= gamma_prime"
    );
    if t == 0 {
        return 1.0;
    }
    if k_order >= t {
        // complete binomial sum: (gap + gamma)^t
        return gamma_prime.powi(t as i32);
    }
    if k_order == 0 || gamma_prime <= gamma {
        return gamma.powi(t as i32);
    }
    if gamma == 0.0 {
        // only the k = t term is nonzero, and k_order < t excludes it
        return 0.0;
    }
    let gap = gamma_prime - gamma;
    let ln_gap = gap.ln();
    let ln_g = gamma.ln();
    let mut ln_binom = 0.0; // ln C(t, 0)
    let mut logs = Vec::with_capacity(k_order + 1);
    let mut max_log = f64::NEG_INFINITY;
    for k in 0..=k_order {
        if k >= 1 {
            // C(t, k) = C(t, k-1) * (t-k+1) / k
            ln_binom += ((t - k + 1) as f64 / k as f64).ln();
        }
        let l = ln_binom + k as f64 * ln_gap + (t - k) as f64 * ln_g;
        max_log = max_log.max(l);
        logs.push(l);
    }
    let sum: f64 = logs.iter().map(|l| (l - max_log).exp()).sum();
    max_log.exp() * sum
}

/// Number of ways to write `n` as an ordered sum of `k` non-negative
/// integers: `C(n+k-1, k-1)`, computed exactly with overflow checks.
pub fn combination_count(n: u64, k: u64) -> Result<u64> {
    if k < 1 {
        return Err(Error::Parameter("composition count needs k >= 1".into()));
    }
    let top = n
        .checked_add(k - 1)
        .ok_or_else(|| Error::Range("n + k - 1 overflows".into()))?;
    binomial_exact(top, k - 1)
}

fn binomial_exact(n: u64, r: u64) -> Result<u64> {
    if r > n {
        return Ok(0);
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 1..=r {
        acc = acc
            .checked_mul((n - r + i) as u128)
            .ok_or_else(|| Error::Range(format!("C({n}, {r}) overflows")))?;
        acc /= i as u128;
    }
    u64::try_from(acc).map_err(|_| Error::Range(format!("C({n}, {r}) exceeds u64")))
}
