//! Finite-sample error propagation for phased TD-style estimation of the
//! discount-gap expansions, with an empirical coverage checker.
//!
//! The analysis models a subroutine that estimates per-state values with
//! error `A(g, delta)` plus a contraction `B(g)` on the previous phase's
//! error. Plugging the subroutine into an order-`K` expansion multiplies
//! both terms by `eps = sum_{k<=K} (g'-g)^k`, adds a concentration width
//! `U` for the sampled plug-in states, and adds the expected truncation
//! gap `E(g, g', K)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{self, ExpansionConfig};
use crate::mdp::{induce, PolicyTable, TabularMdp};
use crate::seed::split_seed;

/// Inputs of one phased error-propagation step.
#[derive(Clone, Debug, Serialize)]
pub struct PhasedTdConfig {
    /// Samples per state per phase.
    pub n: usize,
    /// Failure probability.
    pub delta: f64,
    pub cfg: ExpansionConfig,
    pub r_max: f64,
    /// Subroutine error constant `A(g, delta)`.
    pub a_gamma_delta: f64,
    /// Subroutine contraction `B(g)` in `[0, 1)`.
    pub b_gamma: f64,
}

impl PhasedTdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::Parameter("n must be >= 1".into()));
        }
        if self.cfg.gamma_prime >= 1.0 {
            return Err(Error::Parameter(
                "the phased analysis requires gamma_prime < 1".into(),
            ));
        }
        if !(0.0 < self.delta && self.delta < 1.0) {
            return Err(Error::Parameter("delta must lie in (0, 1)".into()));
        }
        if !(0.0..1.0).contains(&self.b_gamma) {
            return Err(Error::Parameter("B(gamma) must lie in [0, 1)".into()));
        }
        if self.a_gamma_delta < 0.0 {
            return Err(Error::Parameter("A(gamma, delta) must be >= 0".into()));
        }
        Ok(())
    }
}

/// Geometric-sum factor `eps = (1 - (g'-g)^{K+1}) / (1 - (g'-g))`, with the
/// `g' - g = 1` limit `K + 1`. Always in `[1, 1/(1 - g' + g)]`.
pub fn epsilon_factor(cfg: &ExpansionConfig) -> f64 {
    let gap = cfg.gap();
    if gap == 0.0 {
        return 1.0;
    }
    if gap >= 1.0 {
        return (cfg.order_k + 1) as f64;
    }
    (1.0 - gap.powi(cfg.order_k as i32 + 1)) / (1.0 - gap)
}

/// Union-bound concentration width of the sampled plug-in terms:
/// `sqrt(2 log(2(K+1)/delta) / n)` for `K >= 1`, zero at `K = 0` where no
/// plug-in state is sampled.
pub fn concentration_width(k_order: usize, delta: f64, n: usize) -> f64 {
    if k_order == 0 {
        return 0.0;
    }
    (2.0 * (2.0 * (k_order as f64 + 1.0) / delta).ln() / n as f64).sqrt()
}

/// Expected truncation gap used inside the phased bound:
/// `((g'-g)/(1-g))^{K+1} * r_max / (1-g')`.
///
/// This is the residual-bound constant and a genuine upper bound on the
/// bias. The analysis-style variant with a `1-g` denominator
/// ([`expected_gap_error_analysis`]) understates the realized bias (the
/// value scale at the target discount is `r_max/(1-g')`), which would make
/// the coverage guarantee false; it stays exposed for reference only.
pub fn expected_gap_error(cfg: &ExpansionConfig, r_max: f64) -> f64 {
    cfg.contraction_ratio().powi(cfg.order_k as i32 + 1) * r_max / (1.0 - cfg.gamma_prime)
}

/// Analysis-stated gap constant with the `1-g` denominator. Not a valid
/// bias bound; see [`expected_gap_error`].
pub fn expected_gap_error_analysis(cfg: &ExpansionConfig, r_max: f64) -> f64 {
    cfg.contraction_ratio().powi(cfg.order_k as i32 + 1) * r_max / (1.0 - cfg.gamma)
}

/// One step of the error recursion.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BoundStep {
    /// `eps (A + U) + E + eps B * delta_prev`.
    pub bound: f64,
    /// Effective contraction `eps * B(gamma)`.
    pub contraction: f64,
    /// Set when `eps * B >= 1`; the bound is still returned.
    pub non_contractive: bool,
}

/// Propagate the phased error bound one step from `delta_prev`.
pub fn error_bound_step(pc: &PhasedTdConfig, delta_prev: f64) -> Result<BoundStep> {
    pc.validate()?;
    if delta_prev < 0.0 {
        return Err(Error::Parameter("delta_prev must be >= 0".into()));
    }
    let eps = epsilon_factor(&pc.cfg);
    let u = concentration_width(pc.cfg.order_k, pc.delta, pc.n);
    let e = expected_gap_error(&pc.cfg, pc.r_max);
    let contraction = eps * pc.b_gamma;
    Ok(BoundStep {
        bound: eps * (pc.a_gamma_delta + u) + e + contraction * delta_prev,
        contraction,
        non_contractive: contraction >= 1.0,
    })
}

/// Fixed point of the recursion when it contracts:
/// `(eps (A + U) + E) / (1 - eps B)`.
pub fn bound_fixed_point(pc: &PhasedTdConfig) -> Result<Option<f64>> {
    let step = error_bound_step(pc, 0.0)?;
    if step.non_contractive {
        return Ok(None);
    }
    Ok(Some(step.bound / (1.0 - step.contraction)))
}

/// Contraction coefficient of TD(lambda): `(1 - l) g / (1 - g l)`.
pub fn td_lambda_contraction(gamma: f64, lambda: f64) -> f64 {
    (1.0 - lambda) * gamma / (1.0 - gamma * lambda)
}

/// Hoeffding-style instantiation of the subroutine error `A(g, delta)` for
/// a Monte-Carlo phase with `n` rollouts per state, returns in
/// `[0, r_max/(1-g)]`, and a union bound over `num_states` states:
/// `r_max/(1-g) * sqrt(log(2 S / delta) / (2 n))`.
pub fn hoeffding_subroutine_error(
    r_max: f64,
    gamma: f64,
    num_states: usize,
    delta: f64,
    n: usize,
) -> f64 {
    r_max / (1.0 - gamma) * ((2.0 * num_states as f64 / delta).ln() / (2.0 * n as f64)).sqrt()
}

/// Result of an empirical coverage run.
#[derive(Clone, Debug, Serialize)]
pub struct CoverageReport {
    pub bound: f64,
    pub empirical_errors: Vec<f64>,
    pub coverage_fraction: f64,
    /// Guaranteed coverage minus binomial slack.
    pub threshold: f64,
    pub pass: bool,
}

/// Run `trials` independent phased estimations and report how often the
/// max-state error against the exact value at `gamma'` stays within the
/// bound.
///
/// Each trial honors the independence assumption of the analysis: the base
/// table is built from `n` independent rollouts per state, and every
/// plug-in sample of order `k` is an independent `k`-jump geometric walk.
/// The bound uses `delta_prev = 0` (fresh Monte-Carlo phase, so the
/// subroutine carries no inherited error).
pub fn empirical_coverage(
    mdp: &TabularMdp,
    policy: &PolicyTable,
    pc: &PhasedTdConfig,
    trials: usize,
    seed: u64,
) -> Result<CoverageReport> {
    pc.validate()?;
    if trials < 1 {
        return Err(Error::Parameter("coverage needs at least one trial".into()));
    }
    if mdp.num_states > 10 {
        return Err(Error::Parameter(
            "coverage measurement is exact-error based and limited to small MDPs (S <= 10)".into(),
        ));
    }
    let chain = induce(mdp, policy)?;
    let gamma = pc.cfg.gamma;
    let target = exact::value(&chain, pc.cfg.gamma_prime)?.values;
    let bound = error_bound_step(pc, 0.0)?.bound;

    // Rollout length making the truncation bias negligible next to A + U.
    let horizon = if gamma == 0.0 {
        1
    } else {
        let tail = 1e-10 * (1.0 - gamma) / pc.r_max.max(1.0);
        (tail.ln() / gamma.ln()).ceil().max(4.0) as usize
    };

    let s = mdp.num_states;
    let coeff = pc.cfg.contraction_ratio();
    let k_max = pc.cfg.order_k;
    let noise = if mdp.reward_noise_std > 0.0 {
        Some(Normal::new(0.0, mdp.reward_noise_std).expect("finite std"))
    } else {
        None
    };

    let mut errors = Vec::with_capacity(trials);
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(split_seed(seed, trial as u64));

        // Phase base table: n truncated Monte-Carlo returns per state.
        let mut base = vec![0.0; s];
        for (x, slot) in base.iter_mut().enumerate() {
            let mut acc = 0.0;
            for _ in 0..pc.n {
                acc += rollout_return(mdp, policy, x, horizon, gamma, &noise, &mut rng);
            }
            *slot = acc / pc.n as f64;
        }

        // Order-k plug-ins: independent k-jump walks through the state chain.
        let mut estimate = base.clone();
        for x in 0..s {
            let mut weight = 1.0;
            for k in 1..=k_max {
                weight *= coeff;
                let mut acc = 0.0;
                for _ in 0..pc.n {
                    let y = walk(&chain.p_pi, x, k, gamma, &mut rng);
                    acc += base[y];
                }
                estimate[x] += weight * acc / pc.n as f64;
            }
        }

        let err = estimate
            .iter()
            .zip(&target)
            .map(|(e, t)| (e - t).abs())
            .fold(0.0, f64::max);
        errors.push(err);
    }

    let hits = errors.iter().filter(|e| **e <= bound).count();
    let coverage_fraction = hits as f64 / trials as f64;
    let guarantee = if k_max == 0 {
        1.0 - pc.delta
    } else {
        1.0 - 2.0 * pc.delta
    };
    let threshold = guarantee - 2.0 * (pc.delta * (1.0 - pc.delta) / trials as f64).sqrt();
    Ok(CoverageReport {
        bound,
        coverage_fraction,
        threshold,
        pass: coverage_fraction >= threshold,
        empirical_errors: errors,
    })
}

fn rollout_return(
    mdp: &TabularMdp,
    policy: &PolicyTable,
    start: usize,
    horizon: usize,
    gamma: f64,
    noise: &Option<Normal<f64>>,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let mut x = start;
    let mut acc = 0.0;
    let mut disc = 1.0;
    for _ in 0..horizon {
        let a = pick(rng, &policy.probs[x]);
        let mean = mdp.reward_mean[x][a];
        let r = match noise {
            Some(dist) => (mean * (1.0 + dist.sample(rng))).clamp(0.0, mdp.r_max),
            None => mean,
        };
        acc += disc * r;
        disc *= gamma;
        if disc == 0.0 {
            break;
        }
        x = pick(rng, &mdp.transition[x][a]);
    }
    acc
}

/// Advance `jumps` geometric random times through the state chain.
fn walk(
    p_pi: &crate::linalg::Matrix,
    start: usize,
    jumps: usize,
    gamma: f64,
    rng: &mut ChaCha8Rng,
) -> usize {
    let mut x = start;
    for _ in 0..jumps {
        let tau = if gamma == 0.0 {
            1
        } else {
            loop {
                let u: f64 = rng.random();
                if u > 0.0 {
                    break 1 + (u.ln() / gamma.ln()).floor() as u64;
                }
            }
        };
        for _ in 0..tau {
            x = pick(rng, p_pi.row(x));
        }
    }
    x
}

fn pick(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::fixtures::toy_mdp;

    fn cfg(gamma: f64, gp: f64, k: usize) -> ExpansionConfig {
        ExpansionConfig::new(gamma, gp, k).unwrap()
    }

    #[test]
    fn epsilon_examples() {
        assert_eq!(epsilon_factor(&cfg(0.2, 0.8, 0)), 1.0);
        assert!((epsilon_factor(&cfg(0.2, 0.8, 1)) - 1.6).abs() < 1e-15);
        let limit = 1.0 / (1.0 - 0.6);
        assert!((epsilon_factor(&cfg(0.2, 0.8, 200)) - limit).abs() < 1e-9);
        // gap = 1 limit: K + 1
        assert_eq!(epsilon_factor(&cfg(0.0, 1.0, 4)), 5.0);
    }

    #[test]
    fn epsilon_is_monotone_and_bounded() {
        for (gamma, gp) in [(0.2, 0.8), (0.1, 0.5), (0.5, 0.95)] {
            let mut prev = 0.0;
            for k in 0..40 {
                let e = epsilon_factor(&cfg(gamma, gp, k));
                assert!(e >= 1.0);
                assert!(e <= 1.0 / (1.0 - gp + gamma) + 1e-12);
                assert!(e >= prev);
                prev = e;
            }
        }
    }

    #[test]
    fn concentration_width_examples() {
        assert_eq!(concentration_width(0, 0.1, 100), 0.0);
        let want = (2.0 * 40.0f64.ln() / 100.0).sqrt();
        assert!((concentration_width(1, 0.1, 100) - want).abs() < 1e-15);
        // exact 1/sqrt(n) scaling
        let u100 = concentration_width(3, 0.05, 100);
        let u400 = concentration_width(3, 0.05, 400);
        assert_eq!(u400, u100 / 2.0);
    }

    #[test]
    fn bound_step_reduces_to_pure_contraction() {
        let pc = PhasedTdConfig {
            n: 10,
            delta: 0.1,
            cfg: cfg(0.3, 0.3, 0),
            r_max: 1.0,
            a_gamma_delta: 0.0,
            b_gamma: 0.5,
        };
        // gap = 0 and K = 0: eps = 1, U = 0, E = 0
        let step = error_bound_step(&pc, 2.0).unwrap();
        assert!((step.bound - 1.0).abs() < 1e-15);
        assert!(!step.non_contractive);
    }

    #[test]
    fn bound_base_case_at_zero_gap() {
        // K = 0, n large, g' = g: bound = A + B * delta_prev
        let pc = PhasedTdConfig {
            n: 1_000_000,
            delta: 0.05,
            cfg: cfg(0.4, 0.4, 0),
            r_max: 1.0,
            a_gamma_delta: 0.25,
            b_gamma: 0.4,
        };
        let step = error_bound_step(&pc, 1.5).unwrap();
        assert!((step.bound - (0.25 + 0.4 * 1.5)).abs() < 1e-12);
    }

    #[test]
    fn fixed_point_is_reached_by_iteration() {
        let pc = PhasedTdConfig {
            n: 100,
            delta: 0.1,
            cfg: cfg(0.2, 0.8, 2),
            r_max: 1.0,
            a_gamma_delta: 0.3,
            b_gamma: 0.2,
        };
        let fp = bound_fixed_point(&pc).unwrap().unwrap();
        let mut delta = 10.0;
        for _ in 0..2000 {
            delta = error_bound_step(&pc, delta).unwrap().bound;
        }
        assert!((delta - fp).abs() < 1e-12);
        // monotone approach from above and below
        let mut lo = 0.0;
        let mut prev = f64::NEG_INFINITY;
        for _ in 0..50 {
            lo = error_bound_step(&pc, lo).unwrap().bound;
            assert!(lo >= prev);
            prev = lo;
        }
    }

    #[test]
    fn non_contractive_configuration_is_flagged() {
        let pc = PhasedTdConfig {
            n: 100,
            delta: 0.1,
            cfg: cfg(0.0, 0.99, 50),
            r_max: 1.0,
            a_gamma_delta: 0.0,
            b_gamma: 0.99,
        };
        let step = error_bound_step(&pc, 1.0).unwrap();
        assert!(step.non_contractive);
        assert!(bound_fixed_point(&pc).unwrap().is_none());
    }

    #[test]
    fn td_lambda_contraction_examples() {
        assert_eq!(td_lambda_contraction(0.7, 0.0), 0.7);
        assert_eq!(td_lambda_contraction(0.7, 1.0), 0.0);
        assert!((td_lambda_contraction(0.9, 0.5) - 0.45 / 0.55).abs() < 1e-15);
    }

    #[test]
    fn coverage_rejects_degenerate_inputs() {
        let mdp = toy_mdp(0);
        let policy = PolicyTable::uniform(10, 2);
        let pc = PhasedTdConfig {
            n: 10,
            delta: 0.1,
            cfg: cfg(0.2, 0.8, 1),
            r_max: mdp.r_max,
            a_gamma_delta: 0.1,
            b_gamma: 0.0,
        };
        assert!(matches!(
            empirical_coverage(&mdp, &policy, &pc, 0, 1),
            Err(Error::Parameter(_))
        ));
        let big = crate::mdp::random_mdp(12, 2, 0.5, 0).unwrap();
        let policy12 = PolicyTable::uniform(12, 2);
        assert!(matches!(
            empirical_coverage(&big, &policy12, &pc, 10, 1),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn coverage_holds_on_a_small_run() {
        let mdp = toy_mdp(1);
        let policy = PolicyTable::uniform(10, 2);
        let n = 200;
        let delta = 0.1;
        let pc = PhasedTdConfig {
            n,
            delta,
            cfg: cfg(0.2, 0.8, 1),
            r_max: mdp.r_max,
            a_gamma_delta: hoeffding_subroutine_error(mdp.r_max, 0.2, 10, delta, n),
            b_gamma: td_lambda_contraction(0.2, 1.0),
        };
        let report = empirical_coverage(&mdp, &policy, &pc, 60, 7).unwrap();
        assert!(
            report.pass,
            "coverage {} below {}",
            report.coverage_fraction, report.threshold
        );
    }
}
