//! Acceptance suite. One test per criterion; each prints a PASS line with
//! the measured quantities once its assertions hold.

#![allow(clippy::needless_range_loop)]

use std::time::Instant;

use dtx_core::bounds::{
    concentration_width, empirical_coverage, epsilon_factor, hoeffding_subroutine_error,
    td_lambda_contraction, PhasedTdConfig,
};
use dtx_core::exact::{self, ExpansionConfig};
use dtx_core::experiments::{
    isotonic_decreasing_sse, isotonic_increasing_sse, linear_slope, mean_std, optimal_k_experiment,
    tradeoff_experiment, OptimalKConfig, TradeoffConfig,
};
use dtx_core::gradients::{
    exact_first_partial, exact_gradient_decomposition, exact_policy_gradient,
    finite_difference_gradient, train_tabular, weighted_pg_estimate, GradientTable,
    SoftmaxPolicyParams, TrainConfig, TrainVariant,
};
use dtx_core::linalg::max_abs_diff;
use dtx_core::mdp::{
    induce, random_mdp, random_mdp_with_noise, InducedChain, PolicyTable, TabularMdp,
};
use dtx_core::sampling::{self, simulate, taylor_q_term_estimate, taylor_value_estimate};
use dtx_core::seed::split_seed;

fn pass(criterion: usize, detail: &str) {
    println!("ACCEPTANCE {criterion:02} PASS  {detail}");
}

fn toy_noisy(seed: u64) -> (TabularMdp, InducedChain) {
    let mdp = random_mdp(10, 2, 0.01, seed).unwrap();
    let chain = induce(&mdp, &PolicyTable::uniform(10, 2)).unwrap();
    (mdp, chain)
}

fn toy_noiseless(seed: u64) -> (TabularMdp, InducedChain) {
    let mdp = random_mdp_with_noise(10, 2, 0.01, 0.0, seed).unwrap();
    let chain = induce(&mdp, &PolicyTable::uniform(10, 2)).unwrap();
    (mdp, chain)
}

/// Convergent fixture set shared by criteria 2-4: per-order contraction
/// `(g'-g)/(1-g)` small enough that order 60 reaches 1e-8.
fn convergent_fixtures() -> Vec<(InducedChain, f64, f64)> {
    let mut fixtures = Vec::new();
    for seed in [4u64, 9] {
        let (_, chain) = toy_noisy(seed);
        fixtures.push((chain, 0.2, 0.6));
    }
    let (_, chain) = toy_noisy(11);
    fixtures.push((chain, 0.3, 0.7));
    let swap = TabularMdp::new(
        vec![vec![vec![0.0, 1.0]], vec![vec![1.0, 0.0]]],
        vec![vec![1.0], vec![0.0]],
        1.0,
        0.0,
    )
    .unwrap();
    fixtures.push((
        induce(&swap, &PolicyTable::uniform(2, 1)).unwrap(),
        0.5,
        0.8,
    ));
    fixtures
}

#[test]
fn criterion_01_residual_bound_compliance_and_rate() {
    let start = Instant::now();
    let (gamma, gp) = (0.2, 0.8);
    let ratio_log = (0.75f64).ln();
    let mut worst_margin = f64::INFINITY;
    let mut slopes = Vec::new();
    for seed in 0..20u64 {
        let (mdp, chain) = toy_noisy(seed);
        let v_hi = exact::value(&chain, gp).unwrap().values;
        let mut errors = Vec::new();
        for k in 0..=10usize {
            let cfg = ExpansionConfig::new(gamma, gp, k).unwrap();
            let vk = exact::taylor_value(&chain, &cfg).unwrap().values;
            let err = max_abs_diff(&vk, &v_hi);
            let bound = exact::residual_bound(&cfg, mdp.r_max).unwrap();
            assert!(
                err <= bound * (1.0 + 1e-12),
                "seed {seed} K={k}: error {err} exceeds bound {bound}"
            );
            worst_margin = worst_margin.min(bound - err);
            errors.push(err);
        }
        let xs: Vec<f64> = (2..=10).map(|k| k as f64).collect();
        let ys: Vec<f64> = (2..=10).map(|k| errors[k].ln()).collect();
        let slope = linear_slope(&xs, &ys);
        assert!(
            (slope - ratio_log).abs() <= 0.1 * ratio_log.abs(),
            "seed {seed}: log-error slope {slope} vs {ratio_log}"
        );
        slopes.push(slope);
    }
    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 5.0,
        "criterion 1 runtime {elapsed:?}"
    );
    let (smin, smax) = slopes
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
            (lo.min(*s), hi.max(*s))
        });
    pass(
        1,
        &format!(
            "bound held on 20 seeds x K<=10 (min margin {worst_margin:.3e}); slopes in [{smin:.4}, {smax:.4}] vs ln 0.75 = {:.4}; {elapsed:?}",
            ratio_log
        ),
    );
}

#[test]
fn criterion_02_exact_convergence_at_order_60() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for (chain, gamma, gp) in convergent_fixtures() {
        let cfg = ExpansionConfig::new(gamma, gp, 60).unwrap();
        let v_err = max_abs_diff(
            &exact::taylor_value(&chain, &cfg).unwrap().values,
            &exact::value(&chain, gp).unwrap().values,
        );
        let q_err = max_abs_diff(
            &exact::taylor_q(&chain, &cfg).unwrap().values,
            &exact::q_value(&chain, gp).unwrap().values,
        );
        let mut d_err = 0.0f64;
        for x in 0..chain.num_states() {
            d_err = d_err.max(max_abs_diff(
                &exact::taylor_visitation(&chain, x, &cfg).unwrap().probs,
                &exact::visitation(&chain, x, gp).unwrap().probs,
            ));
        }
        for err in [v_err, q_err, d_err] {
            assert!(err < 1e-8, "order-60 error {err} above 1e-8");
            worst = worst.max(err);
        }
    }
    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 5.0,
        "criterion 2 runtime {elapsed:?}"
    );
    pass(
        2,
        &format!("value/Q/visitation at K=60 within 1e-8 on all fixtures (worst {worst:.3e}); {elapsed:?}"),
    );
}

#[test]
fn criterion_03_primal_dual_equality() {
    let mut worst = 0.0f64;
    for (chain, gamma, gp) in convergent_fixtures() {
        for k in 0..=10usize {
            let cfg = ExpansionConfig::new(gamma, gp, k).unwrap();
            let vk = exact::taylor_value(&chain, &cfg).unwrap().values;
            for x in 0..chain.num_states() {
                let dk = exact::taylor_visitation(&chain, x, &cfg).unwrap();
                let via_dual: f64 = dk
                    .probs
                    .iter()
                    .zip(&chain.r_pi)
                    .map(|(p, r)| p * r)
                    .sum::<f64>()
                    / (1.0 - gp);
                let err = (via_dual - vk[x]).abs();
                assert!(err < 1e-9, "primal-dual gap {err} at K={k}, x={x}");
                worst = worst.max(err);
            }
        }
    }
    pass(
        3,
        &format!("primal-dual equality within 1e-9 for K=0..10 (worst {worst:.3e})"),
    );
}

#[test]
fn criterion_04_mixture_identities() {
    let mut worst_full = 0.0f64;
    let mut worst_taylor = 0.0f64;
    for (chain, gamma, gp) in convergent_fixtures() {
        let v_lo = exact::value(&chain, gamma).unwrap().values;
        let v_hi = exact::value(&chain, gp).unwrap().values;
        for x in 0..chain.num_states() {
            let rho = exact::rho_weight(&chain, x, gamma, gp).unwrap();
            let mixed: f64 = rho.weights.iter().zip(&v_lo).map(|(w, v)| w * v).sum();
            let err = (mixed - v_hi[x]).abs();
            assert!(err < 1e-8, "mixture identity gap {err} at x={x}");
            worst_full = worst_full.max(err);
            for k in 0..=10usize {
                let cfg = ExpansionConfig::new(gamma, gp, k).unwrap();
                let rho_k = exact::taylor_rho(&chain, x, &cfg).unwrap();
                let vk = exact::taylor_value(&chain, &cfg).unwrap().values[x];
                let mixed_k: f64 = rho_k.weights.iter().zip(&v_lo).map(|(w, v)| w * v).sum();
                let err_k = (mixed_k - vk).abs();
                assert!(
                    err_k < 1e-9,
                    "expansion mixture gap {err_k} at x={x}, K={k}"
                );
                worst_taylor = worst_taylor.max(err_k);
            }
        }
    }
    pass(
        4,
        &format!("rho identities within 1e-8 / 1e-9 (worst {worst_full:.3e} / {worst_taylor:.3e})"),
    );
}

#[test]
fn criterion_05_estimator_unbiasedness() {
    let start = Instant::now();
    let replicas = 10_000u64;
    let horizon = 64usize;
    let mut worst_z = 0.0f64;
    for seed in 0..5u64 {
        let (mdp, chain) = toy_noiseless(seed);
        let policy = PolicyTable::uniform(10, 2);
        let v = exact::value(&chain, 0.2).unwrap();
        let q = exact::q_value(&chain, 0.2).unwrap();
        for k in [0usize, 1, 3] {
            let cfg = ExpansionConfig::new(0.2, 0.8, k).unwrap();
            // Algorithm-style value estimator against the exact expansion.
            let target = exact::taylor_value(&chain, &cfg).unwrap().values[0];
            let (mut sum, mut sq) = (0.0, 0.0);
            for i in 0..replicas {
                let traj = simulate(
                    &mdp,
                    &policy,
                    0,
                    horizon,
                    split_seed(split_seed(seed, 101), i),
                )
                .unwrap();
                let mut base = |_t: usize, x: usize| v.values[x];
                let out = taylor_value_estimate(
                    &traj,
                    &cfg,
                    &mut base,
                    1,
                    split_seed(split_seed(seed, 202), i),
                )
                .unwrap();
                sum += out.point;
                sq += out.point * out.point;
            }
            let n = replicas as f64;
            let mean = sum / n;
            let se = ((sq / n - mean * mean).max(0.0) / n).sqrt();
            let gap = (mean - target).abs();
            assert!(
                gap <= 3.0 * se + 1e-12,
                "value estimator seed {seed} K={k}: |{mean} - {target}| > 3 x {se}"
            );
            if se > 0.0 {
                worst_z = worst_z.max(gap / se);
            }

            // Q-term estimator: per-replica difference to its conditional
            // exact target must average to zero.
            let term: Vec<f64> = if k == 0 {
                q.values.clone()
            } else {
                let hi = exact::taylor_q(&chain, &cfg).unwrap().values;
                let lo = exact::taylor_q(&chain, &ExpansionConfig::new(0.2, 0.8, k - 1).unwrap())
                    .unwrap()
                    .values;
                hi.iter().zip(&lo).map(|(a, b)| a - b).collect()
            };
            let (mut dsum, mut dsq) = (0.0, 0.0);
            for i in 0..replicas {
                let traj = simulate(
                    &mdp,
                    &policy,
                    0,
                    horizon,
                    split_seed(split_seed(seed, 303), i),
                )
                .unwrap();
                let mut base = |_t: usize, x: usize, a: usize| q.values[chain.sa_index(x, a)];
                let out = taylor_q_term_estimate(
                    &traj,
                    0,
                    &cfg,
                    &mut base,
                    1,
                    split_seed(split_seed(seed, 404), i),
                )
                .unwrap();
                let d = out.point - term[chain.sa_index(traj.states[0], traj.actions[0])];
                dsum += d;
                dsq += d * d;
            }
            let dmean = dsum / n;
            let dse = ((dsq / n - dmean * dmean).max(0.0) / n).sqrt();
            assert!(
                dmean.abs() <= 3.0 * dse + 1e-12,
                "Q-term estimator seed {seed} K={k}: bias {dmean} > 3 x {dse}"
            );
            if dse > 0.0 {
                worst_z = worst_z.max(dmean.abs() / dse);
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 60.0,
        "criterion 5 runtime {elapsed:?}"
    );
    pass(
        5,
        &format!("both estimators unbiased over 1e4 replicas x 5 seeds x K in {{0,1,3}} (worst |z| {worst_z:.2}); {elapsed:?}"),
    );
}

#[test]
fn criterion_06_tradeoff_curve_shape() {
    let start = Instant::now();
    let cfg = TradeoffConfig::default();
    let rows = tradeoff_experiment(&cfg).unwrap();

    for pair in rows.windows(2) {
        assert!(
            pair[1].exact_abs_error < pair[0].exact_abs_error,
            "exact curve not strictly decreasing at K={}",
            pair[1].k
        );
    }
    let means: Vec<f64> = rows.iter().map(|r| r.sampled_mean_abs_error).collect();
    let k_star = means
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    assert!(k_star >= 1, "sampled curve has no initial decrease");
    assert!(means[k_star] < means[0]);
    let tail_from = k_star + 2;
    let mut tail_note = "tail empty".to_string();
    if tail_from < means.len() {
        let tail = &means[tail_from..];
        let up = isotonic_increasing_sse(tail);
        let down = isotonic_decreasing_sse(tail);
        assert!(
            up <= down + 1e-12,
            "tail beyond K*+2 trends downward: incr SSE {up} vs decr SSE {down}"
        );
        tail_note = format!(
            "tail({} pts) incr SSE {up:.2e} <= decr SSE {down:.2e}",
            tail.len()
        );
    }
    // Variance floor: the sampled curve cannot follow the exact curve once
    // the truncation bias drops below the Monte-Carlo noise.
    let last = rows.last().unwrap();
    assert!(last.sampled_mean_abs_error > last.exact_abs_error);
    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 120.0,
        "criterion 6 runtime {elapsed:?}"
    );
    pass(
        6,
        &format!(
            "sampled curve falls {:.3} -> {:.3} at K*={k_star}, then flat ({tail_note}); floor {:.3} vs exact {:.4}; {elapsed:?}",
            means[0], means[k_star], last.sampled_mean_abs_error, last.exact_abs_error
        ),
    );
}

#[test]
fn criterion_07_optimal_k_shrinks_with_noise() {
    let start = Instant::now();
    let cfg = OptimalKConfig {
        sigmas: vec![0.05, 1.0],
        ..OptimalKConfig::default()
    };
    let rows = optimal_k_experiment(&cfg).unwrap();
    let low = &rows[0];
    let high = &rows[1];
    assert!(high.mean_k_star <= low.mean_k_star);
    let n = cfg.repetitions as f64;
    let se = (low.std_k_star.powi(2) / n + high.std_k_star.powi(2) / n).sqrt();
    let z = (low.mean_k_star - high.mean_k_star) / se;
    assert!(
        z >= 1.645,
        "one-sided comparison not significant: z = {z:.2}"
    );
    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 120.0,
        "criterion 7 runtime {elapsed:?}"
    );
    pass(
        7,
        &format!(
            "mean K* {:.2} (sigma 1.0) <= {:.2} (sigma 0.05), one-sided z = {z:.2} >= 1.645; {elapsed:?}",
            high.mean_k_star, low.mean_k_star
        ),
    );
}

fn random_logits(s: usize, a: usize, seed: u64) -> SoftmaxPolicyParams {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    SoftmaxPolicyParams::new(
        (0..s)
            .map(|_| (0..a).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect(),
    )
    .unwrap()
}

/// Per-coordinate mean/std-error aggregation of sampled gradient tables.
struct TableStats {
    mean: Vec<Vec<f64>>,
    m2: Vec<Vec<f64>>,
    n: usize,
}

impl TableStats {
    fn new(s: usize, a: usize) -> Self {
        TableStats {
            mean: vec![vec![0.0; a]; s],
            m2: vec![vec![0.0; a]; s],
            n: 0,
        }
    }

    fn push(&mut self, table: &GradientTable) {
        self.n += 1;
        let n = self.n as f64;
        for (x, row) in table.partials.iter().enumerate() {
            for (a, v) in row.iter().enumerate() {
                let d = v - self.mean[x][a];
                self.mean[x][a] += d / n;
                self.m2[x][a] += d * (v - self.mean[x][a]);
            }
        }
    }

    fn check_against(&self, target: &GradientTable, label: &str) -> f64 {
        let n = self.n as f64;
        let mut worst_z = 0.0f64;
        for (x, row) in target.partials.iter().enumerate() {
            for (a, want) in row.iter().enumerate() {
                let se = (self.m2[x][a] / (n - 1.0) / n).sqrt();
                let gap = (self.mean[x][a] - want).abs();
                assert!(
                    gap <= 3.0 * se + 1e-9,
                    "{label}: coordinate ({x},{a}) off by {gap} with se {se}"
                );
                if se > 0.0 {
                    worst_z = worst_z.max(gap / se);
                }
            }
        }
        worst_z
    }
}

#[test]
fn criterion_08_gradient_identities() {
    let (gamma, gp) = (0.2, 0.8);

    // decomposition identity on 20 random (MDP, theta) pairs
    let mut worst_split = 0.0f64;
    for seed in 0..20u64 {
        let mdp = random_mdp_with_noise(6, 3, 0.3, 0.0, seed).unwrap();
        let params = random_logits(6, 3, split_seed(77, seed));
        let dec = exact_gradient_decomposition(&mdp, &params, gamma, gp, 0).unwrap();
        for x in 0..6 {
            for a in 0..3 {
                let gap = (dec.full.partials[x][a]
                    - dec.first.partials[x][a]
                    - dec.second.partials[x][a])
                    .abs();
                assert!(gap < 1e-9);
                worst_split = worst_split.max(gap);
            }
        }
    }

    // finite-difference agreement for every exact gradient
    let mut worst_fd = 0.0f64;
    for seed in [3u64, 4] {
        let (mdp, _) = toy_noiseless(seed);
        let params = random_logits(10, 2, split_seed(88, seed));
        let chain0 = induce(&mdp, &params.policy()).unwrap();
        let rho0 = exact::rho_weight(&chain0, 0, gamma, gp).unwrap();
        let v0 = exact::value(&chain0, gamma).unwrap();

        let vanilla = exact_policy_gradient(&mdp, &params, gamma, 0).unwrap();
        let mut value_obj = |p: &SoftmaxPolicyParams| {
            Ok(exact::value(&induce(&mdp, &p.policy())?, gamma)?.values[0])
        };
        let fd = finite_difference_gradient(&mut value_obj, &params, 1e-5).unwrap();
        let e1 = vanilla.max_abs_diff(&fd);

        let dec = exact_gradient_decomposition(&mdp, &params, gamma, gp, 0).unwrap();
        let mut full_obj =
            |p: &SoftmaxPolicyParams| Ok(exact::value(&induce(&mdp, &p.policy())?, gp)?.values[0]);
        let fd_full = finite_difference_gradient(&mut full_obj, &params, 1e-5).unwrap();
        let e2 = dec.full.max_abs_diff(&fd_full);

        // first partial: freeze the mixture weights
        let mut frozen_rho = |p: &SoftmaxPolicyParams| {
            let v = exact::value(&induce(&mdp, &p.policy())?, gamma)?;
            Ok(rho0.weights.iter().zip(&v.values).map(|(w, v)| w * v).sum())
        };
        let fd_first = finite_difference_gradient(&mut frozen_rho, &params, 1e-5).unwrap();
        let e3 = dec.first.max_abs_diff(&fd_first);

        // second partial: freeze the values
        let mut frozen_v = |p: &SoftmaxPolicyParams| {
            let chain = induce(&mdp, &p.policy())?;
            let rho = exact::rho_weight(&chain, 0, gamma, gp)?;
            Ok(rho.weights.iter().zip(&v0.values).map(|(w, v)| w * v).sum())
        };
        let fd_second = finite_difference_gradient(&mut frozen_v, &params, 1e-5).unwrap();
        let e4 = dec.second.max_abs_diff(&fd_second);

        for e in [e1, e2, e3, e4] {
            assert!(e < 1e-6, "finite-difference residual {e} above 1e-6");
            worst_fd = worst_fd.max(e);
        }
    }

    // weighted-update endpoints at N = 1e4, on a well-connected chain so
    // every coordinate accumulates real variance
    let mdp = random_mdp_with_noise(8, 2, 0.7, 0.0, 0).unwrap();
    let params = random_logits(8, 2, 99);
    let policy = params.policy();
    let pchain = induce(&mdp, &policy).unwrap();
    let q = exact::q_value(&pchain, gamma).unwrap();
    let n_traj = 10_000u64;
    let horizon = 64usize;
    let mut stats0 = TableStats::new(8, 2);
    let mut stats_inf = TableStats::new(8, 2);
    let cfg0 = ExpansionConfig::new(gamma, gp, 0).unwrap();
    let cfg_inf = ExpansionConfig::new(gamma, gp, 200).unwrap();
    for i in 0..n_traj {
        let traj = simulate(&mdp, &policy, 0, horizon, split_seed(1234, i)).unwrap();
        let qs: Vec<f64> = (0..traj.len())
            .map(|t| q.values[pchain.sa_index(traj.states[t], traj.actions[t])])
            .collect();
        let g0 = weighted_pg_estimate(
            &policy,
            std::slice::from_ref(&traj),
            std::slice::from_ref(&qs),
            &cfg0,
        )
        .unwrap();
        stats0.push(&g0);
        let gi = weighted_pg_estimate(
            &policy,
            std::slice::from_ref(&traj),
            std::slice::from_ref(&qs),
            &cfg_inf,
        )
        .unwrap();
        stats_inf.push(&gi);
    }
    let vanilla_target = exact_policy_gradient(&mdp, &params, gamma, 0).unwrap();
    let first_target = exact_first_partial(&mdp, &params, gamma, gp, 0).unwrap();
    let z0 = stats0.check_against(&vanilla_target, "K=0 endpoint");
    let zi = stats_inf.check_against(&first_target, "K>=horizon endpoint");

    pass(
        8,
        &format!(
            "decomposition split (worst {worst_split:.2e}), FD residuals (worst {worst_fd:.2e}), weighted endpoints within 3 se (worst |z| {:.2})",
            z0.max(zi)
        ),
    );
}

#[test]
fn criterion_09_weight_schedule_identities() {
    let (gamma, gp) = (0.2f64, 0.8f64);
    // endpoint identities, exact
    for t in 0..=40usize {
        assert_eq!(exact::update_weight(0, t, gamma, gp), gamma.powi(t as i32));
        for k in t..t + 3 {
            assert_eq!(exact::update_weight(k, t, gamma, gp), gp.powi(t as i32));
        }
    }

    // f/w cross-consistency: w_K(t) = g^t + sum_{u<=t} f(K,u) g^{t-u}
    let mut worst_fw = 0.0f64;
    for (g, g2) in [(0.2, 0.8), (0.1, 0.95), (0.5, 0.7)] {
        for k in [1usize, 2, 5, 9] {
            for t in 1..=30usize {
                let w = exact::update_weight(k, t, g, g2);
                let via_f: f64 = g.powi(t as i32)
                    + (1..=t)
                        .map(|u| exact::f_weight(k, u, g, g2) * g.powi((t - u) as i32))
                        .sum::<f64>();
                let err = (w - via_f).abs();
                assert!(err < 1e-12, "f/w mismatch at K={k}, t={t}: {err}");
                worst_fw = worst_fw.max(err);
            }
        }
    }

    // f against a direct combinatorial evaluation with exact binomials
    fn exact_binom(n: u64, r: u64) -> f64 {
        if r > n {
            return 0.0;
        }
        let r = r.min(n - r);
        let mut acc: u128 = 1;
        for i in 1..=r {
            acc = acc * (n - r + i) as u128 / i as u128;
        }
        acc as f64
    }
    let mut worst_f = 0.0f64;
    for k in [1usize, 2, 3, 7, 12] {
        for t in 1..=30usize {
            let direct: f64 = (1..=k.min(t))
                .map(|u| {
                    (gp - gamma).powi(u as i32)
                        * gamma.powi((t - u) as i32)
                        * exact_binom((t - 1) as u64, (t - u) as u64)
                })
                .sum();
            let got = exact::f_weight(k, t, gamma, gp);
            let err = (got - direct).abs();
            assert!(
                err <= 1e-13 * direct.max(1.0),
                "f mismatch at K={k}, t={t}: {got} vs {direct}"
            );
            worst_f = worst_f.max(err);
        }
    }
    pass(
        9,
        &format!("endpoints exact, f/w consistency within 1e-12 (worst {worst_fw:.2e}), combinatorial check (worst {worst_f:.2e})"),
    );
}

#[test]
fn criterion_10_phased_bound_coverage() {
    let start = Instant::now();
    // formula spot checks to machine precision
    let c = ExpansionConfig::new(0.2, 0.8, 1).unwrap();
    let gap: f64 = 0.8 - 0.2;
    assert_eq!(epsilon_factor(&c), (1.0 - gap.powi(2)) / (1.0 - gap));
    assert_eq!(
        concentration_width(1, 0.1, 100),
        (2.0 * (2.0 * 2.0 / 0.1f64).ln() / 100.0).sqrt()
    );
    assert_eq!(concentration_width(0, 0.1, 100), 0.0);

    let (mdp, _) = toy_noisy(1);
    let policy = PolicyTable::uniform(10, 2);
    let delta = 0.1;
    let mut detail = String::new();
    for k in [0usize, 1, 3] {
        for (n, trials) in [(100usize, 200usize), (10_000, 200)] {
            let pc = PhasedTdConfig {
                n,
                delta,
                cfg: ExpansionConfig::new(0.2, 0.8, k).unwrap(),
                r_max: mdp.r_max,
                a_gamma_delta: hoeffding_subroutine_error(mdp.r_max, 0.2, 10, delta, n),
                b_gamma: td_lambda_contraction(0.2, 1.0),
            };
            let report = empirical_coverage(
                &mdp,
                &policy,
                &pc,
                trials,
                split_seed(50, (k * 7 + n) as u64),
            )
            .unwrap();
            assert!(
                report.pass,
                "coverage {} below threshold {} at K={k}, n={n}",
                report.coverage_fraction, report.threshold
            );
            detail.push_str(&format!(
                "K={k},n={n}: {:.3}>={:.3}; ",
                report.coverage_fraction, report.threshold
            ));
        }
    }
    let elapsed = start.elapsed();
    pass(10, &format!("{detail}{elapsed:?}"));
}

#[test]
fn criterion_11_deep_rl_scope_note() {
    // Deep-RL benchmark results are out of desk scale by specification;
    // the tabular training property of criterion 12 substitutes for them.
    pass(
        11,
        "deep-RL reproduction explicitly out of scope; substituted by criterion 12",
    );
}

#[test]
fn criterion_12_update_weighting_training_property() {
    let start = Instant::now();
    let eval_horizon = 1000usize;
    let gamma = 0.9;
    let gamma_prime = 1.0 - 1.0 / eval_horizon as f64;
    let seeds = 20u64;

    let run = |k: usize| -> Vec<f64> {
        (0..seeds)
            .map(|s| {
                let mdp = random_mdp(10, 2, 0.01, split_seed(1000, s)).unwrap();
                let tc = TrainConfig {
                    variant: if k == 0 {
                        TrainVariant::Vanilla
                    } else {
                        TrainVariant::UpdateWeighting
                    },
                    cfg: ExpansionConfig::new(gamma, gamma_prime, k).unwrap(),
                    learning_rate: 0.1,
                    iterations: 400,
                    batch_size: 4,
                    seed: split_seed(2000, s),
                    eta: 0.0,
                    start_state: 0,
                    sim_horizon: 300,
                    eval_horizon,
                    q_truncation_h: 10,
                    self_normalize: false,
                    use_baseline: true,
                    absorbing_states: None,
                };
                let r = train_tabular(&mdp, &SoftmaxPolicyParams::zeros(10, 2), &tc).unwrap();
                assert!(!r.diverged);
                r.curve.last().unwrap().undiscounted_return
            })
            .collect()
    };

    let vanilla = run(0);
    let (vmean, _) = mean_std(&vanilla);
    // non-inferiority margin: 5% of the vanilla mean, pre-declared
    let margin = 0.05 * vmean.abs();
    let t_crit = 1.729; // one-sided 95%, df = 19
    let mut detail = format!("vanilla mean {vmean:.1}; ");
    for k in [5usize, 10] {
        let scores = run(k);
        let diffs: Vec<f64> = scores.iter().zip(&vanilla).map(|(a, b)| a - b).collect();
        let (dmean, dsd) = mean_std(&diffs);
        let lower = dmean - t_crit * dsd / (seeds as f64).sqrt();
        let effect = dmean / dsd;
        let (smean, _) = mean_std(&scores);
        assert!(
            smean >= vmean - margin,
            "K={k}: mean {smean} more than the margin below vanilla {vmean}"
        );
        assert!(
            lower >= -margin,
            "K={k}: non-inferiority failed, lower 95% bound {lower} < -{margin}"
        );
        detail.push_str(&format!(
            "K={k}: mean {smean:.1}, paired diff {dmean:+.1} (lower95 {lower:+.1}, d={effect:.2}); "
        ));
    }
    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 300.0,
        "criterion 12 runtime {elapsed:?}"
    );
    pass(12, &format!("{detail}{elapsed:?}"));
}

#[test]
fn acceptance_gap_bound_constants_both_exposed() {
    // Supporting check for criteria 1 and 10: the two gap constants differ
    // exactly by their denominators.
    let cfg = ExpansionConfig::new(0.2, 0.8, 2).unwrap();
    let analysis = dtx_core::bounds::expected_gap_error_analysis(&cfg, 1.0);
    let bound_side = dtx_core::bounds::expected_gap_error(&cfg, 1.0);
    let expansion_side = exact::residual_bound(&cfg, 1.0).unwrap();
    assert_eq!(bound_side, expansion_side);
    assert!((analysis * (1.0 - 0.2) / (1.0 - 0.8) - bound_side).abs() < 1e-15);
    let _ = sampling::mc_return; // keep the sampling import exercised
}
