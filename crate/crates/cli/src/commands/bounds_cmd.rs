//! `dtx bounds`: empirical coverage of the phased finite-sample bound on a
//! random toy MDP.

use std::path::PathBuf;

use dtx_core::bounds::{
    empirical_coverage, hoeffding_subroutine_error, td_lambda_contraction, PhasedTdConfig,
};
use dtx_core::error::Result;
use dtx_core::exact::ExpansionConfig;
use dtx_core::mdp::{random_mdp_with_noise, PolicyTable};
use serde::{Deserialize, Serialize};

use crate::meta;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub num_states: usize,
    pub num_actions: usize,
    pub dirichlet_alpha: f64,
    pub reward_noise_std: f64,
    pub gamma: f64,
    pub gamma_prime: f64,
    pub order_k: usize,
    pub n: usize,
    pub delta: f64,
    /// TD(lambda) parameter behind the contraction constant B(gamma).
    pub lambda: f64,
    pub trials: usize,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            num_states: 10,
            num_actions: 2,
            dirichlet_alpha: 0.01,
            reward_noise_std: 0.2,
            gamma: 0.2,
            gamma_prime: 0.8,
            order_k: 1,
            n: 1000,
            delta: 0.1,
            lambda: 1.0,
            trials: 200,
            seed: 0,
        }
    }
}

#[derive(clap::Args, Debug)]
pub struct Args {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "bounds_coverage.json")]
    out: PathBuf,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    gamma_prime: Option<f64>,
    #[arg(long, short = 'k')]
    order_k: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    no_timestamp: bool,
}

pub fn run(args: Args) -> Result<()> {
    let mut cfg: Config = meta::load_config(args.config.as_deref())?;
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.gamma {
        cfg.gamma = v;
    }
    if let Some(v) = args.gamma_prime {
        cfg.gamma_prime = v;
    }
    if let Some(v) = args.order_k {
        cfg.order_k = v;
    }
    if let Some(v) = args.n {
        cfg.n = v;
    }
    if let Some(v) = args.delta {
        cfg.delta = v;
    }
    if let Some(v) = args.lambda {
        cfg.lambda = v;
    }
    if let Some(v) = args.trials {
        cfg.trials = v;
    }

    let mdp = random_mdp_with_noise(
        cfg.num_states,
        cfg.num_actions,
        cfg.dirichlet_alpha,
        cfg.reward_noise_std,
        cfg.seed,
    )?;
    let policy = PolicyTable::uniform(cfg.num_states, cfg.num_actions);
    let pc = PhasedTdConfig {
        n: cfg.n,
        delta: cfg.delta,
        cfg: ExpansionConfig::new(cfg.gamma, cfg.gamma_prime, cfg.order_k)?,
        r_max: mdp.r_max,
        a_gamma_delta: hoeffding_subroutine_error(
            mdp.r_max,
            cfg.gamma,
            cfg.num_states,
            cfg.delta,
            cfg.n,
        ),
        b_gamma: td_lambda_contraction(cfg.gamma, cfg.lambda),
    };
    let report = empirical_coverage(&mdp, &policy, &pc, cfg.trials, cfg.seed)?;

    let doc = serde_json::json!({
        "metadata": meta::json_metadata("bounds", &cfg, !args.no_timestamp)?,
        "a_gamma_delta": pc.a_gamma_delta,
        "b_gamma": pc.b_gamma,
        "bound": report.bound,
        "empirical_errors": report.empirical_errors,
        "coverage_fraction": report.coverage_fraction,
        "threshold": report.threshold,
        "pass": report.pass,
    });
    meta::write_json(&args.out, &doc)?;
    eprintln!(
        "coverage {:.3} against threshold {:.3} -> {}",
        report.coverage_fraction,
        report.threshold,
        if report.pass { "pass" } else { "fail" }
    );
    eprintln!("wrote {}", args.out.display());
    Ok(())
}
