//! `dtx train`: tabular policy-gradient training across update variants
//! and seeds, one learning-curve row per iteration.

use std::path::PathBuf;

use dtx_core::error::{Error, Result};
use dtx_core::exact::ExpansionConfig;
use dtx_core::gradients::{train_tabular, SoftmaxPolicyParams, TrainConfig, TrainVariant};
use dtx_core::mdp::random_mdp;
use dtx_core::seed::split_seed;
use serde::{Deserialize, Serialize};

use crate::meta;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub num_states: usize,
    pub num_actions: usize,
    pub dirichlet_alpha: f64,
    /// Update variants to run: q-expansion, update-weighting, vanilla,
    /// heuristic.
    pub variants: Vec<String>,
    /// Expansion orders applied to the order-dependent variants.
    pub k_list: Vec<usize>,
    pub gamma: f64,
    pub gamma_prime: f64,
    pub learning_rate: f64,
    pub iterations: usize,
    pub batch_size: usize,
    pub eta: f64,
    /// Number of independent (MDP, run) seeds.
    pub num_seeds: usize,
    pub start: usize,
    pub sim_horizon: usize,
    pub eval_horizon: usize,
    pub q_truncation_h: usize,
    pub self_normalize: bool,
    pub use_baseline: bool,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            num_states: 10,
            num_actions: 2,
            dirichlet_alpha: 0.01,
            variants: vec!["vanilla".into(), "update-weighting".into()],
            k_list: vec![5, 10],
            gamma: 0.9,
            gamma_prime: 0.999,
            learning_rate: 0.1,
            iterations: 400,
            batch_size: 4,
            eta: 0.01,
            num_seeds: 20,
            start: 0,
            sim_horizon: 300,
            eval_horizon: 1000,
            q_truncation_h: 10,
            self_normalize: false,
            use_baseline: true,
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
    #[arg(long, default_value = "train_curves.csv")]
    out: PathBuf,
    /// Comma-separated variant list.
    #[arg(long)]
    variants: Option<String>,
    /// Comma-separated expansion orders.
    #[arg(long)]
    k_list: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    gamma_prime: Option<f64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    num_seeds: Option<usize>,
    #[arg(long)]
    self_normalize: Option<bool>,
    #[arg(long)]
    use_baseline: Option<bool>,
    #[arg(long)]
    no_timestamp: bool,
}

fn parse_variant(name: &str) -> Result<TrainVariant> {
    match name.trim() {
        "q-expansion" => Ok(TrainVariant::QExpansion),
        "update-weighting" => Ok(TrainVariant::UpdateWeighting),
        "vanilla" => Ok(TrainVariant::Vanilla),
        "heuristic" => Ok(TrainVariant::Heuristic),
        other => Err(Error::Parameter(format!("unknown variant '{other}'"))),
    }
}

pub fn run(args: Args) -> Result<()> {
    let mut cfg: Config = meta::load_config(args.config.as_deref())?;
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(text) = &args.variants {
        cfg.variants = text.split(',').map(|s| s.trim().to_string()).collect();
    }
    if let Some(text) = &args.k_list {
        cfg.k_list = text
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|e| Error::Parameter(format!("bad order '{s}': {e}")))
            })
            .collect::<Result<Vec<usize>>>()?;
    }
    if let Some(v) = args.gamma {
        cfg.gamma = v;
    }
    if let Some(v) = args.gamma_prime {
        cfg.gamma_prime = v;
    }
    if let Some(v) = args.learning_rate {
        cfg.learning_rate = v;
    }
    if let Some(v) = args.iterations {
        cfg.iterations = v;
    }
    if let Some(v) = args.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = args.eta {
        cfg.eta = v;
    }
    if let Some(v) = args.num_seeds {
        cfg.num_seeds = v;
    }
    if let Some(v) = args.self_normalize {
        cfg.self_normalize = v;
    }
    if let Some(v) = args.use_baseline {
        cfg.use_baseline = v;
    }

    // (variant, order) grid: the order only matters for the expansion
    // variants; vanilla and heuristic run once each.
    let mut arms: Vec<(TrainVariant, usize)> = Vec::new();
    for name in &cfg.variants {
        let variant = parse_variant(name)?;
        match variant {
            TrainVariant::Vanilla | TrainVariant::Heuristic => arms.push((variant, 0)),
            _ => {
                for &k in &cfg.k_list {
                    arms.push((variant, k));
                }
            }
        }
    }
    if arms.is_empty() {
        return Err(Error::Parameter("no variants requested".into()));
    }

    let mut rows = Vec::new();
    for (variant, k) in &arms {
        for s in 0..cfg.num_seeds as u64 {
            let mdp = random_mdp(
                cfg.num_states,
                cfg.num_actions,
                cfg.dirichlet_alpha,
                split_seed(cfg.seed, s),
            )?;
            let tc = TrainConfig {
                variant: *variant,
                cfg: ExpansionConfig::new(cfg.gamma, cfg.gamma_prime, *k)?,
                learning_rate: cfg.learning_rate,
                iterations: cfg.iterations,
                batch_size: cfg.batch_size,
                seed: split_seed(cfg.seed.wrapping_add(1), s),
                eta: cfg.eta,
                start_state: cfg.start,
                sim_horizon: cfg.sim_horizon,
                eval_horizon: cfg.eval_horizon,
                q_truncation_h: cfg.q_truncation_h,
                self_normalize: cfg.self_normalize,
                use_baseline: cfg.use_baseline,
                absorbing_states: None,
            };
            let result = train_tabular(
                &mdp,
                &SoftmaxPolicyParams::zeros(cfg.num_states, cfg.num_actions),
                &tc,
            )?;
            let last = result.curve.len().saturating_sub(1);
            for (i, point) in result.curve.iter().enumerate() {
                rows.push((
                    variant.label().to_string(),
                    *k,
                    s,
                    point.iteration,
                    point.undiscounted_return,
                    result.diverged && i == last,
                ));
            }
        }
    }
    rows.sort_by(|a, b| (&a.0, a.1, a.2, a.3).cmp(&(&b.0, b.1, b.2, b.3)));

    let mut text = meta::csv_header("train", &cfg, !args.no_timestamp)?;
    text.push_str("iteration,undiscounted_return,variant,K,gamma,gamma_prime,eta,seed,diverged\n");
    for (variant, k, s, iteration, ret, diverged) in &rows {
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            iteration,
            meta::f(*ret),
            variant,
            k,
            meta::f(cfg.gamma),
            meta::f(cfg.gamma_prime),
            meta::f(cfg.eta),
            s,
            if *diverged { 1 } else { 0 },
        ));
    }
    meta::write_text(&args.out, &text)?;
    eprintln!("wrote {} ({} rows)", args.out.display(), rows.len());
    Ok(())
}
