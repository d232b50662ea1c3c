//! `dtx fig-tradeoff`: per-order approximation error of exact and sampled
//! expansions, averaged over repetitions.

use std::path::PathBuf;

use dtx_core::error::Result;
use dtx_core::experiments::{tradeoff_experiment, TradeoffConfig};

use crate::meta;

#[derive(clap::Args, Debug)]
pub struct Args {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "fig_tradeoff.csv")]
    out: PathBuf,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    gamma_prime: Option<f64>,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long)]
    trajectories: Option<usize>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    start: Option<usize>,
    #[arg(long)]
    num_states: Option<usize>,
    #[arg(long)]
    num_actions: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    reward_noise_std: Option<f64>,
    #[arg(long)]
    no_timestamp: bool,
}

pub fn run(args: Args) -> Result<()> {
    let mut cfg: TradeoffConfig = meta::load_config(args.config.as_deref())?;
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.gamma {
        cfg.gamma = v;
    }
    if let Some(v) = args.gamma_prime {
        cfg.gamma_prime = v;
    }
    if let Some(v) = args.k_max {
        cfg.k_max = v;
    }
    if let Some(v) = args.trajectories {
        cfg.trajectories = v;
    }
    if let Some(v) = args.replicates {
        cfg.replicates = v;
    }
    if let Some(v) = args.repetitions {
        cfg.repetitions = v;
    }
    if let Some(v) = args.horizon {
        cfg.horizon = v;
    }
    if let Some(v) = args.start {
        cfg.start = v;
    }
    if let Some(v) = args.num_states {
        cfg.num_states = v;
    }
    if let Some(v) = args.num_actions {
        cfg.num_actions = v;
    }
    if let Some(v) = args.alpha {
        cfg.dirichlet_alpha = v;
    }
    if let Some(v) = args.reward_noise_std {
        cfg.reward_noise_std = v;
    }

    let rows = tradeoff_experiment(&cfg)?;
    let mut text = meta::csv_header("fig-tradeoff", &cfg, !args.no_timestamp)?;
    text.push_str(
        "k,exact_abs_error,exact_rel_error,sampled_mean_abs_error,sampled_std_abs_error,\
         sampled_mean_rel_error,sampled_mean_log10_rel_error,sampled_std_log10_rel_error,excluded\n",
    );
    for r in &rows {
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.k,
            meta::f(r.exact_abs_error),
            meta::f(r.exact_rel_error),
            meta::f(r.sampled_mean_abs_error),
            meta::f(r.sampled_std_abs_error),
            meta::f(r.sampled_mean_rel_error),
            meta::f(r.sampled_mean_log10_rel_error),
            meta::f(r.sampled_std_log10_rel_error),
            r.excluded_samples,
        ));
    }
    meta::write_text(&args.out, &text)?;
    eprintln!("wrote {}", args.out.display());
    Ok(())
}
