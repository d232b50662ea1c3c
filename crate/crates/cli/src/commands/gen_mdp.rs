//! `dtx gen-mdp`: draw a random tabular MDP and serialize it.

use std::path::PathBuf;

use dtx_core::error::Result;
use dtx_core::mdp::random_mdp_with_noise;
use serde::{Deserialize, Serialize};

use crate::meta;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub num_states: usize,
    pub num_actions: usize,
    pub dirichlet_alpha: f64,
    pub reward_noise_std: f64,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            num_states: 10,
            num_actions: 2,
            dirichlet_alpha: 0.01,
            reward_noise_std: 0.2,
            seed: 0,
        }
    }
}

#[derive(clap::Args, Debug)]
pub struct Args {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output path.
    #[arg(long, default_value = "mdp.json")]
    out: PathBuf,
    #[arg(long)]
    num_states: Option<usize>,
    #[arg(long)]
    num_actions: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    reward_noise_std: Option<f64>,
    /// Omit the timestamp so reruns are byte-identical.
    #[arg(long)]
    no_timestamp: bool,
}

pub fn run(args: Args) -> Result<()> {
    let mut cfg: Config = meta::load_config(args.config.as_deref())?;
    if let Some(v) = args.seed {
        cfg.seed = v;
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

    let mdp = random_mdp_with_noise(
        cfg.num_states,
        cfg.num_actions,
        cfg.dirichlet_alpha,
        cfg.reward_noise_std,
        cfg.seed,
    )?;
    let mut doc = serde_json::to_value(&mdp)?;
    doc["metadata"] = meta::json_metadata("gen-mdp", &cfg, !args.no_timestamp)?;
    meta::write_json(&args.out, &doc)?;
    eprintln!("wrote {}", args.out.display());
    Ok(())
}
