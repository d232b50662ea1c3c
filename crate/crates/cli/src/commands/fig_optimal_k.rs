//! `dtx fig-optimal-k`: how the best truncation order responds to the
//! noise level of the base estimates.

use std::path::PathBuf;

use dtx_core::error::{Error, Result};
use dtx_core::experiments::{optimal_k_experiment, OptimalKConfig};

use crate::meta;

#[derive(clap::Args, Debug)]
pub struct Args {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "fig_optimal_k.csv")]
    out: PathBuf,
    /// Comma-separated noise levels, e.g. "0,0.05,0.1".
    #[arg(long)]
    sigmas: Option<String>,
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
    no_timestamp: bool,
}

pub fn run(args: Args) -> Result<()> {
    let mut cfg: OptimalKConfig = meta::load_config(args.config.as_deref())?;
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(text) = &args.sigmas {
        cfg.sigmas = text
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parameter(format!("bad sigma '{s}': {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
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

    let rows = optimal_k_experiment(&cfg)?;
    let mut text = meta::csv_header("fig-optimal-k", &cfg, !args.no_timestamp)?;
    text.push_str("sigma,mean_k_star,std_k_star,repetitions\n");
    for r in &rows {
        text.push_str(&format!(
            "{},{},{},{}\n",
            meta::f(r.sigma),
            meta::f(r.mean_k_star),
            meta::f(r.std_k_star),
            r.k_stars.len(),
        ));
    }
    meta::write_text(&args.out, &text)?;
    eprintln!("wrote {}", args.out.display());
    Ok(())
}
