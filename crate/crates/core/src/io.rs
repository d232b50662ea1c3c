//! CSV and JSON export of numeric artifacts.
//!
//! CSV files carry 17-significant-digit decimals ('.' separator, UTF-8)
//! and embed their provenance as `#`-prefixed comment lines before the
//! data. JSON artifacts carry the same provenance in a `metadata` object.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::exact::ExpansionConfig;
use crate::linalg::Matrix;
use crate::sampling::{EstimatorOutput, Trajectory};

/// Provenance attached to every exported artifact.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct ArtifactMeta {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_prime: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order_k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ArtifactMeta {
    pub fn from_config(cfg: &ExpansionConfig, seed: Option<u64>) -> Self {
        ArtifactMeta {
            gamma: Some(cfg.gamma),
            gamma_prime: Some(cfg.gamma_prime),
            order_k: Some(cfg.order_k),
            seed,
        }
    }

    fn comment_lines(&self) -> Vec<String> {
        let mut lines = Vec::new();
        if let Some(g) = self.gamma {
            lines.push(format!("# gamma: {}", fmt(g)));
        }
        if let Some(g) = self.gamma_prime {
            lines.push(format!("# gamma_prime: {}", fmt(g)));
        }
        if let Some(k) = self.order_k {
            lines.push(format!("# order_k: {k}"));
        }
        if let Some(s) = self.seed {
            lines.push(format!("# seed: {s}"));
        }
        lines
    }
}

/// 17-significant-digit decimal rendering.
pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write a vector as one row-major CSV line plus metadata comments.
pub fn write_vector_csv(path: &Path, values: &[f64], meta: &ArtifactMeta) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for line in meta.comment_lines() {
        writeln!(out, "{line}")?;
    }
    writeln!(out, "{}", join(values))?;
    Ok(())
}

/// Write a matrix as row-major CSV (one line per row) plus metadata.
pub fn write_matrix_csv(path: &Path, m: &Matrix, meta: &ArtifactMeta) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for line in meta.comment_lines() {
        writeln!(out, "{line}")?;
    }
    for r in 0..m.rows() {
        writeln!(out, "{}", join(m.row(r)))?;
    }
    Ok(())
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| fmt(*v)).collect::<Vec<_>>().join(",")
}

/// Vector artifact as JSON with embedded metadata.
pub fn vector_json(values: &[f64], meta: &ArtifactMeta) -> serde_json::Value {
    serde_json::json!({ "metadata": meta, "values": values })
}

/// Trajectory dump: CSV with columns `t,state,action,reward`.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "# seed: {}", traj.seed)?;
    writeln!(out, "# clamp_count: {}", traj.clamp_count)?;
    writeln!(out, "t,state,action,reward")?;
    for t in 0..traj.len() {
        writeln!(
            out,
            "{t},{},{},{}",
            traj.states[t],
            traj.actions[t],
            fmt(traj.rewards[t])
        )?;
    }
    Ok(())
}

/// Estimator record with the fields
/// `{estimator_id, K, gamma, gamma_prime, point, std_error, n, excluded}`.
pub fn estimator_json(out: &EstimatorOutput, cfg: &ExpansionConfig) -> serde_json::Value {
    serde_json::json!({
        "estimator_id": out.estimator_id,
        "K": cfg.order_k,
        "gamma": cfg.gamma,
        "gamma_prime": cfg.gamma_prime,
        "point": out.point,
        "std_error": out.std_error,
        "n": out.num_samples,
        "excluded": out.excluded,
    })
}
