//! Output provenance: every artifact carries the resolved configuration,
//! the library version, and (unless disabled) a timestamp.

use std::io::Write;
use std::path::Path;

use dtx_core::error::{Error, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Load a config file when given, otherwise fall back to defaults.
pub fn load_config<C>(path: Option<&Path>) -> Result<C>
where
    C: DeserializeOwned + Default,
{
    match path {
        None => Ok(C::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Parameter(format!("bad config file {}: {e}", p.display())))
        }
    }
}

pub fn unix_timestamp() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// `#`-prefixed provenance lines for CSV outputs.
pub fn csv_header<C: Serialize>(command: &str, config: &C, timestamp: bool) -> Result<String> {
    let mut out = String::new();
    out.push_str(&format!("# dtx {VERSION}\n"));
    out.push_str(&format!("# command: {command}\n"));
    out.push_str(&format!("# config: {}\n", serde_json::to_string(config)?));
    if timestamp {
        out.push_str(&format!("# generated_at_unix: {}\n", unix_timestamp()));
    }
    Ok(out)
}

/// Metadata object embedded in JSON outputs.
pub fn json_metadata<C: Serialize>(
    command: &str,
    config: &C,
    timestamp: bool,
) -> Result<serde_json::Value> {
    let mut meta = serde_json::json!({
        "version": VERSION,
        "command": command,
        "config": serde_json::to_value(config)?,
    });
    if timestamp {
        meta["generated_at_unix"] = serde_json::json!(unix_timestamp());
    }
    Ok(meta)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    file.write_all(text.as_bytes())?;
    file.flush()?;
    Ok(())
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    write_text(path, &format!("{text}\n"))
}

/// 17-significant-digit float rendering for CSV cells.
pub fn f(v: f64) -> String {
    dtx_core::io::fmt(v)
}
