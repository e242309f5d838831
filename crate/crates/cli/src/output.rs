//! Deterministic file emission: CSV for curves, JSON for reports. Every file
//! carries the toolkit version and the fully resolved configuration, so a run
//! is reproducible from its outputs alone.

use anyhow::{Context, Result};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Serializes a float with 17 significant digits (round-trip exact for f64).
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub struct CsvWriter {
    buffer: String,
}

impl CsvWriter {
    pub fn new(config_line: &str, columns: &[&str]) -> Self {
        let mut buffer = String::new();
        let _ = writeln!(buffer, "# mvcircle {VERSION}");
        let _ = writeln!(buffer, "# config {config_line}");
        let _ = writeln!(buffer, "{}", columns.join(","));
        Self { buffer }
    }

    pub fn row(&mut self, fields: &[String]) {
        let _ = writeln!(self.buffer, "{}", fields.join(","));
    }

    pub fn write(self, path: &Path) -> Result<()> {
        std::fs::write(path, self.buffer.as_bytes())
            .with_context(|| format!("writing {}", path.display()))
    }
}

/// Wraps a JSON payload with the version/config meta block and writes it.
pub fn write_json(
    path: &Path,
    config: &serde_json::Value,
    payload: serde_json::Value,
) -> Result<()> {
    let document = serde_json::json!({
        "meta": { "version": VERSION, "config": config },
        "result": payload,
    });
    let text = serde_json::to_string_pretty(&document).context("serializing json")?;
    std::fs::write(path, (text + "\n").as_bytes())
        .with_context(|| format!("writing {}", path.display()))
}

pub fn ensure_dir(dir: &str) -> Result<PathBuf> {
    let path = PathBuf::from(dir);
    std::fs::create_dir_all(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(path)
}
