use std::fs;
use std::path::Path;

use anyhow::Context;
use serde::Serialize;

use crate::config::RunConfig;

pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    config: &'a RunConfig,
    #[serde(flatten)]
    body: &'a T,
}

/// Pretty JSON with the command, version, seed and resolved config on top.
pub fn write_json<T: Serialize>(
    path: &Path,
    command: &str,
    cfg: &RunConfig,
    body: &T,
) -> anyhow::Result<()> {
    let env = Envelope {
        command,
        version: VERSION,
        seed: cfg.seed,
        config: cfg,
        body,
    };
    let mut text = serde_json::to_string_pretty(&env)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn run_metadata(command: &str, cfg: &RunConfig) -> serde_json::Value {
    serde_json::json!({ "command": command, "version": VERSION, "config": cfg })
}

pub fn write_csv<S: AsRef<str>>(
    path: &Path,
    header: &[&str],
    rows: &[Vec<S>],
) -> anyhow::Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(AsRef::as_ref))?;
    }
    w.flush()
        .with_context(|| format!("writing {}", path.display()))
}

pub fn join<T: ToString>(items: &[T], sep: &str) -> String {
    items
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(sep)
}
