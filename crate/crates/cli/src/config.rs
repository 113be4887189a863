//! Declarative run configuration.
//!
//! A config file holds `key = value` lines (`#` starts a comment). A run
//! manifest written by this tool is also accepted: its `args` object is read
//! back, which re-runs the command with the same effective settings. Entries
//! are spliced into the argument list right after the subcommand, so flags
//! given on the command line win.

use std::path::Path;

use anyhow::{bail, Context, Result};

pub fn load(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    if text.trim_start().starts_with('{') {
        return from_manifest(&text);
    }
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("config line {}: expected `key = value`", n + 1);
        };
        let v = v.trim().trim_matches('"');
        out.push((normalize(k), v.to_string()));
    }
    Ok(out)
}

fn from_manifest(text: &str) -> Result<Vec<(String, String)>> {
    let v: serde_json::Value = serde_json::from_str(text).context("parsing manifest")?;
    let Some(args) = v.get("args").and_then(|a| a.as_object()) else {
        bail!("manifest has no `args` object");
    };
    let mut out = Vec::new();
    for (k, v) in args {
        let s = match v {
            serde_json::Value::Null => continue,
            serde_json::Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        out.push((normalize(k), s));
    }
    Ok(out)
}

fn normalize(key: &str) -> String {
    key.trim().replace('_', "-")
}

/// Removes `--config <path>` (or `--config=<path>`) from `argv` and inserts
/// the file's entries as flags after the subcommand name.
pub fn splice(mut argv: Vec<String>, subcommands: &[&str]) -> Result<Vec<String>> {
    let mut path = None;
    let mut i = 1;
    while i < argv.len() {
        if argv[i] == "--config" {
            if i + 1 >= argv.len() {
                bail!("--config needs a path");
            }
            path = Some(argv.remove(i + 1));
            argv.remove(i);
        } else if let Some(p) = argv[i].strip_prefix("--config=") {
            path = Some(p.to_string());
            argv.remove(i);
        } else {
            i += 1;
        }
    }
    let Some(path) = path else { return Ok(argv) };
    let entries = load(Path::new(&path))?;
    let Some(at) = argv.iter().position(|a| subcommands.contains(&a.as_str())) else {
        bail!("--config given without a subcommand");
    };
    let flags = entries.into_iter().flat_map(|(k, v)| [format!("--{k}"), v]);
    argv.splice(at + 1..at + 1, flags);
    Ok(argv)
}
