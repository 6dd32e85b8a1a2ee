//! Run settings: command-line flags, a flat `key = value` file, defaults.
//!
//! Flags win over the file, the file wins over defaults. Every value that a
//! subcommand reads is echoed, in reading order, into the manifest.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde_json::{Map, Value};

/// Settings error that maps to the usage exit code.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(UsageError(msg.into()).into())
}

/// Parses `key = value` lines; `#` starts a comment, blank lines are
/// skipped, later keys override earlier ones.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return usage(format!("config line {}: expected `key = value`, got {raw:?}", i + 1));
        };
        let (k, v) = (k.trim(), v.trim().trim_matches('"'));
        if k.is_empty() {
            return usage(format!("config line {}: empty key", i + 1));
        }
        out.insert(k.to_string(), v.to_string());
    }
    Ok(out)
}

pub fn read_config(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    parse_config(&text)
}

pub struct Settings {
    file: BTreeMap<String, String>,
    used: Vec<String>,
    echo: Map<String, Value>,
}

impl Settings {
    pub fn new(file: BTreeMap<String, String>) -> Self {
        Settings { file, used: Vec::new(), echo: Map::new() }
    }

    pub fn has_file_key(&self, key: &str) -> bool {
        self.file.contains_key(key)
    }

    /// Flag if given, else the config entry, else `default`.
    pub fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr + Clone + Into<Value>,
    {
        let v = match (flag, self.file.get(key)) {
            (Some(v), _) => v,
            (None, Some(s)) => match s.parse() {
                Ok(v) => v,
                Err(_) => return usage(format!("config key {key}: cannot parse {s:?}")),
            },
            (None, None) => default,
        };
        self.used.push(key.to_string());
        self.echo.insert(key.to_string(), v.clone().into());
        Ok(v)
    }

    /// Like [`get`](Self::get) for boolean switches, where an absent flag
    /// means "not given".
    pub fn switch(&mut self, key: &str, flag: bool, default: bool) -> Result<bool> {
        self.get(key, flag.then_some(true), default)
    }

    /// Fails on config keys that no part of the run read.
    pub fn check_unused(&self) -> Result<()> {
        let unknown: Vec<&str> =
            self.file.keys().filter(|k| !self.used.contains(k)).map(String::as_str).collect();
        if !unknown.is_empty() {
            bail!(UsageError(format!("unknown config keys for this subcommand: {}", unknown.join(", "))));
        }
        Ok(())
    }

    pub fn echo(&self) -> &Map<String, Value> {
        &self.echo
    }
}
