//! `manifest.json`: what ran, with which settings, and what it produced.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::Result;
use serde_json::{Map, Value};

pub struct Manifest {
    subcommand: String,
    seed: u64,
    seed_source: &'static str,
    started: Instant,
    started_unix: u64,
    outputs: Vec<String>,
    results: Map<String, Value>,
}

impl Manifest {
    pub fn new(subcommand: &str, seed: u64, seed_source: &'static str) -> Self {
        Manifest {
            subcommand: subcommand.to_string(),
            seed,
            seed_source,
            started: Instant::now(),
            started_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            outputs: Vec::new(),
            results: Map::new(),
        }
    }

    pub fn output(&mut self, name: &str) {
        self.outputs.push(name.to_string());
    }

    pub fn result(&mut self, key: &str, v: impl Into<Value>) {
        self.results.insert(key.to_string(), v.into());
    }

    pub fn write(&self, dir: &Path, config: &Map<String, Value>, jobs: usize) -> Result<PathBuf> {
        let mut m = Map::new();
        m.insert("tool".into(), "wfren".into());
        m.insert("version".into(), env!("CARGO_PKG_VERSION").into());
        m.insert("subcommand".into(), self.subcommand.clone().into());
        m.insert("seed".into(), self.seed.into());
        m.insert("seed_source".into(), self.seed_source.into());
        m.insert("jobs".into(), jobs.into());
        m.insert("config".into(), Value::Object(config.clone()));
        m.insert("started_unix".into(), self.started_unix.into());
        m.insert("wall_clock_seconds".into(), self.started.elapsed().as_secs_f64().into());
        m.insert("outputs".into(), self.outputs.clone().into());
        m.insert("results".into(), Value::Object(self.results.clone()));
        let path = dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(&Value::Object(m))? + "\n")?;
        Ok(path)
    }
}
