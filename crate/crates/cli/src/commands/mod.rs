//! One module per subcommand. Each reads its settings first, calls
//! [`Ctx::ready`], then runs and writes its tables into the output
//! directory.

pub mod branching;
pub mod campbell;
pub mod hierarchical;
pub mod invariant_law;
pub mod loglaplace;
pub mod pde_flow;
pub mod renorm_iterate;
pub mod solve_pstar;
pub mod verify;

use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use wfren_core::loglaplace::McConfig;
use wfren_core::rng::Seeder;
use wfren_core::wf::Scheme;

use crate::config::Settings;
use crate::manifest::Manifest;

pub struct Ctx {
    pub settings: Settings,
    pub manifest: Manifest,
    /// Subtree of the root seed owned by this subcommand.
    pub seeder: Seeder,
    pub out: PathBuf,
}

impl Ctx {
    /// Call once all settings are read: rejects leftover config keys and
    /// creates the output directory.
    pub fn ready(&mut self) -> Result<()> {
        self.settings.check_unused()?;
        std::fs::create_dir_all(&self.out)?;
        Ok(())
    }

    /// Path for an output table, recorded in the manifest.
    pub fn path(&mut self, name: &str) -> PathBuf {
        self.manifest.output(name);
        self.out.join(name)
    }
}

/// Monte Carlo settings shared by the estimators.
#[derive(Args, Debug, Clone, Default)]
pub struct McArgs {
    /// Independent replicas per estimate
    #[arg(long)]
    pub replicas: Option<usize>,
    /// Path discretization step
    #[arg(long)]
    pub dt: Option<f64>,
    /// Path scheme: moment-beta or euler
    #[arg(long)]
    pub scheme: Option<String>,
}

impl McArgs {
    pub fn resolve(&self, s: &mut Settings, replicas: usize, dt: f64) -> Result<McConfig> {
        let replicas = s.get("replicas", self.replicas, replicas)?;
        let dt = s.get("dt", self.dt, dt)?;
        let scheme: Scheme = s.get("scheme", self.scheme.clone(), "moment-beta".to_string())?.parse()?;
        Ok(McConfig { replicas, dt, scheme })
    }
}

/// Shortest round-trip formatting, as in the library tables.
pub fn num(x: f64) -> String {
    format!("{x}")
}
