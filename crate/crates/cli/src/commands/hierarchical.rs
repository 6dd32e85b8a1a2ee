//! Interacting catalytic diffusions on the truncated hierarchical group.
//! Block variances over time are an exploratory view of clustering, not a
//! test of it.

use anyhow::Result;
use clap::Args;
use wfren_core::hierarchical::{
    block_average, interaction_chain_extract, recurrence_test, simulate_hierarchical, HierarchicalConfig,
    MigrationSequence,
};
use wfren_core::io::{write_chain, write_table, write_trajectory};
use wfren_core::renorm::CatalyticDiffusionMatrix;
use wfren_core::stats::{replicate, MeanVar};

use super::{num, Ctx};
use crate::expr::{parse_function, parse_list};

#[derive(Args, Debug)]
pub struct HierarchicalArgs {
    /// Freedom N of the group [default: 2]
    #[arg(long = "N")]
    pub n: Option<u32>,
    /// Truncation level K; the lattice has N^K sites [default: 4]
    #[arg(long = "K")]
    pub k: Option<usize>,
    /// Migration constants c_0,…,c_{K−1} [default: 1 at every level]
    #[arg(long)]
    pub c: Option<String>,
    /// Catalyzing function of w^{α,p} [default: x]
    #[arg(long)]
    pub p: Option<String>,
    /// [default: 1]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Initial value of the catalyst at every site [default: 0.5]
    #[arg(long)]
    pub theta1: Option<f64>,
    /// Initial value of the reactant at every site [default: 0.5]
    #[arg(long)]
    pub theta2: Option<f64>,
    /// [default: 1]
    #[arg(long)]
    pub horizon: Option<f64>,
    /// [default: 0.001]
    #[arg(long)]
    pub dt: Option<f64>,
    /// Steps between snapshots [default: 100]
    #[arg(long)]
    pub record_every: Option<usize>,
    /// Independent lattices for the global-average drift [default: 20]
    #[arg(long)]
    pub replicas: Option<usize>,
    /// Geometric rates r in c_k = r^k for the recurrence sweep [default: 0.5,0.9,1,1.1,2]
    #[arg(long)]
    pub recurrence_r: Option<String>,
    /// Tolerance of the recurrence test [default: 1e-9]
    #[arg(long)]
    pub recurrence_tol: Option<f64>,
}

pub fn run(a: &HierarchicalArgs, ctx: &mut Ctx) -> Result<bool> {
    let s = &mut ctx.settings;
    let n = s.get("N", a.n, 2)?;
    let levels = s.get("K", a.k, 4)?;
    let c_spec = s.get("c", a.c.clone(), String::new())?;
    let p_spec = s.get("p", a.p.clone(), "x".to_string())?;
    let alpha = s.get("alpha", a.alpha, 1.0)?;
    let theta = [s.get("theta1", a.theta1, 0.5)?, s.get("theta2", a.theta2, 0.5)?];
    let horizon = s.get("horizon", a.horizon, 1.0)?;
    let dt = s.get("dt", a.dt, 1e-3)?;
    let record_every = s.get("record-every", a.record_every, 100)?;
    let replicas = s.get("replicas", a.replicas, 20)?;
    let r_spec = s.get("recurrence-r", a.recurrence_r.clone(), "0.5,0.9,1,1.1,2".to_string())?;
    let tol = s.get("recurrence-tol", a.recurrence_tol, 1e-9)?;
    ctx.ready()?;

    let c = if c_spec.is_empty() { vec![1.0; levels] } else { parse_list(&c_spec)? };
    let w = CatalyticDiffusionMatrix::new(alpha, parse_function(&p_spec)?.grid(50)?)?;
    let cfg = HierarchicalConfig { n, levels, theta, horizon, dt, record_every };
    let seeder = ctx.seeder.clone();

    let ls = seeder.derive("lattice", 0);
    let runs = replicate(replicas.max(1), |r| simulate_hierarchical(&w, &c, &cfg, &mut ls.replica(r as u64)))
        .into_iter()
        .collect::<wfren_core::Result<Vec<_>>>()?;
    let first = &runs[0];
    write_trajectory(ctx.path("trajectory.csv"), first)?;
    let end = &first.last().expect("initial snapshot is recorded").state;
    write_chain(ctx.path("chain.csv"), &interaction_chain_extract(end, levels)?)?;

    let mut rows = Vec::new();
    for snap in first {
        for k in 0..=levels {
            let origin = block_average(&snap.state, 0, k)?;
            let var = snap.state.within_block_variance(k)?;
            rows.push([num(snap.t), k.to_string(), num(origin[0]), num(origin[1]), num(var[0]), num(var[1])]);
        }
    }
    write_table(
        ctx.path("block_variance.csv"),
        &["t", "level", "origin_block_x1", "origin_block_x2", "within_var1", "within_var2"],
        rows,
    )?;

    for i in 0..2 {
        let d: MeanVar = runs
            .iter()
            .map(|r| r.last().expect("initial snapshot is recorded").state.global_average()[i] - theta[i])
            .collect();
        ctx.manifest.result(&format!("global_drift_{}", i + 1), d.mean());
        ctx.manifest.result(&format!("global_drift_{}_se", i + 1), d.se());
    }
    ctx.manifest.result("block_variance_trend", "exploratory");

    let mut rows = Vec::new();
    for r in parse_list(&r_spec)? {
        let closed = match recurrence_test(&MigrationSequence::Geometric(r), n, tol) {
            Ok(rep) => format!("{:?}", rep.verdict),
            Err(e) => format!("rejected: {e}"),
        };
        let explicit = MigrationSequence::Explicit((0..60).map(|k| r.powi(k)).collect());
        let numeric = recurrence_test(&explicit, n, tol)?;
        let last = numeric.partial_sums.last().copied().unwrap_or(f64::NAN);
        rows.push([num(r), closed, format!("{:?}", numeric.verdict), num(last), numeric.diagnostics]);
    }
    write_table(ctx.path("recurrence.csv"), &["r", "closed_form", "numeric", "partial_sum", "diagnostics"], rows)?;
    if c.len() >= 16 {
        let rep = recurrence_test(&MigrationSequence::Explicit(c.clone()), n, tol)?;
        ctx.manifest.result("recurrence_of_c", format!("{:?}", rep.verdict));
        ctx.manifest.result("recurrence_of_c_diagnostics", rep.diagnostics);
    }
    Ok(true)
}
