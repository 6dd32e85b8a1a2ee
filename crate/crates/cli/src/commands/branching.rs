//! Poisson-cluster branching: measure-valued runs, Poissonized particle
//! counts, the embedded particle system and the weighted-mass law.

use anyhow::Result;
use clap::Args;
use wfren_core::branching::{
    poissonize, run_embedded_h00, run_embedded_h01, run_embedded_h11, run_renorm_branching, weighted_mass_statistics,
    AtomicMeasure, BranchingConfig, Density, EmbeddedOutcome, OffspringContext,
};
use wfren_core::io::{write_embedded_runs, write_histogram, write_table};
use wfren_core::loglaplace::McConfig;
use wfren_core::stats::replicate;

use super::{num, Ctx};
use crate::config::usage;
use crate::expr::parse_list;

#[derive(Args, Debug)]
pub struct BranchingArgs {
    /// Density: h11, h00, h01 or h0m<k> [default: h00]
    #[arg(long)]
    pub h: Option<String>,
    /// γ of every step when --gammas is not given [default: 1]
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Number of steps when --gammas is not given [default: 10]
    #[arg(long)]
    pub n: Option<usize>,
    /// Explicit γ_0,γ_1,…; the step into time −k uses γ_k
    #[arg(long)]
    pub gammas: Option<String>,
    /// Start position [default: 0.5]
    #[arg(long)]
    pub x: Option<f64>,
    /// Embedded particle-system runs [default: 1000]
    #[arg(long)]
    pub runs: Option<usize>,
    /// Grid intervals of the U_γ h cache [default: 40]
    #[arg(long = "M")]
    pub m: Option<usize>,
    /// Clusters per node of the cache [default: 20000]
    #[arg(long)]
    pub cache_replicas: Option<usize>,
    /// Path step inside clusters [default: 0.01]
    #[arg(long)]
    pub dt: Option<f64>,
    /// Bins for merging interior atoms; 0 keeps every atom [default: 200]
    #[arg(long)]
    pub bins: Option<usize>,
    /// Measure-valued runs for the weighted-mass law [default: 400]
    #[arg(long)]
    pub mass_replicas: Option<usize>,
    /// Lower edge of the middle-mass window [default: 0.05]
    #[arg(long)]
    pub lower: Option<f64>,
    /// Upper edge of the middle-mass window [default: 20]
    #[arg(long)]
    pub upper: Option<f64>,
    /// Weighted mass past which a run is stopped and counted as large [default: 1000]
    #[arg(long)]
    pub stop_mass: Option<f64>,
    /// Measure-valued trajectories exported step by step [default: 5]
    #[arg(long)]
    pub trajectories: Option<usize>,
}

pub fn run(a: &BranchingArgs, ctx: &mut Ctx) -> Result<bool> {
    let s = &mut ctx.settings;
    let h: Density = s.get("h", a.h.clone(), "h00".to_string())?.parse()?;
    let gamma = s.get("gamma", a.gamma, 1.0)?;
    let n = s.get("n", a.n, 10)?;
    let gammas_spec = s.get("gammas", a.gammas.clone(), String::new())?;
    let x = s.get("x", a.x, 0.5)?;
    let runs = s.get("runs", a.runs, 1000)?;
    let m = s.get("M", a.m, 40)?;
    let cache_replicas = s.get("cache-replicas", a.cache_replicas, 20_000)?;
    let dt = s.get("dt", a.dt, 1e-2)?;
    let bins = s.get("bins", a.bins, 200)?;
    let mass_replicas = s.get("mass-replicas", a.mass_replicas, 400)?;
    let lower = s.get("lower", a.lower, 0.05)?;
    let upper = s.get("upper", a.upper, 20.0)?;
    let stop_mass = s.get("stop-mass", a.stop_mass, 1000.0)?;
    let trajectories = s.get("trajectories", a.trajectories, 5)?;
    ctx.ready()?;
    let gammas = if gammas_spec.is_empty() { vec![gamma; n] } else { parse_list(&gammas_spec)? };
    if gammas.is_empty() {
        return usage("need at least one step");
    }
    let bc = BranchingConfig { dt, bins: (bins > 0).then_some(bins), ..BranchingConfig::default() };
    let seeder = ctx.seeder.clone();

    // measure-valued trajectories with the Poissonized counts of hX
    let start = AtomicMeasure::dirac(x, 1.0)?;
    let mut rows = Vec::new();
    for r in 0..trajectories {
        let mut rng = seeder.derive("trajectory", 0).replica(r as u64);
        let traj = run_renorm_branching(&gammas, &start, &bc, &mut rng)?;
        for (k, xk) in traj.iter().enumerate() {
            let particles = poissonize(xk, |y| h.eval(y), &mut rng);
            rows.push([
                r.to_string(),
                k.to_string(),
                xk.atoms().len().to_string(),
                num(xk.total_mass()),
                num(xk.integrate(|y| h.eval(y))),
                num(xk.interior_mass()),
                particles.len().to_string(),
            ]);
        }
    }
    write_table(
        ctx.path("measure_trajectories.csv"),
        &["replica", "step", "atoms", "total_mass", "weighted_mass", "interior_mass", "poissonized_count"],
        rows,
    )?;

    // one offspring law per distinct γ
    let mc = McConfig::new(cache_replicas, dt);
    let mut distinct: Vec<f64> = Vec::new();
    for g in &gammas {
        if !distinct.contains(g) {
            distinct.push(*g);
        }
    }
    let laws = distinct
        .iter()
        .enumerate()
        .map(|(i, g)| OffspringContext::new(h, *g, m, &mc, bc, &seeder.derive("cache", i as u64)))
        .collect::<wfren_core::Result<Vec<_>>>()?;
    let contexts: Vec<&OffspringContext> =
        gammas.iter().map(|g| &laws[distinct.iter().position(|d| d == g).expect("listed")]).collect();
    let es = seeder.derive("embedded", 0);
    let embedded = replicate(runs, |r| {
        let mut rng = es.replica(r as u64);
        match h {
            Density::H11 => run_embedded_h11(&contexts, x, &mut rng),
            Density::H00 => run_embedded_h00(&contexts, x, &mut rng),
            Density::H0m(_) => run_embedded_h01(&contexts, x, &mut rng),
        }
    })
    .into_iter()
    .collect::<wfren_core::Result<Vec<_>>>()?;
    write_embedded_runs(ctx.path("embedded.csv"), &embedded)?;
    let frac = |o: EmbeddedOutcome| embedded.iter().filter(|r| r.outcome == o).count() as f64 / runs.max(1) as f64;
    ctx.manifest.result("embedded_extinct", frac(EmbeddedOutcome::Extinct));
    ctx.manifest.result("embedded_grew_past_ceiling", frac(EmbeddedOutcome::GrewPastCeiling));
    ctx.manifest.result("embedded_undecided", frac(EmbeddedOutcome::Undecided));

    let st = weighted_mass_statistics(
        &gammas,
        x,
        h,
        mass_replicas,
        (lower, upper),
        stop_mass,
        &bc,
        &seeder.derive("mass", 0),
    )?;
    let mut edges = vec![lower];
    edges.extend([0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0].into_iter().filter(|e| *e > lower && *e < upper));
    edges.extend([upper, stop_mass]);
    write_histogram(ctx.path("mass_histogram.csv"), &edges, &st.histogram(&edges))?;
    ctx.manifest.result("mass_middle", st.middle);
    ctx.manifest.result("mass_middle_se", st.middle_se);
    ctx.manifest.result("mass_below", st.below);
    ctx.manifest.result("mass_above", st.above);
    Ok(true)
}
