//! Size-biased populations of the h(x) = x(1−x) system built from an
//! immortal particle.

use anyhow::Result;
use clap::Args;
use wfren_core::branching::{immortal_chain_step, simulate_campbell_tree, BranchingConfig, Density, OffspringContext};
use wfren_core::io::write_table;
use wfren_core::loglaplace::McConfig;
use wfren_core::stats::{replicate, MeanVar};
use wfren_core::wf::invariant_moment;

use super::{num, Ctx};
use crate::config::usage;

#[derive(Args, Debug)]
pub struct CampbellArgs {
    /// Homogeneous steps of the size-biased tree [default: 3]
    #[arg(long)]
    pub n: Option<usize>,
    /// Start of the immortal particle [default: 0.5]
    #[arg(long)]
    pub x: Option<f64>,
    /// γ* of every step [default: 1]
    #[arg(long)]
    pub gamma_star: Option<f64>,
    /// Size-biased trees [default: 2000]
    #[arg(long)]
    pub replicas: Option<usize>,
    /// One-step draws of the immortal particle from x [default: 100000]
    #[arg(long)]
    pub draws: Option<usize>,
    /// Length of the exported immortal chain [default: 10000]
    #[arg(long)]
    pub chain_steps: Option<usize>,
    /// Grid intervals of the U_γ h cache [default: 40]
    #[arg(long = "M")]
    pub m: Option<usize>,
    /// Clusters per node of the cache [default: 20000]
    #[arg(long)]
    pub cache_replicas: Option<usize>,
    /// [default: 0.01]
    #[arg(long)]
    pub dt: Option<f64>,
}

/// E[v′(1−v′)] after one step from v: (1+γ) E_Γ[y²(1−y)²] / (v(1−v)).
fn one_step_heterozygosity(v: f64, gamma: f64) -> f64 {
    let m = |k| invariant_moment(gamma, v, k);
    (1.0 + gamma) * (m(2) - 2.0 * m(3) + m(4)) / (v * (1.0 - v))
}

pub fn run(a: &CampbellArgs, ctx: &mut Ctx) -> Result<bool> {
    let s = &mut ctx.settings;
    let n = s.get("n", a.n, 3)?;
    let x = s.get("x", a.x, 0.5)?;
    let gamma = s.get("gamma-star", a.gamma_star, 1.0)?;
    let replicas = s.get("replicas", a.replicas, 2000)?;
    let draws = s.get("draws", a.draws, 100_000)?;
    let chain_steps = s.get("chain-steps", a.chain_steps, 10_000)?;
    let m = s.get("M", a.m, 40)?;
    let cache_replicas = s.get("cache-replicas", a.cache_replicas, 20_000)?;
    let dt = s.get("dt", a.dt, 1e-2)?;
    ctx.ready()?;
    if !(x > 0.0 && x < 1.0) {
        return usage(format!("x must lie in (0,1), got {x}"));
    }
    let seeder = ctx.seeder.clone();

    let ds = seeder.derive("one-step", 0);
    let het: MeanVar = replicate(draws, |r| {
        let v = immortal_chain_step(x, gamma, &mut ds.replica(r as u64));
        v * (1.0 - v)
    })
    .into_iter()
    .collect();
    ctx.manifest.result("one_step_heterozygosity", het.mean());
    ctx.manifest.result("one_step_heterozygosity_se", het.se());
    ctx.manifest.result("one_step_heterozygosity_exact", one_step_heterozygosity(x, gamma));

    let mut rng = seeder.rng("chain", 0);
    let mut v = x;
    let mut rows = vec![["0".to_string(), num(v)]];
    for k in 1..=chain_steps {
        v = immortal_chain_step(v, gamma, &mut rng);
        rows.push([k.to_string(), num(v)]);
    }
    write_table(ctx.path("immortal_chain.csv"), &["step", "v"], rows)?;

    let bc = BranchingConfig { dt, ..BranchingConfig::default() };
    let law = OffspringContext::new(Density::H00, gamma, m, &McConfig::new(cache_replicas, dt), bc, &seeder.derive("cache", 0))?;
    let ts = seeder.derive("trees", 0);
    let trees = replicate(replicas, |r| simulate_campbell_tree(n, x, &law, &mut ts.replica(r as u64)))
        .into_iter()
        .collect::<wfren_core::Result<Vec<_>>>()?;
    let rows = trees.iter().enumerate().map(|(r, t)| {
        let pos = &t.population.positions;
        let mean = pos.iter().sum::<f64>() / pos.len() as f64;
        [r.to_string(), pos.len().to_string(), num(*t.spine.last().expect("spine starts at x")), num(mean)]
    });
    write_table(ctx.path("campbell.csv"), &["replica", "population_size", "spine_end", "mean_position"], rows)?;
    let rows = trees.iter().enumerate().flat_map(|(r, t)| {
        t.spine.iter().enumerate().map(move |(k, v)| [r.to_string(), k.to_string(), num(*v)])
    });
    write_table(ctx.path("spines.csv"), &["replica", "step", "v"], rows)?;
    let size: MeanVar = trees.iter().map(|t| t.population.len() as f64).collect();
    ctx.manifest.result("mean_population_size", size.mean());
    ctx.manifest.result("mean_population_size_se", size.se());
    Ok(true)
}
