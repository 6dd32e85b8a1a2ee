//! Single-site WF diffusion: invariant law, sample path, monotone coupling
//! and the moment-dual chain.

use anyhow::Result;
use clap::Args;
use wfren_core::io::write_table;
use wfren_core::stats::{replicate, MeanVar};
use wfren_core::wf::{
    couple_wf_pair, dual_chain_psi_infinity, invariant_moment, sample_invariant, simulate_wf_path, BetaInvariantLaw,
    WfParams,
};

use super::{num, Ctx};

#[derive(Args, Debug)]
pub struct InvariantLawArgs {
    /// Relative diffusion strength γ = 1/c [default: 1]
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Attraction point [default: 0.5]
    #[arg(long)]
    pub x: Option<f64>,
    /// Draws from the invariant law and dual chains [default: 100000]
    #[arg(long)]
    pub draws: Option<usize>,
    /// Highest moment reported [default: 3]
    #[arg(long)]
    pub moments: Option<u32>,
    /// Length of the exported path and of each coupled pair [default: 10]
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Euler step for paths and pairs [default: 0.001]
    #[arg(long)]
    pub dt: Option<f64>,
    /// Coupled pairs per step size [default: 2000]
    #[arg(long)]
    pub pairs: Option<usize>,
    /// Initial separation of a coupled pair, centred on x [default: 0.1]
    #[arg(long)]
    pub gap: Option<f64>,
}

pub fn run(a: &InvariantLawArgs, ctx: &mut Ctx) -> Result<bool> {
    let s = &mut ctx.settings;
    let gamma = s.get("gamma", a.gamma, 1.0)?;
    let x = s.get("x", a.x, 0.5)?;
    let draws = s.get("draws", a.draws, 100_000)?;
    let moments = s.get("moments", a.moments, 3)?;
    let horizon = s.get("horizon", a.horizon, 10.0)?;
    let dt = s.get("dt", a.dt, 1e-3)?;
    let pairs = s.get("pairs", a.pairs, 2000)?;
    let gap = s.get("gap", a.gap, 0.1)?;
    ctx.ready()?;
    let law = BetaInvariantLaw::new(gamma, x)?;
    let seeder = ctx.seeder.clone();

    let ys = replicate(draws, |r| sample_invariant(&law, &mut seeder.derive("invariant", 0).replica(r as u64)));
    let mut rows = Vec::new();
    let mut worst_z = 0.0f64;
    let mut z = |exact: f64, mv: &MeanVar| worst_z = worst_z.max((mv.mean() - exact).abs() / mv.se().max(1e-300));
    for n in 1..=moments {
        let mv: MeanVar = ys.iter().map(|y| y.powi(n as i32)).collect();
        let exact = invariant_moment(gamma, x, n);
        z(exact, &mv);
        rows.push([format!("E[y^{n}]"), "invariant draws".into(), num(exact), num(mv.mean()), num(mv.se())]);
        let dual: MeanVar = replicate(draws, |r| {
            let psi = dual_chain_psi_infinity(n as u64, gamma, None, &mut seeder.derive("dual", n as u64).replica(r as u64));
            x.powi(psi as i32)
        })
        .into_iter()
        .collect();
        z(exact, &dual);
        rows.push([format!("E[y^{n}]"), "dual chain".into(), num(exact), num(dual.mean()), num(dual.se())]);
    }
    let het: MeanVar = ys.iter().map(|y| y * (1.0 - y)).collect();
    let het_exact = x * (1.0 - x) / (1.0 + gamma);
    z(het_exact, &het);
    rows.push(["E[y(1-y)]".into(), "invariant draws".into(), num(het_exact), num(het.mean()), num(het.se())]);
    write_table(ctx.path("moments.csv"), &["quantity", "method", "exact", "estimate", "se"], rows)?;
    ctx.manifest.result("moments_worst_z", worst_z);

    let params = WfParams::new(x, gamma, dt)?;
    let path = simulate_wf_path(&params, x, horizon, &mut seeder.rng("path", 0))?;
    let path_rows = path.times().zip(&path.values).map(|(t, y)| [num(t), num(*y)]);
    write_table(ctx.path("path.csv"), &["t", "y"], path_rows)?;
    ctx.manifest.result("path_time_average", path.time_average(|y| y));

    let (lo, hi) = ((x - 0.5 * gap).max(0.0), (x + 0.5 * gap).min(1.0));
    let mut rows = Vec::new();
    for (k, h) in [dt, dt / 2.0, dt / 4.0].into_iter().enumerate() {
        let p = WfParams::new(x, gamma, h)?;
        let res = replicate(pairs, |r| {
            let mut rng = seeder.derive("coupling", k as u64).replica(r as u64);
            // horizon 1/c = γ
            couple_wf_pair(&p, &p, lo, hi, gamma, &mut rng).map(|cp| {
                let g = (cp.high.values.last().unwrap() - cp.low.values.last().unwrap()).abs();
                (cp.violation_fraction, g)
            })
        })
        .into_iter()
        .collect::<wfren_core::Result<Vec<_>>>()?;
        let viol: MeanVar = res.iter().map(|r| r.0).collect();
        let g: MeanVar = res.iter().map(|r| r.1).collect();
        rows.push([num(h), num(viol.mean()), num(g.mean()), num(g.se()), num((hi - lo) * (-1.0f64).exp())]);
    }
    write_table(
        ctx.path("coupling.csv"),
        &["dt", "violation_fraction", "gap_at_1_over_c", "gap_se", "predicted_gap"],
        rows,
    )?;
    Ok(true)
}
