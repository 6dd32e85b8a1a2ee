//! The log-Laplace operator U_γ: clusters, grid estimates, iterates, the
//! dual-chain cross-check on h_m and the shape report.

use anyhow::Result;
use clap::Args;
use wfren_core::branching::Density;
use wfren_core::io::{write_function, write_table};
use wfren_core::loglaplace::{
    apply_u, apply_u_dual_hm, check_shape_preservation, chi_m, estimate_u_fn, injected_psi_mean, iterate_u,
    large_gamma_bound, sample_cluster, Shape,
};
use wfren_core::stats::{replicate, z_score, MeanVar};

use super::{num, Ctx, McArgs};
use crate::expr::parse_function;

#[derive(Args, Debug)]
pub struct LoglaplaceArgs {
    /// γ of every step [default: 1]
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Catalyzing function: expression in x, h11/h00/h01/h0m<k>, or @file.csv [default: x]
    #[arg(long)]
    pub p: Option<String>,
    /// Grid intervals [default: 20]
    #[arg(long = "M")]
    pub m: Option<usize>,
    /// Number of U_γ steps to iterate [default: 1]
    #[arg(long)]
    pub n: Option<usize>,
    /// Exponent of h_m(x) = 1 − (1−x)^m for the dual cross-check and bounds [default: 7]
    #[arg(long = "hm")]
    pub hm: Option<u32>,
    /// Dual chains per point [default: 20000]
    #[arg(long)]
    pub dual_replicas: Option<usize>,
    /// Cluster draws for the moment table [default: 20000]
    #[arg(long)]
    pub cluster_draws: Option<usize>,
    #[command(flatten)]
    pub mc: McArgs,
}

const DUAL_POINTS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

pub fn run(a: &LoglaplaceArgs, ctx: &mut Ctx) -> Result<bool> {
    let s = &mut ctx.settings;
    let gamma = s.get("gamma", a.gamma, 1.0)?;
    let p_spec = s.get("p", a.p.clone(), "x".to_string())?;
    let m = s.get("M", a.m, 20)?;
    let n = s.get("n", a.n, 1)?;
    let hm = s.get("hm", a.hm, 7)?;
    let dual_replicas = s.get("dual-replicas", a.dual_replicas, 20_000)?;
    let cluster_draws = s.get("cluster-draws", a.cluster_draws, 20_000)?;
    let cfg = a.mc.resolve(s, 10_000, 1e-2)?;
    ctx.ready()?;
    let p = parse_function(&p_spec)?.grid(m)?;
    let seeder = ctx.seeder.clone();

    let one = apply_u(gamma, &p, &cfg, &seeder.derive("apply", 0))?;
    write_function(ctx.path("u.csv"), &one.function(), Some(&one.std_errors))?;
    ctx.manifest.result("u_max_se", one.max_se());
    if n > 1 {
        let stages = iterate_u(&vec![gamma; n], &p, &cfg, &seeder.derive("iterate", 0))?;
        for (k, st) in stages.iter().enumerate() {
            write_function(ctx.path(&format!("iterate_{:02}.csv", k + 1)), &st.function(), Some(&st.propagated_se))?;
        }
        let last = stages.last().expect("n > 1");
        ctx.manifest.result("iterate_sup", last.function().sup());
    }

    let mono = p.first_differences().iter().all(|d| *d >= -1e-12);
    let concave = p.second_differences().iter().all(|d| *d <= 1e-12);
    if mono {
        let shape = if concave { Shape::MonotoneConcave } else { Shape::Monotone };
        let rep = check_shape_preservation(gamma, &p, shape, &cfg, &seeder.derive("shape", 0))?;
        ctx.manifest.result("shape_checked", format!("{shape:?}"));
        ctx.manifest.result("shape_preserved", rep.preserved());
        ctx.manifest.result("shape_monotone_slack", rep.monotone_slack);
        if let Some(c) = rep.concave_slack {
            ctx.manifest.result("shape_concave_slack", c);
        }
    } else {
        ctx.manifest.result("shape_checked", "skipped: p is not nondecreasing");
    }

    let density = Density::H0m(hm);
    let mut rows = Vec::new();
    for (i, &x) in DUAL_POINTS.iter().enumerate() {
        let (cl, cl_se) = estimate_u_fn(gamma, |y| density.eval(y), x, &cfg, &seeder.derive("cluster-hm", i as u64));
        let (du, du_se) = apply_u_dual_hm(gamma, hm, x, dual_replicas, &seeder.derive("dual-hm", i as u64))?;
        rows.push([num(x), num(cl), num(cl_se), num(du), num(du_se), num(z_score(cl, cl_se, du, du_se))]);
    }
    write_table(ctx.path("dual_hm.csv"), &["x", "cluster", "cluster_se", "dual", "dual_se", "z"], rows)?;

    let mut rows = Vec::new();
    for k in 1..=hm {
        let (mean, se) = injected_psi_mean(gamma, k, dual_replicas, &seeder.derive("psi", k as u64));
        rows.push([k.to_string(), num(chi_m(gamma, k)), num(large_gamma_bound(gamma, k)), num(mean), num(se)]);
    }
    write_table(ctx.path("bounds.csv"), &["m", "chi_m", "large_gamma_bound", "psi_mean", "psi_se"], rows)?;

    // ⟨Z,1⟩ is Exp with mean γ, so E⟨Z,1⟩^k = k! γ^k
    let interior = 0.5;
    let masses = replicate(cluster_draws, |r| {
        sample_cluster(gamma, interior, cfg.dt, cfg.scheme, &mut seeder.derive("clusters", 0).replica(r as u64))
            .total_mass
    });
    let rows = (1..=3).map(|k: i32| {
        let mv: MeanVar = masses.iter().map(|z| z.powi(k)).collect();
        let exact = (1..=k).product::<i32>() as f64 * gamma.powi(k);
        [k.to_string(), num(exact), num(mv.mean()), num(mv.se())]
    });
    write_table(ctx.path("cluster_moments.csv"), &["k", "exact", "estimate", "se"], rows)?;
    Ok(true)
}
