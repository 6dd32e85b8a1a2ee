//! Iterated renormalization of w^{α,p} along a migration schedule.

use anyhow::Result;
use clap::Args;
use wfren_core::io::{write_function, write_table};
use wfren_core::loglaplace::CatalyzingFunction;
use wfren_core::renorm::{
    effective_boundary, estimate_nu_moments, f_c, iterate_renorm, iterated_kernel_sample, rescaled_f,
    schedule_from_ck, CatalyticDiffusionMatrix, MigrationSchedule, NuConfig,
};
use wfren_core::pde::verify_fixed_point;

use super::{num, Ctx, McArgs};
use crate::config::usage;
use crate::expr::{parse_function, parse_list};

#[derive(Args, Debug)]
pub struct RenormIterateArgs {
    /// Constant γ_k ≡ γ*: c_k = (1+γ*)^(−k), β = 1/γ* [default: 1 unless --c is given]
    #[arg(long)]
    pub gamma_star: Option<f64>,
    /// Explicit migration constants c_0,c_1,… (comma separated)
    #[arg(long)]
    pub c: Option<String>,
    /// Number of renormalization steps [default: 15]
    #[arg(long)]
    pub n: Option<usize>,
    /// Catalyzing function of the start matrix [default: x]
    #[arg(long)]
    pub p: Option<String>,
    /// Catalyst coefficient α of the start matrix [default: γ* with --gamma-star, else 1]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Grid intervals [default: 20]
    #[arg(long = "M")]
    pub m: Option<usize>,
    /// Also simulate the stationary pair law at (x1, x2) for c_0
    #[arg(long)]
    pub nu: bool,
    /// Point for the stationary law and kernel draws [default: 0.5]
    #[arg(long)]
    pub x1: Option<f64>,
    /// [default: 0.5]
    #[arg(long)]
    pub x2: Option<f64>,
    /// Replicas of the stationary pair [default: 200]
    #[arg(long)]
    pub nu_replicas: Option<usize>,
    /// Draws from the iterated kernel [default: 0]
    #[arg(long)]
    pub kernel_samples: Option<usize>,
    /// Levels composed in each kernel draw [default: 2]
    #[arg(long)]
    pub kernel_levels: Option<usize>,
    /// Compare (1+γ*)F_{1/γ*} with the identity on the last rescaled stage
    #[arg(long)]
    pub fixed_point: bool,
    #[command(flatten)]
    pub mc: McArgs,
}

pub fn run(a: &RenormIterateArgs, ctx: &mut Ctx) -> Result<bool> {
    let s = &mut ctx.settings;
    let c_list = s.get("c", a.c.clone(), String::new())?;
    let gamma_star = s.get("gamma-star", a.gamma_star, if c_list.is_empty() { 1.0 } else { f64::NAN })?;
    let n = s.get("n", a.n, 15)?;
    let p_spec = s.get("p", a.p.clone(), "x".to_string())?;
    let alpha = s.get("alpha", a.alpha, if gamma_star.is_nan() { 1.0 } else { gamma_star })?;
    let m = s.get("M", a.m, 20)?;
    let nu = s.switch("nu", a.nu, false)?;
    let x = [s.get("x1", a.x1, 0.5)?, s.get("x2", a.x2, 0.5)?];
    let nu_replicas = s.get("nu-replicas", a.nu_replicas, 200)?;
    let kernel_samples = s.get("kernel-samples", a.kernel_samples, 0)?;
    let kernel_levels = s.get("kernel-levels", a.kernel_levels, 2)?;
    let fixed_point = s.switch("fixed-point", a.fixed_point, false)?;
    let cfg = a.mc.resolve(s, 4000, 1e-2)?;
    ctx.ready()?;
    if !c_list.is_empty() && !gamma_star.is_nan() {
        return usage("give either --gamma-star or --c, not both");
    }
    if fixed_point && gamma_star.is_nan() {
        return usage("--fixed-point needs --gamma-star");
    }

    let c = if c_list.is_empty() {
        MigrationSchedule::constant_gamma(gamma_star, n)?.c
    } else {
        parse_list(&c_list)?
    };
    let sched = schedule_from_ck(c.clone(), 1.0 / alpha)?;
    let w = CatalyticDiffusionMatrix::new(alpha, parse_function(&p_spec)?.grid(m)?)?;
    let seeder = ctx.seeder.clone();

    let rows = (0..sched.len()).map(|k| {
        [k.to_string(), num(sched.c[k]), num(sched.s[k]), num(sched.s_bar[k]), num(sched.gamma[k])]
    });
    write_table(ctx.path("schedule.csv"), &["k", "c", "s", "s_bar", "gamma"], rows)?;
    let d = sched.diagnostics();
    ctx.manifest.result("schedule_sum_diverges", d.sum_diverges);
    ctx.manifest.result("schedule_gamma_stabilizes", d.gamma_stabilizes);
    ctx.manifest.result("schedule_gamma_star_estimate", d.gamma_star);

    let stages = iterate_renorm(&w, &c, n, &cfg, &seeder.derive("iterate", 0))?;
    let mut rows = Vec::new();
    let last = stages.last().expect("stage 0 is always present").rescaled.p.clone();
    let mut prev: Option<&CatalyzingFunction> = None;
    for st in &stages {
        let p = &st.rescaled.p;
        write_function(ctx.path(&format!("stage_{:02}.csv", st.n)), p, Some(&st.propagated_se))?;
        let step = prev.map(|q| p.sup_distance(q)).unwrap_or(f64::NAN);
        let max_se = st.propagated_se.iter().copied().fold(0.0, f64::max);
        rows.push([
            st.n.to_string(),
            num(st.gamma),
            num(st.s_bar),
            num(step),
            num(p.sup_distance(&last)),
            num(max_se),
            format!("{:?}", effective_boundary(&st.unscaled())),
        ]);
        prev = Some(p);
    }
    write_table(
        ctx.path("convergence.csv"),
        &["n", "gamma", "s_bar", "sup_step", "sup_to_last", "propagated_se", "effective_boundary"],
        rows,
    )?;
    let tail = stages.windows(2).last().map(|w| w[1].rescaled.p.sup_distance(&w[0].rescaled.p));
    ctx.manifest.result("last_sup_step", tail.unwrap_or(f64::NAN));

    // One step two ways: F_{c_0} w, and F̄_{γ_0} on the rescaled start.
    if n > 0 {
        let step_seed = seeder.derive("first-step", 0);
        let (fw, fse) = f_c(&w, c[0], &cfg, &step_seed)?;
        let start = CatalyticDiffusionMatrix::new(1.0, w.p.scaled(1.0 / alpha))?;
        let (rw, rest) = rescaled_f(sched.gamma[0], &start, &cfg, &step_seed)?;
        let rows = fw.p.nodes().enumerate().map(|(i, x)| {
            [num(x), num(fw.p.values()[i]), num(fse[i]), num(rw.p.values()[i]), num(rest.std_errors[i])]
        });
        write_table(ctx.path("first_step.csv"), &["x", "f_c_p", "f_c_se", "rescaled_p", "rescaled_se"], rows)?;
        ctx.manifest.result("first_step_alpha", fw.alpha);
        ctx.manifest.result("first_step_rescaling_gap", fw.scaled(1.0 / fw.alpha).p.sup_distance(&rw.p));
    }

    if nu && n > 0 {
        let ncfg = NuConfig { replicas: nu_replicas, dt: cfg.dt.min(1e-2), scheme: cfg.scheme, ..NuConfig::default() };
        let mo = estimate_nu_moments(c[0], &w, x, &ncfg, &seeder.derive("nu", 0))?;
        let (fw, _) = f_c(&w, c[0], &cfg, &seeder.derive("nu-reference", 0))?;
        let (r11, _, r22) = fw.at(x);
        let rows = [
            // the estimator centres at x
            ("mean1", x[0] + mo.mean[0], mo.mean_se[0], x[0]),
            ("mean2", x[1] + mo.mean[1], mo.mean_se[1], x[1]),
            ("cov11", mo.cov[0], mo.cov_se[0], r11 / c[0]),
            ("cov12", mo.cov[1], mo.cov_se[1], 0.0),
            ("cov22", mo.cov[2], mo.cov_se[2], r22 / c[0]),
        ]
        .map(|(q, v, se, r)| [q.to_string(), num(v), num(se), num(r)]);
        write_table(ctx.path("nu_moments.csv"), &["quantity", "estimate", "se", "reference"], rows)?;
    }

    if kernel_samples > 0 {
        let levels = kernel_levels.min(n);
        let iterates: Vec<CatalyticDiffusionMatrix> = stages[..levels].iter().map(|s| s.unscaled()).collect();
        let ncfg = NuConfig { replicas: 1, dt: cfg.dt.min(1e-2), scheme: cfg.scheme, ..NuConfig::default() };
        let ks = seeder.derive("kernel", 0);
        let draws = wfren_core::stats::replicate(kernel_samples, |r| {
            iterated_kernel_sample(&iterates, &c, levels, x, &ncfg, &mut ks.replica(r as u64))
        })
        .into_iter()
        .collect::<wfren_core::Result<Vec<_>>>()?;
        let rows = draws.iter().enumerate().map(|(i, y)| [i.to_string(), num(y[0]), num(y[1])]);
        write_table(ctx.path("kernel_samples.csv"), &["sample", "y1", "y2"], rows)?;
        ctx.manifest.result("kernel_levels", levels);
    }

    if fixed_point {
        let last = &stages.last().expect("stage 0 is always present").rescaled;
        let rep = verify_fixed_point(last, gamma_star, &cfg, &seeder.derive("fixed-point", 0))?;
        ctx.manifest.result("fixed_point_sup_residual", rep.sup_residual);
        ctx.manifest.result("fixed_point_alpha_residual", rep.alpha_residual);
        ctx.manifest.result("fixed_point_se_at_sup", rep.propagated_se);
        ctx.manifest.result("fixed_point_max_se", rep.max_se);
    }
    Ok(true)
}
