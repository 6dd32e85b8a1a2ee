//! The boundary value problem ½x(1−x)p″ + p(1−p) = 0, p(0)=0, p(1)=1,
//! with a long-horizon Cauchy cross-check.

use anyhow::Result;
use clap::Args;
use wfren_core::io::write_function;
use wfren_core::pde::{run_cauchy_1d, solve_p_star, FlowConfig, GridField1D, PStarConfig, PStarMethod};

use super::Ctx;

#[derive(Args, Debug)]
pub struct SolvePstarArgs {
    /// Grid intervals [default: 200]
    #[arg(long = "M")]
    pub m: Option<usize>,
    /// Newton residual tolerance [default: 1e-8]
    #[arg(long)]
    pub tol: Option<f64>,
    /// [default: 100]
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Horizon of the Cauchy cross-check from 1 − (1−x)^7; 0 skips it [default: 40]
    #[arg(long)]
    pub cauchy_horizon: Option<f64>,
}

pub fn run(a: &SolvePstarArgs, ctx: &mut Ctx) -> Result<bool> {
    let s = &mut ctx.settings;
    let m = s.get("M", a.m, 200)?;
    let tol = s.get("tol", a.tol, 1e-8)?;
    let max_iter = s.get("max-iter", a.max_iter, 100)?;
    let horizon = s.get("cauchy-horizon", a.cauchy_horizon, 40.0)?;
    ctx.ready()?;

    let sol = solve_p_star(&PStarConfig { m, tol, max_iter, ..PStarConfig::default() })?;
    let p = sol.field.to_catalyzing()?;
    write_function(ctx.path("p_star.csv"), &p, None)?;
    let mf = &mut ctx.manifest;
    match sol.method {
        PStarMethod::Newton { iterations } => {
            mf.result("method", "newton");
            mf.result("newton_iterations", iterations);
        }
        PStarMethod::CauchyFallback => mf.result("method", "cauchy-fallback"),
    }
    mf.result("residual", sol.residual);
    mf.result("monotone", p.first_differences().iter().all(|d| *d >= 0.0));
    mf.result("concave", p.second_differences().iter().all(|d| *d <= 0.0));
    let h7 = |x: f64| 1.0 - (1.0 - x).powi(7);
    let sandwich = p.nodes().zip(p.values()).all(|(x, y)| x <= *y && *y <= h7(x));
    mf.result("sandwich_x_le_p_le_h7", sandwich);

    if horizon > 0.0 {
        let start = GridField1D::from_fn(m, h7)?;
        // the explicit step shrinks like 1/M², so the step cap scales with the grid
        let steps = (4.0 * horizon * (m * m) as f64).ceil() as usize + 1000;
        let cfg = FlowConfig { m, max_steps: steps, ..FlowConfig::default() };
        let u = run_cauchy_1d(&start, horizon, &cfg)?;
        ctx.manifest.result("sup_distance_to_cauchy", sol.field.sup_distance(&u));
        write_function(ctx.path("cauchy.csv"), &u.to_catalyzing()?, None)?;
    }
    Ok(true)
}
