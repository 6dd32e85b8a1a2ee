//! The continuum flow ∂_t w = ½ Σ w_ij ∂_i∂_j w + w from a start with a
//! chosen zero-edge pattern.

use anyhow::Result;
use clap::Args;
use wfren_core::io::{write_field_2d, write_function, write_history};
use wfren_core::pde::{run_flow_2d, solve_p_star, FlowConfig, GridField2D, PStarConfig};
use wfren_core::renorm::CatalyticDiffusionMatrix;

use super::Ctx;
use crate::config::usage;
use crate::expr::parse_function;

#[derive(Args, Debug)]
pub struct PdeFlowArgs {
    /// Zero-edge pattern of the start field, 1..=6 (corners, one edge,
    /// adjacent edges, opposite edges, three edges, all edges) [default: 1]
    #[arg(long)]
    pub case: Option<u8>,
    /// Start from w^{α,p} instead of a case template
    #[arg(long)]
    pub p: Option<String>,
    /// Catalyst coefficient when --p is given [default: 1]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Grid intervals per axis [default: 50]
    #[arg(long = "M")]
    pub m: Option<usize>,
    /// Fraction of the explicit stability limit used per step [default: 0.25]
    #[arg(long)]
    pub courant: Option<f64>,
    /// Stop time even without convergence [default: inf; 500 for cases 4 and 5, whose reactant entry decays algebraically]
    #[arg(long)]
    pub max_time: Option<f64>,
    /// Stop once sup |∂_t w| falls below this [default: 1e-9]
    #[arg(long)]
    pub residual_tol: Option<f64>,
    /// [default: 1000000]
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// Steps between residual history rows [default: 1000]
    #[arg(long)]
    pub record_every: Option<usize>,
    /// Abort as diverged once sup |w| exceeds this [default: 1e6]
    #[arg(long)]
    pub ceiling: Option<f64>,
}

fn wf(x: f64) -> f64 {
    x * (1.0 - x)
}

/// Start fields, perturbed away from the fixed point of their pattern.
fn template(case: u8, m: usize) -> Result<GridField2D> {
    let f: fn(f64, f64) -> [f64; 3] = match case {
        1 => |x1, x2| [2.0 * wf(x1), 0.0, (1.0 + x1) * wf(x2)],
        2 => |x1, x2| [wf(x1) * (1.0 + x2) / 2.0, 0.0, x1 * wf(x2)],
        3 => |x1, x2| [x2 * wf(x1), 0.0, x1 * wf(x2)],
        4 => |x1, x2| [wf(x1) * (1.0 + wf(x2)), 0.0, wf(x1) * wf(x2)],
        5 => |x1, x2| [x2 * wf(x1), 0.0, wf(x1) * wf(x2)],
        6 => |x1, x2| {
            let g = 4.0 * wf(x1) * wf(x2);
            [g, 0.3 * g, g]
        },
        _ => return usage(format!("case must be 1..=6, got {case}")),
    };
    Ok(GridField2D::from_fn(m, f)?)
}

/// Closed-form fixed point of the pattern, where one is known.
fn known_limit(case: u8, m: usize) -> Result<Option<GridField2D>> {
    Ok(match case {
        1 => Some(GridField2D::from_fn(m, |x1, x2| [wf(x1), 0.0, wf(x2)])?),
        4 => Some(GridField2D::from_fn(m, |x1, _| [wf(x1), 0.0, 0.0])?),
        _ => None,
    })
}

pub fn run(a: &PdeFlowArgs, ctx: &mut Ctx) -> Result<bool> {
    let s = &mut ctx.settings;
    let case = s.get("case", a.case, 1)?;
    let p_spec = s.get("p", a.p.clone(), String::new())?;
    let alpha = s.get("alpha", a.alpha, 1.0)?;
    let m = s.get("M", a.m, 50)?;
    let courant = s.get("courant", a.courant, 0.25)?;
    let max_time = s.get("max-time", a.max_time, if matches!(case, 4 | 5) { 500.0 } else { f64::INFINITY })?;
    let residual_tol = s.get("residual-tol", a.residual_tol, 1e-9)?;
    let max_steps = s.get("max-steps", a.max_steps, 1_000_000)?;
    let record_every = s.get("record-every", a.record_every, 1000)?;
    let ceiling = s.get("ceiling", a.ceiling, FlowConfig::default().ceiling)?;
    ctx.ready()?;

    let w0 = if p_spec.is_empty() {
        template(case, m)?
    } else {
        let w = CatalyticDiffusionMatrix::new(alpha, parse_function(&p_spec)?.grid(m)?)?;
        GridField2D::from_catalytic(m, &w)?
    };
    let cfg = FlowConfig { m, courant, max_time, residual_tol, max_steps, record_every, ceiling, ..FlowConfig::default() };
    let res = run_flow_2d(&w0, &cfg)?;
    write_field_2d(ctx.path("field.csv"), &res.field)?;
    write_history(ctx.path("history.csv"), &res.history)?;

    let mf = &mut ctx.manifest;
    mf.result("steps", res.steps);
    mf.result("time", res.time);
    mf.result("converged", res.converged);
    mf.result("min_eigenvalue", res.min_eigenvalue);
    mf.result("start_pattern_case", w0.boundary_pattern(0.0).case());
    mf.result("final_pattern_case", res.pattern.case());
    if p_spec.is_empty() {
        if let Some(t) = known_limit(case, m)? {
            mf.result("sup_distance_to_known_limit", res.field.sup_distance(&t));
        }
        if case == 2 {
            let j = m / 2;
            let factor = res.field.reactant_factor(j)?;
            let pstar = solve_p_star(&PStarConfig { m, ..PStarConfig::default() })?;
            mf.result("reactant_factor_vs_p_star", factor.sup_distance(&pstar.field));
            write_function(ctx.path("reactant_factor.csv"), &factor.to_catalyzing()?, None)?;
        }
    }
    Ok(true)
}
