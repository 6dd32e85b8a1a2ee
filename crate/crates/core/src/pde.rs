//! Deterministic fixed-point analysis on grids: the matrix-valued flow
//!
//! ```text
//! ∂_t w = ½ Σ_ij w_ij ∂_i∂_j w + w
//! ```
//!
//! on [0,1]², the semilinear Cauchy equation ∂_t u = ½x(1−x)u″ + u(1−u), and
//! the boundary-value problem ½x(1−x)p″ + p(1−p) = 0, p(0)=0, p(1)=1.

use crate::error::{param, Error, Result};
use crate::loglaplace::{CatalyzingFunction, McConfig};
use crate::renorm::{f_c, CatalyticDiffusionMatrix};
use crate::rng::Seeder;

/// Values on the uniform grid x_i = i/M.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField1D {
    pub values: Vec<f64>,
}

impl GridField1D {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return param("grid needs at least two nodes");
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("grid values must be finite".into()));
        }
        Ok(GridField1D { values })
    }

    pub fn from_fn(m: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new((0..=m).map(|i| f(i as f64 / m as f64)).collect())
    }

    pub fn m(&self) -> usize {
        self.values.len() - 1
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 / self.m() as f64
    }

    pub fn sup_distance(&self, other: &GridField1D) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn to_catalyzing(&self) -> Result<CatalyzingFunction> {
        CatalyzingFunction::new(self.values.clone())
    }
}

impl From<&CatalyzingFunction> for GridField1D {
    fn from(p: &CatalyzingFunction) -> Self {
        GridField1D { values: p.values().to_vec() }
    }
}

/// Symmetric 2×2 field on the (M+1)×(M+1) grid, stored by its three
/// independent entries so symmetry is exact. Node (i, j) sits at
/// (x₁, x₂) = (i/M, j/M).
#[derive(Clone, Debug, PartialEq)]
pub struct GridField2D {
    m: usize,
    pub w11: Vec<f64>,
    pub w12: Vec<f64>,
    pub w22: Vec<f64>,
}

impl GridField2D {
    pub fn from_fn(m: usize, f: impl Fn(f64, f64) -> [f64; 3]) -> Result<Self> {
        if m < 3 {
            return param("2D grid needs M >= 3");
        }
        let n = (m + 1) * (m + 1);
        let (mut w11, mut w12, mut w22) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for i in 0..=m {
            for j in 0..=m {
                let [a, b, c] = f(i as f64 / m as f64, j as f64 / m as f64);
                let k = i * (m + 1) + j;
                (w11[k], w12[k], w22[k]) = (a, b, c);
            }
        }
        let g = GridField2D { m, w11, w12, w22 };
        if [&g.w11, &g.w12, &g.w22].iter().any(|v| v.iter().any(|x| !x.is_finite())) {
            return Err(Error::Domain("field values must be finite".into()));
        }
        Ok(g)
    }

    /// diag(α x₁(1−x₁), p(x₁) x₂(1−x₂)).
    pub fn from_catalytic(m: usize, w: &CatalyticDiffusionMatrix) -> Result<Self> {
        Self::from_fn(m, |x1, x2| {
            let (a, b, c) = w.at([x1, x2]);
            [a, b, c]
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.m + 1) + j
    }

    pub fn at(&self, i: usize, j: usize) -> [f64; 3] {
        let k = self.idx(i, j);
        [self.w11[k], self.w12[k], self.w22[k]]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        (0..self.w11.len())
            .map(|k| {
                let (a, b, c) = (self.w11[k], self.w12[k], self.w22[k]);
                0.5 * (a + c) - (0.25 * (a - c) * (a - c) + b * b).sqrt()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest spectral norm over nodes.
    pub fn max_norm(&self) -> f64 {
        (0..self.w11.len())
            .map(|k| {
                let (a, b, c) = (self.w11[k], self.w12[k], self.w22[k]);
                0.5 * (a + c).abs() + (0.25 * (a - c) * (a - c) + b * b).sqrt()
            })
            .fold(0.0, f64::max)
    }

    pub fn sup_distance(&self, other: &GridField2D) -> f64 {
        let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        d(&self.w11, &other.w11).max(d(&self.w12, &other.w12)).max(d(&self.w22, &other.w22))
    }

    /// w22(x₁, x₂_j) / (x₂(1−x₂)) along the row x₂ = j/M.
    pub fn reactant_factor(&self, j: usize) -> Result<GridField1D> {
        let x2 = j as f64 / self.m as f64;
        let den = x2 * (1.0 - x2);
        if den == 0.0 {
            return param("reactant factor needs an interior row");
        }
        GridField1D::new((0..=self.m).map(|i| self.w22[self.idx(i, j)] / den).collect())
    }

    /// Which edges (open segments, corners excluded) carry w = 0.
    pub fn boundary_pattern(&self, tol: f64) -> BoundaryPattern {
        let m = self.m;
        let zero = |k: usize| self.w11[k].abs() <= tol && self.w12[k].abs() <= tol && self.w22[k].abs() <= tol;
        let edge = |f: &dyn Fn(usize) -> usize| (1..m).all(|t| zero(f(t)));
        BoundaryPattern {
            left: edge(&|t| self.idx(0, t)),
            right: edge(&|t| self.idx(m, t)),
            bottom: edge(&|t| self.idx(t, 0)),
            top: edge(&|t| self.idx(t, m)),
        }
    }

    /// Rows (x1, x2, w11, w12, w22).
    pub fn rows(&self) -> impl Iterator<Item = [f64; 5]> + '_ {
        let m = self.m;
        (0..=m).flat_map(move |i| {
            (0..=m).map(move |j| {
                let [a, b, c] = self.at(i, j);
                [i as f64 / m as f64, j as f64 / m as f64, a, b, c]
            })
        })
    }
}

/// Zero edges of a field on the unit square.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryPattern {
    pub left: bool,
    pub right: bool,
    pub bottom: bool,
    pub top: bool,
}

impl BoundaryPattern {
    /// Row of the fixed-point table this pattern falls into, up to the
    /// symmetries of the square: 1 corners only, 2 one edge, 3 two adjacent
    /// edges, 4 two opposite edges, 5 three edges, 6 all edges.
    pub fn case(&self) -> u8 {
        let n = [self.left, self.right, self.bottom, self.top].iter().filter(|b| **b).count();
        match n {
            0 => 1,
            1 => 2,
            2 if (self.left && self.right) || (self.bottom && self.top) => 4,
            2 => 3,
            3 => 5,
            _ => 6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowConfig {
    /// Upper bound on the time step; the step actually used also respects
    /// dt ≤ courant·Δx²/max‖w‖.
    pub dt: f64,
    pub courant: f64,
    pub max_steps: usize,
    /// The run stops at this time even if the residual is still above
    /// `residual_tol`.
    pub max_time: f64,
    pub residual_tol: f64,
    pub m: usize,
    /// sup‖w‖ above this is reported as divergence.
    pub ceiling: f64,
    /// Residual history is sampled every this many steps.
    pub record_every: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            dt: 1.0,
            courant: 0.25,
            max_steps: 1_000_000,
            max_time: f64::INFINITY,
            residual_tol: 1e-9,
            m: 50,
            ceiling: 1e6,
            record_every: 1000,
        }
    }
}

impl FlowConfig {
    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !(self.courant > 0.0 && self.courant <= 1.0) {
            return param("flow needs dt > 0 and 0 < courant <= 1");
        }
        if !(self.residual_tol > 0.0) {
            return param("residual_tol must be positive");
        }
        Ok(())
    }

    fn stable_dt(&self, m: usize, norm: f64) -> f64 {
        let dx = 1.0 / m as f64;
        if norm > 0.0 {
            self.dt.min(self.courant * dx * dx / norm)
        } else {
            self.dt
        }
    }
}

#[derive(Clone, Debug)]
pub struct FlowResult {
    pub field: GridField2D,
    /// (t, sup |∂_t w|)
    pub history: Vec<(f64, f64)>,
    pub steps: usize,
    pub time: f64,
    pub converged: bool,
    pub min_eigenvalue: f64,
    pub pattern: BoundaryPattern,
}

/// Second difference along one axis at index `i` of a line of n+1 values
/// read through `f`; second-order one-sided at the ends.
#[inline]
fn d2(f: impl Fn(usize) -> f64, i: usize, n: usize) -> f64 {
    if i == 0 {
        2.0 * f(0) - 5.0 * f(1) + 4.0 * f(2) - f(3)
    } else if i == n {
        2.0 * f(n) - 5.0 * f(n - 1) + 4.0 * f(n - 2) - f(n - 3)
    } else {
        f(i - 1) - 2.0 * f(i) + f(i + 1)
    }
}

/// First difference times 2Δx; second-order one-sided at the ends.
#[inline]
fn d1x2(f: impl Fn(usize) -> f64, i: usize, n: usize) -> f64 {
    if i == 0 {
        -3.0 * f(0) + 4.0 * f(1) - f(2)
    } else if i == n {
        3.0 * f(n) - 4.0 * f(n - 1) + f(n - 2)
    } else {
        f(i + 1) - f(i - 1)
    }
}

/// Time derivative of the flow at every node, written into `out`. Entries
/// that vanish identically have a vanishing derivative and are skipped.
fn flow_rhs(g: &GridField2D, out: &mut [[f64; 3]]) {
    let m = g.m;
    let n1 = m + 1;
    let h2 = (m * m) as f64;
    let fields = [&g.w11, &g.w12, &g.w22];
    let live: [bool; 3] = fields.map(|w| w.iter().any(|v| *v != 0.0));
    let mixed = live[1];
    for (e, w) in fields.iter().enumerate() {
        if !live[e] {
            out.iter_mut().for_each(|r| r[e] = 0.0);
            continue;
        }
        for i in 0..=m {
            let edge_i = i == 0 || i == m;
            for j in 0..=m {
                let k = i * n1 + j;
                let (a, b, c) = (g.w11[k], g.w12[k], g.w22[k]);
                let mut gen = 0.0;
                if !edge_i && j != 0 && j != m && !mixed {
                    gen = a * (w[k - n1] - 2.0 * w[k] + w[k + n1]) + c * (w[k - 1] - 2.0 * w[k] + w[k + 1]);
                } else {
                    if a != 0.0 {
                        gen += a * d2(|t| w[t * n1 + j], i, m);
                    }
                    if c != 0.0 {
                        gen += c * d2(|t| w[i * n1 + t], j, m);
                    }
                    if b != 0.0 {
                        let dx2 = |jj: usize| d1x2(|t| w[t * n1 + jj], i, m);
                        gen += 2.0 * b * d1x2(dx2, j, m) / 4.0;
                    }
                }
                out[k][e] = 0.5 * gen * h2 + w[k];
            }
        }
    }
}

pub fn run_flow_2d(w0: &GridField2D, cfg: &FlowConfig) -> Result<FlowResult> {
    cfg.validate()?;
    if w0.min_eigenvalue() < -10.0 * cfg.residual_tol {
        return Err(Error::Domain("initial field is not nonnegative definite".into()));
    }
    let mut g = w0.clone();
    let mut rhs = vec![[0.0; 3]; g.w11.len()];
    let mut history = Vec::new();
    let (mut t, mut steps, mut converged) = (0.0, 0, false);
    let mut residual = f64::INFINITY;
    let mut norm = g.max_norm();
    while steps < cfg.max_steps {
        flow_rhs(&g, &mut rhs);
        residual = rhs.iter().flat_map(|r| r.iter()).fold(0.0f64, |s, v| s.max(v.abs()));
        if steps % cfg.record_every == 0 {
            history.push((t, residual));
        }
        if residual < cfg.residual_tol {
            converged = true;
            break;
        }
        if t >= cfg.max_time {
            break;
        }
        let dt = cfg.stable_dt(g.m, norm).min(cfg.max_time - t);
        for (k, r) in rhs.iter().enumerate() {
            g.w11[k] += dt * r[0];
            g.w12[k] += dt * r[1];
            g.w22[k] += dt * r[2];
        }
        t += dt;
        steps += 1;
        norm = g.max_norm();
        if !(norm <= cfg.ceiling) {
            return Err(Error::Numerical(format!(
                "flow diverged at t = {t:.4} after {steps} steps: sup|w| = {norm:.3e}"
            )));
        }
    }
    if history.last().map(|h| h.0) != Some(t) {
        history.push((t, residual));
    }
    let min_eigenvalue = g.min_eigenvalue();
    if min_eigenvalue < -10.0 * cfg.residual_tol {
        return Err(Error::Numerical(format!(
            "flow lost nonnegative definiteness: eigenvalue {min_eigenvalue:.3e} at t = {t:.4}"
        )));
    }
    let pattern = g.boundary_pattern(0.0);
    Ok(FlowResult { field: g, history, steps, time: t, converged, min_eigenvalue, pattern })
}

/// Exact flow of u̇ = u(1−u) over time dt.
fn logistic(u: f64, dt: f64) -> f64 {
    let e = dt.exp();
    u * e / (1.0 - u + u * e)
}

/// u_T for ∂_t u = ½x(1−x)u″ + u(1−u), u_0 = f, with explicit steps in the
/// interior and the exact logistic flow at both endpoints.
pub fn run_cauchy_1d(f: &GridField1D, horizon: f64, cfg: &FlowConfig) -> Result<GridField1D> {
    cfg.validate()?;
    if f.values.iter().any(|v| *v < 0.0) {
        return Err(Error::Domain("initial datum must be nonnegative".into()));
    }
    if !(horizon >= 0.0) {
        return param("horizon must be nonnegative");
    }
    let m = f.m();
    if m < 2 {
        return param("Cauchy grid needs M >= 2");
    }
    let h2 = (m * m) as f64;
    let sup = f.values.iter().fold(0.0f64, |a, b| a.max(*b));
    // diffusion coefficient x(1−x) peaks at 1/4; the reaction is stiff only
    // for large u
    let dt_max = cfg.stable_dt(m, 0.25).min(0.5 / (1.0 + 2.0 * sup));
    let steps = (horizon / dt_max).ceil() as usize;
    if steps > cfg.max_steps {
        return param(format!("horizon {horizon} needs {steps} steps, above max_steps"));
    }
    if steps == 0 {
        return Ok(f.clone());
    }
    let dt = horizon / steps as f64;
    let a: Vec<f64> = (0..=m)
        .map(|i| {
            let x = i as f64 / m as f64;
            0.5 * x * (1.0 - x) * h2
        })
        .collect();
    let mut u = f.values.clone();
    let mut next = u.clone();
    for _ in 0..steps {
        next[0] = logistic(u[0], dt);
        next[m] = logistic(u[m], dt);
        for i in 1..m {
            let lap = u[i - 1] - 2.0 * u[i] + u[i + 1];
            next[i] = u[i] + dt * (a[i] * lap + u[i] * (1.0 - u[i]));
        }
        std::mem::swap(&mut u, &mut next);
        let s = u.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if !(s <= cfg.ceiling) {
            return Err(Error::Numerical(format!("Cauchy solver diverged: sup|u| = {s:.3e}")));
        }
    }
    GridField1D::new(u)
}

/// Solve a tridiagonal system in place (sub, diag, sup, rhs); returns the
/// solution in `rhs`.
fn thomas(sub: &[f64], diag: &mut [f64], sup: &[f64], rhs: &mut [f64]) -> Result<()> {
    let n = diag.len();
    for i in 1..n {
        if diag[i - 1] == 0.0 {
            return Err(Error::Numerical("singular tridiagonal system".into()));
        }
        let w = sub[i] / diag[i - 1];
        diag[i] -= w * sup[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    if diag[n - 1] == 0.0 {
        return Err(Error::Numerical("singular tridiagonal system".into()));
    }
    rhs[n - 1] /= diag[n - 1];
    for i in (0..n - 1).rev() {
        rhs[i] = (rhs[i] - sup[i] * rhs[i + 1]) / diag[i];
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PStarConfig {
    pub m: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Horizon of the Cauchy fallback.
    pub fallback_horizon: f64,
}

impl Default for PStarConfig {
    fn default() -> Self {
        PStarConfig { m: 200, tol: 1e-8, max_iter: 100, fallback_horizon: 200.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PStarMethod {
    Newton { iterations: usize },
    CauchyFallback,
}

#[derive(Clone, Debug)]
pub struct PStarSolution {
    pub field: GridField1D,
    /// sup-norm of the discrete equation residual
    pub residual: f64,
    pub method: PStarMethod,
}

fn p_star_residual(p: &[f64], a: &[f64], out: &mut [f64]) -> f64 {
    let m = p.len() - 1;
    let mut sup = 0.0f64;
    for i in 1..m {
        let r = a[i] * (p[i - 1] - 2.0 * p[i] + p[i + 1]) + p[i] * (1.0 - p[i]);
        out[i - 1] = r;
        sup = sup.max(r.abs());
    }
    sup
}

/// Nonnegative solution of ½x(1−x)p″ + p(1−p) = 0 with p(0)=0, p(1)=1 by
/// damped Newton from p(x)=x; falls back to the long-horizon Cauchy flow
/// from h_{0,1} when Newton stalls.
pub fn solve_p_star(cfg: &PStarConfig) -> Result<PStarSolution> {
    let m = cfg.m;
    if m < 2 {
        return param("p* grid needs M >= 2");
    }
    let h2 = (m * m) as f64;
    let a: Vec<f64> = (0..=m)
        .map(|i| {
            let x = i as f64 / m as f64;
            0.5 * x * (1.0 - x) * h2
        })
        .collect();
    let mut p: Vec<f64> = (0..=m).map(|i| i as f64 / m as f64).collect();
    let n = m - 1;
    let mut r = vec![0.0; n];
    let mut res = p_star_residual(&p, &a, &mut r);
    for it in 0..cfg.max_iter {
        if res < cfg.tol {
            return Ok(PStarSolution {
                field: GridField1D::new(p)?,
                residual: res,
                method: PStarMethod::Newton { iterations: it },
            });
        }
        let sub: Vec<f64> = (1..m).map(|i| a[i]).collect();
        let mut diag: Vec<f64> = (1..m).map(|i| -2.0 * a[i] + 1.0 - 2.0 * p[i]).collect();
        let mut delta: Vec<f64> = r.iter().map(|v| -v).collect();
        if thomas(&sub, &mut diag, &sub, &mut delta).is_err() {
            break;
        }
        let mut lambda = 1.0;
        let mut accepted = false;
        while lambda > 1e-4 {
            let trial: Vec<f64> = (0..=m)
                .map(|i| if i == 0 || i == m { p[i] } else { p[i] + lambda * delta[i - 1] })
                .collect();
            let mut rt = vec![0.0; n];
            let rr = p_star_residual(&trial, &a, &mut rt);
            if rr < res {
                (p, r, res) = (trial, rt, rr);
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if res < cfg.tol {
        return Ok(PStarSolution {
            field: GridField1D::new(p)?,
            residual: res,
            method: PStarMethod::Newton { iterations: cfg.max_iter },
        });
    }
    let h01 = GridField1D::from_fn(m, |x| x)?;
    let flow = FlowConfig { max_steps: usize::MAX, ..FlowConfig::default() };
    let u = run_cauchy_1d(&h01, cfg.fallback_horizon, &flow)?;
    let mut r = vec![0.0; n];
    let residual = p_star_residual(&u.values, &a, &mut r);
    Ok(PStarSolution { field: u, residual, method: PStarMethod::CauchyFallback })
}

#[derive(Clone, Debug)]
pub struct FixedPointReport {
    pub image: CatalyticDiffusionMatrix,
    /// sup over grid nodes and both diagonal entries of |(1+γ*)F w* − w*|,
    /// with the reactant entry measured through its factor p
    pub sup_residual: f64,
    pub alpha_residual: f64,
    /// standard error at the node attaining the sup
    pub propagated_se: f64,
    pub max_se: f64,
}

/// Compares (1+γ*) F_{1/γ*} w* with w*.
pub fn verify_fixed_point(
    w: &CatalyticDiffusionMatrix,
    gamma_star: f64,
    cfg: &McConfig,
    seeder: &Seeder,
) -> Result<FixedPointReport> {
    if !(gamma_star > 0.0) {
        return param("gamma* must be positive");
    }
    let (img, se) = f_c(w, 1.0 / gamma_star, cfg, seeder)?;
    let image = img.scaled(1.0 + gamma_star);
    let se: Vec<f64> = se.iter().map(|s| s * (1.0 + gamma_star)).collect();
    let alpha_residual = (image.alpha - w.alpha).abs();
    let (mut sup, mut at) = (0.0f64, 0);
    for (i, (a, b)) in image.p.values().iter().zip(w.p.values()).enumerate() {
        if (a - b).abs() > sup {
            (sup, at) = ((a - b).abs(), i);
        }
    }
    Ok(FixedPointReport {
        sup_residual: sup.max(alpha_residual),
        alpha_residual,
        propagated_se: se.get(at).copied().unwrap_or(0.0),
        max_se: se.iter().fold(0.0, |a, b| a.max(*b)),
        image,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> FlowConfig {
        FlowConfig { m: 10, record_every: 10, ..FlowConfig::default() }
    }

    #[test]
    fn zero_field_is_stationary() {
        let g = GridField2D::from_fn(10, |_, _| [0.0; 3]).unwrap();
        let r = run_flow_2d(&g, &quick()).unwrap();
        assert!(r.converged);
        assert_eq!(r.steps, 0);
        assert_eq!(r.pattern.case(), 6);
    }

    #[test]
    fn one_sided_differences_exact_on_cubics() {
        let f = |t: usize| (t as f64).powi(3) - 2.0 * (t as f64).powi(2);
        for i in 0..=6 {
            let exact = 6.0 * i as f64 - 4.0;
            assert!((d2(f, i, 6) - exact).abs() < 1e-9, "i={i}");
        }
        let g = |t: usize| (t as f64).powi(2);
        for i in 0..=6 {
            assert!((d1x2(g, i, 6) - 4.0 * i as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn patterns_by_edge_count() {
        let p = |l, r, b, t| BoundaryPattern { left: l, right: r, bottom: b, top: t };
        assert_eq!(p(false, false, false, false).case(), 1);
        assert_eq!(p(true, false, false, false).case(), 2);
        assert_eq!(p(true, false, true, false).case(), 3);
        assert_eq!(p(true, true, false, false).case(), 4);
        assert_eq!(p(false, false, true, true).case(), 4);
        assert_eq!(p(true, true, true, false).case(), 5);
    }

    #[test]
    fn wright_fisher_field_pattern() {
        let g = GridField2D::from_fn(8, |x1, x2| [x1 * (1.0 - x1), 0.0, x2 * (1.0 - x2)]).unwrap();
        assert_eq!(g.boundary_pattern(0.0).case(), 1);
        let h = GridField2D::from_fn(8, |x1, x2| [x1 * (1.0 - x1), 0.0, x1 * x2 * (1.0 - x2)]).unwrap();
        let pat = h.boundary_pattern(0.0);
        assert!(pat.left && !pat.right);
        assert_eq!(pat.case(), 2);
    }

    #[test]
    fn wright_fisher_field_is_a_discrete_fixed_point() {
        // quadratics have exact second differences, so the residual is rounding
        let g = GridField2D::from_fn(10, |x1, x2| [x1 * (1.0 - x1), 0.0, x2 * (1.0 - x2)]).unwrap();
        let mut rhs = vec![[0.0; 3]; g.w11.len()];
        flow_rhs(&g, &mut rhs);
        assert!(rhs.iter().flatten().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn divergence_is_reported() {
        // w ≡ I grows like e^t
        let g = GridField2D::from_fn(6, |_, _| [1.0, 0.0, 1.0]).unwrap();
        let cfg = FlowConfig { m: 6, ceiling: 10.0, ..FlowConfig::default() };
        assert!(matches!(run_flow_2d(&g, &cfg), Err(Error::Numerical(_))));
    }

    #[test]
    fn indefinite_start_rejected() {
        let g = GridField2D::from_fn(6, |_, _| [1.0, 2.0, 1.0]).unwrap();
        assert!(run_flow_2d(&g, &quick()).is_err());
    }

    #[test]
    fn cauchy_constant_one() {
        let f = GridField1D::from_fn(20, |_| 1.0).unwrap();
        let u = run_cauchy_1d(&f, 3.0, &FlowConfig::default()).unwrap();
        assert!(u.values.iter().all(|v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn cauchy_endpoints_follow_logistic() {
        let f = GridField1D::from_fn(20, |x| 0.5 * x + 0.2).unwrap();
        let u = run_cauchy_1d(&f, 1.5, &FlowConfig::default()).unwrap();
        let e = 1.5f64.exp();
        assert!((u.values[0] - 0.2 * e / (0.8 + 0.2 * e)).abs() < 1e-12);
        assert!((u.values[20] - 0.7 * e / (0.3 + 0.7 * e)).abs() < 1e-12);
    }

    #[test]
    fn cauchy_rejects_negative() {
        let f = GridField1D::from_fn(5, |x| x - 0.5).unwrap();
        assert!(run_cauchy_1d(&f, 1.0, &FlowConfig::default()).is_err());
    }

    #[test]
    fn thomas_solves() {
        let sub = [0.0, 1.0, 1.0];
        let sup = [1.0, 1.0, 0.0];
        let mut diag = [4.0, 4.0, 4.0];
        let mut rhs = [5.0, 6.0, 5.0];
        thomas(&sub, &mut diag, &sup, &mut rhs).unwrap();
        assert!(rhs.iter().all(|v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn p_star_boundary_and_shape() {
        let s = solve_p_star(&PStarConfig { m: 100, ..PStarConfig::default() }).unwrap();
        assert!(matches!(s.method, PStarMethod::Newton { .. }));
        assert!(s.residual < 1e-8);
        let v = &s.field.values;
        assert_eq!(v[0], 0.0);
        assert_eq!(v[100], 1.0);
        let p = CatalyzingFunction::new(v.clone()).unwrap();
        assert!(p.first_differences().iter().all(|d| *d >= 0.0));
        assert!(p.second_differences().iter().all(|d| *d <= 0.0));
    }

    #[test]
    fn zero_catalyst_is_exact_fixed_point() {
        let w = CatalyticDiffusionMatrix::new(1.0, CatalyzingFunction::constant(5, 0.0).unwrap()).unwrap();
        let r = verify_fixed_point(&w, 0.7, &McConfig::new(10, 1e-2), &Seeder::new(9)).unwrap();
        assert!(r.sup_residual < 1e-15);
    }
}
