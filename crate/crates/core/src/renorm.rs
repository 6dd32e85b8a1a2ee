//! Renormalization transformations on catalytic Wright-Fisher diffusion
//! matrices
//!
//! ```text
//! w^{α,p}(x) = diag(α x₁(1−x₁), p(x₁) x₂(1−x₂))
//! F_c w^{α,p} = w^{α′, α′ U_{α/c}(p/α)},    α′ = (1/α + 1/c)^{−1}
//! ```
//!
//! and the rescaled iterates s̄_n F^{(n)} w^{α,p} = w^{1, U^{(n)}(p/α)} built
//! from a migration schedule with β = 1/α.

use rand::Rng;

use crate::error::{param, Result};
use crate::loglaplace::{apply_u, iterate_u, CatalyzingFunction, LogLaplaceEstimate, McConfig};
use crate::rng::Seeder;
use crate::stats::{replicate, MeanVar};
use crate::wf::{sample_beta_law, Scheme, Stepper};

/// The diffusion matrix w^{α,p} on [0,1]².
#[derive(Clone, Debug, PartialEq)]
pub struct CatalyticDiffusionMatrix {
    pub alpha: f64,
    pub p: CatalyzingFunction,
}

impl CatalyticDiffusionMatrix {
    pub fn new(alpha: f64, p: CatalyzingFunction) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return param(format!("alpha must be positive, got {alpha}"));
        }
        Ok(CatalyticDiffusionMatrix { alpha, p })
    }

    /// Entries (w11, w12, w22) at `x`.
    pub fn at(&self, x: [f64; 2]) -> (f64, f64, f64) {
        (
            self.alpha * x[0] * (1.0 - x[0]),
            0.0,
            self.p.eval(x[0]) * x[1] * (1.0 - x[1]),
        )
    }

    pub fn boundary_class(&self) -> (bool, bool) {
        self.p.boundary_class()
    }

    /// λ·w^{α,p} = w^{λα, λp}.
    pub fn scaled(&self, lambda: f64) -> Self {
        CatalyticDiffusionMatrix { alpha: self.alpha * lambda, p: self.p.scaled(lambda) }
    }
}

/// Migration constants with the derived quantities
/// s_n = Σ_{k<n} 1/c_k, s̄_n = β + s_n and γ_n = 1/(s̄_n c_n).
#[derive(Clone, Debug, PartialEq)]
pub struct MigrationSchedule {
    pub c: Vec<f64>,
    pub beta: f64,
    pub s: Vec<f64>,
    pub s_bar: Vec<f64>,
    pub gamma: Vec<f64>,
}

/// Numerical read-out of the two schedule conditions (s_n → ∞ and
/// s_{n+1}/s_n → 1+γ*). Both are heuristics on a finite schedule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheduleDiagnostics {
    /// Σγ_n over the second half of the schedule; stays of order one when the
    /// full sum diverges and decays like the tail of a convergent series.
    pub tail_gamma_sum: f64,
    pub sum_diverges: bool,
    /// Spread of γ_n over the last quarter of the schedule.
    pub tail_gamma_spread: f64,
    pub gamma_stabilizes: bool,
    /// Last γ_n, the estimate of γ* when it stabilizes.
    pub gamma_star: f64,
}

impl MigrationSchedule {
    /// Constant γ_n ≡ γ*: c_k = (1+γ*)^{−k}, β = 1/γ*.
    pub fn constant_gamma(gamma_star: f64, n: usize) -> Result<Self> {
        if !(gamma_star > 0.0) {
            return param("gamma* must be positive");
        }
        let c = (0..n).map(|k| (1.0 + gamma_star).powi(-(k as i32))).collect();
        schedule_from_ck(c, 1.0 / gamma_star)
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    pub fn diagnostics(&self) -> ScheduleDiagnostics {
        let n = self.gamma.len();
        let tail_gamma_sum: f64 = self.gamma[n / 2..].iter().sum();
        let last = &self.gamma[(3 * n) / 4..];
        let (lo, hi) = last
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &g| (a.min(g), b.max(g)));
        let gamma_star = self.gamma.last().copied().unwrap_or(f64::NAN);
        let spread = if last.is_empty() { f64::NAN } else { hi - lo };
        ScheduleDiagnostics {
            tail_gamma_sum,
            sum_diverges: tail_gamma_sum > 0.25,
            tail_gamma_spread: spread,
            gamma_stabilizes: spread <= 0.05 * gamma_star.max(1e-3),
            gamma_star,
        }
    }
}

pub fn schedule_from_ck(c: Vec<f64>, beta: f64) -> Result<MigrationSchedule> {
    if let Some(bad) = c.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return param(format!("migration constants must be positive, found {bad}"));
    }
    if !(beta > 0.0) {
        return param(format!("beta must be positive, got {beta}"));
    }
    let mut s = Vec::with_capacity(c.len() + 1);
    s.push(0.0);
    for ck in &c {
        s.push(s.last().unwrap() + 1.0 / ck);
    }
    let s_bar: Vec<f64> = s.iter().map(|v| beta + v).collect();
    let gamma = c.iter().zip(&s_bar).map(|(ck, sb)| 1.0 / (sb * ck)).collect();
    Ok(MigrationSchedule { c, beta, s, s_bar, gamma })
}

/// F̄_γ w^{1,p} = w^{1, U_γ p}.
pub fn rescaled_f(
    gamma: f64,
    w: &CatalyticDiffusionMatrix,
    cfg: &McConfig,
    seeder: &Seeder,
) -> Result<(CatalyticDiffusionMatrix, LogLaplaceEstimate)> {
    if w.alpha != 1.0 {
        return param("rescaled_f needs alpha = 1; use f_c for general alpha");
    }
    let est = apply_u(gamma, &w.p, cfg, seeder)?;
    Ok((CatalyticDiffusionMatrix::new(1.0, est.function())?, est))
}

/// α′ = (1/α + 1/c)^{−1}.
pub fn renormalized_alpha(alpha: f64, c: f64) -> f64 {
    1.0 / (1.0 / alpha + 1.0 / c)
}

/// F_c w^{α,p} through the closed reduction; the returned standard errors are
/// those of the reactant function.
pub fn f_c(
    w: &CatalyticDiffusionMatrix,
    c: f64,
    cfg: &McConfig,
    seeder: &Seeder,
) -> Result<(CatalyticDiffusionMatrix, Vec<f64>)> {
    if !(c > 0.0) {
        return param(format!("migration constant must be positive, got {c}"));
    }
    let a2 = renormalized_alpha(w.alpha, c);
    let est = apply_u(w.alpha / c, &w.p.scaled(1.0 / w.alpha), cfg, seeder)?;
    let se = est.std_errors.iter().map(|s| s * a2).collect();
    Ok((CatalyticDiffusionMatrix::new(a2, est.function().scaled(a2))?, se))
}

/// One rescaled stage s̄_n F^{(n)} w with its propagated errors.
#[derive(Clone, Debug)]
pub struct RenormStage {
    pub n: usize,
    pub gamma: f64,
    pub s_bar: f64,
    pub rescaled: CatalyticDiffusionMatrix,
    pub propagated_se: Vec<f64>,
}

impl RenormStage {
    /// F^{(n)} w = w^{1/s̄_n, p_n/s̄_n}.
    pub fn unscaled(&self) -> CatalyticDiffusionMatrix {
        self.rescaled.scaled(1.0 / self.s_bar)
    }
}

/// Rescaled iterates s̄_k F^{(k)} w for k = 0..=n, using β = 1/α.
pub fn iterate_renorm(
    w: &CatalyticDiffusionMatrix,
    c: &[f64],
    n: usize,
    cfg: &McConfig,
    seeder: &Seeder,
) -> Result<Vec<RenormStage>> {
    if c.len() < n {
        return param(format!("schedule has {} constants, need {n}", c.len()));
    }
    let sched = schedule_from_ck(c[..n].to_vec(), 1.0 / w.alpha)?;
    let p0 = w.p.scaled(1.0 / w.alpha);
    let stages = iterate_u(&sched.gamma, &p0, cfg, seeder)?;
    let mut out = vec![RenormStage {
        n: 0,
        gamma: f64::NAN,
        s_bar: sched.s_bar[0],
        rescaled: CatalyticDiffusionMatrix::new(1.0, p0.clone())?,
        propagated_se: vec![0.0; p0.values().len()],
    }];
    for (k, st) in stages.into_iter().enumerate() {
        out.push(RenormStage {
            n: k + 1,
            gamma: st.gamma,
            s_bar: sched.s_bar[k + 1],
            rescaled: CatalyticDiffusionMatrix::new(1.0, st.function())?,
            propagated_se: st.propagated_se,
        });
    }
    Ok(out)
}

/// Settings for simulating the two-dimensional stationary law.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NuConfig {
    pub replicas: usize,
    pub dt: f64,
    /// Reactant burn-in in units of 1/c.
    pub burn_in: f64,
    /// Averaging window per replica in units of 1/c.
    pub window: f64,
    pub scheme: Scheme,
}

impl Default for NuConfig {
    fn default() -> Self {
        NuConfig { replicas: 200, dt: 1e-3, burn_in: 10.0, window: 50.0, scheme: Scheme::default() }
    }
}

/// A pair (y¹, y²) drawn from ν^{c,w}_x.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StationaryPairSample {
    pub y1: f64,
    pub y2: f64,
}

/// Runs the catalytic pair from a stationary catalyst and reactant at `x[1]`
/// through the burn-in, then calls `visit` at every step of the window.
fn run_pair<R: Rng + ?Sized>(
    c: f64,
    w: &CatalyticDiffusionMatrix,
    x: [f64; 2],
    cfg: &NuConfig,
    window: f64,
    rng: &mut R,
    mut visit: impl FnMut(f64, f64),
) -> (f64, f64) {
    let cat = Stepper::new(cfg.scheme, x[0], c, w.alpha, cfg.dt);
    let mut y1 = sample_beta_law(w.alpha / c, x[0], rng);
    let mut y2 = x[1];
    let burn = (cfg.burn_in / c / cfg.dt).ceil() as usize;
    let steps = (window / c / cfg.dt).ceil() as usize;
    for k in 0..burn + steps {
        let rho = w.p.eval(y1);
        let react = Stepper::new(cfg.scheme, x[1], c, rho, cfg.dt);
        y1 = cat.step(y1, rng);
        y2 = react.step(y2, rng);
        if k >= burn {
            visit(y1, y2);
        }
    }
    (y1, y2)
}

pub fn sample_nu<R: Rng + ?Sized>(
    c: f64,
    w: &CatalyticDiffusionMatrix,
    x: [f64; 2],
    cfg: &NuConfig,
    rng: &mut R,
) -> StationaryPairSample {
    let (y1, y2) = run_pair(c, w, x, cfg, 0.0, rng, |_, _| {});
    StationaryPairSample { y1, y2 }
}

/// First and second centred moments of ν^{c,w}_x with standard errors taken
/// across independent replicas.
#[derive(Clone, Debug, PartialEq)]
pub struct NuMoments {
    pub mean: [f64; 2],
    pub mean_se: [f64; 2],
    /// [c11, c12, c22]
    pub cov: [f64; 3],
    pub cov_se: [f64; 3],
}

pub fn estimate_nu_moments(
    c: f64,
    w: &CatalyticDiffusionMatrix,
    x: [f64; 2],
    cfg: &NuConfig,
    seeder: &Seeder,
) -> Result<NuMoments> {
    if !(c > 0.0) {
        return param(format!("migration constant must be positive, got {c}"));
    }
    let per_replica = replicate(cfg.replicas, |r| {
        let mut rng = seeder.replica(r as u64);
        let mut acc = [0.0; 5];
        let mut n = 0usize;
        run_pair(c, w, x, cfg, cfg.window, &mut rng, |y1, y2| {
            let (d1, d2) = (y1 - x[0], y2 - x[1]);
            acc[0] += d1;
            acc[1] += d2;
            acc[2] += d1 * d1;
            acc[3] += d1 * d2;
            acc[4] += d2 * d2;
            n += 1;
        });
        acc.map(|a| a / n.max(1) as f64)
    });
    let col = |i: usize| -> MeanVar { per_replica.iter().map(|a| a[i]).collect() };
    let m: Vec<MeanVar> = (0..5).map(col).collect();
    Ok(NuMoments {
        mean: [m[0].mean(), m[1].mean()],
        mean_se: [m[0].se(), m[1].se()],
        cov: [m[2].mean(), m[3].mean(), m[4].mean()],
        cov_se: [m[2].se(), m[3].se(), m[4].se()],
    })
}

/// Zero set of w^{α,p} on the closed square.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EffectiveBoundary {
    /// p(0) > 0, p(1) > 0: the four corners.
    Corners,
    /// p(0) = 0, p(1) > 0: the left edge and the two right corners.
    LeftEdgeAndCorners,
    /// p(0) > 0, p(1) = 0: the right edge and the two left corners.
    RightEdgeAndCorners,
    /// p(0) = p(1) = 0: both vertical edges.
    VerticalEdges,
}

impl EffectiveBoundary {
    pub fn contains(&self, x: [f64; 2]) -> bool {
        let corner_row = x[1] == 0.0 || x[1] == 1.0;
        let (left, right) = (x[0] == 0.0, x[0] == 1.0);
        match self {
            EffectiveBoundary::Corners => (left || right) && corner_row,
            EffectiveBoundary::LeftEdgeAndCorners => left || (right && corner_row),
            EffectiveBoundary::RightEdgeAndCorners => right || (left && corner_row),
            EffectiveBoundary::VerticalEdges => left || right,
        }
    }
}

pub fn effective_boundary(w: &CatalyticDiffusionMatrix) -> EffectiveBoundary {
    match w.boundary_class() {
        (true, true) => EffectiveBoundary::Corners,
        (false, true) => EffectiveBoundary::LeftEdgeAndCorners,
        (true, false) => EffectiveBoundary::RightEdgeAndCorners,
        (false, false) => EffectiveBoundary::VerticalEdges,
    }
}

/// Draw from the iterated kernel K^{w,(n)}_x by composing stationary-law
/// draws: y ~ ν^{c_{n−1}, F^{(n−1)} w}_x, then ν^{c_{n−2}, F^{(n−2)} w}_y, ...
/// `iterates[k]` must hold F^{(k)} w (unscaled).
pub fn iterated_kernel_sample<R: Rng + ?Sized>(
    iterates: &[CatalyticDiffusionMatrix],
    c: &[f64],
    n: usize,
    x: [f64; 2],
    cfg: &NuConfig,
    rng: &mut R,
) -> Result<[f64; 2]> {
    if iterates.len() < n || c.len() < n {
        return param(format!("need {n} iterates and migration constants"));
    }
    let mut y = x;
    for k in (0..n).rev() {
        let s = sample_nu(c[k], &iterates[k], y, cfg, rng);
        y = [s.y1, s.y2];
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_from_constant_ck() {
        let s = schedule_from_ck(vec![1.0; 50], 1.0).unwrap();
        assert_eq!(s.s[0], 0.0);
        assert_eq!(s.s[1], 1.0);
        for (n, g) in s.gamma.iter().enumerate() {
            assert!((g - 1.0 / (n as f64 + 1.0)).abs() < 1e-14);
        }
        for n in 0..50 {
            assert!((s.s_bar[n + 1] / s.s_bar[n] - (1.0 + s.gamma[n])).abs() < 1e-12);
        }
        let d = s.diagnostics();
        assert!(d.sum_diverges);
    }

    #[test]
    fn geometric_schedule_has_constant_gamma() {
        let s = MigrationSchedule::constant_gamma(0.5, 30).unwrap();
        assert!(s.gamma.iter().all(|g| (g - 0.5).abs() < 1e-12));
        let d = s.diagnostics();
        assert!(d.sum_diverges && d.gamma_stabilizes);
        assert!((d.gamma_star - 0.5).abs() < 1e-12);
    }

    #[test]
    fn summable_schedule_detected() {
        // c_k = 2^k: s_n converges, γ_n → 0 geometrically
        let s = schedule_from_ck((0..40).map(|k| 2f64.powi(k)).collect(), 1.0).unwrap();
        assert!(!s.diagnostics().sum_diverges);
    }

    #[test]
    fn schedule_rejects_bad_input() {
        assert!(schedule_from_ck(vec![1.0, 0.0], 1.0).is_err());
        assert!(schedule_from_ck(vec![1.0], -1.0).is_err());
    }

    #[test]
    fn alpha_recursion() {
        assert_eq!(renormalized_alpha(1.0, 1.0), 0.5);
        let w = CatalyticDiffusionMatrix::new(1.0, CatalyzingFunction::constant(4, 0.0).unwrap()).unwrap();
        let (f, se) = f_c(&w, 1.0, &McConfig::new(10, 1e-2), &Seeder::new(1)).unwrap();
        assert_eq!(f.alpha, 0.5);
        assert!(f.p.values().iter().all(|v| *v == 0.0));
        assert!(se.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn rescaled_f_requires_unit_alpha() {
        let w = CatalyticDiffusionMatrix::new(2.0, CatalyzingFunction::h11(4)).unwrap();
        assert!(rescaled_f(1.0, &w, &McConfig::new(10, 1e-2), &Seeder::new(2)).is_err());
    }

    #[test]
    fn catalyst_entry_stays_wright_fisher() {
        // s̄_n F^{(n)} w has α = 1 at every n, so its catalyst entry is x₁(1−x₁)
        let w = CatalyticDiffusionMatrix::new(2.0, CatalyzingFunction::h1(4)).unwrap();
        let st = iterate_renorm(&w, &[1.0, 1.0, 1.0], 3, &McConfig::new(50, 1e-2), &Seeder::new(3)).unwrap();
        assert_eq!(st.len(), 4);
        for s in &st {
            assert_eq!(s.rescaled.alpha, 1.0);
            assert!((s.rescaled.at([0.3, 0.5]).0 - 0.21).abs() < 1e-15);
        }
        // unscaled α follows the closed recursion α_{k+1} = (1/α_k + 1/c_k)^{-1}
        let mut a = 2.0;
        for s in &st[1..] {
            a = renormalized_alpha(a, 1.0);
            assert!((s.unscaled().alpha - a).abs() < 1e-12);
        }
    }

    #[test]
    fn boundary_patterns() {
        let m = |p| CatalyticDiffusionMatrix::new(1.0, p).unwrap();
        assert_eq!(effective_boundary(&m(CatalyzingFunction::h11(4))), EffectiveBoundary::Corners);
        assert_eq!(effective_boundary(&m(CatalyzingFunction::h00(4))), EffectiveBoundary::VerticalEdges);
        let b = effective_boundary(&m(CatalyzingFunction::h1(4)));
        assert_eq!(b, EffectiveBoundary::LeftEdgeAndCorners);
        assert!(b.contains([0.0, 0.4]) && b.contains([1.0, 1.0]) && !b.contains([1.0, 0.4]));
        let r = effective_boundary(&m(CatalyzingFunction::from_fn(4, |x| 1.0 - x).unwrap()));
        assert_eq!(r, EffectiveBoundary::RightEdgeAndCorners);
    }

    #[test]
    fn corner_start_is_a_point_mass() {
        let w = CatalyticDiffusionMatrix::new(1.0, CatalyzingFunction::h11(4)).unwrap();
        let cfg = NuConfig { replicas: 4, window: 2.0, burn_in: 1.0, ..NuConfig::default() };
        let m = estimate_nu_moments(1.0, &w, [0.0, 1.0], &cfg, &Seeder::new(4)).unwrap();
        assert_eq!(m.mean, [0.0, 0.0]);
        assert_eq!(m.cov, [0.0, 0.0, 0.0]);
    }

    #[test]
    fn kernel_with_no_steps_is_identity() {
        let y = iterated_kernel_sample(&[], &[], 0, [0.3, 0.6], &NuConfig::default(), &mut Seeder::new(5).to_rng()).unwrap();
        assert_eq!(y, [0.3, 0.6]);
    }
}
