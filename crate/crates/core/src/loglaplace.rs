//! The log-Laplace operator of one renormalization branching step.
//!
//! ```text
//! U_γ f(x) = q_γ (1 − E exp(−⟨Z^γ_x, f⟩)),    q_γ = 1/γ + 1
//! ```
//!
//! where the cluster `Z^γ_x` is the occupation measure of a stationary
//! Wright-Fisher segment: with τ ~ Exp(mean γ), ⟨Z, f⟩ = ∫_0^τ f(y(t/2)) dt, so
//! the segment has duration τ/2 and every unit of segment time carries mass 2.
//! For f = h_m = 1 − (1−x)^m the operator has a dual representation through
//! the injected coalescing chain of [`crate::wf`].

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{param, Error, Result};
use crate::rng::Seeder;
use crate::stats::{replicate, MeanVar};
use crate::wf::{dual_chain_psi_infinity, sample_beta_law, Injection, Scheme, Stepper};

/// A nonnegative function sampled on the uniform grid `i/M`, evaluated
/// between nodes by linear interpolation.
#[derive(Clone, Debug, PartialEq)]
pub struct CatalyzingFunction {
    values: Vec<f64>,
}

impl CatalyzingFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return param("a grid function needs at least two nodes");
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return param(format!("catalyzing function must be finite and nonnegative, found {v}"));
        }
        Ok(CatalyzingFunction { values })
    }

    /// Samples `f` at the M+1 grid nodes.
    pub fn from_fn(m: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new((0..=m).map(|i| f(i as f64 / m as f64)).collect())
    }

    pub fn constant(m: usize, r: f64) -> Result<Self> {
        Self::from_fn(m, |_| r)
    }

    /// h_{1,1} ≡ 1.
    pub fn h11(m: usize) -> Self {
        Self::from_fn(m, |_| 1.0).unwrap()
    }

    /// h_{0,0}(x) = x(1−x).
    pub fn h00(m: usize) -> Self {
        Self::from_fn(m, |x| x * (1.0 - x)).unwrap()
    }

    /// h_1(x) = x.
    pub fn h1(m: usize) -> Self {
        Self::from_fn(m, |x| x).unwrap()
    }

    /// h_k(x) = 1 − (1−x)^k.
    pub fn hm(m: usize, k: u32) -> Self {
        Self::from_fn(m, |x| 1.0 - (1.0 - x).powi(k as i32)).unwrap()
    }

    /// h_{0,1} = h_7.
    pub fn h01(m: usize) -> Self {
        Self::hm(m, 7)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Number of grid intervals M.
    pub fn intervals(&self) -> usize {
        self.values.len() - 1
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 / self.intervals() as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(|i| self.node(i))
    }

    #[inline]
    pub fn eval(&self, y: f64) -> f64 {
        let m = self.values.len() - 1;
        let t = y.clamp(0.0, 1.0) * m as f64;
        let i = (t as usize).min(m - 1);
        let f = t - i as f64;
        let (a, b) = (self.values[i], self.values[i + 1]);
        a + f * (b - a)
    }

    /// (l, r) with l = 1 iff p(0) > 0 and r = 1 iff p(1) > 0.
    pub fn boundary_class(&self) -> (bool, bool) {
        (self.values[0] > 0.0, self.values[self.intervals()] > 0.0)
    }

    /// Largest absolute slope between adjacent nodes.
    pub fn lipschitz(&self) -> f64 {
        let m = self.intervals() as f64;
        self.values.windows(2).map(|w| (w[1] - w[0]).abs() * m).fold(0.0, f64::max)
    }

    pub fn scaled(&self, r: f64) -> Self {
        CatalyzingFunction { values: self.values.iter().map(|v| v * r).collect() }
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn sup_distance(&self, other: &Self) -> f64 {
        if self.values.len() == other.values.len() {
            self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        } else {
            self.nodes().map(|x| (self.eval(x) - other.eval(x)).abs()).fold(0.0, f64::max)
        }
    }

    /// Resamples onto a grid with `m` intervals.
    pub fn regrid(&self, m: usize) -> Self {
        Self::from_fn(m, |x| self.eval(x)).unwrap()
    }

    pub fn first_differences(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn second_differences(&self) -> Vec<f64> {
        self.values.windows(3).map(|w| w[2] - 2.0 * w[1] + w[0]).collect()
    }
}

/// q_γ = 1/γ + 1.
pub fn q_gamma(gamma: f64) -> f64 {
    1.0 / gamma + 1.0
}

/// Closed form of U_γ on the constant function r.
pub fn u_on_constant(gamma: f64, r: f64) -> f64 {
    if r == 0.0 {
        0.0
    } else {
        (1.0 + gamma) / (1.0 / r + gamma)
    }
}

/// Exact iterate of constants: U_{γ_{n−1}} ∘ … ∘ U_{γ_0} λ.
pub fn iterate_on_constant(gammas: &[f64], lambda: f64) -> f64 {
    let prod: f64 = gammas.iter().map(|g| 1.0 + g).product();
    if lambda == 0.0 {
        0.0
    } else {
        prod / (prod - 1.0 + 1.0 / lambda)
    }
}

/// Atoms of one cluster: visited positions with weight 2·dt (the last one
/// carries the remainder so that the total mass equals τ exactly).
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterSample {
    pub atoms: Vec<(f64, f64)>,
    pub total_mass: f64,
}

impl ClusterSample {
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.atoms.iter().map(|&(y, w)| w * f(y)).sum()
    }
}

/// Walks one cluster, calling `visit(position, weight)` for each atom, and
/// returns the total mass τ.
#[inline]
pub(crate) fn walk_cluster<R: Rng + ?Sized>(
    gamma: f64,
    x: f64,
    dt: f64,
    scheme: Scheme,
    rng: &mut R,
    mut visit: impl FnMut(f64, f64),
) -> f64 {
    let e: f64 = Exp1.sample(rng);
    let tau = gamma * e;
    let half = 0.5 * tau;
    if x <= 0.0 || x >= 1.0 {
        visit(x, tau);
        return tau;
    }
    let steps = (half / dt).floor() as usize;
    let rem = half - steps as f64 * dt;
    let stepper = Stepper::new(scheme, x, 1.0 / gamma, 1.0, dt);
    let mut y = sample_beta_law(gamma, x, rng);
    for _ in 0..steps {
        visit(y, 2.0 * dt);
        y = stepper.step(y, rng);
    }
    if rem > 0.0 {
        visit(y, 2.0 * rem);
    }
    tau
}

pub fn sample_cluster<R: Rng + ?Sized>(
    gamma: f64,
    x: f64,
    dt: f64,
    scheme: Scheme,
    rng: &mut R,
) -> ClusterSample {
    let mut atoms = Vec::new();
    let total_mass = walk_cluster(gamma, x, dt, scheme, rng, |y, w| atoms.push((y, w)));
    ClusterSample { atoms, total_mass }
}

/// Monte Carlo settings for evaluating U_γ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McConfig {
    pub replicas: usize,
    pub dt: f64,
    pub scheme: Scheme,
}

impl McConfig {
    pub fn new(replicas: usize, dt: f64) -> Self {
        McConfig { replicas, dt, scheme: Scheme::default() }
    }
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig::new(10_000, 1e-4)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogLaplaceEstimate {
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub replicas: usize,
}

impl LogLaplaceEstimate {
    pub fn function(&self) -> CatalyzingFunction {
        CatalyzingFunction::new(self.values.clone()).expect("estimates are nonnegative")
    }

    pub fn max_se(&self) -> f64 {
        self.std_errors.iter().copied().fold(0.0, f64::max)
    }
}

/// Estimate of U_γ p(x) and its standard error. Replica `r` draws from
/// `seeder.replica(r)` whatever `x` is, so estimates at different points
/// share random numbers.
///
/// At x ∈ {0,1} the cluster is τ·δ_x and the value is the exact constant
/// formula, returned with zero standard error.
pub fn estimate_u_at(
    gamma: f64,
    p: &CatalyzingFunction,
    x: f64,
    cfg: &McConfig,
    seeder: &Seeder,
) -> (f64, f64) {
    estimate_u_fn(gamma, |y| p.eval(y), x, cfg, seeder)
}

/// Same estimator for a function given pointwise.
pub fn estimate_u_fn(
    gamma: f64,
    f: impl Fn(f64) -> f64,
    x: f64,
    cfg: &McConfig,
    seeder: &Seeder,
) -> (f64, f64) {
    if x <= 0.0 || x >= 1.0 {
        return (u_on_constant(gamma, f(x)), 0.0);
    }
    let q = q_gamma(gamma);
    let acc: MeanVar = (0..cfg.replicas)
        .map(|r| {
            let mut rng = seeder.replica(r as u64);
            let mut integral = 0.0;
            walk_cluster(gamma, x, cfg.dt, cfg.scheme, &mut rng, |y, w| integral += w * f(y));
            q * -(-integral).exp_m1()
        })
        .collect();
    (acc.mean(), acc.se())
}

/// U_γ p at every grid node of `p`.
pub fn apply_u(
    gamma: f64,
    p: &CatalyzingFunction,
    cfg: &McConfig,
    seeder: &Seeder,
) -> Result<LogLaplaceEstimate> {
    if !(gamma > 0.0) {
        return param(format!("gamma must be positive, got {gamma}"));
    }
    let est = replicate(p.values.len(), |i| estimate_u_at(gamma, p, p.node(i), cfg, seeder));
    Ok(LogLaplaceEstimate {
        values: est.iter().map(|e| e.0).collect(),
        std_errors: est.iter().map(|e| e.1).collect(),
        replicas: cfg.replicas,
    })
}

/// Dual estimate of U_γ h_m(x) = E[1 − (1−x)^{ψ′_∞}] from the injected chain.
pub fn apply_u_dual_hm(gamma: f64, m: u32, x: f64, replicas: usize, seeder: &Seeder) -> Result<(f64, f64)> {
    if m == 0 {
        return param("h_m needs m ≥ 1");
    }
    let inj = Injection::for_gamma(gamma);
    let acc: MeanVar = replicate(replicas, |r| {
        let psi = dual_chain_psi_infinity(m as u64, gamma, Some(inj), &mut seeder.replica(r as u64));
        1.0 - (1.0 - x).powi(psi as i32)
    })
    .into_iter()
    .collect();
    Ok((acc.mean(), acc.se()))
}

/// Mean and SE of ψ′_∞ for the injected chain started from (m, 0).
pub fn injected_psi_mean(gamma: f64, m: u32, replicas: usize, seeder: &Seeder) -> (f64, f64) {
    let inj = Injection::for_gamma(gamma);
    let acc: MeanVar = replicate(replicas, |r| {
        dual_chain_psi_infinity(m as u64, gamma, Some(inj), &mut seeder.replica(r as u64)) as f64
    })
    .into_iter()
    .collect();
    (acc.mean(), acc.se())
}

/// One stage of an iteration.
#[derive(Clone, Debug)]
pub struct Stage {
    pub gamma: f64,
    pub estimate: LogLaplaceEstimate,
    /// Root-sum-square of the stage standard errors so far, per node.
    pub propagated_se: Vec<f64>,
}

impl Stage {
    pub fn function(&self) -> CatalyzingFunction {
        self.estimate.function()
    }
}

/// U_{γ_{n−1}} ∘ … ∘ U_{γ_0} p, stage by stage (γ_0 is applied first).
/// Stage k draws from `seeder.derive("stage", k)`, so two iterations with the
/// same seeder use common random numbers.
pub fn iterate_u(
    gammas: &[f64],
    p: &CatalyzingFunction,
    cfg: &McConfig,
    seeder: &Seeder,
) -> Result<Vec<Stage>> {
    if let Some(g) = gammas.iter().find(|g| !(**g > 0.0)) {
        return param(format!("schedule contains nonpositive gamma {g}"));
    }
    let mut stages: Vec<Stage> = Vec::with_capacity(gammas.len());
    let mut current = p.clone();
    let mut acc = vec![0.0; p.values.len()];
    for (k, &g) in gammas.iter().enumerate() {
        let est = apply_u(g, &current, cfg, &seeder.derive("stage", k as u64))?;
        for (a, s) in acc.iter_mut().zip(&est.std_errors) {
            *a += s * s;
        }
        current = est.function();
        stages.push(Stage {
            gamma: g,
            estimate: est,
            propagated_se: acc.iter().map(|v| v.sqrt()).collect(),
        });
    }
    Ok(stages)
}

/// χ_m(γ) = (1/m) Σ_{i<m} (1+γ)/(1+iγ).
pub fn chi_m(gamma: f64, m: u32) -> f64 {
    (0..m).map(|i| (1.0 + gamma) / (1.0 + i as f64 * gamma)).sum::<f64>() / m as f64
}

/// (1/γ + 1) Σ_{k=1}^m 1/k + 3/2, an upper bound on E[ψ′_∞] for the injected chain.
pub fn large_gamma_bound(gamma: f64, m: u32) -> f64 {
    let harmonic: f64 = (1..=m).map(|k| 1.0 / k as f64).sum();
    q_gamma(gamma) * harmonic + 1.5
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    Monotone,
    MonotoneConcave,
}

#[derive(Clone, Debug)]
pub struct ShapeReport {
    pub estimate: LogLaplaceEstimate,
    /// min over i of (Δ_i + 3·SE(Δ_i)); nonnegative means monotone within noise.
    pub monotone_slack: f64,
    /// max over i of (Δ²_i − 3·SE(Δ²_i)); nonpositive means concave within noise.
    pub concave_slack: Option<f64>,
}

impl ShapeReport {
    pub fn preserved(&self) -> bool {
        self.monotone_slack >= 0.0 && self.concave_slack.is_none_or(|c| c <= 0.0)
    }
}

pub fn check_shape_preservation(
    gamma: f64,
    p: &CatalyzingFunction,
    shape: Shape,
    cfg: &McConfig,
    seeder: &Seeder,
) -> Result<ShapeReport> {
    let tol = 1e-12;
    if p.first_differences().iter().any(|d| *d < -tol) {
        return Err(Error::Parameter("input is not nondecreasing".into()));
    }
    if shape == Shape::MonotoneConcave && p.second_differences().iter().any(|d| *d > tol) {
        return Err(Error::Parameter("input is not concave".into()));
    }
    let est = apply_u(gamma, p, cfg, seeder)?;
    let (v, s) = (&est.values, &est.std_errors);
    let monotone_slack = (0..v.len() - 1)
        .map(|i| v[i + 1] - v[i] + 3.0 * (s[i] * s[i] + s[i + 1] * s[i + 1]).sqrt())
        .fold(f64::INFINITY, f64::min);
    let concave_slack = (shape == Shape::MonotoneConcave).then(|| {
        (1..v.len() - 1)
            .map(|i| {
                let se = (s[i - 1].powi(2) + 4.0 * s[i].powi(2) + s[i + 1].powi(2)).sqrt();
                v[i + 1] - 2.0 * v[i] + v[i - 1] - 3.0 * se
            })
            .fold(f64::NEG_INFINITY, f64::max)
    });
    Ok(ShapeReport { estimate: est, monotone_slack, concave_slack })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wf::invariant_moment;

    fn cfg(replicas: usize, dt: f64) -> McConfig {
        McConfig::new(replicas, dt)
    }

    #[test]
    fn standard_functions() {
        let m = 10;
        assert_eq!(CatalyzingFunction::h11(m).boundary_class(), (true, true));
        assert_eq!(CatalyzingFunction::h00(m).boundary_class(), (false, false));
        assert_eq!(CatalyzingFunction::h1(m).boundary_class(), (false, true));
        assert_eq!(CatalyzingFunction::h01(m).boundary_class(), (false, true));
        assert!((CatalyzingFunction::h1(m).lipschitz() - 1.0).abs() < 1e-12);
        assert!((CatalyzingFunction::h01(m).eval(0.25) - (1.0 - 0.75f64.powi(7))).abs() < 0.02);
        assert!(CatalyzingFunction::new(vec![1.0, -0.1]).is_err());
        assert!(CatalyzingFunction::new(vec![1.0]).is_err());
    }

    #[test]
    fn interpolation_is_exact_on_linear() {
        let p = CatalyzingFunction::from_fn(7, |x| 0.5 + 2.0 * x).unwrap();
        for &y in &[0.0, 0.01, 0.333, 0.9999, 1.0] {
            assert!((p.eval(y) - (0.5 + 2.0 * y)).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_closed_form() {
        assert!((u_on_constant(0.5, 2.0) - 1.5).abs() < 1e-15);
        assert_eq!(u_on_constant(0.8, 1.0), 1.0);
        assert!((iterate_on_constant(&[0.5], 2.0) - 1.5).abs() < 1e-15);
        let gs = [0.3, 1.2, 0.7];
        let chained = gs.iter().fold(0.4, |r, &g| u_on_constant(g, r));
        assert!((iterate_on_constant(&gs, 0.4) - chained).abs() < 1e-14);
    }

    #[test]
    fn cluster_mass_is_tau() {
        let mut rng = Seeder::new(1).to_rng();
        for _ in 0..50 {
            let z = sample_cluster(0.7, 0.4, 1e-3, Scheme::MomentBeta, &mut rng);
            let total: f64 = z.atoms.iter().map(|a| a.1).sum();
            assert!((total - z.total_mass).abs() < 1e-12);
            assert!(z.atoms.iter().all(|a| (0.0..=1.0).contains(&a.0)));
        }
    }

    #[test]
    fn cluster_first_moment_of_identity() {
        // E⟨Z, y⟩ = γ x
        let (gamma, x) = (0.5, 0.3);
        let s = Seeder::new(2);
        let acc: MeanVar = (0..20_000)
            .map(|r| sample_cluster(gamma, x, 1e-3, Scheme::MomentBeta, &mut s.replica(r)).integrate(|y| y))
            .collect();
        let exact = gamma * invariant_moment(gamma, x, 1);
        assert!((acc.mean() - exact).abs() < 3.0 * acc.se(), "{} vs {exact}", acc.mean());
    }

    #[test]
    fn u_of_zero_is_zero() {
        let est = apply_u(1.0, &CatalyzingFunction::constant(5, 0.0).unwrap(), &cfg(50, 1e-3), &Seeder::new(3)).unwrap();
        assert!(est.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn u_on_constant_mc() {
        let p = CatalyzingFunction::constant(4, 2.0).unwrap();
        let est = apply_u(0.5, &p, &cfg(4000, 1e-3), &Seeder::new(4)).unwrap();
        for (v, s) in est.values.iter().zip(&est.std_errors) {
            assert!((v - 1.5).abs() <= 3.0 * s + 1e-12, "{v} ± {s}");
        }
    }

    #[test]
    fn h00_is_superharmonic() {
        let p = CatalyzingFunction::h00(8);
        let est = apply_u(1.0, &p, &cfg(2000, 1e-3), &Seeder::new(5)).unwrap();
        for (i, (v, s)) in est.values.iter().zip(&est.std_errors).enumerate() {
            assert!(*v <= p.values()[i] + 3.0 * s + 1e-12);
        }
    }

    #[test]
    fn sandwich_bound_for_identity() {
        // ⟨Γ,f⟩ ≤ U_γ f ≤ (1+γ)⟨Γ,f⟩ for 0 ≤ f ≤ 1, with ⟨Γ_x, y⟩ = x
        let gamma = 0.8;
        let p = CatalyzingFunction::h1(6);
        let est = apply_u(gamma, &p, &cfg(3000, 1e-3), &Seeder::new(6)).unwrap();
        for (i, (v, s)) in est.values.iter().zip(&est.std_errors).enumerate() {
            let x = p.node(i);
            assert!(*v <= (1.0 + gamma) * x + 3.0 * s + 1e-12);
            assert!(*v >= x - 3.0 * s - 1e-12);
        }
    }

    #[test]
    fn dual_estimate_at_one_is_one() {
        let (v, s) = apply_u_dual_hm(1.0, 3, 1.0, 1000, &Seeder::new(7)).unwrap();
        assert_eq!((v, s), (1.0, 0.0));
    }

    #[test]
    fn injected_chain_mean_below_bound() {
        for &g in &[1.0, 2.0, 5.0] {
            let (m, se) = injected_psi_mean(g, 7, 20_000, &Seeder::new(8));
            assert!(m <= large_gamma_bound(g, 7) + 3.0 * se);
        }
    }

    #[test]
    fn chi_values() {
        for m in 1..8 {
            assert!((chi_m(0.0, m) - 1.0).abs() < 1e-15);
        }
        assert!((chi_m(0.3, 1) - 1.3).abs() < 1e-15);
        let chi5 = (2.0 + 1.0 + 2.0 / 3.0 + 0.5 + 0.4) / 5.0;
        assert!((chi_m(1.0, 5) - chi5).abs() < 1e-15);
        assert!(chi5 < 1.0);
        assert!((large_gamma_bound(1.0, 7) - (2.0 * 363.0 / 140.0 + 1.5)).abs() < 1e-12);
        assert!(large_gamma_bound(1.0, 7) < 7.0);
        assert!((large_gamma_bound(1e12, 3) - (1.0 + 0.5 + 1.0 / 3.0 + 1.5)).abs() < 1e-9);
    }

    #[test]
    fn shape_check_rejects_wrong_input() {
        let p = CatalyzingFunction::h00(6);
        assert!(check_shape_preservation(1.0, &p, Shape::Monotone, &cfg(10, 1e-3), &Seeder::new(9)).is_err());
        let p = CatalyzingFunction::from_fn(6, |x| x * x).unwrap();
        assert!(check_shape_preservation(1.0, &p, Shape::MonotoneConcave, &cfg(10, 1e-3), &Seeder::new(9)).is_err());
    }

    #[test]
    fn iteration_common_random_numbers() {
        let p = CatalyzingFunction::h1(4);
        let a = iterate_u(&[1.0, 0.5], &p, &cfg(200, 1e-3), &Seeder::new(10)).unwrap();
        let b = iterate_u(&[1.0, 0.5], &p, &cfg(200, 1e-3), &Seeder::new(10)).unwrap();
        assert_eq!(a[1].estimate, b[1].estimate);
        assert_eq!(a.len(), 2);
        assert!(a[1].propagated_se.iter().zip(&a[0].propagated_se).all(|(x, y)| x >= y));
    }
}
