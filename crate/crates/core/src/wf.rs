//! Wright-Fisher diffusion with linear drift.
//!
//! ```text
//! dy = c (x − y) dt + sqrt(2 y (1 − y)) dB,    c = 1/γ
//! ```
//!
//! Its unique invariant law is Beta(x/γ, (1−x)/γ) (a point mass when
//! x ∈ {0,1}), with moments ∏_{k<n} (x + kγ)/(1 + kγ). The process has a
//! moment dual: a coalescing chain (φ, ψ) where pairs in φ merge at rate
//! φ(φ−1) and single lineages escape to the reservoir ψ at rate φ/γ, so that
//! E[x^{ψ_∞}] is the m-th moment of the invariant law.

use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::error::{param, Result};

/// Shape parameters below this are treated as a point mass at the endpoint.
pub const SHAPE_FLOOR: f64 = 1e-12;

/// Rate of the renewal clock used by the embedded offspring and the injected
/// dual chain (spacings of mean 1/2, matching the weight 2 per unit segment
/// time of a cluster).
pub const RENEWAL_RATE: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WfParams {
    pub attract_x: f64,
    pub gamma: f64,
    pub dt: f64,
}

impl WfParams {
    pub fn new(attract_x: f64, gamma: f64, dt: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&attract_x) {
            return param(format!("attraction point {attract_x} outside [0,1]"));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return param(format!("gamma must be positive, got {gamma}"));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return param(format!("dt must be positive, got {dt}"));
        }
        Ok(WfParams { attract_x, gamma, dt })
    }

    /// Migration constant c = 1/γ.
    pub fn c(&self) -> f64 {
        1.0 / self.gamma
    }
}

/// Equally spaced samples y(0), y(dt), y(2dt), ...
#[derive(Clone, Debug, PartialEq)]
pub struct WfPath {
    pub dt: f64,
    pub values: Vec<f64>,
}

impl WfPath {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |i| i as f64 * self.dt)
    }

    /// Time average of `f` over the recorded samples.
    pub fn time_average(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.values.iter().map(|&y| f(y)).sum::<f64>() / self.values.len() as f64
    }
}

/// One Euler–Maruyama step driven by the standard normal `z`, clamped to [0,1].
#[inline]
pub fn euler_step(y: f64, x: f64, c: f64, dt: f64, z: f64) -> f64 {
    let noise = (2.0 * y * (1.0 - y) * dt).sqrt() * z;
    (y + c * (x - y) * dt + noise).clamp(0.0, 1.0)
}

/// Time-stepping scheme for the one-dimensional diffusion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Euler–Maruyama, clamped to [0,1] after every step.
    Euler,
    /// Beta transition whose mean and variance equal the exact conditional
    /// mean and variance after one step.
    #[default]
    MomentBeta,
}

impl std::str::FromStr for Scheme {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(Scheme::Euler),
            "moment-beta" => Ok(Scheme::MomentBeta),
            _ => param(format!("unknown scheme {s:?} (expected euler or moment-beta)")),
        }
    }
}

/// Precomputed one-step transition for
/// `dy = c (x − y) dt + sqrt(2 ρ y (1 − y)) dB` with frozen `x`, `c`, `ρ`.
///
/// For the moment scheme the conditional moments after a step `h` are
///
/// ```text
/// E[y_h]   = x + (y − x) e^{−ch}
/// E[y_h²]  = y² e^{−λh} + (2cx + 2ρ) [ x (1 − e^{−λh})/λ + (y − x)(e^{−ch} − e^{−λh})/(c + 2ρ) ]
/// λ = 2c + 2ρ
/// ```
#[derive(Clone, Copy, Debug)]
pub struct Stepper {
    scheme: Scheme,
    x: f64,
    c: f64,
    rho: f64,
    dt: f64,
    e_c: f64,
    e_l: f64,
    lambda: f64,
}

impl Stepper {
    pub fn new(scheme: Scheme, x: f64, c: f64, rho: f64, dt: f64) -> Self {
        let lambda = 2.0 * c + 2.0 * rho;
        Stepper {
            scheme,
            x,
            c,
            rho,
            dt,
            e_c: (-c * dt).exp(),
            e_l: (-lambda * dt).exp(),
            lambda,
        }
    }

    #[inline]
    pub fn step<R: Rng + ?Sized>(&self, y: f64, rng: &mut R) -> f64 {
        match self.scheme {
            Scheme::Euler => {
                let noise = (2.0 * self.rho * y * (1.0 - y) * self.dt).sqrt() * normal(rng);
                (y + self.c * (self.x - y) * self.dt + noise).clamp(0.0, 1.0)
            }
            Scheme::MomentBeta => self.beta_step(y, rng),
        }
    }

    /// Conditional mean and variance after one step from `y`.
    #[inline]
    pub fn moments(&self, y: f64) -> (f64, f64) {
        let x = self.x;
        let mean = x + (y - x) * self.e_c;
        if self.rho <= 0.0 {
            return (mean, 0.0);
        }
        let k = 2.0 * self.c * x + 2.0 * self.rho;
        let second = y * y * self.e_l
            + k * (x * (1.0 - self.e_l) / self.lambda
                + (y - x) * (self.e_c - self.e_l) / (self.c + 2.0 * self.rho));
        (mean, (second - mean * mean).max(0.0))
    }

    #[inline]
    fn beta_step<R: Rng + ?Sized>(&self, y: f64, rng: &mut R) -> f64 {
        let (mean, var) = self.moments(y);
        let spread = mean * (1.0 - mean);
        if var <= 0.0 || spread <= 0.0 || var >= spread {
            return mean.clamp(0.0, 1.0);
        }
        let nu = spread / var - 1.0;
        sample_beta_shapes(mean * nu, (1.0 - mean) * nu, rng)
    }
}

#[inline]
pub(crate) fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

pub fn simulate_wf_path<R: Rng + ?Sized>(
    params: &WfParams,
    y0: f64,
    horizon: f64,
    rng: &mut R,
) -> Result<WfPath> {
    if !(0.0..=1.0).contains(&y0) {
        return param(format!("y0 = {y0} outside [0,1]"));
    }
    if !(horizon >= 0.0) {
        return param(format!("negative horizon {horizon}"));
    }
    let steps = (horizon / params.dt).round() as usize;
    let c = params.c();
    let mut values = Vec::with_capacity(steps + 1);
    let mut y = y0;
    values.push(y);
    for _ in 0..steps {
        y = euler_step(y, params.attract_x, c, params.dt, normal(rng));
        values.push(y);
    }
    Ok(WfPath { dt: params.dt, values })
}

/// The invariant law Γ^γ_x = Beta(x/γ, (1−x)/γ).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BetaInvariantLaw {
    pub gamma: f64,
    pub x: f64,
}

impl BetaInvariantLaw {
    pub fn new(gamma: f64, x: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return param(format!("gamma must be positive, got {gamma}"));
        }
        if !(0.0..=1.0).contains(&x) {
            return param(format!("x = {x} outside [0,1]"));
        }
        Ok(BetaInvariantLaw { gamma, x })
    }

    pub fn alpha1(&self) -> f64 {
        self.x / self.gamma
    }

    pub fn alpha2(&self) -> f64 {
        (1.0 - self.x) / self.gamma
    }

    pub fn is_point_mass(&self) -> bool {
        self.alpha1() < SHAPE_FLOOR || self.alpha2() < SHAPE_FLOOR
    }

    pub fn moment(&self, n: u32) -> f64 {
        invariant_moment(self.gamma, self.x, n)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        sample_beta_law(self.gamma, self.x, rng)
    }
}

/// Draw from Beta(x/γ, (1−x)/γ) without constructing a validated law.
#[inline]
pub(crate) fn sample_beta_law<R: Rng + ?Sized>(gamma: f64, x: f64, rng: &mut R) -> f64 {
    sample_beta_shapes(x / gamma, (1.0 - x) / gamma, rng)
}

/// Beta(a, b) draw with shapes below [`SHAPE_FLOOR`] read as endpoint masses.
#[inline]
pub(crate) fn sample_beta_shapes<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    if a < SHAPE_FLOOR {
        return 0.0;
    }
    if b < SHAPE_FLOOR {
        return 1.0;
    }
    match Beta::new(a, b) {
        Ok(d) => {
            let y: f64 = d.sample(rng);
            if y.is_nan() {
                // both gamma variates underflowed; the mass sits at the nearer endpoint
                if a < b {
                    0.0
                } else {
                    1.0
                }
            } else {
                y
            }
        }
        Err(_) => a / (a + b),
    }
}

pub fn sample_invariant<R: Rng + ?Sized>(law: &BetaInvariantLaw, rng: &mut R) -> f64 {
    law.sample(rng)
}

/// ∏_{k=0}^{n−1} (x + kγ)/(1 + kγ); equals 1 for n = 0.
pub fn invariant_moment(gamma: f64, x: f64, n: u32) -> f64 {
    (0..n)
        .map(|k| {
            let kg = k as f64 * gamma;
            (x + kg) / (1.0 + kg)
        })
        .product()
}

/// Two paths driven by the same Brownian increments.
#[derive(Clone, Debug)]
pub struct CoupledPaths {
    pub low: WfPath,
    pub high: WfPath,
    /// Fraction of grid times with `low > high`.
    pub violation_fraction: f64,
}

pub fn couple_wf_pair<R: Rng + ?Sized>(
    params_low: &WfParams,
    params_high: &WfParams,
    y0_low: f64,
    y0_high: f64,
    horizon: f64,
    rng: &mut R,
) -> Result<CoupledPaths> {
    if params_low.gamma != params_high.gamma || params_low.dt != params_high.dt {
        return param("coupled paths must share gamma and dt");
    }
    if params_low.attract_x > params_high.attract_x {
        return param("attraction points must be ordered");
    }
    if y0_low > y0_high {
        return param("initial points must be ordered");
    }
    if !(0.0..=1.0).contains(&y0_low) || !(0.0..=1.0).contains(&y0_high) {
        return param("initial points must lie in [0,1]");
    }
    let steps = (horizon.max(0.0) / params_low.dt).round() as usize;
    let (c, dt) = (params_low.c(), params_low.dt);
    let mut low = Vec::with_capacity(steps + 1);
    let mut high = Vec::with_capacity(steps + 1);
    let (mut a, mut b) = (y0_low, y0_high);
    low.push(a);
    high.push(b);
    let mut violations = 0usize;
    for _ in 0..steps {
        let z = normal(rng);
        a = euler_step(a, params_low.attract_x, c, dt, z);
        b = euler_step(b, params_high.attract_x, c, dt, z);
        if a > b {
            violations += 1;
        }
        low.push(a);
        high.push(b);
    }
    let violation_fraction = if steps == 0 {
        0.0
    } else {
        violations as f64 / steps as f64
    };
    Ok(CoupledPaths {
        low: WfPath { dt, values: low },
        high: WfPath { dt, values: high },
        violation_fraction,
    })
}

/// State of the moment-dual chain: lineages in the population (φ) and in
/// the reservoir (ψ).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DualChainState {
    pub phi: u64,
    pub psi: u64,
}

/// Renewal clock for the injected chain: a fresh batch of m lineages arrives
/// at each renewal time (rate `rate`) until an independent exponential window
/// of mean `window_mean` closes. The batch at time 0 is the initial state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Injection {
    pub rate: f64,
    pub window_mean: f64,
}

impl Injection {
    /// Renewals of rate [`RENEWAL_RATE`] before a window of mean γ/2.
    pub fn for_gamma(gamma: f64) -> Self {
        Injection { rate: RENEWAL_RATE, window_mean: 0.5 * gamma }
    }

    /// Expected number of batches including the one at time 0.
    pub fn expected_batches(&self) -> f64 {
        1.0 + self.rate * self.window_mean
    }
}

/// Runs the dual chain from `(m, 0)` until absorption and returns ψ_∞.
pub fn dual_chain_psi_infinity<R: Rng + ?Sized>(
    m: u64,
    gamma: f64,
    injection: Option<Injection>,
    rng: &mut R,
) -> u64 {
    let c = 1.0 / gamma;
    let mut s = DualChainState { phi: m, psi: 0 };
    let (ren, close) = match injection {
        Some(inj) if m > 0 => (inj.rate, 1.0 / inj.window_mean),
        _ => (0.0, 0.0),
    };
    let mut window_open = ren > 0.0;
    loop {
        let phi = s.phi as f64;
        let coal = phi * (phi - 1.0);
        let res = phi * c;
        let (ren, close) = if window_open { (ren, close) } else { (0.0, 0.0) };
        let total = coal + res + ren + close;
        if total == 0.0 {
            return s.psi;
        }
        let u = rng.random::<f64>() * total;
        if u < coal {
            s.phi -= 1;
        } else if u < coal + res {
            s.phi -= 1;
            s.psi += 1;
        } else if u < coal + res + ren {
            s.phi += m;
        } else {
            window_open = false;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Seeder;
    use crate::stats::MeanVar;

    #[test]
    fn moment_step_matches_closed_form_moments() {
        // one long step from y: the two moments must match the transition
        // moments; with h → ∞ they approach the invariant law
        let (x, gamma) = (0.3, 0.5);
        let st = Stepper::new(Scheme::MomentBeta, x, 1.0 / gamma, 1.0, 50.0);
        let (m, v) = st.moments(0.9);
        assert!((m - x).abs() < 1e-12);
        let inv_var = invariant_moment(gamma, x, 2) - x * x;
        assert!((v - inv_var).abs() < 1e-12);
        let mut rng = Seeder::new(11).to_rng();
        let acc: MeanVar = (0..100_000).map(|_| st.step(0.05, &mut rng)).collect();
        assert!((acc.mean() - x).abs() < 3.0 * acc.se());
    }

    #[test]
    fn moment_step_small_h_matches_euler_moments() {
        let st = Stepper::new(Scheme::MomentBeta, 0.4, 2.0, 0.7, 1e-4);
        let (m, v) = st.moments(0.25);
        assert!((m - (0.25 + 2.0 * 0.15 * 1e-4)).abs() < 1e-8);
        assert!((v / (2.0 * 0.7 * 0.25 * 0.75 * 1e-4) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn moment_step_without_noise_is_deterministic() {
        let st = Stepper::new(Scheme::MomentBeta, 0.4, 1.0, 0.0, 0.1);
        let mut rng = Seeder::new(12).to_rng();
        let y = st.step(0.8, &mut rng);
        assert!((y - (0.4 + 0.4 * (-0.1f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn scheme_parses() {
        assert_eq!("euler".parse::<Scheme>().unwrap(), Scheme::Euler);
        assert_eq!("moment-beta".parse::<Scheme>().unwrap(), Scheme::MomentBeta);
        assert!("rk4".parse::<Scheme>().is_err());
    }

    #[test]
    fn absorbing_boundary_path_is_zero() {
        let p = WfParams::new(0.0, 1.0, 1e-3).unwrap();
        let path = simulate_wf_path(&p, 0.0, 1.0, &mut Seeder::new(1).to_rng()).unwrap();
        assert!(path.values.iter().all(|&y| y == 0.0));
        assert_eq!(path.values.len(), 1001);
    }

    #[test]
    fn bad_params_rejected() {
        assert!(WfParams::new(0.5, 0.0, 1e-3).is_err());
        assert!(WfParams::new(0.5, 1.0, -1.0).is_err());
        assert!(WfParams::new(1.5, 1.0, 1e-3).is_err());
    }

    #[test]
    fn moment_closed_forms() {
        assert_eq!(invariant_moment(0.7, 0.3, 0), 1.0);
        assert_eq!(invariant_moment(0.7, 0.3, 1), 0.3);
        assert!((invariant_moment(1.0, 0.5, 2) - 0.375).abs() < 1e-15);
        assert_eq!(invariant_moment(2.0, 1.0, 5), 1.0);
        // fixed shape: E[y(1−y)] = m1 − m2 = x(1−x)/(1+γ)
        for &(g, x) in &[(0.5, 0.1), (1.0, 0.3), (2.0, 0.8)] {
            let lhs = invariant_moment(g, x, 1) - invariant_moment(g, x, 2);
            assert!((lhs - x * (1.0 - x) / (1.0 + g)).abs() < 1e-14);
        }
    }

    #[test]
    fn endpoint_laws_are_point_masses() {
        let mut rng = Seeder::new(2).to_rng();
        for _ in 0..100 {
            assert_eq!(BetaInvariantLaw::new(1.0, 0.0).unwrap().sample(&mut rng), 0.0);
            assert_eq!(BetaInvariantLaw::new(1.0, 1.0).unwrap().sample(&mut rng), 1.0);
        }
    }

    #[test]
    fn tiny_shapes_stay_finite() {
        let mut rng = Seeder::new(3).to_rng();
        for &x in &[1e-9, 1e-6, 1.0 - 1e-9, 1e-13] {
            for _ in 0..2000 {
                let y = sample_beta_law(1.0, x, &mut rng);
                assert!((0.0..=1.0).contains(&y), "x={x} y={y}");
            }
        }
    }

    #[test]
    fn invariant_sample_moments() {
        let law = BetaInvariantLaw::new(1.0, 0.3).unwrap();
        let mut rng = Seeder::new(4).to_rng();
        let mut m1 = MeanVar::new();
        let mut h = MeanVar::new();
        for _ in 0..100_000 {
            let y = law.sample(&mut rng);
            m1.push(y);
            h.push(y * (1.0 - y));
        }
        assert!((m1.mean() - 0.3).abs() < 3.0 * m1.se());
        assert!((h.mean() - 0.105).abs() < 3.0 * h.se());
    }

    #[test]
    fn path_time_averages() {
        // stationary start; long run time averages of y and y(1−y)
        let p = WfParams::new(0.4, 1.0, 1e-3).unwrap();
        let seeder = Seeder::new(5);
        let mut mean = MeanVar::new();
        let mut shape = MeanVar::new();
        for r in 0..40 {
            let mut rng = seeder.rng("path", r);
            let y0 = sample_beta_law(1.0, 0.4, &mut rng);
            let path = simulate_wf_path(&p, y0, 20.0, &mut rng).unwrap();
            mean.push(path.time_average(|y| y));
            shape.push(path.time_average(|y| y * (1.0 - y)));
        }
        assert!((mean.mean() - 0.4).abs() < 3.0 * mean.se() + 2e-3);
        assert!((shape.mean() - 0.12).abs() < 3.0 * shape.se() + 2e-3);
    }

    #[test]
    fn identical_coupling_gives_identical_paths() {
        let p = WfParams::new(0.3, 0.5, 1e-3).unwrap();
        let c = couple_wf_pair(&p, &p, 0.6, 0.6, 1.0, &mut Seeder::new(6).to_rng()).unwrap();
        assert_eq!(c.low, c.high);
        assert_eq!(c.violation_fraction, 0.0);
    }

    #[test]
    fn coupling_rejects_unordered_input() {
        let p = WfParams::new(0.3, 0.5, 1e-3).unwrap();
        let q = WfParams::new(0.2, 0.5, 1e-3).unwrap();
        let mut rng = Seeder::new(6).to_rng();
        assert!(couple_wf_pair(&p, &p, 0.7, 0.6, 1.0, &mut rng).is_err());
        assert!(couple_wf_pair(&p, &q, 0.1, 0.6, 1.0, &mut rng).is_err());
    }

    #[test]
    fn dual_chain_pair_race() {
        // two lineages: coalescence at rate 2 against escape at rate 2/γ;
        // ψ_∞ = 1 iff they coalesce first, probability γ/(1+γ)
        let gamma = 0.5;
        let seeder = Seeder::new(7);
        let mut ones = MeanVar::new();
        for r in 0..50_000 {
            let psi = dual_chain_psi_infinity(2, gamma, None, &mut seeder.rng("d", r));
            assert!(psi == 1 || psi == 2);
            ones.push((psi == 1) as u8 as f64);
        }
        let p = gamma / (1.0 + gamma);
        assert!((ones.mean() - p).abs() < 3.0 * ones.se(), "{} vs {p}", ones.mean());
    }

    #[test]
    fn dual_chain_moment_duality() {
        let (gamma, x): (f64, f64) = (0.7, 0.35);
        let seeder = Seeder::new(8);
        let acc: MeanVar = (0..50_000)
            .map(|r| x.powi(dual_chain_psi_infinity(3, gamma, None, &mut seeder.rng("d", r)) as i32))
            .collect();
        let exact = invariant_moment(gamma, x, 3);
        assert!((acc.mean() - exact).abs() < 3.0 * acc.se());
    }

    #[test]
    fn dual_chain_trivial_start() {
        assert_eq!(dual_chain_psi_infinity(0, 1.0, None, &mut Seeder::new(9).to_rng()), 0);
    }
}
