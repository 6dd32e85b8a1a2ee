//! Poisson-cluster branching processes, their embedded particle systems and
//! the size-biased (Campbell) representation with an immortal particle.
//!
//! A unit of mass at x produces Pois(q_γ) clusters Z with
//! Z = 2∫_0^{τ/2} δ_{y(−s)} ds, y a stationary path attracted to x and τ
//! exponential with mean γ. Poissonizing with a density h gives particle
//! offspring Pois(hZ): the rate-2 renewal points of the path before τ/2,
//! each kept with probability h(y).

use rand::Rng;
use rand_distr::{Distribution, Exp, Exp1, Gamma, Poisson};

use crate::error::{param, Error, Result};
use crate::loglaplace::{estimate_u_fn, q_gamma, walk_cluster, CatalyzingFunction, LogLaplaceEstimate, McConfig};
use crate::rng::Seeder;
use crate::stats::{replicate, MeanVar};
use crate::wf::{sample_beta_law, sample_beta_shapes, Scheme, Stepper, RENEWAL_RATE};

/// Attempts allowed when drawing Pois(hZ) conditioned to be nonzero.
pub const REJECTION_CAP: usize = 10_000;
/// Default particle count past which a run counts as growing without bound.
pub const GROWTH_CEILING: usize = 10_000;

/// Finite measure Σ m_i δ_{x_i} on [0,1].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AtomicMeasure {
    atoms: Vec<(f64, f64)>,
}

impl AtomicMeasure {
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        for &(x, m) in &atoms {
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::Domain(format!("atom position {x} outside [0,1]")));
            }
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::Domain(format!("atom weight {m} must be positive")));
            }
        }
        Ok(AtomicMeasure { atoms })
    }

    pub fn empty() -> Self {
        AtomicMeasure::default()
    }

    pub fn dirac(x: f64, mass: f64) -> Result<Self> {
        AtomicMeasure::new(vec![(x, mass)])
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.atoms.iter().map(|&(x, m)| m * f(x)).sum()
    }

    /// Mass in the interior (0,1).
    pub fn interior_mass(&self) -> f64 {
        self.atoms.iter().filter(|a| a.0 > 0.0 && a.0 < 1.0).map(|a| a.1).sum()
    }

    /// Merges interior atoms into `bins` equal cells, each replaced by one
    /// atom at the mass-weighted mean position; atoms at 0 and 1 are pooled.
    pub fn merged(&self, bins: usize) -> Self {
        let mut cells = vec![(0.0, 0.0); bins];
        let (mut left, mut right) = (0.0, 0.0);
        for &(x, m) in &self.atoms {
            if x <= 0.0 {
                left += m;
            } else if x >= 1.0 {
                right += m;
            } else {
                let b = ((x * bins as f64) as usize).min(bins - 1);
                cells[b].0 += m * x;
                cells[b].1 += m;
            }
        }
        let mut atoms = Vec::with_capacity(bins + 2);
        if left > 0.0 {
            atoms.push((0.0, left));
        }
        atoms.extend(cells.into_iter().filter(|c| c.1 > 0.0).map(|(mx, m)| ((mx / m).clamp(0.0, 1.0), m)));
        if right > 0.0 {
            atoms.push((1.0, right));
        }
        AtomicMeasure { atoms }
    }
}

/// Finite multiset of particle positions.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParticleConfiguration {
    pub positions: Vec<f64>,
}

impl ParticleConfiguration {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn count_in(&self, lo: f64, hi: f64) -> usize {
        self.positions.iter().filter(|x| **x >= lo && **x < hi).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BranchingConfig {
    /// Path discretization step.
    pub dt: f64,
    pub scheme: Scheme,
    /// Bin count for merging interior atoms after each measure-valued step;
    /// `None` keeps every atom.
    pub bins: Option<usize>,
    /// Total mass past which a measure-valued run is stopped.
    pub mass_ceiling: f64,
    pub particle_ceiling: usize,
    pub rejection_cap: usize,
}

impl Default for BranchingConfig {
    fn default() -> Self {
        BranchingConfig {
            dt: 1e-2,
            scheme: Scheme::default(),
            bins: Some(200),
            mass_ceiling: 1e6,
            particle_ceiling: GROWTH_CEILING,
            rejection_cap: REJECTION_CAP,
        }
    }
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|p| p.sample(rng) as u64).unwrap_or(0)
}

/// One step X ↦ X′: every atom (x, m) emits Pois(q_γ m) independent clusters.
/// Clusters from x ∈ {0,1} are τ·δ_x, so their union is one atom whose
/// Gamma-distributed mass is drawn directly.
pub fn step_poisson_cluster<R: Rng + ?Sized>(
    x: &AtomicMeasure,
    gamma: f64,
    cfg: &BranchingConfig,
    rng: &mut R,
) -> Result<AtomicMeasure> {
    if !(gamma > 0.0) {
        return param(format!("gamma must be positive, got {gamma}"));
    }
    let q = q_gamma(gamma);
    let mut atoms = Vec::new();
    for &(pos, m) in &x.atoms {
        let n = poisson(q * m, rng);
        if n == 0 {
            continue;
        }
        if pos <= 0.0 || pos >= 1.0 {
            let g = Gamma::new(n as f64, gamma).map_err(|e| Error::Numerical(e.to_string()))?;
            atoms.push((pos, g.sample(rng)));
            continue;
        }
        for _ in 0..n {
            walk_cluster(gamma, pos, cfg.dt, cfg.scheme, rng, |y, w| {
                if w > 0.0 {
                    atoms.push((y, w))
                }
            });
        }
    }
    Ok(AtomicMeasure { atoms })
}

/// X_{−n}, …, X_0 started from `start` at time −n; `gammas` is γ_0, γ_1, …
/// and the step into time −k uses γ_k. Interior atoms are merged after each
/// step when `cfg.bins` is set.
pub fn run_renorm_branching<R: Rng + ?Sized>(
    gammas: &[f64],
    start: &AtomicMeasure,
    cfg: &BranchingConfig,
    rng: &mut R,
) -> Result<Vec<AtomicMeasure>> {
    let mut traj = vec![start.clone()];
    for k in (0..gammas.len()).rev() {
        let last = traj.last().unwrap();
        if last.is_empty() {
            traj.push(AtomicMeasure::empty());
            continue;
        }
        let mut next = step_poisson_cluster(last, gammas[k], cfg, rng)?;
        if let Some(b) = cfg.bins {
            next = next.merged(b);
        }
        let mass = next.total_mass();
        if mass > cfg.mass_ceiling {
            return Err(Error::Numerical(format!(
                "population mass {mass:.3e} above ceiling {:.3e} at step {}",
                cfg.mass_ceiling,
                gammas.len() - k
            )));
        }
        traj.push(next);
    }
    Ok(traj)
}

/// Pois(hX): Poisson(h(x)·m) particles at each atom.
pub fn poissonize<R: Rng + ?Sized>(
    x: &AtomicMeasure,
    h: impl Fn(f64) -> f64,
    rng: &mut R,
) -> ParticleConfiguration {
    let mut positions = Vec::new();
    for &(pos, m) in &x.atoms {
        let n = poisson(h(pos) * m, rng);
        positions.extend(std::iter::repeat_n(pos, n as usize));
    }
    ParticleConfiguration { positions }
}

/// Independently keeps each particle at x with probability f(x).
pub fn thin<R: Rng + ?Sized>(
    nu: &ParticleConfiguration,
    f: impl Fn(f64) -> f64,
    rng: &mut R,
) -> ParticleConfiguration {
    ParticleConfiguration {
        positions: nu.positions.iter().copied().filter(|x| rng.random::<f64>() < f(*x)).collect(),
    }
}

/// Densities used for Poissonization.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Density {
    /// h ≡ 1
    H11,
    /// h(x) = x(1−x)
    H00,
    /// h(x) = 1 − (1−x)^m
    H0m(u32),
}

impl Density {
    pub const H01: Density = Density::H0m(7);

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Density::H11 => 1.0,
            Density::H00 => x * (1.0 - x),
            Density::H0m(m) => 1.0 - (1.0 - x).powi(m as i32),
        }
    }

    pub fn grid(&self, m: usize) -> CatalyzingFunction {
        CatalyzingFunction::from_fn(m, |x| self.eval(x)).expect("densities are nonnegative")
    }
}

impl std::str::FromStr for Density {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "h11" => Ok(Density::H11),
            "h00" => Ok(Density::H00),
            "h01" => Ok(Density::H01),
            _ => match s.strip_prefix("h0m") {
                Some(m) => m.parse().map(Density::H0m).map_err(|_| Error::Parse(format!("bad density {s}"))),
                None => Err(Error::Parse(format!("unknown density {s}; expected h11, h00, h01 or h0m<k>"))),
            },
        }
    }
}

/// Moves a stationary path from `y` forward by `duration` in steps of at
/// most `dt`.
fn advance<R: Rng + ?Sized>(y: f64, x: f64, gamma: f64, duration: f64, cfg: &BranchingConfig, rng: &mut R) -> f64 {
    if duration <= 0.0 {
        return y;
    }
    let steps = (duration / cfg.dt).ceil().max(1.0) as usize;
    let stepper = Stepper::new(cfg.scheme, x, 1.0 / gamma, 1.0, duration / steps as f64);
    (0..steps).fold(y, |y, _| stepper.step(y, rng))
}

/// Positions of the rate-2 renewal points (excluding time 0) on a path piece
/// of length `length` started at `y0`, each kept with probability h(y).
fn thinned_renewals<R: Rng + ?Sized>(
    y0: f64,
    x: f64,
    gamma: f64,
    length: f64,
    h: Density,
    cfg: &BranchingConfig,
    rng: &mut R,
    out: &mut Vec<f64>,
) {
    let gap = Exp::new(RENEWAL_RATE).expect("positive rate");
    let (mut t, mut y) = (0.0, y0);
    loop {
        let s = gap.sample(rng);
        if t + s >= length {
            return;
        }
        y = advance(y, x, gamma, s, cfg, rng);
        t += s;
        if h == Density::H11 || rng.random::<f64>() < h.eval(y) {
            out.push(y);
        }
    }
}

/// One draw of Pois(hZ) for a cluster at x.
pub fn sample_poissonized_cluster<R: Rng + ?Sized>(
    x: f64,
    gamma: f64,
    h: Density,
    cfg: &BranchingConfig,
    rng: &mut R,
) -> Vec<f64> {
    let e: f64 = Exp1.sample(rng);
    let length = 0.5 * gamma * e;
    let y0 = sample_beta_law(gamma, x, rng);
    let mut out = Vec::new();
    thinned_renewals(y0, x, gamma, length, h, cfg, rng, &mut out);
    out
}

/// Position drawn from h(y)Γ_x(dy) normalized, Γ_x = Beta(a, b) with
/// a = x/γ, b = (1−x)/γ. Multiplying the Beta density by y(1−y)^j shifts
/// the shapes to (a+1, b+j), so both densities are exact Beta draws or
/// finite Beta mixtures.
pub fn sample_h_biased<R: Rng + ?Sized>(x: f64, gamma: f64, h: Density, rng: &mut R) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return x;
    }
    let (a, b) = (x / gamma, (1.0 - x) / gamma);
    match h {
        Density::H11 => sample_beta_law(gamma, x, rng),
        Density::H00 => sample_beta_shapes(a + 1.0, b + 1.0, rng),
        Density::H0m(m) => {
            // 1 − (1−y)^m = y Σ_{j<m} (1−y)^j, weight of term j is E[y(1−y)^j]
            let mut w = Vec::with_capacity(m as usize);
            let mut cur = a / (a + b);
            for j in 0..m {
                w.push(cur);
                cur *= (b + j as f64) / (a + b + 1.0 + j as f64);
            }
            let total: f64 = w.iter().sum();
            let mut u = rng.random::<f64>() * total;
            let mut j = 0;
            while j + 1 < w.len() && u >= w[j] {
                u -= w[j];
                j += 1;
            }
            sample_beta_shapes(a + 1.0, b + j as f64, rng)
        }
    }
}

/// Pois(hZ) seen from a typical kept point: a mark at an h-biased position
/// plus thinned renewal points on two independent path pieces of length
/// Exp(γ/2) run from the mark. Accepting this with probability 1/N gives
/// Pois(hZ) conditioned to be nonzero.
fn palm_cluster<R: Rng + ?Sized>(x: f64, gamma: f64, h: Density, cfg: &BranchingConfig, rng: &mut R) -> Vec<f64> {
    let mark = sample_h_biased(x, gamma, h, rng);
    let mut out = vec![mark];
    two_sided_points(mark, x, gamma, h, cfg, rng, &mut out);
    out
}

fn two_sided_points<R: Rng + ?Sized>(
    mark: f64,
    x: f64,
    gamma: f64,
    h: Density,
    cfg: &BranchingConfig,
    rng: &mut R,
    out: &mut Vec<f64>,
) {
    let piece = Exp::new(2.0 / gamma).expect("positive rate");
    for _ in 0..2 {
        let len = piece.sample(rng);
        thinned_renewals(mark, x, gamma, len, h, cfg, rng, out);
    }
}

/// Offspring law of the embedded particle system with density h at one γ,
/// with a grid cache of U_γ h for the mixture weight U_γh(x)/h(x).
#[derive(Clone, Debug)]
pub struct OffspringContext {
    pub density: Density,
    pub gamma: f64,
    pub h: CatalyzingFunction,
    pub cache: LogLaplaceEstimate,
    pub cfg: BranchingConfig,
}

impl OffspringContext {
    /// Builds the cache on M+1 nodes and checks U_γ h ≤ h within three
    /// standard errors at every node.
    pub fn new(
        density: Density,
        gamma: f64,
        m: usize,
        mc: &McConfig,
        cfg: BranchingConfig,
        seeder: &Seeder,
    ) -> Result<Self> {
        if !(gamma > 0.0) {
            return param(format!("gamma must be positive, got {gamma}"));
        }
        let h = density.grid(m);
        let cache = if density == Density::H11 {
            // U_γ 1 = 1
            LogLaplaceEstimate { values: vec![1.0; m + 1], std_errors: vec![0.0; m + 1], replicas: 0 }
        } else {
            let est = replicate(m + 1, |i| {
                estimate_u_fn(gamma, |y| density.eval(y), i as f64 / m as f64, mc, seeder)
            });
            LogLaplaceEstimate {
                values: est.iter().map(|e| e.0).collect(),
                std_errors: est.iter().map(|e| e.1).collect(),
                replicas: mc.replicas,
            }
        };
        for (i, (u, s)) in cache.values.iter().zip(&cache.std_errors).enumerate() {
            let hv = h.values()[i];
            if *u > hv + 3.0 * s + 1e-12 {
                return Err(Error::Domain(format!(
                    "density is not superharmonic at x = {}: U h = {u:.5} > h = {hv:.5}",
                    h.node(i)
                )));
            }
        }
        Ok(OffspringContext { density, gamma, h, cache, cfg })
    }

    /// Probability U_γh(x)/h(x) of a nonempty offspring.
    pub fn acceptance(&self, x: f64) -> f64 {
        let hx = self.density.eval(x);
        if hx <= 0.0 {
            return 0.0;
        }
        (interp(&self.cache.values, x) / hx).clamp(0.0, 1.0)
    }

    /// Standard error of `acceptance(x)` from the cache.
    pub fn acceptance_se(&self, x: f64) -> f64 {
        let hx = self.density.eval(x);
        if hx <= 0.0 {
            0.0
        } else {
            interp(&self.cache.std_errors, x) / hx
        }
    }

    pub fn sample_offspring<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> Result<Vec<f64>> {
        if self.density == Density::H11 {
            return Ok(self.sample_h11(x, rng));
        }
        if rng.random::<f64>() >= self.acceptance(x) {
            return Ok(Vec::new());
        }
        for _ in 0..self.cfg.rejection_cap {
            let kids = palm_cluster(x, self.gamma, self.density, &self.cfg, rng);
            if rng.random::<f64>() * kids.len() as f64 <= 1.0 {
                return Ok(kids);
            }
        }
        Err(Error::Numerical(format!(
            "no nonempty offspring at x = {x} after {} attempts",
            self.cfg.rejection_cap
        )))
    }

    /// Pois(Z) conditioned nonzero: the stationary position at time 0 plus
    /// the rate-2 renewal points before an independent Exp(γ/2) time.
    fn sample_h11<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> Vec<f64> {
        let e: f64 = Exp1.sample(rng);
        let y0 = sample_beta_law(self.gamma, x, rng);
        let mut out = vec![y0];
        thinned_renewals(y0, x, self.gamma, 0.5 * self.gamma * e, Density::H11, &self.cfg, rng, &mut out);
        out
    }
}

fn interp(values: &[f64], x: f64) -> f64 {
    let m = values.len() - 1;
    let s = x.clamp(0.0, 1.0) * m as f64;
    let i = (s.floor() as usize).min(m - 1);
    let t = s - i as f64;
    values[i] * (1.0 - t) + values[i + 1] * t
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmbeddedOutcome {
    Extinct,
    GrewPastCeiling,
    Undecided,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddedRun {
    /// Particle counts at times −n, …, 0 (a run past the ceiling stops
    /// early).
    pub counts: Vec<usize>,
    pub outcome: EmbeddedOutcome,
    pub population: ParticleConfiguration,
}

impl EmbeddedRun {
    pub fn final_count(&self) -> usize {
        *self.counts.last().unwrap_or(&0)
    }
}

/// Runs the embedded particle system from `start` at time −n, where
/// `contexts[k]` holds the offspring law at γ_k and the step into time −k
/// uses `contexts[k]`.
pub fn run_embedded<R: Rng + ?Sized>(
    contexts: &[&OffspringContext],
    start: &[f64],
    rng: &mut R,
) -> Result<EmbeddedRun> {
    let ceiling = contexts.first().map(|c| c.cfg.particle_ceiling).unwrap_or(GROWTH_CEILING);
    let mut pop = start.to_vec();
    let mut counts = vec![pop.len()];
    for k in (0..contexts.len()).rev() {
        let mut next = Vec::new();
        for &x in &pop {
            next.extend(contexts[k].sample_offspring(x, rng)?);
            if next.len() >= ceiling {
                counts.push(next.len());
                return Ok(EmbeddedRun {
                    counts,
                    outcome: EmbeddedOutcome::GrewPastCeiling,
                    population: ParticleConfiguration { positions: next },
                });
            }
        }
        pop = next;
        counts.push(pop.len());
    }
    let outcome = if pop.is_empty() { EmbeddedOutcome::Extinct } else { EmbeddedOutcome::Undecided };
    Ok(EmbeddedRun { counts, outcome, population: ParticleConfiguration { positions: pop } })
}

fn check_density(contexts: &[&OffspringContext], d: Density) -> Result<()> {
    if contexts.iter().any(|c| c.density != d) {
        return param(format!("all offspring contexts must use {d:?}"));
    }
    Ok(())
}

/// The h ≡ 1 system: every particle has at least one offspring.
pub fn run_embedded_h11<R: Rng + ?Sized>(contexts: &[&OffspringContext], x: f64, rng: &mut R) -> Result<EmbeddedRun> {
    check_density(contexts, Density::H11)?;
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("start {x} outside [0,1]")));
    }
    run_embedded(contexts, &[x], rng)
}

/// The critical h(x) = x(1−x) system.
pub fn run_embedded_h00<R: Rng + ?Sized>(contexts: &[&OffspringContext], x: f64, rng: &mut R) -> Result<EmbeddedRun> {
    check_density(contexts, Density::H00)?;
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::Domain(format!("h vanishes at {x}; start must be interior")));
    }
    run_embedded(contexts, &[x], rng)
}

/// The h(x) = 1 − (1−x)^m system.
pub fn run_embedded_h01<R: Rng + ?Sized>(contexts: &[&OffspringContext], x: f64, rng: &mut R) -> Result<EmbeddedRun> {
    if contexts.iter().any(|c| !matches!(c.density, Density::H0m(_))) {
        return param("all offspring contexts must use h0m");
    }
    if !(x > 0.0 && x <= 1.0) {
        return Err(Error::Domain(format!("h vanishes at {x}; start must lie in (0,1]")));
    }
    run_embedded(contexts, &[x], rng)
}

/// Empirical law of ⟨X_0, h⟩ over independent measure-valued runs from δ_x.
#[derive(Clone, Debug, PartialEq)]
pub struct MassStatistics {
    /// ⟨X_0, h⟩ per replica; runs stopped above `stop_mass` are recorded as
    /// +∞.
    pub values: Vec<f64>,
    pub lower: f64,
    pub upper: f64,
    /// P[lower < ⟨X_0,h⟩ < upper]
    pub middle: f64,
    pub middle_se: f64,
    pub below: f64,
    pub above: f64,
}

impl MassStatistics {
    /// Counts per bin for the given increasing edges; values outside land in
    /// the first or last bin.
    pub fn histogram(&self, edges: &[f64]) -> Vec<usize> {
        let mut h = vec![0; edges.len() + 1];
        for v in &self.values {
            h[edges.partition_point(|e| e <= v)] += 1;
        }
        h
    }
}

/// Runs replicas of the measure-valued process over `gammas` (applied as in
/// [`run_renorm_branching`]) and summarizes ⟨X_0, h⟩. A run whose weighted
/// mass passes `stop_mass` is stopped and recorded as +∞. Total mass is not
/// capped here: mass piling up at 0 and 1 is held in two atoms and costs
/// nothing to propagate.
#[allow(clippy::too_many_arguments)]
pub fn weighted_mass_statistics(
    gammas: &[f64],
    x: f64,
    h: Density,
    replicas: usize,
    bounds: (f64, f64),
    stop_mass: f64,
    cfg: &BranchingConfig,
    seeder: &Seeder,
) -> Result<MassStatistics> {
    let (lower, upper) = bounds;
    if !(lower < upper) || !(stop_mass > upper) {
        return param("need lower < upper < stop_mass");
    }
    let start = AtomicMeasure::dirac(x, 1.0)?;
    let values = replicate(replicas, |r| -> Result<f64> {
        let mut rng = seeder.replica(r as u64);
        let mut cur = start.clone();
        for k in (0..gammas.len()).rev() {
            if cur.is_empty() {
                return Ok(0.0);
            }
            cur = step_poisson_cluster(&cur, gammas[k], cfg, &mut rng)?;
            if let Some(b) = cfg.bins {
                cur = cur.merged(b);
            }
            if cur.integrate(|y| h.eval(y)) > stop_mass {
                return Ok(f64::INFINITY);
            }
        }
        Ok(cur.integrate(|y| h.eval(y)))
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    let n = values.len() as f64;
    let frac = |f: &dyn Fn(f64) -> bool| values.iter().filter(|v| f(**v)).count() as f64 / n;
    let middle = frac(&|v| v > lower && v < upper);
    Ok(MassStatistics {
        middle_se: (middle * (1.0 - middle) / n).sqrt(),
        below: frac(&|v| v <= lower),
        above: frac(&|v| v >= upper),
        middle,
        lower,
        upper,
        values,
    })
}

/// One step of the immortal particle for h(x) = x(1−x): the law
/// (1+γ*) y(1−y) Γ_v(dy) / (v(1−v)), sampled by proposing from Γ_v and
/// accepting with probability 4y(1−y).
pub fn immortal_chain_step<R: Rng + ?Sized>(v: f64, gamma: f64, rng: &mut R) -> f64 {
    debug_assert!(v > 0.0 && v < 1.0);
    loop {
        let y = sample_beta_law(gamma, v, rng);
        if rng.random::<f64>() < 4.0 * y * (1.0 - y) {
            return y;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImmortalChainState {
    pub v: f64,
    pub step: usize,
}

impl ImmortalChainState {
    pub fn new(v: f64) -> Result<Self> {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::Domain(format!("immortal particle must start inside (0,1), got {v}")));
        }
        Ok(ImmortalChainState { v, step: 0 })
    }

    pub fn advance<R: Rng + ?Sized>(&mut self, gamma: f64, rng: &mut R) {
        self.v = immortal_chain_step(self.v, gamma, rng);
        self.step += 1;
    }
}

/// Side offspring shed by the immortal particle in one step from v to v′:
/// the Pois(hZ) points on two independent path pieces of length Exp(γ/2)
/// run from v′ with attraction point v.
pub fn campbell_side_offspring<R: Rng + ?Sized>(
    v: f64,
    v_next: f64,
    ctx: &OffspringContext,
    rng: &mut R,
) -> Vec<f64> {
    let mut out = Vec::new();
    two_sided_points(v_next, v, ctx.gamma, ctx.density, &ctx.cfg, rng, &mut out);
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct CampbellTree {
    /// v_0 = x, …, v_n
    pub spine: Vec<f64>,
    /// δ_{v_n} plus every side family evolved to time n.
    pub population: ParticleConfiguration,
}

/// Size-biased population after n homogeneous steps of the h(x) = x(1−x)
/// system from one particle at x, built from an immortal particle.
pub fn simulate_campbell_tree<R: Rng + ?Sized>(
    n: usize,
    x: f64,
    ctx: &OffspringContext,
    rng: &mut R,
) -> Result<CampbellTree> {
    if ctx.density != Density::H00 {
        return param("the immortal-particle kernel is implemented for h00 only");
    }
    let mut chain = ImmortalChainState::new(x)?;
    let mut spine = vec![x];
    let mut positions = Vec::new();
    for k in 1..=n {
        let v = chain.v;
        chain.advance(ctx.gamma, rng);
        spine.push(chain.v);
        let side = campbell_side_offspring(v, chain.v, ctx, rng);
        if side.is_empty() {
            continue;
        }
        let contexts = vec![ctx; n - k];
        let run = run_embedded(&contexts, &side, rng)?;
        if run.outcome == EmbeddedOutcome::GrewPastCeiling {
            return Err(Error::Numerical("side family grew past the particle ceiling".into()));
        }
        positions.extend(run.population.positions);
    }
    positions.push(chain.v);
    Ok(CampbellTree { spine, population: ParticleConfiguration { positions } })
}

/// Mean offspring count at x with its standard error over `replicas` draws.
pub fn offspring_mean(ctx: &OffspringContext, x: f64, replicas: usize, seeder: &Seeder) -> Result<(f64, f64)> {
    let counts = replicate(replicas, |r| {
        let mut rng = seeder.replica(r as u64);
        ctx.sample_offspring(x, &mut rng).map(|k| k.len() as f64)
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    let mv: MeanVar = counts.into_iter().collect();
    Ok((mv.mean(), mv.se()))
}
