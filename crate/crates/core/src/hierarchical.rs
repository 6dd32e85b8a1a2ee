//! Hierarchically interacting catalytic Wright-Fisher diffusions on a
//! truncated hierarchical group Ω_N (N^K sites), with block averages, the
//! interaction chain and the recurrence criterion of the migration walk.
//!
//! ```text
//! dx_ξ = Σ_{k<K} c_k/N^k (x^{k+1}_ξ − x_ξ) dt + √2 σ(x_ξ) dB_ξ
//! ```
//!
//! where x^k_ξ is the average over the N^k sites η with ‖ξ−η‖ ≤ k.

use rand::Rng;

use crate::error::{param, Error, Result};
use crate::renorm::CatalyticDiffusionMatrix;
use crate::wf::normal;

/// Site of Ω_N truncated at level K; digit j (0-based) is the
/// coordinate ξ_{j+1}.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HierarchicalIndex {
    pub n: u32,
    pub digits: Vec<u32>,
}

impl HierarchicalIndex {
    pub fn new(n: u32, digits: Vec<u32>) -> Result<Self> {
        if n < 2 {
            return param("freedom N must be at least 2");
        }
        if digits.iter().any(|d| *d >= n) {
            return param(format!("digits must lie in 0..{n}"));
        }
        Ok(HierarchicalIndex { n, digits })
    }

    pub fn from_site(n: u32, levels: usize, mut site: usize) -> Self {
        let digits = (0..levels)
            .map(|_| {
                let d = (site % n as usize) as u32;
                site /= n as usize;
                d
            })
            .collect();
        HierarchicalIndex { n, digits }
    }

    pub fn site(&self) -> usize {
        self.digits.iter().rev().fold(0, |acc, d| acc * self.n as usize + *d as usize)
    }

    /// Componentwise addition mod N.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.n != other.n || self.digits.len() != other.digits.len() {
            return param("indices from different groups");
        }
        let digits = self.digits.iter().zip(&other.digits).map(|(a, b)| (a + b) % self.n).collect();
        Ok(HierarchicalIndex { n: self.n, digits })
    }

    pub fn neg(&self) -> Self {
        let digits = self.digits.iter().map(|d| (self.n - d) % self.n).collect();
        HierarchicalIndex { n: self.n, digits }
    }

    /// ‖ξ‖: the smallest n with ξ_j = 0 for all j > n.
    pub fn norm(&self) -> usize {
        self.digits.iter().rposition(|d| *d != 0).map_or(0, |j| j + 1)
    }

    pub fn distance(&self, other: &Self) -> Result<usize> {
        Ok(self.add(&other.neg())?.norm())
    }
}

/// Per-site states (x¹, x²) on N^K sites.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeState {
    pub n: u32,
    pub levels: usize,
    pub sites: Vec<[f64; 2]>,
}

impl LatticeState {
    pub fn constant(n: u32, levels: usize, theta: [f64; 2]) -> Result<Self> {
        if n < 2 {
            return param("freedom N must be at least 2");
        }
        if theta.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::Domain("state components must lie in [0,1]".into()));
        }
        let size = (n as usize).checked_pow(levels as u32).ok_or_else(|| Error::Parameter("lattice too large".into()))?;
        Ok(LatticeState { n, levels, sites: vec![theta; size] })
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn global_average(&self) -> [f64; 2] {
        let n = self.sites.len() as f64;
        let s = self.sites.iter().fold([0.0, 0.0], |a, x| [a[0] + x[0], a[1] + x[1]]);
        [s[0] / n, s[1] / n]
    }

    /// Mean over sites of the squared deviation from the site's k-block
    /// average, per component.
    pub fn within_block_variance(&self, k: usize) -> Result<[f64; 2]> {
        let avg = self.block_averages(k)?;
        let bs = (self.n as usize).pow(k as u32);
        let mut v = [0.0, 0.0];
        for (i, x) in self.sites.iter().enumerate() {
            let a = avg[i / bs];
            v[0] += (x[0] - a[0]).powi(2);
            v[1] += (x[1] - a[1]).powi(2);
        }
        let n = self.sites.len() as f64;
        Ok([v[0] / n, v[1] / n])
    }

    /// Averages of all k-blocks, indexed by site / N^k.
    pub fn block_averages(&self, k: usize) -> Result<Vec<[f64; 2]>> {
        if k > self.levels {
            return Err(Error::Parameter(format!("block level {k} above truncation {}", self.levels)));
        }
        let bs = (self.n as usize).pow(k as u32);
        Ok(self
            .sites
            .chunks(bs)
            .map(|c| {
                let s = c.iter().fold([0.0, 0.0], |a, x| [a[0] + x[0], a[1] + x[1]]);
                [s[0] / bs as f64, s[1] / bs as f64]
            })
            .collect())
    }
}

/// Average over the N^k sites η with ‖ξ − η‖ ≤ k.
pub fn block_average(state: &LatticeState, xi: usize, k: usize) -> Result<[f64; 2]> {
    if xi >= state.len() {
        return Err(Error::Parameter(format!("site {xi} outside the lattice")));
    }
    let bs = (state.n as usize).pow(k.min(state.levels) as u32);
    Ok(state.block_averages(k)?[xi / bs])
}

/// (x^n_0, …, x^0_0): block averages around the origin, outermost first.
pub fn interaction_chain_extract(state: &LatticeState, n: usize) -> Result<Vec<[f64; 2]>> {
    (0..=n).rev().map(|k| block_average(state, 0, k)).collect()
}

/// Migration rates on the truncated group.
#[derive(Clone, Debug, PartialEq)]
pub struct MigrationKernel {
    pub n: u32,
    pub c: Vec<f64>,
}

impl MigrationKernel {
    pub fn new(n: u32, c: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return param("freedom N must be at least 2");
        }
        if c.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return param("migration constants must be nonnegative");
        }
        Ok(MigrationKernel { n, c })
    }

    /// Jump rate a(η − ξ) = Σ_{k ≥ ‖η−ξ‖} c_{k−1}/N^{2k−1} for a jump at
    /// hierarchical distance `dist` ≥ 1, summed over the stored constants.
    pub fn rate(&self, dist: usize) -> f64 {
        let nf = self.n as f64;
        (dist.max(1)..=self.c.len()).map(|k| self.c[k - 1] / nf.powi(2 * k as i32 - 1)).sum()
    }

    /// d_k = Σ_n c_{k+n}/N^n over the stored constants.
    pub fn d(&self, k: usize) -> f64 {
        let nf = self.n as f64;
        self.c[k.min(self.c.len())..].iter().enumerate().map(|(j, c)| c / nf.powi(j as i32)).sum()
    }

    /// Σ_k c_k/N^k, the total drift rate toward block averages.
    pub fn total_rate(&self) -> f64 {
        self.d(0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub state: LatticeState,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HierarchicalConfig {
    pub n: u32,
    pub levels: usize,
    pub theta: [f64; 2],
    pub horizon: f64,
    pub dt: f64,
    /// Steps between recorded snapshots.
    pub record_every: usize,
}

impl Default for HierarchicalConfig {
    fn default() -> Self {
        HierarchicalConfig { n: 2, levels: 4, theta: [0.5, 0.5], horizon: 1.0, dt: 1e-3, record_every: 100 }
    }
}

/// Migration drift Σ_k c_k/N^k (block_{k+1} − x) at every site. The terms
/// sum to zero over the sites, since each block average is the mean of the
/// sites it covers.
pub fn migration_drift(state: &LatticeState, kernel: &MigrationKernel) -> Result<Vec<[f64; 2]>> {
    if kernel.n != state.n || kernel.c.len() > state.levels {
        return param("kernel does not match the lattice");
    }
    let nf = state.n as f64;
    let mut drift = vec![[0.0, 0.0]; state.sites.len()];
    for (k, ck) in kernel.c.iter().enumerate() {
        let wk = ck / nf.powi(k as i32);
        if wk == 0.0 {
            continue;
        }
        let blocks = state.block_averages(k + 1)?;
        let size = (state.n as usize).pow(k as u32 + 1);
        for (i, (d, x)) in drift.iter_mut().zip(&state.sites).enumerate() {
            let b = blocks[i / size];
            d[0] += wk * (b[0] - x[0]);
            d[1] += wk * (b[1] - x[1]);
        }
    }
    Ok(drift)
}

/// Euler scheme with clamping to [0,1]²; block averages are recomputed at
/// every step from the previous state. `c[k]` for k < K drives each site
/// toward its (k+1)-block average; levels past K carry no migration.
pub fn simulate_hierarchical<R: Rng + ?Sized>(
    w: &CatalyticDiffusionMatrix,
    c: &[f64],
    cfg: &HierarchicalConfig,
    rng: &mut R,
) -> Result<Vec<Snapshot>> {
    if cfg.theta.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
        return Err(Error::Domain("theta must lie in (0,1)^2".into()));
    }
    if c.len() < cfg.levels {
        return param(format!("need {} migration constants, got {}", cfg.levels, c.len()));
    }
    let kernel = MigrationKernel::new(cfg.n, c[..cfg.levels].to_vec())?;
    if !(cfg.dt > 0.0) || cfg.dt * kernel.total_rate() > 0.5 {
        return param(format!(
            "dt = {} is unstable for total migration rate {:.4}; need dt * rate <= 0.5",
            cfg.dt,
            kernel.total_rate()
        ));
    }
    let mut state = LatticeState::constant(cfg.n, cfg.levels, cfg.theta)?;
    let steps = (cfg.horizon / cfg.dt).ceil() as usize;
    let dt = if steps > 0 { cfg.horizon / steps as f64 } else { cfg.dt };
    let sq = (2.0 * dt).sqrt();
    let mut traj = vec![Snapshot { t: 0.0, state: state.clone() }];
    for step in 1..=steps {
        let drift = migration_drift(&state, &kernel)?;
        for (x, d) in state.sites.iter_mut().zip(&drift) {
            let (a11, _, a22) = w.at(*x);
            let y0 = x[0] + d[0] * dt + sq * a11.max(0.0).sqrt() * normal(rng);
            let y1 = x[1] + d[1] * dt + sq * a22.max(0.0).sqrt() * normal(rng);
            *x = [y0.clamp(0.0, 1.0), y1.clamp(0.0, 1.0)];
        }
        if step % cfg.record_every.max(1) == 0 || step == steps {
            traj.push(Snapshot { t: step as f64 * dt, state: state.clone() });
        }
    }
    Ok(traj)
}

/// Migration constants, either as an explicit list or c_k = r^k.
#[derive(Clone, Debug, PartialEq)]
pub enum MigrationSequence {
    Geometric(f64),
    Explicit(Vec<f64>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Recurrence {
    Recurrent,
    Transient,
    Undetermined,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecurrenceReport {
    pub verdict: Recurrence,
    /// Partial sums of Σ 1/d_k over the usable range.
    pub partial_sums: Vec<f64>,
    pub diagnostics: String,
}

/// Recurrence of the migration walk: Σ_k 1/d_k = ∞ with
/// d_k = Σ_n c_{k+n}/N^n. Geometric sequences use the closed form
/// d_k = r^k/(1 − r/N); explicit lists use d_k over the first half of the
/// list and a Raabe test on 1/d_k, which leaves 1/d_k ~ 1/k undetermined.
pub fn recurrence_test(seq: &MigrationSequence, n: u32, tol: f64) -> Result<RecurrenceReport> {
    if n < 2 {
        return param("freedom N must be at least 2");
    }
    let nf = n as f64;
    match seq {
        MigrationSequence::Geometric(r) => {
            if !(*r > 0.0) {
                return param("r must be positive");
            }
            if *r >= nf {
                return Err(Error::Domain(format!("Σ c_k/N^k diverges for r = {r} >= N = {n}")));
            }
            let terms = (0..50).map(|k| (1.0 - r / nf) / r.powi(k));
            let partial_sums = terms
                .scan(0.0, |s, t| {
                    *s += t;
                    Some(*s)
                })
                .collect();
            let verdict = if *r <= 1.0 { Recurrence::Recurrent } else { Recurrence::Transient };
            Ok(RecurrenceReport {
                verdict,
                partial_sums,
                diagnostics: format!("closed form: 1/d_k = (1 - r/N) r^-k with r = {r}"),
            })
        }
        MigrationSequence::Explicit(c) => {
            if c.len() < 16 {
                return param("need at least 16 migration constants");
            }
            let kernel = MigrationKernel::new(n, c.clone())?;
            // convergence of Σ c_k/N^k: the last terms must be negligible
            let last = c[c.len() - 1] / nf.powi(c.len() as i32 - 1);
            if !last.is_finite() || last > tol * kernel.total_rate().max(1e-300) {
                return Ok(RecurrenceReport {
                    verdict: Recurrence::Undetermined,
                    partial_sums: Vec::new(),
                    diagnostics: format!("Σ c_k/N^k not numerically convergent: last term {last:.3e}"),
                });
            }
            let usable = c.len() / 2;
            let inv: Vec<f64> = (0..usable).map(|k| 1.0 / kernel.d(k)).collect();
            let partial_sums: Vec<f64> = inv
                .iter()
                .scan(0.0, |s, t| {
                    *s += t;
                    Some(*s)
                })
                .collect();
            let tail = usable / 2;
            let ratio = (inv[usable - 1] / inv[tail]).powf(1.0 / (usable - 1 - tail) as f64);
            // Raabe: k (a_k/a_{k+1} − 1) → L; L > 1 converges, L < 1 diverges
            let k = (usable - 2) as f64;
            let raabe = k * (inv[usable - 2] / inv[usable - 1] - 1.0);
            let margin = tol.max(0.1);
            let verdict = if raabe > 1.0 + margin {
                Recurrence::Transient
            } else if raabe < 1.0 - margin {
                Recurrence::Recurrent
            } else {
                Recurrence::Undetermined
            };
            Ok(RecurrenceReport {
                verdict,
                diagnostics: format!(
                    "tail ratio {ratio:.6}, Raabe statistic {raabe:.4}, partial sum {:.4e} over {usable} terms",
                    partial_sums.last().copied().unwrap_or(0.0)
                ),
                partial_sums,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loglaplace::CatalyzingFunction;
    use crate::rng::Seeder;

    #[test]
    fn index_arithmetic() {
        let a = HierarchicalIndex::new(3, vec![1, 0, 2]).unwrap();
        assert_eq!(a.norm(), 3);
        assert_eq!(a.site(), 1 + 2 * 9);
        assert_eq!(HierarchicalIndex::from_site(3, 3, a.site()), a);
        let z = a.add(&a.neg()).unwrap();
        assert_eq!(z.norm(), 0);
        let b = HierarchicalIndex::new(3, vec![2, 0, 2]).unwrap();
        assert_eq!(a.distance(&b).unwrap(), 1);
        assert!(HierarchicalIndex::new(2, vec![2]).is_err());
    }

    #[test]
    fn blocks_have_n_to_the_k_sites() {
        let n = 3;
        for k in 0..=3 {
            let o = HierarchicalIndex::from_site(n, 3, 0);
            let count = (0..27).filter(|s| HierarchicalIndex::from_site(n, 3, *s).distance(&o).unwrap() <= k).count();
            assert_eq!(count, 3usize.pow(k as u32));
        }
    }

    #[test]
    fn block_average_cases() {
        let mut st = LatticeState::constant(2, 3, [0.5, 0.5]).unwrap();
        for (i, s) in st.sites.iter_mut().enumerate() {
            *s = [i as f64 / 8.0, 1.0 - i as f64 / 8.0];
        }
        assert_eq!(block_average(&st, 5, 0).unwrap(), st.sites[5]);
        assert_eq!(block_average(&st, 5, 1).unwrap(), [(4.0 + 5.0) / 16.0, 1.0 - 9.0 / 16.0]);
        let g = st.global_average();
        for xi in 0..8 {
            assert_eq!(block_average(&st, xi, 3).unwrap(), g);
        }
        assert!(block_average(&st, 0, 4).is_err());
        let chain = interaction_chain_extract(&st, 2).unwrap();
        assert_eq!(chain.len(), 3);
        assert_eq!(chain[2], st.sites[0]);
    }

    #[test]
    fn constant_state_averages() {
        let st = LatticeState::constant(2, 3, [0.3, 0.7]).unwrap();
        let close = |x: [f64; 2]| (x[0] - 0.3).abs() < 1e-15 && (x[1] - 0.7).abs() < 1e-15;
        for k in 0..=3 {
            assert!(close(block_average(&st, 6, k).unwrap()));
        }
        assert!(interaction_chain_extract(&st, 3).unwrap().into_iter().all(close));
    }

    #[test]
    fn rates_and_d() {
        let k = MigrationKernel::new(2, vec![1.0; 40]).unwrap();
        assert!((k.d(0) - 2.0).abs() < 1e-9);
        // a(1) = Σ_k 1/2^{2k-1} = 2/3
        assert!((k.rate(1) - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn closed_form_examples() {
        let r = |seq, n| recurrence_test(&seq, n, 1e-3).unwrap().verdict;
        assert_eq!(r(MigrationSequence::Geometric(1.0), 2), Recurrence::Recurrent);
        assert_eq!(r(MigrationSequence::Geometric(3.0), 4), Recurrence::Transient);
        assert!(recurrence_test(&MigrationSequence::Geometric(2.0), 2, 1e-3).is_err());
        assert_eq!(r(MigrationSequence::Explicit(vec![1.0; 200]), 2), Recurrence::Recurrent);
        let c: Vec<f64> = (0..200).map(|k| 3f64.powi(k)).collect();
        assert_eq!(r(MigrationSequence::Explicit(c), 4), Recurrence::Transient);
    }

    #[test]
    fn polynomial_borderlines() {
        let verdict = |c: Vec<f64>| recurrence_test(&MigrationSequence::Explicit(c), 2, 1e-3).unwrap().verdict;
        // d_k = 2k + 4: Σ 1/d_k diverges only logarithmically, Raabe limit 1
        assert_eq!(verdict((0..400).map(|k| (k + 1) as f64).collect()), Recurrence::Undetermined);
        // d_k ~ 2k², summable
        assert_eq!(verdict((0..400).map(|k| ((k + 1) * (k + 1)) as f64).collect()), Recurrence::Transient);
        // d_k ~ 2√k, divergent
        assert_eq!(verdict((0..400).map(|k| ((k + 1) as f64).sqrt()).collect()), Recurrence::Recurrent);
    }

    #[test]
    fn no_migration_noise_free_is_static() {
        let w = CatalyticDiffusionMatrix::new(1.0, CatalyzingFunction::constant(4, 0.0).unwrap()).unwrap();
        let w = CatalyticDiffusionMatrix { alpha: 1e-300, ..w };
        let cfg = HierarchicalConfig { horizon: 0.1, dt: 1e-2, record_every: 5, ..HierarchicalConfig::default() };
        let t = simulate_hierarchical(&w, &[0.0; 4], &cfg, &mut Seeder::new(1).to_rng()).unwrap();
        assert_eq!(t.len(), 3);
        assert!(t.iter().all(|s| s.state.sites.iter().all(|x| (x[0] - 0.5).abs() < 1e-100 && x[1] == 0.5)));
    }

    #[test]
    fn unstable_dt_rejected() {
        let w = CatalyticDiffusionMatrix::new(1.0, CatalyzingFunction::h11(4)).unwrap();
        let cfg = HierarchicalConfig { dt: 1.0, ..HierarchicalConfig::default() };
        assert!(simulate_hierarchical(&w, &[1.0; 4], &cfg, &mut Seeder::new(2).to_rng()).is_err());
    }
}
