//! Cross-checks of the embedded particle systems against brute-force
//! constructions from the measure-valued process.

use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use wfren_core::branching::{
    poissonize, run_embedded_h00, simulate_campbell_tree, step_poisson_cluster, AtomicMeasure, BranchingConfig,
    Density, OffspringContext,
};
use wfren_core::loglaplace::McConfig;
use wfren_core::rng::Seeder;
use wfren_core::stats::replicate;

fn histogram(counts: &[usize], bins: usize) -> Vec<f64> {
    let mut h = vec![0.0; bins];
    for &c in counts {
        h[c.min(bins - 1)] += 1.0;
    }
    h
}

/// p-value of the two-sample χ² homogeneity test; bins empty in both
/// samples are dropped.
fn two_sample_p(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    let mut stat = 0.0;
    let mut dof = -1.0;
    for (x, y) in a.iter().zip(b) {
        let tot = x + y;
        if tot == 0.0 {
            continue;
        }
        let ea = tot * na / (na + nb);
        let eb = tot * nb / (na + nb);
        stat += (x - ea).powi(2) / ea + (y - eb).powi(2) / eb;
        dof += 1.0;
    }
    1.0 - ChiSquared::new(dof).unwrap().cdf(stat)
}

fn h00_context(seed: u64) -> OffspringContext {
    OffspringContext::new(Density::H00, 1.0, 40, &McConfig::new(20_000, 1e-2), BranchingConfig::default(), &Seeder::new(seed))
        .unwrap()
}

fn poisson<R: Rng>(mean: f64, rng: &mut R) -> usize {
    let (l, mut k, mut p) = ((-mean).exp(), 0, 1.0);
    loop {
        p *= rng.random::<f64>();
        if p < l {
            return k;
        }
        k += 1;
    }
}

#[test]
fn one_step_particle_law_matches_poissonized_measure() {
    // Pois(hX_1) from X_0 = mass·δ_x, once through the measure-valued step and
    // once as Pois(h(x)·mass) particles each branching with the offspring law
    let (x, mass, runs) = (0.5, 4.0, 40_000);
    let ctx = h00_context(1);
    let cfg = BranchingConfig { bins: None, ..BranchingConfig::default() };
    let seeder = Seeder::new(2);
    let brute: Vec<usize> = replicate(runs, |r| {
        let mut rng = seeder.derive("brute", 0).replica(r as u64);
        let x1 = step_poisson_cluster(&AtomicMeasure::new(vec![(x, mass)]).unwrap(), 1.0, &cfg, &mut rng).unwrap();
        poissonize(&x1, |y| y * (1.0 - y), &mut rng).len()
    });
    let embedded: Vec<usize> = replicate(runs, |r| {
        let mut rng = seeder.derive("embedded", 0).replica(r as u64);
        let n0 = poisson(mass * x * (1.0 - x), &mut rng);
        (0..n0).map(|_| ctx.sample_offspring(x, &mut rng).unwrap().len()).sum()
    });
    let p = two_sample_p(&histogram(&brute, 6), &histogram(&embedded, 6));
    assert!(p > 1e-3, "p = {p}");
}

#[test]
fn campbell_population_is_size_biased() {
    // under the Campbell law P̂[N = k] = k P[N = k] / E N with E N = 1
    let (n, x, runs) = (2, 0.5, 40_000);
    let ctx = h00_context(3);
    let ctxs = vec![&ctx; n];
    let seeder = Seeder::new(4);
    let plain: Vec<usize> =
        replicate(runs, |r| run_embedded_h00(&ctxs, x, &mut seeder.derive("plain", 0).replica(r as u64)).unwrap().final_count());
    let campbell: Vec<usize> = replicate(runs, |r| {
        simulate_campbell_tree(n, x, &ctx, &mut seeder.derive("campbell", 0).replica(r as u64)).unwrap().population.len()
    });
    let mean = plain.iter().sum::<usize>() as f64 / runs as f64;
    assert!((mean - 1.0).abs() < 0.03, "mean {mean}");
    for k in 1..=4usize {
        let weights: Vec<f64> = plain.iter().map(|&c| if c == k { k as f64 / mean } else { 0.0 }).collect();
        let pk = weights.iter().sum::<f64>() / runs as f64;
        let var_p = weights.iter().map(|w| (w - pk).powi(2)).sum::<f64>() / (runs as f64 * (runs - 1) as f64);
        let qk = campbell.iter().filter(|&&c| c == k).count() as f64 / runs as f64;
        let var_q = qk * (1.0 - qk) / runs as f64;
        let z = (pk - qk).abs() / (var_p + var_q).sqrt();
        assert!(z < 4.0, "k={k}: size-biased {pk:.4} campbell {qk:.4} z={z:.2}");
    }
}
