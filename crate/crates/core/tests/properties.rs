//! Property tests for exact identities that hold for every input.

use proptest::prelude::*;
use wfren_core::branching::AtomicMeasure;
use wfren_core::hierarchical::{migration_drift, HierarchicalIndex, LatticeState, MigrationKernel};
use wfren_core::loglaplace::{iterate_on_constant, u_on_constant, CatalyzingFunction};
use wfren_core::pde::{run_flow_2d, FlowConfig, GridField2D};
use wfren_core::renorm::{schedule_from_ck, MigrationSchedule};
use wfren_core::wf::invariant_moment;

proptest! {
    #[test]
    fn invariant_moments_are_ordered_probabilities(gamma in 0.01f64..20.0, x in 0.0f64..=1.0, n in 1u32..8) {
        let m = invariant_moment(gamma, x, n);
        prop_assert!((0.0..=1.0).contains(&m));
        prop_assert!(invariant_moment(gamma, x, n + 1) <= m + 1e-15);
        let x2 = (x + 0.1).min(1.0);
        prop_assert!(invariant_moment(gamma, x2, n) >= m - 1e-15);
    }

    #[test]
    fn fixed_shape_identity(gamma in 0.01f64..20.0, x in 0.0f64..=1.0) {
        let lhs = invariant_moment(gamma, x, 1) - invariant_moment(gamma, x, 2);
        prop_assert!((lhs - x * (1.0 - x) / (1.0 + gamma)).abs() < 1e-14);
    }

    #[test]
    fn constants_have_fixed_point_one(gamma in 0.01f64..20.0, r in 0.0f64..10.0) {
        let u = u_on_constant(gamma, r);
        prop_assert!((u_on_constant(gamma, 1.0) - 1.0).abs() < 1e-14);
        // constant multiples: U(r·1) ≤ r·U(1) for r ≥ 1 and ≥ for r ≤ 1
        if r >= 1.0 { prop_assert!(u <= r + 1e-12 && u >= 1.0 - 1e-12); }
        else { prop_assert!(u >= r - 1e-12 && u <= 1.0 + 1e-12); }
    }

    #[test]
    fn iterated_constants_compose(gammas in prop::collection::vec(0.05f64..3.0, 1..10), lambda in 0.01f64..5.0) {
        let direct = gammas.iter().fold(lambda, |r, &g| u_on_constant(g, r));
        let closed = iterate_on_constant(&gammas, lambda);
        prop_assert!((direct - closed).abs() < 1e-10 * (1.0 + direct), "{direct} vs {closed}");
    }

    #[test]
    fn merging_conserves_mass_and_mean(
        atoms in prop::collection::vec((0.0f64..=1.0, 0.001f64..10.0), 1..200),
        bins in 1usize..50,
    ) {
        let mut atoms = atoms;
        atoms.push((0.0, 0.5));
        atoms.push((1.0, 0.25));
        let x = AtomicMeasure::new(atoms).unwrap();
        let y = x.merged(bins);
        prop_assert!((x.total_mass() - y.total_mass()).abs() < 1e-10 * x.total_mass());
        prop_assert!((x.integrate(|v| v) - y.integrate(|v| v)).abs() < 1e-10 * x.total_mass());
        prop_assert!((x.interior_mass() - y.interior_mass()).abs() < 1e-10 * x.total_mass());
        prop_assert!(y.atoms().len() <= bins + 2);
    }

    #[test]
    fn schedule_identities(c in prop::collection::vec(0.01f64..10.0, 1..30), beta in 0.01f64..10.0) {
        let s = schedule_from_ck(c.clone(), beta).unwrap();
        for k in 0..c.len() {
            prop_assert!((s.s[k + 1] - s.s[k] - 1.0 / c[k]).abs() < 1e-9 * s.s[k + 1]);
            prop_assert!((s.s_bar[k] - s.s[k] - beta).abs() < 1e-12 * s.s_bar[k]);
            prop_assert!((s.gamma[k] * s.s_bar[k] * c[k] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_gamma_schedule(gamma_star in 0.05f64..5.0, n in 1usize..40) {
        let s = MigrationSchedule::constant_gamma(gamma_star, n).unwrap();
        prop_assert!(s.gamma.iter().all(|g| (g - gamma_star).abs() < 1e-9 * gamma_star));
    }

    #[test]
    fn hierarchical_group_is_ultrametric(
        n in 2u32..5,
        a in prop::collection::vec(0u32..5, 6),
        b in prop::collection::vec(0u32..5, 6),
    ) {
        let a = HierarchicalIndex::new(n, a.into_iter().map(|d| d % n).collect()).unwrap();
        let b = HierarchicalIndex::new(n, b.into_iter().map(|d| d % n).collect()).unwrap();
        prop_assert_eq!(a.add(&a.neg()).unwrap().norm(), 0);
        prop_assert_eq!(a.distance(&b).unwrap(), b.distance(&a).unwrap());
        prop_assert!(a.add(&b).unwrap().norm() <= a.norm().max(b.norm()));
    }

    #[test]
    fn block_averages_nest_and_migration_conserves(
        values in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 16),
        c in prop::collection::vec(0.0f64..3.0, 4),
    ) {
        let state = LatticeState { n: 2, levels: 4, sites: values.into_iter().map(|(a, b)| [a, b]).collect() };
        let g = state.global_average();
        for k in 0..=4 {
            let blocks = state.block_averages(k).unwrap();
            let mean = blocks.iter().fold([0.0, 0.0], |s, b| [s[0] + b[0], s[1] + b[1]]);
            let len = blocks.len() as f64;
            prop_assert!((mean[0] / len - g[0]).abs() < 1e-12 && (mean[1] / len - g[1]).abs() < 1e-12);
        }
        let drift = migration_drift(&state, &MigrationKernel::new(2, c).unwrap()).unwrap();
        let total = drift.iter().fold([0.0, 0.0], |s, d| [s[0] + d[0], s[1] + d[1]]);
        prop_assert!(total[0].abs() < 1e-12 && total[1].abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn flow_keeps_effective_boundary_and_sign(e1 in -0.5f64..0.5, e2 in -0.5f64..0.5, steps in 1usize..200) {
        // a W^{0,0}-type start: w vanishes on both vertical edges
        let m = 8;
        let wf = |x: f64| x * (1.0 - x);
        let w0 = GridField2D::from_fn(m, |x1, x2| {
            [wf(x1) * (1.0 + e1 * x2), 0.0, wf(x1) * wf(x2) * (1.0 + e2 * x1)]
        }).unwrap();
        let cfg = FlowConfig { m, max_steps: steps, residual_tol: 1e-300, ..FlowConfig::default() };
        let r = run_flow_2d(&w0, &cfg).unwrap();
        for j in 0..=m {
            prop_assert_eq!(r.field.at(0, j), [0.0; 3]);
            prop_assert_eq!(r.field.at(m, j), [0.0; 3]);
        }
        prop_assert!(r.field.min_eigenvalue() >= -1e-12);
    }
}

#[test]
fn linear_grid_functions_interpolate_exactly() {
    let f = CatalyzingFunction::from_fn(7, |x| 0.3 + 0.6 * x).unwrap();
    for k in 0..=100 {
        let x = k as f64 / 100.0;
        assert!((f.eval(x) - (0.3 + 0.6 * x)).abs() < 1e-14);
    }
}
