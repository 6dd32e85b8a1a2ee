//! Which library operations each subcommand calls. The coverage test keeps
//! this table honest against the list of public operations.
#![allow(dead_code)]

pub const DISPATCH: &[(&str, &[&str])] = &[
    (
        "invariant-law",
        &["sample_invariant", "invariant_moment", "simulate_wf_path", "couple_wf_pair", "dual_chain_psi_infinity"],
    ),
    (
        "loglaplace",
        &[
            "sample_cluster",
            "apply_u",
            "apply_u_dual_hm",
            "iterate_u",
            "chi_m",
            "large_gamma_bound",
            "check_shape_preservation",
        ],
    ),
    (
        "renorm-iterate",
        &[
            "schedule_from_ck",
            "rescaled_f",
            "f_c",
            "iterate_renorm",
            "estimate_nu_moments",
            "effective_boundary",
            "iterated_kernel_sample",
            "verify_fixed_point",
        ],
    ),
    ("pde-flow", &["run_flow_2d", "solve_p_star"]),
    ("solve-pstar", &["solve_p_star", "run_cauchy_1d"]),
    (
        "branching",
        &[
            "step_poisson_cluster",
            "run_renorm_branching",
            "poissonize",
            "run_embedded_h11",
            "run_embedded_h00",
            "run_embedded_h01",
            "weighted_mass_statistics",
        ],
    ),
    ("campbell", &["immortal_chain_step", "simulate_campbell_tree"]),
    (
        "hierarchical",
        &["simulate_hierarchical", "block_average", "recurrence_test", "interaction_chain_extract"],
    ),
    ("verify", &["run_suite"]),
];

/// Every operation of the library that a subcommand must reach.
pub const OPERATIONS: &[&str] = &[
    // wf
    "simulate_wf_path",
    "sample_invariant",
    "invariant_moment",
    "couple_wf_pair",
    "dual_chain_psi_infinity",
    // loglaplace
    "sample_cluster",
    "apply_u",
    "apply_u_dual_hm",
    "iterate_u",
    "chi_m",
    "large_gamma_bound",
    "check_shape_preservation",
    // renorm
    "schedule_from_ck",
    "rescaled_f",
    "f_c",
    "iterate_renorm",
    "estimate_nu_moments",
    "effective_boundary",
    "iterated_kernel_sample",
    // pde
    "run_flow_2d",
    "run_cauchy_1d",
    "solve_p_star",
    "verify_fixed_point",
    // branching
    "step_poisson_cluster",
    "run_renorm_branching",
    "poissonize",
    "run_embedded_h11",
    "run_embedded_h00",
    "run_embedded_h01",
    "weighted_mass_statistics",
    "immortal_chain_step",
    "simulate_campbell_tree",
    // hierarchical
    "simulate_hierarchical",
    "block_average",
    "recurrence_test",
    "interaction_chain_extract",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_operation_is_reachable() {
        let reached: Vec<&str> = DISPATCH.iter().flat_map(|(_, ops)| ops.iter().copied()).collect();
        let missing: Vec<&&str> = OPERATIONS.iter().filter(|op| !reached.contains(op)).collect();
        assert!(missing.is_empty(), "operations without a subcommand: {missing:?}");
    }

    #[test]
    fn table_covers_every_subcommand() {
        use clap::CommandFactory;
        let cli = crate::Cli::command();
        let names: Vec<&str> = cli.get_subcommands().map(|c| c.get_name()).collect();
        let listed: Vec<&str> = DISPATCH.iter().map(|(n, _)| *n).collect();
        assert_eq!(names, listed);
    }

    /// Each listed call appears in the source of its subcommand, so the
    /// table cannot drift from the code.
    #[test]
    fn listed_calls_appear_in_sources() {
        let sources: &[(&str, &str)] = &[
            ("invariant-law", include_str!("commands/invariant_law.rs")),
            ("loglaplace", include_str!("commands/loglaplace.rs")),
            ("renorm-iterate", include_str!("commands/renorm_iterate.rs")),
            ("pde-flow", include_str!("commands/pde_flow.rs")),
            ("solve-pstar", include_str!("commands/solve_pstar.rs")),
            ("branching", include_str!("commands/branching.rs")),
            ("campbell", include_str!("commands/campbell.rs")),
            ("hierarchical", include_str!("commands/hierarchical.rs")),
            ("verify", include_str!("commands/verify.rs")),
        ];
        // called inside the library rather than by name in the command
        let indirect = [("branching", "step_poisson_cluster")];
        for (cmd, ops) in DISPATCH {
            let src = sources.iter().find(|s| s.0 == *cmd).expect("source listed").1;
            for op in *ops {
                if indirect.contains(&(cmd, op)) {
                    continue;
                }
                assert!(src.contains(&format!("{op}(")), "{cmd} does not call {op}");
            }
        }
    }
}
