//! Branch-and-cut optima against exhaustive search, and decoding of
//! integer points back into feasible edge sets.

use proptest::prelude::*;
use sstp_core::experiments::{generate_random_instance, integer_solve, RandomParams};
use sstp_core::formulations::{build, project_to_edge_sets, FormulationId, ObjectiveForm};
use sstp_core::instance::StochasticInstance;
use sstp_core::oracle::{brute_force, check_feasible, solution_cost, ExactSolution};

fn decoded(id: FormulationId, inst: &StochasticInstance, objective: ObjectiveForm) -> (f64, ExactSolution) {
    let spec = build(id, inst, objective).unwrap();
    let res = integer_solve(&spec, false).unwrap();
    assert!(res.point.is_optimal(), "{id}: {}", res.point.status);
    let (first_stage, scenarios) = project_to_edge_sets(&spec, &res.point.values);
    let objective = solution_cost(inst, &first_stage, &scenarios);
    (
        res.point.objective,
        ExactSolution {
            first_stage,
            scenarios,
            objective,
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_formulation_matches_exhaustive_search(
        seed in any::<u64>(),
        vertices in 3usize..6,
        scenarios in 1usize..4,
        rooted in any::<bool>(),
    ) {
        let params = RandomParams::new(vertices, 0.6, scenarios).rooted(rooted).max_edges(8);
        let inst = generate_random_instance(seed, &params);
        let exact = brute_force(&inst, rooted).unwrap();
        let ids: &[FormulationId] = if rooted { &FormulationId::ROOTED } else { &FormulationId::UNROOTED };
        for &id in ids {
            for form in [ObjectiveForm::Printed, ObjectiveForm::Rewritten] {
                let (value, sol) = decoded(id, &inst, form);
                prop_assert!((value - exact.objective_f64()).abs() < 1e-6, "{id}: {value} vs {}", exact.objective_f64());
                // The decoded edge sets are a solution of the same cost.
                prop_assert!(check_feasible(&inst, &sol, rooted), "{id}: decoded solution infeasible");
                prop_assert!((sol.objective_f64() - value).abs() < 1e-6, "{id}: decoded cost {}", sol.objective_f64());
            }
        }
    }
}

#[test]
fn bundled_instances_match_exhaustive_search() {
    let refs = sstp_core::experiments::reference_instances();
    for inst in [&refs.path, &refs.two_scenarios, &refs.triangle, &refs.triangle_swapped] {
        let exact = brute_force(inst, false).unwrap().objective_f64();
        for id in FormulationId::UNROOTED {
            assert!((decoded(id, inst, ObjectiveForm::Printed).0 - exact).abs() < 1e-6, "{id}");
        }
    }
    for inst in [&refs.path_rooted, &refs.gap_rooted] {
        let exact = brute_force(inst, true).unwrap().objective_f64();
        for id in FormulationId::ROOTED {
            assert!((decoded(id, inst, ObjectiveForm::Printed).0 - exact).abs() < 1e-6, "{id}");
        }
    }
}
