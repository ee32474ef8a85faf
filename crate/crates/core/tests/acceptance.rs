//! One PASS/FAIL line per acceptance criterion. Runs without the libtest
//! harness so the lines always reach the output.

use std::time::{Duration, Instant};

use sstp_core::experiments::{
    flow_balance_invalidity_demo, generate_random_instance, hierarchy_check, integer_solve, lp_relaxation,
    reference_instances, test_first_stage_integrality, CostRegime, RandomParams,
};
use sstp_core::formulations::{
    add_valid_inequalities, build, project_to_edge_sets, FlowBalanceScope, FormulationId, ModelSpec, ObjectiveForm,
};
use sstp_core::instance::StochasticInstance;
use sstp_core::oracle::brute_force;
use sstp_core::separation::{exhaustive_max_violation, run_separation_loop};

const TOL: f64 = 1e-6;

type Outcome = Result<String, String>;

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL
}

fn ip(id: FormulationId, inst: &StochasticInstance) -> f64 {
    let spec = build(id, inst, ObjectiveForm::Printed).unwrap();
    let res = integer_solve(&spec, false).unwrap();
    assert!(res.point.is_optimal(), "{id}: {}", res.point.status);
    res.point.objective
}

fn lp(spec: &ModelSpec) -> f64 {
    let res = lp_relaxation(spec).unwrap();
    assert!(res.point.is_optimal(), "{}: {}", spec.formulation, res.point.status);
    res.point.objective
}

fn lp_of(id: FormulationId, inst: &StochasticInstance) -> f64 {
    lp(&build(id, inst, ObjectiveForm::Printed).unwrap())
}

/// Small random instance family: 4 to 7 vertices, 1 to 3 scenarios.
fn suite_params(seed: u64, rooted: bool) -> RandomParams {
    RandomParams::new(4 + (seed % 4) as usize, 0.5, 1 + (seed % 3) as usize).rooted(rooted)
}

fn criterion_1() -> Outcome {
    let refs = reference_instances();
    let mut slowest = Duration::ZERO;
    for (ids, inst, target) in [
        (&FormulationId::UNROOTED[..], &refs.path, 3.0),
        (&FormulationId::ROOTED[..], &refs.path_rooted, 12.0),
    ] {
        for &id in ids {
            let start = Instant::now();
            let v = ip(id, inst);
            let took = start.elapsed();
            slowest = slowest.max(took);
            if !near(v, target) {
                return Err(format!("{id}: optimum {v}, expected {target}"));
            }
            if took >= Duration::from_secs(1) {
                return Err(format!("{id}: took {took:?}"));
            }
        }
    }
    Ok(format!("all ten formulations agree; slowest solve {slowest:?}"))
}

fn criterion_2() -> Outcome {
    let inst = reference_instances().two_scenarios;
    let spec = build(FormulationId::Sdc2, &inst, ObjectiveForm::Printed).unwrap();
    let res = integer_solve(&spec, false).unwrap();
    let (first, second) = project_to_edge_sets(&spec, &res.point.values);
    if near(res.point.objective, 12.0) && first == [0, 3] && second == [vec![1], vec![2]] {
        Ok("optimum 12, first stage {e1,e4}, additions e2 / e3".into())
    } else {
        Err(format!("objective {} first {first:?} second {second:?}", res.point.objective))
    }
}

fn criterion_3() -> Outcome {
    let inst = reference_instances().gap_rooted;
    let dc1 = test_first_stage_integrality(&inst, FormulationId::Dc1).unwrap();
    let dc2 = test_first_stage_integrality(&inst, FormulationId::Dc2).unwrap();
    let opt = ip(FormulationId::Dc2, &inst);
    let ratio = opt / dc1.relaxed_objective;
    if near(dc1.relaxed_objective, 4.5)
        && near(dc2.relaxed_objective, 5.0)
        && dc2.integral
        && near(opt, 5.0)
        && near(ratio, 10.0 / 9.0)
    {
        Ok(format!("dc1 4.5, dc2 5 (integral), optimum 5, ratio {ratio:.9}"))
    } else {
        Err(format!("dc1 {dc1:?} dc2 {dc2:?} optimum {opt}"))
    }
}

fn criterion_4() -> Outcome {
    let refs = reference_instances();
    let uc = lp_of(FormulationId::Uc, &refs.triangle);
    let uf = lp_of(FormulationId::Uf, &refs.triangle);
    let sdc1 = lp_of(FormulationId::Sdc1, &refs.triangle);
    let sw1 = lp_of(FormulationId::Sdc1, &refs.triangle_swapped);
    let sw2 = lp_of(FormulationId::Sdc2, &refs.triangle_swapped);
    let detail = format!("uc {uc} uf {uf} sdc1 {sdc1}; swapped sdc1 {sw1} sdc2 {sw2}");
    if near(uc, 1.5) && near(uf, 1.5) && near(sdc1, 2.0) && near(sw1, 1.5) && sw2 > 1.5 + TOL {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn hierarchy_suite(rooted: bool) -> Outcome {
    let start = Instant::now();
    let mut violations = Vec::new();
    for seed in 0..200 {
        let inst = generate_random_instance(seed, &suite_params(seed, rooted));
        for flag in hierarchy_check(&inst, 20, seed).map_err(|e| format!("seed {seed}: {e}"))? {
            violations.push(format!("seed {seed}: {flag}"));
        }
    }
    let took = start.elapsed();
    if !violations.is_empty() {
        return Err(format!("{} violations, first: {}", violations.len(), violations[0]));
    }
    if took >= Duration::from_secs(300) {
        return Err(format!("suite took {took:?}"));
    }
    Ok(format!("200 instances x 21 objectives, zero violations in {took:?}"))
}

fn criterion_7() -> Outcome {
    let mut lemma = 0;
    let mut theorem = 0;
    for seed in 0..100 {
        let params = suite_params(seed, false)
            .regime(CostRegime::FirstStageBelowExpected)
            .max_edges(10);
        let inst = generate_random_instance(seed, &params);
        let rep = test_first_stage_integrality(&inst, FormulationId::Sdc2).map_err(|e| e.to_string())?;
        lemma += rep.integral as usize;
        let rooted = generate_random_instance(seed, &params.rooted(true));
        let rep = test_first_stage_integrality(&rooted, FormulationId::Dc2).map_err(|e| e.to_string())?;
        theorem += rep.integral as usize;
    }
    let detail = format!("sdc2 {lemma}/100 integral, dc2 {theorem}/100 integral");
    if lemma == 100 && theorem == 100 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_8() -> Outcome {
    let mut solves = 0;
    for seed in 0..50 {
        let rooted = seed % 2 == 1;
        let params = RandomParams::new(4 + (seed % 2) as usize, 0.6, 1 + (seed % 3) as usize)
            .rooted(rooted)
            .max_edges(8);
        let inst = generate_random_instance(seed, &params);
        let exact = brute_force(&inst, rooted).map_err(|e| format!("seed {seed}: {e}"))?;
        let ids: &[FormulationId] = if rooted { &FormulationId::ROOTED } else { &FormulationId::UNROOTED };
        for &id in ids {
            let v = ip(id, &inst);
            solves += 1;
            if !near(v, exact.objective_f64()) {
                return Err(format!("seed {seed} {id}: {v} vs exact {}", exact.objective_f64()));
            }
        }
    }
    Ok(format!("{solves} branch-and-cut optima match exhaustive search"))
}

fn criterion_9() -> Outcome {
    let refs = reference_instances();
    let mut checked = 0;
    for inst in [
        &refs.path,
        &refs.path_rooted,
        &refs.two_scenarios,
        &refs.gap_rooted,
        &refs.triangle,
        &refs.triangle_swapped,
    ] {
        let ids: &[FormulationId] = if inst.is_rooted() { &FormulationId::ROOTED } else { &FormulationId::UNROOTED };
        for &id in ids.iter().filter(|id| !matches!(id, FormulationId::Uc | FormulationId::Uf)) {
            let base = build(id, inst, ObjectiveForm::Printed).unwrap();
            let strong = add_valid_inequalities(&base, inst).unwrap();
            let (ip0, ip1) = (
                integer_solve(&base, false).unwrap().point.objective,
                integer_solve(&strong, false).unwrap().point.objective,
            );
            let (lp0, lp1) = (lp(&base), lp(&strong));
            if !near(ip0, ip1) || lp1 < lp0 - TOL {
                return Err(format!("{id}: IP {ip0} -> {ip1}, LP {lp0} -> {lp1}"));
            }
            checked += 1;
        }
    }
    let demo = flow_balance_invalidity_demo(&refs.path_rooted, FlowBalanceScope::FirstStage).unwrap();
    if demo.with <= demo.without + TOL {
        return Err(format!("flow balance did not change the optimum: {demo:?}"));
    }
    Ok(format!(
        "{checked} formulation/instance pairs unchanged; flow balance (not valid) moves 12 to {}",
        demo.with
    ))
}

fn criterion_10() -> Outcome {
    let cut_ids = [
        FormulationId::Uc,
        FormulationId::Sdc1,
        FormulationId::Sdc2,
        FormulationId::Dc1,
        FormulationId::Dc2,
    ];
    let mut checked = 0;
    for seed in 0..50 {
        let inst = generate_random_instance(seed, &suite_params(seed, true));
        for id in cut_ids {
            let target = if id.is_rooted() { inst.clone() } else { inst.unrooted() };
            let spec = build(id, &target, ObjectiveForm::Printed).unwrap();
            let out = run_separation_loop(&spec).unwrap();
            let worst = exhaustive_max_violation(&spec, &out.point.values);
            if worst > TOL {
                return Err(format!("seed {seed} {id}: violation {worst}"));
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} separated LP points have no violated cut"))
}

fn main() -> std::process::ExitCode {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("path optima 3 and 12 under every formulation", criterion_1),
        ("two-scenario optimum 12 and its edge sets", criterion_2),
        ("gap instance bounds 4.5 and 5, ratio 10/9", criterion_3),
        ("triangle LP bounds", criterion_4),
        ("unrooted hierarchy on 200 random instances", || hierarchy_suite(false)),
        ("rooted equivalence on 200 random instances", || hierarchy_suite(true)),
        ("first-stage integrality suites", criterion_7),
        ("branch-and-cut matches exhaustive search", criterion_8),
        ("valid inequalities are neutral", criterion_9),
        ("separation is exact", criterion_10),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let took = start.elapsed();
        match &result {
            Ok(detail) => println!("PASS {} {name}: {detail} [{took:.1?}]", i + 1),
            Err(detail) => {
                println!("FAIL {} {name}: {detail} [{took:.1?}]", i + 1);
                failed.push(i + 1);
            }
        }
    }
    if failed.is_empty() {
        std::process::ExitCode::SUCCESS
    } else {
        eprintln!("failed criteria: {failed:?}");
        std::process::ExitCode::FAILURE
    }
}
