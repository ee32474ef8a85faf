//! Strength comparisons across formulations, first-stage integrality checks,
//! a seeded instance generator and the claim suite over the bundled
//! reference instances.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::formulations::{
    add_valid_inequalities, build, flow_balance_models, project_to_edge_sets, CutFamily, FlowBalanceScope,
    FormulationError, FormulationId, ModelSpec, ObjectiveForm, StageCosts,
};
use crate::instance::{check_cost_assumptions, rational, ratio, Graph, Rational, Scenario, StochasticInstance};
use crate::io::{clean, parse_instance};
use crate::lp::{run_cut_loop, solve_mip, LpError, LpPoint, MipOptions, Solver, Status, INT_TOL};
use crate::separation::{run_separation_loop, Separator, ROUND_LIMIT};

/// Tolerance of every comparison between bounds.
pub const HIERARCHY_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Formulation(#[from] FormulationError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("formulation {0} does not apply to {1} instances")]
    Inapplicable(FormulationId, &'static str),
    #[error("{0}")]
    Precondition(String),
    #[error("{formulation}: solver stopped with status {status}")]
    NotOptimal { formulation: FormulationId, status: Status },
}

/// What a single solve of a built model produced.
#[derive(Debug, Clone)]
pub struct SolveSummary {
    pub point: LpPoint,
    pub cuts: BTreeMap<CutFamily, usize>,
    pub rounds: usize,
    pub nodes: usize,
    pub elapsed: Duration,
}

impl SolveSummary {
    fn require_optimal(self, formulation: FormulationId) -> Result<Self, ExperimentError> {
        if self.point.is_optimal() {
            Ok(self)
        } else {
            Err(ExperimentError::NotOptimal {
                formulation,
                status: self.point.status,
            })
        }
    }

    pub fn total_cuts(&self) -> usize {
        self.cuts.values().sum()
    }
}

/// LP relaxation with every registered cut family separated to exhaustion.
pub fn lp_relaxation(spec: &ModelSpec) -> Result<SolveSummary, LpError> {
    let start = Instant::now();
    let out = run_separation_loop(spec)?;
    Ok(SolveSummary {
        point: out.point,
        cuts: out.cuts,
        rounds: out.rounds,
        nodes: 0,
        elapsed: start.elapsed(),
    })
}

/// Branch-and-cut optimum. With `relax_first_stage` only second-stage
/// columns are integer.
pub fn integer_solve(spec: &ModelSpec, relax_first_stage: bool) -> Result<SolveSummary, LpError> {
    let start = Instant::now();
    let mask = if relax_first_stage {
        spec.second_stage_integer_mask()
    } else {
        spec.model.integer_mask()
    };
    let mut sep = Separator::new(spec);
    let res = solve_mip(&spec.model, &mask, Some(&mut sep), &MipOptions::default())?;
    Ok(SolveSummary {
        point: res.point,
        cuts: sep.counts().clone(),
        rounds: res.rounds,
        nodes: res.nodes,
        elapsed: start.elapsed(),
    })
}

fn check_applicable(id: FormulationId, instance: &StochasticInstance) -> Result<(), ExperimentError> {
    match (id.is_rooted(), instance.is_rooted()) {
        (true, false) => Err(ExperimentError::Inapplicable(id, "unrooted")),
        (false, true) => Err(ExperimentError::Inapplicable(id, "rooted")),
        _ => Ok(()),
    }
}

/// Formulations that apply to the instance's kind.
pub fn applicable_formulations(instance: &StochasticInstance) -> Vec<FormulationId> {
    if instance.is_rooted() {
        FormulationId::ROOTED.to_vec()
    } else {
        FormulationId::UNROOTED.to_vec()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Relation {
    Equal,
    AtMost,
}

/// Bound relations between formulations that must hold on every instance.
const HIERARCHY: [(FormulationId, Relation, FormulationId); 8] = [
    (FormulationId::Uc, Relation::Equal, FormulationId::Uf),
    (FormulationId::Uc, Relation::AtMost, FormulationId::Sdc1),
    (FormulationId::Sdc1, Relation::AtMost, FormulationId::Sdc2),
    (FormulationId::Sdc2, Relation::Equal, FormulationId::Sdf),
    (FormulationId::Sdc2, Relation::Equal, FormulationId::Sdc2Star),
    (FormulationId::Dc1, Relation::Equal, FormulationId::Dc2),
    (FormulationId::Dc2, Relation::Equal, FormulationId::Dc2Star),
    (FormulationId::Dc2, Relation::Equal, FormulationId::Df),
];

/// An observed violation of an expected relation between two values.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyFlag {
    /// Human-readable relation, e.g. `LP(uc) <= LP(sdc1)`.
    pub claim: String,
    pub left: f64,
    pub right: f64,
    /// 0 for the instance's own costs, `i` for the `i`-th perturbation.
    pub objective: usize,
}

impl fmt::Display for HierarchyFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} violated: {} vs {} (objective {})",
            self.claim,
            clean(self.left),
            clean(self.right),
            self.objective
        )
    }
}

/// Checks the hierarchy relations among the bounds present in `bounds`.
pub fn hierarchy_flags(bounds: &BTreeMap<FormulationId, f64>, objective: usize) -> Vec<HierarchyFlag> {
    HIERARCHY
        .iter()
        .filter_map(|&(a, rel, b)| {
            let (&left, &right) = (bounds.get(&a)?, bounds.get(&b)?);
            let (ok, op) = match rel {
                Relation::Equal => ((left - right).abs() <= HIERARCHY_TOL, "="),
                Relation::AtMost => (left <= right + HIERARCHY_TOL, "<="),
            };
            (!ok).then(|| HierarchyFlag {
                claim: format!("LP({a}) {op} LP({b})"),
                left,
                right,
                objective,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct FormulationResult {
    pub formulation: FormulationId,
    pub lp_bound: f64,
    pub ip_value: f64,
    pub cuts: usize,
    pub rounds: usize,
    pub elapsed: Duration,
}

/// LP bounds and integer optima of several formulations on one instance.
#[derive(Debug, Clone)]
pub struct ComparisonTable {
    pub rows: Vec<FormulationResult>,
    pub flags: Vec<HierarchyFlag>,
}

fn fmt_value(x: f64) -> String {
    let x = clean(x);
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x:.9}").trim_end_matches('0').to_string()
    }
}

impl ComparisonTable {
    pub fn has_violation(&self) -> bool {
        !self.flags.is_empty()
    }

    /// Tab-separated table; flags follow as `flag` lines.
    pub fn to_tsv(&self, timing: bool) -> String {
        let mut out = String::from("formulation\tlp_bound\tip_value\tcuts\trounds");
        if timing {
            out.push_str("\ttime_ms");
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}",
                r.formulation,
                fmt_value(r.lp_bound),
                fmt_value(r.ip_value),
                r.cuts,
                r.rounds
            ));
            if timing {
                out.push_str(&format!("\t{:.3}", r.elapsed.as_secs_f64() * 1e3));
            }
            out.push('\n');
        }
        for flag in &self.flags {
            out.push_str(&format!("flag\t{flag}\n"));
        }
        out
    }

    pub fn to_json(&self, timing: bool) -> String {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                let mut row = Map::new();
                row.insert("formulation".into(), json!(r.formulation.as_str()));
                row.insert("lp_bound".into(), json!(clean(r.lp_bound)));
                row.insert("ip_value".into(), json!(clean(r.ip_value)));
                row.insert("cuts".into(), json!(r.cuts));
                row.insert("rounds".into(), json!(r.rounds));
                if timing {
                    row.insert("time_ms".into(), json!(r.elapsed.as_secs_f64() * 1e3));
                }
                Value::Object(row)
            })
            .collect();
        let flags: Vec<Value> = self
            .flags
            .iter()
            .map(|f| {
                json!({
                    "claim": f.claim,
                    "left": clean(f.left),
                    "right": clean(f.right),
                    "objective": f.objective,
                })
            })
            .collect();
        let doc = json!({ "rows": rows, "flags": flags, "violation": self.has_violation() });
        let mut text = serde_json::to_string_pretty(&doc).expect("JSON values are finite");
        text.push('\n');
        text
    }
}

/// LP bound and integer optimum per formulation, flagging hierarchy
/// violations, disagreeing optima and bounds above the optimum.
pub fn compare(
    instance: &StochasticInstance,
    formulations: &[FormulationId],
    objective: ObjectiveForm,
) -> Result<ComparisonTable, ExperimentError> {
    let mut rows = Vec::new();
    for &id in formulations {
        check_applicable(id, instance)?;
        let spec = build(id, instance, objective)?;
        let lp = lp_relaxation(&spec)?.require_optimal(id)?;
        let ip = integer_solve(&spec, false)?.require_optimal(id)?;
        rows.push(FormulationResult {
            formulation: id,
            lp_bound: lp.point.objective,
            ip_value: ip.point.objective,
            cuts: lp.total_cuts() + ip.total_cuts(),
            rounds: lp.rounds + ip.rounds,
            elapsed: lp.elapsed + ip.elapsed,
        });
    }
    let bounds: BTreeMap<FormulationId, f64> = rows.iter().map(|r| (r.formulation, r.lp_bound)).collect();
    let mut flags = hierarchy_flags(&bounds, 0);
    if let Some(first) = rows.first() {
        for r in &rows[1..] {
            if (r.ip_value - first.ip_value).abs() > HIERARCHY_TOL {
                flags.push(HierarchyFlag {
                    claim: format!("IP({}) = IP({})", first.formulation, r.formulation),
                    left: first.ip_value,
                    right: r.ip_value,
                    objective: 0,
                });
            }
        }
    }
    for r in &rows {
        if r.lp_bound > r.ip_value + HIERARCHY_TOL {
            flags.push(HierarchyFlag {
                claim: format!("LP({0}) <= IP({0})", r.formulation),
                left: r.lp_bound,
                right: r.ip_value,
                objective: 0,
            });
        }
    }
    Ok(ComparisonTable { rows, flags })
}

/// Stage costs with independent integer noise in `[0, 10]` added to every
/// first- and second-stage cost.
pub fn perturbed_costs(base: &StageCosts, rng: &mut impl Rng) -> StageCosts {
    let mut noisy = |costs: &[f64]| -> Vec<f64> { costs.iter().map(|c| c + rng.gen_range(0..=10) as f64).collect() };
    let first = noisy(&base.first);
    let scenarios = base.scenarios.iter().map(|c| noisy(c)).collect();
    StageCosts {
        first,
        scenarios,
        probabilities: base.probabilities.clone(),
    }
}

/// LP bounds of every formulation under the instance's own costs and
/// `perturbations` random nonnegative perturbations of them.
/// `bounds[i][id]` is the bound under objective `i`.
pub fn bounds_under_perturbations(
    instance: &StochasticInstance,
    formulations: &[FormulationId],
    perturbations: usize,
    seed: u64,
) -> Result<Vec<BTreeMap<FormulationId, f64>>, ExperimentError> {
    let specs = formulations
        .iter()
        .map(|&id| {
            check_applicable(id, instance)?;
            Ok(build(id, instance, ObjectiveForm::Printed)?)
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    let mut solvers = specs
        .iter()
        .map(|s| Solver::new(&s.model))
        .collect::<Result<Vec<_>, _>>()?;
    let mut separators: Vec<Separator> = specs.iter().map(Separator::new).collect();
    let base = StageCosts::of(instance);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(perturbations + 1);
    for i in 0..=perturbations {
        let costs = if i == 0 { base.clone() } else { perturbed_costs(&base, &mut rng) };
        let mut bounds = BTreeMap::new();
        for ((spec, solver), sep) in specs.iter().zip(&mut solvers).zip(&mut separators) {
            solver.set_objective(&spec.objective_for(&costs));
            let res = run_cut_loop(solver, sep, ROUND_LIMIT);
            if !res.point.is_optimal() {
                return Err(ExperimentError::NotOptimal {
                    formulation: spec.formulation,
                    status: res.point.status,
                });
            }
            bounds.insert(spec.formulation, res.point.objective);
        }
        out.push(bounds);
    }
    Ok(out)
}

/// Hierarchy flags over the instance's own costs plus `perturbations`
/// perturbed objectives; empty when every relation holds.
pub fn hierarchy_check(
    instance: &StochasticInstance,
    perturbations: usize,
    seed: u64,
) -> Result<Vec<HierarchyFlag>, ExperimentError> {
    let formulations = applicable_formulations(instance);
    let all = bounds_under_perturbations(instance, &formulations, perturbations, seed)?;
    Ok(all
        .iter()
        .enumerate()
        .flat_map(|(i, b)| hierarchy_flags(b, i))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegralityReport {
    pub formulation: FormulationId,
    pub relaxed_objective: f64,
    /// Whether every first-stage value lies within 1e-6 of 0 or 1.
    pub integral: bool,
    pub first_stage_values: Vec<f64>,
}

/// Solves with integer second stage and first stage relaxed to `[0, 1]`.
/// dc2 and dc2star require `c^0_e < c*_e` on every edge.
pub fn test_first_stage_integrality(
    instance: &StochasticInstance,
    formulation: FormulationId,
) -> Result<IntegralityReport, ExperimentError> {
    check_applicable(formulation, instance)?;
    if matches!(formulation, FormulationId::Dc2 | FormulationId::Dc2Star) {
        let bad: Vec<String> = check_cost_assumptions(instance)
            .iter()
            .filter(|r| !r.below_expected)
            .map(|r| format!("e{}", r.edge + 1))
            .collect();
        if !bad.is_empty() {
            return Err(ExperimentError::Precondition(format!(
                "first-stage integrality of {formulation} needs c0 < c* on every edge; violated on {}",
                bad.join(", ")
            )));
        }
    }
    let spec = build(formulation, instance, ObjectiveForm::Printed)?;
    let res = integer_solve(&spec, true)?.require_optimal(formulation)?;
    let first_stage_values: Vec<f64> = spec
        .catalog
        .first_stage()
        .iter()
        .map(|&j| res.point.values[j])
        .collect();
    let integral = first_stage_values
        .iter()
        .all(|v| v.abs() <= INT_TOL || (v - 1.0).abs() <= INT_TOL);
    Ok(IntegralityReport {
        formulation,
        relaxed_objective: res.point.objective,
        integral,
        first_stage_values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowBalanceDemo {
    pub without: f64,
    /// `+inf` when the added rows make the model infeasible.
    pub with: f64,
}

/// Integer optimum with and without flow-balance rows on non-terminals.
pub fn flow_balance_invalidity_demo(
    instance: &StochasticInstance,
    scope: FlowBalanceScope,
) -> Result<FlowBalanceDemo, ExperimentError> {
    let (base, with) = flow_balance_models(instance, scope);
    let solve = |spec: &ModelSpec| -> Result<f64, ExperimentError> {
        let res = integer_solve(spec, false)?;
        match res.point.status {
            Status::Optimal => Ok(res.point.objective),
            Status::Infeasible => Ok(f64::INFINITY),
            status => Err(ExperimentError::NotOptimal {
                formulation: spec.formulation,
                status,
            }),
        }
    };
    Ok(FlowBalanceDemo {
        without: solve(&base)?,
        with: solve(&with)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostRegime {
    Unconstrained,
    /// `c^0_e < c*_e` on every edge.
    FirstStageBelowExpected,
}

impl FromStr for CostRegime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unconstrained" => Ok(CostRegime::Unconstrained),
            "below-expected" => Ok(CostRegime::FirstStageBelowExpected),
            _ => Err(format!("unknown cost regime '{s}' (expected unconstrained or below-expected)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomParams {
    pub vertices: usize,
    pub edge_prob: f64,
    pub scenarios: usize,
    pub regime: CostRegime,
    pub rooted: bool,
    /// Graphs with more edges are rejected and redrawn.
    pub max_edges: Option<usize>,
}

impl RandomParams {
    pub fn new(vertices: usize, edge_prob: f64, scenarios: usize) -> Self {
        Self {
            vertices,
            edge_prob,
            scenarios,
            regime: CostRegime::Unconstrained,
            rooted: false,
            max_edges: None,
        }
    }

    pub fn regime(mut self, regime: CostRegime) -> Self {
        self.regime = regime;
        self
    }

    pub fn rooted(mut self, rooted: bool) -> Self {
        self.rooted = rooted;
        self
    }

    pub fn max_edges(mut self, max_edges: usize) -> Self {
        self.max_edges = Some(max_edges);
        self
    }
}

fn is_connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut adj = vec![Vec::new(); n];
    for &(i, j) in edges {
        adj[i].push(j);
        adj[j].push(i);
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen.iter().all(|&s| s)
}

/// Reproducible random instance: a connected `G(n, p)` graph drawn by
/// rejection, integer costs in `[1, 20]`, probabilities proportional to
/// integer weights in `[1, 10]` and terminal sets of at least two vertices
/// per scenario. Rooted instances add the root to every terminal set.
pub fn generate_random_instance(seed: u64, params: &RandomParams) -> StochasticInstance {
    let n = params.vertices;
    assert!(n >= 2, "need at least two vertices");
    assert!(params.scenarios >= 1, "need at least one scenario");
    assert!(params.edge_prob > 0.0 && params.edge_prob <= 1.0, "edge probability must lie in (0, 1]");
    if let Some(cap) = params.max_edges {
        assert!(cap >= n - 1, "edge cap below spanning tree size");
        assert!(params.edge_prob < 1.0 || cap >= n * (n - 1) / 2, "edge cap excludes the complete graph");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges = loop {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.gen_bool(params.edge_prob) {
                    edges.push((i, j));
                }
            }
        }
        if params.max_edges.is_none_or(|cap| edges.len() <= cap) && is_connected(n, &edges) {
            break edges;
        }
    };
    let m = edges.len();
    let root = params.rooted.then(|| rng.gen_range(0..n));
    let mut first: Vec<Rational> = (0..m).map(|_| rational(rng.gen_range(1..=20))).collect();
    let weights: Vec<i64> = (0..params.scenarios).map(|_| rng.gen_range(1..=10)).collect();
    let total: i64 = weights.iter().sum();
    let mut scenarios: Vec<Scenario> = weights
        .iter()
        .map(|&w| {
            let costs: Vec<Rational> = (0..m).map(|_| rational(rng.gen_range(1..=20))).collect();
            let mut terminals: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.5)).collect();
            terminals.extend(root);
            while {
                terminals.sort_unstable();
                terminals.dedup();
                terminals.len() < 2
            } {
                terminals.push(rng.gen_range(0..n));
            }
            Scenario::new(ratio(w, total), costs, terminals)
        })
        .collect();
    if params.regime == CostRegime::FirstStageBelowExpected {
        for e in 0..m {
            let mut expected: Rational = scenarios
                .iter()
                .fold(Rational::zero(), |acc, sc| acc + &sc.probability * &sc.edge_costs[e]);
            if expected <= Rational::one() {
                for sc in &mut scenarios {
                    sc.edge_costs[e] += Rational::one();
                }
                expected += Rational::one();
            }
            if first[e] >= expected {
                first[e] = expected.ceil() - Rational::one();
            }
        }
    }
    StochasticInstance {
        graph: Graph::new(n, edges),
        first_stage_costs: first,
        scenarios,
        global_root: root,
    }
}

/// Bundled reference instances as `(file name, contents)`.
pub const REFERENCE_SOURCES: [(&str, &str); 6] = [
    ("path.sstp", include_str!("../fixtures/path.sstp")),
    ("path.rsstp", include_str!("../fixtures/path.rsstp")),
    ("two_scenarios.sstp", include_str!("../fixtures/two_scenarios.sstp")),
    ("gap.rsstp", include_str!("../fixtures/gap.rsstp")),
    ("triangle.sstp", include_str!("../fixtures/triangle.sstp")),
    ("triangle_swapped.sstp", include_str!("../fixtures/triangle_swapped.sstp")),
];

#[derive(Debug, Clone)]
pub struct ReferenceInstances {
    /// Path `1-2-3-4` where buying both ends early and the middle late
    /// costs 3, but a rooted first-stage tree forces cost 12.
    pub path: StochasticInstance,
    pub path_rooted: StochasticInstance,
    /// Two scenarios whose optimum fixes no orientation in the first stage.
    pub two_scenarios: StochasticInstance,
    /// Rooted instance where dc1 with relaxed first stage leaves a gap.
    pub gap_rooted: StochasticInstance,
    /// Triangle separating LP(uc) from LP(sdc1).
    pub triangle: StochasticInstance,
    /// Triangle with stage costs swapped, separating LP(sdc1) from LP(sdc2).
    pub triangle_swapped: StochasticInstance,
}

pub fn reference_instances() -> ReferenceInstances {
    let get = |i: usize| {
        let (name, text) = REFERENCE_SOURCES[i];
        parse_instance(text).unwrap_or_else(|e| panic!("bundled instance {name}: {e}"))
    };
    ReferenceInstances {
        path: get(0),
        path_rooted: get(1),
        two_scenarios: get(2),
        gap_rooted: get(3),
        triangle: get(4),
        triangle_swapped: get(5),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClaimResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= HIERARCHY_TOL
}

fn ip_value(id: FormulationId, instance: &StochasticInstance) -> Result<f64, ExperimentError> {
    let spec = build(id, instance, ObjectiveForm::Printed)?;
    Ok(integer_solve(&spec, false)?.require_optimal(id)?.point.objective)
}

fn lp_value(id: FormulationId, instance: &StochasticInstance) -> Result<f64, ExperimentError> {
    let spec = build(id, instance, ObjectiveForm::Printed)?;
    Ok(lp_relaxation(&spec)?.require_optimal(id)?.point.objective)
}

fn all_optima(ids: &[FormulationId], instance: &StochasticInstance, target: f64) -> Result<(bool, String), ExperimentError> {
    let mut ok = true;
    let mut parts = Vec::new();
    for &id in ids {
        let v = ip_value(id, instance)?;
        ok &= near(v, target);
        parts.push(format!("{id}={}", fmt_value(v)));
    }
    Ok((ok, parts.join(" ")))
}

fn claim_two_scenarios(inst: &StochasticInstance) -> Result<(bool, String), ExperimentError> {
    let spec = build(FormulationId::Sdc2, inst, ObjectiveForm::Printed)?;
    let res = integer_solve(&spec, false)?.require_optimal(FormulationId::Sdc2)?;
    let (first, scenarios) = project_to_edge_sets(&spec, &res.point.values);
    let ok = near(res.point.objective, 12.0) && first == [0, 3] && scenarios == [vec![1], vec![2]];
    let names = |s: &[usize]| s.iter().map(|e| format!("e{}", e + 1)).collect::<Vec<_>>().join(",");
    Ok((
        ok,
        format!(
            "objective={} first={{{}}} second={{{}}}/{{{}}}",
            fmt_value(res.point.objective),
            names(&first),
            names(&scenarios[0]),
            names(&scenarios[1])
        ),
    ))
}

fn claim_gap_relaxed(inst: &StochasticInstance) -> Result<(bool, String), ExperimentError> {
    let dc1 = test_first_stage_integrality(inst, FormulationId::Dc1)?;
    let dc2 = test_first_stage_integrality(inst, FormulationId::Dc2)?;
    let ok = near(dc1.relaxed_objective, 4.5) && !dc1.integral && near(dc2.relaxed_objective, 5.0) && dc2.integral;
    Ok((
        ok,
        format!(
            "dc1={} integral={} dc2={} integral={}",
            fmt_value(dc1.relaxed_objective),
            dc1.integral,
            fmt_value(dc2.relaxed_objective),
            dc2.integral
        ),
    ))
}

fn claim_gap_ratio(inst: &StochasticInstance) -> Result<(bool, String), ExperimentError> {
    let ip = ip_value(FormulationId::Dc2, inst)?;
    let relaxed = test_first_stage_integrality(inst, FormulationId::Dc1)?.relaxed_objective;
    let ratio = ip / relaxed;
    let ok = near(ip, 5.0) && near(ratio, 10.0 / 9.0);
    Ok((ok, format!("optimum={} ratio={ratio:.9}", fmt_value(ip))))
}

fn claim_triangle(inst: &StochasticInstance) -> Result<(bool, String), ExperimentError> {
    let uc = lp_value(FormulationId::Uc, inst)?;
    let uf = lp_value(FormulationId::Uf, inst)?;
    let sdc1 = lp_value(FormulationId::Sdc1, inst)?;
    let ok = near(uc, 1.5) && near(uf, 1.5) && near(sdc1, 2.0);
    Ok((ok, format!("uc={} uf={} sdc1={}", fmt_value(uc), fmt_value(uf), fmt_value(sdc1))))
}

fn claim_triangle_swapped(inst: &StochasticInstance) -> Result<(bool, String), ExperimentError> {
    let sdc1 = lp_value(FormulationId::Sdc1, inst)?;
    let sdc2 = lp_value(FormulationId::Sdc2, inst)?;
    let ok = near(sdc1, 1.5) && sdc2 > 1.5 + HIERARCHY_TOL;
    Ok((ok, format!("sdc1={} sdc2={}", fmt_value(sdc1), fmt_value(sdc2))))
}

fn claim_flow_balance(inst: &StochasticInstance) -> Result<(bool, String), ExperimentError> {
    let demo = flow_balance_invalidity_demo(inst, FlowBalanceScope::FirstStage)?;
    let ok = near(demo.without, 12.0) && demo.with > demo.without + HIERARCHY_TOL;
    Ok((ok, format!("without={} with={}", fmt_value(demo.without), fmt_value(demo.with))))
}

fn claim_valid_inequalities(refs: &ReferenceInstances) -> Result<(bool, String), ExperimentError> {
    let mut ok = true;
    let mut parts = Vec::new();
    for (id, inst, target) in [
        (FormulationId::Sdc2, &refs.path, 3.0),
        (FormulationId::Dc2, &refs.gap_rooted, 5.0),
    ] {
        let spec = add_valid_inequalities(&build(id, inst, ObjectiveForm::Printed)?, inst)?;
        let v = integer_solve(&spec, false)?.require_optimal(id)?.point.objective;
        ok &= near(v, target);
        parts.push(format!("{id}={}", fmt_value(v)));
    }
    Ok((ok, parts.join(" ")))
}

/// Checks every numeric claim about the bundled reference instances.
pub fn verify_reference_claims() -> Vec<ClaimResult> {
    let refs = reference_instances();
    type Check<'a> = Box<dyn Fn() -> Result<(bool, String), ExperimentError> + 'a>;
    let claims: Vec<(&str, Check)> = vec![
        (
            "path: optimum 3 under every unrooted formulation",
            Box::new(|| all_optima(&FormulationId::UNROOTED, &refs.path, 3.0)),
        ),
        (
            "path: rooted optimum 12 under every rooted formulation",
            Box::new(|| all_optima(&FormulationId::ROOTED, &refs.path_rooted, 12.0)),
        ),
        (
            "two_scenarios: optimum 12 buying e1,e4 early and e2 or e3 late",
            Box::new(|| claim_two_scenarios(&refs.two_scenarios)),
        ),
        (
            "gap: relaxed first stage gives 4.5 (dc1, fractional) and 5 (dc2, integral)",
            Box::new(|| claim_gap_relaxed(&refs.gap_rooted)),
        ),
        (
            "gap: integer optimum 5 and gap ratio 10/9",
            Box::new(|| claim_gap_ratio(&refs.gap_rooted)),
        ),
        (
            "triangle: LP(uc) = LP(uf) = 1.5 < LP(sdc1) = 2",
            Box::new(|| claim_triangle(&refs.triangle)),
        ),
        (
            "triangle_swapped: LP(sdc1) = 1.5 < LP(sdc2)",
            Box::new(|| claim_triangle_swapped(&refs.triangle_swapped)),
        ),
        (
            "path: first-stage flow balance raises the rooted optimum above 12",
            Box::new(|| claim_flow_balance(&refs.path_rooted)),
        ),
        (
            "valid inequalities keep the optima of path (3) and gap (5)",
            Box::new(|| claim_valid_inequalities(&refs)),
        ),
    ];
    claims
        .into_iter()
        .map(|(name, check)| match check() {
            Ok((passed, detail)) => ClaimResult {
                name: name.to_string(),
                passed,
                detail,
            },
            Err(e) => ClaimResult {
                name: name.to_string(),
                passed: false,
                detail: format!("error: {e}"),
            },
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::validate;
    use crate::io::write_instance;

    #[test]
    fn reference_instances_parse() {
        let refs = reference_instances();
        assert!(refs.path_rooted.is_rooted() && refs.gap_rooted.is_rooted());
        assert!(!refs.path.is_rooted());
        assert_eq!(refs.two_scenarios.scenario_count(), 2);
    }

    #[test]
    fn reference_claims_pass() {
        for claim in verify_reference_claims() {
            assert!(claim.passed, "{}: {}", claim.name, claim.detail);
        }
    }

    #[test]
    fn generator_is_reproducible_and_valid() {
        let params = RandomParams::new(6, 0.5, 2).rooted(true);
        let a = generate_random_instance(7, &params);
        assert_eq!(a, generate_random_instance(7, &params));
        assert!(validate(&a).is_empty());
        assert!(a.scenarios.iter().all(|sc| sc.terminals.len() >= 2));
    }

    #[test]
    fn complete_graph_at_probability_one() {
        let inst = generate_random_instance(3, &RandomParams::new(5, 1.0, 1));
        assert_eq!(inst.graph.edge_count(), 10);
    }

    #[test]
    fn below_expected_regime() {
        for seed in 0..20 {
            let params = RandomParams::new(5, 0.6, 1).regime(CostRegime::FirstStageBelowExpected);
            let inst = generate_random_instance(seed, &params);
            assert!(check_cost_assumptions(&inst).iter().all(|r| r.below_expected));
            assert!(inst.first_stage_costs.iter().all(|c| *c >= Rational::one()));
        }
    }

    #[test]
    fn edge_cap_is_respected() {
        for seed in 0..20 {
            let inst = generate_random_instance(seed, &RandomParams::new(5, 0.6, 2).max_edges(6));
            assert!(inst.graph.edge_count() <= 6);
        }
    }

    #[test]
    fn golden_random_instance() {
        let inst = generate_random_instance(1, &RandomParams::new(6, 0.5, 2));
        assert_eq!(write_instance(&inst), include_str!("../fixtures/random_seed1.sstp"));
    }

    #[test]
    fn flags_detect_broken_relations() {
        let mut bounds = BTreeMap::new();
        bounds.insert(FormulationId::Uc, 2.0);
        bounds.insert(FormulationId::Uf, 2.0);
        bounds.insert(FormulationId::Sdc1, 1.5);
        let flags = hierarchy_flags(&bounds, 3);
        assert_eq!(flags.len(), 1);
        assert_eq!(flags[0].claim, "LP(uc) <= LP(sdc1)");
        assert_eq!(flags[0].objective, 3);
    }

    #[test]
    fn compare_triangle() {
        let refs = reference_instances();
        let table = compare(&refs.triangle, &FormulationId::UNROOTED, ObjectiveForm::Printed).unwrap();
        assert!(!table.has_violation(), "{:?}", table.flags);
        let tsv = table.to_tsv(false);
        assert!(tsv.starts_with("formulation\tlp_bound"));
        assert!(tsv.contains("uc\t1.5\t"));
        assert!(table.to_json(false).contains("\"violation\": false"));
    }

    #[test]
    fn rooted_formulation_on_unrooted_instance() {
        let refs = reference_instances();
        let err = compare(&refs.path, &[FormulationId::Dc1], ObjectiveForm::Printed).unwrap_err();
        assert!(matches!(err, ExperimentError::Inapplicable(FormulationId::Dc1, _)));
    }

    #[test]
    fn dc2_refuses_without_cost_assumption() {
        let refs = reference_instances();
        // Edge 2 of the rooted path costs 10 early and 1 late.
        let err = test_first_stage_integrality(&refs.path_rooted, FormulationId::Dc2).unwrap_err();
        assert!(matches!(err, ExperimentError::Precondition(_)));
        assert!(err.to_string().contains("e2"));
    }

    #[test]
    fn warm_objective_change_survives_rounding() {
        // Once reported infeasible after an objective change left a basic
        // variable 1e-9 outside its bound.
        let inst = generate_random_instance(71, &RandomParams::new(7, 0.5, 3).rooted(true));
        let bounds = bounds_under_perturbations(&inst, &[FormulationId::Df], 20, 71).unwrap();
        assert_eq!(bounds.len(), 21);
    }

    #[test]
    fn perturbed_hierarchy_on_reference_instances() {
        let refs = reference_instances();
        for inst in [&refs.path, &refs.two_scenarios, &refs.triangle, &refs.triangle_swapped, &refs.gap_rooted] {
            let flags = hierarchy_check(inst, 5, 11).unwrap();
            assert!(flags.is_empty(), "{flags:?}");
        }
    }
}
