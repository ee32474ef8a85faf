//! Stochastic Steiner tree instances: the undirected graph, first-stage
//! costs, the scenario set and an optional global root for the rooted
//! variant.
//!
//! Costs and probabilities are exact rationals. Everything downstream of the
//! LP boundary works on `f64` copies obtained through the `*_f64` helpers.

use std::collections::HashSet;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Exact rational number used for costs and probabilities.
pub type Rational = BigRational;

/// Converts an integer into a [`Rational`].
pub fn rational(value: i64) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

/// Converts `numer / denom` into a [`Rational`].
pub fn ratio(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

pub(crate) fn to_f64(value: &Rational) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

/// Undirected simple graph with edges indexed `0..m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    vertex_count: usize,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    /// Stores the graph as given; structural problems are reported by
    /// [`validate`] rather than rejected here.
    pub fn new(vertex_count: usize, edges: Vec<(usize, usize)>) -> Self {
        Self {
            vertex_count,
            edges,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> (usize, usize) {
        self.edges[e]
    }

    pub fn bidirection(&self) -> Bidirection {
        Bidirection::new(self)
    }
}

/// The bidirected graph: edge `e = {i, j}` (stored as `(i, j)`) yields the
/// forward arc `2e = (i, j)` and the backward arc `2e + 1 = (j, i)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bidirection {
    vertex_count: usize,
    arcs: Vec<(usize, usize)>,
    incoming: Vec<Vec<usize>>,
    outgoing: Vec<Vec<usize>>,
}

impl Bidirection {
    fn new(graph: &Graph) -> Self {
        let n = graph.vertex_count();
        let mut arcs = Vec::with_capacity(2 * graph.edge_count());
        let mut incoming = vec![Vec::new(); n];
        let mut outgoing = vec![Vec::new(); n];
        for &(i, j) in graph.edges() {
            for (tail, head) in [(i, j), (j, i)] {
                let a = arcs.len();
                arcs.push((tail, head));
                if tail < n && head < n {
                    outgoing[tail].push(a);
                    incoming[head].push(a);
                }
            }
        }
        Self {
            vertex_count: n,
            arcs,
            incoming,
            outgoing,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    pub fn arcs(&self) -> &[(usize, usize)] {
        &self.arcs
    }

    pub fn arc(&self, a: usize) -> (usize, usize) {
        self.arcs[a]
    }

    pub fn arc_to_edge(&self, a: usize) -> usize {
        a / 2
    }

    pub fn forward(&self, e: usize) -> usize {
        2 * e
    }

    pub fn backward(&self, e: usize) -> usize {
        2 * e + 1
    }

    /// The arc with the opposite orientation.
    pub fn reverse(&self, a: usize) -> usize {
        a ^ 1
    }

    /// Arcs entering `v`, i.e. `δ^-(v)`.
    pub fn incoming(&self, v: usize) -> &[usize] {
        &self.incoming[v]
    }

    /// Arcs leaving `v`, i.e. `δ^+(v)`.
    pub fn outgoing(&self, v: usize) -> &[usize] {
        &self.outgoing[v]
    }
}

/// One possible future: its probability, second-stage edge costs and the
/// terminals that must be connected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub probability: Rational,
    pub edge_costs: Vec<Rational>,
    /// Sorted, duplicate-free terminal list.
    pub terminals: Vec<usize>,
    pub root_hint: Option<usize>,
}

impl Scenario {
    pub fn new(probability: Rational, edge_costs: Vec<Rational>, mut terminals: Vec<usize>) -> Self {
        terminals.sort_unstable();
        terminals.dedup();
        Self {
            probability,
            edge_costs,
            terminals,
            root_hint: None,
        }
    }

    pub fn with_root_hint(mut self, root: usize) -> Self {
        self.root_hint = Some(root);
        self
    }

    pub fn is_terminal(&self, v: usize) -> bool {
        self.terminals.binary_search(&v).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StochasticInstance {
    pub graph: Graph,
    pub first_stage_costs: Vec<Rational>,
    pub scenarios: Vec<Scenario>,
    /// Set for rooted instances only.
    pub global_root: Option<usize>,
}

/// A broken instance invariant. Scenario numbers in messages are 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NoVertices,
    EdgeEndpointOutOfRange { edge: usize },
    SelfLoop { edge: usize },
    DuplicateEdge { edge: usize },
    FirstStageCostCount { expected: usize, found: usize },
    NegativeFirstStageCost { edge: usize },
    NoScenarios,
    ProbabilityOutOfRange { scenario: usize },
    ScenarioCostCount { scenario: usize, expected: usize, found: usize },
    NegativeScenarioCost { scenario: usize, edge: usize },
    NoTerminals { scenario: usize },
    TerminalOutOfRange { scenario: usize, vertex: usize },
    RootHintNotTerminal { scenario: usize },
    ProbabilitySum { sum: String },
    RootOutOfRange,
    RootNotTerminal { scenario: usize },
}

impl Violation {
    /// The instance field the violated rule is attached to.
    pub fn field(&self) -> &'static str {
        use Violation::*;
        match self {
            NoVertices => "graph.vertex_count",
            EdgeEndpointOutOfRange { .. } | SelfLoop { .. } | DuplicateEdge { .. } => "graph.edges",
            FirstStageCostCount { .. } | NegativeFirstStageCost { .. } => "first_stage_costs",
            NoScenarios | ProbabilitySum { .. } => "scenarios",
            ProbabilityOutOfRange { .. } => "scenario.probability",
            ScenarioCostCount { .. } | NegativeScenarioCost { .. } => "scenario.edge_costs",
            NoTerminals { .. } | TerminalOutOfRange { .. } => "scenario.terminals",
            RootHintNotTerminal { .. } => "scenario.root_hint",
            RootOutOfRange | RootNotTerminal { .. } => "global_root",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            NoVertices => write!(f, "graph has no vertices"),
            EdgeEndpointOutOfRange { edge } => write!(f, "edge {} has an endpoint out of range", edge + 1),
            SelfLoop { edge } => write!(f, "edge {} is a self-loop", edge + 1),
            DuplicateEdge { edge } => write!(f, "edge {} duplicates an earlier edge", edge + 1),
            FirstStageCostCount { expected, found } => {
                write!(f, "expected {expected} first-stage costs, found {found}")
            }
            NegativeFirstStageCost { edge } => write!(f, "first-stage cost of edge {} is negative", edge + 1),
            NoScenarios => write!(f, "instance has no scenarios"),
            ProbabilityOutOfRange { scenario } => {
                write!(f, "probability of scenario {} is outside (0,1]", scenario + 1)
            }
            ScenarioCostCount {
                scenario,
                expected,
                found,
            } => write!(
                f,
                "scenario {} has {found} edge costs, expected {expected}",
                scenario + 1
            ),
            NegativeScenarioCost { scenario, edge } => {
                write!(f, "cost of edge {} in scenario {} is negative", edge + 1, scenario + 1)
            }
            NoTerminals { scenario } => write!(f, "scenario {} has no terminals", scenario + 1),
            TerminalOutOfRange { scenario, vertex } => {
                write!(f, "terminal {} of scenario {} is out of range", vertex + 1, scenario + 1)
            }
            RootHintNotTerminal { scenario } => {
                write!(f, "root hint of scenario {} is not a terminal", scenario + 1)
            }
            ProbabilitySum { sum } => write!(f, "probabilities sum to {sum}"),
            RootOutOfRange => write!(f, "root is out of range"),
            RootNotTerminal { scenario } => write!(f, "root not terminal in scenario {}", scenario + 1),
        }
    }
}

/// Absolute tolerance on `Σ p^k = 1`; inputs given as integers or fractions
/// are checked exactly since their sum is exact anyway.
pub const PROBABILITY_SUM_TOLERANCE: f64 = 1e-9;

fn format_rational_short(value: &Rational) -> String {
    if value.is_integer() {
        return value.to_integer().to_string();
    }
    let approx = to_f64(value);
    let text = format!("{approx:.12}");
    text.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Checks every instance invariant and returns the broken ones. Never panics
/// on structurally well-formed input, whatever the contents.
pub fn validate(instance: &StochasticInstance) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = instance.graph.vertex_count();
    let m = instance.graph.edge_count();
    if n == 0 {
        out.push(Violation::NoVertices);
    }
    let mut seen = HashSet::new();
    for (e, &(i, j)) in instance.graph.edges().iter().enumerate() {
        if i >= n || j >= n {
            out.push(Violation::EdgeEndpointOutOfRange { edge: e });
        } else if i == j {
            out.push(Violation::SelfLoop { edge: e });
        } else if !seen.insert((i.min(j), i.max(j))) {
            out.push(Violation::DuplicateEdge { edge: e });
        }
    }
    if instance.first_stage_costs.len() != m {
        out.push(Violation::FirstStageCostCount {
            expected: m,
            found: instance.first_stage_costs.len(),
        });
    }
    for (e, c) in instance.first_stage_costs.iter().enumerate() {
        if c.is_negative() {
            out.push(Violation::NegativeFirstStageCost { edge: e });
        }
    }
    if instance.scenarios.is_empty() {
        out.push(Violation::NoScenarios);
    }
    let mut sum = Rational::zero();
    for (k, sc) in instance.scenarios.iter().enumerate() {
        if !sc.probability.is_positive() || sc.probability > Rational::one() {
            out.push(Violation::ProbabilityOutOfRange { scenario: k });
        }
        sum += &sc.probability;
        if sc.edge_costs.len() != m {
            out.push(Violation::ScenarioCostCount {
                scenario: k,
                expected: m,
                found: sc.edge_costs.len(),
            });
        }
        for (e, c) in sc.edge_costs.iter().enumerate() {
            if c.is_negative() {
                out.push(Violation::NegativeScenarioCost { scenario: k, edge: e });
            }
        }
        if sc.terminals.is_empty() {
            out.push(Violation::NoTerminals { scenario: k });
        }
        for &t in &sc.terminals {
            if t >= n {
                out.push(Violation::TerminalOutOfRange { scenario: k, vertex: t });
            }
        }
        if let Some(hint) = sc.root_hint {
            if !sc.is_terminal(hint) {
                out.push(Violation::RootHintNotTerminal { scenario: k });
            }
        }
    }
    if !instance.scenarios.is_empty() {
        let deviation = to_f64(&(&sum - Rational::one()).abs());
        if deviation > PROBABILITY_SUM_TOLERANCE {
            out.push(Violation::ProbabilitySum {
                sum: format_rational_short(&sum),
            });
        }
    }
    if let Some(r) = instance.global_root {
        if r >= n {
            out.push(Violation::RootOutOfRange);
        } else {
            for (k, sc) in instance.scenarios.iter().enumerate() {
                if !sc.is_terminal(r) {
                    out.push(Violation::RootNotTerminal { scenario: k });
                }
            }
        }
    }
    out
}

/// Per-edge check of the two cost assumptions that are harmless for the
/// unrooted problem: `c^0_e < c*_e` and `c^0_e > min_k p^k c^k_e`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeCostReport {
    pub edge: usize,
    pub below_expected: bool,
    pub above_min_scenario: bool,
}

impl EdgeCostReport {
    pub fn satisfies_both(&self) -> bool {
        self.below_expected && self.above_min_scenario
    }
}

/// Reports, never rewrites: the first assumption is not admissible for the
/// rooted problem.
pub fn check_cost_assumptions(instance: &StochasticInstance) -> Vec<EdgeCostReport> {
    let expected = instance.expected_costs();
    (0..instance.graph.edge_count())
        .map(|e| {
            let c0 = &instance.first_stage_costs[e];
            let min_weighted = instance
                .scenarios
                .iter()
                .map(|sc| &sc.probability * &sc.edge_costs[e])
                .min()
                .unwrap_or_else(Rational::zero);
            EdgeCostReport {
                edge: e,
                below_expected: c0 < &expected[e],
                above_min_scenario: c0 > &min_weighted,
            }
        })
        .collect()
}

/// Root `r^k` per scenario: the global root for rooted instances, otherwise
/// the scenario's root hint or its lowest-indexed terminal.
pub fn select_scenario_roots(instance: &StochasticInstance) -> Vec<usize> {
    instance
        .scenarios
        .iter()
        .map(|sc| {
            instance
                .global_root
                .or(sc.root_hint)
                .unwrap_or_else(|| sc.terminals.first().copied().unwrap_or(0))
        })
        .collect()
}

/// Quantities derived from the scenario set for a fixed choice of roots.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedCosts {
    /// `c*_e = Σ_k p^k c^k_e`.
    pub expected_cost: Vec<Rational>,
    /// `T^k_r = T^k \ {r^k}` per scenario.
    pub terminals_minus_root: Vec<Vec<usize>>,
    /// `t*_r = Σ_k |T^k_r|`.
    pub total_nonroot_terminals: usize,
}

impl StochasticInstance {
    pub fn scenario_count(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_rooted(&self) -> bool {
        self.global_root.is_some()
    }

    pub fn expected_costs(&self) -> Vec<Rational> {
        (0..self.graph.edge_count())
            .map(|e| {
                self.scenarios
                    .iter()
                    .fold(Rational::zero(), |acc, sc| acc + &sc.probability * &sc.edge_costs[e])
            })
            .collect()
    }

    pub fn derived_costs(&self, roots: &[usize]) -> DerivedCosts {
        let terminals_minus_root: Vec<Vec<usize>> = self
            .scenarios
            .iter()
            .zip(roots)
            .map(|(sc, &r)| sc.terminals.iter().copied().filter(|&t| t != r).collect())
            .collect();
        let total_nonroot_terminals = terminals_minus_root.iter().map(Vec::len).sum();
        DerivedCosts {
            expected_cost: self.expected_costs(),
            terminals_minus_root,
            total_nonroot_terminals,
        }
    }

    pub fn first_stage_costs_f64(&self) -> Vec<f64> {
        self.first_stage_costs.iter().map(to_f64).collect()
    }

    pub fn scenario_costs_f64(&self, k: usize) -> Vec<f64> {
        self.scenarios[k].edge_costs.iter().map(to_f64).collect()
    }

    pub fn probabilities_f64(&self) -> Vec<f64> {
        self.scenarios.iter().map(|sc| to_f64(&sc.probability)).collect()
    }

    pub fn expected_costs_f64(&self) -> Vec<f64> {
        self.expected_costs().iter().map(to_f64).collect()
    }

    /// Same instance with the global root removed, i.e. read as an
    /// unrooted instance.
    pub fn unrooted(&self) -> Self {
        Self {
            global_root: None,
            ..self.clone()
        }
    }
}
