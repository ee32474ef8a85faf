//! Exact separation of the exponential cut families by minimum cuts, and
//! the cutting-plane driver that solves a cut formulation's LP relaxation.

use std::collections::{BTreeMap, HashSet};

use crate::flow::{max_flow_min_cut, CapGraph};
use crate::formulations::{CutFamily, ModelSpec, ScenarioCuts};
use crate::lp::{run_cut_loop, CutOracle, LpError, LpPoint, Row, Solver};

/// Minimum violation for a cut to be reported.
pub const SEP_TOL: f64 = 1e-6;
/// Rounds before the cutting-plane loop gives up.
pub const ROUND_LIMIT: usize = 10_000;

/// A violated inequality with the data that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct CutRow {
    pub row: Row,
    pub family: CutFamily,
    /// `None` for first-stage cuts.
    pub scenario: Option<usize>,
    /// The cut set `S` (sink side), sorted.
    pub sink_side: Vec<usize>,
    /// Terminal or target vertex of the min-cut computation.
    pub target: usize,
}

fn arc_graph(spec: &ModelSpec, capacity: impl Fn(usize) -> f64) -> CapGraph {
    let bid = &spec.bidirection;
    let mut g = CapGraph::new(bid.vertex_count());
    for (a, &(i, j)) in bid.arcs().iter().enumerate() {
        g.add_arc(i, j, capacity(a));
    }
    g
}

/// Arcs entering the vertex set marked `false` in `source_side`.
fn entering_arcs(spec: &ModelSpec, source_side: &[bool]) -> Vec<usize> {
    spec.bidirection
        .arcs()
        .iter()
        .enumerate()
        .filter(|(_, &(i, j))| source_side[i] && !source_side[j])
        .map(|(a, _)| a)
        .collect()
}

fn sink_side(source_side: &[bool]) -> Vec<usize> {
    (0..source_side.len()).filter(|&v| !source_side[v]).collect()
}

fn scenario_cuts(spec: &ModelSpec, cuts: &ScenarioCuts, values: &[f64]) -> Vec<CutRow> {
    let mut out = Vec::new();
    for (k, terms) in cuts.terms.iter().enumerate() {
        let g = arc_graph(spec, |a| terms[a].iter().map(|&j| values[j]).sum());
        for &t in &spec.terminals[k] {
            let cut = max_flow_min_cut(&g, spec.roots[k], t);
            if cut.value >= 1.0 - SEP_TOL {
                continue;
            }
            let arcs = entering_arcs(spec, &cut.source_side);
            let coefs = arcs.iter().flat_map(|&a| terms[a].iter().map(|&j| (j, 1.0))).collect();
            let row = Row::ge(coefs, 1.0).normalized();
            if row.violation(values) > SEP_TOL {
                out.push(CutRow {
                    row,
                    family: cuts.family,
                    scenario: Some(k),
                    sink_side: sink_side(&cut.source_side),
                    target: t,
                });
            }
        }
    }
    out
}

fn family_cuts(spec: &ModelSpec, family: CutFamily, values: &[f64]) -> Vec<CutRow> {
    match &spec.scenario_cuts {
        Some(cuts) if cuts.family == family => scenario_cuts(spec, cuts, values),
        _ => Vec::new(),
    }
}

/// Violated `(x^0 + x^k)(δ(S)) >= 1`, one per scenario and terminal.
pub fn separate_undirected(spec: &ModelSpec, values: &[f64]) -> Vec<CutRow> {
    family_cuts(spec, CutFamily::Undirected, values)
}

/// Violated semi-directed cuts (sdc1) or joint first/second-stage arc cuts
/// (dc1).
pub fn separate_semi_directed(spec: &ModelSpec, values: &[f64]) -> Vec<CutRow> {
    family_cuts(spec, CutFamily::SemiDirected, values)
}

/// Violated `y^k(δ^-(S)) >= 1`.
pub fn separate_directed(spec: &ModelSpec, values: &[f64]) -> Vec<CutRow> {
    family_cuts(spec, CutFamily::Directed, values)
}

/// Violated `z^0(δ^-(S)) >= z^0(δ^-(v))`. For each `v` with positive
/// indegree, the smallest left-hand side over sets containing `v` but not
/// the root is the minimum `r -> v` cut under `z^0` capacities.
pub fn separate_first_stage_tree(spec: &ModelSpec, values: &[f64]) -> Vec<CutRow> {
    let (Some(z0), Some(root)) = (&spec.tree_cuts, spec.global_root) else {
        return Vec::new();
    };
    let bid = &spec.bidirection;
    let g = arc_graph(spec, |a| values[z0[a]]);
    let mut out = Vec::new();
    for v in (0..bid.vertex_count()).filter(|&v| v != root) {
        let indeg: f64 = bid.incoming(v).iter().map(|&a| values[z0[a]]).sum();
        if indeg <= SEP_TOL {
            continue;
        }
        let cut = max_flow_min_cut(&g, root, v);
        if cut.value >= indeg - SEP_TOL {
            continue;
        }
        let mut coefs: Vec<(usize, f64)> = entering_arcs(spec, &cut.source_side)
            .into_iter()
            .map(|a| (z0[a], 1.0))
            .collect();
        coefs.extend(bid.incoming(v).iter().map(|&a| (z0[a], -1.0)));
        let row = Row::ge(coefs, 0.0).normalized();
        if row.violation(values) > SEP_TOL {
            out.push(CutRow {
                row,
                family: CutFamily::FirstStageTree,
                scenario: None,
                sink_side: sink_side(&cut.source_side),
                target: v,
            });
        }
    }
    out
}

/// Every registered family of `spec`, first-stage cuts first.
pub fn separate_all(spec: &ModelSpec, values: &[f64]) -> Vec<CutRow> {
    let mut out = separate_first_stage_tree(spec, values);
    if let Some(cuts) = &spec.scenario_cuts {
        out.extend(scenario_cuts(spec, cuts, values));
    }
    out
}

/// Rows emitted so far, keyed by a quantised fingerprint.
#[derive(Debug, Clone, Default)]
pub struct CutPool {
    seen: HashSet<(Vec<(usize, i64)>, i64, u8)>,
    rows: Vec<CutRow>,
}

impl CutPool {
    pub fn new() -> Self {
        Self::default()
    }

    fn fingerprint(row: &Row) -> (Vec<(usize, i64)>, i64, u8) {
        let q = |x: f64| (x * 1e9).round() as i64;
        let coefs = row.coefs.iter().map(|&(j, a)| (j, q(a))).collect();
        let sense = match row.sense {
            crate::lp::Sense::Ge => 0,
            crate::lp::Sense::Le => 1,
            crate::lp::Sense::Eq => 2,
        };
        (coefs, q(row.rhs), sense)
    }

    /// Adds the row unless an identical one is present; reports whether it
    /// was new.
    pub fn insert(&mut self, cut: CutRow) -> bool {
        if self.seen.insert(Self::fingerprint(&cut.row)) {
            self.rows.push(cut);
            true
        } else {
            false
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[CutRow] {
        &self.rows
    }
}

/// [`CutOracle`] over all families registered in a model.
#[derive(Debug, Clone)]
pub struct Separator<'a> {
    spec: &'a ModelSpec,
    pool: CutPool,
    counts: BTreeMap<CutFamily, usize>,
}

impl<'a> Separator<'a> {
    pub fn new(spec: &'a ModelSpec) -> Self {
        let counts = spec.families().into_iter().map(|f| (f, 0)).collect();
        Self {
            spec,
            pool: CutPool::new(),
            counts,
        }
    }

    /// Cuts added per family.
    pub fn counts(&self) -> &BTreeMap<CutFamily, usize> {
        &self.counts
    }

    pub fn pool(&self) -> &CutPool {
        &self.pool
    }
}

impl CutOracle for Separator<'_> {
    fn separate(&mut self, values: &[f64]) -> Vec<Row> {
        let mut rows = Vec::new();
        for cut in separate_all(self.spec, values) {
            let family = cut.family;
            let row = cut.row.clone();
            if self.pool.insert(cut) {
                *self.counts.entry(family).or_insert(0) += 1;
                rows.push(row);
            }
        }
        rows
    }
}

/// Result of solving a cut formulation's LP relaxation.
#[derive(Debug, Clone)]
pub struct SeparationOutcome {
    pub point: LpPoint,
    pub rounds: usize,
    pub cuts: BTreeMap<CutFamily, usize>,
    /// LP bound after each round.
    pub bounds: Vec<f64>,
}

/// Alternates LP solves and separation of every registered family until no
/// violated cut remains.
pub fn run_separation_loop(spec: &ModelSpec) -> Result<SeparationOutcome, LpError> {
    let mut solver = Solver::new(&spec.model)?;
    let mut sep = Separator::new(spec);
    let out = run_cut_loop(&mut solver, &mut sep, ROUND_LIMIT);
    Ok(SeparationOutcome {
        point: out.point,
        rounds: out.rounds,
        cuts: sep.counts().clone(),
        bounds: out.bounds,
    })
}

/// Largest violation of any registered family at `values`, found by
/// enumerating every vertex subset. Exponential; meant for checking the
/// min-cut oracles on small graphs.
pub fn exhaustive_max_violation(spec: &ModelSpec, values: &[f64]) -> f64 {
    let bid = &spec.bidirection;
    let n = bid.vertex_count();
    assert!(n <= 16, "enumeration limited to 16 vertices");
    let mut worst: f64 = 0.0;
    let entering = |mask: u32| -> Vec<usize> {
        bid.arcs()
            .iter()
            .enumerate()
            .filter(|(_, &(i, j))| mask & (1 << i) == 0 && mask & (1 << j) != 0)
            .map(|(a, _)| a)
            .collect()
    };
    for mask in 1u32..(1 << n) {
        let arcs = entering(mask);
        if let (Some(z0), Some(r)) = (&spec.tree_cuts, spec.global_root) {
            if mask & (1 << r) == 0 {
                let lhs: f64 = arcs.iter().map(|&a| values[z0[a]]).sum();
                for v in (0..n).filter(|&v| mask & (1 << v) != 0) {
                    let indeg: f64 = bid.incoming(v).iter().map(|&a| values[z0[a]]).sum();
                    worst = worst.max(indeg - lhs);
                }
            }
        }
        if let Some(cuts) = &spec.scenario_cuts {
            for (k, terms) in cuts.terms.iter().enumerate() {
                let r = spec.roots[k];
                if mask & (1 << r) != 0 || !spec.terminals[k].iter().any(|&t| mask & (1 << t) != 0) {
                    continue;
                }
                let lhs: f64 = arcs
                    .iter()
                    .flat_map(|&a| terms[a].iter().map(|&j| values[j]))
                    .sum();
                worst = worst.max(1.0 - lhs);
            }
        }
    }
    worst
}
