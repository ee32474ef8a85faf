//! Cutting-plane loop and best-bound branch-and-cut on top of [`Solver`].

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::simplex::Basis;
use super::{CutOracle, LpError, LpModel, LpPoint, Solver, Status, INT_TOL, OBJ_TOL};

#[derive(Debug, Clone)]
pub struct MipOptions {
    /// Branch-and-bound nodes before giving up with the incumbent.
    pub node_limit: usize,
    /// Separation rounds per node.
    pub round_limit: usize,
}

impl Default for MipOptions {
    fn default() -> Self {
        Self {
            node_limit: 100_000,
            round_limit: 10_000,
        }
    }
}

/// Outcome of re-solving and separating until no violated row remains.
#[derive(Debug, Clone)]
pub struct CutLoopOutcome {
    pub point: LpPoint,
    /// Rounds that added at least one row.
    pub rounds: usize,
    pub cuts_added: usize,
    /// Objective after every LP solve, in order.
    pub bounds: Vec<f64>,
}

/// Alternates LP solves and separation until the oracle returns nothing,
/// the LP stops being optimal, or `round_limit` rounds have added rows.
pub fn run_cut_loop(
    solver: &mut Solver,
    oracle: &mut dyn CutOracle,
    round_limit: usize,
) -> CutLoopOutcome {
    let mut rounds = 0;
    let mut cuts_added = 0;
    let mut bounds = Vec::new();
    let mut iterations = 0;
    loop {
        let mut point = solver.solve();
        iterations += point.iterations;
        point.iterations = iterations;
        bounds.push(point.objective);
        if !point.is_optimal() {
            return CutLoopOutcome {
                point,
                rounds,
                cuts_added,
                bounds,
            };
        }
        let cuts = oracle.separate(&point.values);
        if cuts.is_empty() {
            return CutLoopOutcome {
                point,
                rounds,
                cuts_added,
                bounds,
            };
        }
        if rounds >= round_limit {
            point.status = Status::IterationLimit;
            return CutLoopOutcome {
                point,
                rounds,
                cuts_added,
                bounds,
            };
        }
        cuts_added += cuts.len();
        rounds += 1;
        solver
            .add_rows(&cuts)
            .expect("separation produced a row over unknown columns");
    }
}

#[derive(Debug, Clone)]
pub struct MipResult {
    /// Best integer point found; `status` is `Optimal` only when proven.
    pub point: LpPoint,
    pub nodes: usize,
    pub rounds: usize,
    pub cuts_added: usize,
    /// Bound at the root node after separation.
    pub root_bound: f64,
}

struct Node {
    bound: f64,
    id: usize,
    overrides: Vec<(usize, f64, f64)>,
    basis: Option<Basis>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // BinaryHeap is a max-heap: smallest bound first, then newest node.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| self.id.cmp(&other.id))
    }
}

/// Most fractional variable among `integer`, ties to the lowest index.
fn branching_variable(values: &[f64], integer: &[usize]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &j in integer {
        let frac = values[j] - values[j].floor();
        let dist = frac.min(1.0 - frac);
        if dist <= INT_TOL {
            continue;
        }
        if best.is_none_or(|(bj, bd)| dist > bd + 1e-12 || (dist >= bd - 1e-12 && j < bj)) {
            best = Some((j, dist));
        }
    }
    best.map(|(j, _)| j)
}

/// Minimises `model` with the variables listed in `integer` restricted to
/// integers, separating rows from `oracle` at every node.
pub fn solve_mip(
    model: &LpModel,
    integer: &[usize],
    mut oracle: Option<&mut dyn CutOracle>,
    options: &MipOptions,
) -> Result<MipResult, LpError> {
    let mut solver = Solver::new(model)?;
    let original: Vec<(f64, f64)> = model.variables.iter().map(|v| (v.lower, v.upper)).collect();
    let mut heap = BinaryHeap::new();
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        id: 0,
        overrides: Vec::new(),
        basis: None,
    });
    let mut next_id = 1;
    let mut incumbent: Option<LpPoint> = None;
    let mut nodes = 0;
    let mut rounds = 0;
    let mut cuts_added = 0;
    let mut iterations = 0;
    let mut root_bound = f64::NAN;
    let mut complete = true;
    let mut unbounded = false;
    let mut applied: Vec<usize> = Vec::new();

    while let Some(node) = heap.pop() {
        if let Some(inc) = &incumbent {
            if node.bound >= inc.objective - OBJ_TOL {
                continue;
            }
        }
        if nodes >= options.node_limit {
            complete = false;
            break;
        }
        nodes += 1;
        for &j in &applied {
            solver.set_bounds(j, original[j].0, original[j].1);
        }
        applied.clear();
        for &(j, lo, up) in &node.overrides {
            solver.set_bounds(j, lo, up);
            applied.push(j);
        }
        if let Some(basis) = &node.basis {
            solver.restore_basis(basis);
        }
        let point = match oracle.as_deref_mut() {
            Some(o) => {
                let out = run_cut_loop(&mut solver, o, options.round_limit);
                rounds += out.rounds;
                cuts_added += out.cuts_added;
                out.point
            }
            None => solver.solve(),
        };
        iterations += point.iterations;
        if node.id == 0 {
            root_bound = point.objective;
        }
        match point.status {
            Status::Optimal => {}
            Status::Infeasible => continue,
            Status::Unbounded => {
                unbounded = true;
                break;
            }
            Status::IterationLimit => {
                complete = false;
                continue;
            }
        }
        if let Some(inc) = &incumbent {
            if point.objective >= inc.objective - OBJ_TOL {
                continue;
            }
        }
        match branching_variable(&point.values, integer) {
            None => {
                let mut values = point.values.clone();
                for &j in integer {
                    values[j] = values[j].round();
                }
                incumbent = Some(LpPoint {
                    objective: point.objective,
                    values,
                    status: Status::Optimal,
                    iterations: 0,
                });
            }
            Some(j) => {
                let v = point.values[j];
                let (lo, up) = node
                    .overrides
                    .iter()
                    .rev()
                    .find(|o| o.0 == j)
                    .map_or(original[j], |o| (o.1, o.2));
                let basis = solver.basis();
                for (nlo, nup) in [(lo, v.floor()), (v.ceil(), up)] {
                    if nlo > nup {
                        continue;
                    }
                    let mut overrides: Vec<(usize, f64, f64)> =
                        node.overrides.iter().filter(|o| o.0 != j).copied().collect();
                    overrides.push((j, nlo, nup));
                    heap.push(Node {
                        bound: point.objective,
                        id: next_id,
                        overrides,
                        basis: Some(basis.clone()),
                    });
                    next_id += 1;
                }
            }
        }
    }

    let status = if unbounded {
        Status::Unbounded
    } else if !complete {
        Status::IterationLimit
    } else if incumbent.is_some() {
        Status::Optimal
    } else {
        Status::Infeasible
    };
    let mut point = incumbent.unwrap_or(LpPoint {
        values: vec![0.0; model.num_vars()],
        objective: f64::NAN,
        status,
        iterations: 0,
    });
    point.status = status;
    point.iterations = iterations;
    Ok(MipResult {
        point,
        nodes,
        rounds,
        cuts_added,
        root_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{solve_lp, Row, Variable};

    fn knapsack() -> LpModel {
        // max 5a + 4b + 3c s.t. 2a + 3b + c <= 5, 4a + b + 2c <= 11, 3a + 4b + 2c <= 8.
        let mut m = LpModel::new();
        for (name, c) in [("a", -5.0), ("b", -4.0), ("c", -3.0)] {
            let mut v = Variable::continuous(name, 0.0, 10.0, c);
            v.integer = true;
            m.add_variable(v);
        }
        m.add_row(Row::le(vec![(0, 2.0), (1, 3.0), (2, 1.0)], 5.0)).unwrap();
        m.add_row(Row::le(vec![(0, 4.0), (1, 1.0), (2, 2.0)], 11.0)).unwrap();
        m.add_row(Row::le(vec![(0, 3.0), (1, 4.0), (2, 2.0)], 8.0)).unwrap();
        m
    }

    fn enumerate(m: &LpModel) -> f64 {
        let mut best = f64::INFINITY;
        for a in 0..=10 {
            for b in 0..=10 {
                for c in 0..=10 {
                    let x = [a as f64, b as f64, c as f64];
                    if m.max_violation(&x) <= 1e-9 {
                        best = best.min(m.objective_value(&x));
                    }
                }
            }
        }
        best
    }

    #[test]
    fn continuous_mip_matches_lp() {
        let m = knapsack();
        let lp = solve_lp(&m).unwrap();
        let mip = solve_mip(&m, &[], None, &MipOptions::default()).unwrap();
        assert_eq!(mip.point.status, Status::Optimal);
        assert!((lp.objective - mip.point.objective).abs() < 1e-7);
        assert_eq!(mip.nodes, 1);
    }

    #[test]
    fn integer_optimum_matches_enumeration() {
        let m = knapsack();
        let mip = solve_mip(&m, &m.integer_mask(), None, &MipOptions::default()).unwrap();
        assert_eq!(mip.point.status, Status::Optimal);
        assert!((mip.point.objective - enumerate(&m)).abs() < 1e-7);
        assert!(mip.root_bound <= mip.point.objective + 1e-9);
        assert!(m.max_violation(&mip.point.values) < 1e-7);
    }

    #[test]
    fn infeasible_integer_program() {
        let mut m = LpModel::new();
        m.add_variable(Variable::binary("x", 1.0));
        m.add_row(Row::eq(vec![(0, 2.0)], 1.0)).unwrap();
        let mip = solve_mip(&m, &[0], None, &MipOptions::default()).unwrap();
        assert_eq!(mip.point.status, Status::Infeasible);
    }

    /// Lazily supplies x + y >= 1 and x - y <= 0.5.
    struct Lazy;

    impl CutOracle for Lazy {
        fn separate(&mut self, v: &[f64]) -> Vec<Row> {
            let mut rows = Vec::new();
            if v[0] + v[1] < 1.0 - 1e-9 {
                rows.push(Row::ge(vec![(0, 1.0), (1, 1.0)], 1.0));
            }
            if v[0] - v[1] > 0.5 + 1e-9 {
                rows.push(Row::le(vec![(0, 1.0), (1, -1.0)], 0.5));
            }
            rows
        }
    }

    #[test]
    fn cut_loop_bounds_are_monotone() {
        let mut m = LpModel::new();
        m.add_variable(Variable::continuous("x", 0.0, 1.0, 1.0));
        m.add_variable(Variable::continuous("y", 0.0, 1.0, 3.0));
        let mut solver = Solver::new(&m).unwrap();
        let out = run_cut_loop(&mut solver, &mut Lazy, 100);
        assert!(out.point.is_optimal());
        assert!((out.point.objective - 1.5).abs() < 1e-7);
        assert!(out.bounds.windows(2).all(|w| w[1] >= w[0] - 1e-9));
        assert_eq!(out.rounds, 2);
    }

    #[test]
    fn branch_and_cut_with_lazy_rows() {
        let mut m = LpModel::new();
        m.add_variable(Variable::binary("x", 1.0));
        m.add_variable(Variable::binary("y", 3.0));
        let mut lazy = Lazy;
        let mip = solve_mip(&m, &[0, 1], Some(&mut lazy), &MipOptions::default()).unwrap();
        assert_eq!(mip.point.status, Status::Optimal);
        assert!((mip.point.objective - 3.0).abs() < 1e-7);
    }
}
