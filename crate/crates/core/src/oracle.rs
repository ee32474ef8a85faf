//! Exhaustive ground truth for tiny instances.
//!
//! For each scenario the connectivity of every edge subset is tabulated once.
//! A superset-minimum transform then gives, for every first-stage set `E^0`,
//! the cheapest connecting superset, so the whole search costs
//! `O(K · |E| · 2^|E|)`.

use num_traits::Zero;
use thiserror::Error;

use crate::instance::{to_f64, Rational, StochasticInstance};

/// Largest edge count accepted by [`brute_force`].
pub const MAX_EDGES: usize = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("instance has {0} edges; exhaustive search supports at most {MAX_EDGES}")]
    TooLarge(usize),
    #[error("no feasible solution exists")]
    Infeasible,
    #[error("rooted search requested but the instance has no global root")]
    MissingRoot,
}

/// Edge sets of a solution together with its exact expected cost.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactSolution {
    pub first_stage: Vec<usize>,
    /// Second-stage purchases per scenario, disjoint from the first stage.
    pub scenarios: Vec<Vec<usize>>,
    pub objective: Rational,
}

impl ExactSolution {
    pub fn objective_f64(&self) -> f64 {
        to_f64(&self.objective)
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }

    fn find(&mut self, v: usize) -> usize {
        let mut root = v;
        while self.0[root] != root {
            root = self.0[root];
        }
        let mut cur = v;
        while self.0[cur] != root {
            let next = self.0[cur];
            self.0[cur] = root;
            cur = next;
        }
        root
    }

    /// Returns false when both were already joined.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        self.0[ra] = rb;
        ra != rb
    }
}

fn connects(instance: &StochasticInstance, edges: impl Iterator<Item = usize>, terminals: &[usize]) -> bool {
    let mut uf = UnionFind::new(instance.graph.vertex_count());
    for e in edges {
        let (i, j) = instance.graph.edge(e);
        uf.union(i, j);
    }
    match terminals.split_first() {
        None => true,
        Some((&first, rest)) => {
            let root = uf.find(first);
            rest.iter().all(|&t| uf.find(t) == root)
        }
    }
}

/// Whether the edges form a tree containing `root`; the empty set counts as
/// the trivial tree `{root}`.
fn is_rooted_tree(instance: &StochasticInstance, edges: &[usize], root: usize) -> bool {
    let mut uf = UnionFind::new(instance.graph.vertex_count());
    for &e in edges {
        let (i, j) = instance.graph.edge(e);
        if !uf.union(i, j) {
            return false;
        }
    }
    let r = uf.find(root);
    edges.iter().all(|&e| {
        let (i, _) = instance.graph.edge(e);
        uf.find(i) == r
    })
}

/// Exact expected cost of a solution.
pub fn solution_cost(instance: &StochasticInstance, first: &[usize], scenarios: &[Vec<usize>]) -> Rational {
    let mut total = Rational::zero();
    for &e in first {
        total += &instance.first_stage_costs[e];
    }
    for (sc, edges) in instance.scenarios.iter().zip(scenarios) {
        for &e in edges {
            total += &sc.probability * &sc.edge_costs[e];
        }
    }
    total
}

/// Feasibility: `E^0 ∪ E^k` connects `T^k` for every scenario, and for the
/// rooted problem `E^0` is a tree containing the root.
pub fn check_feasible(instance: &StochasticInstance, solution: &ExactSolution, rooted: bool) -> bool {
    let m = instance.graph.edge_count();
    let in_range = |set: &[usize]| set.iter().all(|&e| e < m);
    if !in_range(&solution.first_stage) || solution.scenarios.len() != instance.scenario_count() {
        return false;
    }
    if rooted {
        match instance.global_root {
            Some(r) if is_rooted_tree(instance, &solution.first_stage, r) => {}
            _ => return false,
        }
    }
    instance.scenarios.iter().zip(&solution.scenarios).all(|(sc, extra)| {
        in_range(extra)
            && connects(
                instance,
                solution.first_stage.iter().chain(extra.iter()).copied(),
                &sc.terminals,
            )
    })
}

fn mask_edges(mask: usize, m: usize) -> Vec<usize> {
    (0..m).filter(|&e| mask & (1 << e) != 0).collect()
}

/// Optimal solution by exhaustive search over first-stage edge sets.
pub fn brute_force(instance: &StochasticInstance, rooted: bool) -> Result<ExactSolution, OracleError> {
    let m = instance.graph.edge_count();
    if m > MAX_EDGES {
        return Err(OracleError::TooLarge(m));
    }
    let root = if rooted {
        Some(instance.global_root.ok_or(OracleError::MissingRoot)?)
    } else {
        None
    };
    let size = 1usize << m;
    let c0 = instance.first_stage_costs_f64();

    // best[k][E0] = (cheapest connecting superset cost, that superset).
    let mut best: Vec<Vec<(f64, usize)>> = Vec::with_capacity(instance.scenario_count());
    for (k, sc) in instance.scenarios.iter().enumerate() {
        let ck = instance.scenario_costs_f64(k);
        let mut table: Vec<(f64, usize)> = (0..size)
            .map(|mask| {
                if connects(instance, mask_edges(mask, m).into_iter(), &sc.terminals) {
                    let cost = (0..m).filter(|&e| mask & (1 << e) != 0).map(|e| ck[e]).sum();
                    (cost, mask)
                } else {
                    (f64::INFINITY, mask)
                }
            })
            .collect();
        for bit in 0..m {
            for mask in 0..size {
                if mask & (1 << bit) == 0 {
                    let sup = table[mask | (1 << bit)];
                    if sup.0 < table[mask].0 {
                        table[mask] = sup;
                    }
                }
            }
        }
        best.push(table);
    }

    let probs = instance.probabilities_f64();
    let mut incumbent: Option<(f64, usize)> = None;
    for mask in 0..size {
        let edges = mask_edges(mask, m);
        if let Some(r) = root {
            if !is_rooted_tree(instance, &edges, r) {
                continue;
            }
        }
        let mut value: f64 = edges.iter().map(|&e| c0[e]).sum();
        for (k, table) in best.iter().enumerate() {
            let ck = instance.scenario_costs_f64(k);
            let own: f64 = edges.iter().map(|&e| ck[e]).sum();
            value += probs[k] * (table[mask].0 - own);
        }
        if value.is_finite() && incumbent.is_none_or(|(v, _)| value < v - 1e-9) {
            incumbent = Some((value, mask));
        }
    }
    let (_, mask) = incumbent.ok_or(OracleError::Infeasible)?;
    let first_stage = mask_edges(mask, m);
    let scenarios: Vec<Vec<usize>> = best
        .iter()
        .map(|table| mask_edges(table[mask].1 & !mask, m))
        .collect();
    let objective = solution_cost(instance, &first_stage, &scenarios);
    Ok(ExactSolution {
        first_stage,
        scenarios,
        objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{rational, Graph, Scenario};

    fn path(rooted: bool) -> StochasticInstance {
        StochasticInstance {
            graph: Graph::new(4, vec![(0, 1), (1, 2), (2, 3)]),
            first_stage_costs: vec![rational(1), rational(10), rational(1)],
            scenarios: vec![Scenario::new(
                rational(1),
                vec![rational(11), rational(1), rational(11)],
                vec![0, 3],
            )],
            global_root: rooted.then_some(0),
        }
    }

    #[test]
    fn unrooted_path() {
        let inst = path(false);
        let sol = brute_force(&inst, false).unwrap();
        assert_eq!(sol.first_stage, vec![0, 2]);
        assert_eq!(sol.scenarios, vec![vec![1]]);
        assert_eq!(sol.objective, rational(3));
        assert!(check_feasible(&inst, &sol, false));
    }

    #[test]
    fn rooted_path() {
        let inst = path(true);
        let sol = brute_force(&inst, true).unwrap();
        assert_eq!(sol.first_stage, vec![0, 1, 2]);
        assert_eq!(sol.objective, rational(12));
        let disconnected = ExactSolution {
            first_stage: vec![0, 2],
            scenarios: vec![vec![1]],
            objective: rational(3),
        };
        assert!(!check_feasible(&inst, &disconnected, true));
        assert!(check_feasible(&inst, &disconnected, false));
    }

    #[test]
    fn empty_solution_is_infeasible() {
        let inst = path(false);
        let empty = ExactSolution {
            first_stage: vec![],
            scenarios: vec![vec![]],
            objective: rational(0),
        };
        assert!(!check_feasible(&inst, &empty, false));
    }

    #[test]
    fn too_large() {
        let n = 7;
        let edges: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let m = edges.len();
        let inst = StochasticInstance {
            graph: Graph::new(n, edges),
            first_stage_costs: vec![rational(1); m],
            scenarios: vec![Scenario::new(rational(1), vec![rational(1); m], vec![0, 1])],
            global_root: None,
        };
        assert_eq!(brute_force(&inst, false).unwrap_err(), OracleError::TooLarge(21));
    }

    #[test]
    fn empty_first_stage_tree_is_admitted() {
        // Buying nothing early is optimal when scenario costs are cheap.
        let mut inst = path(true);
        inst.scenarios[0].edge_costs = vec![rational(1); 3];
        inst.first_stage_costs = vec![rational(5); 3];
        let sol = brute_force(&inst, true).unwrap();
        assert!(sol.first_stage.is_empty());
        assert_eq!(sol.objective, rational(3));
    }
}
