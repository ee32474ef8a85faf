//! Maximum flow and minimum cut (Dinic) on directed graphs with
//! floating-point capacities.

use std::collections::VecDeque;

/// Capacities at or below this are treated as absent.
pub const CAPACITY_EPS: f64 = 1e-9;

/// Directed graph with capacitated arcs, addressed by insertion index.
#[derive(Debug, Clone, Default)]
pub struct CapGraph {
    nodes: usize,
    arcs: Vec<(usize, usize, f64)>,
}

impl CapGraph {
    pub fn new(nodes: usize) -> Self {
        Self {
            nodes,
            arcs: Vec::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }

    /// Adds arc `tail -> head` and returns its index.
    pub fn add_arc(&mut self, tail: usize, head: usize, capacity: f64) -> usize {
        assert!(tail < self.nodes && head < self.nodes, "arc endpoint out of range");
        self.arcs.push((tail, head, capacity));
        self.arcs.len() - 1
    }

    pub fn arcs(&self) -> &[(usize, usize, f64)] {
        &self.arcs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinCutResult {
    pub value: f64,
    /// `source_side[v]` is true when `v` is reachable from the source in the
    /// final residual graph.
    pub source_side: Vec<bool>,
    /// Indices of arcs leaving the source side.
    pub cut_arcs: Vec<usize>,
    /// Flow on each arc, by insertion index.
    pub flow: Vec<f64>,
}

struct Residual {
    head: Vec<usize>,
    cap: Vec<f64>,
    adj: Vec<Vec<usize>>,
}

impl Residual {
    fn bfs_levels(&self, s: usize) -> Vec<usize> {
        let mut level = vec![usize::MAX; self.adj.len()];
        level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &e in &self.adj[u] {
                let v = self.head[e];
                if self.cap[e] > CAPACITY_EPS && level[v] == usize::MAX {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        level
    }

    fn augment(&mut self, u: usize, t: usize, pushed: f64, level: &[usize], next: &mut [usize]) -> f64 {
        if u == t {
            return pushed;
        }
        while next[u] < self.adj[u].len() {
            let e = self.adj[u][next[u]];
            let v = self.head[e];
            if self.cap[e] > CAPACITY_EPS && level[v] == level[u] + 1 {
                let got = self.augment(v, t, pushed.min(self.cap[e]), level, next);
                if got > CAPACITY_EPS {
                    self.cap[e] -= got;
                    self.cap[e ^ 1] += got;
                    return got;
                }
            }
            next[u] += 1;
        }
        0.0
    }
}

/// Maximum `source -> sink` flow together with a minimum cut.
pub fn max_flow_min_cut(graph: &CapGraph, source: usize, sink: usize) -> MinCutResult {
    let n = graph.nodes;
    let mut res = Residual {
        head: Vec::with_capacity(2 * graph.arcs.len()),
        cap: Vec::with_capacity(2 * graph.arcs.len()),
        adj: vec![Vec::new(); n],
    };
    for &(u, v, c) in &graph.arcs {
        let c = if c > CAPACITY_EPS { c } else { 0.0 };
        res.adj[u].push(res.head.len());
        res.head.push(v);
        res.cap.push(c);
        res.adj[v].push(res.head.len());
        res.head.push(u);
        res.cap.push(0.0);
    }
    let mut value = 0.0;
    if source != sink {
        loop {
            let level = res.bfs_levels(source);
            if level[sink] == usize::MAX {
                break;
            }
            let mut next = vec![0; n];
            loop {
                let got = res.augment(source, sink, f64::INFINITY, &level, &mut next);
                if got <= CAPACITY_EPS {
                    break;
                }
                value += got;
            }
        }
    }
    let level = res.bfs_levels(source);
    let source_side: Vec<bool> = level.iter().map(|&l| l != usize::MAX).collect();
    let flow: Vec<f64> = (0..graph.arcs.len()).map(|i| res.cap[2 * i + 1]).collect();
    let cut_arcs = graph
        .arcs
        .iter()
        .enumerate()
        .filter(|(_, &(u, v, _))| source_side[u] && !source_side[v])
        .map(|(i, _)| i)
        .collect();
    MinCutResult {
        value,
        source_side,
        cut_arcs,
        flow,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Minimum over all vertex sets containing `s` but not `t`.
    fn brute_force_cut(g: &CapGraph, s: usize, t: usize) -> f64 {
        let n = g.node_count();
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << n) {
            if mask & (1 << s) == 0 || mask & (1 << t) != 0 {
                continue;
            }
            let cut: f64 = g
                .arcs()
                .iter()
                .filter(|&&(u, v, _)| mask & (1 << u) != 0 && mask & (1 << v) == 0)
                .map(|&(_, _, c)| c.max(0.0))
                .sum();
            best = best.min(cut);
        }
        best
    }

    #[test]
    fn single_arc() {
        let mut g = CapGraph::new(2);
        g.add_arc(0, 1, 0.7);
        let r = max_flow_min_cut(&g, 0, 1);
        assert!((r.value - 0.7).abs() < 1e-12);
        assert_eq!(r.cut_arcs, vec![0]);
        assert_eq!(r.source_side, vec![true, false]);
    }

    #[test]
    fn triangle_with_half_capacities() {
        let mut g = CapGraph::new(3);
        for (u, v) in [(0, 1), (1, 2), (0, 2)] {
            g.add_arc(u, v, 0.5);
            g.add_arc(v, u, 0.5);
        }
        let r = max_flow_min_cut(&g, 0, 2);
        assert!((r.value - 1.0).abs() < 1e-12);
        assert!((r.value - brute_force_cut(&g, 0, 2)).abs() < 1e-12);
    }

    #[test]
    fn unreachable_sink() {
        let mut g = CapGraph::new(3);
        g.add_arc(0, 1, 1.0);
        g.add_arc(2, 1, 1.0);
        let r = max_flow_min_cut(&g, 0, 2);
        assert_eq!(r.value, 0.0);
        assert!(r.cut_arcs.is_empty());
        assert!(!r.source_side[2]);
    }

    #[test]
    fn tiny_capacities_are_absent() {
        let mut g = CapGraph::new(2);
        g.add_arc(0, 1, 1e-12);
        let r = max_flow_min_cut(&g, 0, 1);
        assert_eq!(r.value, 0.0);
        assert!(!r.source_side[1]);
    }

    fn arb_graph() -> impl Strategy<Value = (usize, Vec<(usize, usize, f64)>)> {
        (2usize..7).prop_flat_map(|n| {
            let arc = (0..n, 0..n, 0u32..8).prop_map(|(u, v, c)| (u, v, c as f64 / 4.0));
            (Just(n), prop::collection::vec(arc, 0..16))
        })
    }

    proptest! {
        #[test]
        fn flow_matches_brute_force_cut((n, arcs) in arb_graph()) {
            let mut g = CapGraph::new(n);
            for &(u, v, c) in &arcs {
                g.add_arc(u, v, c);
            }
            let r = max_flow_min_cut(&g, 0, n - 1);
            prop_assert!((r.value - brute_force_cut(&g, 0, n - 1)).abs() < 1e-9);
            let cut: f64 = r.cut_arcs.iter().map(|&a| arcs[a].2).sum();
            prop_assert!((cut - r.value).abs() < 1e-9);
            // Capacity and conservation at every inner node.
            let mut balance = vec![0.0; n];
            for (i, &(u, v, c)) in arcs.iter().enumerate() {
                prop_assert!(r.flow[i] >= -1e-12 && r.flow[i] <= c + 1e-12);
                balance[u] -= r.flow[i];
                balance[v] += r.flow[i];
            }
            for (v, b) in balance.iter().enumerate().take(n - 1).skip(1) {
                prop_assert!(b.abs() < 1e-9, "imbalance {} at {}", b, v);
            }
            prop_assert!((balance[n - 1] - r.value).abs() < 1e-9);
        }

        #[test]
        fn value_independent_of_insertion_order((n, arcs) in arb_graph(), seed in any::<u64>()) {
            let mut shuffled = arcs.clone();
            let len = shuffled.len();
            for i in (1..len).rev() {
                let j = (seed.wrapping_mul(6364136223846793005).wrapping_add(i as u64) % (i as u64 + 1)) as usize;
                shuffled.swap(i, j);
            }
            let build = |list: &[(usize, usize, f64)]| {
                let mut g = CapGraph::new(n);
                for &(u, v, c) in list {
                    g.add_arc(u, v, c);
                }
                max_flow_min_cut(&g, 0, n - 1).value
            };
            prop_assert!((build(&arcs) - build(&shuffled)).abs() < 1e-9);
        }
    }
}
