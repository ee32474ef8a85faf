//! Bounded revised simplex on `A x - s = 0` with one logical `s_i` per row.
//!
//! The basis inverse is kept explicitly (dense, row-major) and updated by
//! elementary row operations; it is rebuilt from scratch every
//! `REFACTOR_INTERVAL` updates. Rows are bounded through the bounds of their
//! logicals, so appending a row only adds one basic logical and one row to
//! the inverse. Reoptimisation after new rows or tightened bounds goes
//! through the dual simplex; everything else through the primal simplex with
//! a sum-of-infeasibilities phase 1.

use super::{FEAS_TOL, LpError, LpModel, LpPoint, Row, Sense, Status};

const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const DUAL_FEAS_TOL: f64 = 1e-7;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_INTERVAL: usize = 100;
/// Consecutive degenerate pivots before switching to Bland's rule.
const DEGENERATE_LIMIT: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Basic,
    Lower,
    Upper,
    /// Nonbasic free variable sitting at zero.
    Zero,
}

/// Snapshot of a basis that can be handed back to [`Solver::restore_basis`],
/// even after more rows were appended.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    states: Vec<State>,
}

enum DualOutcome {
    Optimal,
    Infeasible,
    NotDualFeasible,
    IterationLimit,
}

enum PrimalOutcome {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

/// Incremental LP solver owning a copy of the model data.
#[derive(Debug, Clone)]
pub struct Solver {
    n: usize,
    m: usize,
    cols: Vec<Vec<(usize, f64)>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    state: Vec<State>,
    basis: Vec<usize>,
    binv: Vec<f64>,
    x: Vec<f64>,
    updates: usize,
    iterations: usize,
    limit: usize,
    bland: bool,
    degenerate_run: usize,
    /// Bound violation tolerated on basic variables during this solve.
    primal_tol: f64,
}

fn row_bounds(row: &Row) -> (f64, f64) {
    match row.sense {
        Sense::Ge => (row.rhs, f64::INFINITY),
        Sense::Le => (f64::NEG_INFINITY, row.rhs),
        Sense::Eq => (row.rhs, row.rhs),
    }
}

impl Solver {
    pub fn new(model: &LpModel) -> Result<Self, LpError> {
        model.check()?;
        let n = model.num_vars();
        let mut solver = Solver {
            n,
            m: 0,
            cols: vec![Vec::new(); n],
            lower: model.variables.iter().map(|v| v.lower).collect(),
            upper: model.variables.iter().map(|v| v.upper).collect(),
            cost: model.variables.iter().map(|v| v.objective).collect(),
            state: vec![State::Lower; n],
            basis: Vec::new(),
            binv: Vec::new(),
            x: vec![0.0; n],
            updates: 0,
            iterations: 0,
            limit: 0,
            bland: false,
            degenerate_run: 0,
            primal_tol: PRIMAL_TOL,
        };
        for j in 0..n {
            solver.state[j] = solver.initial_state(j);
            solver.x[j] = solver.nonbasic_value(j);
        }
        let rows: Vec<&Row> = model.rows.iter().collect();
        solver.append_rows(&rows);
        Ok(solver)
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn num_rows(&self) -> usize {
        self.m
    }

    /// Pivots performed over the solver's lifetime.
    pub fn total_iterations(&self) -> usize {
        self.iterations
    }

    /// Dual-feasible starting position for a nonbasic structural.
    fn initial_state(&self, j: usize) -> State {
        let (lo, up) = (self.lower[j], self.upper[j]);
        if self.cost[j] >= 0.0 && lo.is_finite() {
            State::Lower
        } else if self.cost[j] < 0.0 && up.is_finite() {
            State::Upper
        } else if lo.is_finite() {
            State::Lower
        } else if up.is_finite() {
            State::Upper
        } else {
            State::Zero
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            State::Lower => self.lower[j],
            State::Upper => self.upper[j],
            _ => 0.0,
        }
    }

    /// Appends rows; each row's logical enters the basis.
    pub fn add_rows(&mut self, rows: &[Row]) -> Result<(), LpError> {
        for row in rows {
            if let Some(&(column, _)) = row.coefs.iter().find(|&&(j, _)| j >= self.n) {
                return Err(LpError::BadColumn {
                    column,
                    columns: self.n,
                });
            }
        }
        let refs: Vec<&Row> = rows.iter().collect();
        self.append_rows(&refs);
        Ok(())
    }

    fn append_rows(&mut self, rows: &[&Row]) {
        if rows.is_empty() {
            return;
        }
        let old_m = self.m;
        let new_m = old_m + rows.len();
        // Row-combination of the current inverse for each new row:
        // new inverse rows are [a_B^T B^-1, -e].
        let mut extra: Vec<Vec<f64>> = Vec::with_capacity(rows.len());
        for row in rows {
            let mut combo = vec![0.0; old_m];
            for &(j, a) in &row.coefs {
                if self.state[j] == State::Basic {
                    let p = self.basis_position(j);
                    let src = &self.binv[p * old_m..(p + 1) * old_m];
                    for (c, &b) in combo.iter_mut().zip(src) {
                        *c += a * b;
                    }
                }
            }
            extra.push(combo);
        }
        let mut binv = vec![0.0; new_m * new_m];
        for r in 0..old_m {
            binv[r * new_m..r * new_m + old_m].copy_from_slice(&self.binv[r * old_m..(r + 1) * old_m]);
        }
        for (t, (row, combo)) in rows.iter().zip(extra).enumerate() {
            let r = old_m + t;
            binv[r * new_m..r * new_m + old_m].copy_from_slice(&combo);
            binv[r * new_m + r] = -1.0;
            for &(j, a) in &row.coefs {
                self.cols[j].push((r, a));
            }
            let (lo, up) = row_bounds(row);
            let activity: f64 = row.coefs.iter().map(|&(j, a)| a * self.x[j]).sum();
            self.lower.push(lo);
            self.upper.push(up);
            self.cost.push(0.0);
            self.state.push(State::Basic);
            self.x.push(activity);
            self.basis.push(self.n + r);
        }
        self.binv = binv;
        self.m = new_m;
    }

    fn basis_position(&self, j: usize) -> usize {
        // Linear scan is fine: only used when rows are appended.
        self.basis.iter().position(|&b| b == j).expect("basic variable in basis")
    }

    pub fn set_objective(&mut self, costs: &[f64]) {
        self.cost[..self.n].copy_from_slice(&costs[..self.n]);
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lower[j], self.upper[j])
    }

    /// Changes the bounds of structural `j`. The basis is kept; a basic
    /// variable pushed outside its new bounds is repaired by the next solve.
    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.lower[j] = lower;
        self.upper[j] = upper;
        if self.state[j] != State::Basic {
            self.state[j] = match self.state[j] {
                State::Lower if lower.is_finite() => State::Lower,
                State::Upper if upper.is_finite() => State::Upper,
                _ if lower.is_finite() => State::Lower,
                _ if upper.is_finite() => State::Upper,
                _ => State::Zero,
            };
            self.x[j] = self.nonbasic_value(j);
        }
    }

    pub fn basis(&self) -> Basis {
        Basis {
            states: self.state.clone(),
        }
    }

    /// Reinstalls a basis saved earlier; logicals of rows appended since the
    /// snapshot become basic.
    pub fn restore_basis(&mut self, snapshot: &Basis) {
        let total = self.n + self.m;
        for j in 0..total {
            let st = snapshot.states.get(j).copied().unwrap_or(State::Basic);
            self.state[j] = match st {
                State::Lower if !self.lower[j].is_finite() => State::Zero,
                State::Upper if !self.upper[j].is_finite() => State::Zero,
                s => s,
            };
        }
        self.basis = (0..total).filter(|&j| self.state[j] == State::Basic).collect();
        if self.basis.len() != self.m {
            self.reset_to_slack_basis();
            return;
        }
        for j in 0..total {
            if self.state[j] != State::Basic {
                self.x[j] = self.nonbasic_value(j);
            }
        }
        if self.refactor().is_err() {
            self.reset_to_slack_basis();
        }
    }

    fn reset_to_slack_basis(&mut self) {
        for j in 0..self.n {
            self.state[j] = self.initial_state(j);
            self.x[j] = self.nonbasic_value(j);
        }
        for i in 0..self.m {
            self.state[self.n + i] = State::Basic;
        }
        self.basis = (self.n..self.n + self.m).collect();
        self.binv = vec![0.0; self.m * self.m];
        for i in 0..self.m {
            self.binv[i * self.m + i] = -1.0;
        }
        self.updates = 0;
        self.recompute_basic_values();
    }

    fn column(&self, j: usize) -> ColumnIter<'_> {
        if j < self.n {
            ColumnIter::Structural(self.cols[j].iter())
        } else {
            ColumnIter::Logical(Some(j - self.n))
        }
    }

    /// Rebuilds the inverse from the basic columns by Gauss-Jordan
    /// elimination with partial pivoting.
    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        for (c, &j) in self.basis.iter().enumerate() {
            for (r, v) in self.column(j) {
                a[r * m + c] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        let mut perm: Vec<usize> = (0..m).collect();
        for col in 0..m {
            let mut best = col;
            let mut best_val = a[perm[col] * m + col].abs();
            for r in col + 1..m {
                let v = a[perm[r] * m + col].abs();
                if v > best_val {
                    best = r;
                    best_val = v;
                }
            }
            if best_val < 1e-11 {
                return Err(LpError::SingularBasis);
            }
            perm.swap(col, best);
            let prow = perm[col];
            let pivot = a[prow * m + col];
            for k in 0..m {
                a[prow * m + k] /= pivot;
                inv[prow * m + k] /= pivot;
            }
            for &r in perm.iter() {
                if r == prow {
                    continue;
                }
                let factor = a[r * m + col];
                if factor == 0.0 {
                    continue;
                }
                for k in col..m {
                    a[r * m + k] -= factor * a[prow * m + k];
                }
                for k in 0..m {
                    inv[r * m + k] -= factor * inv[prow * m + k];
                }
            }
        }
        // Row perm[c] of the reduced system holds the pivot for column c,
        // which is basis position c.
        let mut binv = vec![0.0; m * m];
        for c in 0..m {
            let src = perm[c];
            binv[c * m..(c + 1) * m].copy_from_slice(&inv[src * m..(src + 1) * m]);
        }
        self.binv = binv;
        self.updates = 0;
        self.recompute_basic_values();
        Ok(())
    }

    /// `x_B = -B^-1 N x_N`.
    fn recompute_basic_values(&mut self) {
        let m = self.m;
        let mut v = vec![0.0; m];
        for j in 0..self.n + self.m {
            if self.state[j] == State::Basic || self.x[j] == 0.0 {
                continue;
            }
            let xj = self.x[j];
            for (r, a) in self.column(j) {
                v[r] += a * xj;
            }
        }
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            let s: f64 = row.iter().zip(&v).map(|(b, vv)| b * vv).sum();
            self.x[self.basis[i]] = -s;
        }
    }

    /// `B^-1 a_j`.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        for (r, a) in self.column(j) {
            for (i, out) in alpha.iter_mut().enumerate() {
                *out += self.binv[i * m + r] * a;
            }
        }
        alpha
    }

    /// `c_B^T B^-1`.
    fn duals(&self, cb: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (i, &c) in cb.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let row = &self.binv[i * m..(i + 1) * m];
            for (yy, &b) in y.iter_mut().zip(row) {
                *yy += c * b;
            }
        }
        y
    }

    fn dot_column(&self, v: &[f64], j: usize) -> f64 {
        self.column(j).map(|(r, a)| v[r] * a).sum()
    }

    fn pivot(&mut self, entering: usize, p: usize, alpha: &[f64]) {
        let m = self.m;
        let ap = alpha[p];
        let (head, tail) = self.binv.split_at_mut(p * m);
        let (prow, rest) = tail.split_at_mut(m);
        for v in prow.iter_mut() {
            *v /= ap;
        }
        for (i, &ai) in alpha.iter().enumerate() {
            if i == p || ai == 0.0 {
                continue;
            }
            let row = if i < p {
                &mut head[i * m..(i + 1) * m]
            } else {
                let off = (i - p - 1) * m;
                &mut rest[off..off + m]
            };
            for (v, &pv) in row.iter_mut().zip(prow.iter()) {
                *v -= ai * pv;
            }
        }
        let leaving = self.basis[p];
        debug_assert_ne!(self.state[leaving], State::Basic);
        self.basis[p] = entering;
        self.state[entering] = State::Basic;
        self.updates += 1;
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let v = self.x[j];
        (self.lower[j] - v).max(v - self.upper[j]).max(0.0)
    }

    fn max_infeasibility(&self) -> f64 {
        self.basis.iter().map(|&j| self.infeasibility(j)).fold(0.0, f64::max)
    }

    fn primal_infeasible(&self) -> bool {
        self.basis.iter().any(|&j| self.infeasibility(j) > self.primal_tol)
    }

    fn note_step(&mut self, step: f64) {
        if step.abs() < 1e-11 {
            self.degenerate_run += 1;
            if self.degenerate_run >= DEGENERATE_LIMIT {
                self.bland = true;
            }
        } else {
            self.degenerate_run = 0;
            self.bland = false;
        }
    }

    fn tick(&mut self, budget_start: usize) -> bool {
        self.iterations += 1;
        self.iterations - budget_start > self.limit
    }

    fn primal(&mut self, budget_start: usize) -> PrimalOutcome {
        let total = self.n + self.m;
        let mut unbounded_retries = 0;
        loop {
            if self.updates >= REFACTOR_INTERVAL && self.refactor().is_err() {
                self.reset_to_slack_basis();
            }
            let mut phase1 = false;
            let mut cb = vec![0.0; self.m];
            for (i, &j) in self.basis.iter().enumerate() {
                if self.x[j] < self.lower[j] - self.primal_tol {
                    cb[i] = -1.0;
                    phase1 = true;
                } else if self.x[j] > self.upper[j] + self.primal_tol {
                    cb[i] = 1.0;
                    phase1 = true;
                }
            }
            if !phase1 {
                for (i, &j) in self.basis.iter().enumerate() {
                    cb[i] = self.cost[j];
                }
            }
            let y = self.duals(&cb);

            // Pricing: Dantzig, or lowest index under Bland's rule.
            let mut entering: Option<(usize, f64)> = None;
            let mut best_score = 0.0;
            for j in 0..total {
                if self.state[j] == State::Basic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let cj = if phase1 { 0.0 } else { self.cost[j] };
                let d = cj - self.dot_column(&y, j);
                let dir = match self.state[j] {
                    State::Lower if d < -DUAL_TOL => 1.0,
                    State::Upper if d > DUAL_TOL => -1.0,
                    State::Zero if d.abs() > DUAL_TOL => -d.signum(),
                    _ => continue,
                };
                if self.bland {
                    entering = Some((j, dir));
                    break;
                }
                if d.abs() > best_score {
                    best_score = d.abs();
                    entering = Some((j, dir));
                }
            }
            let Some((q, dir)) = entering else {
                if phase1 && self.primal_tol < FEAS_TOL && self.max_infeasibility() <= FEAS_TOL {
                    // Residual rounding error that phase 1 cannot reduce.
                    self.primal_tol = FEAS_TOL;
                    continue;
                }
                return if phase1 {
                    PrimalOutcome::Infeasible
                } else {
                    PrimalOutcome::Optimal
                };
            };
            if self.tick(budget_start) {
                return PrimalOutcome::IterationLimit;
            }
            let alpha = self.ftran(q);
            let flip = self.upper[q] - self.lower[q];

            // Candidates: (position, exact ratio, relaxed ratio, bound, state).
            let mut cands: Vec<(usize, f64, f64, f64, State)> = Vec::new();
            for (i, &ai) in alpha.iter().enumerate() {
                if ai.abs() <= PIVOT_TOL {
                    continue;
                }
                let rate = -dir * ai;
                let j = self.basis[i];
                let v = self.x[j];
                let (bound, to) = if rate < 0.0 {
                    if phase1 && v > self.upper[j] + self.primal_tol {
                        (self.upper[j], State::Upper)
                    } else if v < self.lower[j] - self.primal_tol || !self.lower[j].is_finite() {
                        continue;
                    } else {
                        (self.lower[j], State::Lower)
                    }
                } else if phase1 && v < self.lower[j] - self.primal_tol {
                    (self.lower[j], State::Lower)
                } else if v > self.upper[j] + self.primal_tol || !self.upper[j].is_finite() {
                    continue;
                } else {
                    (self.upper[j], State::Upper)
                };
                let dist = (bound - v).abs();
                let exact = (dist / rate.abs()).max(0.0);
                let relaxed = (dist + self.primal_tol) / rate.abs();
                cands.push((i, exact, relaxed, bound, to));
            }

            let leave = if cands.is_empty() {
                None
            } else if self.bland {
                let min = cands.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
                cands
                    .iter()
                    .filter(|c| c.1 <= min + 1e-12)
                    .min_by_key(|c| self.basis[c.0])
                    .copied()
            } else {
                let theta_max = cands.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
                cands
                    .iter()
                    .filter(|c| c.1 <= theta_max)
                    .max_by(|a, b| alpha[a.0].abs().total_cmp(&alpha[b.0].abs()))
                    .copied()
            };

            match leave {
                Some((p, theta, _, bound, to)) if !(flip <= theta) => {
                    let step = dir * theta;
                    self.x[q] += step;
                    for (i, &ai) in alpha.iter().enumerate() {
                        if ai != 0.0 {
                            let j = self.basis[i];
                            self.x[j] -= step * ai;
                        }
                    }
                    let leaving = self.basis[p];
                    self.x[leaving] = bound;
                    self.state[leaving] = if self.lower[leaving] == self.upper[leaving] {
                        State::Lower
                    } else {
                        to
                    };
                    self.pivot(q, p, &alpha);
                    self.note_step(theta);
                }
                _ if flip.is_finite() => {
                    let step = dir * flip;
                    for (i, &ai) in alpha.iter().enumerate() {
                        if ai != 0.0 {
                            let j = self.basis[i];
                            self.x[j] -= step * ai;
                        }
                    }
                    self.state[q] = if dir > 0.0 { State::Upper } else { State::Lower };
                    self.x[q] = self.nonbasic_value(q);
                    self.note_step(flip);
                }
                _ => {
                    if phase1 && unbounded_retries < 2 {
                        // Cannot happen in exact arithmetic; rebuild and retry.
                        unbounded_retries += 1;
                        if self.refactor().is_err() {
                            self.reset_to_slack_basis();
                        }
                        continue;
                    }
                    return if phase1 {
                        PrimalOutcome::IterationLimit
                    } else {
                        PrimalOutcome::Unbounded
                    };
                }
            }
        }
    }

    fn dual(&mut self, budget_start: usize) -> DualOutcome {
        let total = self.n + self.m;
        loop {
            if self.updates >= REFACTOR_INTERVAL && self.refactor().is_err() {
                self.reset_to_slack_basis();
            }
            let cb: Vec<f64> = self.basis.iter().map(|&j| self.cost[j]).collect();
            let y = self.duals(&cb);
            let mut d = vec![0.0; total];
            for j in 0..total {
                if self.state[j] == State::Basic {
                    continue;
                }
                d[j] = self.cost[j] - self.dot_column(&y, j);
                if self.lower[j] == self.upper[j] {
                    continue;
                }
                let bad = match self.state[j] {
                    State::Lower => d[j] < -DUAL_FEAS_TOL,
                    State::Upper => d[j] > DUAL_FEAS_TOL,
                    State::Zero => d[j].abs() > DUAL_FEAS_TOL,
                    State::Basic => false,
                };
                if bad {
                    return DualOutcome::NotDualFeasible;
                }
            }

            let mut leave: Option<usize> = None;
            let mut worst = self.primal_tol;
            for (i, &j) in self.basis.iter().enumerate() {
                let inf = self.infeasibility(j);
                if inf > self.primal_tol {
                    if self.bland {
                        if leave.is_none_or(|p| j < self.basis[p]) {
                            leave = Some(i);
                        }
                    } else if inf > worst {
                        worst = inf;
                        leave = Some(i);
                    }
                }
            }
            let Some(p) = leave else {
                return DualOutcome::Optimal;
            };
            if self.tick(budget_start) {
                return DualOutcome::IterationLimit;
            }
            let out = self.basis[p];
            let v = self.x[out];
            let increase = v < self.lower[out];
            let (target, to) = if increase {
                (self.lower[out], State::Lower)
            } else {
                (self.upper[out], State::Upper)
            };

            let m = self.m;
            let rho = &self.binv[p * m..(p + 1) * m];
            // Candidates: (var, exact ratio, relaxed ratio, |alpha_pj|).
            let mut cands: Vec<(usize, f64, f64, f64)> = Vec::new();
            for j in 0..total {
                if self.state[j] == State::Basic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let a: f64 = self.column(j).map(|(r, val)| rho[r] * val).sum();
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                // x_out moves by -a per unit increase of x_j.
                let ok = match self.state[j] {
                    State::Lower => (increase && a < 0.0) || (!increase && a > 0.0),
                    State::Upper => (increase && a > 0.0) || (!increase && a < 0.0),
                    State::Zero => true,
                    State::Basic => false,
                };
                if !ok {
                    continue;
                }
                let dj = d[j].abs();
                cands.push((j, dj / a.abs(), (dj + DUAL_TOL) / a.abs(), a.abs()));
            }
            if cands.is_empty() {
                return DualOutcome::Infeasible;
            }
            let chosen = if self.bland {
                let min = cands.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
                cands.iter().filter(|c| c.1 <= min + 1e-12).min_by_key(|c| c.0).copied()
            } else {
                let theta_max = cands.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
                cands
                    .iter()
                    .filter(|c| c.1 <= theta_max)
                    .max_by(|a, b| a.3.total_cmp(&b.3))
                    .copied()
            };
            let (q, dual_step, _, _) = chosen.expect("nonempty candidate list");
            let alpha = self.ftran(q);
            if alpha[p].abs() <= PIVOT_TOL {
                if self.refactor().is_err() {
                    self.reset_to_slack_basis();
                }
                continue;
            }
            let delta = (v - target) / alpha[p];
            self.x[q] += delta;
            for (i, &ai) in alpha.iter().enumerate() {
                if ai != 0.0 {
                    let j = self.basis[i];
                    self.x[j] -= delta * ai;
                }
            }
            self.x[out] = target;
            self.state[out] = if self.lower[out] == self.upper[out] {
                State::Lower
            } else {
                to
            };
            self.pivot(q, p, &alpha);
            self.note_step(dual_step);
        }
    }

    fn dual_feasible(&self) -> bool {
        let cb: Vec<f64> = self.basis.iter().map(|&j| self.cost[j]).collect();
        let y = self.duals(&cb);
        (0..self.n + self.m).all(|j| {
            if self.state[j] == State::Basic || self.lower[j] == self.upper[j] {
                return true;
            }
            let d = self.cost[j] - self.dot_column(&y, j);
            match self.state[j] {
                State::Lower => d >= -DUAL_FEAS_TOL,
                State::Upper => d <= DUAL_FEAS_TOL,
                State::Zero => d.abs() <= DUAL_FEAS_TOL,
                State::Basic => true,
            }
        })
    }

    /// Reoptimises from the current basis.
    pub fn solve(&mut self) -> LpPoint {
        let start = self.iterations;
        self.limit = 100 * (self.n + self.m).max(1);
        self.bland = false;
        self.degenerate_run = 0;
        self.primal_tol = PRIMAL_TOL;
        if self.refactor().is_err() {
            self.reset_to_slack_basis();
        }
        let mut status = Status::IterationLimit;
        for _attempt in 0..4 {
            let use_dual = self.primal_infeasible() && self.dual_feasible();
            let outcome = if use_dual {
                match self.dual(start) {
                    DualOutcome::Optimal => self.primal(start),
                    DualOutcome::Infeasible => PrimalOutcome::Infeasible,
                    DualOutcome::NotDualFeasible => self.primal(start),
                    DualOutcome::IterationLimit => PrimalOutcome::IterationLimit,
                }
            } else {
                self.primal(start)
            };
            status = match outcome {
                PrimalOutcome::Optimal => Status::Optimal,
                PrimalOutcome::Infeasible => Status::Infeasible,
                PrimalOutcome::Unbounded => Status::Unbounded,
                PrimalOutcome::IterationLimit => Status::IterationLimit,
            };
            if status != Status::Optimal {
                break;
            }
            // Confirm with a fresh factorisation before reporting optimality.
            if self.refactor().is_err() {
                self.reset_to_slack_basis();
                continue;
            }
            if !self.primal_infeasible() && self.dual_feasible() {
                break;
            }
            status = Status::IterationLimit;
        }
        let values: Vec<f64> = (0..self.n)
            .map(|j| {
                let v = self.x[j];
                if v < self.lower[j] && v > self.lower[j] - 1e-9 {
                    self.lower[j]
                } else if v > self.upper[j] && v < self.upper[j] + 1e-9 {
                    self.upper[j]
                } else {
                    v
                }
            })
            .collect();
        let objective = values.iter().zip(&self.cost).map(|(x, c)| x * c).sum();
        LpPoint {
            values,
            objective,
            status,
            iterations: self.iterations - start,
        }
    }
}

enum ColumnIter<'a> {
    Structural(std::slice::Iter<'a, (usize, f64)>),
    Logical(Option<usize>),
}

impl Iterator for ColumnIter<'_> {
    type Item = (usize, f64);

    fn next(&mut self) -> Option<(usize, f64)> {
        match self {
            ColumnIter::Structural(it) => it.next().copied(),
            ColumnIter::Logical(r) => r.take().map(|r| (r, -1.0)),
        }
    }
}
