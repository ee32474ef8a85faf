//! Sparse LP models, a bounded revised simplex and branch-and-cut.
//!
//! Models are always minimised. Rows can be appended while a [`Solver`] is
//! alive, which is how the cutting-plane loop grows a formulation without
//! discarding the current basis.

mod mip;
mod simplex;

use std::fmt;

use thiserror::Error;

pub use mip::{run_cut_loop, solve_mip, CutLoopOutcome, MipOptions, MipResult};
pub use simplex::Solver;

/// Row feasibility tolerance.
pub const FEAS_TOL: f64 = 1e-7;
/// Distance from an integer below which a value counts as integral.
pub const INT_TOL: f64 = 1e-6;
/// Tolerance for comparing objective values.
pub const OBJ_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Ge,
    Le,
    Eq,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Ge => ">=",
            Sense::Le => "<=",
            Sense::Eq => "=",
        })
    }
}

/// Sparse linear row `Σ coef·x  sense  rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coefs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    pub fn new(coefs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> Self {
        Self { coefs, sense, rhs }
    }

    pub fn ge(coefs: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self::new(coefs, Sense::Ge, rhs)
    }

    pub fn le(coefs: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self::new(coefs, Sense::Le, rhs)
    }

    pub fn eq(coefs: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self::new(coefs, Sense::Eq, rhs)
    }

    pub fn activity(&self, values: &[f64]) -> f64 {
        self.coefs.iter().map(|&(j, a)| a * values[j]).sum()
    }

    /// Amount by which `values` violates the row; `<= 0` when satisfied.
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        match self.sense {
            Sense::Ge => self.rhs - lhs,
            Sense::Le => lhs - self.rhs,
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }

    /// Sums duplicate column entries and drops zeros, sorted by column.
    pub fn normalized(mut self) -> Self {
        self.coefs.sort_by_key(|&(j, _)| j);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(self.coefs.len());
        for (j, a) in self.coefs {
            match merged.last_mut() {
                Some(last) if last.0 == j => last.1 += a,
                _ => merged.push((j, a)),
            }
        }
        merged.retain(|&(_, a)| a.abs() > 1e-12);
        self.coefs = merged;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub objective: f64,
    pub integer: bool,
}

impl Variable {
    pub fn continuous(name: impl Into<String>, lower: f64, upper: f64, objective: f64) -> Self {
        Self {
            name: name.into(),
            lower,
            upper,
            objective,
            integer: false,
        }
    }

    pub fn binary(name: impl Into<String>, objective: f64) -> Self {
        Self {
            name: name.into(),
            lower: 0.0,
            upper: 1.0,
            objective,
            integer: true,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("row references column {column}, but the model has {columns} variables")]
    BadColumn { column: usize, columns: usize },
    #[error("variable {name} has lower bound {lower} above upper bound {upper}")]
    BadBounds { name: String, lower: f64, upper: f64 },
    #[error("basis matrix is singular")]
    SingularBasis,
}

/// Minimisation model with bounded variables and sparse rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LpModel {
    pub variables: Vec<Variable>,
    pub rows: Vec<Row>,
}

impl LpModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(&mut self, var: Variable) -> usize {
        self.variables.push(var);
        self.variables.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Appends a row after checking its column indices. Duplicate rows are
    /// accepted.
    pub fn add_row(&mut self, row: Row) -> Result<(), LpError> {
        self.check_row(&row)?;
        self.rows.push(row);
        Ok(())
    }

    pub fn check_row(&self, row: &Row) -> Result<(), LpError> {
        let columns = self.variables.len();
        match row.coefs.iter().find(|&&(j, _)| j >= columns) {
            Some(&(column, _)) => Err(LpError::BadColumn { column, columns }),
            None => Ok(()),
        }
    }

    pub fn check(&self) -> Result<(), LpError> {
        for v in &self.variables {
            if !(v.lower <= v.upper) {
                return Err(LpError::BadBounds {
                    name: v.name.clone(),
                    lower: v.lower,
                    upper: v.upper,
                });
            }
        }
        self.rows.iter().try_for_each(|r| self.check_row(r))
    }

    pub fn objective(&self) -> Vec<f64> {
        self.variables.iter().map(|v| v.objective).collect()
    }

    pub fn set_objective(&mut self, costs: &[f64]) {
        for (v, &c) in self.variables.iter_mut().zip(costs) {
            v.objective = c;
        }
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.variables.iter().zip(values).map(|(v, x)| v.objective * x).sum()
    }

    /// Largest row or bound violation of `values`.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let rows = self.rows.iter().map(|r| r.violation(values));
        let bounds = self
            .variables
            .iter()
            .zip(values)
            .map(|(v, &x)| (v.lower - x).max(x - v.upper));
        rows.chain(bounds).fold(0.0, f64::max)
    }

    /// Indices of variables flagged integer.
    pub fn integer_mask(&self) -> Vec<usize> {
        (0..self.variables.len()).filter(|&j| self.variables[j].integer).collect()
    }

    /// Writes the model in CPLEX LP text format.
    pub fn to_lp_format(&self) -> String {
        let mut out = String::from("\\ generated by sstp\nMinimize\n obj:");
        let term = |out: &mut String, coef: f64, name: &str| {
            let sign = if coef < 0.0 { '-' } else { '+' };
            out.push_str(&format!(" {sign} {} {}", coef.abs(), name));
        };
        let mut any = false;
        for v in &self.variables {
            if v.objective != 0.0 {
                term(&mut out, v.objective, &lp_name(&v.name));
                any = true;
            }
        }
        if !any {
            out.push_str(" 0");
        }
        out.push_str("\nSubject To\n");
        for (i, row) in self.rows.iter().enumerate() {
            out.push_str(&format!(" r{}:", i + 1));
            if row.coefs.is_empty() {
                out.push_str(" 0");
            }
            for &(j, a) in &row.coefs {
                term(&mut out, a, &lp_name(&self.variables[j].name));
            }
            out.push_str(&format!(" {} {}\n", row.sense, row.rhs));
        }
        out.push_str("Bounds\n");
        for v in &self.variables {
            let name = lp_name(&v.name);
            match (v.lower.is_finite(), v.upper.is_finite()) {
                (true, true) => out.push_str(&format!(" {} <= {name} <= {}\n", v.lower, v.upper)),
                (true, false) => out.push_str(&format!(" {name} >= {}\n", v.lower)),
                (false, true) => out.push_str(&format!(" -inf <= {name} <= {}\n", v.upper)),
                (false, false) => out.push_str(&format!(" {name} free\n")),
            }
        }
        let ints: Vec<String> = self
            .variables
            .iter()
            .filter(|v| v.integer)
            .map(|v| lp_name(&v.name))
            .collect();
        if !ints.is_empty() {
            out.push_str("General\n");
            for chunk in ints.chunks(8) {
                out.push_str(&format!(" {}\n", chunk.join(" ")));
            }
        }
        out.push_str("End\n");
        out
    }
}

/// LP-format identifiers may not contain brackets or commas.
fn lp_name(name: &str) -> String {
    name.chars()
        .map(|c| match c {
            '[' | ',' => '_',
            ']' => ' ',
            c => c,
        })
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join("")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Optimal => "optimal",
            Status::Infeasible => "infeasible",
            Status::Unbounded => "unbounded",
            Status::IterationLimit => "iteration_limit",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Result of an LP or MIP solve.
#[derive(Debug, Clone, PartialEq)]
pub struct LpPoint {
    pub values: Vec<f64>,
    pub objective: f64,
    pub status: Status,
    /// Simplex pivots (including bound flips) spent on this result.
    pub iterations: usize,
}

impl LpPoint {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}

/// Solves the continuous relaxation; integrality flags are ignored.
pub fn solve_lp(model: &LpModel) -> Result<LpPoint, LpError> {
    let mut solver = Solver::new(model)?;
    Ok(solver.solve())
}

/// Source of rows that a solution must satisfy, typically an exact
/// separation routine for an exponentially large constraint family.
pub trait CutOracle {
    /// Rows violated by `values`. An empty result certifies that none exist.
    fn separate(&mut self, values: &[f64]) -> Vec<Row>;
}
