//! The ten integer programming models. Each builder returns a [`ModelSpec`]:
//! the LP model with its static rows, a catalog locating every variable
//! block, and the exponential cut families that separation must supply.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::instance::{select_scenario_roots, Bidirection, StochasticInstance};
use crate::lp::{LpModel, Row, Variable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FormulationId {
    Uc,
    Uf,
    Sdc1,
    Sdc2,
    Sdc2Star,
    Sdf,
    Dc1,
    Dc2,
    Dc2Star,
    Df,
}

impl FormulationId {
    pub const ALL: [FormulationId; 10] = [
        FormulationId::Uc,
        FormulationId::Uf,
        FormulationId::Sdc1,
        FormulationId::Sdc2,
        FormulationId::Sdc2Star,
        FormulationId::Sdf,
        FormulationId::Dc1,
        FormulationId::Dc2,
        FormulationId::Dc2Star,
        FormulationId::Df,
    ];
    pub const UNROOTED: [FormulationId; 6] = [
        FormulationId::Uc,
        FormulationId::Uf,
        FormulationId::Sdc1,
        FormulationId::Sdc2,
        FormulationId::Sdc2Star,
        FormulationId::Sdf,
    ];
    pub const ROOTED: [FormulationId; 4] = [
        FormulationId::Dc1,
        FormulationId::Dc2,
        FormulationId::Dc2Star,
        FormulationId::Df,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FormulationId::Uc => "uc",
            FormulationId::Uf => "uf",
            FormulationId::Sdc1 => "sdc1",
            FormulationId::Sdc2 => "sdc2",
            FormulationId::Sdc2Star => "sdc2star",
            FormulationId::Sdf => "sdf",
            FormulationId::Dc1 => "dc1",
            FormulationId::Dc2 => "dc2",
            FormulationId::Dc2Star => "dc2star",
            FormulationId::Df => "df",
        }
    }

    /// Formulations of the rooted problem; they need a global root.
    pub fn is_rooted(self) -> bool {
        matches!(
            self,
            FormulationId::Dc1 | FormulationId::Dc2 | FormulationId::Dc2Star | FormulationId::Df
        )
    }

    /// Compact flow models have no exponential families.
    pub fn is_flow(self) -> bool {
        matches!(self, FormulationId::Uf | FormulationId::Sdf | FormulationId::Df)
    }
}

impl fmt::Display for FormulationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FormulationId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FormulationId::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| format!("unknown formulation {s:?}"))
    }
}

/// How the objective of the linked models (sdc2, sdf, dc2, df) is written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ObjectiveForm {
    /// First-stage cost plus scenario costs with the corrective `-x^0` term.
    Printed,
    /// First-stage coefficient `c^0 - c*`, scenario sums without correction.
    Rewritten,
}

impl FromStr for ObjectiveForm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "printed" => Ok(ObjectiveForm::Printed),
            "rewritten" => Ok(ObjectiveForm::Rewritten),
            _ => Err(format!("unknown objective form {s:?}")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormulationError {
    #[error("formulation {0} needs a rooted instance (global root)")]
    MissingRoot(FormulationId),
    #[error("formulation {0} has no arc variables")]
    NoArcVariables(FormulationId),
}

/// Edge costs per stage in floating point, the input to every objective.
#[derive(Debug, Clone, PartialEq)]
pub struct StageCosts {
    pub first: Vec<f64>,
    pub scenarios: Vec<Vec<f64>>,
    pub probabilities: Vec<f64>,
}

impl StageCosts {
    pub fn of(instance: &StochasticInstance) -> Self {
        Self {
            first: instance.first_stage_costs_f64(),
            scenarios: (0..instance.scenario_count())
                .map(|k| instance.scenario_costs_f64(k))
                .collect(),
            probabilities: instance.probabilities_f64(),
        }
    }

    /// `c*_e`.
    pub fn expected(&self) -> Vec<f64> {
        (0..self.first.len())
            .map(|e| {
                self.scenarios
                    .iter()
                    .zip(&self.probabilities)
                    .map(|(c, p)| p * c[e])
                    .sum()
            })
            .collect()
    }
}

/// Where each symbol of a formulation lives in the LP column space. Blocks
/// a formulation does not use are empty.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VariableCatalog {
    /// `x0[e]`.
    pub x0: Vec<usize>,
    /// `xk[k][e]`.
    pub xk: Vec<Vec<usize>>,
    /// `z0[a]`.
    pub z0: Vec<usize>,
    /// `zk[k][a]`.
    pub zk: Vec<Vec<usize>>,
    /// `yk[k][a]`.
    pub yk: Vec<Vec<usize>>,
    /// `w0[v]` for `v != r`.
    pub w0: Vec<Option<usize>>,
    /// `f0[v][a]`, keyed by target vertex.
    pub f0: Vec<(usize, Vec<usize>)>,
    /// `f[k][t][a]`, keyed by terminal per scenario.
    pub f: Vec<Vec<(usize, Vec<usize>)>>,
}

impl VariableCatalog {
    /// First-stage decision variables (`x0`, `z0`, `w0`).
    pub fn first_stage(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.x0.iter().chain(&self.z0).copied().collect();
        out.extend(self.w0.iter().flatten());
        out.sort_unstable();
        out
    }

    /// Per scenario and arc, the variables whose sum is the scenario's
    /// second-stage arc selection in the valid inequalities.
    fn second_stage_arcs(&self, id: FormulationId) -> Option<Vec<Vec<Vec<usize>>>> {
        let wrap = |blocks: &Vec<Vec<usize>>| -> Vec<Vec<Vec<usize>>> {
            blocks
                .iter()
                .map(|b| b.iter().map(|&j| vec![j]).collect())
                .collect()
        };
        match id {
            FormulationId::Uc | FormulationId::Uf => None,
            FormulationId::Sdc1 => Some(wrap(&self.zk)),
            FormulationId::Dc1 => Some(
                self.zk
                    .iter()
                    .map(|b| b.iter().zip(&self.z0).map(|(&z, &z0)| vec![z0, z]).collect())
                    .collect(),
            ),
            _ => Some(wrap(&self.yk)),
        }
    }
}

/// Which exponential family a cut belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CutFamily {
    /// `(x^0 + x^k)(δ(S)) >= 1`.
    Undirected,
    /// Directed cuts whose arc capacity mixes first- and second-stage
    /// variables (sdc1, dc1).
    SemiDirected,
    /// `y^k(δ^-(S)) >= 1`.
    Directed,
    /// `z^0(δ^-(S)) >= z^0(δ^-(v))`.
    FirstStageTree,
}

impl CutFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            CutFamily::Undirected => "UCUT",
            CutFamily::SemiDirected => "SEMI_CUT",
            CutFamily::Directed => "DIR_CUT",
            CutFamily::FirstStageTree => "TREE_CUT",
        }
    }
}

impl fmt::Display for CutFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A scenario cut family `Σ_{a ∈ δ^-(S)} Σ terms[k][a] >= 1` for every
/// scenario `k` and every `S` containing a terminal of `T^k_r` but not `r^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioCuts {
    pub family: CutFamily,
    pub terms: Vec<Vec<Vec<usize>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub formulation: FormulationId,
    pub objective_form: ObjectiveForm,
    pub model: LpModel,
    pub catalog: VariableCatalog,
    pub scenario_cuts: Option<ScenarioCuts>,
    /// `z0` columns per arc when first-stage tree cuts are registered.
    pub tree_cuts: Option<Vec<usize>>,
    pub bidirection: Bidirection,
    /// `r^k` per scenario.
    pub roots: Vec<usize>,
    pub global_root: Option<usize>,
    /// `T^k_r` per scenario.
    pub terminals: Vec<Vec<usize>>,
}

impl ModelSpec {
    /// Objective coefficients of this formulation for the given costs.
    pub fn objective_for(&self, costs: &StageCosts) -> Vec<f64> {
        objective_vector(
            self.objective_form,
            &self.catalog,
            &self.bidirection,
            costs,
            self.model.num_vars(),
        )
    }

    /// Integer columns when the first stage is relaxed to `[0, 1]`.
    pub fn second_stage_integer_mask(&self) -> Vec<usize> {
        let first = self.catalog.first_stage();
        self.model
            .integer_mask()
            .into_iter()
            .filter(|j| first.binary_search(j).is_err())
            .collect()
    }

    pub fn families(&self) -> Vec<CutFamily> {
        let mut out = Vec::new();
        if self.tree_cuts.is_some() {
            out.push(CutFamily::FirstStageTree);
        }
        if let Some(sc) = &self.scenario_cuts {
            out.push(sc.family);
        }
        out
    }
}

fn objective_vector(
    form: ObjectiveForm,
    cat: &VariableCatalog,
    bid: &Bidirection,
    costs: &StageCosts,
    columns: usize,
) -> Vec<f64> {
    let mut obj = vec![0.0; columns];
    let edge_of = |a: usize| bid.arc_to_edge(a);
    for (e, &j) in cat.x0.iter().enumerate() {
        obj[j] += costs.first[e];
    }
    for (a, &j) in cat.z0.iter().enumerate() {
        obj[j] += costs.first[edge_of(a)];
    }
    for (k, block) in cat.xk.iter().enumerate() {
        for (e, &j) in block.iter().enumerate() {
            obj[j] += costs.probabilities[k] * costs.scenarios[k][e];
        }
    }
    for (k, block) in cat.zk.iter().enumerate() {
        for (a, &j) in block.iter().enumerate() {
            obj[j] += costs.probabilities[k] * costs.scenarios[k][edge_of(a)];
        }
    }
    for (k, block) in cat.yk.iter().enumerate() {
        for (a, &j) in block.iter().enumerate() {
            obj[j] += costs.probabilities[k] * costs.scenarios[k][edge_of(a)];
        }
    }
    let linked = !cat.yk.is_empty();
    if linked {
        // Correction for first-stage selections that the y^k re-select.
        let first: Vec<(usize, usize)> = if cat.x0.is_empty() {
            cat.z0.iter().enumerate().map(|(a, &j)| (edge_of(a), j)).collect()
        } else {
            cat.x0.iter().enumerate().map(|(e, &j)| (e, j)).collect()
        };
        match form {
            ObjectiveForm::Printed => {
                for k in 0..costs.scenarios.len() {
                    for &(e, j) in &first {
                        obj[j] -= costs.probabilities[k] * costs.scenarios[k][e];
                    }
                }
            }
            ObjectiveForm::Rewritten => {
                let expected = costs.expected();
                for &(e, j) in &first {
                    obj[j] = costs.first[e] - expected[e];
                }
            }
        }
    }
    obj
}

struct Builder<'a> {
    instance: &'a StochasticInstance,
    bid: Bidirection,
    model: LpModel,
    catalog: VariableCatalog,
    roots: Vec<usize>,
    terminals: Vec<Vec<usize>>,
}

impl<'a> Builder<'a> {
    fn new(instance: &'a StochasticInstance, roots: Vec<usize>) -> Self {
        let terminals = instance.derived_costs(&roots).terminals_minus_root;
        Self {
            instance,
            bid: instance.graph.bidirection(),
            model: LpModel::new(),
            catalog: VariableCatalog::default(),
            roots,
            terminals,
        }
    }

    fn m(&self) -> usize {
        self.instance.graph.edge_count()
    }

    fn k(&self) -> usize {
        self.instance.scenario_count()
    }

    fn binaries(&mut self, count: usize, name: impl Fn(usize) -> String) -> Vec<usize> {
        (0..count)
            .map(|i| self.model.add_variable(Variable::binary(name(i), 0.0)))
            .collect()
    }

    fn flows(&mut self, name: impl Fn(usize) -> String) -> Vec<usize> {
        (0..self.bid.arc_count())
            .map(|a| self.model.add_variable(Variable::continuous(name(a), 0.0, 1.0, 0.0)))
            .collect()
    }

    fn row(&mut self, row: Row) {
        self.model.add_row(row.normalized()).expect("builder rows use known columns");
    }

    fn add_x0(&mut self) {
        self.catalog.x0 = self.binaries(self.m(), |e| format!("x0[{}]", e + 1));
    }

    fn add_z0(&mut self) {
        self.catalog.z0 = self.binaries(self.bid.arc_count(), |a| format!("z0[{}]", a + 1));
    }

    fn add_scenario_blocks(&mut self, kind: &str, per_arc: bool) -> Vec<Vec<usize>> {
        let count = if per_arc { self.bid.arc_count() } else { self.m() };
        (0..self.k())
            .map(|k| self.binaries(count, |i| format!("{kind}[{}][{}]", k + 1, i + 1)))
            .collect()
    }

    /// Conventional unit flow from `source` to `sink`: in - out = -1 at the
    /// source, +1 at the sink. `scale` replaces the constant 1 by a column.
    fn conservation(&mut self, flow: &[usize], source: usize, sink: usize, scale: Option<usize>) {
        for i in 0..self.instance.graph.vertex_count() {
            let mut coefs: Vec<(usize, f64)> = Vec::new();
            for &a in self.bid.incoming(i) {
                coefs.push((flow[a], 1.0));
            }
            for &a in self.bid.outgoing(i) {
                coefs.push((flow[a], -1.0));
            }
            let demand = if i == source {
                -1.0
            } else if i == sink {
                1.0
            } else {
                0.0
            };
            match scale {
                Some(w) if demand != 0.0 => {
                    coefs.push((w, -demand));
                    self.row(Row::eq(coefs, 0.0));
                }
                _ => self.row(Row::eq(coefs, demand)),
            }
        }
    }

    /// Scenario flows `f[k][t][a]` with conservation; returns the blocks.
    fn scenario_flows(&mut self) {
        for k in 0..self.k() {
            let mut per_k = Vec::new();
            for t in self.terminals[k].clone() {
                let flow = self.flows(|a| format!("f[{}][{}][{}]", k + 1, t + 1, a + 1));
                self.conservation(&flow, self.roots[k], t, None);
                per_k.push((t, flow));
            }
            self.catalog.f.push(per_k);
        }
    }

    fn linking_rows(&mut self) {
        for k in 0..self.k() {
            for e in 0..self.m() {
                let (fa, ba) = (self.bid.forward(e), self.bid.backward(e));
                let y = &self.catalog.yk[k];
                let row = Row::ge(vec![(y[fa], 1.0), (y[ba], 1.0), (self.catalog.x0[e], -1.0)], 0.0);
                self.row(row);
            }
        }
    }

    fn sec2_rows(&mut self, blocks: Vec<Vec<usize>>) {
        for block in blocks {
            for e in 0..self.m() {
                let (fa, ba) = (self.bid.forward(e), self.bid.backward(e));
                self.row(Row::le(vec![(block[fa], 1.0), (block[ba], 1.0)], 1.0));
            }
        }
    }

    fn z0_indegree_rows(&mut self, root: usize) {
        for v in 0..self.instance.graph.vertex_count() {
            if v == root {
                continue;
            }
            let coefs: Vec<(usize, f64)> = self
                .bid
                .incoming(v)
                .iter()
                .map(|&a| (self.catalog.z0[a], 1.0))
                .collect();
            self.row(Row::le(coefs, 1.0));
        }
    }

    fn finish(
        self,
        id: FormulationId,
        form: ObjectiveForm,
        scenario_cuts: Option<ScenarioCuts>,
        tree_cuts: Option<Vec<usize>>,
    ) -> ModelSpec {
        let mut spec = ModelSpec {
            formulation: id,
            objective_form: form,
            model: self.model,
            catalog: self.catalog,
            scenario_cuts,
            tree_cuts,
            bidirection: self.bid,
            roots: self.roots,
            global_root: self.instance.global_root,
            terminals: self.terminals,
        };
        let obj = spec.objective_for(&StageCosts::of(self.instance));
        spec.model.set_objective(&obj);
        spec
    }
}

fn rooted_builder(
    instance: &StochasticInstance,
    id: FormulationId,
) -> Result<(Builder<'_>, usize), FormulationError> {
    let root = instance.global_root.ok_or(FormulationError::MissingRoot(id))?;
    let roots = vec![root; instance.scenario_count()];
    Ok((Builder::new(instance, roots), root))
}

/// Undirected cut model: binaries `x^0`, `x^k`; cuts attached as a family.
pub fn build_uc(instance: &StochasticInstance) -> ModelSpec {
    let mut b = Builder::new(instance, select_scenario_roots(instance));
    b.add_x0();
    b.catalog.xk = b.add_scenario_blocks("xk", false);
    let terms = (0..b.k())
        .map(|k| {
            (0..b.bid.arc_count())
                .map(|a| {
                    let e = b.bid.arc_to_edge(a);
                    vec![b.catalog.x0[e], b.catalog.xk[k][e]]
                })
                .collect()
        })
        .collect();
    let cuts = ScenarioCuts {
        family: CutFamily::Undirected,
        terms,
    };
    b.finish(FormulationId::Uc, ObjectiveForm::Printed, Some(cuts), None)
}

/// Undirected flow model. Its objective is the undirected cut model's: the
/// `x^k` carry only second-stage edges, so no correction is subtracted.
pub fn build_uf(instance: &StochasticInstance) -> ModelSpec {
    let mut b = Builder::new(instance, select_scenario_roots(instance));
    b.add_x0();
    b.catalog.xk = b.add_scenario_blocks("xk", false);
    b.scenario_flows();
    for k in 0..b.k() {
        for (_, flow) in b.catalog.f[k].clone() {
            for a in 0..b.bid.arc_count() {
                let e = b.bid.arc_to_edge(a);
                let row = Row::ge(
                    vec![(b.catalog.x0[e], 1.0), (b.catalog.xk[k][e], 1.0), (flow[a], -1.0)],
                    0.0,
                );
                b.row(row);
            }
        }
    }
    b.finish(FormulationId::Uf, ObjectiveForm::Printed, None, None)
}

/// Semi-directed cut model with undirected `x^0` and scenario arcs `z^k`.
pub fn build_sdc1(instance: &StochasticInstance) -> ModelSpec {
    let mut b = Builder::new(instance, select_scenario_roots(instance));
    b.add_x0();
    b.catalog.zk = b.add_scenario_blocks("zk", true);
    b.sec2_rows(b.catalog.zk.clone());
    let terms = (0..b.k())
        .map(|k| {
            (0..b.bid.arc_count())
                .map(|a| vec![b.catalog.x0[b.bid.arc_to_edge(a)], b.catalog.zk[k][a]])
                .collect()
        })
        .collect();
    let cuts = ScenarioCuts {
        family: CutFamily::SemiDirected,
        terms,
    };
    b.finish(FormulationId::Sdc1, ObjectiveForm::Printed, Some(cuts), None)
}

fn directed_terms(yk: &[Vec<usize>]) -> Vec<Vec<Vec<usize>>> {
    yk.iter()
        .map(|block| block.iter().map(|&j| vec![j]).collect())
        .collect()
}

/// Semi-directed cut model whose scenario arcs `y^k` contain the first
/// stage; `rewrite_objective` selects the `c^0 - c*` form.
pub fn build_sdc2(instance: &StochasticInstance, rewrite_objective: bool) -> ModelSpec {
    let mut b = Builder::new(instance, select_scenario_roots(instance));
    b.add_x0();
    b.catalog.yk = b.add_scenario_blocks("yk", true);
    b.linking_rows();
    b.sec2_rows(b.catalog.yk.clone());
    let cuts = ScenarioCuts {
        family: CutFamily::Directed,
        terms: directed_terms(&b.catalog.yk),
    };
    let (id, form) = if rewrite_objective {
        (FormulationId::Sdc2Star, ObjectiveForm::Rewritten)
    } else {
        (FormulationId::Sdc2, ObjectiveForm::Printed)
    };
    b.finish(id, form, Some(cuts), None)
}

/// Semi-directed flow model.
pub fn build_sdf(instance: &StochasticInstance) -> ModelSpec {
    build_sdf_with(instance, ObjectiveForm::Printed)
}

fn build_sdf_with(instance: &StochasticInstance, form: ObjectiveForm) -> ModelSpec {
    let mut b = Builder::new(instance, select_scenario_roots(instance));
    b.add_x0();
    b.catalog.yk = b.add_scenario_blocks("yk", true);
    b.scenario_flows();
    for k in 0..b.k() {
        for (_, flow) in b.catalog.f[k].clone() {
            for a in 0..b.bid.arc_count() {
                b.row(Row::ge(vec![(b.catalog.yk[k][a], 1.0), (flow[a], -1.0)], 0.0));
            }
        }
    }
    b.linking_rows();
    b.finish(FormulationId::Sdf, form, None, None)
}

/// Directed cut model with first-stage arcs `z^0` and additional scenario
/// arcs `z^k`.
pub fn build_dc1(instance: &StochasticInstance) -> Result<ModelSpec, FormulationError> {
    let (mut b, root) = rooted_builder(instance, FormulationId::Dc1)?;
    b.add_z0();
    b.catalog.zk = b.add_scenario_blocks("zk", true);
    for k in 0..b.k() {
        for a in 0..b.bid.arc_count() {
            b.row(Row::le(vec![(b.catalog.z0[a], 1.0), (b.catalog.zk[k][a], 1.0)], 1.0));
        }
    }
    b.z0_indegree_rows(root);
    let terms = (0..b.k())
        .map(|k| {
            (0..b.bid.arc_count())
                .map(|a| vec![b.catalog.z0[a], b.catalog.zk[k][a]])
                .collect()
        })
        .collect();
    let cuts = ScenarioCuts {
        family: CutFamily::SemiDirected,
        terms,
    };
    let tree = Some(b.catalog.z0.clone());
    Ok(b.finish(FormulationId::Dc1, ObjectiveForm::Printed, Some(cuts), tree))
}

/// Directed cut model with `y^k >= z^0`; `rewrite_objective` selects the
/// `c^0 - c*` form.
pub fn build_dc2(
    instance: &StochasticInstance,
    rewrite_objective: bool,
) -> Result<ModelSpec, FormulationError> {
    let id = if rewrite_objective {
        FormulationId::Dc2Star
    } else {
        FormulationId::Dc2
    };
    let (mut b, root) = rooted_builder(instance, id)?;
    b.add_z0();
    b.catalog.yk = b.add_scenario_blocks("yk", true);
    for k in 0..b.k() {
        for a in 0..b.bid.arc_count() {
            b.row(Row::ge(vec![(b.catalog.yk[k][a], 1.0), (b.catalog.z0[a], -1.0)], 0.0));
        }
    }
    b.z0_indegree_rows(root);
    let cuts = ScenarioCuts {
        family: CutFamily::Directed,
        terms: directed_terms(&b.catalog.yk),
    };
    let tree = Some(b.catalog.z0.clone());
    let form = if rewrite_objective {
        ObjectiveForm::Rewritten
    } else {
        ObjectiveForm::Printed
    };
    Ok(b.finish(id, form, Some(cuts), tree))
}

/// Directed flow model with node variables `w^0` and first-stage flows.
pub fn build_df(instance: &StochasticInstance) -> Result<ModelSpec, FormulationError> {
    build_df_with(instance, ObjectiveForm::Printed)
}

fn build_df_with(
    instance: &StochasticInstance,
    form: ObjectiveForm,
) -> Result<ModelSpec, FormulationError> {
    let (mut b, root) = rooted_builder(instance, FormulationId::Df)?;
    b.add_z0();
    b.catalog.yk = b.add_scenario_blocks("yk", true);
    let n = instance.graph.vertex_count();
    b.catalog.w0 = vec![None; n];
    for v in (0..n).filter(|&v| v != root) {
        let w = b.model.add_variable(Variable::binary(format!("w0[{}]", v + 1), 0.0));
        b.catalog.w0[v] = Some(w);
    }
    for v in (0..n).filter(|&v| v != root) {
        let flow = b.flows(|a| format!("f0[{}][{}]", v + 1, a + 1));
        let w = b.catalog.w0[v].expect("node variable");
        for a in 0..b.bid.arc_count() {
            b.row(Row::ge(vec![(b.catalog.z0[a], 1.0), (flow[a], -1.0)], 0.0));
        }
        let mut coefs = vec![(w, 1.0)];
        coefs.extend(b.bid.incoming(v).iter().map(|&a| (b.catalog.z0[a], -1.0)));
        b.row(Row::ge(coefs, 0.0));
        b.conservation(&flow, root, v, Some(w));
        b.catalog.f0.push((v, flow));
    }
    for k in 0..b.k() {
        for a in 0..b.bid.arc_count() {
            b.row(Row::ge(vec![(b.catalog.yk[k][a], 1.0), (b.catalog.z0[a], -1.0)], 0.0));
        }
    }
    b.scenario_flows();
    for k in 0..b.k() {
        for (_, flow) in b.catalog.f[k].clone() {
            for a in 0..b.bid.arc_count() {
                b.row(Row::ge(vec![(b.catalog.yk[k][a], 1.0), (flow[a], -1.0)], 0.0));
            }
        }
    }
    Ok(b.finish(FormulationId::Df, form, None, None))
}

/// Builds any formulation. `objective` applies to the linked models
/// (sdc2, sdf, dc2, df); the starred ids always use the rewritten form.
pub fn build(
    id: FormulationId,
    instance: &StochasticInstance,
    objective: ObjectiveForm,
) -> Result<ModelSpec, FormulationError> {
    let rewrite = objective == ObjectiveForm::Rewritten;
    Ok(match id {
        FormulationId::Uc => build_uc(instance),
        FormulationId::Uf => build_uf(instance),
        FormulationId::Sdc1 => build_sdc1(instance),
        FormulationId::Sdc2 => build_sdc2(instance, rewrite),
        FormulationId::Sdc2Star => build_sdc2(instance, true),
        FormulationId::Sdf => build_sdf_with(instance, objective),
        FormulationId::Dc1 => build_dc1(instance)?,
        FormulationId::Dc2 => build_dc2(instance, rewrite)?,
        FormulationId::Dc2Star => build_dc2(instance, true)?,
        FormulationId::Df => build_df_with(instance, objective)?,
    })
    .map(|mut spec: ModelSpec| {
        // Keep the requested id even when the objective flag rewrote sdc2/dc2.
        spec.formulation = id;
        spec
    })
}

fn sum_row(terms: &[Vec<usize>], arcs: &[usize]) -> Vec<(usize, f64)> {
    arcs.iter()
        .flat_map(|&a| terms[a].iter().map(|&j| (j, 1.0)))
        .collect()
}

/// Appends the degree and two-cycle inequalities that hold for some optimal
/// solution of every scenario. For sdc1 the scenario arcs only augment the
/// first stage, so terminal indegree is bounded by one and the root
/// outdegree row is omitted.
pub fn add_valid_inequalities(
    spec: &ModelSpec,
    instance: &StochasticInstance,
) -> Result<ModelSpec, FormulationError> {
    let arcs = spec
        .catalog
        .second_stage_arcs(spec.formulation)
        .ok_or(FormulationError::NoArcVariables(spec.formulation))?;
    let mut out = spec.clone();
    let bid = &spec.bidirection;
    let n = instance.graph.vertex_count();
    let augmenting = spec.formulation == FormulationId::Sdc1;
    let mut rows = Vec::new();
    for (k, terms) in arcs.iter().enumerate() {
        let r = spec.roots[k];
        for e in 0..instance.graph.edge_count() {
            rows.push(Row::le(sum_row(terms, &[bid.forward(e), bid.backward(e)]), 1.0));
        }
        rows.push(Row::eq(sum_row(terms, bid.incoming(r)), 0.0));
        if !augmenting && !spec.terminals[k].is_empty() {
            rows.push(Row::ge(sum_row(terms, bid.outgoing(r)), 1.0));
        }
        for v in (0..n).filter(|&v| v != r) {
            let coefs = sum_row(terms, bid.incoming(v));
            if spec.terminals[k].contains(&v) && !augmenting {
                rows.push(Row::eq(coefs, 1.0));
            } else {
                rows.push(Row::le(coefs, 1.0));
            }
        }
    }
    if let (Some(r), false) = (spec.global_root, spec.catalog.z0.is_empty()) {
        let z0 = &spec.catalog.z0;
        for e in 0..instance.graph.edge_count() {
            rows.push(Row::le(vec![(z0[bid.forward(e)], 1.0), (z0[bid.backward(e)], 1.0)], 1.0));
        }
        rows.push(Row::eq(bid.incoming(r).iter().map(|&a| (z0[a], 1.0)).collect(), 0.0));
        for v in (0..n).filter(|&v| v != r) {
            rows.push(Row::le(bid.incoming(v).iter().map(|&a| (z0[a], 1.0)).collect(), 1.0));
        }
    }
    for row in rows {
        out.model.add_row(row.normalized()).expect("known columns");
    }
    Ok(out)
}

/// Which arc variables receive flow-balance rows in the demonstration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowBalanceScope {
    FirstStage,
    Scenarios,
    Both,
}

/// The directed model used for the flow-balance demonstration (dc2 on
/// rooted instances, sdc2 otherwise) and the same model with
/// `z(δ^+(v)) >= z(δ^-(v))` for every non-terminal `v`. First-stage rows
/// treat only the root as a terminal; scenario rows use `T^k`.
pub fn flow_balance_models(
    instance: &StochasticInstance,
    scope: FlowBalanceScope,
) -> (ModelSpec, ModelSpec) {
    let base = match build_dc2(instance, false) {
        Ok(spec) => spec,
        Err(_) => build_sdc2(instance, false),
    };
    let mut with = base.clone();
    let bid = &base.bidirection;
    let n = instance.graph.vertex_count();
    let balance = |block: &[usize], v: usize| -> Row {
        let mut coefs: Vec<(usize, f64)> = bid.outgoing(v).iter().map(|&a| (block[a], 1.0)).collect();
        coefs.extend(bid.incoming(v).iter().map(|&a| (block[a], -1.0)));
        Row::ge(coefs, 0.0).normalized()
    };
    let first = matches!(scope, FlowBalanceScope::FirstStage | FlowBalanceScope::Both);
    let second = matches!(scope, FlowBalanceScope::Scenarios | FlowBalanceScope::Both);
    if first && !base.catalog.z0.is_empty() {
        let r = base.global_root.expect("dc2 is rooted");
        for v in (0..n).filter(|&v| v != r) {
            with.model.add_row(balance(&base.catalog.z0, v)).expect("known columns");
        }
    }
    if second {
        for (k, block) in base.catalog.yk.iter().enumerate() {
            for v in (0..n).filter(|&v| !instance.scenarios[k].is_terminal(v)) {
                with.model.add_row(balance(block, v)).expect("known columns");
            }
        }
    }
    (base, with)
}

/// Edge sets `(E^0, E^1..E^K)` encoded by an integral point, using the
/// projection rules of each formulation.
pub fn project_to_edge_sets(spec: &ModelSpec, values: &[f64]) -> (Vec<usize>, Vec<Vec<usize>>) {
    let cat = &spec.catalog;
    let bid = &spec.bidirection;
    let on = |j: usize| values[j] > 0.5;
    let m = bid.arc_count() / 2;
    let mut first = vec![false; m];
    for (e, &j) in cat.x0.iter().enumerate() {
        first[e] |= on(j);
    }
    for (a, &j) in cat.z0.iter().enumerate() {
        first[bid.arc_to_edge(a)] |= on(j);
    }
    let mut scenarios = Vec::new();
    let blocks_e: Vec<Vec<bool>> = if !cat.xk.is_empty() {
        cat.xk.iter().map(|b| b.iter().map(|&j| on(j)).collect()).collect()
    } else {
        let arcs = if !cat.zk.is_empty() { &cat.zk } else { &cat.yk };
        arcs.iter()
            .map(|b| {
                let mut sel = vec![false; m];
                for (a, &j) in b.iter().enumerate() {
                    sel[bid.arc_to_edge(a)] |= on(j);
                }
                sel
            })
            .collect()
    };
    for sel in blocks_e {
        scenarios.push((0..m).filter(|&e| sel[e] && !first[e]).collect());
    }
    ((0..m).filter(|&e| first[e]).collect(), scenarios)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{rational, Graph, Scenario};

    fn path() -> StochasticInstance {
        StochasticInstance {
            graph: Graph::new(4, vec![(0, 1), (1, 2), (2, 3)]),
            first_stage_costs: vec![rational(1), rational(10), rational(1)],
            scenarios: vec![Scenario::new(
                rational(1),
                vec![rational(11), rational(1), rational(11)],
                vec![0, 3],
            )],
            global_root: Some(0),
        }
    }

    #[test]
    fn ids_round_trip() {
        for id in FormulationId::ALL {
            assert_eq!(id.as_str().parse::<FormulationId>().unwrap(), id);
        }
        assert!("ucx".parse::<FormulationId>().is_err());
    }

    #[test]
    fn variable_counts() {
        let inst = path();
        let (m, a, k) = (3, 6, 1);
        assert_eq!(build_uc(&inst).model.num_vars(), (k + 1) * m);
        assert_eq!(build_sdc2(&inst, false).model.num_vars(), m + k * a);
        let vr = 3;
        let t_star = 1;
        assert_eq!(build_df(&inst).unwrap().model.num_vars(), a * (k + 1) + vr + a * (vr + t_star));
    }

    #[test]
    fn rooted_models_need_a_root() {
        let inst = path().unrooted();
        assert_eq!(build_dc1(&inst).unwrap_err(), FormulationError::MissingRoot(FormulationId::Dc1));
        assert!(build_df(&inst).is_err());
    }

    #[test]
    fn printed_and_rewritten_objectives_agree() {
        let inst = path();
        let a = build_sdc2(&inst, false).model.objective();
        let b = build_sdc2(&inst, true).model.objective();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        // x0 coefficient is c0 - c*.
        assert!((a[0] - (1.0 - 11.0)).abs() < 1e-12);
    }

    #[test]
    fn valid_inequalities_need_arcs() {
        let inst = path();
        let err = add_valid_inequalities(&build_uc(&inst), &inst).unwrap_err();
        assert_eq!(err.to_string(), "formulation uc has no arc variables");
        let spec = build_dc2(&inst, false).unwrap();
        let more = add_valid_inequalities(&spec, &inst).unwrap();
        assert!(more.model.num_rows() > spec.model.num_rows());
    }

    #[test]
    fn projection_of_linked_arcs() {
        let inst = path().unrooted();
        let spec = build_sdc2(&inst, false);
        let mut v = vec![0.0; spec.model.num_vars()];
        v[spec.catalog.x0[0]] = 1.0;
        v[spec.catalog.x0[2]] = 1.0;
        for e in 0..3 {
            v[spec.catalog.yk[0][spec.bidirection.forward(e)]] = 1.0;
        }
        let (e0, ek) = project_to_edge_sets(&spec, &v);
        assert_eq!(e0, vec![0, 2]);
        assert_eq!(ek, vec![vec![1]]);
    }
}
