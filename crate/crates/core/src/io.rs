//! Instance files and JSON solve reports.
//!
//! Instance files are line based, `#` starts a comment, vertices and edges
//! are 1-based:
//!
//! ```text
//! SECTION Graph
//! Nodes 4
//! Edges 3
//! E 1 2 1
//! E 2 3 10
//! E 3 4 1
//! END
//! SECTION Scenario
//! Probability 1
//! Terminals 1 4
//! SE 1 11
//! SE 2 1
//! SE 3 11
//! END
//! SECTION Root
//! Root 1
//! END
//! ```
//!
//! A scenario may give `Root v` as its designated root. Edges without an
//! `SE` line inherit the first-stage cost. Numbers are integers, decimals or
//! fractions `a/b`.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::instance::{validate, Graph, Rational, Scenario, StochasticInstance};
use crate::lp::Status;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError {
        line,
        message: message.into(),
    })
}

/// Parses `123`, `-4`, `0.25` or `3/4` exactly.
pub fn parse_rational(text: &str) -> Option<Rational> {
    if let Some((n, d)) = text.split_once('/') {
        let n: BigInt = n.parse().ok()?;
        let d: BigInt = d.parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(Rational::new(n, d));
    }
    if let Some((int, frac)) = text.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let negative = int.starts_with('-');
        let int_digits = int.trim_start_matches(['-', '+']);
        if !int_digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let digits: BigInt = format!("{int_digits}{frac}").parse().ok()?;
        let scale = num_traits::pow(BigInt::from(10), frac.len());
        let value = Rational::new(digits, scale);
        return Some(if negative { -value } else { value });
    }
    text.parse::<BigInt>().ok().map(Rational::from_integer)
}

/// Integer, terminating decimal, or `p/q`: always parses back exactly.
pub fn format_rational(value: &Rational) -> String {
    if value.is_integer() {
        return value.numer().to_string();
    }
    let mut d = value.denom().clone();
    let (two, five) = (BigInt::from(2), BigInt::from(5));
    let mut twos = 0usize;
    let mut fives = 0usize;
    while (&d % &two).is_zero() {
        d /= &two;
        twos += 1;
    }
    while (&d % &five).is_zero() {
        d /= &five;
        fives += 1;
    }
    if !d.is_one() {
        return format!("{}/{}", value.numer(), value.denom());
    }
    let places = twos.max(fives);
    let scaled = value.abs() * Rational::from_integer(num_traits::pow(BigInt::from(10), places));
    let digits = format!("{:0>width$}", scaled.to_integer(), width = places + 1);
    let (int, frac) = digits.split_at(digits.len() - places);
    let sign = if value.is_negative() { "-" } else { "" };
    format!("{sign}{int}.{frac}")
}

#[derive(Default)]
struct ScenarioDraft {
    line: usize,
    probability: Option<Rational>,
    root: Option<usize>,
    terminals: Option<Vec<usize>>,
    costs: BTreeMap<usize, Rational>,
}

enum Section {
    None,
    Graph,
    Scenario(ScenarioDraft),
    Root,
}

fn parse_vertex(token: &str, n: usize, line: usize) -> Result<usize, ParseError> {
    match token.parse::<usize>() {
        Ok(v) if v >= 1 && v <= n => Ok(v - 1),
        Ok(v) => err(line, format!("vertex {v} out of range 1..{n}")),
        Err(_) => err(line, format!("expected a vertex number, found {token:?}")),
    }
}

fn parse_number(token: &str, line: usize) -> Result<Rational, ParseError> {
    parse_rational(token).map_or_else(|| err(line, format!("expected a number, found {token:?}")), Ok)
}

/// Parses and validates an instance.
pub fn parse_instance(text: &str) -> Result<StochasticInstance, ParseError> {
    let mut section = Section::None;
    let mut nodes: Option<usize> = None;
    let mut declared_edges: Option<usize> = None;
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut first_costs: Vec<Rational> = Vec::new();
    let mut drafts: Vec<ScenarioDraft> = Vec::new();
    let mut root: Option<usize> = None;
    let mut saw_graph = false;
    let mut last_line = 1;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        let keyword = tokens[0];
        let args = &tokens[1..];
        let one_arg = || -> Result<&str, ParseError> {
            match args {
                [a] => Ok(a),
                _ => err(line, format!("{keyword} takes exactly one value")),
            }
        };
        match (&mut section, keyword) {
            (Section::None, "SECTION") => {
                section = match args {
                    ["Graph"] if !saw_graph => {
                        saw_graph = true;
                        Section::Graph
                    }
                    ["Graph"] => return err(line, "duplicate Graph section"),
                    ["Scenario"] if saw_graph => Section::Scenario(ScenarioDraft {
                        line,
                        ..Default::default()
                    }),
                    ["Root"] if saw_graph => Section::Root,
                    ["Scenario"] | ["Root"] => return err(line, "Graph section must come first"),
                    _ => return err(line, format!("unknown section {:?}", args.join(" "))),
                };
            }
            (Section::None, _) => return err(line, format!("unexpected {keyword:?} outside a section")),
            (_, "SECTION") => return err(line, "missing END before new section"),
            (_, "END") => {
                if !args.is_empty() {
                    return err(line, "END takes no values");
                }
                match std::mem::replace(&mut section, Section::None) {
                    Section::Graph => {
                        if nodes.is_none() {
                            return err(line, "Graph section lacks Nodes");
                        }
                        if let Some(m) = declared_edges {
                            if m != edges.len() {
                                return err(line, format!("declared {m} edges, found {}", edges.len()));
                            }
                        }
                    }
                    Section::Scenario(draft) => {
                        if draft.probability.is_none() {
                            return err(line, "scenario lacks Probability");
                        }
                        if draft.terminals.is_none() {
                            return err(line, "scenario lacks Terminals");
                        }
                        drafts.push(draft);
                    }
                    Section::Root | Section::None => {}
                }
            }
            (Section::Graph, "Nodes") => {
                let v = one_arg()?;
                match v.parse::<usize>() {
                    Ok(n) if n > 0 => nodes = Some(n),
                    _ => return err(line, format!("invalid node count {v:?}")),
                }
            }
            (Section::Graph, "Edges") => {
                let v = one_arg()?;
                match v.parse::<usize>() {
                    Ok(m) => declared_edges = Some(m),
                    _ => return err(line, format!("invalid edge count {v:?}")),
                }
            }
            (Section::Graph, "E") => {
                let Some(n) = nodes else {
                    return err(line, "Nodes must precede edges");
                };
                let [i, j, c] = args else {
                    return err(line, "edge lines read `E i j cost`");
                };
                let (i, j) = (parse_vertex(i, n, line)?, parse_vertex(j, n, line)?);
                let c = parse_number(c, line)?;
                if c.is_negative() {
                    return err(line, "negative first-stage cost");
                }
                edges.push((i, j));
                first_costs.push(c);
            }
            (Section::Scenario(d), "Probability") => {
                let p = parse_number(one_arg()?, line)?;
                if !p.is_positive() || p > Rational::one() {
                    return err(line, format!("probability {} outside (0,1]", format_rational(&p)));
                }
                d.probability = Some(p);
            }
            (Section::Scenario(d), "Root") => {
                d.root = Some(parse_vertex(one_arg()?, nodes.unwrap_or(0), line)?);
            }
            (Section::Scenario(d), "Terminals") => {
                let n = nodes.unwrap_or(0);
                let ts = args.iter().map(|t| parse_vertex(t, n, line)).collect::<Result<Vec<_>, _>>()?;
                if ts.is_empty() {
                    return err(line, "empty terminal list");
                }
                d.terminals = Some(ts);
            }
            (Section::Scenario(d), "SE") => {
                let [e, c] = args else {
                    return err(line, "scenario cost lines read `SE edge cost`");
                };
                let e = match e.parse::<usize>() {
                    Ok(e) if e >= 1 && e <= edges.len() => e - 1,
                    _ => return err(line, format!("scenario cost references nonexistent edge {e}")),
                };
                let c = parse_number(c, line)?;
                if c.is_negative() {
                    return err(line, "negative scenario cost");
                }
                d.costs.insert(e, c);
            }
            (Section::Root, "Root") => {
                root = Some(parse_vertex(one_arg()?, nodes.unwrap_or(0), line)?);
            }
            (_, other) => return err(line, format!("unexpected keyword {other:?}")),
        }
    }
    if !matches!(section, Section::None) {
        return err(last_line, "missing END");
    }
    let Some(n) = nodes else {
        return err(last_line, "missing Graph section");
    };
    if drafts.is_empty() {
        return err(last_line, "no scenarios");
    }
    let scenarios = drafts
        .into_iter()
        .map(|d| {
            let costs = (0..edges.len())
                .map(|e| d.costs.get(&e).cloned().unwrap_or_else(|| first_costs[e].clone()))
                .collect();
            let mut sc = Scenario::new(
                d.probability.expect("checked at END"),
                costs,
                d.terminals.expect("checked at END"),
            );
            if let Some(r) = d.root {
                sc = sc.with_root_hint(r);
            }
            (d.line, sc)
        })
        .collect::<Vec<_>>();
    let first_scenario_line = scenarios[0].0;
    let instance = StochasticInstance {
        graph: Graph::new(n, edges),
        first_stage_costs: first_costs,
        scenarios: scenarios.into_iter().map(|(_, sc)| sc).collect(),
        global_root: root,
    };
    if let Some(v) = validate(&instance).first() {
        let line = match v.field() {
            "graph.edges" | "first_stage_costs" => 1,
            _ => first_scenario_line,
        };
        return err(line, v.to_string());
    }
    Ok(instance)
}

/// Writes an instance so that [`parse_instance`] restores it exactly.
pub fn write_instance(instance: &StochasticInstance) -> String {
    let g = &instance.graph;
    let mut out = String::from("SECTION Graph\n");
    out.push_str(&format!("Nodes {}\nEdges {}\n", g.vertex_count(), g.edge_count()));
    for (e, &(i, j)) in g.edges().iter().enumerate() {
        let c = format_rational(&instance.first_stage_costs[e]);
        out.push_str(&format!("E {} {} {c}\n", i + 1, j + 1));
    }
    out.push_str("END\n");
    for sc in &instance.scenarios {
        out.push_str("SECTION Scenario\n");
        out.push_str(&format!("Probability {}\n", format_rational(&sc.probability)));
        if let Some(r) = sc.root_hint {
            out.push_str(&format!("Root {}\n", r + 1));
        }
        let ts: Vec<String> = sc.terminals.iter().map(|t| (t + 1).to_string()).collect();
        out.push_str(&format!("Terminals {}\n", ts.join(" ")));
        for (e, c) in sc.edge_costs.iter().enumerate() {
            out.push_str(&format!("SE {} {}\n", e + 1, format_rational(c)));
        }
        out.push_str("END\n");
    }
    if let Some(r) = instance.global_root {
        out.push_str(&format!("SECTION Root\nRoot {}\nEND\n", r + 1));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundType {
    LpRelaxation,
    IntegerOptimum,
    /// Integer in the second stage, first stage relaxed to `[0, 1]`.
    FirstStageRelaxed,
}

impl BoundType {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundType::LpRelaxation => "lp_relaxation",
            BoundType::IntegerOptimum => "integer_optimum",
            BoundType::FirstStageRelaxed => "first_stage_relaxed",
        }
    }
}

/// Everything a solve produced, ready for [`write_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub formulation: String,
    pub bound_type: BoundType,
    pub status: Status,
    pub objective: Option<f64>,
    /// Nonzero variable values in model order.
    pub values: Vec<(String, f64)>,
    pub cuts: BTreeMap<String, usize>,
    pub rounds: usize,
    pub lp_iterations: usize,
    pub nodes: usize,
    /// Only reported on request, since it breaks byte-identical output.
    pub wall_time_ms: Option<f64>,
}

/// Snaps values within 1e-9 of an integer so reports stay stable.
pub(crate) fn clean(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        r + 0.0
    } else {
        x
    }
}

/// Serialises a report as pretty JSON with a fixed key order.
pub fn write_report(report: &SolveReport) -> String {
    let mut doc = Map::new();
    doc.insert("schema".into(), json!(1));
    doc.insert("formulation".into(), json!(report.formulation));
    doc.insert("bound_type".into(), json!(report.bound_type.as_str()));
    doc.insert("status".into(), json!(report.status.as_str()));
    let solved = report.status == Status::Optimal;
    doc.insert(
        "objective".into(),
        match report.objective {
            Some(v) if solved => json!(clean(v)),
            _ => Value::Null,
        },
    );
    let mut values = Map::new();
    if solved {
        for (name, v) in &report.values {
            values.insert(name.clone(), json!(clean(*v)));
        }
    }
    doc.insert("values".into(), Value::Object(values));
    let cuts: Map<String, Value> = report.cuts.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
    doc.insert("cuts".into(), Value::Object(cuts));
    doc.insert("rounds".into(), json!(report.rounds));
    doc.insert("lp_iterations".into(), json!(report.lp_iterations));
    doc.insert("nodes".into(), json!(report.nodes));
    if let Some(ms) = report.wall_time_ms {
        doc.insert("wall_time_ms".into(), json!(ms));
    }
    let mut text = serde_json::to_string_pretty(&Value::Object(doc)).expect("JSON values are finite");
    text.push('\n');
    text
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{rational, ratio};
    use proptest::prelude::*;

    const PATH: &str = "\
# small path
SECTION Graph
Nodes 4
Edges 3
E 1 2 1
E 2 3 10
E 3 4 1
END
SECTION Scenario
Probability 1
Terminals 1 4
SE 1 11
SE 3 11   # trailing comment
SE 2 1
END
";

    #[test]
    fn parses_path() {
        let inst = parse_instance(PATH).unwrap();
        assert_eq!(inst.graph.vertex_count(), 4);
        assert_eq!(inst.graph.edge_count(), 3);
        assert_eq!(inst.scenarios[0].terminals, vec![0, 3]);
        assert_eq!(inst.scenarios[0].edge_costs[1], rational(1));
        assert_eq!(inst.global_root, None);
    }

    #[test]
    fn omitted_scenario_cost_inherits_first_stage() {
        let text = PATH.replace("SE 2 1\n", "");
        let inst = parse_instance(&text).unwrap();
        assert_eq!(inst.scenarios[0].edge_costs[1], rational(10));
    }

    #[test]
    fn empty_input_fails_at_line_one() {
        let e = parse_instance("").unwrap_err();
        assert_eq!(e.line, 1);
    }

    #[test]
    fn error_lines() {
        let bad_edge = PATH.replace("SE 2 1", "SE 7 1");
        let e = parse_instance(&bad_edge).unwrap_err();
        assert_eq!(e.line, 14);
        assert!(e.message.contains("nonexistent edge 7"));

        let bad_p = PATH.replace("Probability 1", "Probability 1.5");
        assert_eq!(parse_instance(&bad_p).unwrap_err().line, 10);

        let unknown = PATH.replace("SECTION Scenario", "SECTION Weather");
        assert!(parse_instance(&unknown).unwrap_err().message.contains("unknown section"));

        let two = PATH.replace("Probability 1", "Probability 0.5") + &PATH[PATH.find("SECTION Scenario").unwrap()..].replace("Probability 1", "Probability 0.4");
        let e = parse_instance(&two).unwrap_err();
        assert_eq!(e.message, "probabilities sum to 0.9");
    }

    #[test]
    fn numbers() {
        assert_eq!(parse_rational("0.25"), Some(ratio(1, 4)));
        assert_eq!(parse_rational("-1.5"), Some(ratio(-3, 2)));
        assert_eq!(parse_rational("2/6"), Some(ratio(1, 3)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("1."), None);
        assert_eq!(format_rational(&ratio(1, 3)), "1/3");
        assert_eq!(format_rational(&ratio(1, 8)), "0.125");
        assert_eq!(format_rational(&ratio(-1, 20)), "-0.05");
        assert_eq!(format_rational(&rational(7)), "7");
    }

    #[test]
    fn report_layout() {
        let mut report = SolveReport {
            formulation: "uc".into(),
            bound_type: BoundType::LpRelaxation,
            status: Status::Optimal,
            objective: Some(1.5),
            values: vec![("x0[2]".into(), 0.5), ("x0[10]".into(), 1.0)],
            cuts: BTreeMap::from([("UCUT".into(), 3)]),
            rounds: 2,
            lp_iterations: 7,
            nodes: 0,
            wall_time_ms: None,
        };
        let text = write_report(&report);
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["schema"], 1);
        assert_eq!(v["bound_type"], "lp_relaxation");
        assert!(text.find("x0[2]").unwrap() < text.find("x0[10]").unwrap());
        assert!(!text.contains("wall_time"));
        report.status = Status::Infeasible;
        let v: Value = serde_json::from_str(&write_report(&report)).unwrap();
        assert_eq!(v["status"], "infeasible");
        assert!(v["objective"].is_null());
        assert!(v["values"].as_object().unwrap().is_empty());
    }

    fn arb_rational() -> impl Strategy<Value = Rational> {
        (0i64..200, prop::sample::select(vec![1i64, 2, 3, 4, 7, 10])).prop_map(|(n, d)| ratio(n, d))
    }

    fn arb_instance() -> impl Strategy<Value = StochasticInstance> {
        (2usize..6, 1usize..4, any::<bool>()).prop_flat_map(|(n, k, rooted)| {
            let all: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
            (
                prop::sample::subsequence(all.clone(), 1..=all.len()),
                Just(n),
                Just(k),
                Just(rooted),
                prop::collection::vec(1u32..5, k),
            )
                .prop_flat_map(|(edges, n, k, rooted, weights)| {
                    let m = edges.len();
                    (
                        Just(edges),
                        Just(n),
                        Just(rooted),
                        Just(weights),
                        prop::collection::vec(arb_rational(), m),
                        prop::collection::vec(prop::collection::vec(arb_rational(), m), k),
                        prop::collection::vec(prop::collection::vec(any::<bool>(), n), k),
                    )
                })
                .prop_map(|(edges, n, rooted, weights, c0, ck, masks)| {
                    let total: u32 = weights.iter().sum();
                    let scenarios = ck
                        .into_iter()
                        .zip(&weights)
                        .zip(masks)
                        .map(|((costs, &w), mask)| {
                            let mut ts: Vec<usize> = (0..n).filter(|&v| mask[v]).collect();
                            if rooted || ts.is_empty() {
                                ts.push(0);
                            }
                            Scenario::new(ratio(w as i64, total as i64), costs, ts)
                        })
                        .collect();
                    StochasticInstance {
                        graph: Graph::new(n, edges),
                        first_stage_costs: c0,
                        scenarios,
                        global_root: rooted.then_some(0),
                    }
                })
        })
    }

    proptest! {
        #[test]
        fn round_trip(inst in arb_instance()) {
            let text = write_instance(&inst);
            let back = parse_instance(&text).unwrap();
            prop_assert_eq!(back, inst);
        }
    }
}
