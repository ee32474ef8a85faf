//! `sstp`: build, solve and compare formulations of the two-stage stochastic
//! Steiner tree problem.
//!
//! Exit codes: 0 on success, 1 when a solve fails, a hierarchy flag is
//! raised or a reference claim fails, 2 on bad usage or unreadable input.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use sstp_core::experiments::{
    applicable_formulations, compare, generate_random_instance, hierarchy_check, integer_solve, lp_relaxation,
    verify_reference_claims, CostRegime, RandomParams, SolveSummary,
};
use sstp_core::formulations::{add_valid_inequalities, build, FormulationId, ModelSpec, ObjectiveForm};
use sstp_core::instance::StochasticInstance;
use sstp_core::io::{parse_instance, write_instance, write_report, BoundType, SolveReport};

#[derive(Debug, Parser)]
#[command(name = "sstp", version, about = "Two-stage stochastic Steiner tree formulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integer optimum by branch-and-cut.
    Solve(SolveArgs),
    /// LP bound by the cutting-plane loop.
    Relax(SolveArgs),
    /// LP bounds and optima of several formulations side by side.
    Compare(CompareArgs),
    /// Check the numeric claims on the bundled reference instances.
    VerifyPaper,
    /// Write a seeded random instance.
    Gen(GenArgs),
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// Instance file.
    instance: PathBuf,
    /// uc, uf, sdc1, sdc2, sdc2star, sdf, dc1, dc2, dc2star or df.
    /// Defaults to sdc2, or dc2 with --rooted.
    #[arg(long)]
    formulation: Option<FormulationId>,
    /// Solve the rooted problem; the instance must name a root.
    #[arg(long)]
    rooted: bool,
    /// Keep the second stage integer and relax the first stage to [0, 1].
    #[arg(long)]
    relax_first_stage: bool,
    /// Add the degree and two-cycle inequalities.
    #[arg(long)]
    with_valid_inequalities: bool,
    /// Objective of the linked formulations: printed or rewritten.
    #[arg(long, default_value = "printed")]
    objective: ObjectiveForm,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the model in LP text format.
    #[arg(long)]
    dump_lp: Option<PathBuf>,
    /// Include wall time in the report.
    #[arg(long)]
    timing: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TableFormat {
    Tsv,
    Json,
}

#[derive(Debug, Args)]
struct CompareArgs {
    instance: PathBuf,
    /// Comma-separated ids; defaults to every formulation of the instance kind.
    #[arg(long, value_delimiter = ',')]
    formulations: Vec<FormulationId>,
    #[arg(long)]
    rooted: bool,
    #[arg(long, default_value = "printed")]
    objective: ObjectiveForm,
    /// Also check the hierarchy under this many random cost perturbations.
    #[arg(long, default_value_t = 0)]
    perturbations: usize,
    /// Seed of the perturbations.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "tsv")]
    format: TableFormat,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    timing: bool,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 6)]
    vertices: usize,
    #[arg(long, default_value_t = 0.5)]
    edge_prob: f64,
    #[arg(long, default_value_t = 2)]
    scenarios: usize,
    /// unconstrained or below-expected (first-stage cost below c* everywhere).
    #[arg(long, default_value = "unconstrained")]
    regime: CostRegime,
    /// Pick a global root and make it a terminal of every scenario.
    #[arg(long)]
    rooted: bool,
    /// Redraw graphs with more edges than this.
    #[arg(long)]
    max_edges: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Solver(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Solver(e)
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(Failure::Solver),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Reads the instance and strips the root unless rooted mode is requested.
fn load(path: &Path, rooted: bool) -> Result<StochasticInstance, Failure> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let inst = parse_instance(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    if rooted {
        if !inst.is_rooted() {
            return Err(usage(format!("{} has no root section; drop --rooted", path.display())));
        }
        Ok(inst)
    } else {
        Ok(inst.unrooted())
    }
}

fn prepare(args: &SolveArgs) -> Result<(ModelSpec, StochasticInstance), Failure> {
    let rooted = args.rooted || args.formulation.is_some_and(FormulationId::is_rooted);
    let id = args
        .formulation
        .unwrap_or(if rooted { FormulationId::Dc2 } else { FormulationId::Sdc2 });
    if rooted && !id.is_rooted() {
        return Err(usage(format!("{id} is an unrooted formulation; drop --rooted")));
    }
    let inst = load(&args.instance, rooted)?;
    let mut spec = build(id, &inst, args.objective).map_err(|e| usage(e.to_string()))?;
    if args.with_valid_inequalities {
        spec = add_valid_inequalities(&spec, &inst).map_err(|e| usage(e.to_string()))?;
    }
    Ok((spec, inst))
}

fn report(spec: &ModelSpec, summary: &SolveSummary, bound_type: BoundType, timing: bool) -> SolveReport {
    let point = &summary.point;
    SolveReport {
        formulation: spec.formulation.to_string(),
        bound_type,
        status: point.status,
        objective: point.is_optimal().then_some(point.objective),
        values: spec
            .model
            .variables
            .iter()
            .zip(&point.values)
            .filter(|(_, v)| v.abs() > 1e-9)
            .map(|(var, &v)| (var.name.clone(), v))
            .collect(),
        cuts: summary
            .cuts
            .iter()
            .map(|(family, &n)| (family.to_string(), n))
            .collect::<BTreeMap<_, _>>(),
        rounds: summary.rounds,
        lp_iterations: point.iterations,
        nodes: summary.nodes,
        wall_time_ms: timing.then(|| summary.elapsed.as_secs_f64() * 1e3),
    }
}

fn run_solve(args: &SolveArgs, integer: bool) -> Result<(), Failure> {
    let (spec, _) = prepare(args)?;
    if let Some(path) = &args.dump_lp {
        fs::write(path, spec.model.to_lp_format()).with_context(|| format!("writing {}", path.display()))?;
    }
    let (summary, bound_type) = if args.relax_first_stage {
        (integer_solve(&spec, true), BoundType::FirstStageRelaxed)
    } else if integer {
        (integer_solve(&spec, false), BoundType::IntegerOptimum)
    } else {
        (lp_relaxation(&spec), BoundType::LpRelaxation)
    };
    let summary = summary.map_err(|e| anyhow!(e))?;
    emit(args.out.as_deref(), &write_report(&report(&spec, &summary, bound_type, args.timing)))?;
    if summary.point.is_optimal() {
        Ok(())
    } else {
        Err(Failure::Solver(anyhow!("solver stopped with status {}", summary.point.status)))
    }
}

fn run_compare(args: &CompareArgs) -> Result<(), Failure> {
    let rooted = args.rooted || args.formulations.iter().any(|id| id.is_rooted());
    let inst = load(&args.instance, rooted)?;
    let ids = if args.formulations.is_empty() {
        applicable_formulations(&inst)
    } else {
        args.formulations.clone()
    };
    if let Some(bad) = ids.iter().find(|id| id.is_rooted() != rooted) {
        return Err(usage(format!("{bad} cannot be compared in {} mode", if rooted { "rooted" } else { "unrooted" })));
    }
    let start = Instant::now();
    let mut table = compare(&inst, &ids, args.objective).map_err(|e| anyhow!(e))?;
    if args.perturbations > 0 {
        let flags = hierarchy_check(&inst, args.perturbations, args.seed).map_err(|e| anyhow!(e))?;
        table.flags.extend(flags.into_iter().filter(|f| f.objective > 0));
    }
    let mut text = match args.format {
        TableFormat::Tsv => table.to_tsv(args.timing),
        TableFormat::Json => table.to_json(args.timing),
    };
    if args.timing && matches!(args.format, TableFormat::Tsv) {
        text.push_str(&format!("total_ms\t{:.3}\n", start.elapsed().as_secs_f64() * 1e3));
    }
    emit(args.out.as_deref(), &text)?;
    if table.has_violation() {
        Err(Failure::Solver(anyhow!("{} hierarchy flag(s) raised", table.flags.len())))
    } else {
        Ok(())
    }
}

fn run_verify() -> Result<(), Failure> {
    let claims = verify_reference_claims();
    for c in &claims {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let failed = claims.iter().filter(|c| !c.passed).count();
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::Solver(anyhow!("{failed} claim(s) failed")))
    }
}

fn run_gen(args: &GenArgs) -> Result<(), Failure> {
    let n = args.vertices;
    if !(2..=16).contains(&n) {
        return Err(usage("--vertices must lie in [2, 16]"));
    }
    if !(args.edge_prob > 0.0 && args.edge_prob <= 1.0) {
        return Err(usage("--edge-prob must lie in (0, 1]"));
    }
    if args.scenarios == 0 {
        return Err(usage("--scenarios must be positive"));
    }
    let mut params = RandomParams::new(n, args.edge_prob, args.scenarios)
        .regime(args.regime)
        .rooted(args.rooted);
    if let Some(cap) = args.max_edges {
        if cap + 1 < n || (args.edge_prob >= 1.0 && cap < n * (n - 1) / 2) {
            return Err(usage("--max-edges cannot be met with these settings"));
        }
        params = params.max_edges(cap);
    }
    emit(args.out.as_deref(), &write_instance(&generate_random_instance(args.seed, &params)))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Solve(args) => run_solve(args, true),
        Command::Relax(args) => run_solve(args, false),
        Command::Compare(args) => run_compare(args),
        Command::VerifyPaper => run_verify(),
        Command::Gen(args) => run_gen(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Solver(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
