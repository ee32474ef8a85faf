use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> String {
    let mut p = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    p.push("../core/fixtures");
    p.push(name);
    p.to_string_lossy().into_owned()
}

fn sstp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sstp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn objective(out: &Output) -> f64 {
    let text = stdout(out);
    let line = text
        .lines()
        .find(|l| l.trim_start().starts_with("\"objective\""))
        .unwrap_or_else(|| panic!("no objective in {text}"));
    line.split(':').nth(1).unwrap().trim().trim_end_matches(',').parse().unwrap()
}

#[test]
fn solve_path_with_sdc2() {
    let out = sstp(&["solve", "--formulation", "sdc2", &fixture("path.sstp")]);
    assert_eq!(out.status.code(), Some(0));
    assert!((objective(&out) - 3.0).abs() < 1e-6);
    assert!(stdout(&out).contains("\"bound_type\": \"integer_optimum\""));
}

#[test]
fn rooted_solve_defaults_to_dc2() {
    let out = sstp(&["solve", "--rooted", &fixture("path.rsstp")]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("\"formulation\": \"dc2\""));
    assert!((objective(&out) - 12.0).abs() < 1e-6);
}

#[test]
fn relax_dc1_with_relaxed_first_stage() {
    let out = sstp(&["relax", "--formulation", "dc1", "--relax-first-stage", &fixture("gap.rsstp")]);
    assert_eq!(out.status.code(), Some(0));
    assert!((objective(&out) - 4.5).abs() < 1e-6);
}

#[test]
fn relax_triangle_lp_bound() {
    let out = sstp(&["relax", "--formulation", "uc", &fixture("triangle.sstp")]);
    assert!((objective(&out) - 1.5).abs() < 1e-6);
    assert!(stdout(&out).contains("\"lp_relaxation\""));
}

#[test]
fn valid_inequalities_and_rewritten_objective() {
    let out = sstp(&[
        "solve",
        "--formulation",
        "sdc2",
        "--with-valid-inequalities",
        "--objective",
        "rewritten",
        &fixture("two_scenarios.sstp"),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!((objective(&out) - 12.0).abs() < 1e-6);
}

#[test]
fn verify_paper_passes() {
    let out = sstp(&["verify-paper"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.lines().count() >= 9);
    assert!(text.lines().all(|l| l.starts_with("PASS ")), "{text}");
}

#[test]
fn compare_emits_table() {
    let out = sstp(&["compare", &fixture("triangle.sstp"), "--perturbations", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.starts_with("formulation\tlp_bound\tip_value\tcuts\trounds\n"));
    assert_eq!(text.lines().count(), 7);
    let json = sstp(&["compare", &fixture("gap.rsstp"), "--rooted", "--format", "json"]);
    assert_eq!(json.status.code(), Some(0));
    assert!(stdout(&json).contains("\"violation\": false"));
}

#[test]
fn output_is_byte_identical() {
    let args = ["solve", "--formulation", "sdf", &fixture("two_scenarios.sstp")];
    assert_eq!(sstp(&args).stdout, sstp(&args).stdout);
    let gen = ["gen", "--seed", "9", "--rooted", "--scenarios", "3"];
    assert_eq!(sstp(&gen).stdout, sstp(&gen).stdout);
}

#[test]
fn gen_matches_golden_instance() {
    let out = sstp(&["gen", "--seed", "1", "--vertices", "6", "--edge-prob", "0.5", "--scenarios", "2"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), std::fs::read_to_string(fixture("random_seed1.sstp")).unwrap());
}

#[test]
fn out_and_dump_lp_write_files() {
    let dir = std::env::temp_dir().join(format!("sstp-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let report = dir.join("report.json");
    let lp = dir.join("model.lp");
    let out = sstp(&[
        "solve",
        "--formulation",
        "uc",
        "--out",
        report.to_str().unwrap(),
        "--dump-lp",
        lp.to_str().unwrap(),
        &fixture("path.sstp"),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    assert!(std::fs::read_to_string(&report).unwrap().contains("\"objective\": 3"));
    assert!(std::fs::read_to_string(&lp).unwrap().contains("x0_1"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn timing_is_opt_in() {
    let plain = sstp(&["solve", &fixture("path.sstp")]);
    assert!(!stdout(&plain).contains("wall_time_ms"));
    let timed = sstp(&["solve", "--timing", &fixture("path.sstp")]);
    assert!(stdout(&timed).contains("wall_time_ms"));
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        vec!["solve"],
        vec!["solve", "--formulation", "nope", "x.sstp"],
        vec!["solve", "/nonexistent/file.sstp"],
        vec!["solve", "--rooted", "--formulation", "sdc2", "x"],
        vec!["frobnicate"],
    ] {
        assert_eq!(sstp(&args).status.code(), Some(2), "{args:?}");
    }
    let path = fixture("path.sstp");
    assert_eq!(sstp(&["solve", "--rooted", &path]).status.code(), Some(2));
    assert_eq!(
        sstp(&["solve", "--formulation", "uf", "--with-valid-inequalities", &path]).status.code(),
        Some(2)
    );
    assert_eq!(sstp(&["gen", "--edge-prob", "0"]).status.code(), Some(2));
}

#[test]
fn help_exits_0() {
    assert_eq!(sstp(&["--help"]).status.code(), Some(0));
}
