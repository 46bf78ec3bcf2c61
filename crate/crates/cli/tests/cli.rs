use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pohozaev"))
}

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str], config: &Path) -> Output {
    bin().args(args).arg("--config").arg(config).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

const BALL_CONSTANT: &str =
    r#"{"dimension": 3, "domain": {"type": "ball", "radius": 1}, "problem": {"type": "scalar", "f": "1"}}"#;

#[test]
fn solve_constant_source_on_the_ball() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.json", BALL_CONSTANT);
    let out_dir = dir.path().join("run");
    let out = run(&["solve", "--format", "json", "--out", out_dir.to_str().unwrap()], &cfg);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    // u = (1 - r^2)/6 for n = 3.
    let printed = stdout_json(&out);
    assert!((printed["alpha"].as_f64().unwrap() - 1.0 / 6.0).abs() < 1e-8);
    let saved: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(saved, printed);
    let csv = fs::read_to_string(out_dir.join("solution.csv")).unwrap();
    assert!(csv.starts_with("r,u,du"));
}

#[test]
fn solve_rectangle_writes_nodal_csv() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "c.json",
        r#"{"dimension": 2, "domain": {"type": "rectangle", "half_widths": [1, 1]},
            "problem": {"type": "scalar", "f": "1"}, "solver": {"grid": {"points_per_side": 33}}}"#,
    );
    let out = run(&["solve", "--out", dir.path().to_str().unwrap()], &cfg);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("solution.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| !l.is_empty()).count(), 1 + 33 * 33);
}

#[test]
fn malformed_json_is_a_config_error_with_position() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.json", "{\"dimension\": 3,\n  \"domain\": }");
    let out = run(&["solve", "--out", dir.path().to_str().unwrap()], &cfg);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "{err}");
    assert!(!dir.path().join("report.json").exists());
}

#[test]
fn unknown_keys_and_bad_expressions_are_rejected() {
    let dir = TempDir::new().unwrap();
    let unknown = write(
        &dir,
        "u.json",
        r#"{"dimension": 3, "domain": {"type": "ball", "radius": 1}, "problem": {"type": "scalar", "f": "1"}, "tol": 1}"#,
    );
    assert_eq!(code(&run(&["check"], &unknown)), 2);
    let bad = write(
        &dir,
        "b.json",
        r#"{"dimension": 3, "domain": {"type": "ball", "radius": 1}, "problem": {"type": "scalar", "f": "u^"}}"#,
    );
    assert_eq!(code(&run(&["check"], &bad)), 2);
    assert_eq!(code(&bin().arg("check").output().unwrap()), 2);
}

#[test]
fn solver_failure_exits_three_with_reason() {
    let dir = TempDir::new().unwrap();
    // Supercritical: no positive solution to bracket.
    let cfg = write(
        &dir,
        "c.json",
        r#"{"dimension": 3, "domain": {"type": "ball", "radius": 1}, "problem": {"type": "scalar", "f": "u^6"},
            "solver": {"radial": {"alpha_points": 13}}}"#,
    );
    let out = run(&["solve", "--format", "json", "--out", dir.path().to_str().unwrap()], &cfg);
    assert_eq!(code(&out), 3);
    let report = stdout_json(&out);
    assert_eq!(report["status"], "failed");
    assert!(report["reason"].as_str().unwrap().contains("never straddles"), "{report}");
    assert!(dir.path().join("report.json").exists());
    assert!(!dir.path().join("solution.csv").exists());
}

#[test]
fn pair_identity_is_independent_of_a() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "c.json",
        r#"{"dimension": 3, "domain": {"type": "ball", "radius": 1}, "problem": {"type": "pair", "f": "1", "g": "1"}}"#,
    );
    let out = run(&["verify", "--format", "json", "--a", "0,1,2"], &cfg);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    let reports = v["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 3);
    for (r, a) in reports.iter().zip([0.0, 1.0, 2.0]) {
        assert_eq!(r["params"][0].as_f64().unwrap(), a);
        let lhs = r["lhs_total"].as_f64().unwrap();
        assert!((lhs - 8.0 * PI / 9.0).abs() < 1e-8 * lhs, "lhs {lhs}");
    }
}

#[test]
fn negative_a_values_parse() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "c.json",
        r#"{"dimension": 3, "domain": {"type": "ball", "radius": 1}, "problem": {"type": "pair", "f": "1", "g": "1"}}"#,
    );
    let out = run(&["verify", "--format", "json", "--a", "-5,-1"], &cfg);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout_json(&out)["reports"].as_array().unwrap().len(), 2);
}

#[test]
fn lane_emden_verifies_at_the_default_gate() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "c.json",
        r#"{"dimension": 3, "domain": {"type": "ball", "radius": 1}, "problem": {"type": "scalar", "f": "u^3"}}"#,
    );
    let out = run(&["verify", "--format", "json"], &cfg);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["passed"], true);
    assert!(v["reports"][0]["rel_residual"].as_f64().unwrap() < 1e-5);
}

#[test]
fn supplied_non_solution_exits_five() {
    let dir = TempDir::new().unwrap();
    let constant = write(&dir, "c.json", BALL_CONSTANT);
    let out = run(&["solve", "--out", dir.path().to_str().unwrap()], &constant);
    assert_eq!(code(&out), 0);
    let solution = dir.path().join("solution.csv");
    // The same profile is supplied for a different equation.
    let cubic = write(
        &dir,
        "cubic.json",
        r#"{"dimension": 3, "domain": {"type": "ball", "radius": 1}, "problem": {"type": "scalar", "f": "u^3"}}"#,
    );
    let out = run(&["verify", "--solution", solution.to_str().unwrap()], &cubic);
    assert_eq!(code(&out), 5, "{}", String::from_utf8_lossy(&out.stderr));
    // Against its own equation the supplied file passes.
    let out = run(&["verify", "--solution", solution.to_str().unwrap()], &constant);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn tight_gate_fails_with_exit_four() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "c.json",
        r#"{"dimension": 2, "domain": {"type": "rectangle", "half_widths": [1, 1]},
            "problem": {"type": "scalar", "f": "1"}, "solver": {"grid": {"points_per_side": 33}}}"#,
    );
    assert_eq!(code(&run(&["verify"], &cfg)), 4);
    assert_eq!(code(&run(&["verify", "--gate", "0.5"], &cfg)), 0);
}

fn check(dir: &TempDir, text: &str) -> Value {
    let cfg = write(dir, "c.json", text);
    let out = run(&["check", "--format", "json"], &cfg);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    stdout_json(&out)
}

#[test]
fn check_dispatches_by_problem_type() {
    let dir = TempDir::new().unwrap();
    let v = check(
        &dir,
        r#"{"dimension": 4, "domain": {"type": "ball", "radius": 1}, "problem": {"type": "power_pair", "p": 3, "q": 4}}"#,
    );
    assert_eq!(v["verdicts"][0]["classification"], "Supercritical");
    assert_eq!(v["verdicts"][0]["outcome"], "Nonexistence");

    let v = check(
        &dir,
        r#"{"dimension": 5, "domain": {"type": "ball", "radius": 1}, "problem": {"type": "biharmonic", "q": 10}}"#,
    );
    assert_eq!(v["verdicts"][0]["outcome"], "Nonexistence");

    let v = check(
        &dir,
        r#"{"dimension": 2, "domain": {"type": "ball", "radius": 1}, "problem": {"type": "power_pair", "p": 1, "q": 1}}"#,
    );
    assert_eq!(v["verdicts"][0]["outcome"], "Inconclusive");

    let v = check(
        &dir,
        r#"{"dimension": 3, "domain": {"type": "ball", "radius": 1}, "problem": {"type": "pair", "f": "v^6", "g": "u^6"}}"#,
    );
    let names: Vec<&str> = v["verdicts"].as_array().unwrap().iter().map(|c| c["criterion"].as_str().unwrap()).collect();
    assert_eq!(names, ["mitidieri", "theorem2"]);
    assert!(v["verdicts"].as_array().unwrap().iter().all(|c| c["outcome"] == "Nonexistence"));

    let v = check(
        &dir,
        r#"{"dimension": 3, "domain": {"type": "ball", "radius": 1}, "problem": {"type": "scalar", "f": "u^6"}}"#,
    );
    assert_eq!(v["verdicts"][0]["outcome"], "Nonexistence");

    let v = check(
        &dir,
        r#"{"dimension": 3, "domain": {"type": "ball", "radius": 1}, "problem": {"type": "scalar", "f": "u^3"}}"#,
    );
    assert_eq!(v["verdicts"][0]["outcome"], "ConditionViolatedAt");

    let v = check(
        &dir,
        r#"{"dimension": 3, "domain": {"type": "ball", "radius": 1},
            "problem": {"type": "general", "m": 2, "H": "u1^7/7 + v1^7/7 + u2^9/9 + v2^6/6"}}"#,
    );
    assert_eq!(v["verdicts"][0]["outcome"], "Nonexistence");
}

fn sweep_spec(dir: &TempDir, count: usize, action: &str) -> PathBuf {
    write(
        dir,
        "sweep.json",
        &format!(
            r#"{{"n": 3, "p_range": [0.5, 8], "p_count": {count}, "q_range": [0.5, 8], "q_count": {count}, "action": "{action}"}}"#
        ),
    )
}

#[test]
fn criteria_sweep_writes_deterministic_artifacts() {
    let dir = TempDir::new().unwrap();
    let spec = sweep_spec(&dir, 16, "criteria_only");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let res = run(&["sweep", "--out", out.to_str().unwrap()], &spec);
        assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    }
    let csv = fs::read_to_string(a.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 257);
    assert_eq!(csv, fs::read_to_string(b.join("sweep.csv")).unwrap());
    assert_eq!(fs::read(a.join("sweep.svg")).unwrap(), fs::read(b.join("sweep.svg")).unwrap());
}

#[test]
fn probe_sweep_has_no_contradictions() {
    let dir = TempDir::new().unwrap();
    let spec = sweep_spec(&dir, 3, "probe");
    let out = run(&["sweep", "--format", "json", "--out", dir.path().to_str().unwrap()], &spec);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary = &stdout_json(&out)["summary"];
    assert_eq!(summary["total"], 9);
    assert_eq!(summary["contradictions"], 0);
    assert!(!fs::read_to_string(dir.path().join("sweep.csv")).unwrap().contains("CONTRADICTION"));
}

#[test]
fn overwrite_requires_force() {
    let dir = TempDir::new().unwrap();
    let spec = sweep_spec(&dir, 4, "criteria_only");
    let out_dir = dir.path().to_str().unwrap();
    assert_eq!(code(&run(&["sweep", "--out", out_dir], &spec)), 0);
    fs::write(dir.path().join("sweep.csv"), "sentinel").unwrap();
    assert_eq!(code(&run(&["sweep", "--out", out_dir], &spec)), 6);
    assert_eq!(fs::read_to_string(dir.path().join("sweep.csv")).unwrap(), "sentinel");
    assert_eq!(code(&run(&["sweep", "--out", out_dir, "--force"], &spec)), 0);

    let cfg = write(&dir, "c.json", BALL_CONSTANT);
    assert_eq!(code(&run(&["solve", "--out", out_dir], &cfg)), 0);
    assert_eq!(code(&run(&["solve", "--out", out_dir], &cfg)), 6);
    let report = dir.path().join("check.txt");
    assert_eq!(code(&run(&["check", "--out", report.to_str().unwrap()], &cfg)), 0);
    assert_eq!(code(&run(&["check", "--out", report.to_str().unwrap()], &cfg)), 6);
}

#[test]
fn sweep_spec_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let spec = write(&dir, "s.json", r#"{"n": 3, "p_range": [2, 1], "p_count": 4, "q_range": [1, 2], "q_count": 4}"#);
    assert_eq!(code(&run(&["sweep", "--out", dir.path().to_str().unwrap()], &spec)), 2);
}

#[test]
fn convergence_reports_second_order() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.json", BALL_CONSTANT);
    let out = run(&["convergence", "--format", "json", "--levels", "129,257,513"], &cfg);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = stdout_json(&out)["rows"].as_array().unwrap().clone();
    assert_eq!(rows.len(), 3);
    for r in &rows[1..] {
        assert!((r["order"].as_f64().unwrap() - 2.0).abs() < 0.1, "{r}");
    }
    assert_eq!(code(&run(&["convergence", "--levels", "129,257"], &cfg)), 2);
}

#[test]
fn json_outputs_reparse() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.json", BALL_CONSTANT);
    for args in [&["verify", "--format", "json"][..], &["check", "--format", "json"][..]] {
        let out = run(args, &cfg);
        let v = stdout_json(&out);
        let again: Value = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
        assert_eq!(v, again);
    }
}

fn validator(schema: &str) -> jsonschema::Validator {
    let text = fs::read_to_string(repo().join("schema").join(schema)).unwrap();
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).unwrap()
}

#[test]
fn shipped_configs_match_the_schemas_and_run() {
    let run_schema = validator("run_config.schema.json");
    let sweep_schema = validator("sweep_spec.schema.json");
    let mut seen = 0;
    for entry in fs::read_dir(repo().join("configs")).unwrap() {
        let path = entry.unwrap().path();
        let value: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let schema = if name.starts_with("sweep") { &sweep_schema } else { &run_schema };
        let errors: Vec<String> = schema.iter_errors(&value).map(|e| e.to_string()).collect();
        assert!(errors.is_empty(), "{name}: {errors:?}");
        if !name.starts_with("sweep") {
            let out = run(&["check"], &path);
            assert_eq!(code(&out), 0, "{name}: {}", String::from_utf8_lossy(&out.stderr));
        }
        seen += 1;
    }
    assert!(seen >= 5);
}

#[test]
fn schema_rejects_what_the_loader_rejects() {
    let schema = validator("run_config.schema.json");
    let bad: Value = serde_json::from_str(
        r#"{"dimension": 3, "domain": {"type": "ball", "radius": 1}, "problem": {"type": "scalar", "f": "1"}, "tol": 1}"#,
    )
    .unwrap();
    assert!(!schema.is_valid(&bad));
}
