//! End-to-end tests of the command line binary: exit codes, file outputs,
//! schemas, config handling and determinism.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stokeslab"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin()
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn stokeslab")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

#[test]
fn solve_writes_vtk_and_json_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "solve",
            "--problem",
            "s1",
            "--case",
            "ms1",
            "--n",
            "4",
            "--vtk",
            "viz",
        ],
    );
    assert!(out.status.success(), "stderr: {}", stderr(&out));

    let json: serde_json::Value =
        serde_json::from_str(&read(&dir.path().join("solve-s1-ms1-n4.json"))).unwrap();
    assert_eq!(json["problem"], "s1");
    assert_eq!(json["case"], "ms1");
    assert_eq!(json["n"], 4);
    // ms1 is exactly representable, so the solve reproduces it to roundoff
    assert!(json["errors"]["err_u_h1"].as_f64().unwrap() < 1e-10);
    assert!(json["diagnostics"]["residual"].as_f64().unwrap() < 1e-10);

    let vtk = read(&dir.path().join("viz/solve-s1-ms1-n4.vtk"));
    assert!(vtk.starts_with("# vtk DataFile Version 2.0\n"));
    assert!(vtk.contains("VECTORS velocity double"));
    assert!(vtk.contains("SCALARS pressure double 1"));
}

#[test]
fn verify_s1_writes_one_csv_row_per_eps_plus_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "verify-s1",
            "--case",
            "ms1",
            "--n",
            "4",
            "--eps",
            "1e-3,1e-2,1e-1",
        ],
    );
    assert!(out.status.success(), "stderr: {}", stderr(&out));

    let csv = read(&dir.path().join("verify-s1-ms1-n4.csv"));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "level,h,eps,lhs_u,lhs_p,rhs_flux,rhs_trace,ratio");
    assert_eq!(lines.len(), 4, "header plus one row per eps");

    let summary: serde_json::Value =
        serde_json::from_str(&read(&dir.path().join("verify-s1-ms1-n4-summary.json"))).unwrap();
    assert_eq!(summary["pass_linearity"], true);
    assert_eq!(summary["pass_ratio_band"], true);
    // no eps=0 row was requested, so the zero-mismatch check did not run
    assert_eq!(summary["pass_zero_mismatch"], serde_json::Value::Null);
}

#[test]
fn verify_s2_reports_the_pressure_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "verify-s2",
            "--case",
            "ms1",
            "--n",
            "4",
            "--eps",
            "0,1e-2,1e-1",
        ],
    );
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let summary: serde_json::Value =
        serde_json::from_str(&read(&dir.path().join("verify-s2-ms1-n4-summary.json"))).unwrap();
    assert_eq!(summary["problem"], "s2");
    assert_eq!(summary["pass_zero_mismatch"], true);
    assert_eq!(summary["pass_ratio_band"], true);
}

#[test]
fn identical_invocations_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["verify-s1", "--case", "ms1", "--n", "4", "--eps", "0,1e-2"];
    assert!(run_in(dir.path(), &args).status.success());
    let csv1 = read(&dir.path().join("verify-s1-ms1-n4.csv"));
    let json1 = read(&dir.path().join("verify-s1-ms1-n4-summary.json"));
    assert!(run_in(dir.path(), &args).status.success());
    assert_eq!(csv1, read(&dir.path().join("verify-s1-ms1-n4.csv")));
    assert_eq!(
        json1,
        read(&dir.path().join("verify-s1-ms1-n4-summary.json"))
    );
}

#[test]
fn convergence_writes_table_and_rates() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "convergence",
            "--problem",
            "pp",
            "--case",
            "ms1",
            "--levels",
            "2",
        ],
    );
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let csv = read(&dir.path().join("convergence-ms1-pp.csv"));
    assert!(csv.starts_with("n,h,err_u_h1,err_p_l2,err_p_h1,rate_u_h1,rate_p_l2,rate_p_h1\n"));
    assert_eq!(csv.lines().count(), 3, "header plus two levels");
    let table: serde_json::Value =
        serde_json::from_str(&read(&dir.path().join("convergence-ms1-pp.json"))).unwrap();
    assert_eq!(table["problem"], "pp");
    assert_eq!(table["rows"].as_array().unwrap().len(), 2);
}

#[test]
fn constants_reports_all_five_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["constants", "--n", "2"]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let json: serde_json::Value =
        serde_json::from_str(&read(&dir.path().join("constants-n2.json"))).unwrap();
    for key in [
        "beta_infsup",
        "c_korn",
        "c_poincare_gamma1",
        "c_poincare_gamma2",
        "c_curl",
    ] {
        assert!(
            json[key].as_f64().unwrap() > 0.0,
            "{key} should be positive"
        );
    }
}

#[test]
fn mesh_writes_geometry_only_vtk() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["mesh", "--n", "3"]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("16 vertices, 18 cells"));
    let vtk = read(&dir.path().join("mesh-n3.vtk"));
    assert!(vtk.contains("POINTS 16 double"));
    assert!(vtk.contains("CELLS 18 72"));
    assert!(!vtk.contains("POINT_DATA"));
}

#[test]
fn empty_gamma2_layout_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["solve", "--problem", "s2", "--layout", "all-gamma1"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("Gamma2"), "stderr: {}", stderr(&out));
}

#[test]
fn singular_discrete_system_is_a_numerical_error() {
    // the curl-form system on the structured mesh loses uniqueness at n=8;
    // the solver must refuse rather than return an arbitrary representative
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["solve", "--problem", "s2", "--n", "8"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).contains("singular"),
        "stderr: {}",
        stderr(&out)
    );
}

#[test]
fn unknown_flags_and_bad_values_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["solve", "--bogus"][..],
        &["frobnicate"][..],
        &["solve", "--problem", "s9"][..],
        &["solve", "--n", "minus-two"][..],
        &["verify-s1", "--eps", "1e-3,nope"][..],
        &["mesh", "--layout", "g1,g2"][..],
        &["mesh", "--n", "0"][..],
    ] {
        let out = run_in(dir.path(), args);
        assert_eq!(out.status.code(), Some(1), "args: {args:?}");
    }
}

#[test]
fn help_succeeds_and_lists_the_subcommands() {
    let out = bin().arg("--help").output().unwrap();
    assert!(out.status.success());
    let text = stdout(&out);
    for sub in [
        "solve",
        "convergence",
        "verify-s1",
        "verify-s2",
        "constants",
        "mesh",
    ] {
        assert!(text.contains(sub), "help should list {sub}");
    }
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.conf"),
        "# solve setup\ncase = ms1\nn = 2\nproblem = pp\n",
    )
    .unwrap();
    let out = run_in(dir.path(), &["solve", "--config", "run.conf"]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert!(dir.path().join("solve-pp-ms1-n2.json").exists());

    // an explicit flag beats the config value
    let out = run_in(dir.path(), &["solve", "--config", "run.conf", "--n", "3"]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert!(dir.path().join("solve-pp-ms1-n3.json").exists());
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.conf"), "mesh_size = 4\n").unwrap();
    let out = run_in(dir.path(), &["solve", "--config", "bad.conf"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr(&out).contains("unknown config key"),
        "stderr: {}",
        stderr(&out)
    );

    std::fs::write(dir.path().join("mangled.conf"), "just a sentence\n").unwrap();
    let out = run_in(dir.path(), &["solve", "--config", "mangled.conf"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr(&out).contains("key=value"),
        "stderr: {}",
        stderr(&out)
    );
}
