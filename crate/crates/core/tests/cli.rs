use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_orlicz-fem"))
}

fn data(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

#[test]
fn solve_writes_report_and_solution() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let solution = dir.path().join("u.txt");
    let out = bin()
        .arg("solve")
        .arg(data("obstacle_p2.json"))
        .arg("--report")
        .arg(&report)
        .arg("--solution")
        .arg(&solution)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["converged"], true);
    assert!(r["feasibility_violation"].as_f64().unwrap() <= 1e-8);
    let u = orlicz_fem::femcore::FeFunction::from_text(&std::fs::read_to_string(&solution).unwrap()).unwrap();
    assert!(u.is_boundary_constrained());
}

#[test]
fn check_weight_flags_strong_singularity() {
    let out = bin().args(["check-weight", "--alpha", "2.5", "--p", "2"]).output().unwrap();
    assert!(out.status.success());
    let r: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["growth_flag"], true);
    let out = bin().args(["check-weight", "--alpha", "0.5", "--p", "2"]).output().unwrap();
    let r: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["growth_flag"], false);
}

#[test]
fn interp_test_emits_csv() {
    let out = bin().args(["interp-test", "--kind", "sz_l1", "--levels", "2"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("level,h,kind,max_ratio,median_ratio"));
    assert_eq!(lines.count(), 2);
}

#[test]
fn study_of_a_case_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut case = orlicz_fem::study::builtin_case("p2_sine").unwrap();
    case.levels = 3;
    case.base_resolution = 4;
    let case_path = dir.path().join("case.json");
    std::fs::write(&case_path, serde_json::to_string(&case).unwrap()).unwrap();
    let json = dir.path().join("out.json");
    let csv = dir.path().join("out.csv");
    let out = bin()
        .arg("study")
        .arg("--case")
        .arg(&case_path)
        .arg("--out")
        .arg(&json)
        .arg("--csv")
        .arg(&csv)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = orlicz_fem::study::ConvergenceReport::from_json(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report.levels.len(), 3);
    assert_eq!(std::fs::read_to_string(&csv).unwrap(), report.to_csv());
}

#[test]
fn unknown_case_is_an_error() {
    let out = bin().args(["study", "--case", "no_such_case"]).output().unwrap();
    assert!(!out.status.success());
}
