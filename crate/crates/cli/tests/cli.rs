use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmap-rel"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn measures_for_balanced_policy() {
    let dir = tempfile::tempdir().unwrap();
    let (model, econ) = (data("paper_example.json"), data("paper_economics.json"));
    let o = run(&["measures", "--model", s(&model), "--econ", s(&econ), "--params", "model2", "--out", s(dir.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("measures.json")).unwrap()).unwrap();
    let a = report["availability"].as_f64().unwrap();
    assert!((a - 0.9168).abs() < 1e-3, "{a}");
    assert_eq!(report["pi"].as_array().unwrap().len(), 180);
    let total: f64 = report["occupancy"].as_object().unwrap().values().map(|v| v.as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert_eq!(report["break_even"]["kind"], "at");
    assert!(stdout(&o).contains("availability          0.9168"));
}

fn broken_model(dir: &Path) -> PathBuf {
    let mut cfg: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(data("paper_example.json")).unwrap()).unwrap();
    cfg["T_r0"][5] = serde_json::json!(0.7);
    let path = dir.join("broken.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    path
}

#[test]
fn validate_reports_conservation_row() {
    let dir = tempfile::tempdir().unwrap();
    let ok = run(&["validate", "--model", s(&data("paper_example.json")), "--econ", s(&data("paper_economics.json"))]);
    assert!(ok.status.success());
    assert!(stdout(&ok).contains("180 states"));

    let broken = broken_model(dir.path());
    let o = run(&["validate", "--model", s(&broken)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("row 6"), "{}", stdout(&o));

    let o = run(&["--json-errors", "validate", "--model", s(&broken)]);
    assert_eq!(o.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    let issues = err["error"]["issues"].as_array().unwrap();
    assert!(issues.iter().any(|i| i["row"] == 6 && (i["residual"].as_f64().unwrap() - 0.7).abs() < 1e-12), "{issues:?}");
}

#[test]
fn build_dumps_blocks() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["build", "--model", s(&data("paper_example.json")), "--dump-blocks", "--out", s(dir.path())]);
    assert!(o.status.success());
    assert!(dir.path().join("blocks").join("Q_R+NVP.csv").exists());
    let o = run(&[
        "build", "--model", s(&data("paper_example.json")), "--discretize", "0.05", "--dump-blocks", "--out", s(dir.path()),
    ]);
    assert!(o.status.success());
    let rows = std::fs::read_to_string(dir.path().join("blocks").join("D_R+RF+CR.csv")).unwrap();
    assert_eq!(rows.lines().count(), 180);
}

#[test]
fn transient_csv_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let o = run(&[
            "transient", "--model", s(&data("paper_example.json")), "--econ", s(&data("paper_economics.json")),
            "--grid", "0.1:100:6", "--out", s(dir.path()),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let x = std::fs::read(a.path().join("transient.csv")).unwrap();
    assert_eq!(x, std::fs::read(b.path().join("transient.csv")).unwrap());
    let text = String::from_utf8(x).unwrap();
    assert_eq!(text.lines().count(), 7);
    assert!(text.starts_with("t,availability,reliability,count_RF"));

    let o = run(&["transient", "--model", s(&data("paper_example.json")), "--grid", "5:1:3"]);
    assert!(!o.status.success());
}

#[test]
fn simulate_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "simulate", "--model", s(&data("paper_example.json")), "--params", "model1", "--horizon", "2e4", "--reps", "6",
        "--seed", "3", "--out", s(dir.path()),
    ]);
    assert!(o.status.success(), "{}{}", stdout(&o), String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("sim_report.json")).unwrap()).unwrap();
    assert_eq!(report["comparison"]["bonferroni"], 14);
    assert_eq!(report["estimates"]["config"]["replications"], 6);
}

#[test]
fn optimize_writes_front_and_selection() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "optimize", "--model", s(&data("paper_example.json")), "--econ", s(&data("paper_economics.json")),
        "--pop", "8", "--gens", "2", "--seed", "5", "--out", s(dir.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("pareto.csv")).unwrap();
    assert!(csv.starts_with("f1,f2,V1,V2,V3,V4,V5,p1,p2\n"));
    let sel: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("selection.json")).unwrap()).unwrap();
    assert_eq!(sel["front_size"].as_u64().unwrap() as usize, csv.lines().count() - 1);
}

#[test]
fn reproduce_covers_every_published_value() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "reproduce-paper", "--model", s(&data("paper_example.json")), "--econ", s(&data("paper_economics.json")),
        "--out", s(dir.path()),
    ]);
    assert!(o.status.success());
    let csv = std::fs::read_to_string(dir.path().join("reproduce.csv")).unwrap();
    assert_eq!(csv.lines().count(), 31);
    assert!(csv.contains("model3,break_even,never,never,,true"));
}

#[test]
fn bad_arguments_fail() {
    assert!(!run(&["measures", "--model", s(&data("paper_example.json")), "--bogus"]).status.success());
    assert!(!run(&[]).status.success());
    let o = run(&["measures", "--model", s(&data("paper_example.json")), "--params", "model9"]);
    assert_eq!(o.status.code(), Some(1));
    let o = Command::new(env!("CARGO_BIN_EXE_mmap-rel"))
        .args(["validate", "--model", s(&data("paper_example.json"))])
        .env("MMAP_REL_THREADS", "zero")
        .output()
        .unwrap();
    assert!(!o.status.success());
}
