use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_flatheights"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn torus_square_to_tall() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("torus");
    let cfg = scenario("torus_square_to_tall.json");
    let res = run(&["torus", "--config", cfg.to_str().unwrap()], &out);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let s = summary(&out);
    assert!((s["L"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert!((s["c_conjugate"].as_f64().unwrap() - 0.25).abs() < 1e-12);
    assert_eq!(s["homotopic"], Value::Bool(true));
    assert_eq!(s["branch"], "forward");

    let csv = fs::read_to_string(out.join("theta_sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("theta,ratio,inv_ratio"));
    assert_eq!(lines.count(), 720);
    let svg = fs::read_to_string(out.join("theta_sweep.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
}

#[test]
fn creeping_chain_is_not_attained() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("cyl");
    let cfg = scenario("cylinder_creeping.json");
    let res = run(&["cylinder", "--config", cfg.to_str().unwrap()], &out);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let s = summary(&out);
    assert_eq!(s["attained"], Value::Bool(false));
    assert_eq!(s["L_exact"], "2");
    assert_eq!(s["gap_last_exact"], "1/101");
    assert_eq!(s["witness"], Value::Null);

    let csv = fs::read_to_string(out.join("cylinder.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("N,L_N,truncNorm,gap"));
    assert_eq!(csv.lines().count(), 102);
    let gaps: Vec<f64> = csv.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn finite_chain_norms() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("fin");
    let cfg = scenario("cylinder_finite.json");
    let res = run(&["cylinder", "--config", cfg.to_str().unwrap()], &out);
    assert!(res.status.success());
    let s = summary(&out);
    // 1*(1/2) + 2*(2/4) + (1/3)*(3/2) = 2 and 3/2 + 1/2 + 5/8 = 21/8
    assert_eq!(s["norm_exact"], "2");
    assert_eq!(s["image_norm_exact"], "21/8");
    assert_eq!(s["L_exact"], "3");
    assert_eq!(s["attained"], Value::Bool(true));
}

#[test]
fn exhaustion_gap_closes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("exh");
    let cfg = scenario("exhaustion_geometric.json");
    let res = run(&["exhaustion", "--config", cfg.to_str().unwrap()], &out);
    assert!(res.status.success());
    let s = summary(&out);
    let last = s["norm_gap_last"].as_f64().unwrap();
    assert!((last - 2f64.powi(-30)).abs() < 1e-20);
    let csv = fs::read_to_string(out.join("exhaustion.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cols[3], 2.0 * cols[2]);
    }
}

#[test]
fn variational_and_dirichlet_pass_their_checks() {
    let tmp = tempfile::tempdir().unwrap();
    for (kind, file) in [("variational", "variational_default.json"), ("dirichlet", "dirichlet_perturbed.json")] {
        let out = tmp.path().join(kind);
        let cfg = scenario(file);
        let res = run(&[kind, "--config", cfg.to_str().unwrap()], &out);
        assert!(res.status.success(), "{kind}: {}", String::from_utf8_lossy(&res.stderr));
    }
    let v = summary(&tmp.path().join("variational"));
    assert!(v["max_discrepancy"].as_f64().unwrap() < 1e-5);
    let csv = fs::read_to_string(tmp.path().join("variational/variational.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,h,h_prime_analytic,h_prime_numeric,A,bound"));

    let d = summary(&tmp.path().join("dirichlet"));
    let (e, n) = (d["energy_min"].as_f64().unwrap(), d["realizing_norm"].as_f64().unwrap());
    assert!((e - n).abs() <= 1e-9 * n);
    assert_eq!(d["pushforward"]["holds"], Value::Bool(true));
    assert!(tmp.path().join("dirichlet/minimizer.json").exists());
}

#[test]
fn every_gauge_is_accepted() {
    let tmp = tempfile::tempdir().unwrap();
    for g in ["fix1", "fix1tau", "area"] {
        let out = tmp.path().join(g);
        let res = run(&["variational", "--gauge", g], &out);
        assert!(res.status.success());
        assert_eq!(summary(&out)["gauge"], g);
    }
}

#[test]
fn non_unimodular_marking_exits_with_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"kind": "torus", "payload": {"tau": [0, 1], "tau_prime": [0, 1], "B": [[2, 0], [0, 1]]}}"#,
    );
    let out = tmp.path().join("out");
    let res = run(&["torus", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("det(B) = 2"));
    assert!(!out.exists());
}

#[test]
fn schema_errors_exit_with_code_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        ("torus", r#"{"kind": "torus", "payload": {"tau": [0, 1], "tau_prime": [0, 1], "B": [[1, 0], [0, 1]], "extra": 1}}"#),
        ("torus", r#"{"kind": "torus", "payload": {"tau": [0, -1], "tau_prime": [0, 1], "B": [[1, 0], [0, 1]]}}"#),
        ("torus", r#"{"kind": "cylinder", "payload": {}}"#),
        ("cylinder", r#"{"kind": "cylinder", "payload": {"generator": {"a": "1", "b": "2^-n", "lambda": "2"}}}"#),
        ("cylinder", r#"{"kind": "cylinder", "payload": {"cylinders": [{"a": 0, "b": 1, "lambda": 1}]}}"#),
        ("exhaustion", r#"{"kind": "exhaustion", "payload": {"generator": {"a": "1", "b": "n^", "lambda": "2"}, "nMax": 3}}"#),
        ("variational", r#"{"kind": "variational", "payload": {"tau": [0, 1], "mu": [1.5, 0], "q": [1, 0],
            "chain": {"cylinders": [{"a": 1, "b": 1, "lambda": 2}]}}}"#),
        ("dirichlet", r#"{"kind": "dirichlet", "payload": {"tau": [0, 1], "periods": [1, 0], "N": 0}}"#),
        ("dirichlet", r#"{"kind": "dirichlet", "payload": {"tau": [0, 1], "periods": [1, 0], "N": 4, "perturbation": -1}}"#),
        ("torus", r#"not json"#),
    ];
    for (k, (kind, body)) in cases.iter().enumerate() {
        let cfg = write_config(tmp.path(), body);
        let res = run(&[kind, "--config", cfg.to_str().unwrap()], &tmp.path().join(format!("o{k}")));
        assert_eq!(res.status.code(), Some(1), "case {k}: {}", String::from_utf8_lossy(&res.stderr));
    }
    let res = bin().args(["variational", "--gauge", "bogus"]).output().unwrap();
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn unreadable_config_exits_with_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing.json");
    let res = run(&["torus", "--config", missing.to_str().unwrap()], &tmp.path().join("o"));
    assert_eq!(res.status.code(), Some(3));
}

#[test]
fn violated_metadata_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    // the prefix exceeds the declared supremum
    let cfg = write_config(
        tmp.path(),
        r#"{"kind": "cylinder", "payload": {"generator": {"a": "1", "b": "2^-n", "lambda": "3", "sup": 2,
            "sup_attained": false, "inf": 1, "inf_attained": false, "norm": 2}, "nMax": 5}}"#,
    );
    let res = run(&["cylinder", "--config", cfg.to_str().unwrap()], &tmp.path().join("o"));
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("metadata"));
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn reports_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    for (kind, file) in [
        ("torus", "torus_twist.json"),
        ("cylinder", "cylinder_creeping.json"),
        ("variational", "variational_default.json"),
        ("dirichlet", "dirichlet_perturbed.json"),
    ] {
        let cfg = scenario(file);
        let a = tmp.path().join(format!("{kind}_a"));
        let b = tmp.path().join(format!("{kind}_b"));
        for dir in [&a, &b] {
            assert!(run(&[kind, "--config", cfg.to_str().unwrap(), "--seed", "11"], dir).status.success());
        }
        assert_eq!(snapshot(&a), snapshot(&b), "{kind}");
    }
    let cfg = scenario("dirichlet_perturbed.json");
    let c = tmp.path().join("dirichlet_c");
    assert!(run(&["dirichlet", "--config", cfg.to_str().unwrap(), "--seed", "12"], &c).status.success());
    assert_ne!(
        fs::read(c.join("initial.csv")).unwrap(),
        fs::read(tmp.path().join("dirichlet_a/initial.csv")).unwrap()
    );
}

#[test]
fn selftest_prints_one_line_per_criterion() {
    let res = bin().arg("selftest").output().unwrap();
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(res.status.success(), "{stdout}");
    assert_eq!(stdout.lines().filter(|l| l.starts_with("[PASS]")).count(), 8);
}
