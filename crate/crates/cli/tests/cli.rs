use std::path::Path;
use std::process::{Command, Output};

const BENCHMARK: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/benchmark.json");

fn sofsyn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sofsyn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn synth_printed(dir: &Path) -> std::path::PathBuf {
    let r = dir.join("r.json");
    let out = sofsyn(&[
        "synth",
        "--system",
        BENCHMARK,
        "--method",
        "corollary1",
        "--mu",
        "2.5",
        "--no-bound-p",
        "--out",
        p(&r),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    r
}

#[test]
fn synth_writes_results_with_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let r = synth_printed(dir.path());
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&r).unwrap()).unwrap();
    assert_eq!(doc["metadata"]["command"], "synth");
    assert!(doc["metadata"]["timestamp_unix"].is_u64());
    let gamma = doc["result"]["gamma_star"].as_f64().unwrap();
    assert!((gamma - 0.046789).abs() < 1e-4, "gamma* {gamma}");
    assert_eq!(doc["result"]["status"], "Optimal");
    assert!(doc["result"]["diagnostics"]["certificate_valid"].as_bool().unwrap());
}

#[test]
fn results_are_reproducible_outside_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth_printed(dir.path());
    let first: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&a).unwrap()).unwrap();
    let b = synth_printed(dir.path());
    let second: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&b).unwrap()).unwrap();
    assert_eq!(first["result"], second["result"]);
    assert_eq!(first["request"], second["request"]);
}

#[test]
fn negative_mu_is_an_input_error() {
    let out = sofsyn(&["synth", "--system", BENCHMARK, "--mu", "-1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--mu"), "{}", stderr(&out));
}

#[test]
fn unknown_flags_and_bad_files_are_input_errors() {
    assert_eq!(
        sofsyn(&["synth", "--system", BENCHMARK, "--bogus"]).status.code(),
        Some(2)
    );
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(BENCHMARK).unwrap()).unwrap();
    v["Bx"] = serde_json::json!([[1.0]]);
    std::fs::write(&bad, v.to_string()).unwrap();
    let out = sofsyn(&["synth", "--system", p(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("Bx"));
    let out = sofsyn(&["synth", "--system", p(&dir.path().join("missing.json"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn infeasible_synthesis_exits_one_and_still_writes_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let r = dir.path().join("r.json");
    let out = sofsyn(&["synth", "--system", BENCHMARK, "--mu", "0.01", "--out", p(&r)]);
    assert_eq!(out.status.code(), Some(1));
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&r).unwrap()).unwrap();
    assert_eq!(doc["result"]["status"], "Infeasible");
    assert!(doc["result"]["diagnostics"]["phase1_value"].as_f64().unwrap() > 0.0);
}

#[test]
fn simulate_writes_csv_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let r = synth_printed(dir.path());
    let csv = dir.path().join("t.csv");
    let svg = dir.path().join("t.svg");
    let out = sofsyn(&[
        "simulate",
        "--system",
        BENCHMARK,
        "--gain",
        p(&r),
        "--steps",
        "200",
        "--x0",
        "random",
        "--seed",
        "7",
        "--out",
        p(&csv),
        "--plot",
        p(&svg),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 202);
    assert!(text.starts_with("k,x1,x2,x3,x4,x5,u1,u2,u3,y1,y2,"));
    let plot = std::fs::read_to_string(&svg).unwrap();
    assert!(plot.contains("<svg") && plot.matches("<polyline").count() == 5);

    let again = dir.path().join("t2.csv");
    sofsyn(&[
        "simulate",
        "--system",
        BENCHMARK,
        "--gain",
        p(&r),
        "--steps",
        "200",
        "--x0",
        "random",
        "--seed",
        "7",
        "--out",
        p(&again),
    ]);
    assert_eq!(text, std::fs::read_to_string(&again).unwrap());
}

#[test]
fn simulate_accepts_a_bare_gain_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let k = dir.path().join("k.json");
    std::fs::write(&k, "[[0,0],[0,0],[0,0]]").unwrap();
    let csv = dir.path().join("t.csv");
    let out = sofsyn(&[
        "simulate",
        "--system",
        BENCHMARK,
        "--gain",
        p(&k),
        "--steps",
        "5",
        "--x0",
        "zero",
        "--out",
        p(&csv),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    std::fs::write(&k, "[[0,0]]").unwrap();
    let out = sofsyn(&["simulate", "--system", BENCHMARK, "--gain", p(&k), "--out", p(&csv)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn robustness_reports_the_margin() {
    let dir = tempfile::tempdir().unwrap();
    let r = synth_printed(dir.path());
    let rb = dir.path().join("rb.json");
    let out = sofsyn(&["robustness", "--system", BENCHMARK, "--gain", p(&r), "--out", p(&rb)]);
    assert_eq!(out.status.code(), Some(1));
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&rb).unwrap()).unwrap();
    assert!(doc["report"]["normwise_margin"].as_f64().unwrap() < 0.0);

    let out = sofsyn(&[
        "robustness",
        "--system",
        BENCHMARK,
        "--gain",
        p(&r),
        "--gamma",
        "0.01",
        "--trials",
        "10",
        "--out",
        p(&rb),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&rb).unwrap()).unwrap();
    assert_eq!(doc["monte_carlo"]["fraction_stable"], 1.0);
}

#[test]
fn analyze_open_and_closed_loop() {
    let dir = tempfile::tempdir().unwrap();
    let r = synth_printed(dir.path());
    let a = dir.path().join("a.json");
    let closed = sofsyn(&["analyze", "--system", BENCHMARK, "--gain", p(&r), "--out", p(&a)]);
    assert_eq!(closed.status.code(), Some(0), "{}", stderr(&closed));
    let open = sofsyn(&["analyze", "--system", BENCHMARK, "--out", p(&a)]);
    assert_eq!(open.status.code(), Some(1));
}

#[test]
fn demo_prints_the_benchmark_results() {
    let dir = tempfile::tempdir().unwrap();
    let out = sofsyn(&["demo", "--out-dir", p(dir.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("gamma* 0.0467"), "{text}");
    assert!(text.contains("K ="));
    for name in ["demo_result.json", "demo_trajectory.csv", "demo_trajectory.svg"] {
        assert!(dir.path().join(name).exists());
    }
}

#[test]
fn demo_theorem1_prints_rank_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let out = sofsyn(&["demo", "--method", "theorem1", "--out-dir", p(dir.path())]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("rank condition:"), "{text}");
}

#[test]
fn demo_fixed_gamma_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let out = sofsyn(&["demo", "--gamma-fixed", "0.3", "--out-dir", p(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("gamma fixed at 0.3: infeasible"));
}
