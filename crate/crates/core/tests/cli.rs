use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use camuv::manifest::{manifest_path, RunManifest};
use camuv::simulate::LagGroundTruth;
use camuv::{CausalGraph, GroundTruth, LagGraph};

fn camuv(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_camuv"))
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .expect("spawn camuv")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = camuv(dir, args);
    assert_eq!(out.status.code(), Some(0), "{args:?} failed:\n{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    camuv(dir, args).status.code().unwrap()
}

fn header(path: PathBuf) -> Vec<String> {
    let text = fs::read_to_string(path).unwrap();
    text.lines().next().unwrap().split(',').map(str::to_string).collect()
}

#[test]
fn simulate_default_instances() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["simulate", "--seed", "7", "--out", "a.csv", "--truth", "a.json"]);
    assert_eq!(header(d.join("a.csv")).len(), 10);
    assert_eq!(fs::read_to_string(d.join("a.csv")).unwrap().lines().count(), 1001);
    let truth = GroundTruth::from_json(&fs::read_to_string(d.join("a.json")).unwrap()).unwrap();
    assert_eq!(truth.directed.len(), 10);
    assert_eq!(truth.confounded_pairs.len(), 4);
    assert_eq!(truth.intermediate_pairs.len(), 2);

    ok(d, &["simulate", "--kind", "ts", "--seed", "7", "--out", "t.csv", "--truth", "t.json"]);
    assert_eq!(header(d.join("t.csv")).len(), 3);
    let lag_truth = LagGroundTruth::from_json(&fs::read_to_string(d.join("t.json")).unwrap()).unwrap();
    assert_eq!(lag_truth.directed.len(), 5);

    ok(d, &["simulate", "--seed", "7", "--out", "b.csv", "--truth", "b.json"]);
    assert_eq!(fs::read(d.join("a.csv")).unwrap(), fs::read(d.join("b.csv")).unwrap());
    assert_eq!(fs::read(d.join("a.json")).unwrap(), fs::read(d.join("b.json")).unwrap());
    assert!(manifest_path(&d.join("a.csv")).exists());
}

const CHAIN: &str = r#"{"n_observed": 2, "n_confounded_pairs": 0, "n_intermediate_pairs": 0, "n_direct_pairs": 1}"#;

#[test]
fn discover_a_two_variable_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("chain.json"), CHAIN).unwrap();
    let mut hits = 0;
    for seed in 0..5 {
        let s = seed.to_string();
        ok(d, &["simulate", "--config", "chain.json", "--seed", &s, "--out", "c.csv", "--truth", "c.json"]);
        ok(d, &["discover", "--data", "c.csv", "--out", "g.json", "--dot", "g.dot"]);
        let truth = GroundTruth::from_json(&fs::read_to_string(d.join("c.json")).unwrap()).unwrap();
        let g = CausalGraph::from_json(&fs::read_to_string(d.join("g.json")).unwrap()).unwrap();
        if g.edge_names() == truth.directed {
            hits += 1;
        }
        assert!(fs::read_to_string(d.join("g.dot")).unwrap().starts_with("digraph"));

        // Forbid the true direction.
        let (a, b) = &truth.directed[0];
        fs::write(d.join("prior.json"), format!(r#"{{"forbidden": [["{a}", "{b}"]]}}"#)).unwrap();
        ok(d, &["discover", "--data", "c.csv", "--prior", "prior.json", "--out", "p.json"]);
        let g = CausalGraph::from_json(&fs::read_to_string(d.join("p.json")).unwrap()).unwrap();
        assert!(!g.edge_names().contains(&(a.clone(), b.clone())));
    }
    assert!(hits >= 3, "chain recovered in {hits}/5");
}

#[test]
fn input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("empty.csv"), "").unwrap();
    assert_eq!(code(d, &["discover", "--data", "empty.csv", "--out", "g.json"]), 2);
    fs::write(d.join("bad.csv"), "X1,X2\n1.0,2.0\n3.0\n").unwrap();
    assert_eq!(code(d, &["discover", "--data", "bad.csv", "--out", "g.json"]), 2);
    fs::write(d.join("nan.csv"), "X1,X2\n1.0,abc\n3.0,4.0\n").unwrap();
    assert_eq!(code(d, &["discover", "--data", "nan.csv", "--out", "g.json"]), 2);
    assert_eq!(code(d, &["discover", "--data", "missing.csv", "--out", "g.json"]), 2);

    let rows: String = (0..40).map(|i| format!("{},{}\n", i as f64 * 0.37 % 1.3, (i * i) as f64 % 7.1)).collect();
    fs::write(d.join("ok.csv"), format!("X1,X2\n{rows}")).unwrap();
    fs::write(d.join("prior.json"), r#"{"forbidden": [["X1", "Q"]]}"#).unwrap();
    assert_eq!(code(d, &["discover", "--data", "ok.csv", "--prior", "prior.json", "--out", "g.json"]), 2);
    assert_eq!(code(d, &["discover", "--data", "ok.csv", "--alpha", "2", "--out", "g.json"]), 2);
    assert_eq!(code(d, &["discover-ts", "--data", "ok.csv", "--max-lag", "40", "--out", "g.json"]), 2);
    assert_eq!(code(d, &["discover", "--data", "ok.csv", "--format", "csv", "--out", "g.json"]), 2);
    assert_eq!(code(d, &["benchmark", "--protocol", "pk-sweep", "--reps", "0", "--out", "b.csv"]), 2);
    assert_eq!(code(d, &["simulate", "--out", "x.csv"]), 2);
    assert!(!d.join("g.json").exists());
}

#[test]
fn discover_ts_and_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["simulate", "--kind", "ts", "--seed", "3", "--samples", "300", "--out", "s.csv", "--truth", "s.json"]);
    ok(d, &["discover-ts", "--data", "s.csv", "--out", "lg.json"]);
    let g = LagGraph::from_json(&fs::read_to_string(d.join("lg.json")).unwrap()).unwrap();
    assert_eq!(g.max_lag, 2);
    assert!(g.edges.iter().all(|e| e.lag <= 2));

    let out = ok(d, &["evaluate", "--truth", "s.json", "--graph", "lg.json", "--out", "score.json"]);
    let printed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let written: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("score.json")).unwrap()).unwrap();
    assert_eq!(printed, written);
    for k in ["tp", "fp", "fn", "precision", "recall", "f_measure"] {
        assert!(written.get(k).is_some(), "missing {k}");
    }
}

#[test]
fn evaluate_with_exclusions() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let truth = r#"{"variables": ["A", "B", "C"], "directed": [["A", "B"], ["B", "C"]], "confounded_pairs": [], "intermediate_pairs": []}"#;
    let graph = r#"{"variables": ["A", "B", "C"], "directed": [["A", "B"], ["C", "A"]], "dashed": []}"#;
    fs::write(d.join("t.json"), truth).unwrap();
    fs::write(d.join("g.json"), graph).unwrap();
    fs::write(d.join("x.json"), r#"[["A", "B"], ["B", "A"]]"#).unwrap();
    ok(d, &["evaluate", "--truth", "t.json", "--graph", "g.json", "--out", "s.json"]);
    let s: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("s.json")).unwrap()).unwrap();
    assert_eq!((s["tp"].as_u64(), s["fp"].as_u64(), s["fn"].as_u64()), (Some(1), Some(1), Some(1)));
    ok(d, &["evaluate", "--truth", "t.json", "--graph", "g.json", "--exclude", "x.json", "--out", "s.json"]);
    let s: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("s.json")).unwrap()).unwrap();
    assert_eq!((s["tp"].as_u64(), s["fp"].as_u64(), s["fn"].as_u64()), (Some(0), Some(1), Some(1)));
}

#[test]
fn exchange_rate_style_series_renders_unrolled() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let names = ["USD", "GBP", "EUR", "CHF", "CAD"];
    let mut text = names.join(",") + "\n";
    let mut level = [150.0, 180.0, 160.0, 165.0, 110.0];
    for t in 0..200u64 {
        for (k, v) in level.iter_mut().enumerate() {
            let h = (t * 2654435761 + k as u64 * 40503) % 1000;
            *v += (h as f64 / 1000.0 - 0.5) * 0.8;
        }
        text += &level.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(",");
        text.push('\n');
    }
    fs::write(d.join("fx.csv"), text).unwrap();
    ok(d, &["discover-ts", "--data", "fx.csv", "--max-lag", "1", "--format", "dot", "--out", "fx.dot"]);
    let dot = fs::read_to_string(d.join("fx.dot")).unwrap();
    for n in names {
        assert!(dot.contains(&format!("\"{n}(t)\"")) && dot.contains(&format!("\"{n}(t-1)\"")));
    }
}

#[test]
fn benchmark_row_counts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["benchmark", "--protocol", "pk-sweep", "--reps", "1", "--samples", "120", "--out", "pk.csv"]);
    assert_eq!(fs::read_to_string(d.join("pk.csv")).unwrap().lines().count(), 1 + 5);
    let out = ok(d, &["benchmark", "--protocol", "ts-sweep", "--reps", "1", "--samples", "100,150", "--out", "ts.csv"]);
    assert_eq!(fs::read_to_string(d.join("ts.csv")).unwrap().lines().count(), 1 + 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("n=150"));
    assert!(out.stdout.is_empty());
    ok(d, &["benchmark", "--protocol", "ts-sweep", "--reps", "1", "--samples", "100,150", "--out", "ts2.csv"]);
    assert_eq!(fs::read(d.join("ts.csv")).unwrap(), fs::read(d.join("ts2.csv")).unwrap());
}

#[test]
fn replay_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["simulate", "--seed", "1", "--samples", "200", "--out", "s.csv", "--truth", "s.json"]);
    ok(d, &["discover", "--data", "s.csv", "--out", "g.json", "--dot", "g.dot"]);
    let m = RunManifest::read(&manifest_path(&d.join("g.json"))).unwrap();
    assert_eq!(m.command, "discover");
    assert_eq!(m.inputs.len(), 1);
    assert_eq!(m.outputs.len(), 2);
    assert_eq!(m.config["discovery"]["alpha"], 0.01);
    let before = fs::read(d.join("g.json")).unwrap();
    fs::remove_file(d.join("g.json")).unwrap();
    ok(d, &["replay", "g.json.manifest.json"]);
    assert_eq!(fs::read(d.join("g.json")).unwrap(), before);

    let sim = RunManifest::read(&manifest_path(&d.join("s.csv"))).unwrap();
    assert_eq!(sim.seed, Some(1));
    ok(d, &["replay", "s.csv.manifest.json"]);

    // Changed input data is refused.
    fs::write(d.join("s.csv"), "X1,X2\n1,2\n3,5\n").unwrap();
    assert_eq!(code(d, &["replay", "g.json.manifest.json"]), 2);
}
