use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn tvising(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tvising")).args(args).output().unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        Self { dir: tempfile::tempdir().unwrap() }
    }

    fn file(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn write(&self, name: &str, text: &str) -> PathBuf {
        let p = self.file(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    fn read(&self, name: &str) -> String {
        std::fs::read_to_string(self.file(name)).unwrap()
    }

    fn json(&self, name: &str) -> serde_json::Value {
        serde_json::from_str(&self.read(name)).unwrap()
    }

    fn simulate(&self, scenario: &str) -> Output {
        let s = self.write("scenario.json", scenario);
        tvising(&[
            "simulate",
            "--scenario",
            path_str(&s),
            "--data",
            path_str(&self.file("data.csv")),
            "--truth",
            path_str(&self.file("truth.json")),
        ])
    }
}

const SMALL: &str = r#"{"p": 4, "n": 100, "seed": 3,
    "edges": [{"u": 0, "v": 1, "kind": "constant", "value": 0.6},
              {"u": 2, "v": 3, "kind": "constant", "value": -0.6}]}"#;

fn static_chain(n: usize) -> String {
    format!(
        r#"{{"p": 5, "n": {n}, "seed": 12,
            "edges": [{{"u": 0, "v": 1, "kind": "constant", "value": 0.8}},
                      {{"u": 1, "v": 2, "kind": "constant", "value": -0.8}},
                      {{"u": 2, "v": 3, "kind": "constant", "value": 0.8}},
                      {{"u": 3, "v": 4, "kind": "constant", "value": 0.8}}],
            "bandwidth": {{"fixed": 1.0}}, "tau_grid": [0.5]}}"#
    )
}

#[test]
fn simulate_writes_csv_and_truth() {
    let ws = Workspace::new();
    let out = ws.simulate(SMALL);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = ws.read("data.csv");
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "t,x1,x2,x3,x4");
    assert_eq!(lines.len(), 101);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 5));
    assert!(lines[1..].iter().all(|l| l.split(',').skip(1).all(|v| v == "1" || v == "-1")));

    let truth = ws.json("truth.json");
    assert_eq!(truth["taus"].as_array().unwrap().len(), 9);
    assert_eq!(truth["taus"][0]["edges"].as_array().unwrap().len(), 2);
    assert_eq!(truth["taus"][0]["edges"][1], serde_json::json!({"u": 2, "v": 3, "sign": -1}));
}

#[test]
fn simulate_is_byte_identical_for_a_seed() {
    let a = Workspace::new();
    let b = Workspace::new();
    assert!(a.simulate(SMALL).status.success());
    assert!(b.simulate(SMALL).status.success());
    assert_eq!(a.read("data.csv"), b.read("data.csv"));
    assert_eq!(a.read("truth.json"), b.read("truth.json"));

    let c = Workspace::new();
    assert!(c.simulate(&SMALL.replace(r#""seed": 3"#, r#""seed": 4"#)).status.success());
    assert_ne!(a.read("data.csv"), c.read("data.csv"));
}

#[test]
fn simulate_rejects_enumeration_beyond_limit() {
    let ws = Workspace::new();
    let out = ws.simulate(r#"{"p": 25, "n": 10, "seed": 1, "sampler": {"method": "exact"}, "edges": []}"#);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("enumeration"), "{}", stderr(&out));

    let gibbs = r#"{"p": 25, "n": 10, "seed": 1, "sampler": {"method": "gibbs", "burn_in": 20, "thin": 1},
                    "edges": [{"u": 0, "v": 24, "kind": "constant", "value": 0.3}]}"#;
    let out = ws.simulate(gibbs);
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn simulate_reports_the_bad_field() {
    let ws = Workspace::new();
    let out = ws.simulate(&SMALL.replace(r#""value": 0.6}"#, r#""value": "strong"}"#));
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("edges[0]"), "{}", stderr(&out));
}

#[test]
fn estimate_recovers_the_simulated_chain() {
    let ws = Workspace::new();
    assert!(ws.simulate(&static_chain(3000)).status.success());
    let out = tvising(&[
        "estimate",
        "--data",
        path_str(&ws.file("data.csv")),
        "--tau",
        "0.5",
        "--bandwidth",
        "1",
        "--lambda-auto",
        "1",
        "--out",
        path_str(&ws.file("est.json")),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let est = ws.json("est.json");
    let edges: Vec<(u64, u64, i64)> = est["estimates"][0]["edges"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| (e["u"].as_u64().unwrap(), e["v"].as_u64().unwrap(), e["sign"].as_i64().unwrap()))
        .collect();
    assert_eq!(edges, vec![(0, 1, 1), (1, 2, -1), (2, 3, 1), (3, 4, 1)]);
    assert!(est["estimates"][0]["solver_stats"]["max_kkt_residual"].as_f64().unwrap() <= 1e-7);

    let out = tvising(&[
        "evaluate",
        "--estimates",
        path_str(&ws.file("est.json")),
        "--truth",
        path_str(&ws.file("truth.json")),
        "--out",
        path_str(&ws.file("eval.json")),
        "--csv",
        path_str(&ws.file("metrics.csv")),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let eval = ws.json("eval.json");
    assert_eq!(eval["per_tau"][0]["signed_exact"], true);
    assert_eq!(eval["mean_f1"], 1.0);
    let metrics = ws.read("metrics.csv");
    assert!(metrics.starts_with("tau,precision,recall,f1,signed_exact"));
    assert_eq!(metrics.lines().nth(1).unwrap(), "0.5,1,1,1,1,0,4,4,4");
}

#[test]
fn huge_lambda_gives_no_edges() {
    let ws = Workspace::new();
    assert!(ws.simulate(SMALL).status.success());
    let out = tvising(&["estimate", "--data", path_str(&ws.file("data.csv")), "--tau", "grid:0.2:0.8:3", "--lambda", "100"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let est: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let estimates = est["estimates"].as_array().unwrap();
    assert_eq!(estimates.len(), 3);
    assert!(estimates.iter().all(|e| e["edges"].as_array().unwrap().is_empty()));
}

#[test]
fn empty_window_is_an_input_error() {
    let ws = Workspace::new();
    assert!(ws.simulate(SMALL).status.success());
    let out = tvising(&[
        "estimate",
        "--data",
        path_str(&ws.file("data.csv")),
        "--tau",
        "0.505",
        "--bandwidth",
        "0.001",
        "--out",
        path_str(&ws.file("est.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("window"), "{}", stderr(&out));
    let est = ws.json("est.json");
    assert_eq!(est["errors"][0]["tau"], 0.505);
}

#[test]
fn malformed_csv_names_the_line() {
    let ws = Workspace::new();
    let bad = ws.write("bad.csv", "t,x1,x2\n0.1,1,-1\n0.2,1\n");
    let out = tvising(&["estimate", "--data", path_str(&bad), "--tau", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));

    let nonbinary = ws.write("nb.csv", "t,x1,x2\n0.1,1,-1\n0.2,1,0\n");
    let out = tvising(&["estimate", "--data", path_str(&nonbinary), "--tau", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

#[test]
fn zero_one_input_matches_spin_input() {
    let ws = Workspace::new();
    assert!(ws.simulate(SMALL).status.success());
    let spins = ws.read("data.csv");
    let zero_one: String = spins
        .lines()
        .enumerate()
        .map(|(i, l)| {
            if i == 0 {
                format!("{l}\n")
            } else {
                let mut f: Vec<String> = l.split(',').map(String::from).collect();
                for v in f.iter_mut().skip(1) {
                    if v == "-1" {
                        *v = "0".into();
                    }
                }
                format!("{}\n", f.join(","))
            }
        })
        .collect();
    let zo = ws.write("zo.csv", &zero_one);
    let a = tvising(&["estimate", "--data", path_str(&ws.file("data.csv")), "--tau", "0.5", "--lambda", "0.05"]);
    let b = tvising(&["estimate", "--data", path_str(&zo), "--tau", "0.5", "--lambda", "0.05", "--zero-one"]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = tvising(&["estimate", "--data", path_str(&zo), "--tau", "0.5"]);
    assert_eq!(c.status.code(), Some(2));
}

#[test]
fn evaluate_rejects_grid_mismatch() {
    let ws = Workspace::new();
    assert!(ws.simulate(SMALL).status.success());
    let out = tvising(&[
        "estimate",
        "--data",
        path_str(&ws.file("data.csv")),
        "--tau",
        "grid:0.1:0.9:5",
        "--out",
        path_str(&ws.file("est.json")),
    ]);
    assert!(out.status.success());
    let out = tvising(&[
        "evaluate",
        "--estimates",
        path_str(&ws.file("est.json")),
        "--truth",
        path_str(&ws.file("truth.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("grid"), "{}", stderr(&out));
}

#[test]
fn diagnose_reports_assumptions_and_deviations() {
    let ws = Workspace::new();
    assert!(ws.simulate(&static_chain(2000)).status.success());
    let out = tvising(&[
        "diagnose",
        "--scenario",
        path_str(&ws.file("scenario.json")),
        "--out",
        path_str(&ws.file("report.json")),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let r = ws.json("report.json");
    let nodes = r["taus"][0]["nodes"].as_array().unwrap();
    assert_eq!(nodes.len(), 5);
    assert_eq!(nodes[1]["neighborhood"], serde_json::json!([0, 2]));
    assert_eq!(nodes[0]["s"], 2);
    assert!(r["taus"][0]["deviations"].is_null());

    let out = tvising(&[
        "diagnose",
        "--scenario",
        path_str(&ws.file("scenario.json")),
        "--data",
        path_str(&ws.file("data.csv")),
        "--out",
        path_str(&ws.file("report.json")),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let r = ws.json("report.json");
    let dev = &r["taus"][0]["deviations"];
    assert_eq!(dev["reference"], "true");
    let cov = dev["cov_max_abs"].as_f64().unwrap();
    assert!(cov > 0.0 && cov < 0.2, "{cov}");
}

#[test]
fn sweep_single_cell_gives_one_row() {
    let ws = Workspace::new();
    let s = ws.write("s.json", &static_chain(200));
    let out = tvising(&["sweep", "--scenario", path_str(&s), "--axis", "lambda", "--values", "0.1", "--seeds", "1"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "axis,value,seed,tau,precision,recall,f1,signed_exact,estimated_edges,status");
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("lambda,0.1,12,0.5,"));
    assert!(lines[1].ends_with(",ok"));
}

#[test]
fn lambda_sweep_edge_count_grows_as_lambda_falls() {
    let ws = Workspace::new();
    let s = ws.write("s.json", &static_chain(1500));
    // lambda at which every node regression is exactly zero for seed 12
    let scenario = tvising_cli::scenario::Scenario::from_json(&static_chain(1500)).unwrap();
    let data = tvising::generate_dataset(&scenario.path().unwrap(), 1500, scenario.sampler, 12).unwrap();
    let w = scenario.estimator_config().weights(&data, 0.5).unwrap();
    let threshold = (0..5)
        .map(|u| tvising::optimizer::zero_solution_threshold(&data, &w, u).unwrap())
        .fold(0.0, f64::max);
    let values: Vec<f64> = [10.0, 3.0, 1.0, 0.3, 0.1, 0.03, 0.01].iter().map(|f| f * threshold).collect();
    let list = values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
    let out = tvising(&["sweep", "--scenario", path_str(&s), "--axis", "lambda", "--values", &list, "--seeds", "3"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = String::from_utf8(out.stdout).unwrap();
    for seed in ["12", "13", "14"] {
        let counts: Vec<u64> = csv
            .lines()
            .skip(1)
            .filter(|l| l.split(',').nth(2) == Some(seed))
            .map(|l| l.split(',').nth(8).unwrap().parse().unwrap())
            .collect();
        assert_eq!(counts.len(), values.len());
        assert_eq!(counts[0], 0);
        assert!(counts.windows(2).all(|w| w[1] >= w[0]), "seed {seed}: {counts:?}");
        assert!(*counts.last().unwrap() >= 4, "seed {seed}: {counts:?}");
    }
}

#[test]
fn exit_codes_for_bad_invocations() {
    let ws = Workspace::new();
    let out = tvising(&["estimate", "--data", path_str(&ws.file("missing.csv")), "--tau", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
    let out = tvising(&["estimate", "--tau", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
    let out = tvising(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    let s = ws.write("s.json", SMALL);
    let out = tvising(&["sweep", "--scenario", path_str(&s), "--axis", "kappa", "--values", "1,2"]);
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_tvising"))
        .env("TVISING_THREADS", "zero")
        .args(["sweep", "--scenario", path_str(&s), "--axis", "n", "--values", "50,60"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("TVISING_THREADS"));
    assert_eq!(tvising(&["--help"]).status.code(), Some(0));
}
