use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const CONFIG: &str = r#"{
    "dataset": {"name": "tiny", "synthetic": {"users_per_side": 30, "assertions_per_side": 15,
                "mean_posts_per_user": 3.0, "in_side_probability": 0.9, "seed": 1}},
    "strategies": ["ours-pagerank", "random"],
    "budgets": [6],
    "seeds": [0, 1],
    "batch_size": 2,
    "gcn": {"epochs": 20},
    "perturbation": {"edge_drop_graphs": 2, "edge_add_graphs": 1, "path_drop_graphs": 1},
    "output_dir": "from-config",
    "record_timing": false
}"#;

fn graphal(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_graphal"));
    cmd.args(args).env_remove("GRAPHAL_OUT_DIR");
    if let Some(dir) = env_out {
        cmd.env("GRAPHAL_OUT_DIR", dir);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("exp.json");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn run_writes_results_and_traces() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = dir.path().join("out");
    let o = graphal(
        &[
            "run",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
            "--jobs",
            "1",
        ],
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let results = fs::read_to_string(out.join("results.csv")).unwrap();
    let mut lines = results.lines();
    assert_eq!(
        lines.next().unwrap(),
        "dataset,strategy,centrality,budget,seed,accuracy,macro_f1,elapsed_ms"
    );
    assert_eq!(lines.count(), 4);
    assert!(out.join("aggregate.csv").exists());
    let trace =
        fs::read_to_string(out.join("traces").join("ours-pagerank_B6_seed0.jsonl")).unwrap();
    assert_eq!(trace.lines().count(), 2);
    for line in trace.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["queried"].as_array().unwrap().len() == 2);
        assert!(v["scores"].as_array().is_some());
    }

    // Reruns with timing disabled are byte-identical.
    let again = dir.path().join("again");
    let o = graphal(
        &["run", "--config", &cfg, "--out", again.to_str().unwrap()],
        None,
    );
    assert!(o.status.success());
    assert_eq!(
        results,
        fs::read_to_string(again.join("results.csv")).unwrap()
    );
}

#[test]
fn out_dir_precedence() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        &CONFIG
            .replace(r#"["ours-pagerank", "random"]"#, r#"["random"]"#)
            .replace("[0, 1]", "[0]"),
    );
    let env_dir = dir.path().join("env");
    let o = graphal(&["run", "--config", &cfg], Some(&env_dir));
    assert!(o.status.success());
    assert!(env_dir.join("results.csv").exists());

    let flag_dir = dir.path().join("flag");
    let o = graphal(
        &["run", "--config", &cfg, "--out", flag_dir.to_str().unwrap()],
        Some(&env_dir),
    );
    assert!(o.status.success());
    assert!(flag_dir.join("results.csv").exists());

    let o = graphal(&["run", "--config", &cfg], None);
    assert!(o.status.success());
    assert!(dir.path().join("from-config").join("results.csv").exists());
}

#[test]
fn seed_offset_shifts_seeds() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        &CONFIG
            .replace(r#"["ours-pagerank", "random"]"#, r#"["random"]"#)
            .replace("[0, 1]", "[0]"),
    );
    let out = dir.path().join("o");
    let o = graphal(
        &[
            "run",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
            "--seed-offset",
            "100",
        ],
        None,
    );
    assert!(o.status.success());
    let results = fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(
        results
            .lines()
            .nth(1)
            .unwrap()
            .contains(",random,none,6,100,"),
        "{results}"
    );
}

#[test]
fn invalid_config_names_the_field() {
    let dir = TempDir::new().unwrap();
    let cases = [
        (CONFIG.replace(r#""random""#, r#""bogus""#), "strategies[1]"),
        (
            CONFIG.replace(r#""epochs": 20"#, r#""epochs": 0"#),
            "gcn.epochs",
        ),
        (
            CONFIG.replace(r#""budgets": [6]"#, r#""budgets": [1]"#),
            "budgets",
        ),
    ];
    for (text, field) in cases {
        let cfg = write_config(dir.path(), &text);
        let o = graphal(
            &[
                "run",
                "--config",
                &cfg,
                "--out",
                dir.path().to_str().unwrap(),
            ],
            None,
        );
        assert_eq!(o.status.code(), Some(2), "{field}");
        let stderr = String::from_utf8_lossy(&o.stderr);
        assert!(stderr.contains(field), "{field} not in {stderr}");
    }
}

#[test]
fn gen_synth_writes_loadable_graph() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("g");
    let o = graphal(
        &[
            "gen-synth",
            "--out",
            out.to_str().unwrap(),
            "--users-per-side",
            "20",
            "--assertions-per-side",
            "10",
        ],
        None,
    );
    assert!(o.status.success());
    let nodes = fs::read_to_string(out.join("nodes.jsonl")).unwrap();
    assert_eq!(nodes.lines().count(), 60);
    assert!(fs::read_to_string(out.join("edges.csv"))
        .unwrap()
        .starts_with("src,dst,weight"));

    // A config can point at the generated files.
    let cfg = CONFIG
        .replace(
            r#"{"name": "tiny", "synthetic": {"users_per_side": 30, "assertions_per_side": 15,
                "mean_posts_per_user": 3.0, "in_side_probability": 0.9, "seed": 1}}"#,
            r#"{"name": "files", "nodes": "g/nodes.jsonl", "edges": "g/edges.csv"}"#,
        )
        .replace(r#"["ours-pagerank", "random"]"#, r#"["centrality-degree"]"#);
    let cfg = write_config(dir.path(), &cfg);
    let o = graphal(
        &[
            "run",
            "--config",
            &cfg,
            "--out",
            dir.path().join("r").to_str().unwrap(),
        ],
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn scaling_writes_csv() {
    let dir = TempDir::new().unwrap();
    let o = graphal(
        &[
            "scaling",
            "--sizes",
            "300,600",
            "--metric",
            "pagerank",
            "--budget",
            "4",
            "--out",
            dir.path().to_str().unwrap(),
        ],
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("scaling_pagerank.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "edges,total_selection_time_ms");
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(graphal(&["run"], None).status.code(), Some(2));
    assert_eq!(graphal(&["frobnicate"], None).status.code(), Some(2));
}
