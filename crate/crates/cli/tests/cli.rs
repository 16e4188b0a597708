use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_linksched")).args(args).output().expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn chain_oracle_prints_maximal_rows() {
    let out = run(&["oracle", "--linear", "10", "--maximal"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert!(rows.contains(&"(3,4) (8,9)"));
    assert!(rows.contains(&"(1,2) (4,5) (7,8)"));
    assert!(rows.iter().all(|r| r.starts_with('(')));
}

#[test]
fn oracle_json_lists_active_links() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("o.json");
    let out = run(&["oracle", "--linear", "6", "--maximal", "--format", "json", "--out", p(&json)]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&json).unwrap()).unwrap();
    let stdout: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v, stdout);
    assert!(v.as_array().unwrap().iter().all(|row| !row["active"].as_array().unwrap().is_empty()));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = run(&["transmogrify"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn every_subcommand_documents_its_flags() {
    for (sub, flag) in [
        ("gen", "--links"),
        ("oracle", "--maximal"),
        ("mf", "--damping"),
        ("clt", "--mc-samples"),
        ("schedule", "--max-iter"),
        ("sweep", "--spec"),
    ] {
        let out = run(&[sub, "--help"]);
        assert_eq!(out.status.code(), Some(0), "{sub}");
        let help = String::from_utf8(out.stdout).unwrap();
        assert!(help.contains(flag) && help.contains("--seed") && help.contains("--threads"), "{sub}");
    }
}

#[test]
fn gen_then_mf_then_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("net.json");
    assert_eq!(run(&["gen", "--links", "30", "--area-side", "6", "--out", p(&net)]).status.code(), Some(1));
    assert_eq!(run(&["--seed", "4", "gen", "--links", "30", "--area-side", "6", "--out", p(&net)]).status.code(), Some(0));

    let mf = dir.path().join("mf.json");
    assert_eq!(run(&["mf", "--net", p(&net), "--gamma-f", "2", "--out", p(&mf)]).status.code(), Some(0));
    let sol: serde_json::Value = serde_json::from_slice(&std::fs::read(&mf).unwrap()).unwrap();
    assert_eq!(sol["mu"].as_array().unwrap().len(), 30);
    assert!(sol["converged"].as_bool().unwrap());

    let trace = dir.path().join("trace.json");
    let args = ["schedule", "--net", p(&net), "--mode", "mf", "--gamma-f", "2", "--seed", "9", "--out", p(&trace)];
    let first = run(&args);
    assert_eq!(first.status.code(), Some(0));
    let ids: Vec<usize> =
        String::from_utf8(first.stdout.clone()).unwrap().split_whitespace().map(|s| s.parse().unwrap()).collect();
    let t: serde_json::Value = serde_json::from_slice(&std::fs::read(&trace).unwrap()).unwrap();
    let config: Vec<usize> = serde_json::from_value(t["config"].clone()).unwrap();
    assert_eq!(ids, config);
    assert_eq!(run(&args).stdout, first.stdout, "same seed, same schedule");
}

#[test]
fn schedule_without_seed_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["schedule", "--gamma-f", "4", "--out", p(&dir.path().join("t.json"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"));
}

#[test]
fn clt_writes_table_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("k.csv");
    let json = dir.path().join("s.json");
    let args = ["clt", "--gamma-f", "4", "--k-max", "20", "--out", p(&csv), "--summary", p(&json)];
    assert_eq!(run(&args).status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("k,E_u,V_u,E_v,V_v,lyapunov_ratio_at_k"));
    assert_eq!(lines.count(), 20);
    let s: serde_json::Value = serde_json::from_slice(&std::fs::read(&json).unwrap()).unwrap();
    assert!(s["ks_distance"].is_null());
    assert!(s["truncation_k"].as_u64().unwrap() > 20);

    let with_mc = ["clt", "--gamma-f", "4", "--mc-samples", "500", "--out", p(&csv), "--summary", p(&json)];
    assert_eq!(run(&with_mc).status.code(), Some(1), "Monte Carlo needs a seed");
    let mut seeded = with_mc.to_vec();
    seeded.extend(["--seed", "2"]);
    assert_eq!(run(&seeded).status.code(), Some(0));
    let s: serde_json::Value = serde_json::from_slice(&std::fs::read(&json).unwrap()).unwrap();
    assert!(s["ks_distance"].as_f64().unwrap() > 0.0);
}

#[test]
fn invalid_values_and_missing_files() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("k.csv");
    let json = dir.path().join("s.json");
    let bad = ["clt", "--gamma-f=-1", "--out", p(&csv), "--summary", p(&json)];
    assert_eq!(run(&bad).status.code(), Some(1));
    let missing = run(&["mf", "--net", p(&dir.path().join("none.json")), "--gamma-f", "2", "--out", p(&json)]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn sweep_writes_records_summary_and_curves() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{
            "topology": { "seeds": [7], "n_links": 40, "area_side": 6.0 },
            "sweep": { "gamma_f": [2.0, 4.0], "alpha": [4.0], "sinr_th": [10.0] },
            "modes": ["ignore", "clt"],
            "replications": 3,
            "seed": 1
        }"#,
    )
    .unwrap();
    let out = dir.path().join("results.csv");
    let curves = dir.path().join("curves.csv");
    let status = run(&["sweep", "--spec", p(&spec), "--out", p(&out), "--curves", p(&curves), "--threads", "1"]);
    assert_eq!(status.status.code(), Some(0), "{}", String::from_utf8_lossy(&status.stderr));

    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("mode,gamma_f,alpha,sinr_th,replication,outage,active_links,iterations,converged"));
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 3);
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("results.summary.json")).unwrap()).unwrap();
    assert_eq!(summary["points"].as_array().unwrap().len(), 4);
    assert!(std::fs::read_to_string(&curves).unwrap().starts_with("mode,gamma_f,alpha,sinr_th,replication,round,changed,active"));
    assert!(dir.path().join("curves.histogram.json").exists());

    // --seed overrides the spec seed
    let other = dir.path().join("other.csv");
    assert_eq!(run(&["--seed", "99", "sweep", "--spec", p(&spec), "--out", p(&other)]).status.code(), Some(0));
    let again = dir.path().join("again.csv");
    assert_eq!(run(&["sweep", "--spec", p(&spec), "--out", p(&again)]).status.code(), Some(0));
    assert_eq!(std::fs::read(&again).unwrap(), std::fs::read(&out).unwrap());
    assert_ne!(std::fs::read(&other).unwrap(), std::fs::read(&out).unwrap());
}
