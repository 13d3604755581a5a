//! End-to-end runs of the `nvm` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn nvm(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nvm"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .env_remove("NVM_OUTPUT_DIR")
        .output()
        .expect("nvm runs")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn header(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn exact_stationary_on_k2() {
    let dir = tempfile::tempdir().unwrap();
    let o = nvm(&["exact", "stationary", "--graph", "k2", "--delta", "0.5"], dir.path());
    assert!(o.status.success());
    let probs: Vec<f64> =
        stdout_json(&o)["probabilities"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    for (p, e) in probs.iter().zip([0.375, 0.125, 0.125, 0.375]) {
        assert!((p - e).abs() <= 1e-10);
    }
    assert_eq!(header(&dir.path().join("stationary.csv")), "state,config,probability");
}

#[test]
fn reversibility_verdict_on_path3() {
    let dir = tempfile::tempdir().unwrap();
    let o = nvm(&["reversibility", "--graph", "path:3", "--delta", "0.5"], dir.path());
    assert!(o.status.success());
    let v = stdout_json(&o);
    assert_eq!(v["verdict"], "not reversible");
    let states = v["witness"]["states"].as_array().unwrap();
    assert!(states.len() >= 4);
    assert_eq!(states.first(), states.last());
    let file = read_json(&dir.path().join("reversibility.json"));
    assert_eq!(file["witness"], v["witness"]);
}

#[test]
fn cycle_reports_ising_check() {
    let dir = tempfile::tempdir().unwrap();
    let v = stdout_json(&nvm(&["reversibility", "--graph", "cycle:5", "--delta", "1"], dir.path()));
    assert_eq!(v["verdict"], "reversible");
    assert!(v["ising"]["detailed_balance_violation"].as_f64().unwrap() <= 1e-12);
}

#[test]
fn mcurve_writes_table_fit_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let args =
        ["mcurve", "--graph", "cycle:8", "--delta", "0.5", "--t-max", "10", "--points", "50", "--replicas", "10000", "--seed", "7"];
    let o = nvm(&args, dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("mcurve.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,vertex,p_hat,stderr"));
    // 8 vertex rows plus a summary row per grid time.
    assert_eq!(lines.count(), 50 * 9);
    let fit = read_json(&dir.path().join("mcurve-fit.json"));
    assert!(fit["c_hat"].as_f64().unwrap() > 0.0);
    let m = read_json(&dir.path().join("manifest.json"));
    assert_eq!(m["command"], "mcurve");
    assert_eq!(m["seed"], 7);
    assert_eq!(m["args"]["mcurve"]["replicas"], 10000);
    assert_eq!(m["versions"]["nvm"], env!("CARGO_PKG_VERSION"));
    assert!(m["wall_time_seconds"].as_f64().unwrap() >= 0.0);
    assert!(m["summary"]["bound"]["holds"].as_bool().unwrap());
}

#[test]
fn artifact_headers() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let runs: [(&[&str], &str, &str); 7] = [
        (&["simulate", "--graph", "cycle:5", "--delta", "0.5", "--trajectory"], "trajectory.csv", "time,vertex,new_spin"),
        (&["couple", "--graph", "path:4", "--delta", "0.5"], "coupling.csv", "time,vertex,x_spin,y_spin,disagreements"),
        (&["exact", "mcurve", "--graph", "k2", "--delta", "0.5"], "exact-mcurve.csv", "t,m,argmax,bound"),
        (&["exact", "otm", "--graph", "k2", "--delta", "0.5"], "otm.csv", "t,tv,union_bound,bound,margin"),
        (&["exact", "transient", "--graph", "k2", "--delta", "0.5", "--t", "1"], "transient.csv", "state,config,probability"),
        (&["mixing-scan", "--delta", "0.5", "--sizes", "4,6"], "mixing-scan.csv", "family,n,delta,epsilon,t_mix,bound,margin"),
        (&["ssm-scan", "--cuboid", "0..4,0..0", "--h", "0:0", "--delta", "1"], "ssm.csv", "u_coords,dist,tv"),
    ];
    for (args, file, expected) in runs {
        let o = nvm(args, d);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(header(&d.join(file)), expected, "{file}");
    }
    let fit = read_json(&d.join("ssm-fit.json"));
    assert!(fit.get("C_hat").is_some() && fit.get("c_hat").is_some() && fit.get("residual").is_some());
    let fit = read_json(&d.join("mixing-fit.json"));
    assert!(fit.get("a").is_some() && fit.get("b").is_some() && fit.get("residual").is_some());
}

#[test]
fn json_format_round_trips_floats() {
    let dir = tempfile::tempdir().unwrap();
    let o = nvm(&["exact", "transient", "--graph", "path:3", "--delta", "0.7", "--t", "0.9", "--format", "json"], dir.path());
    assert!(o.status.success());
    let rows = read_json(&dir.path().join("transient.json"));
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 8);
    let total: f64 = rows.iter().map(|r| r["probability"].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() <= 1e-12);
    assert!(!dir.path().join("transient.csv").exists());
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(&conf, "# stationary law\ngraph = path:3\ndelta = 0.5\n").unwrap();
    let conf = conf.to_str().unwrap();
    let a = stdout_json(&nvm(&["exact", "stationary", "--config", conf], dir.path()));
    assert_eq!(a["probabilities"].as_array().unwrap().len(), 8);
    let b = stdout_json(&nvm(&["exact", "stationary", "--config", conf, "--graph", "k2"], dir.path()));
    assert_eq!(b["probabilities"].as_array().unwrap().len(), 4);
    let m = read_json(&dir.path().join("manifest.json"));
    assert_eq!(m["config_file"]["values"]["delta"], "0.5");
}

#[test]
fn env_var_sets_default_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_nvm"))
        .args(["exact", "mcurve", "--graph", "k2", "--delta", "0.5"])
        .env("NVM_OUTPUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("exact-mcurve.csv").exists());
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn exit_codes_distinguish_failures() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let bad_delta = nvm(&["exact", "stationary", "--graph", "k2", "--delta", "-1"], d);
    assert_eq!(bad_delta.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad_delta.stderr).contains("delta"));
    let voter = nvm(&["exact", "stationary", "--graph", "k2", "--delta", "0"], d);
    assert_eq!(voter.status.code(), Some(2));
    let points = nvm(&["exact", "mcurve", "--graph", "k2", "--delta", "1", "--points", "1"], d);
    assert_eq!(points.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&points.stderr).contains("--points"));
    let unknown_graph = nvm(&["exact", "stationary", "--graph", "star:5", "--delta", "1"], d);
    assert_eq!(unknown_graph.status.code(), Some(2));
    let too_big = nvm(&["exact", "stationary", "--graph", "cycle:21", "--delta", "1"], d);
    assert_eq!(too_big.status.code(), Some(3));
    // One replica on eight vertices almost surely still disagrees at t = 0.5.
    let bound = nvm(
        &["mcurve", "--graph", "cycle:8", "--delta", "0.5", "--replicas", "1", "--t-max", "0.5", "--points", "2", "--check-bound"],
        d,
    );
    assert_eq!(bound.status.code(), Some(4));
    let conf = d.join("bad.conf");
    std::fs::write(&conf, "graph = k2\ncolour = blue\n").unwrap();
    let o = nvm(&["exact", "stationary", "--config", conf.to_str().unwrap()], d);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn graph_file_input() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("k2.txt");
    std::fs::write(&g, "2 1\n0 1\n").unwrap();
    let v = stdout_json(&nvm(&["exact", "stationary", "--graph-file", g.to_str().unwrap(), "--delta", "0.5"], dir.path()));
    assert!((v["probabilities"][0].as_f64().unwrap() - 0.375).abs() <= 1e-10);
    let missing = nvm(&["exact", "stationary", "--graph-file", "/nonexistent/g.txt", "--delta", "0.5"], dir.path());
    assert_eq!(missing.status.code(), Some(2));
}
