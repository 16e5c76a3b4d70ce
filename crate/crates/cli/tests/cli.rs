use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use symclt::SampleBatch;
use tempfile::TempDir;

fn write_config(dir: &Path, name: &str, json: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    fs::write(&path, json).unwrap();
    path
}

fn symclt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_symclt"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run(sub: &str, config: &Path, out: &Path) -> Output {
    symclt(&[sub, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

const SPHERE_SAMPLE: &str =
    r#"{"distributions":[{"type":"sphere_shell"}],"dims":[10],"samples":1000,"seed":4}"#;

#[test]
fn sample_writes_rows_on_the_sphere() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", SPHERE_SAMPLE);
    let out = tmp.path().join("out");
    let o = run("sample", &cfg, &out);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let batch =
        SampleBatch::read_binary(fs::File::open(out.join("sample_sphere_n10.bin")).unwrap()).unwrap();
    assert_eq!(batch.len(), 1000);
    assert_eq!(batch.dim(), 10);
    for row in batch.rows() {
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 10f64.sqrt()).abs() < 1e-12);
    }
    let moments: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("moments_sphere_n10.json")).unwrap()).unwrap();
    assert_eq!(moments["samples"], 1000);
    let run: serde_json::Value = serde_json::from_slice(&fs::read(out.join("run.json")).unwrap()).unwrap();
    assert!(run["version"].as_str().unwrap().starts_with(env!("CARGO_PKG_VERSION")));
    assert_eq!(run["config"]["seed"], 4);
}

#[test]
fn sample_is_byte_identical_across_runs() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", SPHERE_SAMPLE);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(code(&run("sample", &cfg, &a)), 0);
    assert_eq!(code(&run("sample", &cfg, &b)), 0);
    for f in ["sample_sphere_n10.bin", "moments_sphere_n10.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", SPHERE_SAMPLE);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(code(&run("sample", &cfg, &a)), 0);
    let o = symclt(&[
        "sample",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        b.to_str().unwrap(),
        "--seed",
        "5",
    ]);
    assert_eq!(code(&o), 0);
    let f = "sample_sphere_n10.bin";
    assert_ne!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
}

#[test]
fn config_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let zero = write_config(
        tmp.path(),
        "zero.json",
        r#"{"distributions":[{"type":"sphere_shell"}],"dims":[10],"samples":0}"#,
    );
    assert_eq!(code(&run("sample", &zero, &out)), 2);
    let empty = write_config(
        tmp.path(),
        "empty.json",
        r#"{"distributions":[{"type":"lp_ball_uniform","p":"inf"}],"dims":[],"samples":100,
            "ank":{"k":1,"n_subspaces":4,"eps":[0.1]}}"#,
    );
    assert_eq!(code(&run("scan-ank", &empty, &out)), 2);
    let wrong = write_config(
        tmp.path(),
        "wrong.json",
        r#"{"command":"certify","distributions":[{"type":"sphere_shell"}],"dims":[10],"samples":10}"#,
    );
    assert_eq!(code(&run("sample", &wrong, &out)), 2);
    let garbage = write_config(tmp.path(), "garbage.json", "{not json");
    assert_eq!(code(&run("certify", &garbage, &out)), 2);
    assert_eq!(code(&run("certify", &tmp.path().join("missing.json"), &out)), 2);
}

#[test]
fn certify_small_cube_is_vacuous_and_passes() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"distributions":[{"type":"lp_ball_uniform","p":"inf"}],"dims":[4],
            "thetas":["e1"],"samples":20000,"seed":1}"#,
    );
    let out = tmp.path().join("out");
    let o = run("certify", &cfg, &out);
    assert_eq!(code(&o), 0);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("vacuous bound, trivially passes"), "{stdout}");
    let csv = fs::read_to_string(out.join("reports.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.lines().nth(1).unwrap().ends_with("\"vacuous bound, trivially passes\""));
}

#[test]
fn certify_cube_diagonal_passes_and_report_replays() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"command":"certify","distributions":[{"type":"lp_ball_uniform","p":"inf"}],"dims":[100],
            "thetas":["diagonal"],"samples":100000,"seed":2}"#,
    );
    let out = tmp.path().join("out");
    assert_eq!(code(&run("certify", &cfg, &out)), 0);
    let path = out.join("reports.json");
    let m: serde_json::Value = serde_json::from_slice(&fs::read(&path).unwrap()).unwrap();
    let r = &m["results"][0];
    assert_eq!(r["verdict"], "pass");
    assert!((r["bound"]["value"].as_f64().unwrap() - 0.634).abs() < 1e-3);
    assert_eq!(m["config"]["samples"], 100000);

    assert_eq!(code(&symclt(&["report", path.to_str().unwrap()])), 0);
    // a failing verdict in the replayed file turns into exit 1
    let tampered = fs::read_to_string(&path).unwrap().replace("\"pass\"", "\"fail\"");
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, tampered).unwrap();
    assert_eq!(code(&symclt(&["report", bad.to_str().unwrap()])), 1);
}

#[test]
fn diagnose_reflection_slope_table() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"distributions":[{"type":"lp_ball_uniform","p":"inf"}],"dims":[10],
            "thetas":["e1","diagonal"],"samples":200000,"seed":3,
            "diagnose":{"kind":"reflection","frame":"standard"}}"#,
    );
    let out = tmp.path().join("out");
    assert_eq!(code(&run("diagnose", &cfg, &out)), 0);
    let csv = fs::read_to_string(out.join("diagnose_reflection.csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let two_over_n: f64 = f[col("two_over_n")].parse().unwrap();
        assert!((two_over_n - 0.2).abs() < 1e-15);
        let ratio: f64 = f[col("slope_over_lambda")].parse().unwrap();
        assert!((ratio - 1.0).abs() < 0.05, "{line}");
    }
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn rotation_on_cube_is_inapplicable() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"distributions":[{"type":"lp_ball_uniform","p":"inf"}],"dims":[10],"samples":1000,
            "diagnose":{"kind":"rotation","eps":[0.1]}}"#,
    );
    let o = run("diagnose", &cfg, &tmp.path().join("out"));
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn scan_ank_writes_one_row_per_n_and_eps() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"distributions":[{"type":"lp_ball_uniform","p":"inf"}],"dims":[10,20],"samples":5000,
            "seed":6,"ank":{"k":1,"n_subspaces":8,"eps":[0.05,0.1]}}"#,
    );
    let out = tmp.path().join("out");
    assert_eq!(code(&run("scan-ank", &cfg, &out)), 0);
    let csv = fs::read_to_string(out.join("ank.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "n,k,eps,fraction,n_subspaces,n_dirs,N,seed");
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let v: serde_json::Value = serde_json::from_slice(&fs::read(&path).unwrap()).unwrap();
        assert!(v["command"].is_string(), "{}", path.display());
        count += 1;
    }
    assert!(count >= 11);
}
