use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_winding-lab");

const CASES: &[(&str, &str)] = &[
    ("simulate", "steps = 64\nsamples = 2"),
    ("winding-field", "steps = 256\ngrid_n = 32"),
    ("area", "steps = 1024\nn = 1, 2\nresolution = 0.004"),
    ("local-time", "steps = 1024\nsamples = 2\nscale = 64"),
    ("theorem1", "steps = 512\nsamples = 3\nn = 2, 3\nresolution = 0.004"),
    ("mean-study", "steps = 512\nsamples = 3\nn = 2, 3\nresolution = 0.004"),
    ("theorem2", "steps = 512\nsamples = 2\nn = 2, 3\nresolution = 0.004\natoms = 200\nell_steps = 512"),
    ("sandwich", "steps = 512\nsamples = 2\nn = 9\nt = 1\np = 1\nresolution = 0.004\npoints = 50"),
    ("tabulate", "which = g_n\nn = 2\nr_points = 2"),
];

fn run(sub: &str, config: &str, dir: &Path, threads: &str, extra: &[&str]) -> std::process::Output {
    std::fs::create_dir_all(dir).unwrap();
    let cfg = dir.join("run.conf");
    std::fs::write(&cfg, config).unwrap();
    Command::new(BIN)
        .arg(sub)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .env("RAYON_NUM_THREADS", threads)
        .output()
        .unwrap()
}

#[test]
fn every_subcommand_is_byte_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    for (sub, config) in CASES {
        let a = tmp.path().join(format!("{sub}-a"));
        let b = tmp.path().join(format!("{sub}-b"));
        let oa = run(sub, config, &a, "1", &[]);
        let ob = run(sub, config, &b, "4", &[]);
        assert!(oa.status.success(), "{sub}: {}", String::from_utf8_lossy(&oa.stderr));
        assert!(ob.status.success(), "{sub}: {}", String::from_utf8_lossy(&ob.stderr));
        for file in ["results.json", "rows.csv"] {
            let fa = std::fs::read(a.join("out").join(file)).unwrap();
            let fb = std::fs::read(b.join("out").join(file)).unwrap();
            assert_eq!(fa, fb, "{sub}/{file} differs between runs");
        }
        let v: serde_json::Value =
            serde_json::from_slice(&std::fs::read(a.join("out/results.json")).unwrap()).unwrap();
        let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
        assert_eq!(keys, ["config", "rows", "runtime_s"], "{sub}");
        assert!(v["runtime_s"].is_null());
        assert!(!v["rows"].as_array().unwrap().is_empty(), "{sub}");
        assert_eq!(v["config"]["kind"], *sub);
    }
}

#[test]
fn flags_override_config() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run("theorem1", "steps = 512\nsamples = 3\nn = 2\nresolution = 0.004", tmp.path(), "1",
        &["--samples", "2", "--seed", "5", "--steps", "256"]);
    assert!(o.status.success());
    let v: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("out/results.json")).unwrap()).unwrap();
    assert_eq!(v["config"]["samples"], 2);
    assert_eq!(v["config"]["seed"], 5);
    assert_eq!(v["rows"][0]["steps"], 256);
    assert_eq!(v["rows"][0]["sample_last"], 1);
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    for (sub, config) in [
        ("theorem1", "colour = blue"),
        ("theorem1", "n = 8, 4\nm = 8, 4"),
        ("sandwich", "n = 16"),
        ("tabulate", "which = x"),
    ] {
        let o = run(sub, config, tmp.path(), "1", &[]);
        assert_eq!(o.status.code(), Some(2), "{sub} with '{config}'");
    }
    let o = Command::new(BIN).args(["area", "--config", "/nonexistent/file.conf"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numeric_failure_exits_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let config = "mode = joint\nn = 2\nsamples = 2\nsteps = 64\nx = 1e308, 1e308\ny = -1e308, -1e308";
    let o = run("mean-study", config, tmp.path(), "1", &[]);
    assert_eq!(o.status.code(), Some(3));
}
