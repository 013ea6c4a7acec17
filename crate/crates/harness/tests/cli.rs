use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn occfluct(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_occfluct")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const SMALL: &str = r#"
id = "thm2_10a"
replicates = 30
t_ladder = [5.0, 10.0]
[model]
d = 1
alpha = 2.0
[model.mu]
components = [{ kind = "point_mass", weight = 1.0, at = [0.0] }]
"#;

#[test]
fn simulate_writes_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "spec.toml", SMALL);
    let out = dir.path().join("out");
    let o = occfluct(&["simulate", "--config", &cfg, "--seed", "5", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["spec.toml", "reports.toml", "metadata.toml", "paths_T5.csv", "paths_T10.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let persisted = fs::read_to_string(out.join("spec.toml")).unwrap();
    assert!(persisted.contains("seed = 5"));
    assert!(persisted.contains("schedule_threshold"));
    let csv = fs::read_to_string(out.join("paths_T10.csv")).unwrap();
    assert!(csv.starts_with("replicate,t,value\n"));
    assert_eq!(csv.lines().count(), 1 + 30 * 2);
    let reports: toml::Value = toml::from_str(&fs::read_to_string(out.join("reports.toml")).unwrap()).unwrap();
    let r = &reports["report"].as_array().unwrap()[0];
    for key in ["name", "value", "se_or_p", "tolerance", "pass"] {
        assert!(r.get(key).is_some(), "{key}");
    }
}

#[test]
fn csv_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "spec.toml", SMALL);
    let mut csvs = Vec::new();
    for threads in ["1", "4"] {
        let out = dir.path().join(format!("out{threads}"));
        let o = occfluct(&["simulate", "--config", &cfg, "--threads", threads, "--out", out.to_str().unwrap()]);
        assert!(o.status.success());
        csvs.push(fs::read(out.join("paths_T10.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
}

#[test]
fn simulate_without_config_is_a_usage_error() {
    let o = occfluct(&["simulate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invalid_spec_aborts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "id = \"thm2_2a\"\n[model]\nd = 5\nbranching_rate = 1.0\n");
    let o = occfluct(&["simulate", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("requires d <"));
}

#[test]
fn cf_eval_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "cf.toml",
        "target = \"stable\"\nindex = 2.0\nskewness = 1.0\nz_grid = [0.0, 1.0]\n",
    );
    let o = occfluct(&["cf-eval", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    let text = fs::read_to_string(dir.path().join("cf.csv")).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows[0], vec![0.0, 1.0, 0.0]);
    assert!((rows[1][1] - (-1f64).exp()).abs() < 1e-15);
}

#[test]
fn riesz_table_far_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "r.toml", "d = 3\nalpha = 2.0\npoints = [[5.0, 0.0, 0.0]]\n");
    let o = occfluct(&["riesz", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    let text = fs::read_to_string(dir.path().join("riesz.csv")).unwrap();
    assert!(text.starts_with("x0,x1,x2,value\n"));
    let v: f64 = text.lines().nth(1).unwrap().split(',').nth(3).unwrap().parse().unwrap();
    assert!((v * 4.0 * std::f64::consts::PI * 5.0 - 1.0).abs() < 0.01);
}

#[test]
fn limit_sample_paths() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "l.toml", "kind = \"zeta\"\nbeta = 1.0\ntimes = [0.5, 1.0]\nreplicates = 20\n");
    let o = occfluct(&["limit-sample", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("paths.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 40);
}

#[test]
fn constants_printed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "k.toml", "id = \"thm2_2a\"\nbranching_rate = 2.0\n");
    let o = occfluct(&["constants", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    let v: toml::Value = toml::from_str(&String::from_utf8_lossy(&o.stdout)).unwrap();
    assert!((v["constant"].as_float().unwrap() - 1.0).abs() < 1e-15);
}

#[test]
fn verify_exit_status_follows_gates() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let ok = occfluct(&["verify", "--level", "fast", "--gates", "dependence,density", "--out", out]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stdout));
    let report = fs::read_to_string(dir.path().join("verify.toml")).unwrap();
    let v: toml::Value = toml::from_str(&report).unwrap();
    assert_eq!(v["gate"].as_array().unwrap().len(), 2);
    let bad = occfluct(&["verify", "--gates", "offspring", "--inject", "force-p1", "--out", out]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stdout).contains("FAIL offspring"));
}
