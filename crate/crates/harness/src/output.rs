//! Writers for bundles, tables and reports. Floats carry 17 significant
//! digits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use occfluct_core::particles::SampledProcess;
use occfluct_core::stats::TestReport;

use crate::error::{HarnessError, Result};
use crate::experiment::ResultBundle;
use crate::spec::ExperimentSpec;
use crate::verify::VerifyOutcome;

/// `{:.16e}`, with TOML spellings for the non-finite values.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

fn quote(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

pub fn paths_csv(p: &SampledProcess) -> String {
    let mut s = String::from("replicate,t,value\n");
    for (i, row) in p.values.iter().enumerate() {
        for (t, v) in p.time_grid.iter().zip(row) {
            let _ = writeln!(s, "{i},{},{}", fmt_f64(*t), fmt_f64(*v));
        }
    }
    s
}

pub fn table_csv(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

fn report_table(s: &mut String, header: &str, r: &TestReport) {
    let _ = writeln!(s, "[[{header}]]");
    let _ = writeln!(s, "name = {}", quote(&r.name));
    let _ = writeln!(s, "value = {}", fmt_f64(r.value));
    let _ = writeln!(s, "se_or_p = {}", fmt_f64(r.se_or_p));
    let _ = writeln!(s, "tolerance = {}", fmt_f64(r.tolerance));
    let cmp = match r.comparison {
        occfluct_core::stats::Comparison::AtMost => "at_most",
        occfluct_core::stats::Comparison::AtLeast => "at_least",
    };
    let _ = writeln!(s, "comparison = {}", quote(cmp));
    let _ = writeln!(s, "pass = {}", r.pass);
    let sizes: Vec<String> = r.sample_sizes.iter().map(|n| n.to_string()).collect();
    let _ = writeln!(s, "sample_sizes = [{}]", sizes.join(", "));
    if !r.metadata.is_empty() {
        let _ = writeln!(s, "[{header}.metadata]");
        for (k, v) in &r.metadata {
            let _ = writeln!(s, "{} = {}", quote(k), quote(v));
        }
    }
    s.push('\n');
}

pub fn reports_toml(reports: &[TestReport]) -> String {
    let mut s = String::new();
    for r in reports {
        report_table(&mut s, "report", r);
    }
    s
}

pub fn metadata_toml(b: &ResultBundle) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "id = {}", quote(b.id.name()));
    let _ = writeln!(s, "spec_hash = {}", quote(&b.spec_hash));
    let _ = writeln!(s, "seed = {}", b.seed);
    let _ = writeln!(s, "version = {}", quote(&b.version));
    let _ = writeln!(s, "wall_seconds = {}", fmt_f64(b.wall_seconds));
    let warnings: Vec<String> = b.warnings.iter().map(|w| quote(w)).collect();
    let _ = writeln!(s, "warnings = [{}]", warnings.join(", "));
    let _ = writeln!(s, "passed = {}", b.passed());
    for r in &b.rungs {
        let _ = writeln!(s, "\n[[rung]]");
        for (k, v) in [
            ("t", r.t),
            ("h", r.h),
            ("norming", r.norming),
            ("flagged_fraction", r.flagged_fraction),
            ("individuals", r.individuals),
            ("truncation_bias", r.truncation_bias),
            ("wall_seconds", r.wall_seconds),
            ("throughput", r.throughput),
        ] {
            let _ = writeln!(s, "{k} = {}", fmt_f64(v));
        }
        let _ = writeln!(s, "replicates = {}", r.replicates);
    }
    s
}

/// File name of the paths of process `k` of the bundle.
pub fn paths_file_name(b: &ResultBundle, k: usize) -> String {
    if b.id.regime().is_some() {
        format!("paths_T{}.csv", b.rungs[k].t)
    } else {
        "paths.csv".to_string()
    }
}

/// Writes `spec.toml`, `reports.toml`, `metadata.toml` and one paths file
/// per simulated process into `dir`.
pub fn write_bundle(b: &ResultBundle, spec: &ExperimentSpec, dir: &Path) -> Result<()> {
    ensure_dir(dir)?;
    write_file(&dir.join("spec.toml"), &spec.to_toml())?;
    write_file(&dir.join("reports.toml"), &reports_toml(&b.reports))?;
    write_file(&dir.join("metadata.toml"), &metadata_toml(b))?;
    for (k, p) in b.processes.iter().enumerate() {
        write_file(&dir.join(paths_file_name(b, k)), &paths_csv(p))?;
    }
    Ok(())
}

pub fn verify_toml(v: &VerifyOutcome) -> String {
    let mut s = String::new();
    let level = match v.level {
        crate::verify::Level::Fast => "fast",
        crate::verify::Level::Full => "full",
    };
    let _ = writeln!(s, "level = {}", quote(level));
    if let Some(m) = v.mutation {
        let _ = writeln!(s, "mutation = {}", quote(&format!("{m:?}")));
    }
    let _ = writeln!(s, "seed = {}", v.seed);
    let _ = writeln!(s, "version = {}", quote(crate::experiment::VERSION));
    let _ = writeln!(s, "wall_seconds = {}", fmt_f64(v.wall_seconds));
    let _ = writeln!(s, "passed = {}\n", v.passed());
    for g in &v.gates {
        let _ = writeln!(s, "[[gate]]");
        let _ = writeln!(s, "name = {}", quote(&g.name));
        let _ = writeln!(s, "passed = {}", g.passed());
        let _ = writeln!(s, "wall_seconds = {}", fmt_f64(g.wall_seconds));
        if let Some(e) = &g.error {
            let _ = writeln!(s, "error = {}", quote(e));
        }
        s.push('\n');
        for r in &g.reports {
            report_table(&mut s, "gate.report", r);
        }
    }
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    write_file(path, text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_has_17_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(f64::NAN), "nan");
        assert_eq!(fmt_f64(f64::NEG_INFINITY), "-inf");
        let back: f64 = fmt_f64(std::f64::consts::PI).parse().unwrap();
        assert_eq!(back, std::f64::consts::PI);
    }

    #[test]
    fn reports_parse_as_toml() {
        let r = TestReport::moment_match("a.b(0.5,1)", 1.0, 0.1, 1.2, 3.0, 0.1).with_meta("seed", "7");
        let text = reports_toml(&[r.clone(), TestReport::new("x", f64::NAN, 0.0, 1.0, r.comparison)]);
        let v: toml::Value = toml::from_str(&text).unwrap();
        let arr = v["report"].as_array().unwrap();
        assert_eq!(arr.len(), 2);
        assert_eq!(arr[0]["name"].as_str(), Some("a.b(0.5,1)"));
        assert_eq!(arr[0]["metadata"]["seed"].as_str(), Some("7"));
        assert!(arr[1]["value"].as_float().unwrap().is_nan());
    }

    #[test]
    fn paths_layout() {
        let p = SampledProcess::new(vec![0.5, 1.0], vec![vec![1.0, 2.0], vec![3.0, 4.0]], "t");
        let text = paths_csv(&p);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "replicate,t,value");
        assert_eq!(lines.len(), 5);
        assert!(lines[4].starts_with("1,1.0000000000000000e0,"));
    }
}
