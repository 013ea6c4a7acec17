use std::collections::HashSet;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::Instant;

use occfluct::experiment::run_experiment;
use occfluct::spec::ExperimentSpec;
use occfluct::verify::{verify_suite, GateContext, Level, Mutation, VerifyOutcome};
use occfluct_core::stats::TestReport;

static SERIAL: Mutex<()> = Mutex::new(());

const SEED: u64 = 20240601;

struct Verdict {
    pass: bool,
    worst: String,
}

fn verdict(reports: &[&TestReport], errors: &[String]) -> Verdict {
    let failed: Vec<_> = reports.iter().filter(|r| !r.pass).collect();
    let worst = if let Some(e) = errors.first() {
        format!("error: {e}")
    } else if let Some(r) = failed.first() {
        format!("{} = {:.4e} (tol {:.4e}, {} failing)", r.name, r.value, r.tolerance, failed.len())
    } else {
        "none".into()
    };
    Verdict { pass: failed.is_empty() && errors.is_empty() && !reports.is_empty(), worst }
}

fn criterion(n: u32, budget: f64, body: impl FnOnce() -> Verdict) {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let v = body();
    let runtime = start.elapsed().as_secs_f64();
    let pass = v.pass && runtime <= budget;
    let line = format!(
        "criterion {n} ... {} worst={} runtime={runtime:.1}s budget={budget:.0}s\n",
        if pass { "PASS" } else { "FAIL" },
        v.worst
    );
    std::io::stdout().write_all(line.as_bytes()).unwrap();
    assert!(pass, "criterion {n}: {} runtime={runtime:.1}s budget={budget:.0}s", v.worst);
}

fn gates(level: Level, names: &[&str]) -> Verdict {
    let out = verify_suite(&GateContext::new(level, None, SEED), names);
    let reports: Vec<_> = out.gates.iter().flat_map(|g| &g.reports).collect();
    let errors: Vec<_> = out.gates.iter().filter_map(|g| g.error.clone()).collect();
    verdict(&reports, &errors)
}

fn ladder(file: &str) -> Verdict {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(file);
    let spec = ExperimentSpec::from_path(&path).unwrap();
    match run_experiment(&spec) {
        Ok(b) => {
            let reports: Vec<_> = ["final_gap", "gap_increases"].iter().filter_map(|n| b.report(n)).collect();
            if reports.len() != 2 {
                return Verdict { pass: false, worst: "missing gap reports".into() };
            }
            verdict(&reports, &[])
        }
        Err(e) => verdict(&[], &[e.to_string()]),
    }
}

#[test]
fn criterion_01_offspring_law() {
    criterion(1, 60.0, || gates(Level::Full, &["offspring"]));
}

#[test]
fn criterion_02_density_identities() {
    criterion(2, 60.0, || gates(Level::Full, &["density"]));
}

#[test]
fn criterion_03_riesz_potential() {
    criterion(3, 60.0, || gates(Level::Full, &["riesz"]));
}

#[test]
fn criterion_04_gaussian_limit_kernels() {
    criterion(4, 300.0, || gates(Level::Full, &["gaussian_kernels"]));
}

#[test]
fn criterion_05_stable_integrals() {
    criterion(5, 900.0, || gates(Level::Full, &["stable_integrals"]));
}

#[test]
fn criterion_06_self_similarity_and_tails() {
    criterion(6, 600.0, || gates(Level::Full, &["self_similarity"]));
}

#[test]
fn criterion_07_dependence_exponent() {
    criterion(7, 60.0, || gates(Level::Full, &["dependence"]));
}

#[test]
fn criterion_08_nonbranching_finite_measure() {
    criterion(8, 1800.0, || ladder("thm2_10a.toml"));
}

#[test]
fn criterion_09_branching_lebesgue() {
    criterion(9, 3600.0, || ladder("thm2_2a.toml"));
}

fn passing(out: &VerifyOutcome) -> HashSet<String> {
    out.gates
        .iter()
        .flat_map(|g| &g.reports)
        .filter(|r| r.pass)
        .map(|r| r.name.clone())
        .collect()
}

#[test]
fn criterion_10_mutations_are_caught() {
    criterion(10, 600.0, || {
        let names = ["offspring", "stable_law", "stable_integrals", "centering"];
        let clean = passing(&verify_suite(&GateContext::new(Level::Fast, None, SEED), &names));
        let mut missed = Vec::new();
        let mut caught = Vec::new();
        for m in [Mutation::ForceP1, Mutation::SymmetricNoise, Mutation::DropCentering] {
            let out = verify_suite(&GateContext::new(Level::Fast, Some(m), SEED), &names);
            let still = passing(&out);
            let broken: Vec<_> = clean.iter().filter(|n| !still.contains(*n)).cloned().collect();
            if broken.is_empty() {
                missed.push(format!("{m:?}"));
            } else {
                caught.push(format!("{m:?}->{}", broken.len()));
            }
        }
        let worst = if missed.is_empty() {
            caught.join(",")
        } else {
            format!("undetected {}", missed.join(","))
        };
        Verdict { pass: missed.is_empty(), worst }
    });
}
