use std::path::PathBuf;

use occfluct::experiment::run_experiment;
use occfluct::output::{metadata_toml, paths_csv, reports_toml};
use occfluct::spec::ExperimentSpec;
use occfluct::HarnessError;

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn small_finite() -> ExperimentSpec {
    ExperimentSpec::from_toml_str(
        r#"
id = "thm2_10a"
replicates = 40
t_ladder = [5.0, 10.0]
seed = 9
[model]
d = 1
alpha = 2.0
branching_rate = 0.0
[model.mu]
components = [{ kind = "point_mass", weight = 1.0, at = [0.0] }]
"#,
    )
    .unwrap()
}

#[test]
fn mismatched_regime_is_rejected_before_simulation() {
    let spec = ExperimentSpec::from_toml_str(
        "id = \"thm2_2a\"\n[model]\nd = 5\nalpha = 2.0\nbeta = 1.0\nbranching_rate = 1.0\n",
    )
    .unwrap();
    let err = run_experiment(&spec).unwrap_err();
    let msg = err.to_string();
    assert!(matches!(err, HarnessError::Core(occfluct_core::Error::DimensionCondition(_))), "{msg}");
    assert!(msg.contains("d <"), "{msg}");
}

#[test]
fn zero_replicates_give_an_empty_bundle_with_a_warning() {
    let mut spec = small_finite();
    spec.replicates = 0;
    let b = run_experiment(&spec).unwrap();
    assert!(b.reports.is_empty());
    assert!(b.processes.is_empty());
    assert!(b.warnings.iter().any(|w| w.contains("zero replicates")));
}

#[test]
fn thin_density_schedule_is_rejected() {
    let spec = ExperimentSpec::from_toml_str(
        r#"
id = "thm2_7a"
[model]
d = 1
alpha = 2.0
beta = 1.0
branching_rate = 1.0
[model.mu]
components = [{ kind = "point_mass", weight = 1.0, at = [0.0] }]
"#,
    )
    .unwrap();
    let msg = run_experiment(&spec).unwrap_err().to_string();
    assert!(msg.contains("density schedule"), "{msg}");
}

#[test]
fn missing_measure_is_rejected() {
    let spec = ExperimentSpec::from_toml_str("id = \"thm2_10a\"\n").unwrap();
    assert!(matches!(run_experiment(&spec), Err(HarnessError::Spec(_))));
}

#[test]
fn reports_reference_spec_hash_and_seed() {
    let spec = small_finite();
    let b = run_experiment(&spec).unwrap();
    assert_eq!(b.spec_hash, spec.hash());
    assert_eq!(b.rungs.len(), 2);
    assert!(!b.reports.is_empty());
    for r in &b.reports {
        assert_eq!(r.metadata.get("spec_hash"), Some(&b.spec_hash), "{}", r.name);
        assert_eq!(r.metadata.get("seed").map(String::as_str), Some("9"));
        assert!(r.consistent());
    }
    assert!(b.report("final_gap").is_some());
    assert!(b.report("gap_increases").is_some());
    let meta = metadata_toml(&b);
    assert!(meta.contains("flagged_fraction"));
    assert!(meta.contains("truncation_bias"));
}

#[test]
fn output_is_independent_of_thread_count() {
    let spec = small_finite();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_experiment(&spec).unwrap())
    };
    let a = run(1);
    let b = run(3);
    assert_eq!(a.processes.len(), b.processes.len());
    for (p, q) in a.processes.iter().zip(&b.processes) {
        assert_eq!(paths_csv(p), paths_csv(q));
    }
    assert_eq!(reports_toml(&a.reports), reports_toml(&b.reports));
}

#[test]
fn seed_changes_the_paths() {
    let a = run_experiment(&small_finite()).unwrap();
    let mut spec = small_finite();
    spec.seed = 10;
    let b = run_experiment(&spec).unwrap();
    assert_ne!(paths_csv(&a.processes[0]), paths_csv(&b.processes[0]));
}

#[test]
fn gaussian_limit_suite_checks_kernel_sampler() {
    let spec = ExperimentSpec::from_toml_str(
        "id = \"prop2_5\"\nlimit_replicates = 2000\ntarget = \"normalized\"\n[model]\nd = 1\nalpha = 2.0\nbeta = 1.0\n",
    )
    .unwrap();
    let b = run_experiment(&spec).unwrap();
    let sampler: Vec<_> = b.reports.iter().filter(|r| r.name.starts_with("kernel_sampler")).collect();
    assert_eq!(sampler.len(), 3);
    assert!(sampler.iter().all(|r| r.pass));
    assert!(b.report("xi.self_similarity_ks").is_some());
}

#[test]
fn nonbranching_lebesgue_desk_run_matches_kernel() {
    let spec = ExperimentSpec::from_path(&config("thm2_6a.toml")).unwrap();
    let b = run_experiment(&spec).unwrap();
    let cov: Vec<_> = b.reports.iter().filter(|r| r.name.contains(".cov(")).collect();
    assert_eq!(cov.len(), 3);
    for r in cov {
        assert!(r.pass, "{} = {} exceeds {}", r.name, r.value, r.tolerance);
    }
}
