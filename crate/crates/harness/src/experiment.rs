//! Runs an experiment specification and collects its reports.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use occfluct_core::density::TestFunction;
use occfluct_core::limits::{
    cf_xi_fdd, cf_zeta_fdd, dependence_distance_gaussian, dependence_exponent, sample_gaussian_process, sample_xi,
    sample_zeta, self_similarity_index, xi_covariance_kernel, zeta_second_moment, CovarianceKernel, IntegralKind,
    StableIntegralGrid,
};
use occfluct_core::particles::{
    occupation_fluctuation, suggest_truncation_radius, Intensity, ModelConfig, SampledProcess,
};
use occfluct_core::regime::{norming, Regime};
use occfluct_core::stats::{
    empirical_covariance, ecf_distance, hill_tail_index, ks_two_sample, slope_fit, Comparison, TestReport,
};

use crate::error::{HarnessError, Result};
use crate::spec::{ExperimentId, ExperimentSpec, TargetNormalization};
use crate::targets::{target_law, TargetLaw};

pub const VERSION: &str = concat!("occfluct ", env!("CARGO_PKG_VERSION"));

/// Per-rung bookkeeping of a particle-system run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RungSummary {
    pub t: f64,
    pub h: f64,
    pub norming: f64,
    pub replicates: usize,
    pub flagged_fraction: f64,
    pub individuals: f64,
    pub truncation_bias: f64,
    pub wall_seconds: f64,
    /// Replicates per second.
    pub throughput: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultBundle {
    pub id: ExperimentId,
    pub spec_hash: String,
    pub seed: u64,
    pub version: String,
    pub warnings: Vec<String>,
    pub reports: Vec<TestReport>,
    pub rungs: Vec<RungSummary>,
    pub wall_seconds: f64,
    #[serde(skip)]
    pub processes: Vec<SampledProcess>,
}

impl ResultBundle {
    fn new(spec: &ExperimentSpec, warnings: Vec<String>) -> Self {
        Self {
            id: spec.id,
            spec_hash: spec.hash(),
            seed: spec.seed,
            version: VERSION.to_string(),
            warnings,
            reports: Vec::new(),
            rungs: Vec::new(),
            wall_seconds: 0.0,
            processes: Vec::new(),
        }
    }

    fn push(&mut self, r: TestReport) {
        let r = r
            .with_meta("spec_hash", self.spec_hash.clone())
            .with_meta("seed", self.seed.to_string());
        self.reports.push(r);
    }

    pub fn passed(&self) -> bool {
        self.reports.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &TestReport> {
        self.reports.iter().filter(|r| !r.pass)
    }

    pub fn report(&self, name: &str) -> Option<&TestReport> {
        self.reports.iter().find(|r| r.name == name)
    }
}

/// Seed of sub-run `k`, kept apart from the other sub-runs of `seed`.
pub fn sub_seed(seed: u64, k: u64) -> u64 {
    seed ^ (k + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultBundle> {
    let warnings = spec.validate()?;
    let start = Instant::now();
    let mut bundle = ResultBundle::new(spec, warnings);
    let empty = spec.replicates == 0 || (spec.id.regime().is_none() && spec.limit_replicates == 0);
    if !empty {
        match spec.id.regime() {
            Some(regime) => run_ladder(spec, regime, &mut bundle)?,
            None => run_limit_suite(spec, &mut bundle)?,
        }
    }
    bundle.wall_seconds = start.elapsed().as_secs_f64();
    Ok(bundle)
}

pub fn model_config(spec: &ExperimentSpec, regime: Regime, f: &TestFunction, t: f64) -> Result<ModelConfig> {
    let m = &spec.model;
    let motion = m.motion()?;
    let h = spec.h_schedule.density(t);
    let intensity = if regime.is_lebesgue() {
        Intensity::LebesgueHighDensity {
            density: h,
            truncation_radius: suggest_truncation_radius(&motion, t, f, h, m.truncation_c),
        }
    } else {
        let mu = m
            .mu
            .clone()
            .ok_or_else(|| HarnessError::Spec("finite intensity needs mu".into()))?;
        Intensity::FiniteHighDensity { density: h, mu }
    };
    let mut cfg = ModelConfig::new(motion, m.beta, m.branching_rate, intensity, t)?;
    cfg.knobs = spec.knobs.clone();
    cfg.validate()?;
    Ok(cfg)
}

fn diagnostic(p: &SampledProcess, key: &str) -> f64 {
    p.meta
        .diagnostics
        .iter()
        .find(|(k, _)| k == key)
        .map_or(0.0, |(_, v)| *v)
}

fn mean_with_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, (v / n).sqrt())
}

fn run_ladder(spec: &ExperimentSpec, regime: Regime, bundle: &mut ResultBundle) -> Result<()> {
    let tol = spec.tolerances;
    let f = spec.test_function()?;
    let law = target_law(spec, regime)?;
    let grid = &spec.time_grid;
    let t_last = *grid.last().expect("validated grid");
    let p = spec.model.regime_params();
    // (relative gap, its standard error) per rung
    let mut gaps: Vec<(f64, f64)> = Vec::new();
    for (k, &t) in spec.t_ladder.iter().enumerate() {
        let tag = format!("T{t}");
        let h = spec.h_schedule.density(t);
        let cfg = model_config(spec, regime, &f, t)?;
        let f_t = norming(regime, t, h, &p)?;
        let rung_start = Instant::now();
        let proc = occupation_fluctuation(&cfg, &f, grid, f_t, spec.replicates, sub_seed(spec.seed, k as u64))?;
        let wall = rung_start.elapsed().as_secs_f64();
        let n_ok = proc.flagged.iter().filter(|x| !**x).count();
        let ff = proc.flagged_fraction();
        bundle.push(
            TestReport::new(format!("{tag}.flagged_fraction"), ff, 0.0, tol.max_flagged_fraction, Comparison::AtMost)
                .with_sizes(&[proc.n_replicates()]),
        );
        let j = proc.index_of(t_last).expect("grid point");
        let last = proc.column(j);
        if n_ok >= 2 {
            let (m, se) = mean_with_se(&last);
            bundle.push(
                TestReport::moment_match(format!("{tag}.centering"), m, se, 0.0, tol.se_multiplier, 0.0).with_sizes(&[n_ok]),
            );
        }
        match &law {
            TargetLaw::Gaussian(cov) => {
                let mut worst = (0.0f64, 0.0f64);
                for &(s, u) in &spec.covariance_pairs {
                    let (est, se) = empirical_covariance(&proc, s, u)?;
                    let target = cov(s, u)?;
                    bundle.push(
                        TestReport::moment_match(
                            format!("{tag}.cov({s},{u})"),
                            est,
                            se,
                            target,
                            tol.se_multiplier,
                            tol.bias_allowance,
                        )
                        .with_sizes(&[n_ok]),
                    );
                    let scale = target.abs().max(f64::MIN_POSITIVE);
                    let rel = (est - target).abs() / scale;
                    if rel >= worst.0 {
                        worst = (rel, se / scale);
                    }
                }
                gaps.push(worst);
            }
            TargetLaw::Stable(cf) => {
                let target = |z: f64| cf(z).unwrap_or_else(|_| num_complex::Complex64::new(f64::NAN, f64::NAN));
                let (dev, _) = ecf_distance(&last, target, &spec.z_grid);
                bundle.push(TestReport::new(format!("{tag}.ecf"), dev, 0.0, tol.ecf, Comparison::AtMost).with_sizes(&[n_ok]));
                gaps.push((dev, 1.0));
            }
        }
        bundle.rungs.push(RungSummary {
            t,
            h,
            norming: f_t,
            replicates: proc.n_replicates(),
            flagged_fraction: ff,
            individuals: diagnostic(&proc, "individuals"),
            truncation_bias: diagnostic(&proc, "truncation_bias"),
            wall_seconds: wall,
            throughput: proc.n_replicates() as f64 / wall.max(1e-9),
        });
        bundle.processes.push(proc);
    }
    if let TargetLaw::Gaussian(_) = law {
        let (final_gap, final_se) = *gaps.last().expect("nonempty ladder");
        bundle.push(
            TestReport::new("final_gap", final_gap, final_se, tol.final_gap, Comparison::AtMost)
                .with_sizes(&[spec.replicates]),
        );
        // an increase counts when it exceeds the combined sampling noise
        let increases = gaps
            .windows(2)
            .filter(|w| w[1].0 - w[0].0 > tol.se_multiplier * w[0].1.hypot(w[1].1))
            .count();
        let trend = gaps.iter().map(|g| format!("{:.6}", g.0)).collect::<Vec<_>>().join(",");
        bundle.push(
            TestReport::new("gap_increases", increases as f64, 0.0, 0.0, Comparison::AtMost)
                .with_sizes(&[gaps.len()])
                .with_meta("gaps", trend),
        );
    }
    Ok(())
}

fn kind_of(id: ExperimentId) -> IntegralKind {
    match id {
        ExperimentId::Prop2_9 => IntegralKind::Zeta,
        _ => IntegralKind::Xi,
    }
}

fn sample_limit(kind: IntegralKind, g: &StableIntegralGrid, times: &[f64], n: usize, seed: u64) -> Result<SampledProcess> {
    Ok(match kind {
        IntegralKind::Xi => sample_xi(g, times, n, seed)?,
        IntegralKind::Zeta => sample_zeta(g, times, n, seed)?,
    })
}

/// `D_T` slope of a Gaussian kernel over `T ∈ [10², 10⁴]`.
pub fn dependence_slope(k: &CovarianceKernel) -> Result<(f64, f64)> {
    let ts: Vec<f64> = (0..=8).map(|j| 100.0 * 10f64.powf(j as f64 / 4.0)).collect();
    let ds = ts
        .iter()
        .map(|&t| dependence_distance_gaussian(k, 1.0, 1.0, 0.0, 1.0, 2.0, 3.0, t))
        .collect::<occfluct_core::Result<Vec<f64>>>()?;
    Ok(slope_fit(&ts, &ds)?)
}

/// Self-similarity: `a^{−b} X_{a t}` against `X_t` from independent draws.
pub fn self_similarity_report(
    kind: IntegralKind,
    g_small: &StableIntegralGrid,
    g_large: &StableIntegralGrid,
    t: f64,
    a: f64,
    n: usize,
    seed: u64,
    level: f64,
) -> Result<TestReport> {
    let b = self_similarity_index(kind, g_small.d, g_small.alpha, g_small.beta);
    let x = sample_limit(kind, g_small, &[t], n, sub_seed(seed, 1))?.column(0);
    let y: Vec<f64> = sample_limit(kind, g_large, &[a * t], n, sub_seed(seed, 2))?
        .column(0)
        .iter()
        .map(|v| v * a.powf(-b))
        .collect();
    let p = ks_two_sample(&x, &y)?;
    Ok(TestReport::new(format!("{kind:?}.self_similarity_ks").to_lowercase(), p, p, level, Comparison::AtLeast)
        .with_sizes(&[n, n])
        .with_meta("index", format!("{b:.16e}"))
        .with_meta("scale", format!("{a}")))
}

fn run_limit_suite(spec: &ExperimentSpec, bundle: &mut ResultBundle) -> Result<()> {
    let tol = spec.tolerances;
    let m = &spec.model;
    let (d, alpha, beta) = (m.d, m.alpha, m.beta);
    let kind = kind_of(spec.id);
    let n = spec.limit_replicates;
    let grid = &spec.time_grid;
    let t_last = *grid.last().expect("validated grid");
    let g = StableIntegralGrid::auto(kind, d, alpha, beta, t_last)?;
    let start = Instant::now();
    let proc = sample_limit(kind, &g, grid, n, sub_seed(spec.seed, 0))?;
    let wall = start.elapsed().as_secs_f64();
    let j = proc.index_of(t_last).expect("grid point");
    let last = proc.column(j);

    if beta < 1.0 {
        let target = |z: f64| {
            let r = match kind {
                IntegralKind::Xi => cf_xi_fdd(d, alpha, beta, &[t_last], &[z]),
                IntegralKind::Zeta => cf_zeta_fdd(d, alpha, beta, &[t_last], &[z]),
            };
            r.unwrap_or_else(|_| num_complex::Complex64::new(f64::NAN, f64::NAN))
        };
        let (dev, _) = ecf_distance(&last, target, &spec.z_grid);
        bundle.push(TestReport::new(format!("ecf(t={t_last})"), dev, 0.0, tol.ecf, Comparison::AtMost).with_sizes(&[n]));
        let k = (n / 100).max(2);
        if k < n / 2 {
            let hill = hill_tail_index(&last, k)?;
            bundle.push(
                TestReport::new("hill_index", (hill.index - (1.0 + beta)).abs(), hill.se, tol.hill_band, Comparison::AtMost)
                    .with_sizes(&[n, k])
                    .with_meta("estimate", format!("{:.16e}", hill.index))
                    .with_meta("drift", hill.drift.to_string()),
            );
        }
    } else {
        match kind {
            IntegralKind::Xi => {
                let kernel = match spec.target {
                    TargetNormalization::Stated => CovarianceKernel::sub_fbm_family(d, alpha)?,
                    TargetNormalization::Normalized => xi_covariance_kernel(d, alpha)?,
                };
                for &(s, t) in &spec.covariance_pairs {
                    let (est, se) = empirical_covariance(&proc, s, t)?;
                    bundle.push(
                        TestReport::moment_match(
                            format!("xi.cov({s},{t})"),
                            est,
                            se,
                            kernel.eval(s, t),
                            tol.se_multiplier,
                            tol.discretization,
                        )
                        .with_sizes(&[n]),
                    );
                }
                if spec.id == ExperimentId::Prop2_5 {
                    let gp = sample_gaussian_process(&kernel, grid, n, sub_seed(spec.seed, 3))?;
                    for &(s, t) in &spec.covariance_pairs {
                        let (est, se) = empirical_covariance(&gp, s, t)?;
                        bundle.push(
                            TestReport::moment_match(
                                format!("kernel_sampler.cov({s},{t})"),
                                est,
                                se,
                                kernel.eval(s, t),
                                tol.se_multiplier,
                                0.0,
                            )
                            .with_sizes(&[n]),
                        );
                    }
                }
            }
            IntegralKind::Zeta => {
                for &t in grid {
                    let (est, se) = empirical_covariance(&proc, t, t)?;
                    bundle.push(
                        TestReport::moment_match(
                            format!("zeta.second_moment({t})"),
                            est,
                            se,
                            zeta_second_moment(d, alpha, t)?,
                            tol.se_multiplier,
                            tol.discretization,
                        )
                        .with_sizes(&[n]),
                    );
                }
            }
        }
    }

    let g_large = StableIntegralGrid::auto(kind, d, alpha, beta, 2.0 * t_last)?;
    bundle.push(self_similarity_report(kind, &g, &g_large, t_last, 2.0, n, sub_seed(spec.seed, 4), tol.ks_level)?);

    if beta == 1.0 && spec.id != ExperimentId::Prop2_5 {
        let (kernel, label) = match kind {
            IntegralKind::Xi => (CovarianceKernel::sub_fbm_family(d, alpha)?, "xi"),
            IntegralKind::Zeta => (CovarianceKernel::weighted_fbm(d, alpha)?, "zeta"),
        };
        let kappa = match kind {
            IntegralKind::Xi => dependence_exponent(d, alpha, beta),
            IntegralKind::Zeta => d as f64 / alpha,
        };
        let (slope, se) = dependence_slope(&kernel)?;
        bundle.push(
            TestReport::new(format!("{label}.dependence_slope"), (slope + kappa).abs(), se, tol.slope, Comparison::AtMost)
                .with_meta("slope", format!("{slope:.16e}"))
                .with_meta("target", format!("{:.16e}", -kappa)),
        );
    } else if beta < 1.0 {
        bundle
            .warnings
            .push("dependence exponent of the stable case is not estimated".to_string());
    }

    bundle.rungs.push(RungSummary {
        t: t_last,
        h: 0.0,
        norming: 1.0,
        replicates: n,
        flagged_fraction: 0.0,
        individuals: 0.0,
        truncation_bias: diagnostic(&proc, "outside_mass_fraction"),
        wall_seconds: wall,
        throughput: n as f64 / wall.max(1e-9),
    });
    bundle.processes.push(proc);
    Ok(())
}
