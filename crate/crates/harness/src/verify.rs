//! Property gates over all modules, with optional fault injection.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use occfluct_core::density::{
    density_radial, p1_at_origin, p1_by_quadrature, radial_convolution, riesz_potential,
    riesz_potential_time_integral, FiniteMeasureSpec, MotionParams, TestFunction,
};
use occfluct_core::limits::{
    cf_xi_fdd, dependence_exponent, sample_gaussian_process, sample_xi, sample_zeta, zeta_second_moment,
    CovarianceKernel, IntegralKind, StableIntegralGrid,
};
use occfluct_core::particles::{occupation_fluctuation, Intensity, ModelConfig};
use occfluct_core::rng::{domain, replicate_stream};
use occfluct_core::stable::{
    offspring_pmf, sample_offspring, sample_stable, stable_cf, OffspringLaw, StableLawParams,
};
use occfluct_core::stats::{
    ecf_distance, empirical_covariance, hill_tail_index, ks_two_sample, Comparison, TestReport,
};

use crate::error::Result;
use crate::experiment::{dependence_slope, self_similarity_report, sub_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Fast,
    Full,
}

/// Deliberate faults the gates must detect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mutation {
    /// Offspring law with `p_1 = 0.01` taken from `p_0`.
    ForceP1,
    /// Stable-measure cells drawn with skewness 0.
    SymmetricNoise,
    /// Occupation times reported without subtracting their mean.
    DropCentering,
}

#[derive(Debug, Clone, Copy)]
pub struct GateContext {
    pub level: Level,
    pub mutation: Option<Mutation>,
    pub seed: u64,
}

impl GateContext {
    pub fn new(level: Level, mutation: Option<Mutation>, seed: u64) -> Self {
        Self { level, mutation, seed }
    }

    fn size(&self, full: usize, fast: usize) -> usize {
        match self.level {
            Level::Full => full,
            Level::Fast => fast,
        }
    }

    fn mutated(&self, m: Mutation) -> bool {
        self.mutation == Some(m)
    }

    fn offspring_law(&self, beta: f64) -> Result<OffspringLaw> {
        Ok(if self.mutated(Mutation::ForceP1) {
            OffspringLaw::with_forced_p1(beta, 0.01)?
        } else {
            OffspringLaw::new(beta)?
        })
    }

    fn skewness(&self) -> f64 {
        if self.mutated(Mutation::SymmetricNoise) {
            0.0
        } else {
            1.0
        }
    }
}

pub type GateFn = fn(&GateContext) -> Result<Vec<TestReport>>;

pub const GATES: &[(&str, GateFn)] = &[
    ("offspring", gate_offspring),
    ("stable_law", gate_stable_law),
    ("density", gate_density),
    ("riesz", gate_riesz),
    ("gaussian_kernels", gate_gaussian_kernels),
    ("stable_integrals", gate_stable_integrals),
    ("self_similarity", gate_self_similarity),
    ("dependence", gate_dependence),
    ("centering", gate_centering),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateOutcome {
    pub name: String,
    pub reports: Vec<TestReport>,
    pub error: Option<String>,
    pub wall_seconds: f64,
}

impl GateOutcome {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.reports.iter().all(|r| r.pass)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOutcome {
    pub level: Level,
    pub mutation: Option<Mutation>,
    pub seed: u64,
    pub gates: Vec<GateOutcome>,
    pub wall_seconds: f64,
}

impl VerifyOutcome {
    pub fn passed(&self) -> bool {
        self.gates.iter().all(GateOutcome::passed)
    }

    pub fn failed_gates(&self) -> Vec<&str> {
        self.gates.iter().filter(|g| !g.passed()).map(|g| g.name.as_str()).collect()
    }
}

pub fn run_gate(name: &str, gate: GateFn, ctx: &GateContext) -> GateOutcome {
    let start = Instant::now();
    let (reports, error) = match gate(ctx) {
        Ok(r) => (r, None),
        Err(e) => (Vec::new(), Some(e.to_string())),
    };
    GateOutcome {
        name: name.to_string(),
        reports,
        error,
        wall_seconds: start.elapsed().as_secs_f64(),
    }
}

/// Runs the named gates, or all of them when `only` is empty.
pub fn verify_suite(ctx: &GateContext, only: &[&str]) -> VerifyOutcome {
    let start = Instant::now();
    let gates = GATES
        .iter()
        .filter(|(n, _)| only.is_empty() || only.contains(n))
        .map(|(n, g)| run_gate(n, *g, ctx))
        .collect();
    VerifyOutcome {
        level: ctx.level,
        mutation: ctx.mutation,
        seed: ctx.seed,
        gates,
        wall_seconds: start.elapsed().as_secs_f64(),
    }
}

fn mean_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

fn draws<T: Send, F: Fn(&mut occfluct_core::rng::StreamRng) -> T + Sync>(seed: u64, n: usize, f: F) -> Vec<T> {
    // fixed-size blocks keep the draws independent of the thread count
    const BLOCK: usize = 4096;
    let blocks = n.div_ceil(BLOCK);
    (0..blocks)
        .into_par_iter()
        .flat_map_iter(|b| {
            let mut rng = replicate_stream(seed, domain::GENERIC, b as u64);
            let len = BLOCK.min(n - b * BLOCK);
            (0..len).map(|_| f(&mut rng)).collect::<Vec<_>>()
        })
        .collect()
}

pub fn gate_offspring(ctx: &GateContext) -> Result<Vec<TestReport>> {
    let mut out = Vec::new();
    let half = ctx.offspring_law(0.5)?;
    let expected = [(0u64, 2.0 / 3.0), (1, 0.0), (2, 0.25), (3, 1.0 / 24.0)];
    let err = expected
        .iter()
        .map(|&(k, p)| (offspring_pmf(&half, k) - p).abs())
        .fold(0.0, f64::max);
    out.push(TestReport::new("offspring.pmf_beta_0.5", err, 0.0, 1e-12, Comparison::AtMost));
    let one = ctx.offspring_law(1.0)?;
    let err = [(0u64, 0.5), (1, 0.0), (2, 0.5), (3, 0.0)]
        .iter()
        .map(|&(k, p)| (offspring_pmf(&one, k) - p).abs())
        .fold(0.0, f64::max);
    out.push(TestReport::new("offspring.pmf_beta_1", err, 0.0, 1e-12, Comparison::AtMost));
    for (law, label) in [(half, "0.5"), (one, "1")] {
        let m = law.mean(1 << 12);
        out.push(TestReport::new(format!("offspring.criticality_beta_{label}"), (m - 1.0).abs(), 0.0, 1e-12, Comparison::AtMost));
    }
    let n = ctx.size(100_000, 20_000);
    for (i, (law, label)) in [(half, "0.5"), (one, "1")].into_iter().enumerate() {
        let x: Vec<f64> = draws(sub_seed(ctx.seed, i as u64), n, |r| sample_offspring(&law, r) as f64);
        let (m, se) = mean_se(&x);
        out.push(TestReport::moment_match(format!("offspring.empirical_mean_beta_{label}"), m, se, 1.0, 3.0, 0.0).with_sizes(&[n]));
        if law.beta() == 1.0 {
            let outside = x.iter().filter(|&&k| k != 0.0 && k != 2.0).count();
            out.push(TestReport::new("offspring.binary_support", outside as f64, 0.0, 0.0, Comparison::AtMost).with_sizes(&[n]));
            let zeros: Vec<f64> = x.iter().map(|&k| f64::from(k == 0.0)).collect();
            let (f0, se0) = mean_se(&zeros);
            out.push(TestReport::moment_match("offspring.zero_frequency_beta_1", f0, se0, 0.5, 3.0, 0.0).with_sizes(&[n]));
        } else {
            let tail: Vec<f64> = x.into_iter().filter(|&k| k >= 2.0).collect();
            let k = tail.len() / 100;
            if k >= 2 {
                let h = hill_tail_index(&tail, k)?;
                out.push(
                    TestReport::moment_match("offspring.tail_index_beta_0.5", h.index, h.se, 1.5, 3.0, 0.0)
                        .with_sizes(&[tail.len(), k]),
                );
            }
        }
    }
    Ok(out)
}

pub fn gate_stable_law(ctx: &GateContext) -> Result<Vec<TestReport>> {
    let mut out = Vec::new();
    let n = ctx.size(100_000, 20_000);
    let p = StableLawParams::totally_skewed(1.5, 1.0)?;
    let x = draws(sub_seed(ctx.seed, 10), n, |r| sample_stable(&p, r));
    let z = [0.25, 0.5, 1.0, 2.0];
    let (dev, _) = ecf_distance(&x, |z| stable_cf(&p, 1.0, z), &z);
    out.push(TestReport::new("stable.ecf_index_1.5", dev, 0.0, 3.0, Comparison::AtMost).with_sizes(&[n]));
    let g = StableLawParams::new(2.0, 1.0, 1.0, 0.0)?;
    let y = draws(sub_seed(ctx.seed, 11), n, |r| sample_stable(&g, r));
    let sq: Vec<f64> = y.iter().map(|v| v * v).collect();
    let (v, se) = mean_se(&sq);
    out.push(TestReport::moment_match("stable.variance_index_2", v, se, 2.0, 3.0, 0.0).with_sizes(&[n]));
    let m = ctx.size(10_000, 5_000);
    let k = 4usize;
    let sums: Vec<f64> = draws(sub_seed(ctx.seed, 12), m, |r| (0..k).map(|_| sample_stable(&p, r)).sum());
    let q = p.with_scale((k as f64).powf(1.0 / 1.5))?;
    let single = draws(sub_seed(ctx.seed, 13), m, |r| sample_stable(&q, r));
    let pv = ks_two_sample(&sums, &single)?;
    out.push(TestReport::new("stable.convolution_ks", pv, pv, 0.01, Comparison::AtLeast).with_sizes(&[m, m]));
    Ok(out)
}

pub fn gate_density(_ctx: &GateContext) -> Result<Vec<TestReport>> {
    let mut out = Vec::new();
    let (s, t) = (0.4, 0.9);
    for d in 1..=3 {
        for alpha in [1.0, 2.0] {
            let m = MotionParams::new(d, alpha)?;
            let tag = format!("d{d}_a{alpha}");
            let mut ck = 0.0f64;
            let mut ss = 0.0f64;
            for r in [0.0, 0.8, 2.0] {
                let conv = radial_convolution(d, |y| density_radial(&m, s, y), |y| density_radial(&m, t, y), r, 1.0);
                ck = ck.max((conv - density_radial(&m, s + t, r)).abs());
                for u in [0.3f64, 2.5] {
                    let scaled = u.powf(-(d as f64) / alpha) * p1_by_quadrature(&m, r * u.powf(-1.0 / alpha));
                    ss = ss.max((density_radial(&m, u, r) - scaled).abs());
                }
            }
            out.push(TestReport::new(format!("density.chapman_kolmogorov_{tag}"), ck, 0.0, 1e-6, Comparison::AtMost));
            out.push(TestReport::new(format!("density.self_similarity_{tag}"), ss, 0.0, 1e-6, Comparison::AtMost));
            let p0 = (p1_by_quadrature(&m, 0.0) - p1_at_origin(&m)).abs();
            out.push(TestReport::new(format!("density.p1_origin_{tag}"), p0, 0.0, 1e-8, Comparison::AtMost));
        }
    }
    Ok(out)
}

pub fn gate_riesz(_ctx: &GateContext) -> Result<Vec<TestReport>> {
    let mut out = Vec::new();
    let m = MotionParams::new(3, 2.0)?;
    let w = 0.5;
    let f = TestFunction::standard(3, w)?;
    let far = 10.0 * w;
    let g = riesz_potential(&m, &f, &[far, 0.0, 0.0])?;
    out.push(TestReport::new("riesz.far_field_d3", (g * 4.0 * PI * far - 1.0).abs(), 0.0, 0.01, Comparison::AtMost));
    let mut worst = 0.0f64;
    for (d, alpha) in [(3usize, 2.0), (2, 1.0), (1, 0.6), (3, 1.2)] {
        let m = MotionParams::new(d, alpha)?;
        let f = TestFunction::standard(d, 0.4)?;
        for r in [0.0, 0.7, 3.0] {
            let mut x = vec![0.0; d];
            x[0] = r;
            let a = riesz_potential(&m, &f, &x)?;
            let b = riesz_potential_time_integral(&m, &f, &x)?;
            worst = worst.max((a - b).abs() / a.abs().max(1e-300));
        }
    }
    out.push(TestReport::new("riesz.kernel_vs_time_integral", worst, 0.0, 1e-5, Comparison::AtMost));
    Ok(out)
}

pub fn gate_gaussian_kernels(ctx: &GateContext) -> Result<Vec<TestReport>> {
    let grid = [0.25, 0.5, 0.75, 1.0];
    let pairs = [(0.25, 0.25), (0.25, 0.5), (0.5, 0.75), (0.5, 1.0), (0.75, 1.0), (1.0, 1.0)];
    let n = ctx.size(100_000, 20_000);
    let kernels = [
        ("sub_fbm", CovarianceKernel::sub_fbm(3, 2.0)?),
        ("log_sub_fbm", CovarianceKernel::log_sub_fbm(1, 1.0)?),
        ("neg_sub_fbm", CovarianceKernel::neg_sub_fbm(1, 2.0)?),
        ("weighted_fbm", CovarianceKernel::weighted_fbm(1, 2.0)?),
        ("fbm", CovarianceKernel::fbm_for(1, 2.0)?),
    ];
    let mut out = Vec::new();
    for (i, (label, k)) in kernels.iter().enumerate() {
        let p = sample_gaussian_process(k, &grid, n, sub_seed(ctx.seed, 20 + i as u64))?;
        for (s, t) in pairs {
            let (est, se) = empirical_covariance(&p, s, t)?;
            out.push(
                TestReport::moment_match(format!("kernel.{label}.cov({s},{t})"), est, se, k.eval(s, t), 3.0, 0.0)
                    .with_sizes(&[n]),
            );
        }
    }
    Ok(out)
}

pub fn gate_stable_integrals(ctx: &GateContext) -> Result<Vec<TestReport>> {
    let mut out = Vec::new();
    let n = ctx.size(100_000, 20_000);
    let skew = ctx.skewness();
    let times = [0.5, 1.0];
    let gx = StableIntegralGrid::auto(IntegralKind::Xi, 1, 2.0, 1.0, 1.0)?.with_skewness(skew);
    let xi = sample_xi(&gx, &times, n, sub_seed(ctx.seed, 30))?;
    let kernel = CovarianceKernel::sub_fbm_family(1, 2.0)?;
    for (s, t) in [(0.5, 0.5), (0.5, 1.0), (1.0, 1.0)] {
        let (est, se) = empirical_covariance(&xi, s, t)?;
        out.push(
            TestReport::moment_match(format!("xi.cov({s},{t})"), est, se, kernel.eval(s, t), 3.0, 0.02).with_sizes(&[n]),
        );
    }
    let gz = StableIntegralGrid::auto(IntegralKind::Zeta, 1, 2.0, 1.0, 1.0)?.with_skewness(skew);
    let zeta = sample_zeta(&gz, &times, n, sub_seed(ctx.seed, 31))?;
    for t in times {
        let (est, se) = empirical_covariance(&zeta, t, t)?;
        out.push(
            TestReport::moment_match(format!("zeta.second_moment({t})"), est, se, zeta_second_moment(1, 2.0, t)?, 3.0, 0.02)
                .with_sizes(&[n]),
        );
    }
    let gs = StableIntegralGrid::auto(IntegralKind::Xi, 1, 2.0, 0.5, 1.0)?.with_skewness(skew);
    let x1 = sample_xi(&gs, &[1.0], n, sub_seed(ctx.seed, 32))?.column(0);
    let z = [0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0];
    let target = |z: f64| cf_xi_fdd(1, 2.0, 0.5, &[1.0], &[z]).unwrap_or(Complex64::new(f64::NAN, f64::NAN));
    let (dev, _) = ecf_distance(&x1, target, &z);
    out.push(TestReport::new("xi.ecf_beta_0.5", dev, 0.0, 3.0, Comparison::AtMost).with_sizes(&[n]));
    Ok(out)
}

pub fn gate_self_similarity(ctx: &GateContext) -> Result<Vec<TestReport>> {
    let mut out = Vec::new();
    let n = ctx.size(20_000, 5_000);
    let skew = ctx.skewness();
    for (i, kind) in [IntegralKind::Xi, IntegralKind::Zeta].into_iter().enumerate() {
        let g1 = StableIntegralGrid::auto(kind, 1, 2.0, 0.5, 1.0)?.with_skewness(skew);
        let g2 = StableIntegralGrid::auto(kind, 1, 2.0, 0.5, 2.0)?.with_skewness(skew);
        out.push(self_similarity_report(kind, &g1, &g2, 1.0, 2.0, n, sub_seed(ctx.seed, 40 + i as u64), 0.01)?);
    }
    // the tail estimate needs the full sample at either level
    let m = 100_000;
    let g = StableIntegralGrid::auto(IntegralKind::Xi, 1, 2.0, 0.5, 1.0)?.with_skewness(skew);
    let x = sample_xi(&g, &[1.0], m, sub_seed(ctx.seed, 42))?.column(0);
    let k = m / 100;
    let h = hill_tail_index(&x, k)?;
    out.push(
        TestReport::new("xi.hill_index_beta_0.5", (h.index - 1.5).abs(), h.se, 0.15, Comparison::AtMost)
            .with_sizes(&[m, k])
            .with_meta("estimate", format!("{:.16e}", h.index)),
    );
    Ok(out)
}

pub fn gate_dependence(_ctx: &GateContext) -> Result<Vec<TestReport>> {
    let mut out = Vec::new();
    let cases = [
        ("neg_sub_fbm_d1_a2", CovarianceKernel::sub_fbm_family(1, 2.0)?, dependence_exponent(1, 2.0, 1.0)),
        ("sub_fbm_d3_a2", CovarianceKernel::sub_fbm_family(3, 2.0)?, dependence_exponent(3, 2.0, 1.0)),
        ("log_sub_fbm_d1_a1", CovarianceKernel::sub_fbm_family(1, 1.0)?, dependence_exponent(1, 1.0, 1.0)),
        ("weighted_fbm_d1_a2", CovarianceKernel::weighted_fbm(1, 2.0)?, 0.5),
        ("weighted_fbm_d1_a1.5", CovarianceKernel::weighted_fbm(1, 1.5)?, 1.0 / 1.5),
    ];
    for (label, k, kappa) in cases {
        let (slope, se) = dependence_slope(&k)?;
        out.push(
            TestReport::new(format!("dependence.{label}"), (slope + kappa).abs(), se, 0.05, Comparison::AtMost)
                .with_meta("slope", format!("{slope:.16e}"))
                .with_meta("target", format!("{:.16e}", -kappa)),
        );
    }
    Ok(out)
}

pub fn gate_centering(ctx: &GateContext) -> Result<Vec<TestReport>> {
    let motion = MotionParams::new(1, 2.0)?;
    let horizon = 10.0;
    let mu = FiniteMeasureSpec::point_mass(1.0, vec![0.0])?;
    let intensity = Intensity::FiniteHighDensity { density: 100.0, mu };
    let mut cfg = ModelConfig::new(motion, 1.0, 1.0, intensity, horizon)?;
    cfg.knobs.drop_centering = ctx.mutated(Mutation::DropCentering);
    if ctx.mutated(Mutation::ForceP1) {
        cfg.knobs.forced_p1 = 0.01;
    }
    let f = TestFunction::standard(1, 1.0)?;
    let grid = [0.5, 1.0];
    let n = ctx.size(2000, 400);
    let p = occupation_fluctuation(&cfg, &f, &grid, 1.0, n, sub_seed(ctx.seed, 50))?;
    let mut out = Vec::new();
    for (j, t) in grid.iter().enumerate() {
        let (m, se) = mean_se(&p.column(j));
        out.push(TestReport::moment_match(format!("centering.mean({t})"), m, se, 0.0, 3.0, 0.0).with_sizes(&[n]));
    }
    Ok(out)
}
