//! Estimators and tests that compare simulated output with target laws.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::particles::SampledProcess;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// Passes when `value <= tolerance`.
    AtMost,
    /// Passes when `value >= tolerance`.
    AtLeast,
}

impl Comparison {
    pub fn check(self, value: f64, tolerance: f64) -> bool {
        match self {
            Comparison::AtMost => value <= tolerance,
            Comparison::AtLeast => value >= tolerance,
        }
    }
}

/// One gated statistic. `pass` is a function of `value`, `tolerance` and
/// `comparison` only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub name: String,
    pub value: f64,
    pub se_or_p: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub pass: bool,
    pub sample_sizes: Vec<usize>,
    pub metadata: BTreeMap<String, String>,
}

impl TestReport {
    pub fn new(name: impl Into<String>, value: f64, se_or_p: f64, tolerance: f64, comparison: Comparison) -> Self {
        Self {
            name: name.into(),
            value,
            se_or_p,
            tolerance,
            comparison,
            pass: comparison.check(value, tolerance),
            sample_sizes: Vec::new(),
            metadata: BTreeMap::new(),
        }
    }

    /// `|estimate − target| <= k·se + rel·|target|`.
    pub fn moment_match(name: impl Into<String>, estimate: f64, se: f64, target: f64, k: f64, rel: f64) -> Self {
        let mut r = Self::new(
            name,
            (estimate - target).abs(),
            se,
            k * se + rel * target.abs(),
            Comparison::AtMost,
        );
        r.metadata.insert("estimate".into(), format!("{estimate:.16e}"));
        r.metadata.insert("target".into(), format!("{target:.16e}"));
        r
    }

    pub fn with_sizes(mut self, sizes: &[usize]) -> Self {
        self.sample_sizes = sizes.to_vec();
        self
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.metadata.insert(key.into(), value.into());
        self
    }

    /// Recomputes the verdict from the recorded numbers.
    pub fn consistent(&self) -> bool {
        self.pass == self.comparison.check(self.value, self.tolerance)
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased covariance of two paired samples with its jackknife standard
/// error (infinite below three pairs).
pub fn covariance_with_se(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() {
        return Err(invalid("paired samples differ in length"));
    }
    let n = x.len();
    if n < 2 {
        return Err(invalid("need at least 2 replicates"));
    }
    let (mx, my) = (mean(x), mean(y));
    let xc: Vec<f64> = x.iter().map(|v| v - mx).collect();
    let yc: Vec<f64> = y.iter().map(|v| v - my).collect();
    let sx: f64 = xc.iter().sum();
    let sy: f64 = yc.iter().sum();
    let sxy: f64 = xc.iter().zip(&yc).map(|(a, b)| a * b).sum();
    let nf = n as f64;
    let est = (sxy - sx * sy / nf) / (nf - 1.0);
    if n < 3 {
        return Ok((est, f64::INFINITY));
    }
    let loo: Vec<f64> = xc
        .iter()
        .zip(&yc)
        .map(|(a, b)| {
            let m = nf - 1.0;
            ((sxy - a * b) - (sx - a) * (sy - b) / m) / (m - 1.0)
        })
        .collect();
    let lm = mean(&loo);
    let var = (nf - 1.0) / nf * loo.iter().map(|c| (c - lm) * (c - lm)).sum::<f64>();
    Ok((est, var.sqrt()))
}

/// Covariance of the process values at grid times `s` and `t` over
/// unflagged replicates.
pub fn empirical_covariance(p: &SampledProcess, s: f64, t: f64) -> Result<(f64, f64)> {
    let i = p.index_of(s).ok_or_else(|| invalid(format!("time {s} is not on the grid")))?;
    let j = p.index_of(t).ok_or_else(|| invalid(format!("time {t} is not on the grid")))?;
    covariance_with_se(&p.column(i), &p.column(j))
}

/// Per-point outcome of [`ecf_distance`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EcfPoint {
    pub z: f64,
    pub empirical: Complex64,
    pub target: Complex64,
    /// `max(|ΔRe|, |ΔIm|) / sqrt((1 − |CF|²)/n)`.
    pub studentized: f64,
}

/// Largest studentized deviation between the empirical CF of `samples` and
/// `target` over `z_grid`.
pub fn ecf_distance<F: Fn(f64) -> Complex64>(samples: &[f64], target: F, z_grid: &[f64]) -> (f64, Vec<EcfPoint>) {
    let n = samples.len() as f64;
    let mut points = Vec::with_capacity(z_grid.len());
    let mut worst = 0.0f64;
    for &z in z_grid {
        let mut acc = Complex64::new(0.0, 0.0);
        for &x in samples {
            let (s, c) = (z * x).sin_cos();
            acc += Complex64::new(c, s);
        }
        let ecf = acc / n;
        let cf = target(z);
        let diff = ecf - cf;
        let dev = diff.re.abs().max(diff.im.abs());
        let sd = ((1.0 - cf.norm_sqr()).max(0.0) / n).sqrt();
        let stud = if dev <= 1e-12 {
            0.0
        } else if sd > 0.0 {
            dev / sd
        } else {
            f64::INFINITY
        };
        worst = worst.max(stud);
        points.push(EcfPoint {
            z,
            empirical: ecf,
            target: cf,
            studentized: stud,
        });
    }
    (worst, points)
}

/// Two-sample Kolmogorov–Smirnov statistic `sup |F_a − F_b|`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(invalid("both samples must be nonempty"));
    }
    if a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(invalid("samples contain NaN"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// `Q_KS(λ) = 2 Σ_{k≥1} (−1)^{k−1} e^{−2k²λ²}`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-17 * sum.abs() {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Asymptotic two-sample KS p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    let d = ks_statistic(a, b)?;
    let ne = (a.len() * b.len()) as f64 / (a.len() + b.len()) as f64;
    let s = ne.sqrt();
    Ok(kolmogorov_q((s + 0.12 + 0.11 / s) * d))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HillEstimate {
    pub index: f64,
    pub se: f64,
    /// The estimate at `k/4` differs from the one at `k` by more than
    /// sampling noise explains.
    pub drift: bool,
}

fn hill_at(sorted_desc: &[f64], k: usize) -> f64 {
    let xk = sorted_desc[k].ln();
    let h = sorted_desc[..k].iter().map(|x| x.ln() - xk).sum::<f64>() / k as f64;
    1.0 / h
}

/// Hill estimator of the tail index from the `k` largest values of
/// `|samples|`; zeros and NaN are skipped.
pub fn hill_tail_index(samples: &[f64], k: usize) -> Result<HillEstimate> {
    let mut v: Vec<f64> = samples.iter().map(|x| x.abs()).filter(|x| *x > 0.0).collect();
    if k < 2 || 2 * k >= v.len() {
        return Err(invalid(format!("need 2 <= k < n/2, got k = {k}, n = {}", v.len())));
    }
    v.sort_by(|a, b| b.total_cmp(a));
    let index = hill_at(&v, k);
    let se = index / (k as f64).sqrt();
    let k4 = (k / 4).max(2);
    let coarse = hill_at(&v, k4);
    let noise = index * (1.0 / k4 as f64 - 1.0 / k as f64).max(0.0).sqrt();
    Ok(HillEstimate {
        index,
        se,
        drift: (coarse - index).abs() > 3.0 * noise,
    })
}

/// Least-squares slope of `ln y` on `ln x` and its standard error.
pub fn slope_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() {
        return Err(invalid("xs and ys differ in length"));
    }
    if xs.len() < 3 {
        return Err(invalid("need at least 3 points"));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(invalid("log-log fit needs positive values"));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let (mx, my) = (mean(&lx), mean(&ly));
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if !(sxx > 0.0) {
        return Err(invalid("xs must not all coincide"));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let ssr: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| {
            let r = y - my - slope * (x - mx);
            r * r
        })
        .sum();
    let se = (ssr / (lx.len() - 2) as f64 / sxx).sqrt();
    Ok((slope, se))
}
