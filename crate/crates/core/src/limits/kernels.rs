//! Covariance kernels of the Gaussian limit processes and exact Gaussian
//! path sampling on a finite grid.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta;

use super::validate_times;
use crate::density::{p1_at_origin, MotionParams};
use crate::error::{invalid, Error, Result};
use crate::particles::SampledProcess;
use crate::quad::{integrate, QuadOptions};
use crate::rng::{domain, replicate_stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelFamily {
    /// `α < d < 2α`.
    SubFbm { d: usize, alpha: f64 },
    /// `d < α`, exponent `h = 3 − d/α`.
    NegSubFbm { d: usize, alpha: f64 },
    /// `d = α`.
    LogSubFbm { d: usize, alpha: f64 },
    Fbm { hurst: f64 },
    /// `d < α`.
    WeightedFbm { d: usize, alpha: f64 },
    BrownianScaled { rate: f64 },
}

/// `constant · shape(s, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceKernel {
    pub family: KernelFamily,
    pub constant: f64,
}

fn motion(d: usize, alpha: f64) -> Result<MotionParams> {
    MotionParams::new(d, alpha)
}

fn power_prefactor(d: usize, alpha: f64) -> Result<f64> {
    let r = d as f64 / alpha;
    Ok(p1_at_origin(&motion(d, alpha)?) / ((1.0 - r) * (2.0 - r) * (3.0 - r)))
}

fn xlogx2(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x * x.abs().ln()
    }
}

impl CovarianceKernel {
    pub fn sub_fbm(d: usize, alpha: f64) -> Result<Self> {
        let df = d as f64;
        if !(alpha < df && df < 2.0 * alpha) {
            return Err(Error::DimensionCondition(format!("sub-fBm family needs alpha < d < 2 alpha, got d = {d}, alpha = {alpha}")));
        }
        Ok(Self {
            family: KernelFamily::SubFbm { d, alpha },
            constant: power_prefactor(d, alpha)?,
        })
    }

    pub fn neg_sub_fbm(d: usize, alpha: f64) -> Result<Self> {
        if !((d as f64) < alpha) {
            return Err(Error::DimensionCondition(format!("negative sub-fBm family needs d < alpha, got d = {d}, alpha = {alpha}")));
        }
        Ok(Self {
            family: KernelFamily::NegSubFbm { d, alpha },
            constant: power_prefactor(d, alpha)?,
        })
    }

    pub fn log_sub_fbm(d: usize, alpha: f64) -> Result<Self> {
        if d as f64 != alpha {
            return Err(Error::DimensionCondition(format!("logarithmic family needs d = alpha, got d = {d}, alpha = {alpha}")));
        }
        Ok(Self {
            family: KernelFamily::LogSubFbm { d, alpha },
            constant: p1_at_origin(&motion(d, alpha)?) / 2.0,
        })
    }

    pub fn fbm(hurst: f64) -> Result<Self> {
        if !(hurst > 0.0 && hurst < 1.0) {
            return Err(invalid(format!("Hurst index {hurst} outside (0, 1)")));
        }
        Ok(Self {
            family: KernelFamily::Fbm { hurst },
            constant: 1.0,
        })
    }

    /// Fractional Brownian motion with Hurst index `1 − d/(2α)`, `d < α`.
    pub fn fbm_for(d: usize, alpha: f64) -> Result<Self> {
        motion(d, alpha)?;
        if !((d as f64) < alpha) {
            return Err(Error::DimensionCondition(format!("need d < alpha, got d = {d}, alpha = {alpha}")));
        }
        Self::fbm(1.0 - d as f64 / (2.0 * alpha))
    }

    pub fn weighted_fbm(d: usize, alpha: f64) -> Result<Self> {
        motion(d, alpha)?;
        if !((d as f64) < alpha) {
            return Err(Error::DimensionCondition(format!("weighted fBm needs d < alpha, got d = {d}, alpha = {alpha}")));
        }
        Ok(Self {
            family: KernelFamily::WeightedFbm { d, alpha },
            constant: 1.0,
        })
    }

    pub fn brownian_scaled(rate: f64) -> Result<Self> {
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(invalid(format!("rate {rate} must be nonnegative")));
        }
        Ok(Self {
            family: KernelFamily::BrownianScaled { rate },
            constant: rate,
        })
    }

    /// The sub-fBm family member selected by `d` versus `α`.
    pub fn sub_fbm_family(d: usize, alpha: f64) -> Result<Self> {
        let df = d as f64;
        if df < alpha {
            Self::neg_sub_fbm(d, alpha)
        } else if df == alpha {
            Self::log_sub_fbm(d, alpha)
        } else {
            Self::sub_fbm(d, alpha)
        }
    }

    pub fn scaled(mut self, c: f64) -> Self {
        self.constant *= c;
        self
    }

    /// Kernel without its constant.
    pub fn shape(&self, s: f64, t: f64) -> f64 {
        match self.family {
            KernelFamily::SubFbm { d, alpha } | KernelFamily::NegSubFbm { d, alpha } => {
                let h = 3.0 - d as f64 / alpha;
                0.5 * ((s + t).powf(h) + (s - t).abs().powf(h)) - s.powf(h) - t.powf(h)
            }
            KernelFamily::LogSubFbm { .. } => 0.5 * (xlogx2(s + t) + xlogx2(s - t)) - xlogx2(s) - xlogx2(t),
            KernelFamily::Fbm { hurst } => {
                let e = 2.0 * hurst;
                0.5 * (s.powf(e) + t.powf(e) - (s - t).abs().powf(e))
            }
            KernelFamily::WeightedFbm { d, alpha } => weighted_fbm_shape(d as f64 / alpha, s, t),
            KernelFamily::BrownianScaled { .. } => s.min(t),
        }
    }

    pub fn eval(&self, s: f64, t: f64) -> f64 {
        self.constant * self.shape(s, t)
    }
}

/// `∫_0^{s∧t} u^{−r} [(t−u)^{1−r} + (s−u)^{1−r}] du`.
fn weighted_fbm_shape(r: f64, s: f64, t: f64) -> f64 {
    let lo = s.min(t);
    let hi = s.max(t);
    if lo == 0.0 {
        return 0.0;
    }
    let q = 1.0 - r;
    if lo == hi {
        return 2.0 * lo.powf(2.0 - 2.0 * r) * beta(q, 2.0 - r);
    }
    // u = v^{1/q} absorbs the u^{−r} singularity
    let f = |v: f64| {
        let u = v.powf(1.0 / q).min(lo);
        ((hi - u).powf(q) + (lo - u).powf(q)) / q
    };
    integrate(f, 0.0, lo.powf(q), QuadOptions::new(1e-14, 1e-11)).value
}

pub fn cov_kernel_eval(k: &CovarianceKernel, s: f64, t: f64) -> Result<f64> {
    if !(s >= 0.0 && t >= 0.0) {
        return Err(invalid(format!("times must be nonnegative, got ({s}, {t})")));
    }
    Ok(k.eval(s, t))
}

/// Covariance of `ξ` under the stable-measure convention used by the
/// samplers, where a unit cell carries variance 2: twice the sub-fBm family
/// member for `(d, α)`. Requires `d < 2α`.
pub fn xi_covariance_kernel(d: usize, alpha: f64) -> Result<CovarianceKernel> {
    Ok(CovarianceKernel::sub_fbm_family(d, alpha)?.scaled(2.0))
}

pub fn gram_matrix(k: &CovarianceKernel, grid: &[f64]) -> Result<DMatrix<f64>> {
    validate_times(grid)?;
    let n = grid.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = k.eval(grid[i], grid[j]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok(g)
}

/// `(smallest eigenvalue, trace)` of the Gram matrix.
pub fn min_gram_eigenvalue(k: &CovarianceKernel, grid: &[f64]) -> Result<(f64, f64)> {
    let g = gram_matrix(k, grid)?;
    let trace = g.trace();
    let eig = SymmetricEigen::new(g);
    Ok((eig.eigenvalues.min(), trace))
}

const MAX_RELATIVE_JITTER: f64 = 1e-10;

/// `n` centered Gaussian paths with Gram matrix `k` on `grid`. Grid points
/// with zero variance are exactly zero.
pub fn sample_gaussian_process(k: &CovarianceKernel, grid: &[f64], n: usize, seed: u64) -> Result<SampledProcess> {
    let g = gram_matrix(k, grid)?;
    let active: Vec<usize> = (0..grid.len()).filter(|&i| g[(i, i)] != 0.0).collect();
    if active.iter().any(|&i| g[(i, i)] < 0.0) {
        return Err(Error::Numerical("negative variance on the grid".into()));
    }
    let m = active.len();
    let sub = DMatrix::from_fn(m, m, |i, j| g[(active[i], active[j])]);
    let trace = sub.trace();
    let mut jitter = 0.0;
    let chol = loop {
        let mut a = sub.clone();
        for i in 0..m {
            a[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(a) {
            break c;
        }
        jitter = if jitter == 0.0 { 1e-16 * trace } else { jitter * 10.0 };
        if jitter > MAX_RELATIVE_JITTER * trace * (1.0 + 1e-9) {
            return Err(Error::Numerical(format!(
                "Gram matrix not positive semidefinite within jitter {:.1e} of its trace",
                MAX_RELATIVE_JITTER
            )));
        }
    };
    let l = chol.l();
    let width = grid.len();
    let values: Vec<Vec<f64>> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_stream(seed, domain::GAUSSIAN_PROCESS, i);
            let z = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
            let x = &l * z;
            let mut row = vec![0.0; width];
            for (a, &idx) in active.iter().enumerate() {
                row[idx] = x[a];
            }
            row
        })
        .collect();
    let mut p = SampledProcess::new(grid.to_vec(), values, "gaussian_process");
    p.meta.diagnostics.push(("jitter".into(), jitter));
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use statrs::function::beta::beta_reg;

    #[test]
    fn zero_at_origin() {
        let ks = [
            CovarianceKernel::sub_fbm(3, 2.0).unwrap(),
            CovarianceKernel::neg_sub_fbm(1, 2.0).unwrap(),
            CovarianceKernel::log_sub_fbm(2, 2.0).unwrap(),
            CovarianceKernel::fbm(0.75).unwrap(),
            CovarianceKernel::weighted_fbm(1, 2.0).unwrap(),
            CovarianceKernel::brownian_scaled(2.0).unwrap(),
        ];
        for k in ks {
            assert_eq!(k.eval(0.0, 0.0), 0.0);
            assert_eq!(k.eval(0.0, 1.3), 0.0);
            assert!((k.eval(0.4, 1.1) - k.eval(1.1, 0.4)).abs() < 1e-13);
        }
    }

    #[test]
    fn neg_sub_fbm_diagonal() {
        let k = CovarianceKernel::neg_sub_fbm(1, 2.0).unwrap();
        let t = 1.7f64;
        let want = t.powf(2.5) * (2f64.powf(1.5) - 2.0) * k.constant;
        assert!((k.eval(t, t) - want).abs() < 1e-12);
        // p_1(0) / (0.5 · 1.5 · 2.5) with p_1(0) = 1/(2√π)
        let c = 1.0 / (2.0 * std::f64::consts::PI.sqrt()) / 1.875;
        assert!((k.constant - c).abs() < 1e-14);
    }

    #[test]
    fn weighted_fbm_closed_forms() {
        let k = CovarianceKernel::weighted_fbm(1, 2.0).unwrap();
        for t in [0.3, 1.0, 2.5] {
            assert!((k.eval(t, t) - std::f64::consts::PI * t).abs() < 1e-12);
        }
        // off-diagonal against the incomplete beta function
        let (r, s, t) = (0.5f64, 0.6f64, 1.4f64);
        let (q, b) = (1.0 - r, 2.0 - r);
        let want = s.powf(2.0 - 2.0 * r) * beta(q, b) + t.powf(2.0 - 2.0 * r) * beta(q, b) * beta_reg(q, b, s / t);
        assert!((k.eval(s, t) - want).abs() < 1e-9, "{} vs {want}", k.eval(s, t));
    }

    #[test]
    fn log_family_is_limit_of_power_family() {
        // (2.13)-shape divided by (1 − d/α) tends to the log shape as d/α → 1
        let k = CovarianceKernel::log_sub_fbm(2, 2.0).unwrap();
        let (s, t) = (0.7f64, 1.3f64);
        let eps = 1e-6;
        let h = 2.0 + eps;
        let pw = |x: f64| x.abs().powf(h);
        let shape = 0.5 * (pw(s + t) + pw(s - t)) - pw(s) - pw(t);
        assert!((shape / eps - k.shape(s, t)).abs() < 1e-5);
    }

    #[test]
    fn family_guards() {
        assert!(CovarianceKernel::sub_fbm(1, 2.0).is_err());
        assert!(CovarianceKernel::neg_sub_fbm(3, 2.0).is_err());
        assert!(CovarianceKernel::log_sub_fbm(1, 2.0).is_err());
        assert!(CovarianceKernel::weighted_fbm(2, 2.0).is_err());
        assert!(cov_kernel_eval(&CovarianceKernel::fbm(0.5).unwrap(), -1.0, 1.0).is_err());
    }

    #[test]
    fn sampler_zero_grid_and_fbm_increments() {
        let k = CovarianceKernel::fbm(0.75).unwrap();
        let p = sample_gaussian_process(&k, &[0.0], 10, 1).unwrap();
        assert!(p.values.iter().all(|r| r[0] == 0.0));
        let grid = [0.0, 0.5, 1.0];
        let p = sample_gaussian_process(&k, &grid, 40_000, 2).unwrap();
        let inc: Vec<f64> = p.values.iter().map(|r| r[2] - r[1]).collect();
        let n = inc.len() as f64;
        let m2 = inc.iter().map(|x| x * x).sum::<f64>() / n;
        let se = (inc.iter().map(|x| (x * x - m2).powi(2)).sum::<f64>() / n).sqrt() / n.sqrt();
        let want = 0.5f64.powf(1.5);
        assert!((m2 - want).abs() < 4.0 * se, "{m2} vs {want} (se {se})");
    }

    #[test]
    fn sampler_is_deterministic() {
        let k = CovarianceKernel::neg_sub_fbm(1, 2.0).unwrap();
        let a = sample_gaussian_process(&k, &[0.5, 1.0], 50, 9).unwrap();
        let b = sample_gaussian_process(&k, &[0.5, 1.0], 50, 9).unwrap();
        assert_eq!(a.values, b.values);
    }

    fn kernels() -> Vec<CovarianceKernel> {
        vec![
            CovarianceKernel::sub_fbm(3, 2.0).unwrap(),
            CovarianceKernel::neg_sub_fbm(1, 2.0).unwrap(),
            CovarianceKernel::neg_sub_fbm(1, 1.5).unwrap(),
            CovarianceKernel::log_sub_fbm(1, 1.0).unwrap(),
            CovarianceKernel::fbm(0.3).unwrap(),
            CovarianceKernel::weighted_fbm(1, 2.0).unwrap(),
            CovarianceKernel::weighted_fbm(1, 1.3).unwrap(),
            CovarianceKernel::brownian_scaled(0.5).unwrap(),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn gram_matrices_are_psd(mut pts in prop::collection::vec(0.001f64..20.0, 1..48), which in 0usize..8) {
            pts.sort_by(f64::total_cmp);
            pts.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
            let k = kernels()[which];
            let (lmin, tr) = min_gram_eigenvalue(&k, &pts).unwrap();
            prop_assert!(lmin >= -1e-10 * tr, "min eigenvalue {lmin}, trace {tr}");
        }
    }
}
