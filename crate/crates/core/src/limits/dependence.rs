//! Self-similarity indices, dependence exponents, and the inter-block
//! dependence distance of the Gaussian limits.

use super::kernels::{CovarianceKernel, KernelFamily};
use super::IntegralKind;
use crate::error::{invalid, Result};
use crate::quad::gauss_legendre;

/// Index `b` with `X_{a·} =_d a^b X_·`.
pub fn self_similarity_index(kind: IntegralKind, d: usize, alpha: f64, beta: f64) -> f64 {
    let r = d as f64 / alpha;
    match kind {
        IntegralKind::Xi => (2.0 + beta - r * beta) / (1.0 + beta),
        IntegralKind::Zeta => (2.0 + beta) / (1.0 + beta) - r,
    }
}

/// Long-range dependence exponent of `ξ`.
pub fn dependence_exponent(d: usize, alpha: f64, beta: f64) -> f64 {
    let df = d as f64;
    let r = df / alpha;
    if alpha == 2.0 || beta > df / (df + alpha) {
        r
    } else {
        r * (1.0 + beta - df / (df + alpha))
    }
}

/// `(1+x)^p − (1−x)^p` for `|x| < 1` without cancellation.
fn sym_power_diff(x: f64, p: f64) -> f64 {
    (p * x.ln_1p()).exp_m1() - (p * (-x).ln_1p()).exp_m1()
}

/// `∂²K/∂a∂b` for `a < b`, constant included.
fn mixed_partial(k: &CovarianceKernel, a: f64, b: f64) -> f64 {
    let c = k.constant;
    match k.family {
        KernelFamily::SubFbm { d, alpha } | KernelFamily::NegSubFbm { d, alpha } => {
            let h = 3.0 - d as f64 / alpha;
            // ½ h (h−1) [(b+a)^{h−2} − (b−a)^{h−2}]
            c * 0.5 * h * (h - 1.0) * b.powf(h - 2.0) * sym_power_diff(a / b, h - 2.0)
        }
        KernelFamily::LogSubFbm { .. } => {
            let x = a / b;
            c * (x.ln_1p() - (-x).ln_1p())
        }
        KernelFamily::Fbm { hurst } => c * hurst * (2.0 * hurst - 1.0) * (b - a).powf(2.0 * hurst - 2.0),
        KernelFamily::WeightedFbm { d, alpha } => {
            let r = d as f64 / alpha;
            c * (1.0 - r) * a.powf(-r) * (b - a).powf(-r)
        }
        KernelFamily::BrownianScaled { .. } => 0.0,
    }
}

/// `Cov(X_v − X_u, X_t − X_s)` for `u < v ≤ s < t`, by Gauss–Legendre
/// integration of the mixed partial derivative; exact four-term difference
/// when the blocks touch.
pub fn increment_covariance(k: &CovarianceKernel, u: f64, v: f64, s: f64, t: f64) -> Result<f64> {
    if !(0.0 <= u && u < v && v <= s && s < t) {
        return Err(invalid(format!("need 0 <= u < v <= s < t, got {u}, {v}, {s}, {t}")));
    }
    let gap = s - v;
    if gap < 1e-3 * (v - u).max(t - s) {
        return Ok(k.eval(v, t) - k.eval(v, s) - k.eval(u, t) + k.eval(u, s));
    }
    let (x, w) = gauss_legendre(24);
    let weighted = matches!(k.family, KernelFamily::WeightedFbm { .. });
    let mut total = 0.0;
    for (xi, wi) in x.iter().zip(&w) {
        // the u^{−r} weight is integrated exactly in q = a^{1−r}
        let (a, ja) = if weighted {
            let KernelFamily::WeightedFbm { d, alpha } = k.family else { unreachable!() };
            let q = 1.0 - d as f64 / alpha;
            let (lo, hi) = (u.powf(q), v.powf(q));
            let qq = lo + 0.5 * (hi - lo) * (1.0 + xi);
            let a = qq.powf(1.0 / q);
            (a, 0.5 * (hi - lo) * a.powf(1.0 - q) / q)
        } else {
            (u + 0.5 * (v - u) * (1.0 + xi), 0.5 * (v - u))
        };
        for (xj, wj) in x.iter().zip(&w) {
            let b = s + 0.5 * (t - s) * (1.0 + xj);
            total += wi * wj * ja * 0.5 * (t - s) * mixed_partial(k, a, b);
        }
    }
    Ok(total)
}

/// `D_T = |log E e^{i(z₁A + z₂B)} − log E e^{iz₁A} − log E e^{iz₂B}|` with
/// `A = X_v − X_u`, `B = X_{T+t} − X_{T+s}`; for a Gaussian process this is
/// `|z₁ z₂ Cov(A, B)|`.
#[allow(clippy::too_many_arguments)]
pub fn dependence_distance_gaussian(
    k: &CovarianceKernel,
    z1: f64,
    z2: f64,
    u: f64,
    v: f64,
    s: f64,
    t: f64,
    horizon: f64,
) -> Result<f64> {
    if !(0.0 <= u && u < v && v < s && s < t) {
        return Err(invalid(format!("need 0 <= u < v < s < t, got {u}, {v}, {s}, {t}")));
    }
    if !(horizon > 0.0) {
        return Err(invalid(format!("T = {horizon} must be positive")));
    }
    if z1 == 0.0 || z2 == 0.0 {
        return Ok(0.0);
    }
    Ok((z1 * z2 * increment_covariance(k, u, v, horizon + s, horizon + t)?).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indices() {
        assert!((self_similarity_index(IntegralKind::Xi, 1, 2.0, 1.0) - 1.25).abs() < 1e-15);
        assert!((self_similarity_index(IntegralKind::Zeta, 1, 2.0, 1.0) - 1.0).abs() < 1e-15);
        // at β = 1 the index of ξ is (3 − d/α)/2
        for (d, a) in [(1, 2.0), (3, 2.0), (1, 1.5)] {
            let b = self_similarity_index(IntegralKind::Xi, d, a, 1.0);
            assert!((b - (3.0 - d as f64 / a) / 2.0).abs() < 1e-15);
        }
        assert_eq!(dependence_exponent(1, 2.0, 0.3), 0.5);
        assert!((dependence_exponent(1, 1.0, 0.4) - 0.9).abs() < 1e-15);
        assert_eq!(dependence_exponent(1, 1.0, 0.6), 1.0);
    }

    #[test]
    fn increment_covariance_matches_four_terms() {
        let ks = [
            CovarianceKernel::neg_sub_fbm(1, 2.0).unwrap(),
            CovarianceKernel::sub_fbm(3, 2.0).unwrap(),
            CovarianceKernel::log_sub_fbm(1, 1.0).unwrap(),
            CovarianceKernel::fbm(0.75).unwrap(),
            CovarianceKernel::weighted_fbm(1, 2.0).unwrap(),
        ];
        for k in ks {
            let (u, v, s, t) = (0.2, 0.9, 1.6, 2.5);
            let direct = k.eval(v, t) - k.eval(v, s) - k.eval(u, t) + k.eval(u, s);
            let got = increment_covariance(&k, u, v, s, t).unwrap();
            assert!((got - direct).abs() < 1e-8 * direct.abs().max(1e-3), "{:?}: {got} vs {direct}", k.family);
        }
    }

    #[test]
    fn distance_guards_and_zero() {
        let k = CovarianceKernel::neg_sub_fbm(1, 2.0).unwrap();
        assert_eq!(dependence_distance_gaussian(&k, 0.0, 1.0, 0.0, 1.0, 2.0, 3.0, 10.0).unwrap(), 0.0);
        assert!(dependence_distance_gaussian(&k, 1.0, 1.0, 1.0, 0.5, 2.0, 3.0, 10.0).is_err());
        assert_eq!(
            dependence_distance_gaussian(&CovarianceKernel::brownian_scaled(1.0).unwrap(), 1.0, 1.0, 0.0, 1.0, 2.0, 3.0, 5.0)
                .unwrap(),
            0.0
        );
    }
}
