//! Finite-dimensional characteristic functions of `ξ` and `ζ` by nested
//! adaptive quadrature, and the second moment of `ζ` in the Gaussian case.

use num_complex::Complex64;

use super::stable_integral::{existence_error, occupation_kernel};
use super::{existence_check, validate_times, IntegralKind};
use crate::density::{density_radial, p1_radial, MotionParams};
use crate::error::{invalid, Result};
use crate::quad::{integrate_to_infinity, integrate_with_breaks, QuadOptions};
use crate::special::sphere_area;
use crate::stable::skew_tangent;

const REL_TOL: f64 = 1e-4;

fn inner_opts() -> QuadOptions {
    QuadOptions::new(1e-300, REL_TOL * 1e-2).with_max_intervals(2000)
}

fn outer_opts() -> QuadOptions {
    QuadOptions::new(1e-300, REL_TOL * 1e-1).with_max_intervals(2000)
}

fn check(kind: IntegralKind, m: &MotionParams, beta: f64, times: &[f64], z: &[f64]) -> Result<()> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(invalid(format!("beta {beta} outside (0, 1]")));
    }
    if times.len() != z.len() {
        return Err(invalid("times and z must have the same length"));
    }
    validate_times(times)?;
    if !existence_check(kind, m.d(), m.alpha(), beta) {
        return Err(existence_error(kind, m, beta));
    }
    Ok(())
}

/// `Σ_j z_j 1{r < t_j} ∫_0^{t_j − r} p_u(ρ) du`.
fn combined(m: &MotionParams, times: &[f64], z: &[f64], r: f64, rho: f64) -> f64 {
    times
        .iter()
        .zip(z)
        .filter(|(t, zj)| r < **t && **zj != 0.0)
        .map(|(t, zj)| zj * occupation_kernel(m, t - r, rho))
        .sum()
}

/// `(∫∫ |g|^{1+β}, ∫∫ |g|^{1+β} sgn g)` for a radial-in-space integrand given
/// at each time `r` by `inner(r, which)`.
fn log_cf_from_parts<F>(outer_breaks: &[f64], t_max: f64, beta: f64, inner: F) -> Complex64
where
    F: Fn(f64, bool) -> f64,
{
    let a = integrate_with_breaks(|r| inner(r, false), 0.0, t_max, outer_breaks, outer_opts()).value;
    let b = integrate_with_breaks(|r| inner(r, true), 0.0, t_max, outer_breaks, outer_opts()).value;
    Complex64::new(-a, skew_tangent(1.0 + beta) * b)
}

fn outer_breaks(times: &[f64], graded_to_zero: bool) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    let mut prev = 0.0;
    for &t in times {
        if t > prev {
            // refine toward each time, where the inner integrand has a kink
            for k in 1..12 {
                out.push(t - (t - prev) * 0.5f64.powi(k));
            }
            out.push(t);
        }
        prev = t;
    }
    if graded_to_zero {
        let first = times.iter().copied().find(|t| *t > 0.0).unwrap_or(1.0);
        out.extend((1..40).map(|k| first * 0.7f64.powi(k)));
    }
    out.sort_by(f64::total_cmp);
    out
}

/// `E exp{i Σ z_j ξ_{t_j}}`.
pub fn cf_xi_fdd(d: usize, alpha: f64, beta: f64, times: &[f64], z: &[f64]) -> Result<Complex64> {
    let m = MotionParams::new(d, alpha)?;
    check(IntegralKind::Xi, &m, beta, times, z)?;
    if z.iter().all(|v| *v == 0.0) {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let e = 1.0 + beta;
    let area = sphere_area(d);
    let t_max = *times.last().unwrap();
    let inner = |r: f64, signed: bool| {
        let span = times.iter().filter(|t| **t > r).map(|t| t - r).fold(0.0, f64::max);
        if span <= 0.0 {
            return 0.0;
        }
        let s = span.powf(1.0 / alpha);
        let f = |rho: f64| {
            let g = combined(&m, times, z, r, rho);
            let v = area * rho.powi(d as i32 - 1) * g.abs().powf(e);
            if signed {
                v * g.signum()
            } else {
                v
            }
        };
        let near: Vec<f64> = (1..30).map(|k| s * 0.6f64.powi(k)).collect();
        integrate_with_breaks(f, 0.0, s, &near, inner_opts()).value + integrate_to_infinity(f, s, s, inner_opts()).value
    };
    Ok(log_cf_from_parts(&outer_breaks(times, false), t_max, beta, inner).exp())
}

/// `E exp{i Σ z_j ζ_{t_j}}`.
pub fn cf_zeta_fdd(d: usize, alpha: f64, beta: f64, times: &[f64], z: &[f64]) -> Result<Complex64> {
    let m = MotionParams::new(d, alpha)?;
    check(IntegralKind::Zeta, &m, beta, times, z)?;
    if z.iter().all(|v| *v == 0.0) {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let e = 1.0 + beta;
    let area = sphere_area(d);
    let t_max = *times.last().unwrap();
    // x = r^{1/α} y turns p_r(x) dx into p_1(y) dy
    let inner = |r: f64, signed: bool| {
        if r <= 0.0 {
            return 0.0;
        }
        let sr = r.powf(1.0 / alpha);
        let f = |y: f64| {
            let g = combined(&m, times, z, r, sr * y);
            let v = area * y.powi(d as i32 - 1) * p1_radial(&m, y) * g.abs().powf(e);
            if signed {
                v * g.signum()
            } else {
                v
            }
        };
        let near: Vec<f64> = (1..20).map(|k| 0.6f64.powi(k)).collect();
        integrate_with_breaks(f, 0.0, 1.0, &near, inner_opts()).value + integrate_to_infinity(f, 1.0, 1.0, inner_opts()).value
    };
    Ok(log_cf_from_parts(&outer_breaks(times, true), t_max, beta, inner).exp())
}

/// `E ζ_t² = 2 ∫_0^t ∫ p_r(x) (∫_r^t p_{u−r}(x) du)² dx dr` at `β = 1`, by
/// direct quadrature in `x`.
pub fn zeta_second_moment(d: usize, alpha: f64, t: f64) -> Result<f64> {
    let m = MotionParams::new(d, alpha)?;
    if !existence_check(IntegralKind::Zeta, d, alpha, 1.0) {
        return Err(existence_error(IntegralKind::Zeta, &m, 1.0));
    }
    if !(t >= 0.0) {
        return Err(invalid(format!("time {t} must be nonnegative")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let area = sphere_area(d);
    let opts = QuadOptions::new(1e-300, 1e-8).with_max_intervals(4000);
    let inner = |r: f64| {
        if r <= 0.0 || r >= t {
            return 0.0;
        }
        let s = r.powf(1.0 / alpha);
        let f = |rho: f64| {
            let w = occupation_kernel(&m, t - r, rho);
            area * rho.powi(d as i32 - 1) * density_radial(&m, r, rho) * w * w
        };
        let near: Vec<f64> = (-20..4).map(|k| s * 2f64.powi(k)).collect();
        let hi = 8.0 * s;
        integrate_with_breaks(f, 0.0, hi, &near, opts).value + integrate_to_infinity(f, hi, s, opts).value
    };
    let mut breaks: Vec<f64> = (1..60).map(|k| t * 0.7f64.powi(k)).collect();
    breaks.extend((1..12).map(|k| t - t * 0.5f64.powi(k)));
    breaks.sort_by(f64::total_cmp);
    Ok(2.0 * integrate_with_breaks(inner, 0.0, t, &breaks, QuadOptions::new(1e-300, 1e-7)).value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limits::kernels::CovarianceKernel;
    use crate::limits::stable_integral::{build_cells, discretized_log_cf, StableIntegralGrid};

    #[test]
    fn trivial_arguments() {
        assert_eq!(cf_xi_fdd(1, 2.0, 0.5, &[1.0], &[0.0]).unwrap(), Complex64::new(1.0, 0.0));
        assert_eq!(cf_zeta_fdd(1, 2.0, 0.5, &[1.0], &[0.0]).unwrap(), Complex64::new(1.0, 0.0));
        assert!(cf_xi_fdd(1, 2.0, 0.5, &[1.0], &[1.0, 2.0]).is_err());
        assert!(cf_zeta_fdd(3, 2.0, 1.0, &[1.0], &[1.0]).is_err());
    }

    #[test]
    fn gaussian_xi_matches_kernel() {
        let k = CovarianceKernel::neg_sub_fbm(1, 2.0).unwrap();
        for z in [0.7, 1.3] {
            let c = cf_xi_fdd(1, 2.0, 1.0, &[1.0], &[z]).unwrap();
            assert!(c.im.abs() < 1e-12);
            let want = z * z * k.eval(1.0, 1.0);
            assert!((-c.ln().re / want - 1.0).abs() < 1e-4, "{} vs {want}", -c.ln().re);
        }
        // joint law at two times is the bilinear form of the kernel
        let (s, t) = (0.4, 1.0);
        let c = cf_xi_fdd(1, 2.0, 1.0, &[s, t], &[0.8, -0.5]).unwrap();
        let q = 0.64 * k.eval(s, s) + 0.25 * k.eval(t, t) - 0.8 * k.eval(s, t);
        assert!((-c.ln().re / q - 1.0).abs() < 1e-4);
    }

    #[test]
    fn conjugate_symmetry_and_modulus() {
        for (zz, t) in [(0.6, 1.0), (1.5, 0.7)] {
            let a = cf_xi_fdd(1, 2.0, 0.5, &[t], &[zz]).unwrap();
            let b = cf_xi_fdd(1, 2.0, 0.5, &[t], &[-zz]).unwrap();
            assert!((a - b.conj()).norm() < 1e-10);
            assert!(a.norm() <= 1.0);
            assert!(a.im.abs() > 1e-3);
            let a = cf_zeta_fdd(1, 2.0, 0.5, &[t], &[zz]).unwrap();
            let b = cf_zeta_fdd(1, 2.0, 0.5, &[t], &[-zz]).unwrap();
            assert!((a - b.conj()).norm() < 1e-10);
            assert!(a.norm() <= 1.0);
        }
    }

    #[test]
    fn xi_scales_self_similarly() {
        // log CF of ξ_{at} at z equals that of ξ_t at a^b z
        let beta = 0.5;
        let b = (2.0 + beta - 0.5 * beta) / (1.0 + beta);
        let a = 2.0f64;
        let l1 = cf_xi_fdd(1, 2.0, beta, &[a], &[0.4]).unwrap().ln();
        let l2 = cf_xi_fdd(1, 2.0, beta, &[1.0], &[0.4 * a.powf(b)]).unwrap().ln();
        assert!((l1 - l2).norm() < 2e-4 * l1.norm());
    }

    #[test]
    fn gaussian_zeta_matches_second_moment() {
        let v = zeta_second_moment(1, 2.0, 1.0).unwrap();
        let c = cf_zeta_fdd(1, 2.0, 1.0, &[1.0], &[1.0]).unwrap();
        assert!((-2.0 * c.ln().re / v - 1.0).abs() < 2e-4, "{} vs {v}", -2.0 * c.ln().re);
        // self-similar with index 1 at d = 1, α = 2, β = 1
        let v2 = zeta_second_moment(1, 2.0, 2.0).unwrap();
        assert!((v2 / v - 4.0).abs() < 1e-3);
    }

    #[test]
    fn additivity_over_disjoint_blocks() {
        // at β = 1 the log-CF of the joint law splits into the two marginal
        // parts plus the cross term fixed by the kernel
        let k = CovarianceKernel::neg_sub_fbm(1, 2.0).unwrap();
        let (a, b) = (0.5, 1.5);
        let joint = cf_xi_fdd(1, 2.0, 1.0, &[a, b], &[1.0, 1.0]).unwrap().ln().re;
        let la = cf_xi_fdd(1, 2.0, 1.0, &[a], &[1.0]).unwrap().ln().re;
        let lb = cf_xi_fdd(1, 2.0, 1.0, &[b], &[1.0]).unwrap().ln().re;
        assert!((joint - la - lb + 2.0 * k.eval(a, b)).abs() < 1e-4 * joint.abs());
    }

    #[test]
    fn discretization_converges_to_quadrature() {
        let beta = 0.5;
        let g = StableIntegralGrid::auto(IntegralKind::Xi, 1, 2.0, beta, 1.0).unwrap();
        let cells = build_cells(IntegralKind::Xi, &g, &[1.0]).unwrap();
        let want = cf_xi_fdd(1, 2.0, beta, &[1.0], &[1.0]).unwrap().ln();
        let got = discretized_log_cf(&cells, beta, 1.0, &[1.0]);
        assert!((got - want).norm() < 5e-3 * want.norm(), "{got} vs {want}");
    }
}
