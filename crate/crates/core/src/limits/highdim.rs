//! Laws of `⟨X, φ⟩` for the distribution-valued limits in high dimension,
//! expressed through the Riesz potential `G`.
//!
//! Spatial integrals are computed on the line for `d = 1` and radially when
//! every bump of the test functions and every component of `μ` share one
//! center; other geometries are not supported.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::density::{dist2, riesz_bump_radial, riesz_constant, riesz_potential, FiniteMeasureSpec, MeasureComponent, MotionParams, TestFunction};
use crate::error::{invalid, Error, Result};
use crate::quad::{integrate_with_breaks, QuadOptions};
use crate::special::sphere_area;
use crate::stable::skew_tangent;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HighDimVariant {
    /// Branching, Lebesgue intensity, `β < 1`: CF of `⟨X(t), zφ⟩`.
    LebesgueStable,
    /// Branching, Lebesgue intensity, `β = 1`: covariance of `⟨W(s), φ₁⟩, ⟨W(t), φ₂⟩`.
    LebesgueGaussian,
    /// No branching, Lebesgue intensity: covariance.
    LebesgueNonbranching,
    /// Branching, finite intensity, `β < 1`: CF of `⟨X, zφ⟩`.
    FiniteStable,
    /// Branching, finite intensity, `β = 1`: covariance.
    FiniteGaussian,
    /// No branching, finite intensity: covariance.
    FiniteNonbranching,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HighDimParams {
    pub motion: MotionParams,
    pub beta: f64,
    pub branching_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum HighDimValue {
    Cf(Complex64),
    Covariance(f64),
}

impl HighDimVariant {
    fn is_stable(self) -> bool {
        matches!(self, HighDimVariant::LebesgueStable | HighDimVariant::FiniteStable)
    }

    fn is_finite(self) -> bool {
        matches!(
            self,
            HighDimVariant::FiniteStable | HighDimVariant::FiniteGaussian | HighDimVariant::FiniteNonbranching
        )
    }

    /// Dimension threshold that `d` must exceed.
    fn threshold(self, alpha: f64, beta: f64) -> f64 {
        use HighDimVariant::*;
        match self {
            LebesgueStable | LebesgueGaussian => alpha * (1.0 + beta) / beta,
            FiniteStable | FiniteGaussian => alpha * (2.0 + beta) / (1.0 + beta),
            LebesgueNonbranching | FiniteNonbranching => alpha,
        }
    }

    /// Power decay of the spatial integrand (radial measure included).
    fn decay(self, d: f64, alpha: f64, beta: f64) -> f64 {
        use HighDimVariant::*;
        let delta = d - alpha;
        match self {
            LebesgueStable => d - 1.0 - delta * (1.0 + beta),
            LebesgueGaussian | LebesgueNonbranching => d - 1.0 - 2.0 * delta,
            FiniteStable => d - 1.0 - delta * (2.0 + beta),
            FiniteGaussian | FiniteNonbranching => d - 1.0 - 3.0 * delta,
        }
    }
}

/// Density of `Gμ` with point masses replaced by the exact kernel.
fn riesz_of_measure(m: &MotionParams, mu: &FiniteMeasureSpec, x: &[f64]) -> Result<f64> {
    let c = riesz_constant(m)?;
    let d = m.d() as f64;
    let mut total = 0.0;
    for comp in mu.components() {
        total += match comp {
            MeasureComponent::PointMass { weight, at } => weight * c * dist2(x, at).sqrt().powf(m.alpha() - d),
            MeasureComponent::Gaussian { weight, center, width } => {
                weight * riesz_bump_radial(m, *width, dist2(x, center).sqrt())?
            }
        };
    }
    Ok(total)
}

enum Geometry {
    Line { points: Vec<f64>, scale: f64 },
    Radial { center: Vec<f64>, scale: f64 },
}

fn geometry(d: usize, fs: &[&TestFunction], mu: Option<&FiniteMeasureSpec>) -> Result<Geometry> {
    let mut centers: Vec<(Vec<f64>, f64)> = Vec::new();
    for f in fs {
        for b in f.bumps() {
            centers.push((b.center.clone(), b.width.sqrt()));
        }
    }
    if let Some(mu) = mu {
        for c in mu.components() {
            match c {
                MeasureComponent::PointMass { at, .. } => centers.push((at.clone(), 0.0)),
                MeasureComponent::Gaussian { center, width, .. } => centers.push((center.clone(), width.sqrt())),
            }
        }
    }
    if centers.is_empty() {
        return Ok(Geometry::Radial {
            center: vec![0.0; d],
            scale: 1.0,
        });
    }
    if centers.iter().any(|(c, _)| c.len() != d) {
        return Err(invalid("test functions and measure must live in the motion's dimension"));
    }
    let spread = centers.iter().map(|(_, s)| *s).fold(0.0, f64::max);
    if d == 1 {
        let points: Vec<f64> = centers.iter().map(|(c, _)| c[0]).collect();
        let lo = points.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = points.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        return Ok(Geometry::Line {
            points,
            scale: (hi - lo).max(spread).max(1e-3),
        });
    }
    let c0 = centers[0].0.clone();
    if centers.iter().any(|(c, _)| dist2(c, &c0) > 1e-24) {
        return Err(Error::Unsupported(
            "in d >= 2 only configurations sharing a single center are supported".into(),
        ));
    }
    Ok(Geometry::Radial {
        center: c0,
        scale: spread.max(1e-3),
    })
}

/// `∫_{ℝ^d} F(x) dx` for an integrand with power decay exponent `decay`
/// (radial measure included); the tail beyond a large radius is closed by
/// the power law.
fn spatial_integral<F: Fn(&[f64]) -> f64>(geo: &Geometry, d: usize, decay: f64, f: F) -> f64 {
    let opts = QuadOptions::new(1e-300, 1e-8).with_max_intervals(4000);
    // a node landing exactly on a point mass sees an integrable singularity
    let f = |x: &[f64]| {
        let v = f(x);
        if v.is_infinite() {
            0.0
        } else {
            v
        }
    };
    match geo {
        Geometry::Line { points, scale } => {
            let lo = points.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = points.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let big = 200.0 * scale;
            let (a, b) = (lo - big, hi + big);
            let mut breaks: Vec<f64> = Vec::new();
            for p in points {
                for k in -30..=10 {
                    let h = scale * 2f64.powi(k);
                    breaks.push(p - h);
                    breaks.push(p + h);
                }
                breaks.push(*p);
            }
            let g = |x: f64| f(&[x]);
            let body = integrate_with_breaks(g, a, b, &breaks, opts).value;
            let tail = (g(a) * big + g(b) * big) / (-decay - 1.0);
            body + tail
        }
        Geometry::Radial { center, scale } => {
            let area = sphere_area(d);
            let big = 200.0 * scale;
            let at = |rho: f64| {
                let mut x = center.clone();
                x[0] += rho;
                area * rho.powi(d as i32 - 1) * f(&x)
            };
            let breaks: Vec<f64> = (-40..=7).map(|k| scale * 2f64.powi(k)).collect();
            let body = integrate_with_breaks(|r| if r > 0.0 { at(r) } else { 0.0 }, 0.0, big, &breaks, opts).value;
            body + at(big) * big / (-decay - 1.0)
        }
    }
}

/// CF value (stable variants, argument `z`) or covariance (Gaussian
/// variants, times `s`, `t`; test functions `f1`, `f2`).
#[allow(clippy::too_many_arguments)]
pub fn highdim_law(
    variant: HighDimVariant,
    p: &HighDimParams,
    f1: &TestFunction,
    f2: Option<&TestFunction>,
    mu: Option<&FiniteMeasureSpec>,
    s: f64,
    t: f64,
    z: f64,
) -> Result<HighDimValue> {
    let m = p.motion;
    let d = m.d();
    let df = d as f64;
    let alpha = m.alpha();
    let beta = p.beta;
    let v = p.branching_rate;
    let thr = variant.threshold(alpha, beta);
    if !(df > thr) {
        return Err(Error::DimensionCondition(format!("{variant:?} needs d > {thr:.6}, got d = {d}")));
    }
    if variant.is_stable() && !(beta > 0.0 && beta < 1.0) {
        return Err(invalid(format!("{variant:?} needs beta in (0, 1), got {beta}")));
    }
    if matches!(variant, HighDimVariant::LebesgueGaussian | HighDimVariant::FiniteGaussian) && beta != 1.0 {
        return Err(invalid(format!("{variant:?} needs beta = 1, got {beta}")));
    }
    if !(v >= 0.0) {
        return Err(invalid("branching rate must be nonnegative"));
    }
    if !(s >= 0.0 && t >= 0.0) {
        return Err(invalid("times must be nonnegative"));
    }
    let mu = if variant.is_finite() {
        Some(mu.ok_or_else(|| invalid(format!("{variant:?} needs a finite measure")))?)
    } else {
        None
    };
    let f2 = f2.unwrap_or(f1);
    for f in [f1, f2] {
        if f.dim().is_some_and(|k| k != d) {
            return Err(invalid("test function dimension does not match the motion"));
        }
    }
    let decay = variant.decay(df, alpha, beta);
    let geo = geometry(d, &[f1, f2], mu)?;
    let gmu = |x: &[f64]| match mu {
        Some(mu) => riesz_of_measure(&m, mu, x).unwrap_or(f64::NAN),
        None => 1.0,
    };
    let g = |f: &TestFunction, x: &[f64]| riesz_potential(&m, f, x).unwrap_or(f64::NAN);

    if variant.is_stable() {
        if z == 0.0 || f1.bumps().is_empty() {
            return Ok(HighDimValue::Cf(Complex64::new(1.0, 0.0)));
        }
        let e = 1.0 + beta;
        let k = v / e * (-(PI * e / 2.0).cos());
        let weight = if variant == HighDimVariant::LebesgueStable { k * t } else { k };
        let mag = spatial_integral(&geo, d, decay, |x| (z * g(f1, x)).abs().powf(e) * gmu(x));
        let signed = spatial_integral(&geo, d, decay, |x| {
            let y = z * g(f1, x);
            y.abs().powf(e) * y.signum() * gmu(x)
        });
        if !(mag.is_finite() && signed.is_finite()) {
            return Err(Error::Numerical(format!("{variant:?} integral did not converge")));
        }
        let log = Complex64::new(-weight * mag, weight * skew_tangent(e) * signed);
        return Ok(HighDimValue::Cf(log.exp()));
    }

    if f1.bumps().is_empty() || f2.bumps().is_empty() {
        return Ok(HighDimValue::Covariance(0.0));
    }
    let value = match variant {
        HighDimVariant::LebesgueGaussian => {
            s.min(t) * spatial_integral(&geo, d, decay, |x| v * g(f1, x) * g(f2, x) + 2.0 * f1.eval(x) * g(f2, x))
        }
        HighDimVariant::LebesgueNonbranching => s.min(t) * 2.0 * spatial_integral(&geo, d, decay, |x| f1.eval(x) * g(f2, x)),
        HighDimVariant::FiniteGaussian => {
            2.0 * spatial_integral(&geo, d, decay, |x| {
                (f1.eval(x) * g(f2, x) + 0.5 * v * g(f1, x) * g(f2, x)) * gmu(x)
            })
        }
        HighDimVariant::FiniteNonbranching => 2.0 * spatial_integral(&geo, d, decay, |x| f1.eval(x) * g(f2, x) * gmu(x)),
        _ => unreachable!(),
    };
    if !value.is_finite() {
        return Err(Error::Numerical(format!("{variant:?} integral did not converge")));
    }
    Ok(HighDimValue::Covariance(value))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(d: usize, alpha: f64, beta: f64, v: f64) -> HighDimParams {
        HighDimParams {
            motion: MotionParams::new(d, alpha).unwrap(),
            beta,
            branching_rate: v,
        }
    }

    fn cov(v: HighDimValue) -> f64 {
        match v {
            HighDimValue::Covariance(c) => c,
            _ => panic!("expected a covariance"),
        }
    }

    fn cf(v: HighDimValue) -> Complex64 {
        match v {
            HighDimValue::Cf(c) => c,
            _ => panic!("expected a CF"),
        }
    }

    #[test]
    fn trivial_values() {
        let phi = TestFunction::standard(7, 1.0).unwrap();
        let p = params(7, 2.0, 0.5, 1.0);
        let c = cf(highdim_law(HighDimVariant::LebesgueStable, &p, &phi, None, None, 0.0, 1.0, 0.0).unwrap());
        assert_eq!(c, Complex64::new(1.0, 0.0));
        let p1 = params(5, 2.0, 1.0, 1.0);
        let zero = TestFunction::zero();
        let v = cov(highdim_law(HighDimVariant::LebesgueGaussian, &p1, &zero, None, None, 1.0, 1.0, 0.0).unwrap());
        assert_eq!(v, 0.0);
    }

    #[test]
    fn nonbranching_limit_of_branching_formulas() {
        let phi = TestFunction::standard(5, 1.0).unwrap();
        let p0 = params(5, 2.0, 1.0, 0.0);
        let a = cov(highdim_law(HighDimVariant::LebesgueGaussian, &p0, &phi, None, None, 1.0, 1.0, 0.0).unwrap());
        let b = cov(highdim_law(HighDimVariant::LebesgueNonbranching, &p0, &phi, None, None, 1.0, 1.0, 0.0).unwrap());
        assert!((a - b).abs() < 1e-10 * b.abs());
        assert!(b > 0.0);
        let mu = FiniteMeasureSpec::point_mass(1.0, vec![0.0; 5]).unwrap();
        let a = cov(highdim_law(HighDimVariant::FiniteGaussian, &p0, &phi, None, Some(&mu), 0.0, 0.0, 0.0).unwrap());
        let b = cov(highdim_law(HighDimVariant::FiniteNonbranching, &p0, &phi, None, Some(&mu), 0.0, 0.0, 0.0).unwrap());
        assert!((a - b).abs() < 1e-10 * b.abs());
    }

    #[test]
    fn newtonian_case_against_closed_form() {
        // d = 3, α = 2, φ = N(0, I): ∫ φ Gφ = ∫∫ φ(x)φ(y)/(4π|x−y|) = 1/(4π √π)
        let phi = TestFunction::standard(3, 1.0).unwrap();
        let p = params(3, 2.0, 1.0, 0.0);
        let v = cov(highdim_law(HighDimVariant::LebesgueNonbranching, &p, &phi, None, None, 1.0, 2.0, 0.0).unwrap());
        let want = 2.0 / (4.0 * PI * PI.sqrt());
        assert!((v - want).abs() < 1e-6 * want, "{v} vs {want}");
    }

    #[test]
    fn stable_cf_is_a_cf() {
        let phi = TestFunction::standard(1, 1.0).unwrap();
        let p = params(1, 0.4, 0.8, 1.0);
        let mu = FiniteMeasureSpec::point_mass(1.0, vec![0.3]).unwrap();
        let a = cf(highdim_law(HighDimVariant::FiniteStable, &p, &phi, None, Some(&mu), 0.0, 0.0, 0.7).unwrap());
        let b = cf(highdim_law(HighDimVariant::FiniteStable, &p, &phi, None, Some(&mu), 0.0, 0.0, -0.7).unwrap());
        assert!(a.norm() < 1.0 && a.norm() > 0.0, "{a}");
        assert!((a - b.conj()).norm() < 1e-10);
        let c = cf(highdim_law(HighDimVariant::LebesgueStable, &p, &phi, None, None, 0.0, 2.0, 0.7).unwrap());
        let c1 = cf(highdim_law(HighDimVariant::LebesgueStable, &p, &phi, None, None, 0.0, 1.0, 0.7).unwrap());
        assert!((c.ln() - 2.0 * c1.ln()).norm() < 1e-9);
    }

    #[test]
    fn guards() {
        let phi = TestFunction::standard(3, 1.0).unwrap();
        let p = params(3, 2.0, 1.0, 1.0);
        let e = highdim_law(HighDimVariant::LebesgueGaussian, &p, &phi, None, None, 1.0, 1.0, 0.0).unwrap_err();
        assert!(matches!(e, Error::DimensionCondition(_)));
        let off = TestFunction::bump(1.0, vec![1.0, 0.0, 0.0, 0.0, 0.0], 1.0).unwrap();
        let both = TestFunction::standard(5, 1.0).unwrap().plus(&off).unwrap();
        let p5 = params(5, 2.0, 1.0, 1.0);
        let e = highdim_law(HighDimVariant::LebesgueGaussian, &p5, &both, None, None, 1.0, 1.0, 0.0).unwrap_err();
        assert!(matches!(e, Error::Unsupported(_)));
    }
}
