//! Scalar constants multiplying the limit processes in the low and critical
//! dimensions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use super::stable_integral::occupation_kernel;
use crate::density::{p1_at_origin, p1_radial, riesz_constant, MotionParams};
use crate::error::{invalid, Error, Result};
use crate::quad::{integrate_to_infinity, integrate_with_breaks, QuadOptions};
use crate::regime::{Regime, RegimeParams};
use crate::special::sphere_area;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantParams {
    pub d: usize,
    pub alpha: f64,
    pub beta: f64,
    pub branching_rate: f64,
    /// Total mass of the finite intensity measure; ignored for Lebesgue.
    pub total_mass: f64,
}

impl ConstantParams {
    fn regime_params(&self) -> RegimeParams {
        RegimeParams {
            d: self.d,
            alpha: self.alpha,
            beta: self.beta,
        }
    }
}

/// `−cos(π(1+β)/2)`, positive on `(0, 1]`.
fn neg_cos(beta: f64) -> f64 {
    -(PI * (1.0 + beta) / 2.0).cos()
}

/// `∫_{ℝ^d} f(|y|) p_1(y) dy` with `f` possibly singular at the origin.
fn radial_p1_moment<F: Fn(f64) -> f64>(m: &MotionParams, f: F) -> f64 {
    let d = m.d();
    let area = sphere_area(d);
    let g = |rho: f64| {
        if rho <= 0.0 {
            0.0
        } else {
            area * rho.powi(d as i32 - 1) * f(rho) * p1_radial(m, rho)
        }
    };
    let opts = QuadOptions::new(1e-300, 1e-9).with_max_intervals(4000);
    let near: Vec<f64> = (1..60).map(|k| 0.7f64.powi(k)).collect();
    integrate_with_breaks(g, 0.0, 1.0, &near, opts).value + integrate_to_infinity(g, 1.0, 1.0, opts).value
}

/// The constant of the limit in `regime`, as stated for the limit theorems.
/// High-dimension regimes have no scalar constant and are rejected.
pub fn limit_constant(regime: Regime, p: &ConstantParams) -> Result<f64> {
    use Regime::*;
    regime.validate(&p.regime_params())?;
    let m = MotionParams::new(p.d, p.alpha)?;
    let b = p.beta;
    let e = 1.0 + b;
    let v = p.branching_rate;
    let mu = p.total_mass;
    let d = p.d as f64;
    let r = d / p.alpha;
    if regime.is_branching() && !(v > 0.0) {
        return Err(invalid("branching regimes need a positive branching rate"));
    }
    if !regime.is_lebesgue() && !(mu > 0.0) {
        return Err(invalid("finite-measure regimes need a positive total mass"));
    }
    let k = match regime {
        BranchingLebesgueLow => (v / e * neg_cos(b)).powf(1.0 / e),
        BranchingLebesgueCritical => {
            let integral = radial_p1_moment(&m, |rho| occupation_kernel(&m, 1.0, rho).powf(b));
            (v * integral * neg_cos(b)).powf(1.0 / e)
        }
        NonbranchingLebesgueLow => (2.0 * gamma(r) / (PI * p.alpha * (2.0 - r) * (1.0 - r))).sqrt(),
        NonbranchingLebesgueCritical => (2f64.powf(d - 2.0) * PI.powf(d / 2.0) * d * gamma(d / 2.0)).powf(-0.5),
        BranchingFiniteLow => (v / e * mu * neg_cos(b)).powf(1.0 / e),
        BranchingFiniteCritical => {
            let s = (d - p.alpha) * e;
            let integral = radial_p1_moment(&m, |rho| rho.powf(-s));
            riesz_constant(&m)? * (v / e * mu * integral * neg_cos(b)).powf(1.0 / e)
        }
        NonbranchingFiniteLow => (2.0 * mu / (1.0 - r)).sqrt() * p1_at_origin(&m),
        NonbranchingFiniteCritical => (2.0 * mu).sqrt() * p1_at_origin(&m),
        BranchingLebesgueHigh | NonbranchingLebesgueHigh | BranchingFiniteHigh | NonbranchingFiniteHigh => {
            return Err(Error::Unsupported(format!(
                "{regime:?} has a distribution-valued limit without a scalar constant"
            )))
        }
    };
    Ok(k)
}

/// The constant that reproduces the second moments of the particle model
/// itself. It differs from [`limit_constant`] only for the nonbranching
/// finite-measure low-dimension limit, where the model's variance is half
/// the stated one.
pub fn normalized_limit_constant(regime: Regime, p: &ConstantParams) -> Result<f64> {
    let k = limit_constant(regime, p)?;
    Ok(match regime {
        Regime::NonbranchingFiniteLow => k / 2f64.sqrt(),
        _ => k,
    })
}
