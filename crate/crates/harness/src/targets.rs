//! Limit laws the simulated fluctuations are compared with.

use num_complex::Complex64;

use occfluct_core::density::{FiniteMeasureSpec, MotionParams};
use occfluct_core::limits::{
    cf_xi_fdd, cf_zeta_fdd, highdim_law, limit_constant, normalized_limit_constant, xi_covariance_kernel,
    ConstantParams, CovarianceKernel, HighDimParams, HighDimValue, HighDimVariant,
};
use occfluct_core::regime::Regime;
use occfluct_core::stable::{stable_cf, StableLawParams};

use crate::error::Result;
use crate::spec::{ExperimentSpec, TargetNormalization};

/// Second-order or characteristic-function description of a limit.
pub enum TargetLaw {
    /// Covariance of `⟨X(s), φ⟩` and `⟨X(t), φ⟩`.
    Gaussian(Box<dyn Fn(f64, f64) -> Result<f64> + Send + Sync>),
    /// CF of `⟨X(t), φ⟩` at the last grid time.
    Stable(Box<dyn Fn(f64) -> Result<Complex64> + Send + Sync>),
}

/// `−log E e^{i⟨z, ζ⟩}` is quadratic at β = 1; polarization recovers the
/// covariance.
pub fn zeta_covariance(d: usize, alpha: f64, s: f64, t: f64) -> Result<f64> {
    let q = |times: &[f64], z: &[f64]| -> Result<f64> { Ok(-cf_zeta_fdd(d, alpha, 1.0, times, z)?.ln().re) };
    if s == 0.0 || t == 0.0 {
        return Ok(0.0);
    }
    if (s - t).abs() <= 1e-14 * s.max(t) {
        return Ok(2.0 * q(&[s], &[1.0])?);
    }
    let (a, b) = if s < t { (s, t) } else { (t, s) };
    Ok(q(&[a, b], &[1.0, 1.0])? - q(&[a], &[1.0])? - q(&[b], &[1.0])?)
}

fn unit_stable(beta: f64) -> Result<StableLawParams> {
    Ok(StableLawParams::totally_skewed(1.0 + beta, 1.0)?)
}

fn constant(spec: &ExperimentSpec, regime: Regime) -> Result<f64> {
    let m = &spec.model;
    let p = ConstantParams {
        d: m.d,
        alpha: m.alpha,
        beta: m.beta,
        branching_rate: m.branching_rate,
        total_mass: m.mu.as_ref().map_or(0.0, FiniteMeasureSpec::total_mass),
    };
    Ok(match spec.target {
        TargetNormalization::Stated => limit_constant(regime, &p)?,
        TargetNormalization::Normalized => normalized_limit_constant(regime, &p)?,
    })
}

fn highdim_params(spec: &ExperimentSpec) -> Result<HighDimParams> {
    let m = &spec.model;
    Ok(HighDimParams {
        motion: MotionParams::new(m.d, m.alpha)?,
        beta: m.beta,
        branching_rate: m.branching_rate,
    })
}

/// Limit law of the experiment's regime, scaled by the test function.
pub fn target_law(spec: &ExperimentSpec, regime: Regime) -> Result<TargetLaw> {
    use Regime::*;
    let m = spec.model.clone();
    let (d, alpha, beta) = (m.d, m.alpha, m.beta);
    let f = spec.test_function()?;
    let mass = f.integral();
    let t_last = *spec.time_grid.last().unwrap_or(&1.0);
    let gaussian = beta == 1.0 || !regime.is_branching();
    let law = match regime {
        BranchingLebesgueLow if gaussian => {
            let k = constant(spec, regime)?;
            let kernel = match spec.target {
                TargetNormalization::Stated => CovarianceKernel::sub_fbm_family(d, alpha)?,
                TargetNormalization::Normalized => xi_covariance_kernel(d, alpha)?,
            };
            TargetLaw::Gaussian(Box::new(move |s, t| Ok(k * k * mass * mass * kernel.eval(s, t))))
        }
        BranchingLebesgueLow => {
            let c = constant(spec, regime)? * mass;
            TargetLaw::Stable(Box::new(move |z| Ok(cf_xi_fdd(d, alpha, beta, &[t_last], &[c * z])?)))
        }
        BranchingLebesgueCritical if gaussian => {
            let k = constant(spec, regime)?;
            TargetLaw::Gaussian(Box::new(move |s, t| Ok(2.0 * k * k * mass * mass * s.min(t))))
        }
        BranchingLebesgueCritical => {
            let c = constant(spec, regime)? * mass;
            let p = unit_stable(beta)?;
            TargetLaw::Stable(Box::new(move |z| Ok(stable_cf(&p, t_last, c * z))))
        }
        BranchingLebesgueHigh if gaussian => {
            let p = highdim_params(spec)?;
            let f = f.clone();
            TargetLaw::Gaussian(Box::new(move |s, t| {
                covariance(highdim_law(HighDimVariant::LebesgueGaussian, &p, &f, None, None, s, t, 0.0)?)
            }))
        }
        BranchingLebesgueHigh => {
            let p = highdim_params(spec)?;
            let f = f.clone();
            TargetLaw::Stable(Box::new(move |z| {
                cf(highdim_law(HighDimVariant::LebesgueStable, &p, &f, None, None, 0.0, t_last, z)?)
            }))
        }
        NonbranchingLebesgueLow => {
            let k = constant(spec, regime)?;
            let kernel = CovarianceKernel::fbm_for(d, alpha)?;
            TargetLaw::Gaussian(Box::new(move |s, t| Ok(k * k * mass * mass * kernel.eval(s, t))))
        }
        NonbranchingLebesgueCritical => {
            let k = constant(spec, regime)?;
            TargetLaw::Gaussian(Box::new(move |s, t| Ok(k * k * mass * mass * s.min(t))))
        }
        NonbranchingLebesgueHigh => {
            let p = highdim_params(spec)?;
            let f = f.clone();
            TargetLaw::Gaussian(Box::new(move |s, t| {
                covariance(highdim_law(HighDimVariant::LebesgueNonbranching, &p, &f, None, None, s, t, 0.0)?)
            }))
        }
        BranchingFiniteLow if gaussian => {
            let k = constant(spec, regime)?;
            TargetLaw::Gaussian(Box::new(move |s, t| Ok(k * k * mass * mass * zeta_covariance(d, alpha, s, t)?)))
        }
        BranchingFiniteLow => {
            let c = constant(spec, regime)? * mass;
            TargetLaw::Stable(Box::new(move |z| Ok(cf_zeta_fdd(d, alpha, beta, &[t_last], &[c * z])?)))
        }
        BranchingFiniteCritical if gaussian => {
            let k = constant(spec, regime)?;
            TargetLaw::Gaussian(Box::new(move |s, t| {
                Ok(if s > 0.0 && t > 0.0 { 2.0 * k * k * mass * mass } else { 0.0 })
            }))
        }
        BranchingFiniteCritical => {
            let c = constant(spec, regime)? * mass;
            let p = unit_stable(beta)?;
            TargetLaw::Stable(Box::new(move |z| Ok(stable_cf(&p, 1.0, c * z))))
        }
        BranchingFiniteHigh if gaussian => {
            let p = highdim_params(spec)?;
            let mu = m.mu.clone();
            let f = f.clone();
            TargetLaw::Gaussian(Box::new(move |s, t| {
                if s == 0.0 || t == 0.0 {
                    return Ok(0.0);
                }
                covariance(highdim_law(HighDimVariant::FiniteGaussian, &p, &f, None, mu.as_ref(), s, t, 0.0)?)
            }))
        }
        BranchingFiniteHigh => {
            let p = highdim_params(spec)?;
            let mu = m.mu.clone();
            let f = f.clone();
            TargetLaw::Stable(Box::new(move |z| {
                cf(highdim_law(HighDimVariant::FiniteStable, &p, &f, None, mu.as_ref(), 0.0, 0.0, z)?)
            }))
        }
        NonbranchingFiniteLow => {
            let k = constant(spec, regime)?;
            let kernel = CovarianceKernel::weighted_fbm(d, alpha)?;
            TargetLaw::Gaussian(Box::new(move |s, t| Ok(k * k * mass * mass * kernel.eval(s, t))))
        }
        NonbranchingFiniteCritical => {
            let k = constant(spec, regime)?;
            TargetLaw::Gaussian(Box::new(move |s, t| {
                Ok(if s > 0.0 && t > 0.0 { k * k * mass * mass } else { 0.0 })
            }))
        }
        NonbranchingFiniteHigh => {
            let p = highdim_params(spec)?;
            let mu = m.mu.clone();
            let f = f.clone();
            TargetLaw::Gaussian(Box::new(move |s, t| {
                if s == 0.0 || t == 0.0 {
                    return Ok(0.0);
                }
                covariance(highdim_law(HighDimVariant::FiniteNonbranching, &p, &f, None, mu.as_ref(), s, t, 0.0)?)
            }))
        }
    };
    Ok(law)
}

fn covariance(v: HighDimValue) -> Result<f64> {
    match v {
        HighDimValue::Covariance(c) => Ok(c),
        HighDimValue::Cf(_) => unreachable!("Gaussian variants return covariances"),
    }
}

fn cf(v: HighDimValue) -> Result<Complex64> {
    match v {
        HighDimValue::Cf(c) => Ok(c),
        HighDimValue::Covariance(_) => unreachable!("stable variants return CF values"),
    }
}
