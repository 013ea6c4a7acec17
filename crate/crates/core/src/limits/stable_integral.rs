//! Riemann discretization of integrals against the independently scattered
//! totally skewed `(1+β)`-stable measure on `[0, ∞) × ℝ^d`.
//!
//! Each space-time cell receives one exact stable draw with scale
//! `|cell|^{1/(1+β)}`; the path at time `t` is the sum of draws weighted by
//! the integrand at the cell center.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::{existence_check, validate_times, IntegralKind};
use crate::density::{density_radial, increment_radius_quantile, p1_at_origin, MotionParams};
use crate::error::{invalid, Error, Result};
use crate::particles::SampledProcess;
use crate::quad::{integrate_to_infinity, integrate_with_breaks, QuadOptions};
use crate::rng::{domain, replicate_stream};
use crate::special::sphere_area;
use crate::stable::{skew_tangent, standard_stable};

/// `∫_0^τ p_u(x) du` at `|x| = rho`; infinite at the origin when `d ≥ α`.
pub fn occupation_kernel(m: &MotionParams, tau: f64, rho: f64) -> f64 {
    if !(tau > 0.0) {
        return 0.0;
    }
    let d = m.d() as f64;
    let a = m.alpha();
    if a == 2.0 && m.d() == 1 {
        let st = tau.sqrt();
        let u = rho.abs() / (2.0 * st);
        if u < 8.0 {
            return (st / PI.sqrt() * (-u * u).exp() - rho.abs() * 0.5 * erfc(u)).max(0.0);
        }
        // asymptotic series of 1/√π − u·erfcx(u)
        let q = 1.0 / (2.0 * u * u);
        let (mut term, mut sum) = (q, q);
        for k in 2..30 {
            term *= -((2 * k - 1) as f64) * q;
            sum += term;
            if term.abs() < 1e-17 * sum {
                break;
            }
        }
        return st * (-u * u).exp() * sum / PI.sqrt();
    }
    if rho == 0.0 {
        let r = d / a;
        return if r < 1.0 {
            p1_at_origin(m) * tau.powf(1.0 - r) / (1.0 - r)
        } else {
            f64::INFINITY
        };
    }
    let peak = rho.powf(a);
    let breaks: Vec<f64> = (-30..=30).map(|k| peak * 2f64.powi(k)).filter(|u| *u < tau).collect();
    integrate_with_breaks(
        |u| if u > 0.0 { density_radial(m, u, rho) } else { 0.0 },
        0.0,
        tau,
        &breaks,
        QuadOptions::new(1e-300, 1e-10).with_max_intervals(8000),
    )
    .value
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StableIntegralGrid {
    pub d: usize,
    pub alpha: f64,
    pub beta: f64,
    /// Uniform time cells over `[0, max time]`.
    pub n_r: usize,
    /// Spatial box `[−A, A]^d`.
    pub half_width: f64,
    /// Cells per axis; even, so no center sits at the origin.
    pub n_x: usize,
    /// Geometric refinement of the first time cell toward `r = 0` (`ζ` only).
    pub graded_levels: usize,
    pub graded_ratio: f64,
    /// `A_r = min(A, κ r^{1/α})` for `ζ`.
    pub kappa: f64,
    /// Skewness of the cell draws.
    pub skewness: f64,
}

impl StableIntegralGrid {
    pub fn new(d: usize, alpha: f64, beta: f64, n_r: usize, half_width: f64, n_x: usize) -> Result<Self> {
        let m = MotionParams::new(d, alpha)?;
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(invalid(format!("beta {beta} outside (0, 1]")));
        }
        let g = Self {
            d,
            alpha,
            beta,
            n_r,
            half_width,
            n_x,
            graded_levels: 40,
            graded_ratio: 0.7,
            kappa: increment_radius_quantile(&m, 1.0, 1e-6),
            skewness: 1.0,
        };
        g.validate()?;
        Ok(g)
    }

    /// Grid with `A` chosen so that at most `1e−4` of the `(1+β)`-mass of the
    /// integrand at `t_max` lies outside the ball of radius `A`.
    pub fn auto(kind: IntegralKind, d: usize, alpha: f64, beta: f64, t_max: f64) -> Result<Self> {
        let (n_r, n_x) = match d {
            1 => (64, 96),
            2 => (32, 32),
            _ => (16, 12),
        };
        let mut g = Self::new(d, alpha, beta, n_r, 1.0, n_x)?;
        g.half_width = choose_half_width(kind, &g.motion(), beta, t_max, 1e-4)?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_r == 0 || self.n_x < 2 || self.n_x % 2 != 0 {
            return Err(invalid("need n_r >= 1 and an even n_x >= 2"));
        }
        if !(self.half_width > 0.0 && self.half_width.is_finite()) {
            return Err(invalid(format!("half width {} must be positive", self.half_width)));
        }
        if !(self.graded_ratio > 0.0 && self.graded_ratio < 1.0) {
            return Err(invalid("graded ratio must lie in (0, 1)"));
        }
        if !(self.kappa > 0.0) || !(self.skewness.abs() <= 1.0) {
            return Err(invalid("kappa must be positive and |skewness| <= 1"));
        }
        let cells = (self.n_r + self.graded_levels) as f64 * (self.n_x as f64).powi(self.d as i32);
        if cells > 5e7 {
            return Err(Error::ResourceLimit(format!("{cells:.2e} cells")));
        }
        Ok(())
    }

    pub fn motion(&self) -> MotionParams {
        MotionParams::new(self.d, self.alpha).expect("validated at construction")
    }

    pub fn with_skewness(mut self, skewness: f64) -> Self {
        self.skewness = skewness;
        self
    }

    pub fn refined(&self) -> Self {
        Self {
            n_r: 2 * self.n_r,
            n_x: 2 * self.n_x,
            half_width: 2.0 * self.half_width,
            ..self.clone()
        }
    }
}

/// Fraction of `∫∫ |integrand(t; r, x)|^{1+β}` carried by `|x| > A`.
pub fn outside_mass_fraction(kind: IntegralKind, m: &MotionParams, beta: f64, t: f64, a: f64) -> f64 {
    let radial = radial_mass(kind, m, beta, t);
    let scale = t.powf(1.0 / m.alpha());
    let opts = QuadOptions::new(1e-300, 1e-7);
    let outer = integrate_to_infinity(&radial, a, scale, opts).value;
    let inner = integrate_with_breaks(
        &radial,
        0.0,
        a,
        &(1..40).map(|k| a * 0.6f64.powi(k)).collect::<Vec<_>>(),
        opts,
    )
    .value;
    outer / (inner + outer)
}

/// `ρ ↦ S_d ρ^{d−1} ∫_0^t |integrand(t; r, ρ)|^{1+β} dr`.
fn radial_mass(kind: IntegralKind, m: &MotionParams, beta: f64, t: f64) -> impl Fn(f64) -> f64 + '_ {
    let d = m.d();
    let area = sphere_area(d);
    move |rho: f64| {
        if rho <= 0.0 {
            return 0.0;
        }
        let e = 1.0 + beta;
        let breaks: Vec<f64> = (1..40).map(|k| t * 0.7f64.powi(k)).collect();
        let inner = integrate_with_breaks(
            |r: f64| {
                let w = occupation_kernel(m, t - r, rho).powf(e);
                match kind {
                    IntegralKind::Xi => w,
                    IntegralKind::Zeta => {
                        if r > 0.0 {
                            density_radial(m, r, rho) * w
                        } else {
                            0.0
                        }
                    }
                }
            },
            0.0,
            t,
            &breaks,
            QuadOptions::new(1e-300, 1e-8),
        )
        .value;
        area * rho.powi(d as i32 - 1) * inner
    }
}

fn choose_half_width(kind: IntegralKind, m: &MotionParams, beta: f64, t_max: f64, tol: f64) -> Result<f64> {
    if !existence_check(kind, m.d(), m.alpha(), beta) {
        return Err(existence_error(kind, m, beta));
    }
    let mut hi = 2.0 * t_max.powf(1.0 / m.alpha());
    let mut lo = 0.0;
    let mut steps = 0;
    while outside_mass_fraction(kind, m, beta, t_max, hi) > tol {
        lo = hi;
        hi *= 2.0;
        steps += 1;
        if steps > 40 {
            return Err(Error::Numerical("spatial truncation did not converge".into()));
        }
    }
    for _ in 0..12 {
        let mid = 0.5 * (lo + hi);
        if outside_mass_fraction(kind, m, beta, t_max, mid) > tol {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

pub(crate) fn existence_error(kind: IntegralKind, m: &MotionParams, beta: f64) -> Error {
    Error::DimensionCondition(format!(
        "{kind:?} needs d < {:.6}, got d = {} (alpha = {}, beta = {beta})",
        kind.dimension_bound(m.alpha(), beta),
        m.d(),
        m.alpha()
    ))
}

/// Cell measures and integrand weights (`cells × times`, row-major).
#[derive(Debug, Clone)]
pub struct Cells {
    pub measure: Vec<f64>,
    pub weights: Vec<f64>,
    pub n_times: usize,
}

impl Cells {
    pub fn len(&self) -> usize {
        self.measure.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measure.is_empty()
    }
}

/// Time-cell boundaries: uniform within each gap between grid times, with
/// the first cell refined geometrically toward 0 for `ζ`.
fn time_cells(kind: IntegralKind, g: &StableIntegralGrid, times: &[f64]) -> Vec<(f64, f64)> {
    let t_max = *times.last().unwrap();
    let mut knots: Vec<f64> = vec![0.0];
    knots.extend(times.iter().copied().filter(|t| *t > 0.0));
    let mut cells = Vec::new();
    for w in knots.windows(2) {
        let len = w[1] - w[0];
        let n = ((g.n_r as f64 * len / t_max).round() as usize).max(1);
        let h = len / n as f64;
        for i in 0..n {
            cells.push((w[0] + i as f64 * h, if i + 1 == n { w[1] } else { w[0] + (i + 1) as f64 * h }));
        }
    }
    if kind == IntegralKind::Zeta && !cells.is_empty() {
        let (_, h) = cells.remove(0);
        let mut graded = Vec::with_capacity(g.graded_levels + 1);
        let mut hi = h;
        for _ in 0..g.graded_levels {
            let lo = hi * g.graded_ratio;
            graded.push((lo, hi));
            hi = lo;
        }
        graded.push((0.0, hi));
        graded.reverse();
        graded.extend(cells);
        cells = graded;
    }
    cells
}

/// Builds the cell table for `kind` on `times`.
pub fn build_cells(kind: IntegralKind, g: &StableIntegralGrid, times: &[f64]) -> Result<Cells> {
    validate_times(times)?;
    g.validate()?;
    let m = g.motion();
    if !existence_check(kind, g.d, g.alpha, g.beta) {
        return Err(existence_error(kind, &m, g.beta));
    }
    let d = g.d;
    let k = times.len();
    let e = 1.0 / (1.0 + g.beta);
    let per_axis = g.n_x;
    let n_space = per_axis.pow(d as u32);
    let mut measure = Vec::new();
    let mut weights = Vec::new();
    for (r0, r1) in time_cells(kind, g, times) {
        let rc = 0.5 * (r0 + r1);
        let a = match kind {
            IntegralKind::Xi => g.half_width,
            IntegralKind::Zeta => g.half_width.min(g.kappa * rc.powf(1.0 / g.alpha)),
        };
        let h = 2.0 * a / per_axis as f64;
        let vol = (r1 - r0) * h.powi(d as i32);
        if vol <= 0.0 {
            continue;
        }
        let row: Vec<(Vec<f64>, f64)> = (0..n_space)
            .into_par_iter()
            .map(|idx| {
                let mut rem = idx;
                let mut r2 = 0.0;
                for _ in 0..d {
                    let i = rem % per_axis;
                    rem /= per_axis;
                    let xc = -a + (i as f64 + 0.5) * h;
                    r2 += xc * xc;
                }
                let rho = r2.sqrt();
                let factor = match kind {
                    IntegralKind::Xi => 1.0,
                    IntegralKind::Zeta => density_radial(&m, rc, rho).powf(e),
                };
                let w: Vec<f64> = times
                    .iter()
                    .map(|&t| if rc < t { factor * occupation_kernel(&m, t - rc, rho) } else { 0.0 })
                    .collect();
                (w, vol)
            })
            .collect();
        for (w, v) in row {
            if w.iter().all(|x| *x == 0.0) {
                continue;
            }
            measure.push(v);
            weights.extend(w);
        }
    }
    Ok(Cells {
        measure,
        weights,
        n_times: k,
    })
}

/// Log-characteristic function of the discretized process at `(times, z)`:
/// exact for the Riemann sum the samplers draw.
pub fn discretized_log_cf(cells: &Cells, beta: f64, skewness: f64, z: &[f64]) -> Complex64 {
    let e = 1.0 + beta;
    let tan = skew_tangent(e);
    let k = cells.n_times;
    let mut re = 0.0;
    let mut im = 0.0;
    for (c, &v) in cells.measure.iter().enumerate() {
        let g: f64 = cells.weights[c * k..(c + 1) * k].iter().zip(z).map(|(w, z)| w * z).sum();
        let p = v * g.abs().powf(e);
        re += p;
        im += p * g.signum();
    }
    Complex64::new(-re, tan * skewness * im)
}

fn sample_cells(cells: &Cells, g: &StableIntegralGrid, times: &[f64], n: usize, seed: u64, label: &str) -> SampledProcess {
    let index = 1.0 + g.beta;
    let k = cells.n_times;
    let scales: Vec<f64> = cells.measure.iter().map(|v| v.powf(1.0 / index)).collect();
    let values: Vec<Vec<f64>> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_stream(seed, domain::STABLE_INTEGRAL, i);
            let mut out = vec![0.0; k];
            for (c, s) in scales.iter().enumerate() {
                let m = s * standard_stable(index, g.skewness, &mut rng);
                for (o, w) in out.iter_mut().zip(&cells.weights[c * k..(c + 1) * k]) {
                    *o += w * m;
                }
            }
            out
        })
        .collect();
    let mut p = SampledProcess::new(times.to_vec(), values, label);
    p.meta.diagnostics.push(("cells".into(), cells.len() as f64));
    p.meta.diagnostics.push(("half_width".into(), g.half_width));
    p
}

fn sample_kind(kind: IntegralKind, g: &StableIntegralGrid, times: &[f64], n: usize, seed: u64) -> Result<SampledProcess> {
    let cells = build_cells(kind, g, times)?;
    let label = match kind {
        IntegralKind::Xi => "xi",
        IntegralKind::Zeta => "zeta",
    };
    let mut p = sample_cells(&cells, g, times, n, seed, label);
    let t_max = *times.last().unwrap();
    if t_max > 0.0 {
        let frac = outside_mass_fraction(kind, &g.motion(), g.beta, t_max, g.half_width);
        p.meta.diagnostics.push(("outside_mass_fraction".into(), frac));
    }
    Ok(p)
}

/// Paths of `ξ_t = ∫ 1_{[0,t]}(r) ∫_r^t p_{u−r}(x) du M(dr dx)`.
pub fn sample_xi(g: &StableIntegralGrid, times: &[f64], n: usize, seed: u64) -> Result<SampledProcess> {
    sample_kind(IntegralKind::Xi, g, times, n, seed)
}

/// Paths of `ζ_t = ∫ 1_{[0,t]}(r) p_r(x)^{1/(1+β)} ∫_r^t p_{u−r}(x) du M(dr dx)`.
pub fn sample_zeta(g: &StableIntegralGrid, times: &[f64], n: usize, seed: u64) -> Result<SampledProcess> {
    sample_kind(IntegralKind::Zeta, g, times, n, seed)
}
