//! Transition densities of the standard symmetric α-stable process in `ℝ^d`
//! (Fourier symbol `e^{−t|z|^α}`), its semigroup on Gaussian-bump test
//! functions, and the Riesz potential `G = ∫_0^∞ T_t dt`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use dashmap::DashMap;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{invalid, Error, Result};
use crate::quad::{integrate, integrate_to_infinity, integrate_with_breaks, QuadOptions};
use crate::special::{radial_kernel, scaled_spherical_mean_exp, sphere_area};
use crate::stable::positive_stable;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionParams {
    d: usize,
    alpha: f64,
}

impl MotionParams {
    pub fn new(d: usize, alpha: f64) -> Result<Self> {
        if d == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(invalid(format!("alpha {alpha} outside (0, 2]")));
        }
        Ok(Self { d, alpha })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `d / α`.
    pub fn ratio(&self) -> f64 {
        self.d as f64 / self.alpha
    }
}

/// `amplitude · N(x; center, width·I)`, `width` being the per-axis variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub amplitude: f64,
    pub center: Vec<f64>,
    pub width: f64,
}

impl Bump {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let r2 = dist2(x, &self.center);
        self.amplitude * gaussian_radial(self.center.len(), self.width, r2)
    }
}

/// Finite mixture of isotropic Gaussian bumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    bumps: Vec<Bump>,
}

impl TestFunction {
    pub fn bump(amplitude: f64, center: Vec<f64>, width: f64) -> Result<Self> {
        Self::mixture(vec![Bump {
            amplitude,
            center,
            width,
        }])
    }

    /// Unit-mass bump at the origin of `ℝ^d`.
    pub fn standard(d: usize, width: f64) -> Result<Self> {
        Self::bump(1.0, vec![0.0; d], width)
    }

    pub fn mixture(bumps: Vec<Bump>) -> Result<Self> {
        let d = bumps.first().map(|b| b.center.len()).unwrap_or(1);
        for b in &bumps {
            if b.center.len() != d || d == 0 {
                return Err(invalid("bump centers must share a positive dimension"));
            }
            if !(b.width > 0.0) || !b.width.is_finite() {
                return Err(invalid(format!("bump width {} must be positive", b.width)));
            }
            if !b.amplitude.is_finite() || b.center.iter().any(|c| !c.is_finite()) {
                return Err(invalid("bump parameters must be finite"));
            }
        }
        Ok(Self { bumps })
    }

    pub fn zero() -> Self {
        Self { bumps: Vec::new() }
    }

    pub fn bumps(&self) -> &[Bump] {
        &self.bumps
    }

    pub fn dim(&self) -> Option<usize> {
        self.bumps.first().map(|b| b.center.len())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.bumps.iter().map(|b| b.eval(x)).sum()
    }

    /// `∫ f(x) dx`.
    pub fn integral(&self) -> f64 {
        self.bumps.iter().map(|b| b.amplitude).sum()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.bumps.iter().all(|b| b.amplitude >= 0.0)
    }

    /// Sum of two test functions (concatenated mixtures).
    pub fn plus(&self, other: &TestFunction) -> Result<Self> {
        let mut bumps = self.bumps.clone();
        bumps.extend(other.bumps.iter().cloned());
        Self::mixture(bumps)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            bumps: self
                .bumps
                .iter()
                .map(|b| Bump {
                    amplitude: c * b.amplitude,
                    ..b.clone()
                })
                .collect(),
        }
    }

    /// Radius around the origin outside which each bump has at most
    /// `mass_tol` of its mass.
    pub fn effective_radius(&self, mass_tol: f64) -> f64 {
        self.bumps
            .iter()
            .map(|b| {
                let d = b.center.len() as f64;
                let q = chi_square_upper_quantile(d, mass_tol);
                norm(&b.center) + (b.width * q).sqrt()
            })
            .fold(0.0, f64::max)
    }
}

fn chi_square_upper_quantile(dof: f64, tail: f64) -> f64 {
    use statrs::distribution::{ChiSquared as Chi2, ContinuousCDF};
    Chi2::new(dof)
        .map(|c| c.inverse_cdf(1.0 - tail))
        .unwrap_or(f64::INFINITY)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureComponent {
    PointMass {
        weight: f64,
        at: Vec<f64>,
    },
    Gaussian {
        weight: f64,
        center: Vec<f64>,
        width: f64,
    },
}

impl MeasureComponent {
    pub fn weight(&self) -> f64 {
        match self {
            Self::PointMass { weight, .. } | Self::Gaussian { weight, .. } => *weight,
        }
    }

    fn location(&self) -> &[f64] {
        match self {
            Self::PointMass { at, .. } => at,
            Self::Gaussian { center, .. } => center,
        }
    }
}

/// Finite measure built from point masses and isotropic Gaussians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteMeasureSpec {
    components: Vec<MeasureComponent>,
}

impl FiniteMeasureSpec {
    pub fn new(components: Vec<MeasureComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(invalid("measure needs at least one component"));
        }
        let d = components[0].location().len();
        for c in &components {
            if c.location().len() != d || d == 0 {
                return Err(invalid("measure components must share a positive dimension"));
            }
            if !(c.weight() >= 0.0) || !c.weight().is_finite() {
                return Err(invalid(format!("weight {} must be >= 0", c.weight())));
            }
            if let MeasureComponent::Gaussian { width, .. } = c {
                if !(*width > 0.0) {
                    return Err(invalid("Gaussian component width must be positive"));
                }
            }
        }
        let total: f64 = components.iter().map(|c| c.weight()).sum();
        if !(total > 0.0) {
            return Err(invalid("total mass must be positive"));
        }
        Ok(Self { components })
    }

    pub fn point_mass(weight: f64, at: Vec<f64>) -> Result<Self> {
        Self::new(vec![MeasureComponent::PointMass { weight, at }])
    }

    pub fn components(&self) -> &[MeasureComponent] {
        &self.components
    }

    pub fn dim(&self) -> usize {
        self.components[0].location().len()
    }

    pub fn total_mass(&self) -> f64 {
        self.components.iter().map(|c| c.weight()).sum()
    }

    /// One point from the normalized measure.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let total = self.total_mass();
        let mut u = rng.random::<f64>() * total;
        let mut chosen = &self.components[self.components.len() - 1];
        for c in &self.components {
            if u < c.weight() {
                chosen = c;
                break;
            }
            u -= c.weight();
        }
        match chosen {
            MeasureComponent::PointMass { at, .. } => at.clone(),
            MeasureComponent::Gaussian { center, width, .. } => center
                .iter()
                .map(|c| {
                    let z: f64 = StandardNormal.sample(rng);
                    c + width.sqrt() * z
                })
                .collect(),
        }
    }

    /// Radius around the origin holding all but `mass_tol` of each component.
    pub fn effective_radius(&self, mass_tol: f64) -> f64 {
        self.components
            .iter()
            .map(|c| match c {
                MeasureComponent::PointMass { at, .. } => norm(at),
                MeasureComponent::Gaussian { center, width, .. } => {
                    let q = chi_square_upper_quantile(center.len() as f64, mass_tol);
                    norm(center) + (width * q).sqrt()
                }
            })
            .fold(0.0, f64::max)
    }
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Isotropic Gaussian density with per-axis variance `w` at squared radius `r2`.
pub fn gaussian_radial(d: usize, w: f64, r2: f64) -> f64 {
    (2.0 * PI * w).powf(-(d as f64) / 2.0) * (-r2 / (2.0 * w)).exp()
}

/// `(2π)^{−d} S_{d−1} ∫_0^{k_max} ψ(k) k^{d−1} Λ_d(k r) dk`: the value at
/// radius `r` of the isotropic function with radial Fourier transform `ψ`.
pub fn radial_fourier_inverse<F: Fn(f64) -> f64>(
    d: usize,
    symbol: F,
    r: f64,
    k_max: f64,
    opts: QuadOptions,
) -> f64 {
    let df = d as f64;
    let pref = (2.0 * PI).powf(-df) * sphere_area(d);
    let integrand = |k: f64| symbol(k) * k.powi(d as i32 - 1) * radial_kernel(d, k * r);
    let breaks: Vec<f64> = if r > 0.0 {
        let step = PI / r;
        let n = ((k_max / step) as usize).min(4000);
        let stride = (n / 1000).max(1);
        (1..=n).step_by(stride).map(|j| j as f64 * step).collect()
    } else {
        Vec::new()
    };
    let opts = opts.with_max_intervals(opts.max_intervals.max(2 * breaks.len() + 200));
    pref * integrate_with_breaks(integrand, 0.0, k_max, &breaks, opts).value
}

/// `p_1(0) = (2π)^{−d} S_{d−1} Γ(d/α) / α`.
pub fn p1_at_origin(m: &MotionParams) -> f64 {
    let d = m.d as f64;
    (2.0 * PI).powf(-d) * sphere_area(m.d) * gamma(d / m.alpha) / m.alpha
}

fn density_opts() -> QuadOptions {
    QuadOptions::new(1e-14, 1e-11).with_max_intervals(6000)
}

/// `p_1` at radius `rho` by direct Fourier quadrature, bypassing closed
/// forms, series and cache.
pub fn p1_by_quadrature(m: &MotionParams, rho: f64) -> f64 {
    let a = m.alpha;
    let k_max = 40f64.powf(1.0 / a);
    radial_fourier_inverse(m.d, |k| (-k.powf(a)).exp(), rho, k_max, density_opts())
}

/// Large-radius expansion
/// `π^{−d/2−1} Σ_n (−1)^{n+1}/n! 2^{nα} Γ((nα+d)/2) Γ(nα/2+1) sin(πnα/2) r^{−nα−d}`,
/// convergent for α < 1 and asymptotic otherwise. `None` when the terms do
/// not become small enough.
fn p1_tail_series(m: &MotionParams, r: f64) -> Option<f64> {
    let a = m.alpha;
    let d = m.d as f64;
    let lr = r.ln();
    let mut sum = 0.0;
    let mut last = f64::INFINITY;
    for n in 1..400 {
        let nf = n as f64;
        let s = (PI * nf * a / 2.0).sin();
        let lmag = nf * a * 2f64.ln() + ln_gamma((nf * a + d) / 2.0) + ln_gamma(nf * a / 2.0 + 1.0)
            - ln_gamma(nf + 1.0)
            - (nf * a + d) * lr;
        let mag = lmag.exp();
        if mag > last && a >= 1.0 {
            return None;
        }
        let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
        sum += sign * s * mag;
        if mag < 1e-16 * sum.abs() {
            let v = PI.powf(-d / 2.0 - 1.0) * sum;
            return (v > 0.0).then_some(v);
        }
        last = mag;
    }
    None
}

type CacheKey = (usize, u64, i64);

fn cache() -> &'static DashMap<CacheKey, f64> {
    static CACHE: OnceLock<DashMap<CacheKey, f64>> = OnceLock::new();
    CACHE.get_or_init(DashMap::new)
}

const CACHE_LIMIT: usize = 2_000_000;

/// `p_1` at radius `rho`. Closed forms at α ∈ {1, 2}; otherwise memoized on
/// `rho` rounded to `1e−10` and computed at the rounded radius, so results
/// do not depend on evaluation order.
pub fn p1_radial(m: &MotionParams, rho: f64) -> f64 {
    let d = m.d as f64;
    let a = m.alpha;
    if a == 2.0 {
        return (4.0 * PI).powf(-d / 2.0) * (-rho * rho / 4.0).exp();
    }
    if a == 1.0 {
        let h = (d + 1.0) / 2.0;
        return gamma(h) / PI.powf(h) / (1.0 + rho * rho).powf(h);
    }
    if rho == 0.0 {
        return p1_at_origin(m);
    }
    if rho > 1e8 {
        return p1_tail_series(m, rho).unwrap_or(0.0);
    }
    let key_r = (rho * 1e10).round() as i64;
    let key = (m.d, a.to_bits(), key_r);
    if let Some(v) = cache().get(&key) {
        return *v;
    }
    let r = key_r as f64 * 1e-10;
    let series_from = if a < 1.0 { 3.0 } else { 8.0 };
    let v = if r >= series_from {
        p1_tail_series(m, r).unwrap_or_else(|| p1_by_quadrature(m, r))
    } else {
        p1_by_quadrature(m, r)
    }
    .max(0.0);
    let c = cache();
    if c.len() > CACHE_LIMIT {
        c.clear();
    }
    c.insert(key, v);
    v
}

/// `p_t(r) = t^{−d/α} p_1(r t^{−1/α})`, no argument checks.
pub fn density_radial(m: &MotionParams, t: f64, r: f64) -> f64 {
    let a = m.alpha;
    if a == 2.0 {
        let d = m.d as f64;
        return (4.0 * PI * t).powf(-d / 2.0) * (-r * r / (4.0 * t)).exp();
    }
    if a == 1.0 {
        let h = (m.d as f64 + 1.0) / 2.0;
        return gamma(h) / PI.powf(h) * t / (t * t + r * r).powf(h);
    }
    let s = t.powf(-1.0 / a);
    s.powi(m.d as i32) * p1_radial(m, r * s)
}

pub fn transition_density(m: &MotionParams, t: f64, x: &[f64]) -> Result<f64> {
    if !(t > 0.0) {
        return Err(invalid(format!("time {t} must be positive")));
    }
    check_dim(m, x)?;
    Ok(density_radial(m, t, norm(x)))
}

fn check_dim(m: &MotionParams, x: &[f64]) -> Result<()> {
    if x.len() != m.d {
        return Err(invalid(format!("point has dimension {}, expected {}", x.len(), m.d)));
    }
    Ok(())
}

/// Exact increment over duration `t`, written into `out` (length `d`).
pub fn sample_increment_into<R: Rng + ?Sized>(m: &MotionParams, t: f64, rng: &mut R, out: &mut [f64]) {
    let a = m.alpha;
    let scale = if a == 2.0 {
        (2.0 * t).sqrt()
    } else {
        let sub = positive_stable(a / 2.0, rng);
        (2.0 * sub).sqrt() * t.powf(1.0 / a)
    };
    for o in out.iter_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *o = scale * z;
    }
}

pub fn sample_increment<R: Rng + ?Sized>(m: &MotionParams, t: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(t > 0.0) {
        return Err(invalid(format!("time {t} must be positive")));
    }
    let mut out = vec![0.0; m.d];
    sample_increment_into(m, t, rng, &mut out);
    Ok(out)
}

/// `T_t` applied to a unit-mass Gaussian of per-axis variance `w` centered at
/// the origin, evaluated at radius `rho`.
pub fn bump_semigroup_radial(m: &MotionParams, t: f64, w: f64, rho: f64) -> f64 {
    let d = m.d;
    if t == 0.0 {
        return gaussian_radial(d, w, rho * rho);
    }
    let a = m.alpha;
    if a == 2.0 {
        return gaussian_radial(d, w + 2.0 * t, rho * rho);
    }
    let k_max = (80.0 / w).sqrt().min((40.0 / t).powf(1.0 / a));
    radial_fourier_inverse(
        d,
        |k| (-t * k.powf(a) - 0.5 * w * k * k).exp(),
        rho,
        k_max,
        density_opts(),
    )
}

/// `(T_t f)(x)`.
pub fn apply_semigroup(m: &MotionParams, t: f64, f: &TestFunction, x: &[f64]) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(invalid(format!("time {t} must be nonnegative")));
    }
    check_dim(m, x)?;
    if t == 0.0 {
        return Ok(f.eval(x));
    }
    Ok(f
        .bumps
        .iter()
        .map(|b| b.amplitude * bump_semigroup_radial(m, t, b.width, dist2(x, &b.center).sqrt()))
        .sum())
}

/// `∫ (T_s f) dμ`.
pub fn expected_test_value(
    spec: &FiniteMeasureSpec,
    m: &MotionParams,
    s: f64,
    f: &TestFunction,
) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(invalid(format!("time {s} must be nonnegative")));
    }
    if spec.dim() != m.d {
        return Err(invalid("measure dimension does not match the motion"));
    }
    let mut total = 0.0;
    for c in &spec.components {
        for b in &f.bumps {
            total += match c {
                MeasureComponent::PointMass { weight, at } => {
                    weight * b.amplitude * bump_semigroup_radial(m, s, b.width, dist2(at, &b.center).sqrt())
                }
                MeasureComponent::Gaussian {
                    weight,
                    center,
                    width,
                } => {
                    weight
                        * b.amplitude
                        * bump_semigroup_radial(m, s, b.width + width, dist2(center, &b.center).sqrt())
                }
            };
        }
    }
    Ok(total)
}

fn require_transient(m: &MotionParams) -> Result<()> {
    if (m.d as f64) <= m.alpha {
        return Err(Error::DimensionCondition(format!(
            "potential needs d > alpha, got d = {}, alpha = {}",
            m.d, m.alpha
        )));
    }
    Ok(())
}

/// `C_{α,d} = Γ((d−α)/2) / (2^α π^{d/2} Γ(α/2))`.
pub fn riesz_constant(m: &MotionParams) -> Result<f64> {
    require_transient(m)?;
    let d = m.d as f64;
    let a = m.alpha;
    Ok(gamma((d - a) / 2.0) / (2f64.powf(a) * PI.powf(d / 2.0) * gamma(a / 2.0)))
}

/// `C_{α,d} ∫ N(y; 0, w I) |x − y|^{α−d} dy` at `|x| = rho`, by radial
/// quadrature in `u = s^α` with `s = |x − y|`.
pub fn riesz_bump_radial(m: &MotionParams, w: f64, rho: f64) -> Result<f64> {
    let c = riesz_constant(m)?;
    let d = m.d;
    let a = m.alpha;
    let sw = w.sqrt();
    let g = |s: f64| {
        let kappa = rho * s / w;
        gaussian_radial(d, w, (rho - s) * (rho - s)) * scaled_spherical_mean_exp(d, kappa)
    };
    let upper = rho + 40.0 * sw;
    let breaks: Vec<f64> = (-8..=8)
        .map(|j| rho + j as f64 * sw)
        .filter(|s| *s > 0.0)
        .map(|s| s.powf(a))
        .collect();
    let r = integrate_with_breaks(
        |u: f64| g(u.powf(1.0 / a)) / a,
        0.0,
        upper.powf(a),
        &breaks,
        QuadOptions::new(1e-15, 1e-12),
    );
    Ok(c * sphere_area(d) * r.value)
}

/// `(G f)(x) = C_{α,d} ∫ f(y) |x − y|^{α−d} dy`.
pub fn riesz_potential(m: &MotionParams, f: &TestFunction, x: &[f64]) -> Result<f64> {
    require_transient(m)?;
    check_dim(m, x)?;
    let mut total = 0.0;
    for b in &f.bumps {
        total += b.amplitude * riesz_bump_radial(m, b.width, dist2(x, &b.center).sqrt())?;
    }
    Ok(total)
}

/// `∫_0^∞ (T_t f)(x) dt`, by quadrature up to a horizon plus the two leading
/// terms of the large-time expansion beyond it.
pub fn riesz_potential_time_integral(m: &MotionParams, f: &TestFunction, x: &[f64]) -> Result<f64> {
    require_transient(m)?;
    check_dim(m, x)?;
    let d = m.d as f64;
    let a = m.alpha;
    let c2 = (2.0 * PI).powf(-d) * sphere_area(m.d) * gamma((d + 2.0) / a) / a;
    let p0 = p1_at_origin(m);
    let mut total = 0.0;
    for b in &f.bumps {
        let rho = dist2(x, &b.center).sqrt();
        let w = b.width;
        let spread = w + rho * rho / d;
        let tmax = 1e4 * spread.powf(a / 2.0);
        let t0 = 1e-12 * spread.powf(a / 2.0);
        let body = integrate(
            |u: f64| {
                let t = u.exp();
                t * bump_semigroup_radial(m, t, w, rho)
            },
            t0.ln(),
            tmax.ln(),
            QuadOptions::new(1e-15, 1e-12),
        )
        .value;
        let head = t0 * gaussian_radial(m.d, w, rho * rho);
        let tail = p0 * tmax.powf(1.0 - d / a) / (d / a - 1.0)
            - 0.5 * spread * c2 * tmax.powf(1.0 - (d + 2.0) / a) / ((d + 2.0) / a - 1.0);
        total += b.amplitude * (head + body + tail);
    }
    Ok(total)
}

/// `∫_{ℝ^d} f(|y|) g(|x − y|) dy` at `|x| = r` for radial `f`, `g`.
pub fn radial_convolution<F, G>(d: usize, f: F, g: G, r: f64, scale: f64) -> f64
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let opts = QuadOptions::new(1e-14, 1e-11);
    if d == 1 {
        let left = integrate_to_infinity(|y| f(y) * g(r + y), 0.0, scale, opts).value;
        let right = integrate_to_infinity(|y| f(y) * g((r - y).abs()), 0.0, scale, opts).value;
        return left + right;
    }
    let pw = d as i32 - 2;
    let ring = sphere_area(d - 1);
    integrate_to_infinity(
        |rho| {
            if r == 0.0 {
                let sph: f64 = integrate(|th: f64| th.sin().powi(pw), 0.0, PI, opts).value;
                return ring * rho.powi(d as i32 - 1) * f(rho) * g(rho) * sph;
            }
            let ang = integrate(
                |th: f64| {
                    let dd = (r * r + rho * rho - 2.0 * r * rho * th.cos()).max(0.0).sqrt();
                    g(dd) * th.sin().powi(pw)
                },
                0.0,
                PI,
                opts,
            )
            .value;
            ring * rho.powi(d as i32 - 1) * f(rho) * ang
        },
        0.0,
        scale,
        opts,
    )
    .value
}

/// Radius `q` with `P(|X_t| > q) ≈ tail` for one increment over `t`: the
/// chi-square body for α = 2, the power tail `A S_{d−1} q^{−α} / α` otherwise.
pub fn increment_radius_quantile(m: &MotionParams, t: f64, tail: f64) -> f64 {
    let d = m.d as f64;
    let chi = chi_square_upper_quantile(d, tail / 2.0);
    if m.alpha == 2.0 {
        return (2.0 * t * chi).sqrt();
    }
    let a = m.alpha;
    let tail_const = (a * 2f64.powf(a - 1.0) * gamma((a + d) / 2.0) / (PI.powf(d / 2.0) * gamma(1.0 - a / 2.0)))
        * sphere_area(m.d)
        / a;
    let q_heavy = (tail_const / tail).powf(1.0 / a);
    let q_body = (2.0 * chi).sqrt();
    q_heavy.max(q_body) * t.powf(1.0 / a)
}
