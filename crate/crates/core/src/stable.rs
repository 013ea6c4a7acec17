//! One-dimensional stable laws and the critical heavy-tailed offspring law.
//!
//! Stable laws use the characteristic function
//!
//! ```text
//! E exp(izX) = exp{ -t σ^a |z|^a (1 - i b sgn(z) tan(πa/2)) + i μ z }
//! ```
//!
//! with index `a ∈ (1, 2]`, skewness `b ∈ [-1, 1]`, scale `σ` and shift `μ`.
//! `b = 1` is the law totally skewed to the right; at `a = 2` the law is
//! Gaussian with variance `2σ²`.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableLawParams {
    index: f64,
    skewness: f64,
    scale: f64,
    shift: f64,
}

impl StableLawParams {
    pub fn new(index: f64, skewness: f64, scale: f64, shift: f64) -> Result<Self> {
        if !(index > 1.0 && index <= 2.0) {
            return Err(invalid(format!("stable index {index} outside (1, 2]")));
        }
        if !(skewness.abs() <= 1.0) {
            return Err(invalid(format!("skewness {skewness} outside [-1, 1]")));
        }
        if !(scale >= 0.0) || !scale.is_finite() {
            return Err(invalid(format!("scale {scale} must be finite and >= 0")));
        }
        if !shift.is_finite() {
            return Err(invalid(format!("shift {shift} must be finite")));
        }
        Ok(Self {
            index,
            skewness,
            scale,
            shift,
        })
    }

    /// Totally right-skewed law with zero shift, the law of the stable
    /// random measure on a set of Lebesgue measure `scale^index`.
    pub fn totally_skewed(index: f64, scale: f64) -> Result<Self> {
        Self::new(index, 1.0, scale, 0.0)
    }

    pub fn index(&self) -> f64 {
        self.index
    }
    pub fn skewness(&self) -> f64 {
        self.skewness
    }
    pub fn scale(&self) -> f64 {
        self.scale
    }
    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn with_scale(self, scale: f64) -> Result<Self> {
        Self::new(self.index, self.skewness, scale, self.shift)
    }
}

/// `tan(π a / 2)`, exactly zero at the Gaussian boundary `a = 2`.
pub fn skew_tangent(index: f64) -> f64 {
    if index == 2.0 {
        0.0
    } else {
        (FRAC_PI_2 * index).tan()
    }
}

/// Characteristic function of the stable law at `z`, with the scale
/// parameter raised to the `time_scale` (Lévy-process time) as in
/// `exp{-t σ^a |z|^a (...)}`.
pub fn stable_cf(params: &StableLawParams, time_scale: f64, z: f64) -> Complex64 {
    log_stable_cf(params, time_scale, z).exp()
}

pub fn log_stable_cf(params: &StableLawParams, time_scale: f64, z: f64) -> Complex64 {
    if z == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let a = params.index;
    let mag = time_scale * params.scale.powf(a) * z.abs().powf(a);
    let skew = params.skewness * z.signum() * skew_tangent(a);
    Complex64::new(-mag, mag * skew + params.shift * z)
}

/// One draw by the Chambers–Mallows–Stuck transform of a uniform angle and
/// a unit exponential. The Gaussian boundary uses a direct normal draw.
pub fn sample_stable<R: Rng + ?Sized>(params: &StableLawParams, rng: &mut R) -> f64 {
    if params.scale == 0.0 {
        return params.shift;
    }
    params.shift + params.scale * standard_stable(params.index, params.skewness, rng)
}

/// Unit-scale, zero-shift draw (`σ = 1`, `μ = 0`).
pub fn standard_stable<R: Rng + ?Sized>(index: f64, skewness: f64, rng: &mut R) -> f64 {
    if index == 2.0 {
        let n: f64 = StandardNormal.sample(rng);
        return std::f64::consts::SQRT_2 * n;
    }
    let a = index;
    let tan_term = skewness * skew_tangent(a);
    let b = tan_term.atan() / a;
    let s = (1.0 + tan_term * tan_term).powf(1.0 / (2.0 * a));
    let v = PI * (rng.random::<f64>() - 0.5);
    let w: f64 = Exp1.sample(rng);
    let av = a * (v + b);
    s * av.sin() / v.cos().powf(1.0 / a) * ((v - av).cos() / w).powf((1.0 - a) / a)
}

/// Positive `a`-stable variable with Laplace transform `exp(-λ^a)`,
/// `0 < a < 1` (Kanter's representation).
pub fn positive_stable<R: Rng + ?Sized>(a: f64, rng: &mut R) -> f64 {
    debug_assert!(a > 0.0 && a < 1.0);
    let u = PI * rng.random::<f64>();
    let w: f64 = Exp1.sample(rng);
    let head = (a * u).sin() / u.sin().powf(1.0 / a);
    head * (((1.0 - a) * u).sin() / w).powf((1.0 - a) / a)
}

/// Offspring law with generating function `s + (1 - s)^{1+β} / (1 + β)`:
/// critical, `p_1 = 0`, and in the domain of attraction of a
/// `(1+β)`-stable law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffspringLaw {
    beta: f64,
    /// Mass moved from `k = 0` to `k = 1`. Zero for the genuine law; nonzero
    /// only in fault-injection runs of the verification gates.
    p1_mass: f64,
}

/// Beyond this many recursion steps the sampler switches to the closed form
/// of the survival function.
const RECURSION_LIMIT: u64 = 1 << 16;

impl OffspringLaw {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(invalid(format!("beta {beta} outside (0, 1]")));
        }
        Ok(Self { beta, p1_mass: 0.0 })
    }

    /// Perturbed law with `p_1 = p1_mass` taken from `p_0`. The result is
    /// supercritical; used to check that the criticality gates fire.
    pub fn with_forced_p1(beta: f64, p1_mass: f64) -> Result<Self> {
        let mut law = Self::new(beta)?;
        if !(0.0..1.0 / (1.0 + beta)).contains(&p1_mass) {
            return Err(invalid(format!("p1 mass {p1_mass} out of range")));
        }
        law.p1_mass = p1_mass;
        Ok(law)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `P(K > k)`.
    pub fn survival(&self, k: u64) -> f64 {
        let b = self.beta;
        let s1 = b / (1.0 + b);
        match k {
            0 => s1 + self.p1_mass,
            1 => s1,
            _ if b == 1.0 => 0.0,
            _ if k <= RECURSION_LIMIT => {
                let mut s = s1;
                for j in 1..k {
                    s *= (j as f64 - b) / (j as f64 + 1.0);
                }
                s
            }
            _ => survival_closed_form(b, k),
        }
    }

    /// Mean of the law, summed to `terms` and closed with the exact
    /// telescoped tail `Σ_{k>K} k p_k = (K+1) S_K + (K+1) S_{K+1} / β`.
    pub fn mean(&self, terms: u64) -> f64 {
        let terms = terms.max(1);
        let mut head = 0.0;
        for k in 1..=terms {
            head += k as f64 * offspring_pmf(self, k);
        }
        let k1 = terms as f64 + 1.0;
        let tail = k1 * self.survival(terms) + k1 * self.survival(terms + 1) / self.beta;
        head + tail
    }
}

fn survival_closed_form(beta: f64, k: u64) -> f64 {
    let kf = k as f64;
    let ln = (beta / (1.0 + beta)).ln() + ln_gamma(kf - beta)
        - ln_gamma(1.0 - beta)
        - ln_gamma(kf + 1.0);
    ln.exp()
}

/// `p_k`: the `k`-th Taylor coefficient of the generating function, built by
/// the ratio recursion `p_{k+1} / p_k = (k - 1 - β) / (k + 1)` from
/// `p_2 = β / 2`.
pub fn offspring_pmf(law: &OffspringLaw, k: u64) -> f64 {
    let b = law.beta;
    match k {
        0 => 1.0 / (1.0 + b) - law.p1_mass,
        1 => law.p1_mass,
        _ => {
            let mut p = b / 2.0;
            for j in 2..k {
                p *= (j as f64 - 1.0 - b) / (j as f64 + 1.0);
                if p == 0.0 {
                    break;
                }
            }
            p
        }
    }
}

/// Inversion sampling against the survival function `S_k = P(K > k)`,
/// which obeys `S_{k+1} = S_k (k - β) / (k + 1)`. The recursion runs until
/// `S_k` drops below the uniform draw; there is no fixed truncation.
pub fn sample_offspring<R: Rng + ?Sized>(law: &OffspringLaw, rng: &mut R) -> u64 {
    let u = 1.0 - rng.random::<f64>();
    let b = law.beta;
    let s0 = law.survival(0);
    if u >= s0 {
        return 0;
    }
    let mut s = law.survival(1);
    if u >= s {
        return 1;
    }
    if b == 1.0 {
        return 2;
    }
    let mut k: u64 = 1;
    while k < RECURSION_LIMIT {
        s *= (k as f64 - b) / (k as f64 + 1.0);
        k += 1;
        if u >= s {
            return k;
        }
    }
    // far tail: bracket then bisect on the closed form
    let mut lo = k;
    let mut hi = k.saturating_mul(2);
    while survival_closed_form(b, hi) > u {
        lo = hi;
        hi = hi.saturating_mul(2);
        if hi == u64::MAX {
            return hi;
        }
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if survival_closed_form(b, mid) > u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;

    fn binom(a: f64, k: u64) -> f64 {
        let mut c = 1.0;
        for j in 0..k {
            c *= (a - j as f64) / (j as f64 + 1.0);
        }
        c
    }

    #[test]
    fn cf_at_origin_is_one() {
        let p = StableLawParams::new(1.3, 0.4, 2.0, -1.0).unwrap();
        assert_eq!(stable_cf(&p, 3.0, 0.0), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn cf_gaussian_boundary() {
        let p = StableLawParams::new(2.0, 1.0, 1.0, 0.0).unwrap();
        let v = stable_cf(&p, 1.0, 1.0);
        assert!((v.re - (-1f64).exp()).abs() < 1e-15);
        assert_eq!(v.im, 0.0);
    }

    #[test]
    fn cf_index_three_halves() {
        // tan(3π/4) = -1, so the exponent is -(1 + i)
        let p = StableLawParams::new(1.5, 1.0, 1.0, 0.0).unwrap();
        let v = stable_cf(&p, 1.0, 1.0);
        let expect = Complex64::new(-1.0, -1.0).exp();
        assert!((v - expect).norm() < 1e-14, "{v} vs {expect}");
    }

    #[test]
    fn rejects_bad_params() {
        assert!(StableLawParams::new(1.0, 0.0, 1.0, 0.0).is_err());
        assert!(StableLawParams::new(2.1, 0.0, 1.0, 0.0).is_err());
        assert!(StableLawParams::new(1.5, 1.5, 1.0, 0.0).is_err());
        assert!(StableLawParams::new(1.5, 0.0, -1.0, 0.0).is_err());
        assert!(OffspringLaw::new(0.0).is_err());
        assert!(OffspringLaw::new(1.2).is_err());
    }

    #[test]
    fn degenerate_scale_returns_shift() {
        let p = StableLawParams::new(1.5, 1.0, 0.0, 5.0).unwrap();
        let mut rng = stream(1);
        for _ in 0..10 {
            assert_eq!(sample_stable(&p, &mut rng), 5.0);
        }
    }

    #[test]
    fn gaussian_variance_is_two() {
        let p = StableLawParams::new(2.0, 0.0, 1.0, 0.0).unwrap();
        let mut rng = stream(2);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| sample_stable(&p, &mut rng)).collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n as f64;
        let se = ((m4 - v * v) / n as f64).sqrt();
        assert!((v - 2.0).abs() < 3.0 * se, "var {v} se {se}");
    }

    #[test]
    fn empirical_cf_matches_skewed_law() {
        let p = StableLawParams::new(1.5, 1.0, 1.0, 0.0).unwrap();
        let mut rng = stream(3);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| sample_stable(&p, &mut rng)).collect();
        for &z in &[0.25, 0.5, 1.0, 2.0] {
            let target = stable_cf(&p, 1.0, z);
            let (mut c, mut s) = (0.0, 0.0);
            for x in &xs {
                c += (z * x).cos();
                s += (z * x).sin();
            }
            let ecf = Complex64::new(c / n as f64, s / n as f64);
            let se = ((1.0 - target.norm_sqr()) / n as f64).sqrt();
            assert!((ecf.re - target.re).abs() < 3.0 * se, "z={z} re {ecf} {target}");
            assert!((ecf.im - target.im).abs() < 3.0 * se, "z={z} im {ecf} {target}");
        }
    }

    #[test]
    fn right_skew_has_thin_lower_tail() {
        let p = StableLawParams::new(1.5, 1.0, 1.0, 0.0).unwrap();
        let mut rng = stream(4);
        let mut xs: Vec<f64> = (0..100_000).map(|_| sample_stable(&p, &mut rng)).collect();
        xs.sort_by(f64::total_cmp);
        let med = xs[xs.len() / 2];
        let lo = med - xs[100];
        let hi = xs[xs.len() - 101] - med;
        assert!(hi > 5.0 * lo, "upper {hi} lower {lo}");
    }

    #[test]
    fn positive_stable_laplace_transform() {
        let mut rng = stream(5);
        let a = 0.75;
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| positive_stable(a, &mut rng)).collect();
        for &lam in &[0.3, 1.0, 3.0] {
            let emp = xs.iter().map(|x| (-lam * x).exp()).sum::<f64>() / n as f64;
            let exact = (-f64::powf(lam, a)).exp();
            let se = (exact * (1.0 - exact) / n as f64).sqrt();
            assert!((emp - exact).abs() < 4.0 * se, "lam {lam}: {emp} vs {exact}");
        }
    }

    #[test]
    fn pmf_binary_case() {
        let law = OffspringLaw::new(1.0).unwrap();
        assert_eq!(offspring_pmf(&law, 0), 0.5);
        assert_eq!(offspring_pmf(&law, 1), 0.0);
        assert_eq!(offspring_pmf(&law, 2), 0.5);
        for k in 3..10 {
            assert_eq!(offspring_pmf(&law, k), 0.0);
        }
    }

    #[test]
    fn pmf_half_matches_series() {
        let law = OffspringLaw::new(0.5).unwrap();
        assert!((offspring_pmf(&law, 0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(offspring_pmf(&law, 1), 0.0);
        assert!((offspring_pmf(&law, 2) - 0.25).abs() < 1e-15);
        assert!((offspring_pmf(&law, 3) - 1.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn recursion_agrees_with_direct_binomial() {
        for &b in &[0.1, 0.37, 0.5, 0.9] {
            let law = OffspringLaw::new(b).unwrap();
            for k in 2..=20u64 {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                let direct = sign * binom(1.0 + b, k) / (1.0 + b);
                let rec = offspring_pmf(&law, k);
                assert!((rec - direct).abs() <= 1e-14 * direct.abs().max(1e-300), "b={b} k={k}");
            }
        }
    }

    #[test]
    fn survival_matches_pmf_and_closed_form() {
        let law = OffspringLaw::new(0.3).unwrap();
        let mut cum = 0.0;
        for k in 0..200u64 {
            cum += offspring_pmf(&law, k);
            assert!((1.0 - cum - law.survival(k)).abs() < 1e-13, "k={k}");
        }
        for &k in &[5u64, 100, 5000] {
            let rel = survival_closed_form(0.3, k) / law.survival(k) - 1.0;
            assert!(rel.abs() < 1e-10, "k={k} rel {rel}");
        }
    }

    #[test]
    fn criticality_exact_mean() {
        for &b in &[0.2, 0.5, 0.8, 1.0] {
            let law = OffspringLaw::new(b).unwrap();
            for &terms in &[1u64, 10, 500] {
                assert!((law.mean(terms) - 1.0).abs() < 1e-12, "b={b} terms={terms}");
            }
        }
        let bad = OffspringLaw::with_forced_p1(0.5, 0.01).unwrap();
        assert!((bad.mean(100) - 1.01).abs() < 1e-12);
    }

    #[test]
    fn binary_sampler_values() {
        let law = OffspringLaw::new(1.0).unwrap();
        let mut rng = stream(6);
        let n = 100_000;
        let mut zeros = 0usize;
        for _ in 0..n {
            let k = sample_offspring(&law, &mut rng);
            assert!(k == 0 || k == 2);
            if k == 0 {
                zeros += 1;
            }
        }
        let f = zeros as f64 / n as f64;
        let se = (0.25 / n as f64).sqrt();
        assert!((f - 0.5).abs() < 3.0 * se, "{f}");
    }

    #[test]
    fn sampler_mean_is_one() {
        let law = OffspringLaw::new(0.5).unwrap();
        let mut rng = stream(7);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| sample_offspring(&law, &mut rng) as f64).collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (v / n as f64).sqrt();
        assert!((m - 1.0).abs() < 3.0 * se, "mean {m} se {se}");
    }

    #[test]
    fn sampler_frequencies_match_pmf() {
        let law = OffspringLaw::new(0.5).unwrap();
        let mut rng = stream(8);
        let n = 200_000;
        let mut counts = [0usize; 6];
        for _ in 0..n {
            let k = sample_offspring(&law, &mut rng) as usize;
            if k < 6 {
                counts[k] += 1;
            }
        }
        for (k, &c) in counts.iter().enumerate() {
            let p = offspring_pmf(&law, k as u64);
            let se = (p * (1.0 - p) / n as f64).sqrt().max(1e-12);
            assert!((c as f64 / n as f64 - p).abs() < 4.0 * se, "k={k}");
        }
    }

    proptest! {
        #[test]
        fn cf_bounded_and_conjugate_symmetric(
            a in 1.01f64..=2.0, b in -1.0f64..=1.0, s in 0.0f64..3.0,
            mu in -2.0f64..2.0, t in 0.0f64..4.0, z in -10.0f64..10.0
        ) {
            let p = StableLawParams::new(a, b, s, mu).unwrap();
            let v = stable_cf(&p, t, z);
            let w = stable_cf(&p, t, -z);
            prop_assert!(v.norm() <= 1.0 + 1e-15);
            prop_assert!((v - w.conj()).norm() < 1e-12);
        }

        #[test]
        fn pmf_values_are_probabilities(b in 0.01f64..=1.0, k in 0u64..400) {
            let law = OffspringLaw::new(b).unwrap();
            let p = offspring_pmf(&law, k);
            prop_assert!((0.0..=1.0).contains(&p));
        }
    }
}
