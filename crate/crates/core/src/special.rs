//! Radial kernels for isotropic Fourier inversion in `ℝ^d`.
//!
//! `radial_kernel(d, x) = Γ(d/2) (2/x)^ν J_ν(x)` with `ν = d/2 − 1` is the
//! average of `cos(k·y)` over the unit sphere scaled to `|k||y| = x`; it
//! equals `cos x` in one dimension and `sin x / x` in three.

use std::f64::consts::PI;

use statrs::function::gamma::{gamma, ln_gamma};

use crate::quad::{integrate, QuadOptions};

/// Surface area of the unit sphere in `ℝ^d`.
pub fn sphere_area(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    2.0 * PI.powf(h) / gamma(h)
}

/// Power series `Σ_k (−x²/4)^k Γ(d/2) / (k! Γ(k + d/2))`.
fn radial_series(d: usize, x: f64) -> f64 {
    let h = d as f64 / 2.0;
    let q = -0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 0..200 {
        let kf = k as f64;
        term *= q / ((kf + 1.0) * (kf + h));
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// Bessel function of the first kind of integer order.
pub fn bessel_j_int(n: u32, x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax <= 50.0 {
        // trapezoid on the periodic Bessel integral: exact up to J_{2N-n}
        let nodes = (ax.ceil() as usize + n as usize + 40).max(48);
        let h = PI / nodes as f64;
        let nf = n as f64;
        let mut s = 0.5 * (1.0 + (nf * PI).cos());
        for j in 1..nodes {
            let tau = j as f64 * h;
            s += (nf * tau - ax * tau.sin()).cos();
        }
        s / nodes as f64
    } else {
        hankel_asymptotic(n as f64, ax)
    };
    if x < 0.0 && n % 2 == 1 {
        -v
    } else {
        v
    }
}

fn hankel_asymptotic(nu: f64, x: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut a = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..40 {
        let kf = k as f64;
        a *= (mu - (2.0 * kf - 1.0).powi(2)) / (kf * 8.0 * x);
        if a.abs() > last || a == 0.0 {
            break;
        }
        last = a.abs();
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * a;
        } else {
            q += sign * a;
        }
        if a.abs() < 1e-17 {
            break;
        }
    }
    let w = x - (0.5 * nu + 0.25) * PI;
    (2.0 / (PI * x)).sqrt() * (p * w.cos() - q * w.sin())
}

/// `Γ(d/2) (2/x)^{d/2−1} J_{d/2−1}(x)`, normalized to 1 at the origin.
pub fn radial_kernel(d: usize, x: f64) -> f64 {
    let x = x.abs();
    match d {
        1 => return x.cos(),
        3 => {
            return if x < 1e-3 {
                radial_series(3, x)
            } else {
                x.sin() / x
            }
        }
        _ => {}
    }
    if x <= 4.0_f64.max(0.5 * d as f64) {
        return radial_series(d, x);
    }
    let h = d as f64 / 2.0;
    if d % 2 == 0 {
        let n = (d / 2 - 1) as u32;
        (ln_gamma(h) + (h - 1.0) * (2.0 / x).ln()).exp() * bessel_j_int(n, x)
    } else {
        // spherical Bessel j_m by upward recurrence, m = (d − 3) / 2
        let m = (d - 3) / 2;
        let (mut jm1, mut j0) = (x.cos() / x, x.sin() / x);
        for n in 0..m {
            let next = (2 * n + 1) as f64 / x * j0 - jm1;
            jm1 = j0;
            j0 = next;
        }
        let mf = m as f64;
        (ln_gamma(h) + (mf + 1.0) * 2f64.ln() - 0.5 * PI.ln() - mf * x.ln()).exp() * j0
    }
}

/// `e^{−κ}` times the spherical mean of `e^{κ cos θ}` on the unit sphere of
/// `ℝ^d`; bounded by 1 and decaying like `κ^{−(d−1)/2}`.
pub fn scaled_spherical_mean_exp(d: usize, kappa: f64) -> f64 {
    let k = kappa.abs();
    match d {
        1 => 0.5 * (1.0 + (-2.0 * k).exp()),
        3 => {
            if k < 1e-4 {
                1.0 - k + 2.0 * k * k / 3.0
            } else {
                -(-2.0 * k).exp_m1() / (2.0 * k)
            }
        }
        2 => {
            let nodes = 32 + (10.0 * k.sqrt()).ceil() as usize;
            let h = PI / nodes as f64;
            let mut s = 0.5 * (1.0 + (-2.0 * k).exp());
            for j in 1..nodes {
                s += (k * ((j as f64 * h).cos() - 1.0)).exp();
            }
            s / nodes as f64
        }
        _ => {
            let pw = (d - 2) as i32;
            let norm = PI.sqrt() * gamma((d as f64 - 1.0) / 2.0) / gamma(d as f64 / 2.0);
            let width = if k > 1.0 { 8.0 / k.sqrt() } else { PI };
            let r = integrate(
                |th: f64| (k * (th.cos() - 1.0)).exp() * th.sin().powi(pw),
                0.0,
                width.min(PI),
                QuadOptions::new(1e-15, 1e-12),
            );
            r.value / norm
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(1) - 2.0).abs() < 1e-14);
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-13);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-13);
    }

    #[test]
    fn bessel_reference_values() {
        // J_0(1), J_1(2.5), J_2(10), J_0(60), J_1(75)
        let cases = [
            (0, 1.0, 0.765_197_686_557_966_6),
            (1, 2.5, 0.497_094_102_464_274_4),
            (2, 10.0, 0.254_630_313_685_120_6),
            (0, 60.0, -0.091_471_804_089_061_89),
            (1, 75.0, -0.085_139_995_044_829_12),
        ];
        for (n, x, v) in cases {
            let got = bessel_j_int(n, x);
            assert!((got - v).abs() < 1e-12, "J_{n}({x}) = {got} vs {v}");
        }
    }

    #[test]
    fn kernel_branches_agree() {
        for d in [2usize, 4, 5] {
            for &x in &[3.9, 4.0, 4.1] {
                let a = radial_kernel(d, x);
                let b = radial_series(d, x);
                assert!((a - b).abs() < 1e-12, "d={d} x={x}: {a} vs {b}");
            }
        }
        for &x in &[7.0f64, 33.0] {
            let five = 3.0 * (x.sin() - x * x.cos()) / (x * x * x);
            assert!((radial_kernel(5, x) - five).abs() < 1e-12);
        }
    }

    #[test]
    fn spherical_mean_small_and_large() {
        for d in 1..=5usize {
            assert!((scaled_spherical_mean_exp(d, 0.0) - 1.0).abs() < 1e-12, "d={d}");
        }
        // d = 2 against e^{-k} I_0(k), I_0(3) = 4.880792585865024
        let v = scaled_spherical_mean_exp(2, 3.0);
        assert!((v - (-3f64).exp() * 4.880_792_585_865_024).abs() < 1e-13);
        // general-d branch for d = 3 against the closed form
        let pw = 1;
        let k = 2.5_f64;
        let r = integrate(
            |th: f64| (k * (th.cos() - 1.0)).exp() * th.sin().powi(pw),
            0.0,
            PI,
            QuadOptions::default(),
        );
        assert!((r.value / 2.0 - scaled_spherical_mean_exp(3, k)).abs() < 1e-12);
    }
}
