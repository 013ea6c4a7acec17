use occfluct_core::density::{
    expected_test_value, p1_radial, riesz_constant, riesz_potential, FiniteMeasureSpec, MotionParams, TestFunction,
};
use occfluct_core::limits::{sample_xi, sample_zeta, self_similarity_index, IntegralKind, StableIntegralGrid};
use occfluct_core::particles::{simulate_replicate, suggest_truncation_radius, Intensity, ModelConfig};
use occfluct_core::rng::stream;
use occfluct_core::stable::{sample_stable, StableLawParams};
use occfluct_core::stats::{covariance_with_se, ks_two_sample};

fn mean_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

fn snapshots(cfg: &ModelConfig, f: &TestFunction, grid: &[f64], n: u64, seed: u64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| simulate_replicate(cfg, f, grid, seed, i).unwrap().snapshot)
        .collect()
}

#[test]
fn lebesgue_mean_is_preserved() {
    let m = MotionParams::new(1, 2.0).unwrap();
    let f = TestFunction::standard(1, 1.0).unwrap();
    let (h, t) = (3.0, 4.0);
    let r = suggest_truncation_radius(&m, t, &f, h, 1.5);
    let intensity = Intensity::LebesgueHighDensity { density: h, truncation_radius: r };
    let cfg = ModelConfig::new(m, 1.0, 1.0, intensity, t).unwrap();
    let grid = [0.25, 0.5, 1.0];
    let snaps = snapshots(&cfg, &f, &grid, 2000, 3);
    for j in 0..grid.len() {
        let col: Vec<f64> = snaps.iter().map(|s| s[j]).collect();
        let (mean, se) = mean_se(&col);
        assert!((mean - h * f.integral()).abs() < 3.0 * se, "s={}: {mean} ± {se}", grid[j]);
    }
}

#[test]
fn finite_mean_follows_the_semigroup() {
    let m = MotionParams::new(1, 2.0).unwrap();
    let f = TestFunction::standard(1, 1.0).unwrap();
    let mu = FiniteMeasureSpec::point_mass(1.0, vec![0.5]).unwrap();
    let h = 20.0;
    let cfg = ModelConfig::new(m, 0.5, 1.0, Intensity::FiniteHighDensity { density: h, mu: mu.clone() }, 4.0).unwrap();
    let grid = [0.25, 1.0];
    let snaps = snapshots(&cfg, &f, &grid, 2000, 4);
    for j in 0..grid.len() {
        let col: Vec<f64> = snaps.iter().map(|s| s[j]).collect();
        let (mean, se) = mean_se(&col);
        let want = h * expected_test_value(&mu, &m, grid[j] * 4.0, &f).unwrap();
        assert!((mean - want).abs() < 3.0 * se, "s={}: {mean} ± {se} vs {want}", grid[j]);
    }
}

#[test]
fn system_without_branching_is_in_equilibrium() {
    let m = MotionParams::new(1, 2.0).unwrap();
    let f = TestFunction::standard(1, 1.0).unwrap();
    let (h, t) = (2.0, 10.0);
    let r = suggest_truncation_radius(&m, t, &f, h, 1.5);
    let cfg = ModelConfig::new(m, 1.0, 0.0, Intensity::LebesgueHighDensity { density: h, truncation_radius: r }, t).unwrap();
    let snaps = snapshots(&cfg, &f, &[0.2, 0.8], 4000, 5);
    // alternate replicates keep the two samples independent
    let early: Vec<f64> = snaps.iter().step_by(2).map(|s| s[0]).collect();
    let late: Vec<f64> = snaps.iter().skip(1).step_by(2).map(|s| s[1]).collect();
    let p = ks_two_sample(&early, &late).unwrap();
    assert!(p >= 0.01, "p = {p}");
}

#[test]
fn density_has_power_tail_bound() {
    for (d, alpha) in [(1usize, 0.5), (1, 1.5), (2, 1.0), (3, 1.2)] {
        let m = MotionParams::new(d, alpha).unwrap();
        let bound = |r: f64| p1_radial(&m, r) * (1.0 + r.powf(d as f64 + alpha));
        let radii: Vec<f64> = (0..=30).map(|k| 10f64.powf(-1.0 + k as f64 / 10.0)).collect();
        let c = radii.iter().map(|&r| bound(r)).fold(0.0, f64::max);
        assert!(c.is_finite() && c > 0.0);
        // the weighted density settles at the tail constant
        let (a, b) = (bound(300.0), bound(1000.0));
        assert!((a / b - 1.0).abs() < 0.05, "d={d} alpha={alpha}: {a} vs {b}");
    }
}

#[test]
fn riesz_potential_decays_like_the_kernel() {
    for (d, alpha) in [(3usize, 2.0), (2, 1.0), (3, 0.8)] {
        let m = MotionParams::new(d, alpha).unwrap();
        let f = TestFunction::standard(d, 0.5).unwrap();
        let c = riesz_constant(&m).unwrap() * f.integral();
        let mut sup = 0.0f64;
        for k in 0..=12 {
            let r = 0.25 * 2f64.powi(k);
            let mut x = vec![0.0; d];
            x[d - 1] = r;
            let w = (1.0 + r.powf(d as f64 - alpha)) * riesz_potential(&m, &f, &x).unwrap().abs();
            sup = sup.max(w);
            if k == 12 {
                assert!((w / c - 1.0).abs() < 1e-3, "d={d} alpha={alpha}: {w} vs {c}");
            }
        }
        assert!(sup.is_finite());
    }
}

#[test]
fn stable_convolution_is_stable() {
    let p = StableLawParams::totally_skewed(1.5, 0.7).unwrap();
    let n = 10_000;
    let k = 3;
    let mut rng = stream(21);
    let sums: Vec<f64> = (0..n).map(|_| (0..k).map(|_| sample_stable(&p, &mut rng)).sum()).collect();
    let q = p.with_scale(0.7 * (k as f64).powf(1.0 / 1.5)).unwrap();
    let single: Vec<f64> = (0..n).map(|_| sample_stable(&q, &mut rng)).collect();
    assert!(ks_two_sample(&sums, &single).unwrap() >= 0.01);
}

#[test]
fn refined_discretization_keeps_second_moment() {
    let g = StableIntegralGrid::auto(IntegralKind::Xi, 1, 2.0, 1.0, 1.0).unwrap();
    let n = 20_000;
    let a = sample_xi(&g, &[1.0], n, 1).unwrap().column(0);
    let b = sample_xi(&g.refined(), &[1.0], n, 2).unwrap().column(0);
    let (va, sa) = covariance_with_se(&a, &a).unwrap();
    let (vb, sb) = covariance_with_se(&b, &b).unwrap();
    assert!((va - vb).abs() < 3.0 * sa.hypot(sb), "{va} ± {sa} vs {vb} ± {sb}");
}

#[test]
fn stable_integral_is_totally_skewed() {
    let g = StableIntegralGrid::auto(IntegralKind::Xi, 1, 2.0, 0.5, 1.0).unwrap();
    let mut x = sample_xi(&g, &[1.0], 50_000, 3).unwrap().column(0);
    x.sort_by(f64::total_cmp);
    let k = x.len() / 1000;
    let (lo, hi) = (x[k].abs(), x[x.len() - 1 - k].abs());
    assert!(hi > 5.0 * lo, "upper {hi}, lower {lo}");
}

#[test]
fn self_similarity_at_both_scales() {
    let n = 10_000;
    for kind in [IntegralKind::Xi, IntegralKind::Zeta] {
        let b = self_similarity_index(kind, 1, 2.0, 0.5);
        let sample = |t: f64, seed: u64| {
            let g = StableIntegralGrid::auto(kind, 1, 2.0, 0.5, t).unwrap();
            let p = match kind {
                IntegralKind::Xi => sample_xi(&g, &[t], n, seed),
                IntegralKind::Zeta => sample_zeta(&g, &[t], n, seed),
            };
            p.unwrap().column(0)
        };
        let base = sample(1.0, 10);
        for (i, a) in [0.5f64, 2.0].into_iter().enumerate() {
            let scaled: Vec<f64> = sample(a, 11 + i as u64).iter().map(|v| v * a.powf(-b)).collect();
            let p = ks_two_sample(&base, &scaled).unwrap();
            assert!(p >= 0.01, "{kind:?} a={a}: p = {p}");
        }
    }
}
