//! Asymptotic regimes: dimension conditions, norming sequences `F_T` and
//! finite-`T` surrogates for the density-growth conditions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used for the boundary (critical-dimension) equalities.
const BOUNDARY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    BranchingLebesgueLow,
    BranchingLebesgueCritical,
    BranchingLebesgueHigh,
    NonbranchingLebesgueLow,
    NonbranchingLebesgueCritical,
    NonbranchingLebesgueHigh,
    BranchingFiniteLow,
    BranchingFiniteCritical,
    BranchingFiniteHigh,
    NonbranchingFiniteLow,
    NonbranchingFiniteCritical,
    NonbranchingFiniteHigh,
}

/// `(d, α, β)` as used by the regime guards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeParams {
    pub d: usize,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Below,
    At,
    Above,
}

fn side(d: f64, threshold: f64) -> Side {
    if (d - threshold).abs() <= BOUNDARY_TOL * threshold.max(1.0) {
        Side::At
    } else if d < threshold {
        Side::Below
    } else {
        Side::Above
    }
}

impl Regime {
    pub const ALL: [Regime; 12] = [
        Regime::BranchingLebesgueLow,
        Regime::BranchingLebesgueCritical,
        Regime::BranchingLebesgueHigh,
        Regime::NonbranchingLebesgueLow,
        Regime::NonbranchingLebesgueCritical,
        Regime::NonbranchingLebesgueHigh,
        Regime::BranchingFiniteLow,
        Regime::BranchingFiniteCritical,
        Regime::BranchingFiniteHigh,
        Regime::NonbranchingFiniteLow,
        Regime::NonbranchingFiniteCritical,
        Regime::NonbranchingFiniteHigh,
    ];

    pub fn is_branching(self) -> bool {
        use Regime::*;
        matches!(
            self,
            BranchingLebesgueLow
                | BranchingLebesgueCritical
                | BranchingLebesgueHigh
                | BranchingFiniteLow
                | BranchingFiniteCritical
                | BranchingFiniteHigh
        )
    }

    pub fn is_lebesgue(self) -> bool {
        use Regime::*;
        matches!(
            self,
            BranchingLebesgueLow
                | BranchingLebesgueCritical
                | BranchingLebesgueHigh
                | NonbranchingLebesgueLow
                | NonbranchingLebesgueCritical
                | NonbranchingLebesgueHigh
        )
    }

    /// Threshold dimension and the side of it this regime requires, with a
    /// human-readable form of the inequality.
    fn condition(self, p: &RegimeParams) -> (f64, Side, String) {
        use Regime::*;
        let a = p.alpha;
        let b = p.beta;
        let (thr, name) = match self {
            BranchingLebesgueLow | BranchingLebesgueCritical | BranchingLebesgueHigh => {
                (a * (1.0 + b) / b, "alpha(1+beta)/beta")
            }
            BranchingFiniteLow | BranchingFiniteCritical | BranchingFiniteHigh => {
                (a * (2.0 + b) / (1.0 + b), "alpha(2+beta)/(1+beta)")
            }
            NonbranchingLebesgueLow | NonbranchingLebesgueCritical | NonbranchingLebesgueHigh => {
                (2.0 * a, "2 alpha")
            }
            NonbranchingFiniteLow | NonbranchingFiniteCritical | NonbranchingFiniteHigh => (a, "alpha"),
        };
        let want = match self {
            BranchingLebesgueLow | BranchingFiniteLow | NonbranchingLebesgueLow | NonbranchingFiniteLow => {
                Side::Below
            }
            BranchingLebesgueCritical
            | BranchingFiniteCritical
            | NonbranchingLebesgueCritical
            | NonbranchingFiniteCritical => Side::At,
            _ => Side::Above,
        };
        let op = match want {
            Side::Below => "<",
            Side::At => "=",
            Side::Above => ">",
        };
        (thr, want, format!("d {op} {name} (= {thr})"))
    }

    /// Checks the dimension inequality that defines the regime.
    pub fn validate(self, p: &RegimeParams) -> Result<()> {
        if self.is_branching() && !(p.beta > 0.0 && p.beta <= 1.0) {
            return Err(Error::InvalidParameter(format!("beta {} outside (0, 1]", p.beta)));
        }
        if !(p.alpha > 0.0 && p.alpha <= 2.0) || p.d == 0 {
            return Err(Error::InvalidParameter(format!(
                "need d >= 1 and alpha in (0, 2], got d = {}, alpha = {}",
                p.d, p.alpha
            )));
        }
        let (thr, want, text) = self.condition(p);
        if side(p.d as f64, thr) != want {
            return Err(Error::DimensionCondition(format!(
                "{self:?} requires {text}, got d = {}",
                p.d
            )));
        }
        Ok(())
    }

    /// The regime of the given family matching `(d, α, β)`.
    pub fn classify(branching: bool, lebesgue: bool, p: &RegimeParams) -> Regime {
        use Regime::*;
        let family: [Regime; 3] = match (branching, lebesgue) {
            (true, true) => [BranchingLebesgueLow, BranchingLebesgueCritical, BranchingLebesgueHigh],
            (true, false) => [BranchingFiniteLow, BranchingFiniteCritical, BranchingFiniteHigh],
            (false, true) => [
                NonbranchingLebesgueLow,
                NonbranchingLebesgueCritical,
                NonbranchingLebesgueHigh,
            ],
            (false, false) => [
                NonbranchingFiniteLow,
                NonbranchingFiniteCritical,
                NonbranchingFiniteHigh,
            ],
        };
        let (thr, _, _) = family[0].condition(p);
        match side(p.d as f64, thr) {
            Side::Below => family[0],
            Side::At => family[1],
            Side::Above => family[2],
        }
    }
}

/// Norming `F_T` of the rescaled occupation-time fluctuations.
pub fn norming(regime: Regime, t: f64, h: f64, p: &RegimeParams) -> Result<f64> {
    use Regime::*;
    regime.validate(p)?;
    if !(t > 1.0) || !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("need T > 1 and H > 0, got T = {t}, H = {h}")));
    }
    let r = p.d as f64 / p.alpha;
    let b = p.beta;
    let stable_root = |x: f64| x.powf(1.0 / (1.0 + b));
    let f = match regime {
        BranchingLebesgueLow => stable_root(h * t.powf(2.0 + b - r * b)),
        BranchingLebesgueCritical => stable_root(h * t * t.ln()),
        BranchingLebesgueHigh => stable_root(h * t),
        NonbranchingLebesgueLow => h.sqrt() * t.powf(1.0 - r / 2.0),
        NonbranchingLebesgueCritical => (h * t * t.ln()).sqrt(),
        NonbranchingLebesgueHigh => (h * t).sqrt(),
        BranchingFiniteLow => stable_root(h * t.powf(2.0 + b - r * (1.0 + b))),
        BranchingFiniteCritical => stable_root(h * t.ln()),
        BranchingFiniteHigh => stable_root(h),
        NonbranchingFiniteLow => h.sqrt() * t.powf(1.0 - r),
        NonbranchingFiniteCritical => h.sqrt() * t.ln(),
        NonbranchingFiniteHigh => h.sqrt(),
    };
    Ok(f)
}

pub const DEFAULT_SCHEDULE_THRESHOLD: f64 = 0.1;

/// Finite-`T` surrogate for the density-growth conditions: `H^{−β} T^{1−dβ/α}`
/// for branching with Lebesgue intensity in low dimension, `H^{−β} T` for
/// branching with finite intensity. `None` when the regime imposes no
/// condition.
pub fn schedule_statistic(regime: Regime, t: f64, h: f64, p: &RegimeParams) -> Option<f64> {
    use Regime::*;
    let b = p.beta;
    let r = p.d as f64 / p.alpha;
    match regime {
        BranchingLebesgueLow => {
            if r * b >= 1.0 {
                None
            } else {
                Some(h.powf(-b) * t.powf(1.0 - r * b))
            }
        }
        BranchingFiniteLow | BranchingFiniteCritical | BranchingFiniteHigh => Some(h.powf(-b) * t),
        _ => None,
    }
}

pub fn check_density_schedule(regime: Regime, t: f64, h: f64, p: &RegimeParams, threshold: f64) -> bool {
    match schedule_statistic(regime, t, h, p) {
        None => true,
        Some(s) => s <= threshold * (1.0 + 1e-12),
    }
}
