//! Experiment specifications: parsing, defaults, validation and hashing.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use occfluct_core::density::{FiniteMeasureSpec, MotionParams, TestFunction};
use occfluct_core::limits::{existence_check, IntegralKind};
use occfluct_core::particles::{validate_grid, SimulationKnobs};
use occfluct_core::regime::{check_density_schedule, norming, schedule_statistic, Regime, RegimeParams};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ExperimentId {
    Thm2_2a,
    Thm2_2b,
    Thm2_2c,
    Thm2_6a,
    Thm2_6b,
    Thm2_6c,
    Thm2_7a,
    Thm2_7b,
    Thm2_7c,
    Thm2_10a,
    Thm2_10b,
    Thm2_10c,
    Prop2_4,
    Prop2_5,
    Prop2_9,
}

impl ExperimentId {
    /// Particle-system regime; `None` for limit-only suites.
    pub fn regime(self) -> Option<Regime> {
        use ExperimentId::*;
        Some(match self {
            Thm2_2a => Regime::BranchingLebesgueLow,
            Thm2_2b => Regime::BranchingLebesgueCritical,
            Thm2_2c => Regime::BranchingLebesgueHigh,
            Thm2_6a => Regime::NonbranchingLebesgueLow,
            Thm2_6b => Regime::NonbranchingLebesgueCritical,
            Thm2_6c => Regime::NonbranchingLebesgueHigh,
            Thm2_7a => Regime::BranchingFiniteLow,
            Thm2_7b => Regime::BranchingFiniteCritical,
            Thm2_7c => Regime::BranchingFiniteHigh,
            Thm2_10a => Regime::NonbranchingFiniteLow,
            Thm2_10b => Regime::NonbranchingFiniteCritical,
            Thm2_10c => Regime::NonbranchingFiniteHigh,
            Prop2_4 | Prop2_5 | Prop2_9 => return None,
        })
    }

    pub fn name(self) -> &'static str {
        use ExperimentId::*;
        match self {
            Thm2_2a => "thm2_2a",
            Thm2_2b => "thm2_2b",
            Thm2_2c => "thm2_2c",
            Thm2_6a => "thm2_6a",
            Thm2_6b => "thm2_6b",
            Thm2_6c => "thm2_6c",
            Thm2_7a => "thm2_7a",
            Thm2_7b => "thm2_7b",
            Thm2_7c => "thm2_7c",
            Thm2_10a => "thm2_10a",
            Thm2_10b => "thm2_10b",
            Thm2_10c => "thm2_10c",
            Prop2_4 => "prop2_4",
            Prop2_5 => "prop2_5",
            Prop2_9 => "prop2_9",
        }
    }
}

/// Which constant the covariance targets use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetNormalization {
    /// The limit constants and kernels exactly as stated for the theorems.
    #[default]
    Stated,
    /// Constants matched to the second moments of the simulated model.
    Normalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HRule {
    /// `H = coefficient · T^exponent`.
    #[default]
    Power,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HSchedule {
    pub rule: HRule,
    pub coefficient: f64,
    pub exponent: f64,
}

impl Default for HSchedule {
    fn default() -> Self {
        Self {
            rule: HRule::Power,
            coefficient: 1.0,
            exponent: 1.0,
        }
    }
}

impl HSchedule {
    pub fn density(&self, t: f64) -> f64 {
        match self.rule {
            HRule::Power => self.coefficient * t.powf(self.exponent),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSpec {
    pub d: usize,
    pub alpha: f64,
    pub beta: f64,
    pub branching_rate: f64,
    /// Finite intensity; required by finite-measure experiments.
    pub mu: Option<FiniteMeasureSpec>,
    /// Lebesgue truncation radius factor `c` in `r_φ + c T^{1/α} q`.
    pub truncation_c: f64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            d: 1,
            alpha: 2.0,
            beta: 1.0,
            branching_rate: 0.0,
            mu: None,
            truncation_c: 1.5,
        }
    }
}

impl ModelSpec {
    pub fn regime_params(&self) -> RegimeParams {
        RegimeParams {
            d: self.d,
            alpha: self.alpha,
            beta: self.beta,
        }
    }

    pub fn motion(&self) -> Result<MotionParams> {
        Ok(MotionParams::new(self.d, self.alpha)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Standard errors allowed in moment matches.
    pub se_multiplier: f64,
    /// Relative allowance for finite-`T` bias in per-rung covariance reports.
    pub bias_allowance: f64,
    /// Largest admissible relative covariance gap at the last rung.
    pub final_gap: f64,
    /// Relative allowance for discretization bias of limit-process samplers.
    pub discretization: f64,
    pub ks_level: f64,
    pub slope: f64,
    /// Half-width of the band around `1 + β` for Hill estimates.
    pub hill_band: f64,
    /// Bound on the studentized empirical-CF deviation.
    pub ecf: f64,
    pub max_flagged_fraction: f64,
    /// Threshold of the finite-`T` density-schedule surrogate.
    pub schedule_threshold: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            se_multiplier: 3.0,
            bias_allowance: 0.1,
            final_gap: 0.15,
            discretization: 0.02,
            ks_level: 0.01,
            slope: 0.05,
            hill_band: 0.15,
            ecf: 3.0,
            max_flagged_fraction: 0.001,
            schedule_threshold: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub id: ExperimentId,
    pub model: ModelSpec,
    /// Defaults to a unit-mass standard Gaussian bump.
    pub test_function: Option<TestFunction>,
    pub time_grid: Vec<f64>,
    pub covariance_pairs: Vec<(f64, f64)>,
    pub z_grid: Vec<f64>,
    pub t_ladder: Vec<f64>,
    pub h_schedule: HSchedule,
    pub replicates: usize,
    /// Replicates for limit-process samplers.
    pub limit_replicates: usize,
    pub seed: u64,
    pub target: TargetNormalization,
    pub tolerances: Tolerances,
    pub knobs: SimulationKnobs,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            id: ExperimentId::Thm2_10a,
            model: ModelSpec::default(),
            test_function: None,
            time_grid: vec![0.5, 1.0],
            covariance_pairs: vec![(0.5, 0.5), (0.5, 1.0), (1.0, 1.0)],
            z_grid: vec![0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0],
            t_ladder: vec![25.0, 50.0, 100.0, 200.0],
            h_schedule: HSchedule::default(),
            replicates: 2000,
            limit_replicates: 20_000,
            seed: 1,
            target: TargetNormalization::Stated,
            tolerances: Tolerances::default(),
            knobs: SimulationKnobs::default(),
        }
    }
}

impl ExperimentSpec {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let mut spec: Self = toml::from_str(s)?;
        spec.fill_defaults();
        Ok(spec)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Replaces dimension-dependent defaults by explicit values.
    pub fn fill_defaults(&mut self) {
        if self.test_function.is_none() && self.model.d > 0 {
            self.test_function = TestFunction::standard(self.model.d, 1.0).ok();
        }
    }

    pub fn test_function(&self) -> Result<TestFunction> {
        match &self.test_function {
            Some(f) => Ok(f.clone()),
            None => Ok(TestFunction::standard(self.model.d, 1.0)?),
        }
    }

    /// The persisted form, with every default written out.
    pub fn to_toml(&self) -> String {
        let mut filled = self.clone();
        filled.fill_defaults();
        toml::to_string(&filled).expect("specification serializes")
    }

    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Checks the specification; returns warnings that do not block a run.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        let m = &self.model;
        let motion = m.motion()?;
        if !(m.beta > 0.0 && m.beta <= 1.0) {
            return Err(HarnessError::Spec(format!("beta {} outside (0, 1]", m.beta)));
        }
        validate_grid(&self.time_grid)?;
        let on_grid = |t: f64| self.time_grid.iter().any(|g| (g - t).abs() <= 1e-12);
        for &(s, t) in &self.covariance_pairs {
            if !on_grid(s) || !on_grid(t) {
                return Err(HarnessError::Spec(format!("covariance pair ({s}, {t}) is not on the time grid")));
            }
        }
        let f = self.test_function()?;
        if f.dim().is_some_and(|k| k != motion.d()) {
            return Err(HarnessError::Spec("test function dimension does not match d".into()));
        }
        if self.replicates == 0 {
            warnings.push("zero replicates requested; the bundle will be empty".into());
        }
        match self.id.regime() {
            Some(regime) => {
                let p = m.regime_params();
                regime.validate(&p)?;
                if regime.is_branching() && !(m.branching_rate > 0.0) {
                    return Err(HarnessError::Spec(format!("{} needs a positive branching rate", self.id.name())));
                }
                if !regime.is_branching() && m.branching_rate != 0.0 {
                    return Err(HarnessError::Spec(format!("{} is a system without branching; set branching_rate = 0", self.id.name())));
                }
                if !regime.is_lebesgue() {
                    let mu = m
                        .mu
                        .as_ref()
                        .ok_or_else(|| HarnessError::Spec(format!("{} needs a finite measure mu", self.id.name())))?;
                    if mu.dim() != m.d {
                        return Err(HarnessError::Spec("measure dimension does not match d".into()));
                    }
                }
                if self.t_ladder.is_empty() {
                    return Err(HarnessError::Spec("T ladder is empty".into()));
                }
                if self.t_ladder.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(HarnessError::Spec("T ladder must be strictly increasing".into()));
                }
                for &t in &self.t_ladder {
                    let h = self.h_schedule.density(t);
                    norming(regime, t, h, &p)?;
                    if !check_density_schedule(regime, t, h, &p, self.tolerances.schedule_threshold) {
                        let stat = schedule_statistic(regime, t, h, &p).unwrap_or(f64::NAN);
                        return Err(HarnessError::Spec(format!(
                            "density schedule too thin at T = {t}: statistic {stat:.4} exceeds threshold {}",
                            self.tolerances.schedule_threshold
                        )));
                    }
                }
            }
            None => {
                let kind = match self.id {
                    ExperimentId::Prop2_9 => IntegralKind::Zeta,
                    _ => IntegralKind::Xi,
                };
                if !existence_check(kind, m.d, m.alpha, m.beta) {
                    return Err(HarnessError::Core(occfluct_core::Error::DimensionCondition(format!(
                        "{} needs d < {:.6} for the {kind:?} integral, got d = {}",
                        self.id.name(),
                        kind.dimension_bound(m.alpha, m.beta),
                        m.d
                    ))));
                }
                if self.id == ExperimentId::Prop2_5 && m.beta != 1.0 {
                    return Err(HarnessError::Spec("prop2_5 is the Gaussian case; set beta = 1".into()));
                }
            }
        }
        Ok(warnings)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let s = ExperimentSpec::from_toml_str("id = \"thm2_6a\"\n").unwrap();
        let text = s.to_toml();
        assert!(text.contains("bias_allowance"));
        let back = ExperimentSpec::from_toml_str(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.hash(), s.hash());
    }

    #[test]
    fn hash_changes_with_content() {
        let a = ExperimentSpec::default();
        let mut b = a.clone();
        b.seed = 2;
        assert_ne!(a.hash(), b.hash());
    }
}
