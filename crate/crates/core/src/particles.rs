//! Monte Carlo simulation of the branching particle system and of its
//! rescaled, centered occupation-time functional.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma;

use crate::density::{
    expected_test_value, increment_radius_quantile, norm, sample_increment_into, FiniteMeasureSpec,
    MotionParams, TestFunction,
};
use crate::error::{invalid, Error, Result};
use crate::quad::{integrate, integrate_with_breaks, QuadOptions};
use crate::regime::{Regime, RegimeParams};
use crate::rng::{domain, replicate_stream, StreamRng};
use crate::special::sphere_area;
use crate::stable::{sample_offspring, OffspringLaw};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Intensity {
    /// `H λ` restricted to the cube `[−R, R]^d`.
    LebesgueHighDensity { density: f64, truncation_radius: f64 },
    /// `H μ` for a finite measure `μ`.
    FiniteHighDensity { density: f64, mu: FiniteMeasureSpec },
}

impl Intensity {
    pub fn density(&self) -> f64 {
        match self {
            Self::LebesgueHighDensity { density, .. } | Self::FiniteHighDensity { density, .. } => *density,
        }
    }

    pub fn is_lebesgue(&self) -> bool {
        matches!(self, Self::LebesgueHighDensity { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationKnobs {
    /// Occupation sub-step; `None` means `T / 2000`.
    pub occupation_step: Option<f64>,
    /// Maximum number of individuals in one lineage tree.
    pub population_cap: usize,
    /// Largest admissible expected initial population.
    pub initial_count_cap: f64,
    /// Radius around the origin beyond which the test function is treated
    /// as zero when fast-forwarding distant Brownian particles. `None`
    /// derives it from the test function.
    pub observation_radius: Option<f64>,
    /// Fault injection: offspring mass moved from 0 to 1 child.
    pub forced_p1: f64,
    /// Fault injection: report uncentered occupation times.
    pub drop_centering: bool,
}

impl Default for SimulationKnobs {
    fn default() -> Self {
        Self {
            occupation_step: None,
            population_cap: 10_000_000,
            initial_count_cap: 5.0e7,
            observation_radius: None,
            forced_p1: 0.0,
            drop_centering: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub motion: MotionParams,
    pub beta: f64,
    pub branching_rate: f64,
    pub intensity: Intensity,
    pub horizon: f64,
    #[serde(default)]
    pub knobs: SimulationKnobs,
}

impl ModelConfig {
    pub fn new(motion: MotionParams, beta: f64, branching_rate: f64, intensity: Intensity, horizon: f64) -> Result<Self> {
        let cfg = Self {
            motion,
            beta,
            branching_rate,
            intensity,
            horizon,
            knobs: SimulationKnobs::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        MotionParams::new(self.motion.d(), self.motion.alpha())?;
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(invalid(format!("beta {} outside (0, 1]", self.beta)));
        }
        if !(self.branching_rate >= 0.0) || !self.branching_rate.is_finite() {
            return Err(invalid("branching rate must be finite and >= 0"));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(invalid("horizon must be positive"));
        }
        match &self.intensity {
            Intensity::LebesgueHighDensity {
                density,
                truncation_radius,
            } => {
                if !(*density > 0.0) || !(*truncation_radius > 0.0) {
                    return Err(invalid("density and truncation radius must be positive"));
                }
            }
            Intensity::FiniteHighDensity { density, mu } => {
                if !(*density > 0.0) {
                    return Err(invalid("density must be positive"));
                }
                if mu.dim() != self.motion.d() {
                    return Err(invalid("measure dimension does not match the motion"));
                }
            }
        }
        if let Some(s) = self.knobs.occupation_step {
            if !(s > 0.0) {
                return Err(invalid("occupation step must be positive"));
            }
        }
        if self.knobs.population_cap == 0 {
            return Err(invalid("population cap must be positive"));
        }
        Ok(())
    }

    pub fn offspring_law(&self) -> Result<OffspringLaw> {
        if self.knobs.forced_p1 > 0.0 {
            OffspringLaw::with_forced_p1(self.beta, self.knobs.forced_p1)
        } else {
            OffspringLaw::new(self.beta)
        }
    }

    pub fn occupation_step(&self) -> f64 {
        self.knobs.occupation_step.unwrap_or(self.horizon / 2000.0)
    }

    pub fn regime_params(&self) -> RegimeParams {
        RegimeParams {
            d: self.motion.d(),
            alpha: self.motion.alpha(),
            beta: self.beta,
        }
    }

    /// Regime matching the configuration's family and dimension.
    pub fn regime(&self) -> Regime {
        Regime::classify(self.branching_rate > 0.0, self.intensity.is_lebesgue(), &self.regime_params())
    }
}

/// One individual of a lineage, as recorded by a tracing sink.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub birth_time: f64,
    pub position_at_birth: Vec<f64>,
    pub death_time: f64,
    pub offspring_count: u64,
    pub parent: Option<usize>,
}

/// Paths of a real-valued functional on a time grid, one row per replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledProcess {
    pub time_grid: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub flagged: Vec<bool>,
    pub meta: ProcessMeta,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProcessMeta {
    pub label: String,
    pub config: Option<ModelConfig>,
    pub test_function: Option<TestFunction>,
    pub norming: Option<f64>,
    pub diagnostics: Vec<(String, f64)>,
}

impl SampledProcess {
    pub fn new(time_grid: Vec<f64>, values: Vec<Vec<f64>>, label: impl Into<String>) -> Self {
        let n = values.len();
        Self {
            time_grid,
            values,
            flagged: vec![false; n],
            meta: ProcessMeta {
                label: label.into(),
                ..ProcessMeta::default()
            },
        }
    }

    pub fn n_replicates(&self) -> usize {
        self.values.len()
    }

    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.time_grid
            .iter()
            .position(|&g| (g - t).abs() <= 1e-12 * g.abs().max(1.0))
    }

    /// Values at grid index `j` over unflagged replicates.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values
            .iter()
            .zip(&self.flagged)
            .filter(|(_, f)| !**f)
            .map(|(row, _)| row[j])
            .collect()
    }

    pub fn flagged_fraction(&self) -> f64 {
        if self.flagged.is_empty() {
            return 0.0;
        }
        self.flagged.iter().filter(|f| **f).count() as f64 / self.flagged.len() as f64
    }
}

pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(invalid("time grid is empty"));
    }
    if grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(invalid("time grid must lie in [0, 1]"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("time grid must be strictly increasing"));
    }
    Ok(())
}

/// Initial Poisson configuration.
pub fn sample_initial<R: Rng + ?Sized>(cfg: &ModelConfig, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    let d = cfg.motion.d();
    let (mean, lebesgue_r) = match &cfg.intensity {
        Intensity::LebesgueHighDensity {
            density,
            truncation_radius,
        } => (density * (2.0 * truncation_radius).powi(d as i32), Some(*truncation_radius)),
        Intensity::FiniteHighDensity { density, mu } => (density * mu.total_mass(), None),
    };
    if mean > cfg.knobs.initial_count_cap {
        return Err(Error::ResourceLimit(format!(
            "expected initial population {mean:.3e} exceeds cap {:.3e}",
            cfg.knobs.initial_count_cap
        )));
    }
    if mean <= 0.0 {
        return Ok(Vec::new());
    }
    let count = Poisson::new(mean)
        .map_err(|e| Error::Numerical(format!("poisson mean {mean}: {e}")))?
        .sample(rng) as usize;
    let mut out = Vec::with_capacity(count);
    match (&cfg.intensity, lebesgue_r) {
        (_, Some(r)) => {
            for _ in 0..count {
                out.push((0..d).map(|_| r * (2.0 * rng.random::<f64>() - 1.0)).collect());
            }
        }
        (Intensity::FiniteHighDensity { mu, .. }, None) => {
            for _ in 0..count {
                out.push(mu.sample_point(rng));
            }
        }
        _ => unreachable!(),
    }
    Ok(out)
}

/// Standard deviations of Brownian excursion kept clear of the observation
/// ball when fast-forwarding.
const FAR_SIGMAS: f64 = 9.0;

/// Bumps with precomputed normalization: `(amplitude · norm, center, 1 / (2 width))`.
#[derive(Debug, Clone)]
struct CompiledTestFunction {
    bumps: Vec<(f64, Vec<f64>, f64)>,
}

impl CompiledTestFunction {
    fn new(f: &TestFunction) -> Self {
        let bumps = f
            .bumps()
            .iter()
            .map(|b| {
                let d = b.center.len() as f64;
                let c = b.amplitude * (2.0 * std::f64::consts::PI * b.width).powf(-d / 2.0);
                (c, b.center.clone(), 0.5 / b.width)
            })
            .collect();
        Self { bumps }
    }

    #[inline]
    fn eval(&self, x: &[f64]) -> f64 {
        let mut v = 0.0;
        for (c, center, k) in &self.bumps {
            let mut r2 = 0.0;
            for (a, b) in x.iter().zip(center) {
                r2 += (a - b) * (a - b);
            }
            v += c * (-r2 * k).exp();
        }
        v
    }
}

/// Accumulates occupation integrals of one replicate on an absolute time grid.
#[derive(Debug, Clone)]
pub struct OccupationSink {
    grid: Vec<f64>,
    f: CompiledTestFunction,
    step: f64,
    observation_radius: f64,
    fast_forward: bool,
    /// `∫ ⟨N_s, φ⟩ ds` over `(grid[j−1], grid[j]]`, with `grid[−1] = 0`.
    pub increments: Vec<f64>,
    /// `⟨N_s, φ⟩` at each grid time.
    pub snapshot: Vec<f64>,
    /// Individuals alive at each grid time.
    pub alive: Vec<u64>,
    pub individuals: u64,
    /// Offspring-count frequencies; the last bin collects all larger counts.
    pub offspring_histogram: Vec<u64>,
    pub trace: Option<Vec<Particle>>,
}

impl OccupationSink {
    /// `grid` holds absolute times in `[0, T]`.
    pub fn new(cfg: &ModelConfig, f: &TestFunction, grid: Vec<f64>) -> Self {
        let n = grid.len();
        let observation_radius = cfg
            .knobs
            .observation_radius
            .unwrap_or_else(|| f.effective_radius(1e-15));
        Self {
            grid,
            f: CompiledTestFunction::new(f),
            step: cfg.occupation_step(),
            observation_radius,
            fast_forward: cfg.motion.alpha() == 2.0,
            increments: vec![0.0; n],
            snapshot: vec![0.0; n],
            alive: vec![0; n],
            individuals: 0,
            offspring_histogram: vec![0; 16],
            trace: None,
        }
    }

    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    pub fn end(&self) -> f64 {
        self.grid.last().copied().unwrap_or(0.0)
    }

    /// Cumulative occupation `∫_0^{grid[j]} ⟨N_s, φ⟩ ds`.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.increments
            .iter()
            .map(|v| {
                acc += v;
                acc
            })
            .collect()
    }

    fn count_alive(&mut self, birth: f64, death: f64) {
        let lo = self.grid.partition_point(|&g| g < birth);
        let hi = self.grid.partition_point(|&g| g < death);
        for a in &mut self.alive[lo..hi] {
            *a += 1;
        }
    }

    /// Moves one individual from `birth` to `end` (exclusive of any death
    /// event), accumulating the trapezoid occupation integral.
    fn live<R: Rng + ?Sized>(&mut self, m: &MotionParams, birth: f64, end: f64, pos: &mut [f64], scratch: &mut [f64], rng: &mut R) {
        let d = pos.len();
        let step = self.step;
        let brownian = m.alpha() == 2.0;
        let full_scale = (2.0 * step).sqrt();
        let near2 = if self.fast_forward {
            let r = self.observation_radius + FAR_SIGMAS * (2.0 * d as f64 * step).sqrt();
            r * r
        } else {
            f64::INFINITY
        };
        let mut s = birth;
        let mut gi = self.grid.partition_point(|&g| g < s);
        let mut fs: Option<f64> = None;
        if gi < self.grid.len() && self.grid[gi] == s {
            let v = self.f.eval(pos);
            self.snapshot[gi] += v;
            fs = Some(v);
            gi += 1;
        }
        let lattice_after = |s: f64| {
            let mut k = (s / step).floor() as u64 + 1;
            while (k as f64) * step <= s {
                k += 1;
            }
            k
        };
        let mut k = 0;
        while s < end {
            if pos.iter().map(|x| x * x).sum::<f64>() > near2 {
                let gap = norm(pos) - self.observation_radius;
                let safe = (gap / FAR_SIGMAS).powi(2) / (2.0 * d as f64);
                if safe >= step {
                    let target = (s + safe).min(end);
                    sample_increment_into(m, target - s, rng, scratch);
                    for (p, dx) in pos.iter_mut().zip(scratch.iter()) {
                        *p += dx;
                    }
                    s = target;
                    gi = self.grid.partition_point(|&g| g <= s);
                    fs = None;
                    k = 0;
                    continue;
                }
            }
            if k == 0 {
                k = lattice_after(s);
            }
            let lat = k as f64 * step;
            let mut next = lat;
            if gi < self.grid.len() && self.grid[gi] < next {
                next = self.grid[gi];
            }
            if end < next {
                next = end;
            }
            if next == lat {
                k += 1;
            }
            let f_s = match fs {
                Some(v) => v,
                None => self.f.eval(pos),
            };
            if brownian {
                let scale = if next - s == step { full_scale } else { (2.0 * (next - s)).sqrt() };
                for p in pos.iter_mut() {
                    let z: f64 = StandardNormal.sample(rng);
                    *p += scale * z;
                }
            } else {
                sample_increment_into(m, next - s, rng, scratch);
                for (p, dx) in pos.iter_mut().zip(scratch.iter()) {
                    *p += dx;
                }
            }
            let f_n = self.f.eval(pos);
            if gi < self.grid.len() {
                self.increments[gi] += 0.5 * (f_s + f_n) * (next - s);
                if self.grid[gi] == next {
                    if next < end || end == self.end() {
                        self.snapshot[gi] += f_n;
                    }
                    gi += 1;
                }
            }
            s = next;
            fs = Some(f_n);
        }
    }
}

/// Simulates the lineage of one particle born at `start` at time `t0`,
/// depth-first, adding its occupation integrals to `sink`.
pub fn simulate_lineage<R: Rng + ?Sized>(
    cfg: &ModelConfig,
    start: &[f64],
    t0: f64,
    rng: &mut R,
    sink: &mut OccupationSink,
) -> Result<()> {
    let law = cfg.offspring_law()?;
    simulate_lineage_with(cfg, &law, start, t0, rng, sink)
}

fn simulate_lineage_with<R: Rng + ?Sized>(
    cfg: &ModelConfig,
    law: &OffspringLaw,
    start: &[f64],
    t0: f64,
    rng: &mut R,
    sink: &mut OccupationSink,
) -> Result<()> {
    let d = cfg.motion.d();
    if start.len() != d {
        return Err(invalid("start point has the wrong dimension"));
    }
    if !(0.0..=cfg.horizon).contains(&t0) {
        return Err(invalid(format!("start time {t0} outside [0, T]")));
    }
    let end = sink.end();
    let v = cfg.branching_rate;
    let cap = cfg.knobs.population_cap as u64;
    let mut times: Vec<f64> = vec![t0];
    let mut parents: Vec<Option<usize>> = vec![None];
    let mut positions: Vec<f64> = start.to_vec();
    let mut pos = vec![0.0; d];
    let mut scratch = vec![0.0; d];
    let mut count: u64 = 0;
    while let Some(birth) = times.pop() {
        let parent = parents.pop().flatten();
        let at = positions.len() - d;
        pos.copy_from_slice(&positions[at..]);
        positions.truncate(at);
        count += 1;
        if count > cap {
            return Err(Error::PopulationCap {
                cap: cfg.knobs.population_cap,
            });
        }
        sink.individuals += 1;
        let death = if v > 0.0 {
            let e: f64 = Exp1.sample(rng);
            birth + e / v
        } else {
            f64::INFINITY
        };
        let birth_pos = sink.trace.as_ref().map(|_| pos.clone());
        sink.count_alive(birth, death);
        let life_end = death.min(end);
        if birth < end {
            sink.live(&cfg.motion, birth, life_end, &mut pos, &mut scratch, rng);
        }
        let mut k = 0;
        if death < end {
            k = sample_offspring(law, rng);
            let bin = (k as usize).min(sink.offspring_histogram.len() - 1);
            sink.offspring_histogram[bin] += 1;
        }
        let id = if let Some(trace) = sink.trace.as_mut() {
            trace.push(Particle {
                birth_time: birth,
                position_at_birth: birth_pos.unwrap_or_default(),
                death_time: death,
                offspring_count: k,
                parent,
            });
            Some(trace.len() - 1)
        } else {
            None
        };
        for _ in 0..k {
            times.push(death);
            parents.push(id);
            positions.extend_from_slice(&pos);
        }
    }
    Ok(())
}

/// Raw output of one replicate.
#[derive(Debug, Clone)]
pub struct ReplicateOutcome {
    pub initial: usize,
    /// `∫_0^{T t_j} ⟨N_s, φ⟩ ds`.
    pub occupation: Vec<f64>,
    pub snapshot: Vec<f64>,
    pub alive: Vec<u64>,
    pub individuals: u64,
    pub offspring_histogram: Vec<u64>,
    pub flagged: bool,
}

/// Runs replicate `index` of the stream family `seed`.
pub fn simulate_replicate(cfg: &ModelConfig, f: &TestFunction, grid: &[f64], seed: u64, index: u64) -> Result<ReplicateOutcome> {
    let law = cfg.offspring_law()?;
    let mut rng: StreamRng = replicate_stream(seed, domain::PARTICLES, index);
    let abs: Vec<f64> = grid.iter().map(|t| t * cfg.horizon).collect();
    let mut sink = OccupationSink::new(cfg, f, abs);
    let initial = sample_initial(cfg, &mut rng)?;
    let mut flagged = false;
    for x in &initial {
        match simulate_lineage_with(cfg, &law, x, 0.0, &mut rng, &mut sink) {
            Ok(()) => {}
            Err(Error::PopulationCap { .. }) => {
                flagged = true;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(ReplicateOutcome {
        initial: initial.len(),
        occupation: sink.cumulative(),
        snapshot: sink.snapshot,
        alive: sink.alive,
        individuals: sink.individuals,
        offspring_histogram: sink.offspring_histogram,
        flagged,
    })
}

/// `∫_0^{T t_j} E⟨N_s, φ⟩ ds` for each grid time.
pub fn expected_occupation(cfg: &ModelConfig, f: &TestFunction, grid: &[f64]) -> Result<Vec<f64>> {
    match &cfg.intensity {
        Intensity::LebesgueHighDensity { density, .. } => {
            Ok(grid.iter().map(|t| density * f.integral() * cfg.horizon * t).collect())
        }
        Intensity::FiniteHighDensity { density, mu } => {
            let m = cfg.motion;
            let opts = QuadOptions::new(1e-13, 1e-11);
            let mut out = Vec::with_capacity(grid.len());
            let mut acc = 0.0;
            let mut prev = 0.0;
            let mut failure = None;
            for &t in grid {
                let s1 = t * cfg.horizon;
                // graded breaks resolve the early-time peak of T_s φ
                let breaks: Vec<f64> = (0..30).map(|k| prev + (s1 - prev) * 0.5f64.powi(k)).collect();
                let r = integrate_with_breaks(
                    |s| match expected_test_value(mu, &m, s, f) {
                        Ok(v) => v,
                        Err(e) => {
                            failure.get_or_insert(e);
                            0.0
                        }
                    },
                    prev,
                    s1,
                    &breaks,
                    opts,
                );
                acc += r.value;
                out.push(density * acc);
                prev = s1;
            }
            match failure {
                Some(e) => Err(e),
                None => Ok(out),
            }
        }
    }
}

/// `⟨X_T(t), φ⟩ = F_T^{−1} [∫_0^{Tt} ⟨N_s, φ⟩ ds − ∫_0^{Tt} E⟨N_s, φ⟩ ds]` on
/// `grid`, one row per replicate; capped replicates are flagged and hold NaN.
pub fn occupation_fluctuation(
    cfg: &ModelConfig,
    f: &TestFunction,
    grid: &[f64],
    norming: f64,
    n_replicates: usize,
    seed: u64,
) -> Result<SampledProcess> {
    cfg.validate()?;
    validate_grid(grid)?;
    if !(norming > 0.0) {
        return Err(invalid("norming must be positive"));
    }
    if f.dim().is_some_and(|d| d != cfg.motion.d()) {
        return Err(invalid("test function dimension does not match the motion"));
    }
    let centering = if cfg.knobs.drop_centering {
        vec![0.0; grid.len()]
    } else {
        expected_occupation(cfg, f, grid)?
    };
    let outcomes: Vec<Result<ReplicateOutcome>> = (0..n_replicates as u64)
        .into_par_iter()
        .map(|i| simulate_replicate(cfg, f, grid, seed, i))
        .collect();
    let mut values = Vec::with_capacity(n_replicates);
    let mut flagged = Vec::with_capacity(n_replicates);
    let mut individuals = 0u64;
    for o in outcomes {
        let o = o?;
        individuals += o.individuals;
        if o.flagged {
            values.push(vec![f64::NAN; grid.len()]);
        } else {
            values.push(
                o.occupation
                    .iter()
                    .zip(&centering)
                    .map(|(x, c)| (x - c) / norming)
                    .collect(),
            );
        }
        flagged.push(o.flagged);
    }
    let mut diagnostics = vec![("individuals".to_string(), individuals as f64)];
    if let Intensity::LebesgueHighDensity { .. } = cfg.intensity {
        diagnostics.push(("truncation_bias".to_string(), truncation_bias(cfg, f)));
    }
    Ok(SampledProcess {
        time_grid: grid.to_vec(),
        values,
        flagged,
        meta: ProcessMeta {
            label: "occupation_fluctuation".into(),
            config: Some(cfg.clone()),
            test_function: Some(f.clone()),
            norming: Some(norming),
            diagnostics,
        },
    })
}

/// Truncation radius `r_φ + c T^{1/α} q`, with `q` the unit-time increment
/// radius exceeded with probability `10^{−6}` divided by the expected
/// initial population.
pub fn suggest_truncation_radius(m: &MotionParams, horizon: f64, f: &TestFunction, density: f64, c: f64) -> f64 {
    let r_phi = f.effective_radius(1e-6);
    let d = m.d() as i32;
    let mut r = r_phi + c * horizon.powf(1.0 / m.alpha());
    for _ in 0..4 {
        let pop = (density * (2.0 * r).powi(d)).max(1.0);
        let q = increment_radius_quantile(m, 1.0, 1e-6 / pop);
        r = r_phi + c * horizon.powf(1.0 / m.alpha()) * q;
    }
    r
}

/// Expected occupation lost to the truncation cube, relative to the full
/// expected occupation `H ⟨λ, φ⟩ T`. Exact for α = 2; a power-tail
/// estimate otherwise. Zero for finite intensities.
pub fn truncation_bias(cfg: &ModelConfig, f: &TestFunction) -> f64 {
    let Intensity::LebesgueHighDensity { truncation_radius, .. } = cfg.intensity else {
        return 0.0;
    };
    let r = truncation_radius;
    let m = cfg.motion;
    let t_end = cfg.horizon;
    let total = f.integral().abs();
    if total == 0.0 {
        return 0.0;
    }
    let mut lost = 0.0;
    for b in f.bumps() {
        let miss = |s: f64| -> f64 {
            if m.alpha() == 2.0 {
                let z = (b.width + 2.0 * s).sqrt() * std::f64::consts::SQRT_2;
                let log_inside: f64 = b
                    .center
                    .iter()
                    .map(|c| {
                        let out = 0.5 * (erfc((r - c) / z) + erfc((r + c) / z));
                        (-out.min(1.0)).ln_1p()
                    })
                    .sum();
                -log_inside.exp_m1()
            } else {
                let a = m.alpha();
                let d = m.d() as f64;
                let tail = a * 2f64.powf(a - 1.0) * gamma((a + d) / 2.0)
                    / (std::f64::consts::PI.powf(d / 2.0) * gamma(1.0 - a / 2.0))
                    * sphere_area(m.d())
                    / a;
                let gap = (r - norm(&b.center)).max(1e-300);
                (tail * s * gap.powf(-a)).min(1.0)
            }
        };
        lost += b.amplitude.abs() * integrate(miss, 0.0, t_end, QuadOptions::new(1e-16, 1e-8)).value;
    }
    lost / (total * t_end)
}
