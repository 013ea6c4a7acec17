//! Command-line interface.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use occfluct_core::density::{riesz_potential, MotionParams, TestFunction};
use occfluct_core::limits::{
    cf_xi_fdd, cf_zeta_fdd, limit_constant, normalized_limit_constant, sample_xi, sample_zeta, ConstantParams,
    IntegralKind, StableIntegralGrid,
};
use occfluct_core::regime::{norming, Regime, RegimeParams};
use occfluct_core::stable::{stable_cf, StableLawParams};

use crate::error::{HarnessError, Result};
use crate::experiment::run_experiment;
use crate::output::{fmt_f64, paths_csv, table_csv, verify_toml, write_bundle, write_text};
use crate::spec::{ExperimentId, ExperimentSpec};
use crate::verify::{verify_suite, GateContext, Level, Mutation};

#[derive(Debug, Parser)]
#[command(name = "occfluct", version, about = "Occupation-time fluctuations of branching particle systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Configuration document (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment specification.
    Simulate(Common),
    /// Sample a limit process to CSV.
    LimitSample(Common),
    /// Tabulate a characteristic function on a z-grid.
    CfEval(Common),
    /// Evaluate the Riesz potential of a test function at given points.
    Riesz(Common),
    /// Run the gate suite.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "fast")]
        level: Level,
        /// Inject a fault to check that the gates catch it.
        #[arg(long, value_enum)]
        inject: Option<Mutation>,
        /// Restrict to the named gates.
        #[arg(long, value_delimiter = ',')]
        gates: Vec<String>,
    },
    /// Print the limit constants of a regime.
    Constants(Common),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum LimitKind {
    Xi,
    Zeta,
}

impl From<LimitKind> for IntegralKind {
    fn from(k: LimitKind) -> Self {
        match k {
            LimitKind::Xi => IntegralKind::Xi,
            LimitKind::Zeta => IntegralKind::Zeta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LimitSampleConfig {
    pub kind: LimitKind,
    pub d: usize,
    pub alpha: f64,
    pub beta: f64,
    pub times: Vec<f64>,
    pub replicates: usize,
    pub seed: u64,
    /// Explicit discretization; chosen automatically when absent.
    pub grid: Option<StableIntegralGrid>,
}

impl Default for LimitSampleConfig {
    fn default() -> Self {
        Self {
            kind: LimitKind::Xi,
            d: 1,
            alpha: 2.0,
            beta: 1.0,
            times: vec![0.25, 0.5, 0.75, 1.0],
            replicates: 1000,
            seed: 1,
            grid: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CfTarget {
    Xi,
    Zeta,
    Stable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CfEvalConfig {
    pub target: CfTarget,
    pub d: usize,
    pub alpha: f64,
    pub beta: f64,
    /// Times of the finite-dimensional distribution; `z` multiplies
    /// `weights` componentwise.
    pub times: Vec<f64>,
    pub weights: Vec<f64>,
    pub z_grid: Vec<f64>,
    /// Law for `target = "stable"`.
    pub index: f64,
    pub skewness: f64,
    pub scale: f64,
    pub shift: f64,
    pub time_scale: f64,
}

impl Default for CfEvalConfig {
    fn default() -> Self {
        Self {
            target: CfTarget::Xi,
            d: 1,
            alpha: 2.0,
            beta: 0.5,
            times: vec![1.0],
            weights: vec![1.0],
            z_grid: vec![0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0],
            index: 1.5,
            skewness: 1.0,
            scale: 1.0,
            shift: 0.0,
            time_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RieszConfig {
    pub d: usize,
    pub alpha: f64,
    pub test_function: Option<TestFunction>,
    pub points: Vec<Vec<f64>>,
}

impl Default for RieszConfig {
    fn default() -> Self {
        Self {
            d: 3,
            alpha: 2.0,
            test_function: None,
            points: (0..=10).map(|k| vec![0.5 * k as f64, 0.0, 0.0]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConstantsConfig {
    pub id: ExperimentId,
    pub d: usize,
    pub alpha: f64,
    pub beta: f64,
    pub branching_rate: f64,
    pub total_mass: f64,
    /// Horizons at which the norming is printed.
    pub horizons: Vec<f64>,
    /// `H = T^exponent` for the printed normings.
    pub density_exponent: f64,
}

impl Default for ConstantsConfig {
    fn default() -> Self {
        Self {
            id: ExperimentId::Thm2_10a,
            d: 1,
            alpha: 2.0,
            beta: 1.0,
            branching_rate: 0.0,
            total_mass: 1.0,
            horizons: vec![25.0, 50.0, 100.0, 200.0],
            density_exponent: 1.0,
        }
    }
}

fn read_config<T: Default + for<'de> Deserialize<'de>>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| HarnessError::io(p, e))?;
            Ok(toml::from_str(&text)?)
        }
    }
}

fn init_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| HarnessError::Usage(format!("cannot size the worker pool: {e}")))?;
    }
    Ok(())
}

/// Runs the command; the returned code is the process exit status.
pub fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Simulate(c) => {
            init_threads(c.threads)?;
            let path = c
                .config
                .as_deref()
                .ok_or_else(|| HarnessError::Usage("simulate needs --config".into()))?;
            let mut spec = ExperimentSpec::from_path(path)?;
            if let Some(s) = c.seed {
                spec.seed = s;
            }
            let bundle = run_experiment(&spec)?;
            write_bundle(&bundle, &spec, &c.out)?;
            for w in &bundle.warnings {
                eprintln!("warning: {w}");
            }
            let failed = bundle.failures().count();
            println!(
                "{}: {} reports, {} failed, {:.1} s, spec {}",
                spec.id.name(),
                bundle.reports.len(),
                failed,
                bundle.wall_seconds,
                &bundle.spec_hash[..12]
            );
            Ok(0)
        }
        Command::LimitSample(c) => {
            init_threads(c.threads)?;
            let mut cfg: LimitSampleConfig = read_config(c.config.as_deref())?;
            if let Some(s) = c.seed {
                cfg.seed = s;
            }
            let kind: IntegralKind = cfg.kind.into();
            let t_max = cfg.times.iter().cloned().fold(0.0, f64::max);
            let g = match cfg.grid.clone() {
                Some(g) => g,
                None => StableIntegralGrid::auto(kind, cfg.d, cfg.alpha, cfg.beta, t_max)?,
            };
            let p = match kind {
                IntegralKind::Xi => sample_xi(&g, &cfg.times, cfg.replicates, cfg.seed)?,
                IntegralKind::Zeta => sample_zeta(&g, &cfg.times, cfg.replicates, cfg.seed)?,
            };
            write_text(&c.out.join("paths.csv"), &paths_csv(&p))?;
            write_text(&c.out.join("limit_sample.toml"), &toml::to_string(&cfg).expect("serializable"))?;
            Ok(0)
        }
        Command::CfEval(c) => {
            let cfg: CfEvalConfig = read_config(c.config.as_deref())?;
            if cfg.times.len() != cfg.weights.len() {
                return Err(HarnessError::Usage("times and weights differ in length".into()));
            }
            let stable = StableLawParams::new(cfg.index, cfg.skewness, cfg.scale, cfg.shift)?;
            let mut rows = Vec::with_capacity(cfg.z_grid.len());
            for &z in &cfg.z_grid {
                let zs: Vec<f64> = cfg.weights.iter().map(|w| w * z).collect();
                let v = match cfg.target {
                    CfTarget::Xi => cf_xi_fdd(cfg.d, cfg.alpha, cfg.beta, &cfg.times, &zs)?,
                    CfTarget::Zeta => cf_zeta_fdd(cfg.d, cfg.alpha, cfg.beta, &cfg.times, &zs)?,
                    CfTarget::Stable => stable_cf(&stable, cfg.time_scale, z),
                };
                rows.push(vec![z, v.re, v.im]);
            }
            write_text(&c.out.join("cf.csv"), &table_csv(&["z", "re", "im"], &rows))?;
            Ok(0)
        }
        Command::Riesz(c) => {
            let cfg: RieszConfig = read_config(c.config.as_deref())?;
            let m = MotionParams::new(cfg.d, cfg.alpha)?;
            let f = match cfg.test_function {
                Some(f) => f,
                None => TestFunction::standard(cfg.d, 0.5)?,
            };
            let mut rows = Vec::with_capacity(cfg.points.len());
            for x in &cfg.points {
                let mut row = x.clone();
                row.push(riesz_potential(&m, &f, x)?);
                rows.push(row);
            }
            let mut header: Vec<String> = (0..cfg.d).map(|i| format!("x{i}")).collect();
            header.push("value".into());
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            write_text(&c.out.join("riesz.csv"), &table_csv(&header, &rows))?;
            Ok(0)
        }
        Command::Verify {
            common,
            level,
            inject,
            gates,
        } => {
            init_threads(common.threads)?;
            let ctx = GateContext::new(level, inject, common.seed.unwrap_or(1));
            let only: Vec<&str> = gates.iter().map(String::as_str).collect();
            let outcome = verify_suite(&ctx, &only);
            write_text(&common.out.join("verify.toml"), &verify_toml(&outcome))?;
            for g in &outcome.gates {
                let verdict = if g.passed() { "pass" } else { "FAIL" };
                println!("{verdict} {} ({:.1} s)", g.name, g.wall_seconds);
                for r in g.reports.iter().filter(|r| !r.pass) {
                    println!("    {}: {} vs {}", r.name, fmt_f64(r.value), fmt_f64(r.tolerance));
                }
                if let Some(e) = &g.error {
                    println!("    error: {e}");
                }
            }
            Ok(if outcome.passed() { 0 } else { 1 })
        }
        Command::Constants(c) => {
            let cfg: ConstantsConfig = read_config(c.config.as_deref())?;
            let regime = cfg
                .id
                .regime()
                .ok_or_else(|| HarnessError::Usage(format!("{} has no particle regime", cfg.id.name())))?;
            let text = constants_text(regime, &cfg)?;
            print!("{text}");
            write_text(&c.out.join("constants.toml"), &text)?;
            Ok(0)
        }
    }
}

fn constants_text(regime: Regime, cfg: &ConstantsConfig) -> Result<String> {
    let p = ConstantParams {
        d: cfg.d,
        alpha: cfg.alpha,
        beta: cfg.beta,
        branching_rate: cfg.branching_rate,
        total_mass: cfg.total_mass,
    };
    let rp = RegimeParams {
        d: cfg.d,
        alpha: cfg.alpha,
        beta: cfg.beta,
    };
    regime.validate(&rp)?;
    let mut s = format!("id = \"{}\"\nregime = \"{regime:?}\"\n", cfg.id.name());
    match limit_constant(regime, &p) {
        Ok(k) => {
            s += &format!("constant = {}\n", fmt_f64(k));
            s += &format!("normalized_constant = {}\n", fmt_f64(normalized_limit_constant(regime, &p)?));
        }
        Err(e) => s += &format!("# no scalar constant: {e}\n"),
    }
    let rows: Vec<String> = cfg
        .horizons
        .iter()
        .map(|&t| -> Result<String> {
            let f = norming(regime, t, t.powf(cfg.density_exponent), &rp)?;
            Ok(format!("[{}, {}]", fmt_f64(t), fmt_f64(f)))
        })
        .collect::<Result<_>>()?;
    s += &format!("norming = [{}]\n", rows.join(", "));
    Ok(s)
}
