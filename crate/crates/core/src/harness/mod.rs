//! Run configuration, the fit pipeline, and on-disk artifacts.
//!
//! Data are standardized per dimension before fitting, so the base prior,
//! the repulsion and the calibrated `tau` all live on a unit scale; draws
//! and summaries are mapped back to the original units before they are
//! written.

pub mod suites;

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, OnceLock};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calibration::{calibrate_tau, CalibrationOptions, CalibrationResult};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{mixture_density, validate_config, BasePrior, Component, MixtureConfig, Violation};
use crate::postprocess::{relabel_stephens, summarize, DensityOracle, SummaryReport, Truth};
use crate::repulsion::{Case, Combiner, RepulsionSpec};
use crate::sampler::{run_chain, McmcConfig, PosteriorDraws};
use crate::synthdata::{generate, Scenario, ScenarioSpec, TruthDensity};

/// Where the observations come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputSpec {
    Path(PathBuf),
    Scenario(ScenarioSpec),
}

/// `"auto"` or a fixed positive value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauSetting {
    Auto,
    Value(f64),
}

impl Serialize for TauSetting {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            TauSetting::Auto => s.serialize_str("auto"),
            TauSetting::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for TauSetting {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(TauSetting::Value(v)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

impl std::str::FromStr for TauSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(TauSetting::Auto);
        }
        match s.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(TauSetting::Value(v)),
            _ => Err(Error::input(format!("tau must be \"auto\" or a positive number, got {s:?}"))),
        }
    }
}

/// Base-prior fields that replace the empirical defaults. Values refer to
/// the standardized scale.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorOverrides {
    pub mean_loc: Option<f64>,
    pub mean_var: Option<f64>,
    pub var_shape: Option<f64>,
    pub var_scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub input: InputSpec,
    pub k: usize,
    pub alpha: Option<Vec<f64>>,
    pub prior: PriorOverrides,
    pub repulsive: bool,
    pub case: Case,
    pub combiner: Combiner,
    pub tau: TauSetting,
    pub nu: Option<u32>,
    /// Separation constant used when `tau` is calibrated.
    pub separation_c: f64,
    pub calibration_samples: usize,
    pub calibration_seed: u64,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub chains: usize,
    /// True number of clusters, for extra-weight summaries.
    pub k0: Option<usize>,
    pub relabel_sweeps: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mcmc = McmcConfig::default();
        RunConfig {
            input: InputSpec::Scenario(ScenarioSpec { id: Scenario::Ia, n: 1000, seed: 0 }),
            k: 6,
            alpha: None,
            prior: PriorOverrides::default(),
            repulsive: true,
            case: Case::LocationOnly,
            combiner: Combiner::Min,
            tau: TauSetting::Auto,
            nu: None,
            separation_c: 4.0,
            calibration_samples: 10_000,
            calibration_seed: 0,
            iterations: mcmc.iterations,
            burn_in: mcmc.burn_in,
            thin: mcmc.thin,
            seed: 0,
            chains: 1,
            k0: None,
            relabel_sweeps: 100,
        }
    }
}

impl RunConfig {
    pub fn nu(&self) -> u32 {
        self.nu.unwrap_or_else(|| RepulsionSpec::default_nu(self.case))
    }

    pub fn mcmc(&self, chain: usize) -> McmcConfig {
        McmcConfig {
            iterations: self.iterations,
            burn_in: self.burn_in,
            thin: self.thin,
            seed: chain_seed(self.seed, chain),
            repulsive: self.repulsive,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::input("k must be at least 1"));
        }
        if self.chains == 0 {
            return Err(Error::input("chains must be at least 1"));
        }
        if let Some(a) = &self.alpha {
            if a.len() != self.k {
                return Err(Error::input(format!("alpha has {} entries but k = {}", a.len(), self.k)));
            }
        }
        if let TauSetting::Value(v) = self.tau {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::input("tau must be positive"));
            }
        }
        if let InputSpec::Path(p) = &self.input {
            if !p.exists() {
                return Err(Error::input(format!(
                    "input file {} does not exist; expected CSV with columns y1..ym and an optional label column",
                    p.display()
                )));
            }
        }
        self.mcmc(0).validate()
    }

    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

/// Seed of chain `c`; streams separate chains drawn from one master seed.
pub fn chain_seed(seed: u64, chain: usize) -> u64 {
    seed.wrapping_add(chain as u64)
}

fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1 + chain as u64);
    rng
}

/// Loaded data with the affine map to the fitting scale.
#[derive(Debug)]
pub struct Prepared {
    pub raw: Dataset,
    pub scaled: Dataset,
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
    pub truth: Option<TruthDensity>,
}

pub fn prepare(input: &InputSpec) -> Result<Prepared> {
    let (raw, truth) = match input {
        InputSpec::Path(p) => (Dataset::load(p)?, None),
        InputSpec::Scenario(s) => {
            let (d, t) = generate(s)?;
            (d, Some(t))
        }
    };
    if raw.is_empty() {
        return Err(Error::input("dataset has no rows"));
    }
    let (shift, var) = raw.column_moments();
    let scale: Vec<f64> = var.iter().map(|v| if *v > 0.0 { v.sqrt() } else { 1.0 }).collect();
    let scaled = raw.standardized(&shift, &scale);
    Ok(Prepared { raw, scaled, shift, scale, truth })
}

pub fn base_prior(cfg: &RunConfig, scaled: &Dataset) -> BasePrior {
    let mut p = BasePrior::empirical(scaled);
    let m = scaled.dim();
    if let Some(v) = cfg.prior.mean_loc {
        p.mean_loc = vec![v; m];
    }
    if let Some(v) = cfg.prior.mean_var {
        p.mean_var = vec![v; m];
    }
    if let Some(v) = cfg.prior.var_shape {
        p.var_shape = v;
    }
    if let Some(v) = cfg.prior.var_scale {
        p.var_scale = vec![v; m];
    }
    p
}

fn calibration_cache() -> &'static Mutex<HashMap<String, CalibrationResult>> {
    static CACHE: OnceLock<Mutex<HashMap<String, CalibrationResult>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Calibrates `tau`, reusing results for identical requests in this process.
pub fn calibrate_cached(prior: &BasePrior, case: Case, k: usize, opts: &CalibrationOptions) -> Result<CalibrationResult> {
    let key = serde_json::to_string(&(prior, case, k, opts)).expect("key serializes");
    if let Some(r) = calibration_cache().lock().expect("cache lock").get(&key) {
        return Ok(r.clone());
    }
    let r = calibrate_tau(prior, case, k, opts)?;
    calibration_cache().lock().expect("cache lock").insert(key, r.clone());
    Ok(r)
}

/// Forgets cached calibrations.
pub fn clear_calibration_cache() {
    calibration_cache().lock().expect("cache lock").clear();
}

pub fn calibration_options(cfg: &RunConfig) -> CalibrationOptions {
    let mut o = CalibrationOptions::new(cfg.case);
    o.c = cfg.separation_c;
    o.nu = cfg.nu();
    o.combiner = cfg.combiner;
    o.n_mc = cfg.calibration_samples;
    o.seed = cfg.calibration_seed;
    o
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config: RunConfig,
    pub config_sha256: String,
    pub chain_seeds: Vec<u64>,
    pub repulsive: bool,
    pub tau: Option<f64>,
    pub nu: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationResult>,
    pub warnings: Vec<Violation>,
    pub standardization: Standardization,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

#[derive(Debug)]
pub struct FitOutcome {
    /// Relabeled draws on the original scale.
    pub draws: PosteriorDraws,
    pub summary: SummaryReport,
    pub manifest: Manifest,
    pub prepared: Prepared,
}

fn to_original(d: &mut PosteriorDraws, shift: &[f64], scale: &[f64]) {
    for draw in &mut d.draws {
        for c in &mut draw.components {
            for dim in 0..c.mean.len() {
                c.mean[dim] = shift[dim] + scale[dim] * c.mean[dim];
                c.var[dim] *= scale[dim] * scale[dim];
            }
        }
    }
}

/// Runs calibration (if requested), all chains, relabeling and summaries.
pub fn fit(cfg: &RunConfig) -> Result<FitOutcome> {
    let started = Instant::now();
    cfg.validate()?;
    let prepared = prepare(&cfg.input)?;
    let m = prepared.scaled.dim();
    let mix = match &cfg.alpha {
        Some(a) => MixtureConfig::with_alpha(cfg.k, m, a.clone()),
        None => MixtureConfig::new(cfg.k, m),
    };
    let prior = base_prior(cfg, &prepared.scaled);
    let violations = validate_config(&mix, &prior);
    if let Some(v) = violations.iter().find(|v| !v.warning) {
        return Err(Error::input(format!("{}: {}", v.field, v.message)));
    }

    let (tau, calibration) = match (cfg.repulsive, cfg.tau) {
        (false, _) => (None, None),
        (true, TauSetting::Value(v)) => (Some(v), None),
        (true, TauSetting::Auto) if cfg.k < 2 => (Some(1.0), None),
        (true, TauSetting::Auto) => {
            let r = calibrate_cached(&prior, cfg.case, cfg.k, &calibration_options(cfg))?;
            (Some(r.tau_star), Some(r))
        }
    };
    let spec = RepulsionSpec::new(cfg.case, cfg.combiner, tau.unwrap_or(1.0), cfg.nu())?;

    let chains: Vec<PosteriorDraws> = (0..cfg.chains)
        .into_par_iter()
        .map(|c| {
            let mcmc = cfg.mcmc(c);
            let mut rng = chain_rng(mcmc.seed, c);
            run_chain(&prepared.scaled, &mcmc, &mix, &prior, &spec, &mut rng)
        })
        .collect::<Result<_>>()?;
    let merged = PosteriorDraws::merge(chains)?;
    let mut relabeled = relabel_stephens(&merged, &prepared.scaled, cfg.relabel_sweeps);
    to_original(&mut relabeled.draws, &prepared.shift, &prepared.scale);

    let k0 = cfg.k0.or(prepared.truth.as_ref().map(TruthDensity::k0));
    let truth = Truth {
        density: prepared.truth.as_ref().map(|t| t as &dyn DensityOracle),
        labels: if prepared.truth.is_some() { prepared.raw.labels.as_deref() } else { None },
        k0,
    };
    let summary = summarize(&relabeled, truth)?;

    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        config_sha256: cfg.digest(),
        chain_seeds: (0..cfg.chains).map(|c| chain_seed(cfg.seed, c)).collect(),
        repulsive: cfg.repulsive,
        tau,
        nu: cfg.nu(),
        calibration,
        warnings: violations,
        standardization: Standardization { shift: prepared.shift.clone(), scale: prepared.scale.clone() },
        wall_time_secs: started.elapsed().as_secs_f64(),
    };
    Ok(FitOutcome { draws: relabeled.draws, summary, manifest, prepared })
}

fn posterior_mean_density(draws: &PosteriorDraws, y: &[f64]) -> f64 {
    let t = draws.len().max(1) as f64;
    draws.draws.iter().map(|d| mixture_density(&d.weights, &d.components, y)).sum::<f64>() / t
}

fn marginal(comps: &[Component], dim: usize) -> Vec<Component> {
    comps
        .iter()
        .map(|c| Component { mean: vec![c.mean[dim]], var: vec![c.var[dim]] })
        .collect()
}

/// Grid of the posterior mean density, with the true density when known.
/// One and two dimensions give the joint density; higher dimensions give
/// per-coordinate marginals in long format.
pub fn write_density_grid(path: &Path, out: &FitOutcome) -> Result<()> {
    let raw = &out.prepared.raw;
    let m = raw.dim();
    let mut w = csv::Writer::from_path(path)?;
    let truth = out.prepared.truth.as_ref();
    let range = |dim: usize| {
        let (lo, hi) = raw
            .rows()
            .map(|r| r[dim])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
        let pad = 0.1 * (hi - lo).max(1e-9);
        (lo - pad, hi + pad)
    };
    let axis = |dim: usize, pts: usize| {
        let (lo, hi) = range(dim);
        (0..pts).map(move |i| lo + (hi - lo) * i as f64 / (pts - 1) as f64)
    };
    match m {
        1 | 2 => {
            let mut header: Vec<String> = (1..=m).map(|d| format!("y{d}")).collect();
            header.push("density".into());
            if truth.is_some() {
                header.push("truth".into());
            }
            w.write_record(&header)?;
            let pts: Vec<Vec<f64>> = if m == 1 {
                axis(0, 512).map(|x| vec![x]).collect()
            } else {
                axis(0, 100).flat_map(|x| axis(1, 100).map(move |y| vec![x, y])).collect()
            };
            for y in pts {
                let mut rec: Vec<String> = y.iter().map(f64::to_string).collect();
                rec.push(posterior_mean_density(&out.draws, &y).to_string());
                if let Some(t) = truth {
                    rec.push(t.pdf(&y).to_string());
                }
                w.write_record(&rec)?;
            }
        }
        _ => {
            w.write_record(["dim", "y", "density"])?;
            for dim in 0..m {
                let t = out.draws.len().max(1) as f64;
                for x in axis(dim, 256) {
                    let dens = out
                        .draws
                        .draws
                        .iter()
                        .map(|d| mixture_density(&d.weights, &marginal(&d.components, dim), &[x]))
                        .sum::<f64>()
                        / t;
                    w.write_record([(dim + 1).to_string(), x.to_string(), dens.to_string()])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `draws.csv`, `summary.json`, `density_grid.csv` and
/// `manifest.json` into `dir`.
pub fn write_artifacts(dir: &Path, out: &FitOutcome) -> Result<()> {
    fs::create_dir_all(dir)?;
    out.draws.write_csv(fs::File::create(dir.join("draws.csv"))?)?;
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&out.summary)?)?;
    write_density_grid(&dir.join("density_grid.csv"), out)?;
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&out.manifest)?)?;
    Ok(())
}

/// Reads a run configuration, accepting either a bare config or a manifest
/// written by a previous run.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let cfg = match value.get("config") {
        Some(inner) if value.get("config_sha256").is_some() => serde_json::from_value(inner.clone())?,
        _ => serde_json::from_value(value)?,
    };
    Ok(cfg)
}

/// Runs `f` on a pool of `jobs` threads (`0` means rayon's default).
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::input(format!("cannot start {jobs} worker threads: {e}")))?;
    Ok(pool.install(f))
}
