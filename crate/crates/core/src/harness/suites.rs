//! Replicated simulation studies and the real-data analyses.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit, InputSpec, RunConfig, TauSetting};
use crate::diagnostics::mean_sd;
use crate::error::{Error, Result};
use crate::postprocess::{sum_extra_weights, SummaryReport};
use crate::repulsion::{Case, Combiner};
use crate::synthdata::{Scenario, ScenarioSpec};

/// Settings shared by every fit of a suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteOptions {
    pub replicates: usize,
    pub seed: u64,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub chains: usize,
    pub combiner: Combiner,
    /// Separation constant for location-only calibration.
    pub location_c: f64,
    /// Separation constant for whole-kernel calibration.
    pub full_kernel_c: f64,
    pub out: Option<PathBuf>,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        let base = RunConfig::default();
        SuiteOptions {
            replicates: 10,
            seed: 2024,
            iterations: base.iterations,
            burn_in: base.burn_in,
            thin: base.thin,
            chains: 1,
            combiner: Combiner::Min,
            location_c: 4.0,
            full_kernel_c: 1.0,
            out: None,
        }
    }
}

impl SuiteOptions {
    fn config(&self, input: InputSpec, k: usize, case: Case, repulsive: bool, seed: u64) -> RunConfig {
        RunConfig {
            input,
            k,
            repulsive,
            case,
            combiner: self.combiner,
            tau: TauSetting::Auto,
            separation_c: match case {
                Case::LocationOnly => self.location_c,
                Case::FullKernel => self.full_kernel_c,
            },
            iterations: self.iterations,
            burn_in: self.burn_in,
            thin: self.thin,
            chains: self.chains,
            seed,
            ..RunConfig::default()
        }
    }

    fn data_seed(&self, replicate: usize) -> u64 {
        self.seed.wrapping_mul(1000).wrapping_add(replicate as u64)
    }

    fn chain_seed(&self, replicate: usize) -> u64 {
        self.seed.wrapping_mul(1000).wrapping_add(500 + replicate as u64)
    }
}

fn arm_name(repulsive: bool) -> &'static str {
    if repulsive {
        "R"
    } else {
        "N-R"
    }
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), serde_json::to_string_pretty(value)?)?;
    Ok(())
}

/// One fitted replicate of one arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmResult {
    pub scenario: Scenario,
    pub n: usize,
    pub replicate: usize,
    pub repulsive: bool,
    pub tau: Option<f64>,
    pub summary: SummaryReport,
}

fn run_arms(opts: &SuiteOptions, cells: &[(Scenario, usize)], k: usize, case: Case) -> Result<Vec<ArmResult>> {
    let jobs: Vec<(Scenario, usize, usize, bool)> = cells
        .iter()
        .flat_map(|&(s, n)| (0..opts.replicates).flat_map(move |r| [false, true].map(|rep| (s, n, r, rep))))
        .collect();
    jobs.par_iter()
        .map(|&(scenario, n, replicate, repulsive)| {
            let input = InputSpec::Scenario(ScenarioSpec { id: scenario, n, seed: opts.data_seed(replicate) });
            let cfg = opts.config(input, k, case, repulsive, opts.chain_seed(replicate));
            let out = fit(&cfg)?;
            Ok(ArmResult { scenario, n, replicate, repulsive, tau: out.manifest.tau, summary: out.summary })
        })
        .collect()
}

/// Replicate averages of posterior means and sds for one top component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Cell {
    pub scenario: Scenario,
    pub prior: String,
    pub rank: usize,
    pub p_mean: f64,
    pub p_sd: f64,
    pub mu_mean: f64,
    pub mu_sd: f64,
    pub sigma_mean: f64,
    pub sigma_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Report {
    pub cells: Vec<Table1Cell>,
    pub replicates: Vec<ArmResult>,
}

impl Table1Report {
    pub fn cell(&self, scenario: Scenario, prior: &str, rank: usize) -> Option<&Table1Cell> {
        self.cells.iter().find(|c| c.scenario == scenario && c.prior == prior && c.rank == rank)
    }

    /// Posterior mean top weights per replicate, paired `(N-R, R)`.
    pub fn paired_top_weights(&self, scenario: Scenario) -> Vec<(f64, f64)> {
        let top = |rep: bool, r: usize| {
            self.replicates
                .iter()
                .find(|a| a.scenario == scenario && a.repulsive == rep && a.replicate == r)
                .map(|a| a.summary.components[0].weight_mean)
        };
        (0..)
            .map_while(|r| Some((top(false, r)?, top(true, r)?)))
            .collect()
    }
}

/// Scenarios Ia and Ib, n = 1000, k = 6, whole-kernel repulsion.
pub fn table1(opts: &SuiteOptions) -> Result<Table1Report> {
    let cells_in = [(Scenario::Ia, 1000), (Scenario::Ib, 1000)];
    let replicates = run_arms(opts, &cells_in, 6, Case::FullKernel)?;
    let mut cells = Vec::new();
    for (scenario, _) in cells_in {
        let truth = scenario.truth();
        for (rank, (w, part)) in truth.parts.iter().enumerate() {
            let (mu, var) = match part {
                crate::synthdata::Part::Gaussian { mean, cov } => (mean[0], cov[0]),
                _ => unreachable!("table 1 scenarios are Gaussian"),
            };
            cells.push(Table1Cell {
                scenario,
                prior: "True".into(),
                rank: rank + 1,
                p_mean: *w,
                p_sd: 0.0,
                mu_mean: mu,
                mu_sd: 0.0,
                sigma_mean: var.sqrt(),
                sigma_sd: 0.0,
            });
        }
        for rep in [false, true] {
            let arms: Vec<&ArmResult> =
                replicates.iter().filter(|a| a.scenario == scenario && a.repulsive == rep).collect();
            for rank in 0..2 {
                let avg = |f: &dyn Fn(&SummaryReport) -> f64| arms.iter().map(|a| f(&a.summary)).sum::<f64>() / arms.len() as f64;
                cells.push(Table1Cell {
                    scenario,
                    prior: arm_name(rep).into(),
                    rank: rank + 1,
                    p_mean: avg(&|s| s.components[rank].weight_mean),
                    p_sd: avg(&|s| s.components[rank].weight_sd),
                    mu_mean: avg(&|s| s.components[rank].mean_mean[0]),
                    mu_sd: avg(&|s| s.components[rank].mean_sd[0]),
                    sigma_mean: avg(&|s| s.components[rank].sigma_mean[0]),
                    sigma_sd: avg(&|s| s.components[rank].sigma_sd[0]),
                });
            }
        }
    }
    let report = Table1Report { cells, replicates };
    if let Some(dir) = &opts.out {
        let mut w = csv::Writer::from_path({
            fs::create_dir_all(dir)?;
            dir.join("table1.csv")
        })?;
        for c in &report.cells {
            w.serialize(c)?;
        }
        w.flush()?;
        write_json(dir, "table1.json", &report)?;
    }
    Ok(report)
}

/// Replicate mean and sd of one metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    fn of(xs: &[f64]) -> Self {
        let (mean, sd) = mean_sd(xs);
        MeanSd { mean, sd: if sd.is_finite() { sd } else { 0.0 } }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table2Cell {
    pub scenario: Scenario,
    pub n: usize,
    pub prior: String,
    pub kl: MeanSd,
    pub misclass: MeanSd,
    pub extra_weight: MeanSd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table2Report {
    pub cells: Vec<Table2Cell>,
    pub replicates: Vec<ArmResult>,
}

impl Table2Report {
    pub fn cell(&self, scenario: Scenario, n: usize, prior: &str) -> Option<&Table2Cell> {
        self.cells.iter().find(|c| c.scenario == scenario && c.n == n && c.prior == prior)
    }

    /// Posterior mean extra weight of one arm, by replicate.
    pub fn extra_weights(&self, scenario: Scenario, n: usize, repulsive: bool) -> Vec<f64> {
        let mut arms: Vec<&ArmResult> = self
            .replicates
            .iter()
            .filter(|a| a.scenario == scenario && a.n == n && a.repulsive == repulsive)
            .collect();
        arms.sort_by_key(|a| a.replicate);
        arms.iter().map(|a| a.summary.extra_weight_mean.unwrap_or(f64::NAN)).collect()
    }
}

pub const TABLE2_SCENARIOS: [Scenario; 6] =
    [Scenario::Ic, Scenario::IIa, Scenario::IIb, Scenario::IIIa, Scenario::IIIb, Scenario::IV];

/// Scenarios Ic to IV at n = 100 and 1000, k = 6, location-only repulsion.
pub fn table2(opts: &SuiteOptions) -> Result<Table2Report> {
    let cells_in: Vec<(Scenario, usize)> =
        TABLE2_SCENARIOS.iter().flat_map(|&s| [(s, 100), (s, 1000)]).collect();
    let replicates = run_arms(opts, &cells_in, 6, Case::LocationOnly)?;
    let mut cells = Vec::new();
    for &(scenario, n) in &cells_in {
        for rep in [false, true] {
            let arms: Vec<&SummaryReport> = replicates
                .iter()
                .filter(|a| a.scenario == scenario && a.n == n && a.repulsive == rep)
                .map(|a| &a.summary)
                .collect();
            let get = |f: &dyn Fn(&SummaryReport) -> Option<f64>| -> Vec<f64> { arms.iter().filter_map(|s| f(s)).collect() };
            cells.push(Table2Cell {
                scenario,
                n,
                prior: arm_name(rep).into(),
                kl: MeanSd::of(&get(&|s| s.kl_mean)),
                misclass: MeanSd::of(&get(&|s| s.misclass)),
                extra_weight: MeanSd::of(&get(&|s| s.extra_weight_mean)),
            });
        }
    }
    let report = Table2Report { cells, replicates };
    if let Some(dir) = &opts.out {
        fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join("table2.csv"))?;
        w.write_record([
            "scenario", "n", "prior", "kl_mean", "kl_sd", "misclass_mean", "misclass_sd", "extra_mean", "extra_sd",
        ])?;
        for c in &report.cells {
            w.write_record([
                c.scenario.to_string(),
                c.n.to_string(),
                c.prior.clone(),
                c.kl.mean.to_string(),
                c.kl.sd.to_string(),
                c.misclass.mean.to_string(),
                c.misclass.sd.to_string(),
                c.extra_weight.mean.to_string(),
                c.extra_weight.sd.to_string(),
            ])?;
        }
        w.flush()?;
        write_json(dir, "table2.json", &report)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RealDataset {
    Galaxy,
    Acidity,
    Iris,
}

impl std::str::FromStr for RealDataset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "galaxy" => Ok(RealDataset::Galaxy),
            "acidity" => Ok(RealDataset::Acidity),
            "iris" => Ok(RealDataset::Iris),
            _ => Err(Error::input(format!("unknown dataset {s:?}; expected galaxy, acidity or iris"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealDataArm {
    pub k: usize,
    pub repulsive: bool,
    pub tau: Option<f64>,
    /// Components with posterior mean weight above 0.05.
    pub significant: usize,
    pub summary: SummaryReport,
    /// Per-draw sums of extra weights when a true cluster count applies.
    pub extra_weight_draws: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealDataReport {
    pub dataset: RealDataset,
    pub arms: Vec<RealDataArm>,
}

impl RealDataReport {
    pub fn arm(&self, k: usize, repulsive: bool) -> Option<&RealDataArm> {
        self.arms.iter().find(|a| a.k == k && a.repulsive == repulsive)
    }
}

/// Galaxy and acidity: k = 5, whole-kernel repulsion. Iris: k = 6 and 10,
/// location-only repulsion, extra weights against the three species.
pub fn realdata(dataset: RealDataset, path: &Path, opts: &SuiteOptions) -> Result<RealDataReport> {
    if !path.exists() {
        return Err(Error::input(format!(
            "{} not found; expected a CSV with numeric columns y1..ym and an optional final label column",
            path.display()
        )));
    }
    let (ks, case, k0): (&[usize], Case, Option<usize>) = match dataset {
        RealDataset::Galaxy | RealDataset::Acidity => (&[5], Case::FullKernel, None),
        RealDataset::Iris => (&[6, 10], Case::LocationOnly, Some(3)),
    };
    let jobs: Vec<(usize, bool)> = ks.iter().flat_map(|&k| [(k, false), (k, true)]).collect();
    let arms: Vec<RealDataArm> = jobs
        .par_iter()
        .map(|&(k, repulsive)| {
            let mut cfg = opts.config(InputSpec::Path(path.to_path_buf()), k, case, repulsive, opts.seed);
            cfg.k0 = k0;
            let out = fit(&cfg)?;
            let significant = out.summary.components.iter().filter(|c| c.weight_mean > 0.05).count();
            let extra_weight_draws =
                k0.map(|k0| out.draws.draws.iter().map(|d| sum_extra_weights(&d.weights, k0)).collect());
            Ok(RealDataArm { k, repulsive, tau: out.manifest.tau, significant, summary: out.summary, extra_weight_draws })
        })
        .collect::<Result<_>>()?;
    let report = RealDataReport { dataset, arms };
    if let Some(dir) = &opts.out {
        let name = format!("{dataset:?}").to_lowercase();
        write_json(dir, &format!("{name}.json"), &report)?;
        if k0.is_some() {
            let mut w = csv::Writer::from_path(dir.join(format!("{name}_extra_weights.csv")))?;
            w.write_record(["k", "prior", "draw", "extra_weight"])?;
            for a in &report.arms {
                for (i, e) in a.extra_weight_draws.iter().flatten().enumerate() {
                    w.write_record([a.k.to_string(), arm_name(a.repulsive).into(), i.to_string(), e.to_string()])?;
                }
            }
            w.flush()?;
        }
    }
    Ok(report)
}
