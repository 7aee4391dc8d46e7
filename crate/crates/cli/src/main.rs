use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use repmix::harness::suites::{self, RealDataset, SuiteOptions};
use repmix::harness::{self, InputSpec, RunConfig, TauSetting};
use repmix::synthdata::{generate, Scenario, ScenarioSpec};
use repmix::{Case, Combiner, Error};

#[derive(Parser)]
#[command(name = "repmix", version, about = "Bayesian mixtures of Gaussians under repulsive priors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one mixture and write draws, summary, density grid and manifest.
    Fit(FitArgs),
    /// Calibrate the repulsion strength for a data set.
    Calibrate(FitArgs),
    /// Replicated study of scenarios Ia and Ib.
    Table1(SuiteArgs),
    /// Replicated study of scenarios Ic to IV.
    Table2(SuiteArgs),
    /// Galaxy, acidity or iris analysis.
    Realdata(RealArgs),
    /// Write a synthetic data set as CSV.
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum CaseArg {
    Full,
    Location,
}

impl From<CaseArg> for Case {
    fn from(c: CaseArg) -> Self {
        match c {
            CaseArg::Full => Case::FullKernel,
            CaseArg::Location => Case::LocationOnly,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CombinerArg {
    Product,
    Min,
}

impl From<CombinerArg> for Combiner {
    fn from(c: CombinerArg) -> Self {
        match c {
            CombinerArg::Product => Combiner::Product,
            CombinerArg::Min => Combiner::Min,
        }
    }
}

#[derive(Args)]
struct McmcArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long = "burnin")]
    burn_in: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    chains: Option<usize>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long)]
    combiner: Option<CombinerArg>,
}

#[derive(Args)]
struct FitArgs {
    /// JSON run configuration or a manifest from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV data file with columns y1..ym and an optional label column.
    #[arg(long, conflicts_with = "scenario")]
    input: Option<PathBuf>,
    /// Synthetic scenario instead of a data file.
    #[arg(long)]
    scenario: Option<Scenario>,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    case: Option<CaseArg>,
    /// `auto` or a positive value.
    #[arg(long)]
    tau: Option<TauSetting>,
    #[arg(long)]
    nu: Option<u32>,
    /// Separation constant for calibration.
    #[arg(long)]
    c: Option<f64>,
    /// Fit the independent-prior mixture.
    #[arg(long)]
    no_repulsion: bool,
    #[arg(long)]
    k0: Option<usize>,
    #[command(flatten)]
    mcmc: McmcArgs,
    #[arg(long, default_value = "repmix-out")]
    out: PathBuf,
}

#[derive(Args)]
struct SuiteArgs {
    #[arg(long)]
    replicates: Option<usize>,
    #[command(flatten)]
    mcmc: McmcArgs,
    #[arg(long, default_value = "repmix-out")]
    out: PathBuf,
}

#[derive(Args)]
struct RealArgs {
    #[arg(long)]
    dataset: RealDataset,
    /// Data file; defaults to data/<dataset>.csv.
    #[arg(long)]
    input: Option<PathBuf>,
    #[command(flatten)]
    suite: SuiteArgs,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    scenario: Scenario,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn run_config(a: &FitArgs) -> repmix::Result<RunConfig> {
    let mut cfg = match &a.config {
        Some(p) => harness::load_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(p) = &a.input {
        cfg.input = InputSpec::Path(p.clone());
    } else if let Some(id) = a.scenario {
        cfg.input = InputSpec::Scenario(ScenarioSpec { id, n: a.n, seed: a.data_seed });
    } else if a.config.is_none() {
        return Err(Error::Input("one of --config, --input or --scenario is required".into()));
    }
    let m = &a.mcmc;
    macro_rules! set {
        ($field:ident, $value:expr) => {
            if let Some(v) = $value {
                cfg.$field = v.into();
            }
        };
    }
    set!(k, a.k);
    set!(case, a.case);
    set!(combiner, m.combiner);
    set!(tau, a.tau);
    set!(separation_c, a.c);
    set!(seed, m.seed);
    set!(iterations, m.iterations);
    set!(burn_in, m.burn_in);
    set!(thin, m.thin);
    set!(chains, m.chains);
    if a.nu.is_some() {
        cfg.nu = a.nu;
    }
    if a.k0.is_some() {
        cfg.k0 = a.k0;
    }
    if a.no_repulsion {
        cfg.repulsive = false;
    }
    Ok(cfg)
}

fn suite_options(a: &SuiteArgs) -> SuiteOptions {
    let mut o = SuiteOptions { out: Some(a.out.clone()), ..SuiteOptions::default() };
    let m = &a.mcmc;
    o.replicates = a.replicates.unwrap_or(o.replicates);
    o.seed = m.seed.unwrap_or(o.seed);
    o.iterations = m.iterations.unwrap_or(o.iterations);
    o.burn_in = m.burn_in.unwrap_or(o.burn_in);
    o.thin = m.thin.unwrap_or(o.thin);
    o.chains = m.chains.unwrap_or(o.chains);
    o.combiner = m.combiner.map(Into::into).unwrap_or(o.combiner);
    o
}

fn print_json<T: serde::Serialize>(v: &T) -> repmix::Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn write_json<T: serde::Serialize>(dir: &Path, name: &str, v: &T) -> repmix::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), serde_json::to_string_pretty(v)?)?;
    Ok(())
}

fn calibrate(cfg: &RunConfig, out: &Path) -> repmix::Result<()> {
    cfg.validate()?;
    let prepared = harness::prepare(&cfg.input)?;
    let prior = harness::base_prior(cfg, &prepared.scaled);
    let result = harness::calibrate_cached(&prior, cfg.case, cfg.k, &harness::calibration_options(cfg))?;
    write_json(out, "calibration.json", &result)?;
    print_json(&serde_json::json!({
        "tau_star": result.tau_star,
        "nu": result.nu,
        "separation": result.separation(),
        "method": result.method,
    }))
}

fn run(cli: Cli) -> repmix::Result<()> {
    match cli.command {
        Command::Fit(a) => {
            let cfg = run_config(&a)?;
            let out = harness::with_jobs(a.mcmc.jobs, || harness::fit(&cfg))??;
            harness::write_artifacts(&a.out, &out)?;
            print_json(&out.summary)
        }
        Command::Calibrate(a) => {
            let cfg = run_config(&a)?;
            harness::with_jobs(a.mcmc.jobs, || calibrate(&cfg, &a.out))?
        }
        Command::Table1(a) => {
            let opts = suite_options(&a);
            let report = harness::with_jobs(a.mcmc.jobs, || suites::table1(&opts))??;
            print_json(&report.cells)
        }
        Command::Table2(a) => {
            let opts = suite_options(&a);
            let report = harness::with_jobs(a.mcmc.jobs, || suites::table2(&opts))??;
            print_json(&report.cells)
        }
        Command::Realdata(a) => {
            let opts = suite_options(&a.suite);
            let name = format!("{:?}", a.dataset).to_lowercase();
            let path = a.input.clone().unwrap_or_else(|| PathBuf::from(format!("data/{name}.csv")));
            let report = harness::with_jobs(a.suite.mcmc.jobs, || suites::realdata(a.dataset, &path, &opts))??;
            let brief: Vec<_> = report
                .arms
                .iter()
                .map(|arm| {
                    serde_json::json!({
                        "k": arm.k,
                        "repulsive": arm.repulsive,
                        "tau": arm.tau,
                        "significant": arm.significant,
                        "weights": arm.summary.components.iter().map(|c| c.weight_mean).collect::<Vec<_>>(),
                        "extra_weight_mean": arm.summary.extra_weight_mean,
                    })
                })
                .collect();
            print_json(&brief)
        }
        Command::Generate(a) => {
            let (data, truth) = generate(&ScenarioSpec { id: a.scenario, n: a.n, seed: a.seed })?;
            data.write_csv(std::fs::File::create(&a.out)?)?;
            print_json(&serde_json::json!({ "scenario": a.scenario, "n": a.n, "seed": a.seed, "k0": truth.k0() }))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{body}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
