//! Default choice of the repulsion scale `tau`.
//!
//! Let `dbar` be the mean pairwise distance between the `k` components.
//! Under the plain prior (`g0` i.i.d.) and the repulsive prior its law has
//! mean/sd `(rho2, sigma2)` and `(rho1, sigma1)`. The search increases `tau`
//! geometrically from a small value and stops at the first `tau` with
//! `rho1 - rho2 >= c * max(sigma1, sigma2)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::diagnostics::mean_sd;
use crate::error::{Error, Result};
use crate::model::{BasePrior, Component, MixtureConfig};
use crate::repulsion::{ln_h, mean_pairwise_distance, Case, Combiner, RepulsionSpec};
use crate::sampler::Chain;

/// Proposal budget over which the rejection acceptance rate is judged.
pub const REJECTION_BUDGET: u64 = 1_000_000;
/// Smallest acceptance rate tolerated over the budget.
pub const MIN_ACCEPTANCE: f64 = 1e-4;

const PRIOR_CHAIN_BURN_IN: usize = 500;
const PRIOR_CHAIN_THIN: usize = 5;

/// How draws from the repulsive prior were produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorSampling {
    Rejection,
    SliceChain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauStep {
    pub tau: f64,
    pub rho1: f64,
    pub sigma1: f64,
    pub method: PriorSampling,
    pub acceptance_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub tau_star: f64,
    pub nu: u32,
    pub c: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub mc_samples: usize,
    pub seed: u64,
    pub case: Case,
    pub combiner: Combiner,
    pub k: usize,
    pub method: PriorSampling,
    pub path: Vec<TauStep>,
}

impl CalibrationResult {
    pub fn separation(&self) -> f64 {
        self.rho1 - self.rho2
    }

    pub fn is_separated(&self) -> bool {
        self.separation() >= self.c * self.sigma1.max(self.sigma2)
    }

    pub fn spec(&self) -> Result<RepulsionSpec> {
        RepulsionSpec::new(self.case, self.combiner, self.tau_star, self.nu)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    pub c: f64,
    pub nu: u32,
    pub combiner: Combiner,
    pub n_mc: usize,
    pub tau_start: f64,
    pub growth: f64,
    pub tau_max: f64,
    pub seed: u64,
    /// Switch to a prior-only slice chain once rejection becomes too costly.
    pub chain_fallback: bool,
}

impl CalibrationOptions {
    pub fn new(case: Case) -> Self {
        CalibrationOptions {
            c: 4.0,
            nu: RepulsionSpec::default_nu(case),
            combiner: Combiner::Min,
            n_mc: 10_000,
            tau_start: 0.01,
            growth: 1.5,
            tau_max: 1e6,
            seed: 0,
            chain_fallback: true,
        }
    }
}

fn check_request(k: usize, n_mc: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::input("k must be at least 2 for pairwise distances"));
    }
    if n_mc < 1000 {
        return Err(Error::input(format!("n_mc = {n_mc} is below the minimum of 1000")));
    }
    Ok(())
}

/// `dbar` under `k` i.i.d. draws from `g0`.
pub fn sample_dbar_nonrepulsive<R: Rng + ?Sized>(
    prior: &BasePrior,
    case: Case,
    k: usize,
    n_mc: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_request(k, n_mc)?;
    let mut comps: Vec<Component> = Vec::with_capacity(k);
    Ok((0..n_mc)
        .map(|_| {
            comps.clear();
            comps.extend((0..k).map(|_| prior.sample(rng)));
            mean_pairwise_distance(case, &comps)
        })
        .collect())
}

/// Rejection draws of `dbar` under the repulsive prior, with the acceptance
/// rate over all proposals made.
pub fn sample_dbar_rejection<R: Rng + ?Sized>(
    prior: &BasePrior,
    spec: &RepulsionSpec,
    k: usize,
    n_mc: usize,
    rng: &mut R,
) -> Result<(Vec<f64>, f64)> {
    check_request(k, n_mc)?;
    let mut out = Vec::with_capacity(n_mc);
    let mut proposals: u64 = 0;
    let mut comps: Vec<Component> = Vec::with_capacity(k);
    while out.len() < n_mc {
        comps.clear();
        comps.extend((0..k).map(|_| prior.sample(rng)));
        proposals += 1;
        let u: f64 = rng.random();
        if u.ln() < ln_h(spec, &comps) {
            out.push(mean_pairwise_distance(spec.case, &comps));
        }
        if proposals >= REJECTION_BUDGET && (out.len() as f64) < MIN_ACCEPTANCE * proposals as f64 {
            return Err(Error::Calibration(format!(
                "tau too large for rejection: {} of {proposals} proposals accepted at tau = {}",
                out.len(),
                spec.tau
            )));
        }
    }
    Ok((out, n_mc as f64 / proposals as f64))
}

/// Repulsive-prior `dbar` by accept/reject with acceptance probability `h`.
pub fn sample_dbar_repulsive<R: Rng + ?Sized>(
    prior: &BasePrior,
    spec: &RepulsionSpec,
    k: usize,
    n_mc: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    sample_dbar_rejection(prior, spec, k, n_mc, rng).map(|(v, _)| v)
}

/// Repulsive-prior `dbar` from the slice sampler run without data.
pub fn sample_dbar_slice_chain<R: Rng + ?Sized>(
    prior: &BasePrior,
    spec: &RepulsionSpec,
    k: usize,
    n_mc: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_request(k, n_mc)?;
    let m = prior.dim();
    let data = Dataset::empty(m);
    let mix = MixtureConfig::new(k, m);
    let mut chain = Chain::new(&data, &mix, prior, spec, true, rng)?;
    for _ in 0..PRIOR_CHAIN_BURN_IN {
        chain.step(rng)?;
    }
    let mut out = Vec::with_capacity(n_mc);
    while out.len() < n_mc {
        for _ in 0..PRIOR_CHAIN_THIN {
            chain.step(rng)?;
        }
        out.push(mean_pairwise_distance(spec.case, &chain.state().components));
    }
    Ok(out)
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Searches `tau` until the repulsive and plain laws of `dbar` are
/// `c`-separated.
pub fn calibrate_tau(prior: &BasePrior, case: Case, k: usize, opts: &CalibrationOptions) -> Result<CalibrationResult> {
    if !(opts.c >= 0.0) {
        return Err(Error::input("separation constant c must be non-negative"));
    }
    if !(opts.tau_start > 0.0 && opts.growth > 1.0) {
        return Err(Error::input("tau grid needs tau_start > 0 and growth > 1"));
    }
    let plain = sample_dbar_nonrepulsive(prior, case, k, opts.n_mc, &mut rng_for(opts.seed, 0))?;
    let (rho2, sigma2) = mean_sd(&plain);

    let mut path = Vec::new();
    let mut use_chain = false;
    let mut tau = opts.tau_start;
    while tau <= opts.tau_max {
        let spec = RepulsionSpec::new(case, opts.combiner, tau, opts.nu)?;
        let mut rng = rng_for(opts.seed, 1);
        let mut acceptance_rate = None;
        let draws = if use_chain {
            sample_dbar_slice_chain(prior, &spec, k, opts.n_mc, &mut rng)?
        } else {
            match sample_dbar_rejection(prior, &spec, k, opts.n_mc, &mut rng) {
                Ok((d, rate)) => {
                    acceptance_rate = Some(rate);
                    // the next, larger tau would need well over the budget
                    if opts.chain_fallback && rate * (REJECTION_BUDGET as f64) < 3.0 * opts.n_mc as f64 {
                        use_chain = true;
                    }
                    d
                }
                Err(Error::Calibration(_)) if opts.chain_fallback => {
                    use_chain = true;
                    sample_dbar_slice_chain(prior, &spec, k, opts.n_mc, &mut rng_for(opts.seed, 2))?
                }
                Err(e) => return Err(e),
            }
        };
        let method = if acceptance_rate.is_some() { PriorSampling::Rejection } else { PriorSampling::SliceChain };
        let (rho1, sigma1) = mean_sd(&draws);
        path.push(TauStep { tau, rho1, sigma1, method, acceptance_rate });
        if rho1 - rho2 >= opts.c * sigma1.max(sigma2) {
            return Ok(CalibrationResult {
                tau_star: tau,
                nu: opts.nu,
                c: opts.c,
                rho1,
                rho2,
                sigma1,
                sigma2,
                mc_samples: opts.n_mc,
                seed: opts.seed,
                case,
                combiner: opts.combiner,
                k,
                method,
                path,
            });
        }
        tau *= opts.growth;
    }
    Err(Error::Calibration(format!(
        "no tau up to {} separates the repulsive and plain laws at c = {}",
        opts.tau_max, opts.c
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn std_prior(m: usize) -> BasePrior {
        BasePrior::isotropic(m, 0.0, 1.0, 2.0, 1.0)
    }

    #[test]
    fn nonrepulsive_pair_mean_matches_half_normal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = sample_dbar_nonrepulsive(&std_prior(1), Case::LocationOnly, 2, 40_000, &mut rng).unwrap();
        let (m, s) = mean_sd(&d);
        let want = 2.0 / std::f64::consts::PI.sqrt();
        assert!((m - want).abs() < 3.0 * s / (d.len() as f64).sqrt(), "{m}");
    }

    #[test]
    fn degenerate_location_prior_gives_zero_distance() {
        let prior = BasePrior::isotropic(1, 0.5, 0.0, 2.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = sample_dbar_nonrepulsive(&prior, Case::LocationOnly, 3, 1000, &mut rng).unwrap();
        assert!(d.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn k_does_not_change_plain_mean() {
        let p = std_prior(1);
        let a = sample_dbar_nonrepulsive(&p, Case::LocationOnly, 2, 40_000, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let b = sample_dbar_nonrepulsive(&p, Case::LocationOnly, 3, 40_000, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let ((ma, sa), (mb, sb)) = (mean_sd(&a), mean_sd(&b));
        let se = (sa * sa / a.len() as f64 + sb * sb / b.len() as f64).sqrt();
        assert!((ma - mb).abs() < 3.5 * se);
    }

    #[test]
    fn request_checks() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            sample_dbar_nonrepulsive(&std_prior(1), Case::LocationOnly, 1, 1000, &mut rng),
            Err(Error::Input(_))
        ));
        assert!(sample_dbar_nonrepulsive(&std_prior(1), Case::LocationOnly, 2, 999, &mut rng).is_err());
    }

    #[test]
    fn repulsion_increases_pair_distance() {
        let spec = RepulsionSpec::new(Case::LocationOnly, Combiner::Min, 1.0, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = sample_dbar_repulsive(&std_prior(1), &spec, 2, 20_000, &mut rng).unwrap();
        let (m, s) = mean_sd(&d);
        assert!(d.iter().all(|&x| x > 0.0));
        assert!(m - 3.0 * s / (d.len() as f64).sqrt() > 2.0 / std::f64::consts::PI.sqrt());
    }

    #[test]
    fn tiny_tau_matches_plain_law() {
        let p = std_prior(1);
        let spec = RepulsionSpec::new(Case::LocationOnly, Combiner::Product, 1e-9, 1).unwrap();
        let a = sample_dbar_repulsive(&p, &spec, 3, 5000, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
        let b = sample_dbar_nonrepulsive(&p, Case::LocationOnly, 3, 5000, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let d = crate::diagnostics::ks_statistic(&a, &b);
        assert!(crate::diagnostics::ks_p_value(d, a.len(), b.len()) > 0.001);
    }

    #[test]
    fn huge_tau_reports_rejection_failure() {
        let spec = RepulsionSpec::new(Case::LocationOnly, Combiner::Product, 1e4, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = sample_dbar_repulsive(&std_prior(1), &spec, 4, 1000, &mut rng).unwrap_err();
        assert_eq!(err.exit_code(), 4);
        assert!(err.to_string().contains("tau too large for rejection"));
    }

    #[test]
    fn zero_c_stops_at_first_tau() {
        let mut opts = CalibrationOptions::new(Case::LocationOnly);
        opts.c = 0.0;
        opts.n_mc = 2000;
        let r = calibrate_tau(&std_prior(1), Case::LocationOnly, 3, &opts).unwrap();
        assert_eq!(r.tau_star, 0.01);
        assert!(r.rho1 >= r.rho2);
        assert_eq!(r.path.len(), 1);
    }

    #[test]
    fn small_separation_is_reproducible() {
        let mut opts = CalibrationOptions::new(Case::LocationOnly);
        opts.c = 1.0;
        opts.n_mc = 2000;
        opts.seed = 17;
        let a = calibrate_tau(&std_prior(1), Case::LocationOnly, 3, &opts).unwrap();
        let b = calibrate_tau(&std_prior(1), Case::LocationOnly, 3, &opts).unwrap();
        assert_eq!(a, b);
        assert!(a.is_separated());
        let json = serde_json::to_string(&a).unwrap();
        let back: CalibrationResult = serde_json::from_str(&json).unwrap();
        assert_eq!(a, back);
    }
}
