//! Posterior summaries of relabeled draws.

use serde::{Deserialize, Serialize};

use super::metrics::{kl_of_mean_density, kl_to_truth, similarity_misclassification, sum_extra_weights, DensityOracle};
use super::relabel::RelabeledDraws;
use crate::diagnostics::mean_sd;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSummary {
    pub weight_mean: f64,
    pub weight_sd: f64,
    pub mean_mean: Vec<f64>,
    pub mean_sd: Vec<f64>,
    /// Posterior mean and sd of the component standard deviations.
    pub sigma_mean: Vec<f64>,
    pub sigma_sd: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub draws: usize,
    /// Sorted by decreasing posterior mean weight.
    pub components: Vec<ComponentSummary>,
    pub kl_mean: Option<f64>,
    pub kl_sd: Option<f64>,
    /// KL divergence of the posterior mean density rather than per draw.
    pub kl_of_mean_density: Option<f64>,
    pub misclass: Option<f64>,
    pub k0: Option<usize>,
    pub extra_weight_mean: Option<f64>,
    pub extra_weight_sd: Option<f64>,
}

/// What the truth is known to be, if anything.
#[derive(Default, Clone, Copy)]
pub struct Truth<'a> {
    pub density: Option<&'a dyn DensityOracle>,
    pub labels: Option<&'a [usize]>,
    pub k0: Option<usize>,
}

fn sd_or_zero(xs: &[f64]) -> (f64, f64) {
    let (m, s) = mean_sd(xs);
    (m, if s.is_finite() { s } else { 0.0 })
}

pub fn summarize(relabeled: &RelabeledDraws, truth: Truth<'_>) -> Result<SummaryReport> {
    let d = &relabeled.draws;
    let (k, m) = (d.k, d.m);
    let mut comps = Vec::with_capacity(k);
    for h in 0..k {
        let w: Vec<f64> = d.draws.iter().map(|x| x.weights[h]).collect();
        let (weight_mean, weight_sd) = sd_or_zero(&w);
        let mut mean_mean = Vec::with_capacity(m);
        let mut mean_sd_v = Vec::with_capacity(m);
        let mut sigma_mean = Vec::with_capacity(m);
        let mut sigma_sd = Vec::with_capacity(m);
        for dim in 0..m {
            let mu: Vec<f64> = d.draws.iter().map(|x| x.components[h].mean[dim]).collect();
            let sg: Vec<f64> = d.draws.iter().map(|x| x.components[h].var[dim].sqrt()).collect();
            let (a, b) = sd_or_zero(&mu);
            mean_mean.push(a);
            mean_sd_v.push(b);
            let (a, b) = sd_or_zero(&sg);
            sigma_mean.push(a);
            sigma_sd.push(b);
        }
        comps.push(ComponentSummary { weight_mean, weight_sd, mean_mean, mean_sd: mean_sd_v, sigma_mean, sigma_sd });
    }
    comps.sort_by(|a, b| b.weight_mean.total_cmp(&a.weight_mean));

    let mut report = SummaryReport {
        draws: d.len(),
        components: comps,
        kl_mean: None,
        kl_sd: None,
        kl_of_mean_density: None,
        misclass: None,
        k0: truth.k0,
        extra_weight_mean: None,
        extra_weight_sd: None,
    };
    if let Some(f0) = truth.density {
        let kl = kl_to_truth(d, f0)?;
        let (a, b) = sd_or_zero(&kl);
        report.kl_mean = Some(a);
        report.kl_sd = Some(b);
        report.kl_of_mean_density = Some(kl_of_mean_density(d, f0)?);
    }
    if let Some(labels) = truth.labels {
        report.misclass = Some(similarity_misclassification(d, labels)?);
    }
    if let Some(k0) = truth.k0 {
        let e: Vec<f64> = d.draws.iter().map(|x| sum_extra_weights(&x.weights, k0)).collect();
        let (a, b) = sd_or_zero(&e);
        report.extra_weight_mean = Some(a);
        report.extra_weight_sd = Some(b);
    }
    Ok(report)
}
