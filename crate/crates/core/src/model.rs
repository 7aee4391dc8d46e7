//! Mixture components, configuration, base prior and chain state.
//!
//! Kernels are Gaussian with diagonal covariance, so a component is a
//! location vector plus a vector of per-dimension variances. The mixture
//! density is `f(y) = sum_h p_h N(y; mu_h, diag(var_h))`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

pub(crate) const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Log density of a univariate normal.
#[inline]
pub fn normal_ln_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let z = x - mean;
    -LN_SQRT_2PI - 0.5 * var.ln() - 0.5 * z * z / var
}

/// Log density of an inverse-gamma law with the given shape and scale.
#[inline]
pub fn inv_gamma_ln_pdf(x: f64, shape: f64, scale: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * scale.ln() - statrs::function::gamma::ln_gamma(shape) - (shape + 1.0) * x.ln()
        - scale / x
}

/// One Gaussian kernel with diagonal covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub mean: Vec<f64>,
    /// Diagonal of the covariance matrix, in variance units.
    pub var: Vec<f64>,
}

impl Component {
    pub fn new(mean: Vec<f64>, var: Vec<f64>) -> Result<Self> {
        let c = Component { mean, var };
        c.check()?;
        Ok(c)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub(crate) fn check(&self) -> Result<()> {
        if self.mean.len() != self.var.len() {
            return Err(Error::input(format!(
                "component has {} means but {} variances",
                self.mean.len(),
                self.var.len()
            )));
        }
        if self.mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::input("component mean is not finite"));
        }
        if self.var.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::input("component variance must be finite and positive"));
        }
        Ok(())
    }

    /// Log kernel density at `y`. Caller guarantees matching dimension.
    #[inline]
    pub fn ln_pdf(&self, y: &[f64]) -> f64 {
        y.iter()
            .zip(&self.mean)
            .zip(&self.var)
            .map(|((&x, &m), &v)| normal_ln_pdf(x, m, v))
            .sum()
    }
}

/// Number of components, dimension and Dirichlet concentration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureConfig {
    pub k: usize,
    pub m: usize,
    pub alpha: Vec<f64>,
}

impl MixtureConfig {
    /// Symmetric concentration `alpha_h = c / k` with `c = 1`.
    pub fn new(k: usize, m: usize) -> Self {
        MixtureConfig { k, m, alpha: vec![1.0 / k.max(1) as f64; k] }
    }

    pub fn with_alpha(k: usize, m: usize, alpha: Vec<f64>) -> Self {
        MixtureConfig { k, m, alpha }
    }
}

/// Independent base measure `g0(mu, var) = xi(mu) psi(var)`: per-dimension
/// normal locations and inverse-gamma variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasePrior {
    pub mean_loc: Vec<f64>,
    pub mean_var: Vec<f64>,
    pub var_shape: f64,
    pub var_scale: Vec<f64>,
}

impl BasePrior {
    /// Same prior in every dimension.
    pub fn isotropic(m: usize, mean_loc: f64, mean_var: f64, var_shape: f64, var_scale: f64) -> Self {
        BasePrior {
            mean_loc: vec![mean_loc; m],
            mean_var: vec![mean_var; m],
            var_shape,
            var_scale: vec![var_scale; m],
        }
    }

    /// Empirical-Bayes defaults: centred on the sample mean, location
    /// variance three times the sample variance, variance shape 2 and scale
    /// equal to the sample variance.
    pub fn empirical(data: &Dataset) -> Self {
        let (mean, var) = data.column_moments();
        let var: Vec<f64> = var.into_iter().map(|v| if v > 0.0 { v } else { 1.0 }).collect();
        BasePrior {
            mean_loc: mean,
            mean_var: var.iter().map(|v| 3.0 * v).collect(),
            var_shape: 2.0,
            var_scale: var,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean_loc.len()
    }

    /// `ln g0(component)`.
    pub fn ln_density(&self, c: &Component) -> f64 {
        (0..self.dim())
            .map(|d| {
                normal_ln_pdf(c.mean[d], self.mean_loc[d], self.mean_var[d])
                    + inv_gamma_ln_pdf(c.var[d], self.var_shape, self.var_scale[d])
            })
            .sum()
    }

    /// One independent draw from `g0`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Component {
        let gamma = Gamma::new(self.var_shape, 1.0).expect("validated shape");
        let mut mean = Vec::with_capacity(self.dim());
        let mut var = Vec::with_capacity(self.dim());
        for d in 0..self.dim() {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            mean.push(self.mean_loc[d] + self.mean_var[d].sqrt() * z);
            var.push(self.var_scale[d] / gamma.sample(rng));
        }
        Component { mean, var }
    }
}

/// A problem found by [`validate_config`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
    /// Warnings are reported but do not block a fit.
    pub warning: bool,
}

/// Checks a mixture configuration and base prior, returning every problem.
pub fn validate_config(cfg: &MixtureConfig, prior: &BasePrior) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut err = |field: &str, message: String, warning: bool| {
        out.push(Violation { field: field.into(), message, warning })
    };
    if cfg.k == 0 {
        err("k", "k must be at least 1".into(), false);
    }
    if cfg.m == 0 {
        err("m", "dimension must be at least 1".into(), false);
    }
    if cfg.alpha.len() != cfg.k {
        err("alpha", format!("alpha has length {}, expected k = {}", cfg.alpha.len(), cfg.k), false);
    }
    if cfg.alpha.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
        err("alpha", "alpha entries must be positive".into(), false);
    }
    let max_alpha = cfg.alpha.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max_alpha >= cfg.m as f64 / 2.0 {
        err(
            "alpha",
            format!("alpha exceeds m/2: max alpha {max_alpha} >= {}", cfg.m as f64 / 2.0),
            true,
        );
    }
    let pm = prior.dim();
    if pm != cfg.m
        || prior.mean_var.len() != pm
        || prior.var_scale.len() != pm
    {
        err("prior", format!("prior dimension does not match m = {}", cfg.m), false);
    }
    if prior.mean_loc.iter().any(|x| !x.is_finite()) {
        err("prior.mean_loc", "mean-prior location must be finite".into(), false);
    }
    if prior.mean_var.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        err("prior.mean_var", "mean-prior variance must be positive".into(), false);
    }
    if prior.var_scale.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        err("prior.var_scale", "variance prior scale must be positive".into(), false);
    }
    if !(prior.var_shape > 1.0) || !prior.var_shape.is_finite() {
        err(
            "prior.var_shape",
            format!("variance prior shape <= 1 ({}): prior mean of variances is infinite", prior.var_shape),
            false,
        );
    }
    out
}

/// Slice variables of the chain, kept on the log scale so that repulsion
/// values far below the smallest positive double remain usable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SliceState {
    /// No slice variables (non-repulsive chain).
    None,
    /// `ln u` for the min combiner.
    Min(f64),
    /// `ln u_{sj}` for each pair, in [`crate::repulsion::pair_index`] order.
    Product(Vec<f64>),
}

impl SliceState {
    /// Slice values on the natural scale.
    pub fn values(&self) -> Vec<f64> {
        match self {
            SliceState::None => Vec::new(),
            SliceState::Min(l) => vec![l.exp()],
            SliceState::Product(v) => v.iter().map(|l| l.exp()).collect(),
        }
    }
}

/// Full state of one chain. Allocations are zero-based component indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureState {
    pub weights: Vec<f64>,
    pub components: Vec<Component>,
    pub allocations: Vec<usize>,
    pub slice: SliceState,
}

impl MixtureState {
    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.components.first().map_or(0, Component::dim)
    }

    /// Checks the structural invariants of the state.
    pub fn check(&self) -> Result<()> {
        if self.weights.len() != self.components.len() {
            return Err(Error::input("weights and components differ in length"));
        }
        if self.components.is_empty() {
            return Err(Error::input("state has no components"));
        }
        let m = self.dim();
        for c in &self.components {
            c.check()?;
            if c.dim() != m {
                return Err(Error::input("components differ in dimension"));
            }
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::input("weights must be nonnegative"));
        }
        let s: f64 = self.weights.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::input(format!("weights sum to {s}, not 1")));
        }
        if self.allocations.iter().any(|&z| z >= self.k()) {
            return Err(Error::input("allocation out of range"));
        }
        let slice_ok = match &self.slice {
            SliceState::None => true,
            SliceState::Min(l) => *l <= 0.0,
            SliceState::Product(v) => v.iter().all(|l| *l <= 0.0),
        };
        if !slice_ok {
            return Err(Error::input("slice value outside [0, 1]"));
        }
        Ok(())
    }
}

/// Log of the mixture density at `y`, by log-sum-exp over components.
pub fn ln_mixture_density(weights: &[f64], components: &[Component], y: &[f64]) -> f64 {
    let mut mx = f64::NEG_INFINITY;
    let mut terms = Vec::with_capacity(components.len());
    for (w, c) in weights.iter().zip(components) {
        let t = w.ln() + c.ln_pdf(y);
        mx = mx.max(t);
        terms.push(t);
    }
    if mx == f64::NEG_INFINITY {
        return mx;
    }
    mx + terms.iter().map(|t| (t - mx).exp()).sum::<f64>().ln()
}

/// Mixture density `sum_h p_h prod_d N(y_d; mu_hd, var_hd)`.
pub fn eval_mixture_density(state: &MixtureState, y: &[f64]) -> Result<f64> {
    if y.len() != state.dim() {
        return Err(Error::input(format!(
            "point has dimension {}, mixture has dimension {}",
            y.len(),
            state.dim()
        )));
    }
    Ok(mixture_density(&state.weights, &state.components, y))
}

/// Unchecked mixture density on the natural scale.
pub fn mixture_density(weights: &[f64], components: &[Component], y: &[f64]) -> f64 {
    weights
        .iter()
        .zip(components)
        .map(|(w, c)| {
            let mut q = 0.0;
            let mut det = 1.0;
            for d in 0..y.len() {
                let z = y[d] - c.mean[d];
                q += z * z / c.var[d];
                det *= 2.0 * PI * c.var[d];
            }
            w * (-0.5 * q).exp() / det.sqrt()
        })
        .sum()
}
