//! Pairwise repulsion between mixture components.
//!
//! The repulsive prior on component parameters is
//!
//! ```text
//! pi(gamma) ∝ prod_j g0(gamma_j) * h(gamma)
//! ```
//!
//! where `h` combines `g(d(gamma_s, gamma_j))` over all pairs `j < s`, either
//! as a product or as a minimum, and `g(d) = exp(-tau * d^-nu)`. Everything
//! here can be evaluated on the log scale; `ln g` reaches `-inf` only at
//! `d = 0`, while `g` itself underflows for distances well above zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BasePrior, Component};

/// What the pairwise distance measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Case {
    /// Symmetric Kullback-Leibler divergence between whole kernels.
    FullKernel,
    /// Euclidean distance between locations.
    LocationOnly,
}

/// How pairwise terms are combined into `h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combiner {
    Product,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepulsionSpec {
    pub case: Case,
    pub combiner: Combiner,
    pub tau: f64,
    pub nu: u32,
}

impl RepulsionSpec {
    pub fn new(case: Case, combiner: Combiner, tau: f64, nu: u32) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::input(format!("tau must be positive, got {tau}")));
        }
        if nu == 0 {
            return Err(Error::input("nu must be a positive integer"));
        }
        Ok(RepulsionSpec { case, combiner, tau, nu })
    }

    /// Default exponent: 2 for whole-kernel repulsion, 1 for locations only.
    pub fn default_nu(case: Case) -> u32 {
        match case {
            Case::FullKernel => 2,
            Case::LocationOnly => 1,
        }
    }

    /// `ln g(d) = -tau d^-nu`, with `ln g(0) = -inf`.
    #[inline]
    pub fn ln_g(&self, d: f64) -> f64 {
        if d <= 0.0 {
            return f64::NEG_INFINITY;
        }
        -self.tau * d.powi(-(self.nu as i32))
    }

    /// `g(d) = exp(-tau d^-nu)`; exactly 0 at `d = 0`.
    #[inline]
    pub fn g(&self, d: f64) -> f64 {
        self.ln_g(d).exp()
    }

    /// The distance `d` with `ln g(d) = ln_u`. `ln_u = -inf` gives 0 and
    /// `ln_u = 0` gives infinity.
    #[inline]
    pub fn threshold_from_ln(&self, ln_u: f64) -> f64 {
        if ln_u == f64::NEG_INFINITY {
            return 0.0;
        }
        (self.tau / -ln_u).powf(1.0 / self.nu as f64)
    }

    /// Inverse of `g` on `(0, 1)`.
    pub fn g_inverse(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::input(format!("g_inverse needs u in (0, 1), got {u}")));
        }
        Ok(self.threshold_from_ln(u.ln()))
    }

    pub fn distance(&self, a: &Component, b: &Component) -> Result<f64> {
        distance(self.case, a, b)
    }
}

/// Number of unordered pairs among `k` components.
#[inline]
pub fn pair_count(k: usize) -> usize {
    k * k.saturating_sub(1) / 2
}

/// Position of pair `(s, j)`, `j < s`, in the flattened pair set.
#[inline]
pub fn pair_index(s: usize, j: usize) -> usize {
    debug_assert!(j < s);
    s * (s - 1) / 2 + j
}

/// The pair set `{(s, j) : j < s}` in [`pair_index`] order.
pub fn pairs(k: usize) -> impl Iterator<Item = (usize, usize)> {
    (1..k).flat_map(|s| (0..s).map(move |j| (s, j)))
}

/// Pairwise distance between two components. Symmetric in its arguments.
pub fn distance(case: Case, a: &Component, b: &Component) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::input(format!("components have dimensions {} and {}", a.dim(), b.dim())));
    }
    Ok(distance_unchecked(case, a, b))
}

#[inline]
pub(crate) fn distance_unchecked(case: Case, a: &Component, b: &Component) -> f64 {
    match case {
        Case::LocationOnly => a
            .mean
            .iter()
            .zip(&b.mean)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt(),
        Case::FullKernel => {
            let mut s = 0.0;
            for d in 0..a.dim() {
                let (va, vb) = (a.var[d], b.var[d]);
                let dm = a.mean[d] - b.mean[d];
                // each dimension contributes va/vb + vb/va - 2 >= 0
                s += va / vb + vb / va - 2.0 + dm * dm * (1.0 / va + 1.0 / vb);
            }
            s.max(0.0)
        }
    }
}

/// All pairwise distances in [`pair_index`] order.
pub fn pairwise_distances(case: Case, comps: &[Component]) -> Vec<f64> {
    pairs(comps.len()).map(|(s, j)| distance_unchecked(case, &comps[s], &comps[j])).collect()
}

/// Mean pairwise distance `d-bar`; needs at least two components.
pub fn mean_pairwise_distance(case: Case, comps: &[Component]) -> f64 {
    let d = pairwise_distances(case, comps);
    d.iter().sum::<f64>() / d.len() as f64
}

/// `ln h(gamma)`; 0 for a single component.
pub fn ln_h(spec: &RepulsionSpec, comps: &[Component]) -> f64 {
    let mut acc = 0.0f64;
    let mut first = true;
    for (s, j) in pairs(comps.len()) {
        let lg = spec.ln_g(distance_unchecked(spec.case, &comps[s], &comps[j]));
        match spec.combiner {
            Combiner::Product => acc += lg,
            Combiner::Min => {
                acc = if first { lg } else { acc.min(lg) };
                first = false;
            }
        }
    }
    acc
}

/// `h(gamma)` on the natural scale, in `[0, 1]`.
pub fn h_combine(spec: &RepulsionSpec, comps: &[Component]) -> f64 {
    ln_h(spec, comps).exp()
}

/// `sum_j ln g0(gamma_j) + ln h(gamma)`, without the normalizing constant.
pub fn log_prior_unnormalized(spec: &RepulsionSpec, prior: &BasePrior, comps: &[Component]) -> f64 {
    let lh = ln_h(spec, comps);
    if lh == f64::NEG_INFINITY {
        return lh;
    }
    comps.iter().map(|c| prior.ln_density(c)).sum::<f64>() + lh
}
