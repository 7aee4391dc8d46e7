//! Accuracy metrics against a known generating density and labels.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{mixture_density, Component};
use crate::sampler::PosteriorDraws;

const DENSITY_FLOOR: f64 = 1e-300;
const KL_REL_TOL: f64 = 1e-6;
const KL_ABS_TOL: f64 = 1e-10;

/// A density that can be evaluated pointwise.
pub trait DensityOracle: Sync {
    fn dim(&self) -> usize;
    fn pdf(&self, y: &[f64]) -> f64;
    /// Per-dimension mean and standard deviation.
    fn moments(&self) -> (Vec<f64>, Vec<f64>);
}

/// Finite Gaussian mixture as an oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureOracle {
    pub weights: Vec<f64>,
    pub components: Vec<Component>,
}

impl DensityOracle for MixtureOracle {
    fn dim(&self) -> usize {
        self.components[0].dim()
    }

    fn pdf(&self, y: &[f64]) -> f64 {
        mixture_density(&self.weights, &self.components, y)
    }

    fn moments(&self) -> (Vec<f64>, Vec<f64>) {
        let m = self.dim();
        let mut mean = vec![0.0; m];
        let mut second = vec![0.0; m];
        for (w, c) in self.weights.iter().zip(&self.components) {
            for d in 0..m {
                mean[d] += w * c.mean[d];
                second[d] += w * (c.var[d] + c.mean[d] * c.mean[d]);
            }
        }
        let sd = (0..m).map(|d| (second[d] - mean[d] * mean[d]).max(0.0).sqrt()).collect();
        (mean, sd)
    }
}

/// Tensor trapezoid grid over `mean +/- 8 sd` of the reference density.
#[derive(Debug, Clone)]
struct Grid {
    axes: Vec<Vec<f64>>,
    steps: Vec<f64>,
}

impl Grid {
    fn new(mean: &[f64], sd: &[f64], intervals: usize) -> Self {
        let mut axes = Vec::new();
        let mut steps = Vec::new();
        for d in 0..mean.len() {
            let (lo, hi) = (mean[d] - 8.0 * sd[d], mean[d] + 8.0 * sd[d]);
            let h = (hi - lo) / intervals as f64;
            axes.push((0..=intervals).map(|i| lo + h * i as f64).collect());
            steps.push(h);
        }
        Grid { axes, steps }
    }

    fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    fn point(&self, mut idx: usize, out: &mut [f64]) {
        for d in (0..self.axes.len()).rev() {
            let len = self.axes[d].len();
            out[d] = self.axes[d][idx % len];
            idx /= len;
        }
    }
}

/// `KL(f0, fhat)` quadrature with precomputed reference values.
pub struct KlQuadrature {
    grids: Vec<(Grid, Vec<f64>, Vec<Vec<f64>>)>,
}

impl KlQuadrature {
    /// 2048 intervals per axis in one dimension, 256 in two; other
    /// dimensions are not supported.
    pub fn new(truth: &dyn DensityOracle) -> Result<Self> {
        let base = match truth.dim() {
            1 => 2048,
            2 => 256,
            m => return Err(Error::input(format!("KL quadrature supports 1 or 2 dimensions, got {m}"))),
        };
        let max_refine = if truth.dim() == 1 { 4 } else { 1 };
        let (mean, sd) = truth.moments();
        if sd.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Numerical(format!("reference density has degenerate spread {sd:?}")));
        }
        let mut grids = Vec::new();
        for r in 0..=max_refine {
            let g = Grid::new(&mean, &sd, base << r);
            let mut y = vec![0.0; truth.dim()];
            let mut f0 = Vec::with_capacity(g.len());
            let mut pts = Vec::with_capacity(g.len());
            for i in 0..g.len() {
                g.point(i, &mut y);
                f0.push(truth.pdf(&y));
                pts.push(y.clone());
            }
            grids.push((g, f0, pts));
        }
        Ok(KlQuadrature { grids })
    }

    fn integrate(&self, level: usize, fhat: &dyn Fn(&[f64]) -> f64) -> Result<(f64, f64)> {
        let (g, f0, pts) = &self.grids[level];
        let m = g.axes.len();
        let mut fine = 0.0;
        let mut coarse = 0.0;
        for (i, y) in pts.iter().enumerate() {
            let p = f0[i];
            if p <= 0.0 {
                continue;
            }
            let q = fhat(y).max(DENSITY_FLOOR);
            let v = p * (p.ln() - q.ln());
            if !v.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite KL integrand at {y:?}: f0 = {p}, fhat = {q}, grid spacing {:?}",
                    g.steps
                )));
            }
            let mut idx = vec![0; m];
            let mut rem = i;
            for d in (0..m).rev() {
                idx[d] = rem % g.axes[d].len();
                rem /= g.axes[d].len();
            }
            let mut wf = 1.0;
            let mut wc = 1.0;
            let mut on_coarse = true;
            for d in 0..m {
                let last = g.axes[d].len() - 1;
                let end = idx[d] == 0 || idx[d] == last;
                wf *= if end { 0.5 } else { 1.0 } * g.steps[d];
                if idx[d] % 2 == 1 {
                    on_coarse = false;
                } else {
                    wc *= if end { 0.5 } else { 1.0 } * 2.0 * g.steps[d];
                }
            }
            fine += wf * v;
            if on_coarse {
                coarse += wc * v;
            }
        }
        Ok((fine, coarse))
    }

    /// KL divergence of `fhat` from the reference, refining the grid until
    /// halving the spacing changes the result by less than `1e-6` relative.
    pub fn kl(&self, fhat: &dyn Fn(&[f64]) -> f64) -> Result<f64> {
        let mut last = 0.0;
        for level in 0..self.grids.len() {
            let (fine, coarse) = self.integrate(level, fhat)?;
            last = fine;
            if (fine - coarse).abs() <= KL_REL_TOL * fine.abs() + KL_ABS_TOL {
                break;
            }
        }
        Ok(last.max(0.0))
    }

    pub fn kl_mixture(&self, weights: &[f64], comps: &[Component]) -> Result<f64> {
        self.kl(&|y| mixture_density(weights, comps, y))
    }
}

/// `KL(f0, fhat)` for every retained draw.
pub fn kl_to_truth(draws: &PosteriorDraws, truth: &dyn DensityOracle) -> Result<Vec<f64>> {
    if truth.dim() != draws.m {
        return Err(Error::input(format!("truth dimension {} differs from draws ({})", truth.dim(), draws.m)));
    }
    let quad = KlQuadrature::new(truth)?;
    draws.draws.par_iter().map(|d| quad.kl_mixture(&d.weights, &d.components)).collect()
}

/// `KL(f0, posterior mean density)`.
pub fn kl_of_mean_density(draws: &PosteriorDraws, truth: &dyn DensityOracle) -> Result<f64> {
    if draws.is_empty() {
        return Err(Error::input("no draws"));
    }
    let quad = KlQuadrature::new(truth)?;
    let t = draws.len() as f64;
    quad.kl(&|y| draws.draws.iter().map(|d| mixture_density(&d.weights, &d.components, y)).sum::<f64>() / t)
}

/// Mean over pairs `i < j` of `|S_ij - T_ij|`, with `S` the posterior
/// co-allocation frequency and `T` the true co-membership indicator.
pub fn similarity_misclassification(draws: &PosteriorDraws, labels: &[usize]) -> Result<f64> {
    let n = labels.len();
    if draws.is_empty() {
        return Err(Error::input("no draws"));
    }
    if let Some(d) = draws.draws.iter().find(|d| d.allocations.len() != n) {
        return Err(Error::input(format!(
            "draw {} has {} allocations but {n} labels were given",
            d.iter,
            d.allocations.len()
        )));
    }
    if n < 2 {
        return Ok(0.0);
    }
    let pair = |i: usize, j: usize| i * n - i * (i + 1) / 2 + (j - i - 1);
    let mut counts = vec![0u32; n * (n - 1) / 2];
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); draws.k];
    for d in &draws.draws {
        members.iter_mut().for_each(Vec::clear);
        for (i, &z) in d.allocations.iter().enumerate() {
            members[z].push(i);
        }
        for g in &members {
            for (a, &i) in g.iter().enumerate() {
                for &j in &g[a + 1..] {
                    counts[pair(i, j)] += 1;
                }
            }
        }
    }
    let t = draws.len() as f64;
    let mut acc = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let s = counts[pair(i, j)] as f64 / t;
            let truth = if labels[i] == labels[j] { 1.0 } else { 0.0 };
            acc += (s - truth).abs();
        }
    }
    Ok(acc / (n * (n - 1) / 2) as f64)
}

/// Sum of the `k - k0` smallest weights.
pub fn sum_extra_weights(weights: &[f64], k0: usize) -> f64 {
    if k0 >= weights.len() {
        return 0.0;
    }
    let mut w = weights.to_vec();
    w.sort_by(f64::total_cmp);
    w[..weights.len() - k0].iter().sum()
}
