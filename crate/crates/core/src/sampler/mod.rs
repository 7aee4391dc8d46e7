//! Slice-Gibbs sampler for finite mixtures under a repulsive prior.
//!
//! A latent slice variable turns the repulsion factor into an indicator
//! `1{h(gamma) > u}`. Conditional on `u`, every coordinate of every
//! component has a conjugate full conditional restricted to an explicit
//! union of intervals, so each update is an exact truncated draw.
//!
//! One sweep updates, in order: slice variables, allocations, weights, then
//! each component's locations and (whole-kernel repulsion) variances in
//! index and dimension order. With `repulsive = false` the slice step is
//! skipped and all regions are unrestricted, which gives the ordinary
//! finite-mixture Gibbs sampler.

pub mod allowed;
pub mod truncated;

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{validate_config, BasePrior, Component, MixtureConfig, MixtureState, SliceState, LN_SQRT_2PI};
use crate::repulsion::{ln_h, pair_index, pairs, Case, Combiner, RepulsionSpec};

pub use allowed::{allowed_set_location, allowed_set_scale, AllowedSet};
pub use truncated::{sample_truncated, UnivariateLaw};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    /// `false` runs the plain mixture with independent `g0` components.
    pub repulsive: bool,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig { iterations: 10_000, burn_in: 5_000, thin: 10, seed: 0, repulsive: true }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::input("iterations must be positive"));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::input(format!(
                "burn-in ({}) must be smaller than iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::input("thin must be at least 1"));
        }
        Ok(())
    }

    /// Whether zero-based iteration `t` is retained.
    pub fn keeps(&self, t: usize) -> bool {
        t >= self.burn_in && (t + 1 - self.burn_in) % self.thin == 0
    }
}

/// One retained state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    /// One-based iteration number.
    pub iter: usize,
    pub ln_h: f64,
    pub weights: Vec<f64>,
    pub components: Vec<Component>,
    pub allocations: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws {
    pub k: usize,
    pub m: usize,
    pub draws: Vec<Draw>,
}

impl PosteriorDraws {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// Concatenates chains in order.
    pub fn merge(chains: Vec<PosteriorDraws>) -> Result<PosteriorDraws> {
        let mut it = chains.into_iter();
        let mut first = it.next().ok_or_else(|| Error::input("no chains to merge"))?;
        for c in it {
            if c.k != first.k || c.m != first.m {
                return Err(Error::input("chains differ in shape"));
            }
            first.draws.extend(c.draws);
        }
        Ok(first)
    }

    /// Draws file: one row per (draw, component) with columns
    /// `iter,h,weight,mean_1..mean_m,var_1..var_m`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["iter".to_string(), "h".into(), "weight".into()];
        header.extend((1..=self.m).map(|d| format!("mean_{d}")));
        header.extend((1..=self.m).map(|d| format!("var_{d}")));
        w.write_record(&header)?;
        for d in &self.draws {
            let h = d.ln_h.exp();
            for (wt, c) in d.weights.iter().zip(&d.components) {
                let mut rec = vec![d.iter.to_string(), h.to_string(), wt.to_string()];
                rec.extend(c.mean.iter().map(|x| x.to_string()));
                rec.extend(c.var.iter().map(|x| x.to_string()));
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Per-component allocation lists.
#[derive(Debug, Clone)]
struct Members {
    idx: Vec<Vec<usize>>,
}

impl Members {
    fn build(k: usize, allocations: &[usize]) -> Self {
        let mut idx = vec![Vec::new(); k];
        for (i, &z) in allocations.iter().enumerate() {
            idx[z].push(i);
        }
        Members { idx }
    }
}

fn location_conditional(members: &[usize], data: &Dataset, prior: &BasePrior, var: f64, dim: usize) -> (f64, f64) {
    let (m0, v0) = (prior.mean_loc[dim], prior.mean_var[dim]);
    if members.is_empty() {
        return (m0, v0);
    }
    let n = members.len() as f64;
    let sum: f64 = members.iter().map(|&i| data.row(i)[dim]).sum();
    let post_var = 1.0 / (1.0 / v0 + n / var);
    (post_var * (m0 / v0 + sum / var), post_var)
}

fn scale_conditional(members: &[usize], data: &Dataset, prior: &BasePrior, mean: f64, dim: usize) -> (f64, f64) {
    let ss: f64 = members.iter().map(|&i| (data.row(i)[dim] - mean).powi(2)).sum();
    (prior.var_shape + members.len() as f64 / 2.0, prior.var_scale[dim] + 0.5 * ss)
}

/// Untruncated normal full conditional `(mean, variance)` of `mu_{j,dim}`.
pub fn conditional_base_location(state: &MixtureState, data: &Dataset, prior: &BasePrior, j: usize, dim: usize) -> (f64, f64) {
    let members: Vec<usize> = (0..data.len()).filter(|&i| state.allocations[i] == j).collect();
    location_conditional(&members, data, prior, state.components[j].var[dim], dim)
}

/// Untruncated inverse-gamma full conditional `(shape, scale)` of `sigma^2_{j,dim}`.
pub fn conditional_base_scale(state: &MixtureState, data: &Dataset, prior: &BasePrior, j: usize, dim: usize) -> (f64, f64) {
    let members: Vec<usize> = (0..data.len()).filter(|&i| state.allocations[i] == j).collect();
    scale_conditional(&members, data, prior, state.components[j].mean[dim], dim)
}

/// Resamples the slice variables given the current components.
pub fn update_slice<R: Rng + ?Sized>(state: &mut MixtureState, spec: &RepulsionSpec, rng: &mut R) -> Result<()> {
    let k = state.k();
    match spec.combiner {
        Combiner::Min => {
            let lh = ln_h(spec, &state.components);
            if lh == f64::NEG_INFINITY {
                return Err(Error::Invariant("h(gamma) = 0 before slice update".into()));
            }
            let u: f64 = rng.random();
            state.slice = SliceState::Min(if k < 2 { f64::NEG_INFINITY } else { lh + u.ln() });
        }
        Combiner::Product => {
            let mut v = Vec::with_capacity(crate::repulsion::pair_count(k));
            for (s, j) in pairs(k) {
                let lg = spec.ln_g(crate::repulsion::distance_unchecked(spec.case, &state.components[s], &state.components[j]));
                if lg == f64::NEG_INFINITY {
                    return Err(Error::Invariant(format!("g(d) = 0 for pair ({s}, {j}) before slice update")));
                }
                let u: f64 = rng.random();
                v.push(lg + u.ln());
            }
            state.slice = SliceState::Product(v);
        }
    }
    Ok(())
}

/// Whether the components satisfy the current slice constraints.
pub fn slice_valid(state: &MixtureState, spec: &RepulsionSpec) -> bool {
    match &state.slice {
        SliceState::None => true,
        SliceState::Min(l) => state.k() < 2 || ln_h(spec, &state.components) > *l,
        SliceState::Product(v) => pairs(state.k()).all(|(s, j)| {
            spec.ln_g(crate::repulsion::distance_unchecked(spec.case, &state.components[s], &state.components[j]))
                > v[pair_index(s, j)]
        }),
    }
}

/// Precomputed per-component terms for allocation probabilities.
struct KernelCache {
    ln_const: Vec<f64>,
    inv_var: Vec<Vec<f64>>,
}

impl KernelCache {
    fn new(weights: &[f64], comps: &[Component]) -> Self {
        let m = comps.first().map_or(0, Component::dim);
        let ln_const = weights
            .iter()
            .zip(comps)
            .map(|(w, c)| w.ln() - m as f64 * LN_SQRT_2PI - 0.5 * c.var.iter().map(|v| v.ln()).sum::<f64>())
            .collect();
        let inv_var = comps.iter().map(|c| c.var.iter().map(|v| 1.0 / v).collect()).collect();
        KernelCache { ln_const, inv_var }
    }

    #[inline]
    fn fill(&self, comps: &[Component], y: &[f64], out: &mut [f64]) -> f64 {
        let mut mx = f64::NEG_INFINITY;
        for (h, c) in comps.iter().enumerate() {
            let mut q = 0.0;
            for d in 0..y.len() {
                let z = y[d] - c.mean[d];
                q += z * z * self.inv_var[h][d];
            }
            let l = self.ln_const[h] - 0.5 * q;
            out[h] = l;
            mx = mx.max(l);
        }
        mx
    }
}

/// Normalized posterior allocation probabilities of one observation.
pub fn allocation_probabilities(weights: &[f64], comps: &[Component], y: &[f64]) -> Vec<f64> {
    let cache = KernelCache::new(weights, comps);
    let mut l = vec![0.0; comps.len()];
    let mx = cache.fill(comps, y, &mut l);
    let mut s = 0.0;
    for x in l.iter_mut() {
        *x = (*x - mx).exp();
        s += *x;
    }
    l.iter_mut().for_each(|x| *x /= s);
    l
}

/// `n x k` allocation-probability matrix, row-major.
pub fn classification_matrix(weights: &[f64], comps: &[Component], data: &Dataset) -> Vec<f64> {
    let k = comps.len();
    let cache = KernelCache::new(weights, comps);
    let mut out = vec![0.0; data.len() * k];
    for (i, y) in data.rows().enumerate() {
        let row = &mut out[i * k..(i + 1) * k];
        let mx = cache.fill(comps, y, row);
        let mut s = 0.0;
        for x in row.iter_mut() {
            *x = (*x - mx).exp();
            s += *x;
        }
        row.iter_mut().for_each(|x| *x /= s);
    }
    out
}

/// Draws every allocation from its full conditional.
pub fn update_allocations<R: Rng + ?Sized>(state: &mut MixtureState, data: &Dataset, rng: &mut R) {
    let k = state.k();
    let cache = KernelCache::new(&state.weights, &state.components);
    let mut buf = vec![0.0; k];
    state.allocations.resize(data.len(), 0);
    for (i, y) in data.rows().enumerate() {
        let mx = cache.fill(&state.components, y, &mut buf);
        let mut total = 0.0;
        for x in buf.iter_mut() {
            *x = (*x - mx).exp();
            total += *x;
        }
        let mut u = rng.random::<f64>() * total;
        let mut z = k - 1;
        for (h, p) in buf.iter().enumerate() {
            if u < *p {
                z = h;
                break;
            }
            u -= p;
        }
        // rounding can leave u past the last positive entry
        while buf[z] == 0.0 && z > 0 {
            z -= 1;
        }
        state.allocations[i] = z;
    }
}

/// `ln G` for `G ~ Gamma(shape, 1)`, stable for small shapes.
fn ln_gamma_draw<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape >= 1.0 {
        Gamma::new(shape, 1.0).expect("positive shape").sample(rng).ln()
    } else {
        let g = Gamma::new(shape + 1.0, 1.0).expect("positive shape").sample(rng);
        let u: f64 = rng.random();
        g.ln() + u.ln() / shape
    }
}

/// Dirichlet draw on the log scale, normalized to sum to one.
pub fn sample_dirichlet<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Vec<f64> {
    let lg: Vec<f64> = alpha.iter().map(|&a| ln_gamma_draw(a, rng)).collect();
    let mx = lg.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = lg.iter().map(|l| (l - mx).exp()).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    w
}

/// Draws the weights from `Dirichlet(alpha + counts)`.
pub fn update_weights<R: Rng + ?Sized>(state: &mut MixtureState, cfg: &MixtureConfig, rng: &mut R) {
    let mut conc = cfg.alpha.clone();
    for &z in &state.allocations {
        conc[z] += 1.0;
    }
    state.weights = sample_dirichlet(&conc, rng);
}

/// A running chain; exposes single sweeps for inspection.
pub struct Chain<'a> {
    data: &'a Dataset,
    mix: &'a MixtureConfig,
    prior: &'a BasePrior,
    spec: &'a RepulsionSpec,
    repulsive: bool,
    state: MixtureState,
}

impl<'a> Chain<'a> {
    pub fn new<R: Rng + ?Sized>(
        data: &'a Dataset,
        mix: &'a MixtureConfig,
        prior: &'a BasePrior,
        spec: &'a RepulsionSpec,
        repulsive: bool,
        rng: &mut R,
    ) -> Result<Self> {
        if data.dim() != mix.m {
            return Err(Error::input(format!("data dimension {} differs from m = {}", data.dim(), mix.m)));
        }
        let hard: Vec<_> = validate_config(mix, prior).into_iter().filter(|v| !v.warning).collect();
        if let Some(v) = hard.first() {
            return Err(Error::input(format!("{}: {}", v.field, v.message)));
        }
        let state = initialize(data, mix, prior, spec, repulsive, rng)?;
        Ok(Chain { data, mix, prior, spec, repulsive, state })
    }

    pub fn state(&self) -> &MixtureState {
        &self.state
    }

    /// One full sweep.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let (data, prior, spec) = (self.data, self.prior, self.spec);
        if self.repulsive {
            update_slice(&mut self.state, spec, rng)?;
        }
        if !data.is_empty() {
            update_allocations(&mut self.state, data, rng);
        }
        update_weights(&mut self.state, self.mix, rng);
        let members = Members::build(self.state.k(), &self.state.allocations);
        let m = self.state.dim();
        let truncate_scales = self.repulsive && spec.case == Case::FullKernel;
        for j in 0..self.state.k() {
            for d in 0..m {
                let (mean, var) = location_conditional(&members.idx[j], data, prior, self.state.components[j].var[d], d);
                let law = UnivariateLaw::Normal { mean, var };
                let x = if self.repulsive {
                    let set = allowed_set_location(&self.state, spec, j, d)?;
                    sample_truncated(&law, &set, rng).map_err(|e| self.annotate(e, j, d, "location"))?
                } else {
                    law.sample(rng)
                };
                self.state.components[j].mean[d] = x;
            }
            for d in 0..m {
                let (shape, scale) = scale_conditional(&members.idx[j], data, prior, self.state.components[j].mean[d], d);
                let law = UnivariateLaw::InverseGamma { shape, scale };
                let x = if truncate_scales {
                    let set = allowed_set_scale(&self.state, spec, j, d)?;
                    sample_truncated(&law, &set, rng).map_err(|e| self.annotate(e, j, d, "variance"))?
                } else {
                    law.sample(rng)
                };
                if !(x > 0.0 && x.is_finite()) {
                    return Err(Error::Numerical(format!("variance draw {x} for component {j}, dim {d}")));
                }
                self.state.components[j].var[d] = x;
            }
        }
        if self.repulsive && self.state.k() > 1 && ln_h(spec, &self.state.components) == f64::NEG_INFINITY {
            return Err(Error::Invariant("h(gamma) = 0 after sweep".into()));
        }
        Ok(())
    }

    fn annotate(&self, e: Error, j: usize, d: usize, what: &str) -> Error {
        match e {
            Error::Sampler(msg) => Error::Sampler(format!(
                "{msg}; while updating {what} of component {j}, dim {d}; state: {}",
                serde_json::to_string(&StateDump::of(&self.state)).unwrap_or_default()
            )),
            other => other,
        }
    }

    pub fn ln_h(&self) -> f64 {
        if self.state.k() < 2 {
            0.0
        } else {
            ln_h(self.spec, &self.state.components)
        }
    }

    fn snapshot(&self, iter: usize) -> Draw {
        Draw {
            iter,
            ln_h: self.ln_h(),
            weights: self.state.weights.clone(),
            components: self.state.components.clone(),
            allocations: self.state.allocations.clone(),
        }
    }
}

#[derive(Serialize)]
struct StateDump<'a> {
    weights: &'a [f64],
    components: &'a [Component],
    slice: &'a SliceState,
}

impl<'a> StateDump<'a> {
    fn of(s: &'a MixtureState) -> Self {
        StateDump { weights: &s.weights, components: &s.components, slice: &s.slice }
    }
}

/// Runs one chain and returns the retained, thinned draws.
pub fn run_chain<R: Rng + ?Sized>(
    data: &Dataset,
    cfg: &McmcConfig,
    mix: &MixtureConfig,
    prior: &BasePrior,
    spec: &RepulsionSpec,
    rng: &mut R,
) -> Result<PosteriorDraws> {
    cfg.validate()?;
    let mut chain = Chain::new(data, mix, prior, spec, cfg.repulsive, rng)?;
    let mut draws = Vec::with_capacity((cfg.iterations - cfg.burn_in) / cfg.thin);
    for t in 0..cfg.iterations {
        chain.step(rng)?;
        if cfg.keeps(t) {
            draws.push(chain.snapshot(t + 1));
        }
    }
    Ok(PosteriorDraws { k: mix.k, m: mix.m, draws })
}

/// Starting state: farthest-point seeding on the data, cluster moments,
/// small jitter on the means, and empirical weights.
pub fn initialize<R: Rng + ?Sized>(
    data: &Dataset,
    mix: &MixtureConfig,
    prior: &BasePrior,
    spec: &RepulsionSpec,
    repulsive: bool,
    rng: &mut R,
) -> Result<MixtureState> {
    let k = mix.k;
    let m = mix.m;
    let n = data.len();
    let slice = if repulsive {
        match spec.combiner {
            Combiner::Min => SliceState::Min(f64::NEG_INFINITY),
            Combiner::Product => SliceState::Product(vec![f64::NEG_INFINITY; crate::repulsion::pair_count(k)]),
        }
    } else {
        SliceState::None
    };

    if n == 0 {
        for _ in 0..100 {
            let comps: Vec<Component> = (0..k).map(|_| prior.sample(rng)).collect();
            if !repulsive || k < 2 || ln_h(spec, &comps) > f64::NEG_INFINITY {
                return Ok(MixtureState {
                    weights: vec![1.0 / k as f64; k],
                    components: comps,
                    allocations: Vec::new(),
                    slice,
                });
            }
        }
        return Err(Error::Sampler("could not draw a prior configuration with h > 0".into()));
    }

    // farthest-point seeding, starting from the point nearest the centroid
    let (centroid, col_var) = data.column_moments();
    let sd: Vec<f64> = col_var.iter().map(|v| if *v > 0.0 { v.sqrt() } else { 1.0 }).collect();
    let dist2 = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).zip(&sd).map(|((x, y), s)| ((x - y) / s).powi(2)).sum()
    };
    let first = (0..n)
        .min_by(|&a, &b| dist2(data.row(a), &centroid).total_cmp(&dist2(data.row(b), &centroid)))
        .expect("n > 0");
    let mut centers = vec![first];
    let mut nearest: Vec<f64> = (0..n).map(|i| dist2(data.row(i), data.row(first))).collect();
    while centers.len() < k.min(n) {
        let (far, d) = nearest
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, d)| (i, *d))
            .expect("n > 0");
        if d == 0.0 {
            break;
        }
        centers.push(far);
        for i in 0..n {
            nearest[i] = nearest[i].min(dist2(data.row(i), data.row(far)));
        }
    }
    let allocations: Vec<usize> = (0..n)
        .map(|i| {
            (0..centers.len())
                .min_by(|&a, &b| {
                    dist2(data.row(i), data.row(centers[a])).total_cmp(&dist2(data.row(i), data.row(centers[b])))
                })
                .expect("at least one center")
        })
        .collect();
    let members = Members::build(k, &allocations);

    let mut base = Vec::with_capacity(k);
    for j in 0..k {
        let idx = &members.idx[j];
        if idx.is_empty() {
            base.push(prior.sample(rng));
            continue;
        }
        let cnt = idx.len() as f64;
        let mut mean = vec![0.0; m];
        let mut var = vec![0.0; m];
        for &i in idx {
            for d in 0..m {
                mean[d] += data.row(i)[d];
            }
        }
        mean.iter_mut().for_each(|x| *x /= cnt);
        for &i in idx {
            for d in 0..m {
                var[d] += (data.row(i)[d] - mean[d]).powi(2);
            }
        }
        var.iter_mut().for_each(|x| *x = (*x / cnt).max(1e-6));
        base.push(Component { mean, var });
    }
    let weights: Vec<f64> = (0..k).map(|j| members.idx[j].len() as f64 / n as f64).collect();

    for _ in 0..100 {
        let comps: Vec<Component> = base
            .iter()
            .map(|c| {
                let mut c = c.clone();
                for d in 0..m {
                    let z: f64 = rng.sample(rand_distr::StandardNormal);
                    c.mean[d] += 1e-3 * sd[d] * z;
                }
                c
            })
            .collect();
        if !repulsive || k < 2 || ln_h(spec, &comps) > f64::NEG_INFINITY {
            return Ok(MixtureState { weights, components: comps, allocations, slice });
        }
    }
    Err(Error::Sampler("initial configuration has coincident components after 100 jitters".into()))
}
