//! Slice regions for one coordinate of one component.
//!
//! Given the slice variables, component `j` must keep every pair `(s, j)`
//! at distance above the threshold `r_s = g^-1(u)`. Holding all other
//! coordinates fixed, each pair forbids one open interval of the free
//! coordinate; the allowed set is the complement of their union.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MixtureState, SliceState};
use crate::repulsion::{pair_index, Case, RepulsionSpec};

/// Sorted, disjoint open intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllowedSet {
    intervals: Vec<(f64, f64)>,
}

impl AllowedSet {
    pub fn whole_line() -> Self {
        AllowedSet { intervals: vec![(f64::NEG_INFINITY, f64::INFINITY)] }
    }

    pub fn positive_half_line() -> Self {
        AllowedSet { intervals: vec![(0.0, f64::INFINITY)] }
    }

    /// Takes intervals as given; they must already be sorted and disjoint.
    pub fn from_intervals(intervals: Vec<(f64, f64)>) -> Self {
        debug_assert!(intervals.windows(2).all(|w| w[0].1 <= w[1].0));
        AllowedSet { intervals }
    }

    /// `domain` minus the union of the `excluded` open intervals. The
    /// endpoints of excluded intervals stay allowed only in the measure-zero
    /// sense; the result is a union of open intervals.
    pub fn complement_within(domain: (f64, f64), mut excluded: Vec<(f64, f64)>) -> Self {
        excluded.retain(|(a, b)| a < b);
        excluded.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut out = Vec::new();
        let mut cursor = domain.0;
        for (a, b) in excluded {
            if b <= cursor {
                continue;
            }
            if a > cursor {
                out.push((cursor, a.min(domain.1)));
            }
            cursor = cursor.max(b);
            if cursor >= domain.1 {
                break;
            }
        }
        if cursor < domain.1 {
            out.push((cursor, domain.1));
        }
        out.retain(|(a, b)| a < b);
        AllowedSet { intervals: out }
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| a < x && x < b)
    }
}

/// Distance threshold that pair `(s, j)` must exceed, from the slice state.
pub(crate) fn pair_threshold(spec: &RepulsionSpec, slice: &SliceState, s: usize, j: usize) -> f64 {
    match slice {
        SliceState::None => 0.0,
        SliceState::Min(ln_u) => spec.threshold_from_ln(*ln_u),
        SliceState::Product(v) => {
            let (hi, lo) = if s > j { (s, j) } else { (j, s) };
            spec.threshold_from_ln(v[pair_index(hi, lo)])
        }
    }
}

/// Allowed values of `mu_{j,dim}` with everything else fixed.
pub fn allowed_set_location(state: &MixtureState, spec: &RepulsionSpec, j: usize, dim: usize) -> Result<AllowedSet> {
    let cj = &state.components[j];
    let m = cj.dim();
    let mut excluded = Vec::with_capacity(state.k());
    for (s, cs) in state.components.iter().enumerate() {
        if s == j {
            continue;
        }
        let r = pair_threshold(spec, &state.slice, s, j);
        if r <= 0.0 {
            continue;
        }
        let half_width_sq = match spec.case {
            Case::LocationOnly => {
                let rest: f64 = (0..m)
                    .filter(|&d| d != dim)
                    .map(|d| (cj.mean[d] - cs.mean[d]).powi(2))
                    .sum();
                r * r - rest
            }
            Case::FullKernel => {
                // s_js = C + coef (x - mu_s)^2 with everything but the free mean term in C
                let mut c = -2.0 * m as f64;
                for d in 0..m {
                    let (vj, vs) = (cj.var[d], cs.var[d]);
                    c += vj / vs + vs / vj;
                    if d != dim {
                        c += (cj.mean[d] - cs.mean[d]).powi(2) * (1.0 / vj + 1.0 / vs);
                    }
                }
                let coef = 1.0 / cj.var[dim] + 1.0 / cs.var[dim];
                (r - c) / coef
            }
        };
        if half_width_sq > 0.0 {
            let w = half_width_sq.sqrt();
            excluded.push((cs.mean[dim] - w, cs.mean[dim] + w));
        }
    }
    let set = AllowedSet::complement_within((f64::NEG_INFINITY, f64::INFINITY), excluded);
    if set.is_empty() {
        return Err(Error::Invariant(format!("empty allowed set for location of component {j}, dim {dim}")));
    }
    Ok(set)
}

/// Roots of `a x^2 + b x + c` with `a > 0`, when real and distinct.
pub(crate) fn quadratic_roots(a: f64, b: f64, c: f64) -> Option<(f64, f64)> {
    let disc = b * b - 4.0 * a * c;
    if !(disc > 0.0) {
        return None;
    }
    let sq = disc.sqrt();
    let q = -0.5 * (b + b.signum() * sq);
    if q == 0.0 {
        return None;
    }
    let (x1, x2) = (q / a, c / q);
    Some((x1.min(x2), x1.max(x2)))
}

/// Allowed values of the variance `sigma^2_{j,dim}`; whole-kernel repulsion only.
pub fn allowed_set_scale(state: &MixtureState, spec: &RepulsionSpec, j: usize, dim: usize) -> Result<AllowedSet> {
    if spec.case != Case::FullKernel {
        return Err(Error::input("scale slice sets only exist for whole-kernel repulsion"));
    }
    let cj = &state.components[j];
    let m = cj.dim();
    let mut excluded = Vec::new();
    for (s, cs) in state.components.iter().enumerate() {
        if s == j {
            continue;
        }
        let r = pair_threshold(spec, &state.slice, s, j);
        if r <= 0.0 {
            continue;
        }
        // s_js = a x + b / x + c with x the free variance
        let vs = cs.var[dim];
        let dm2 = (cj.mean[dim] - cs.mean[dim]).powi(2);
        let a = 1.0 / vs;
        let b = vs + dm2;
        let mut c = dm2 / vs - 2.0 * m as f64;
        for d in 0..m {
            if d == dim {
                continue;
            }
            let (vj, vsd) = (cj.var[d], cs.var[d]);
            c += vj / vsd + vsd / vj + (cj.mean[d] - cs.mean[d]).powi(2) * (1.0 / vj + 1.0 / vsd);
        }
        // excluded where a x^2 + (c - r) x + b < 0
        if let Some((x1, x2)) = quadratic_roots(a, c - r, b) {
            if x2 > 0.0 {
                excluded.push((x1.max(0.0), x2));
            }
        }
    }
    let set = AllowedSet::complement_within((0.0, f64::INFINITY), excluded);
    if set.is_empty() {
        return Err(Error::Invariant(format!("empty allowed set for variance of component {j}, dim {dim}")));
    }
    Ok(set)
}
