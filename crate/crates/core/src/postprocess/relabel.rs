//! Stephens' relabeling by Kullback-Leibler matching of classification
//! probabilities.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::assignment::min_cost_assignment;
use crate::data::Dataset;
use crate::sampler::{classification_matrix, Draw, PosteriorDraws};

const Q_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelabeledDraws {
    pub draws: PosteriorDraws,
    /// `permutations[t][h]` is the new label of original component `h` in draw `t`.
    pub permutations: Vec<Vec<usize>>,
    /// Total cost after each sweep.
    pub cost_history: Vec<f64>,
}

impl RelabeledDraws {
    pub fn identity(draws: PosteriorDraws) -> Self {
        let perms = vec![(0..draws.k).collect(); draws.len()];
        RelabeledDraws { draws, permutations: perms, cost_history: Vec::new() }
    }

    pub fn sweeps(&self) -> usize {
        self.cost_history.len()
    }
}

/// Applies `perm` (old label -> new label) to one draw.
pub fn permute_draw(d: &Draw, perm: &[usize]) -> Draw {
    let mut out = d.clone();
    for (h, &to) in perm.iter().enumerate() {
        out.weights[to] = d.weights[h];
        out.components[to] = d.components[h].clone();
    }
    for z in out.allocations.iter_mut() {
        *z = perm[*z];
    }
    out
}

/// Relabels `draws` against `data`; at most `max_sweeps` sweeps.
pub fn relabel_stephens(draws: &PosteriorDraws, data: &Dataset, max_sweeps: usize) -> RelabeledDraws {
    let k = draws.k;
    let n = data.len();
    let t_len = draws.len();
    if t_len == 0 || n == 0 || k < 2 {
        return RelabeledDraws::identity(draws.clone());
    }
    let probs: Vec<Vec<f64>> = draws
        .draws
        .par_iter()
        .map(|d| classification_matrix(&d.weights, &d.components, data))
        .collect();
    // sum_i P log P per (draw, component); constant under relabeling
    let entropy: Vec<Vec<f64>> = probs
        .iter()
        .map(|p| {
            let mut e = vec![0.0; k];
            for i in 0..n {
                for h in 0..k {
                    let x = p[i * k + h];
                    if x > 0.0 {
                        e[h] += x * x.ln();
                    }
                }
            }
            e
        })
        .collect();

    let mut perms: Vec<Vec<usize>> = vec![(0..k).collect(); t_len];
    let mut history = Vec::new();
    let mut prev = f64::INFINITY;
    for _ in 0..max_sweeps.max(1) {
        let mut q = vec![0.0; n * k];
        for (p, perm) in probs.iter().zip(&perms) {
            for i in 0..n {
                for h in 0..k {
                    q[i * k + perm[h]] += p[i * k + h];
                }
            }
        }
        let log_q: Vec<f64> = q.iter().map(|x| (x / t_len as f64).max(Q_FLOOR).ln()).collect();

        let updated: Vec<(Vec<usize>, f64)> = probs
            .par_iter()
            .zip(entropy.par_iter())
            .map(|(p, ent)| {
                let mut c: Vec<Vec<f64>> = ent.iter().map(|&e| vec![e; k]).collect();
                for i in 0..n {
                    let lq = &log_q[i * k..(i + 1) * k];
                    for h in 0..k {
                        let x = p[i * k + h];
                        if x > 0.0 {
                            for l in 0..k {
                                c[h][l] -= x * lq[l];
                            }
                        }
                    }
                }
                let a = min_cost_assignment(&c);
                let tot = a.iter().enumerate().map(|(h, &l)| c[h][l]).sum::<f64>();
                (a, tot)
            })
            .collect();
        let changed = updated.iter().zip(&perms).any(|((a, _), old)| a != old);
        let total: f64 = updated.iter().map(|(_, c)| c).sum();
        perms = updated.into_iter().map(|(a, _)| a).collect();
        history.push(total);
        if !changed || prev - total < 1e-10 {
            break;
        }
        prev = total;
    }

    let relabeled = PosteriorDraws {
        k,
        m: draws.m,
        draws: draws.draws.iter().zip(&perms).map(|(d, p)| permute_draw(d, p)).collect(),
    };
    RelabeledDraws { draws: relabeled, permutations: perms, cost_history: history }
}
