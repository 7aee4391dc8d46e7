//! Exact draws from univariate laws restricted to a union of intervals.
//!
//! Interval masses are computed from whichever tail keeps precision, a piece
//! is chosen in proportion to its mass, and the draw is found by bisection on
//! the CDF inside that piece.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::{checked_gamma_lr, checked_gamma_ur};

use super::allowed::AllowedSet;
use crate::error::{Error, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Allowed sets with less base mass than this are treated as empty.
pub const MIN_MASS: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum UnivariateLaw {
    Normal { mean: f64, var: f64 },
    /// Inverse-gamma with density `∝ x^-(shape+1) exp(-scale / x)`.
    InverseGamma { shape: f64, scale: f64 },
}

impl UnivariateLaw {
    /// Support as an open interval.
    pub fn support(&self) -> (f64, f64) {
        match self {
            UnivariateLaw::Normal { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            UnivariateLaw::InverseGamma { .. } => (0.0, f64::INFINITY),
        }
    }

    /// A central point; masses left of it use the CDF, right of it the
    /// survival function.
    fn split(&self) -> f64 {
        match *self {
            UnivariateLaw::Normal { mean, .. } => mean,
            UnivariateLaw::InverseGamma { shape, scale } => scale / shape,
        }
    }

    /// A rough spread used to grow brackets towards infinite endpoints.
    fn spread(&self) -> f64 {
        match *self {
            UnivariateLaw::Normal { var, .. } => var.sqrt(),
            UnivariateLaw::InverseGamma { shape, scale } => scale / shape,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            UnivariateLaw::Normal { mean, var } => {
                if x == f64::NEG_INFINITY {
                    return 0.0;
                }
                if x == f64::INFINITY {
                    return 1.0;
                }
                0.5 * erfc(-(x - mean) / (var.sqrt() * SQRT_2))
            }
            UnivariateLaw::InverseGamma { shape, scale } => {
                if x <= 0.0 {
                    return 0.0;
                }
                if x == f64::INFINITY {
                    return 1.0;
                }
                let t = scale / x;
                if t == f64::INFINITY {
                    return 0.0;
                }
                if t == 0.0 {
                    return 1.0;
                }
                checked_gamma_ur(shape, t).unwrap_or(f64::NAN)
            }
        }
    }

    pub fn sf(&self, x: f64) -> f64 {
        match *self {
            UnivariateLaw::Normal { mean, var } => {
                if x == f64::NEG_INFINITY {
                    return 1.0;
                }
                if x == f64::INFINITY {
                    return 0.0;
                }
                0.5 * erfc((x - mean) / (var.sqrt() * SQRT_2))
            }
            UnivariateLaw::InverseGamma { shape, scale } => {
                if x <= 0.0 {
                    return 1.0;
                }
                if x == f64::INFINITY {
                    return 0.0;
                }
                let t = scale / x;
                if t == f64::INFINITY {
                    return 1.0;
                }
                if t == 0.0 {
                    return 0.0;
                }
                checked_gamma_lr(shape, t).unwrap_or(f64::NAN)
            }
        }
    }

    /// Probability of the interval `(a, b)`, computed from the more precise tail.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let c = self.split();
        let m = if b <= c {
            self.cdf(b) - self.cdf(a)
        } else if a >= c {
            self.sf(a) - self.sf(b)
        } else {
            1.0 - self.cdf(a) - self.sf(b)
        };
        m.max(0.0)
    }

    /// Untruncated draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            UnivariateLaw::Normal { mean, var } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + var.sqrt() * z
            }
            UnivariateLaw::InverseGamma { shape, scale } => {
                let g = Gamma::new(shape, 1.0).expect("positive shape").sample(rng);
                scale / g
            }
        }
    }
}

/// Draws from `law` restricted to `allowed`.
///
/// Fails with a sampler error when the allowed set carries less than
/// [`MIN_MASS`] of the law's probability.
pub fn sample_truncated<R: Rng + ?Sized>(law: &UnivariateLaw, allowed: &AllowedSet, rng: &mut R) -> Result<f64> {
    let (lo, hi) = law.support();
    let pieces: Vec<(f64, f64)> = allowed
        .intervals()
        .iter()
        .map(|&(a, b)| (a.max(lo), b.min(hi)))
        .filter(|(a, b)| a < b)
        .collect();
    if pieces.len() == 1 && pieces[0] == (lo, hi) {
        return Ok(law.sample(rng));
    }
    let masses: Vec<f64> = pieces.iter().map(|&(a, b)| law.mass(a, b)).collect();
    let total: f64 = masses.iter().sum();
    if !(total >= MIN_MASS) {
        return Err(Error::Sampler(format!(
            "slice region numerically empty: mass {total:e} of {law:?} on {:?}",
            allowed.intervals()
        )));
    }
    let mut pick = rng.random::<f64>() * total;
    let mut idx = pieces.len() - 1;
    for (i, m) in masses.iter().enumerate() {
        if pick < *m {
            idx = i;
            break;
        }
        pick -= m;
    }
    // a zero-mass piece can only be hit through rounding of the last subtraction
    while masses[idx] == 0.0 && idx > 0 {
        idx -= 1;
    }
    let (a, b) = pieces[idx];
    let target = rng.random::<f64>() * masses[idx];
    Ok(invert_in_interval(law, a, b, masses[idx], target))
}

/// Finds `x` in `(a, b)` with `mass(a, x) = target`.
fn invert_in_interval(law: &UnivariateLaw, a: f64, b: f64, piece_mass: f64, target: f64) -> f64 {
    let f = |x: f64| law.mass(a, x);
    let mut lo = a;
    let mut hi = b;
    let spread = law.spread();
    if lo == f64::NEG_INFINITY {
        let anchor = if hi.is_finite() { hi.min(law.split()) } else { law.split() };
        let mut w = spread;
        lo = anchor - w;
        while f(lo) > target && w < 1e300 {
            hi = hi.min(lo);
            w *= 2.0;
            lo = anchor - w;
        }
    }
    if hi == f64::INFINITY {
        let anchor = lo.max(law.split());
        let mut w = spread;
        hi = anchor + w;
        while f(hi) < target && w < 1e300 {
            lo = lo.max(hi);
            w *= 2.0;
            hi = anchor + w;
        }
    }
    let tol = 1e-12 * piece_mass;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if (fm - target).abs() <= tol {
            lo = mid;
            hi = mid;
            break;
        }
        if fm < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    // stay strictly inside the open interval
    if x <= a {
        next_up(a).min(b)
    } else if x >= b {
        next_down(b).max(a)
    } else {
        x
    }
}

fn next_up(x: f64) -> f64 {
    if x == f64::INFINITY {
        return x;
    }
    let bits = x.to_bits();
    if x == 0.0 {
        f64::from_bits(1)
    } else if x > 0.0 {
        f64::from_bits(bits + 1)
    } else {
        f64::from_bits(bits - 1)
    }
}

fn next_down(x: f64) -> f64 {
    -next_up(-x)
}
