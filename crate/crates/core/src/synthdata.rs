//! Seeded synthetic scenarios with exact generating densities.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, Gamma as GammaPdf, StudentsT};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::postprocess::DensityOracle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    Ia,
    Ib,
    Ic,
    IIa,
    IIb,
    IIIa,
    IIIb,
    IV,
}

impl Scenario {
    pub const ALL: [Scenario; 8] = [
        Scenario::Ia,
        Scenario::Ib,
        Scenario::Ic,
        Scenario::IIa,
        Scenario::IIb,
        Scenario::IIIa,
        Scenario::IIIb,
        Scenario::IV,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Ia => "Ia",
            Scenario::Ib => "Ib",
            Scenario::Ic => "Ic",
            Scenario::IIa => "IIa",
            Scenario::IIb => "IIb",
            Scenario::IIIa => "IIIa",
            Scenario::IIIb => "IIIb",
            Scenario::IV => "IV",
        }
    }

    pub fn truth(self) -> TruthDensity {
        use Part::*;
        let parts = match self {
            Scenario::Ia => vec![(1.0, Gaussian { mean: vec![0.0], cov: vec![1.0] })],
            Scenario::Ib => vec![
                (0.7, Gaussian { mean: vec![0.0], cov: vec![0.04] }),
                (0.3, Gaussian { mean: vec![0.0], cov: vec![4.0] }),
            ],
            Scenario::Ic => vec![(1.0, StudentT { df: 4.0 })],
            Scenario::IIa | Scenario::IIb => {
                let shift = if self == Scenario::IIa { 2.5 } else { 6.0 };
                vec![
                    (0.5, Gaussian { mean: vec![0.0], cov: vec![1.0] }),
                    (0.5, Gaussian { mean: vec![shift], cov: vec![1.0] }),
                ]
            }
            Scenario::IIIa | Scenario::IIIb => {
                let shift = if self == Scenario::IIIa { 2.5 } else { 6.0 };
                vec![
                    (0.5, Gaussian { mean: vec![0.0], cov: vec![1.0] }),
                    (0.5, ShiftedGamma { shape: 3.0, scale: 1.0, offset: shift }),
                ]
            }
            Scenario::IV => {
                let r = 0.9 * 2.0f64.sqrt();
                vec![
                    (0.5, Gaussian { mean: vec![0.0, 0.0], cov: vec![2.0, r, r, 1.0] }),
                    (0.5, Gaussian { mean: vec![4.0, 4.0], cov: vec![1.0, -0.8, -0.8, 1.0] }),
                ]
            }
        };
        TruthDensity { parts }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|x| x.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::input(format!("unknown scenario {s:?}; expected one of Ia, Ib, Ic, IIa, IIb, IIIa, IIIb, IV")))
    }
}

/// One mixture part of a generating density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Part {
    /// Row-major covariance (1x1 or 2x2).
    Gaussian { mean: Vec<f64>, cov: Vec<f64> },
    /// Standard Student t.
    StudentT { df: f64 },
    /// `Gamma(shape, scale)` recentred to mean `offset`.
    ShiftedGamma { shape: f64, scale: f64, offset: f64 },
}

impl Part {
    fn dim(&self) -> usize {
        match self {
            Part::Gaussian { mean, .. } => mean.len(),
            _ => 1,
        }
    }

    fn pdf(&self, y: &[f64]) -> f64 {
        match self {
            Part::Gaussian { mean, cov } if mean.len() == 1 => {
                let z = y[0] - mean[0];
                (-0.5 * z * z / cov[0]).exp() / (2.0 * std::f64::consts::PI * cov[0]).sqrt()
            }
            Part::Gaussian { mean, cov } => {
                let (a, b, c) = (cov[0], cov[1], cov[3]);
                let det = a * c - b * b;
                let (x0, x1) = (y[0] - mean[0], y[1] - mean[1]);
                let q = (c * x0 * x0 - 2.0 * b * x0 * x1 + a * x1 * x1) / det;
                (-0.5 * q).exp() / (2.0 * std::f64::consts::PI * det.sqrt())
            }
            Part::StudentT { df } => StudentsT::new(0.0, 1.0, *df).expect("valid t").pdf(y[0]),
            Part::ShiftedGamma { shape, scale, offset } => {
                let x = y[0] - offset + shape * scale;
                if x <= 0.0 {
                    0.0
                } else {
                    GammaPdf::new(*shape, 1.0 / scale).expect("valid gamma").pdf(x)
                }
            }
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<f64>) {
        match self {
            Part::Gaussian { mean, cov } if mean.len() == 1 => {
                let z: f64 = rng.sample(StandardNormal);
                out.push(mean[0] + cov[0].sqrt() * z);
            }
            Part::Gaussian { mean, cov } => {
                let l11 = cov[0].sqrt();
                let l21 = cov[1] / l11;
                let l22 = (cov[3] - l21 * l21).sqrt();
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                out.push(mean[0] + l11 * z1);
                out.push(mean[1] + l21 * z1 + l22 * z2);
            }
            Part::StudentT { df } => out.push(StudentT::new(*df).expect("valid t").sample(rng)),
            Part::ShiftedGamma { shape, scale, offset } => {
                let g = Gamma::new(*shape, *scale).expect("valid gamma").sample(rng);
                out.push(g - shape * scale + offset);
            }
        }
    }

    fn moments(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Part::Gaussian { mean, cov } if mean.len() == 1 => (mean.clone(), vec![cov[0]]),
            Part::Gaussian { mean, cov } => (mean.clone(), vec![cov[0], cov[3]]),
            Part::StudentT { df } => (vec![0.0], vec![df / (df - 2.0)]),
            Part::ShiftedGamma { shape, scale, offset } => (vec![*offset], vec![shape * scale * scale]),
        }
    }
}

/// Exact generating density of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthDensity {
    pub parts: Vec<(f64, Part)>,
}

impl TruthDensity {
    /// Number of generating parts.
    pub fn k0(&self) -> usize {
        self.parts.len()
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Dataset {
        let m = self.dim();
        let mut rows = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let mut u: f64 = rng.random();
            let mut label = self.parts.len() - 1;
            for (h, (w, _)) in self.parts.iter().enumerate() {
                if u < *w {
                    label = h;
                    break;
                }
                u -= w;
            }
            let mut y = Vec::with_capacity(m);
            self.parts[label].1.sample(rng, &mut y);
            rows.push(y);
            labels.push(label);
        }
        Dataset::from_rows(&rows, m, Some(labels)).expect("well-formed rows")
    }
}

impl DensityOracle for TruthDensity {
    fn dim(&self) -> usize {
        self.parts[0].1.dim()
    }

    fn pdf(&self, y: &[f64]) -> f64 {
        self.parts.iter().map(|(w, p)| w * p.pdf(y)).sum()
    }

    fn moments(&self) -> (Vec<f64>, Vec<f64>) {
        let m = self.dim();
        let mut mean = vec![0.0; m];
        let mut second = vec![0.0; m];
        for (w, p) in &self.parts {
            let (mu, var) = p.moments();
            for d in 0..m {
                mean[d] += w * mu[d];
                second[d] += w * (var[d] + mu[d] * mu[d]);
            }
        }
        let sd = (0..m).map(|d| (second[d] - mean[d] * mean[d]).sqrt()).collect();
        (mean, sd)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub id: Scenario,
    pub n: usize,
    pub seed: u64,
}

/// Draws a labelled dataset and returns it with its generating density.
pub fn generate(spec: &ScenarioSpec) -> Result<(Dataset, TruthDensity)> {
    if spec.n == 0 {
        return Err(Error::input("scenario sample size must be positive"));
    }
    let truth = spec.id.truth();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok((truth.sample(spec.n, &mut rng), truth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::mean_sd;

    fn column(d: &Dataset, dim: usize) -> Vec<f64> {
        d.rows().map(|r| r[dim]).collect()
    }

    #[test]
    fn standard_normal_moments() {
        let (d, _) = generate(&ScenarioSpec { id: Scenario::Ia, n: 100_000, seed: 1 }).unwrap();
        let (m, s) = mean_sd(&column(&d, 0));
        let n = d.len() as f64;
        assert!(m.abs() < 3.0 / n.sqrt());
        // sd of the sample variance of a normal is sqrt(2 / n)
        assert!((s * s - 1.0).abs() < 3.0 * (2.0 / n).sqrt());
    }

    #[test]
    fn scale_mixture_variance() {
        let (d, truth) = generate(&ScenarioSpec { id: Scenario::Ib, n: 100_000, seed: 2 }).unwrap();
        let xs = column(&d, 0);
        let (_, s) = mean_sd(&xs);
        // fourth moment of the mixture gives the sampling sd of the variance
        let m4 = 0.7 * 3.0 * 0.04f64.powi(2) + 0.3 * 3.0 * 16.0;
        let se = ((m4 - 1.228f64.powi(2)) / xs.len() as f64).sqrt();
        assert!((s * s - 1.228).abs() < 3.0 * se);
        assert!((truth.moments().1[0] - 1.228f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn bivariate_cluster_correlation() {
        let (d, _) = generate(&ScenarioSpec { id: Scenario::IV, n: 40_000, seed: 3 }).unwrap();
        let labels = d.labels.clone().unwrap();
        let pts: Vec<&[f64]> = d.rows().zip(&labels).filter(|(_, &l)| l == 0).map(|(r, _)| r).collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|r| r[0]).sum::<f64>() / n;
        let my = pts.iter().map(|r| r[1]).sum::<f64>() / n;
        let sxy = pts.iter().map(|r| (r[0] - mx) * (r[1] - my)).sum::<f64>() / n;
        let sxx = pts.iter().map(|r| (r[0] - mx).powi(2)).sum::<f64>() / n;
        let syy = pts.iter().map(|r| (r[1] - my).powi(2)).sum::<f64>() / n;
        let rho = sxy / (sxx * syy).sqrt();
        // large-sample sd of a correlation estimate is (1 - rho^2) / sqrt(n)
        assert!((rho - 0.9).abs() < 3.0 * (1.0 - 0.81) / n.sqrt(), "{rho}");
    }

    #[test]
    fn labelled_parts_match_their_parameters() {
        let (d, _) = generate(&ScenarioSpec { id: Scenario::IIIb, n: 40_000, seed: 4 }).unwrap();
        let labels = d.labels.clone().unwrap();
        for (label, want_mean, want_var) in [(0, 0.0, 1.0f64), (1, 6.0, 3.0)] {
            let xs: Vec<f64> = d.rows().zip(&labels).filter(|(_, &l)| l == label).map(|(r, _)| r[0]).collect();
            let (m, s) = mean_sd(&xs);
            assert!((m - want_mean).abs() < 3.0 * want_var.sqrt() / (xs.len() as f64).sqrt());
            assert!((s * s - want_var).abs() / want_var < 0.08);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = ScenarioSpec { id: Scenario::IIa, n: 50, seed: 9 };
        let (a, _) = generate(&spec).unwrap();
        let (b, _) = generate(&spec).unwrap();
        let (mut x, mut y) = (Vec::new(), Vec::new());
        a.write_csv(&mut x).unwrap();
        b.write_csv(&mut y).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn densities_integrate_to_one() {
        for s in Scenario::ALL {
            let truth = s.truth();
            let (mean, sd) = truth.moments();
            let total = if truth.dim() == 1 {
                let (lo, hi) = (mean[0] - 40.0 * sd[0], mean[0] + 40.0 * sd[0]);
                let n = 400_000;
                let h = (hi - lo) / n as f64;
                (0..=n)
                    .map(|i| {
                        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                        w * truth.pdf(&[lo + h * i as f64])
                    })
                    .sum::<f64>()
                    * h
            } else {
                let n = 800;
                let hx = 20.0 * sd[0] / n as f64;
                let hy = 20.0 * sd[1] / n as f64;
                let mut acc = 0.0;
                for i in 0..=n {
                    for j in 0..=n {
                        let x = mean[0] - 10.0 * sd[0] + hx * i as f64;
                        let y = mean[1] - 10.0 * sd[1] + hy * j as f64;
                        acc += truth.pdf(&[x, y]);
                    }
                }
                acc * hx * hy
            };
            // t(4) tails beyond 40 sd still carry about 1e-6
            assert!((total - 1.0).abs() < 2e-6, "{s}: {total}");
        }
    }

    #[test]
    fn ordering_of_separations() {
        let sep = |s: Scenario| match &s.truth().parts[1].1 {
            Part::Gaussian { mean, .. } => mean[0],
            _ => unreachable!(),
        };
        assert!(sep(Scenario::IIb) > sep(Scenario::IIa));
        assert_eq!("iib".parse::<Scenario>().unwrap(), Scenario::IIb);
        assert!("V".parse::<Scenario>().is_err());
    }
}
