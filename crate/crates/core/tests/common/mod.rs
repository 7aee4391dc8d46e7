#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, InverseGamma, Normal};

use repmix::calibration::{
    calibrate_tau, sample_dbar_nonrepulsive, sample_dbar_rejection, sample_dbar_slice_chain, CalibrationOptions,
    CalibrationResult,
};
use repmix::diagnostics::{ks_one_sample, ks_p_value, ks_statistic, mean_sd};
use repmix::model::{mixture_density, validate_config, BasePrior, Component, MixtureConfig, MixtureState, SliceState};
use repmix::postprocess::{sum_extra_weights, KlQuadrature, MixtureOracle};
use repmix::repulsion::{distance, h_combine, log_prior_unnormalized, Case, Combiner, RepulsionSpec};
use repmix::sampler::{
    allocation_probabilities, allowed_set_location, allowed_set_scale, conditional_base_location,
    conditional_base_scale, run_chain, sample_dirichlet, sample_truncated, AllowedSet, McmcConfig, UnivariateLaw,
};
use repmix::Dataset;

pub struct Outcome {
    pub name: String,
    pub ok: bool,
    pub detail: String,
}

impl Outcome {
    pub fn new(name: &str, ok: bool, detail: impl Into<String>) -> Self {
        Outcome { name: name.into(), ok, detail: detail.into() }
    }
}

pub fn report(outcomes: &[Outcome]) -> bool {
    for o in outcomes.iter().filter(|o| !o.ok) {
        eprintln!("failed: {} ({})", o.name, o.detail);
    }
    outcomes.iter().all(|o| o.ok)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn comp(mean: &[f64], var: &[f64]) -> Component {
    Component::new(mean.to_vec(), var.to_vec()).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn state(comps: Vec<Component>, slice: SliceState, allocations: Vec<usize>) -> MixtureState {
    let k = comps.len();
    MixtureState { weights: vec![1.0 / k as f64; k], components: comps, allocations, slice }
}

pub fn analytic() -> Vec<Outcome> {
    let mut out = Vec::new();
    let mut check = |name: &str, ok: bool, detail: String| out.push(Outcome::new(name, ok, detail));
    let sn = 1.0 / (2.0 * std::f64::consts::PI).sqrt();

    let f = mixture_density(&[1.0], &[comp(&[0.0], &[1.0])], &[0.0]);
    check("density of one standard component at 0", close(f, sn, 1e-15), format!("{f}"));
    let f = mixture_density(&[0.5, 0.5], &[comp(&[0.0], &[1.0]), comp(&[0.0], &[1.0])], &[0.0]);
    check("density of two identical components", close(f, sn, 1e-15), format!("{f}"));

    let p1 = BasePrior::isotropic(1, 0.0, 1.0, 2.0, 1.0);
    let v = validate_config(&MixtureConfig::new(6, 1), &p1);
    check("alpha 1/6 accepted", v.is_empty(), format!("{v:?}"));
    let v = validate_config(&MixtureConfig::with_alpha(6, 1, vec![0.6; 6]), &p1);
    check("alpha 0.6 flagged", v.iter().any(|x| x.message.contains("alpha exceeds m/2")), format!("{v:?}"));
    let v = validate_config(&MixtureConfig::new(6, 1), &BasePrior::isotropic(1, 0.0, 1.0, 0.5, 1.0));
    check("variance shape 0.5 flagged", v.iter().any(|x| x.field == "prior.var_shape" && !x.warning), format!("{v:?}"));

    let a = comp(&[0.3, -1.0], &[0.7, 2.0]);
    let d = distance(Case::FullKernel, &a, &a).unwrap();
    check("identical kernels at distance 0", d == 0.0, format!("{d}"));
    let d = distance(Case::FullKernel, &comp(&[0.0], &[1.0]), &comp(&[1.0], &[1.0])).unwrap();
    check("kernel distance, shifted means", close(d, 2.0, 1e-15), format!("{d}"));
    let d = distance(Case::FullKernel, &comp(&[0.0], &[1.0]), &comp(&[0.0], &[2.0])).unwrap();
    check("kernel distance, different variances", close(d, 0.5, 1e-15), format!("{d}"));
    let d = distance(Case::LocationOnly, &comp(&[0.0, 0.0], &[1.0, 1.0]), &comp(&[3.0, 4.0], &[5.0, 0.1])).unwrap();
    check("location distance 3-4-5", close(d, 5.0, 1e-15), format!("{d}"));

    let s12 = RepulsionSpec::new(Case::FullKernel, Combiner::Min, 1.0, 2).unwrap();
    let s54 = RepulsionSpec::new(Case::FullKernel, Combiner::Min, 5.0, 4).unwrap();
    check("g(0) = 0", s12.g(0.0) == 0.0, format!("{}", s12.g(0.0)));
    check("g at tau 1, nu 2, d 1", close(s12.g(1.0), (-1.0f64).exp(), 1e-15), format!("{}", s12.g(1.0)));
    check("g at tau 5, nu 4, d 2", close(s54.g(2.0), (-5.0f64 / 16.0).exp(), 1e-15), format!("{}", s54.g(2.0)));
    let r = s12.g_inverse((-1.0f64).exp()).unwrap();
    check("g inverse at exp(-1)", close(r, 1.0, 1e-10), format!("{r}"));
    let r = s54.g_inverse((-5.0f64 / 16.0).exp()).unwrap();
    check("g inverse at exp(-5/16)", close(r, 2.0, 1e-10), format!("{r}"));
    let worst = [0.4, 1.0, 2.5, 17.0]
        .iter()
        .map(|&d| (s54.g_inverse(s54.g(d)).unwrap() - d).abs() / d)
        .fold(0.0, f64::max);
    check("g inverse round trip", worst < 1e-10, format!("max relative error {worst:e}"));
    let r = s12.g_inverse(1e-300).unwrap();
    check("g inverse near 0", r > 0.0 && r < 0.04, format!("{r}"));

    let two = [comp(&[0.0], &[1.0]), comp(&[1.5], &[1.0])];
    let gd = s12.g(distance(Case::FullKernel, &two[0], &two[1]).unwrap());
    for comb in [Combiner::Product, Combiner::Min] {
        let s = RepulsionSpec::new(Case::FullKernel, comb, 1.0, 2).unwrap();
        let h = h_combine(&s, &two);
        check(&format!("{comb:?} with one pair"), close(h, gd, 1e-15), format!("{h} vs {gd}"));
    }
    let tri = [comp(&[0.0, 0.0], &[1.0, 1.0]), comp(&[1.0, 0.0], &[1.0, 1.0]), comp(&[0.5, 0.75f64.sqrt()], &[1.0, 1.0])];
    let loc = |comb| RepulsionSpec::new(Case::LocationOnly, comb, 0.8, 1).unwrap();
    let g1 = loc(Combiner::Min).g(1.0);
    let (hp, hm) = (h_combine(&loc(Combiner::Product), &tri), h_combine(&loc(Combiner::Min), &tri));
    check("product over equilateral triple", close(hp, g1.powi(3), 1e-14), format!("{hp}"));
    check("min over equilateral triple", close(hm, g1, 1e-14), format!("{hm}"));
    let coinc = [comp(&[0.0], &[1.0]), comp(&[2.0], &[1.0]), comp(&[0.0], &[1.0])];
    let hz = h_combine(&s12, &coinc);
    check("coincident components give h = 0", hz == 0.0, format!("{hz}"));

    let prior = BasePrior::isotropic(1, 0.2, 2.0, 3.0, 1.5);
    let one = [comp(&[0.7], &[0.4])];
    let lp = log_prior_unnormalized(&s12, &prior, &one);
    check("log prior with k = 1", lp == prior.ln_density(&one[0]), format!("{lp}"));
    let lp = log_prior_unnormalized(&s12, &prior, &coinc);
    check("log prior of coincident pair", lp == f64::NEG_INFINITY, format!("{lp}"));

    let p = allocation_probabilities(&[0.5, 0.5], &[comp(&[0.0], &[1.0]), comp(&[100.0], &[1.0])], &[0.0]);
    check("dominant component", p[0] > 1.0 - 1e-12, format!("{p:?}"));
    let p = allocation_probabilities(&[0.5, 0.5], &[comp(&[1.0], &[2.0]), comp(&[1.0], &[2.0])], &[0.3]);
    check("identical components split evenly", close(p[0], 0.5, 1e-15) && close(p[1], 0.5, 1e-15), format!("{p:?}"));

    let spec = RepulsionSpec::new(Case::LocationOnly, Combiner::Min, 1.0, 1).unwrap();
    let st = state(vec![comp(&[0.0], &[1.0]), comp(&[5.0], &[1.0])], SliceState::Min(-1.0), vec![]);
    let set = allowed_set_location(&st, &spec, 1, 0).unwrap();
    let expect = AllowedSet::from_intervals(vec![(f64::NEG_INFINITY, -1.0), (1.0, f64::INFINITY)]);
    check("location slice excludes (-1, 1)", set == expect, format!("{:?}", set.intervals()));
    let st0 = state(vec![comp(&[0.0], &[1.0]), comp(&[5.0], &[1.0])], SliceState::Min(f64::NEG_INFINITY), vec![]);
    let set = allowed_set_location(&st0, &spec, 1, 0).unwrap();
    check("vanishing slice allows the line", set == AllowedSet::whole_line(), format!("{:?}", set.intervals()));
    let kspec = RepulsionSpec::new(Case::FullKernel, Combiner::Min, 1.0, 2).unwrap();
    let far = state(vec![comp(&[0.0], &[1.0]), comp(&[30.0], &[1.0])], SliceState::Min(-1.0), vec![]);
    let set = allowed_set_scale(&far, &kspec, 1, 0).unwrap();
    check("inactive scale constraint", set == AllowedSet::positive_half_line(), format!("{:?}", set.intervals()));

    let data = Dataset::from_rows(&[vec![1.4]], 1, None).unwrap();
    let prior = BasePrior::isotropic(1, 0.0, 1.0, 2.0, 1.0);
    let st = state(vec![comp(&[0.0], &[1.0]), comp(&[3.0], &[1.0])], SliceState::None, vec![0]);
    let (m, v) = conditional_base_location(&st, &data, &prior, 0, 0);
    check("one observation, equal precisions", close(m, 0.7, 1e-15) && close(v, 0.5, 1e-15), format!("({m}, {v})"));
    let (m, v) = conditional_base_location(&st, &data, &prior, 1, 0);
    check("empty component location", m == 0.0 && v == 1.0, format!("({m}, {v})"));
    let data2 = Dataset::from_rows(&[vec![1.0], vec![-1.0]], 1, None).unwrap();
    let st2 = state(vec![comp(&[0.0], &[1.0]), comp(&[3.0], &[1.0])], SliceState::None, vec![0, 0]);
    let (a, b) = conditional_base_scale(&st2, &data2, &prior, 0, 0);
    check("scale update arithmetic", close(a, 3.0, 1e-15) && close(b, 2.0, 1e-15), format!("({a}, {b})"));
    let (a, b) = conditional_base_scale(&st2, &data2, &prior, 1, 0);
    check("empty component scale", a == 2.0 && b == 1.0, format!("({a}, {b})"));

    let e = sum_extra_weights(&[0.5, 0.3, 0.1, 0.05, 0.03, 0.02], 2);
    check("extra weights of four smallest", close(e, 0.2, 1e-15), format!("{e}"));
    let e = sum_extra_weights(&[0.5, 0.3, 0.2], 3);
    check("no extra weights when k0 = k", e == 0.0, format!("{e}"));
    let e = sum_extra_weights(&[1.0 / 6.0; 6], 3);
    check("uniform extra weights", close(e, 0.5, 1e-15), format!("{e}"));

    let truth = MixtureOracle { weights: vec![1.0], components: vec![comp(&[0.0], &[1.0])] };
    let q = KlQuadrature::new(&truth).unwrap();
    let kl0 = q.kl_mixture(&[1.0], &[comp(&[0.0], &[1.0])]).unwrap();
    check("KL of a density to itself", kl0.abs() < 1e-8, format!("{kl0:e}"));
    let kl1 = q.kl_mixture(&[1.0], &[comp(&[1.0], &[1.0])]).unwrap();
    check("KL for a unit mean shift", close(kl1, 0.5, 1e-6), format!("{kl1}"));
    let kl2 = q.kl_mixture(&[1.0], &[comp(&[0.5], &[2.0])]).unwrap();
    let exact = 0.5 * (1.0 / 2.0 + 0.25 / 2.0 - 1.0 + 2.0f64.ln());
    check("KL for a mean and variance change", close(kl2, exact, 1e-6), format!("{kl2} vs {exact}"));
    let t2 = MixtureOracle { weights: vec![1.0], components: vec![comp(&[0.0, 1.0], &[1.0, 0.5])] };
    let q2 = KlQuadrature::new(&t2).unwrap();
    let kl3 = q2.kl_mixture(&[1.0], &[comp(&[1.0, 1.0], &[1.0, 0.5])]).unwrap();
    check("bivariate KL for a unit mean shift", close(kl3, 0.5, 1e-6), format!("{kl3}"));

    let mut r = rng(11);
    let w = sample_dirichlet(&[0.2, 1.0, 3.0, 0.05], &mut r);
    check("Dirichlet draw on the simplex", close(w.iter().sum::<f64>(), 1.0, 1e-12), format!("{w:?}"));
    out
}

fn ks_two(name: &str, a: &[f64], b: &[f64]) -> Outcome {
    let d = ks_statistic(a, b);
    let p = ks_p_value(d, a.len(), b.len());
    Outcome::new(name, p > 0.001, format!("D = {d:.4}, p = {p:.4}"))
}

pub fn truncated_vs_rejection() -> Vec<Outcome> {
    const N: usize = 100_000;
    let cases = [
        (
            "truncated normal",
            UnivariateLaw::Normal { mean: 0.3, var: 1.7 },
            AllowedSet::from_intervals(vec![(f64::NEG_INFINITY, -0.8), (0.4, 1.1), (2.0, f64::INFINITY)]),
        ),
        (
            "truncated normal, tail pieces",
            UnivariateLaw::Normal { mean: -1.0, var: 0.25 },
            AllowedSet::from_intervals(vec![(f64::NEG_INFINITY, -2.0), (-0.2, f64::INFINITY)]),
        ),
        (
            "truncated inverse gamma",
            UnivariateLaw::InverseGamma { shape: 3.5, scale: 2.0 },
            AllowedSet::from_intervals(vec![(0.0, 0.3), (0.6, 1.2), (2.5, f64::INFINITY)]),
        ),
    ];
    cases
        .iter()
        .enumerate()
        .map(|(i, (name, law, set))| {
            let mut r = rng(100 + i as u64);
            let inv: Vec<f64> = (0..N).map(|_| sample_truncated(law, set, &mut r).unwrap()).collect();
            let mut rej = Vec::with_capacity(N);
            while rej.len() < N {
                let x = law.sample(&mut r);
                if set.contains(x) {
                    rej.push(x);
                }
            }
            let mut o = ks_two(name, &inv, &rej);
            if !inv.iter().all(|&x| set.contains(x)) {
                o.ok = false;
                o.detail.push_str(", draw outside the allowed set");
            }
            o
        })
        .collect()
}

fn normal_pdf(y: f64, m: f64, v: f64) -> f64 {
    (-(y - m).powi(2) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt()
}

pub fn allocation_enumeration() -> Outcome {
    let weights = [0.2, 0.5, 0.3];
    let comps = [comp(&[0.0, 1.0], &[1.0, 0.5]), comp(&[1.0, -1.0], &[2.0, 1.0]), comp(&[-0.5, 0.0], &[0.3, 3.0])];
    let mut worst: f64 = 0.0;
    for y in [[0.1, 0.2], [2.0, -1.5], [-1.0, 3.0], [0.0, 0.0]] {
        let joint: Vec<f64> = weights
            .iter()
            .zip(&comps)
            .map(|(w, c)| w * (0..2).map(|d| normal_pdf(y[d], c.mean[d], c.var[d])).product::<f64>())
            .collect();
        let z: f64 = joint.iter().sum();
        let p = allocation_probabilities(&weights, &comps, &y);
        for (a, b) in p.iter().zip(&joint) {
            worst = worst.max((a - b / z).abs());
        }
    }
    Outcome::new("allocation probabilities vs enumeration", worst < 1e-12, format!("max error {worst:e}"))
}

pub fn dirichlet_moments() -> Outcome {
    let alpha = [0.5, 1.5, 3.0];
    let a0: f64 = alpha.iter().sum();
    let n = 40_000;
    let mut r = rng(7);
    let draws: Vec<Vec<f64>> = (0..n).map(|_| sample_dirichlet(&alpha, &mut r)).collect();
    let mut details = Vec::new();
    let mut ok = true;
    for (i, &a) in alpha.iter().enumerate() {
        let xs: Vec<f64> = draws.iter().map(|w| w[i]).collect();
        let mean = a / a0;
        let var = a * (a0 - a) / (a0 * a0 * (a0 + 1.0));
        let (m, s) = mean_sd(&xs);
        let se_mean = (var / n as f64).sqrt();
        let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n as f64;
        let se_var = ((m4 - s.powi(4)) / n as f64).sqrt();
        ok &= (m - mean).abs() < 3.0 * se_mean && (s * s - var).abs() < 3.0 * se_var;
        details.push(format!("mean {m:.4}/{mean:.4} var {:.5}/{var:.5}", s * s));
    }
    Outcome::new("Dirichlet moments", ok, details.join("; "))
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn endpoint_check(name: &str, set: &AllowedSet, margin: impl Fn(f64) -> f64) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for &(a, b) in set.intervals() {
        for e in [a, b] {
            if !e.is_finite() || e == 0.0 {
                continue;
            }
            let delta = 1e-3 * e.abs().max(1.0);
            let root = bisect(&margin, e - delta, e + delta);
            worst = worst.max((root - e).abs() / e.abs().max(1.0));
            count += 1;
        }
    }
    Outcome::new(name, count > 0 && worst < 1e-10, format!("{count} endpoints, max error {worst:e}"))
}

fn min_margin(case: Case, st: &MixtureState, thresholds: &dyn Fn(usize) -> f64, j: usize, set: impl Fn(&mut Component)) -> f64 {
    let mut cj = st.components[j].clone();
    set(&mut cj);
    st.components
        .iter()
        .enumerate()
        .filter(|&(s, _)| s != j)
        .map(|(s, cs)| distance(case, &cj, cs).unwrap() - thresholds(s))
        .fold(f64::INFINITY, f64::min)
}

pub fn allowed_endpoints() -> Vec<Outcome> {
    let mut out = Vec::new();
    let comps = vec![
        comp(&[0.0, 0.4], &[1.0, 0.6]),
        comp(&[1.2, -0.3], &[0.8, 1.1]),
        comp(&[-1.5, 0.9], &[1.3, 0.5]),
        comp(&[0.3, 2.0], &[0.5, 0.9]),
    ];
    let k = comps.len();
    let ln_u_pairs: Vec<f64> = (0..k * (k - 1) / 2).map(|i| -0.3 - 0.25 * i as f64).collect();
    for case in [Case::LocationOnly, Case::FullKernel] {
        for comb in [Combiner::Min, Combiner::Product] {
            let (tau, nu) = match case {
                Case::LocationOnly => (0.9, 1),
                Case::FullKernel => (3.0, 2),
            };
            let spec = RepulsionSpec::new(case, comb, tau, nu).unwrap();
            let slice = match comb {
                Combiner::Min => SliceState::Min(-0.6),
                Combiner::Product => SliceState::Product(ln_u_pairs.clone()),
            };
            let st = state(comps.clone(), slice.clone(), vec![]);
            for j in [0, 2] {
                let thresholds = |s: usize| match &slice {
                    SliceState::Min(l) => spec.threshold_from_ln(*l),
                    SliceState::Product(v) => {
                        let (hi, lo) = if s > j { (s, j) } else { (j, s) };
                        spec.threshold_from_ln(v[repmix::repulsion::pair_index(hi, lo)])
                    }
                    SliceState::None => 0.0,
                };
                for dim in 0..2 {
                    let set = allowed_set_location(&st, &spec, j, dim).unwrap();
                    out.push(endpoint_check(
                        &format!("{case:?}/{comb:?} location endpoints, component {j}, dim {dim}"),
                        &set,
                        |x| min_margin(case, &st, &thresholds, j, |c| c.mean[dim] = x),
                    ));
                    if case == Case::FullKernel {
                        let set = allowed_set_scale(&st, &spec, j, dim).unwrap();
                        out.push(endpoint_check(
                            &format!("{case:?}/{comb:?} scale endpoints, component {j}, dim {dim}"),
                            &set,
                            |x| min_margin(case, &st, &thresholds, j, |c| c.var[dim] = x),
                        ));
                    }
                }
            }
        }
    }
    // a few configurations have no active constraint on some coordinates
    let active: Vec<Outcome> = out.into_iter().filter(|o| !o.detail.starts_with("0 endpoints")).collect();
    let n = active.len();
    let mut merged = active;
    merged.push(Outcome::new("endpoint coverage", n >= 12, format!("{n} coordinate sets with finite endpoints")));
    merged
}

pub fn prior_recovery_plain() -> Vec<Outcome> {
    let prior = BasePrior::isotropic(1, 0.5, 2.0, 3.0, 2.0);
    let spec = RepulsionSpec::new(Case::LocationOnly, Combiner::Min, 1.0, 1).unwrap();
    let cfg = McmcConfig { iterations: 21_000, burn_in: 1000, thin: 4, seed: 0, repulsive: false };
    let draws = run_chain(&Dataset::empty(1), &cfg, &MixtureConfig::new(3, 1), &prior, &spec, &mut rng(21)).unwrap();
    let mu: Vec<f64> = draws.draws.iter().flat_map(|d| d.components.iter().map(|c| c.mean[0])).collect();
    let var: Vec<f64> = draws.draws.iter().flat_map(|d| d.components.iter().map(|c| c.var[0])).collect();
    let w: Vec<f64> = draws.draws.iter().map(|d| d.weights[0]).collect();
    let normal = Normal::new(0.5, 2.0f64.sqrt()).unwrap();
    let ig = InverseGamma::new(3.0, 2.0).unwrap();
    let (d1, p1) = ks_one_sample(&mu, |x| normal.cdf(x));
    let (d2, p2) = ks_one_sample(&var, |x| ig.cdf(x));
    let (wm, _) = mean_sd(&w);
    let se = (1.0 / 3.0 * 2.0 / 3.0 / (1.0 + 1.0) / w.len() as f64).sqrt();
    vec![
        Outcome::new("prior recovery, locations", p1 > 0.001, format!("D = {d1:.4}, p = {p1:.4}")),
        Outcome::new("prior recovery, variances", p2 > 0.001, format!("D = {d2:.4}, p = {p2:.4}")),
        Outcome::new("prior recovery, weights", (wm - 1.0 / 3.0).abs() < 4.0 * se, format!("mean weight {wm:.4}")),
    ]
}

pub fn prior_recovery_repulsive() -> Vec<Outcome> {
    let prior = BasePrior::isotropic(1, 0.0, 3.0, 2.0, 1.0);
    let settings = [
        (Case::LocationOnly, Combiner::Min, 1.0, 1),
        (Case::LocationOnly, Combiner::Product, 0.5, 1),
        (Case::FullKernel, Combiner::Min, 2.0, 2),
        (Case::FullKernel, Combiner::Product, 1.0, 2),
    ];
    settings
        .iter()
        .enumerate()
        .map(|(i, &(case, comb, tau, nu))| {
            let spec = RepulsionSpec::new(case, comb, tau, nu).unwrap();
            let cfg = McmcConfig { iterations: 101_000, burn_in: 1000, thin: 20, seed: 0, repulsive: true };
            let draws =
                run_chain(&Dataset::empty(1), &cfg, &MixtureConfig::new(3, 1), &prior, &spec, &mut rng(300 + i as u64))
                    .unwrap();
            let chain: Vec<f64> = draws
                .draws
                .iter()
                .map(|d| repmix::repulsion::mean_pairwise_distance(case, &d.components))
                .collect();
            let (exact, rate) = sample_dbar_rejection(&prior, &spec, 3, 20_000, &mut rng(400 + i as u64)).unwrap();
            let mut o = ks_two(&format!("prior recovery, {case:?}/{comb:?} mean distance"), &chain, &exact);
            o.detail.push_str(&format!(", acceptance {rate:.3}"));
            o
        })
        .collect()
}

/// Prior of the calibration check: empirical defaults on standard-normal data.
pub fn standard_prior() -> BasePrior {
    BasePrior::isotropic(1, 0.0, 3.0, 2.0, 1.0)
}

pub fn calibration_case_ii() -> (CalibrationResult, Outcome) {
    let mut opts = CalibrationOptions::new(Case::LocationOnly);
    opts.c = 4.0;
    opts.nu = 1;
    opts.seed = 5;
    let prior = standard_prior();
    let res = calibrate_tau(&prior, Case::LocationOnly, 6, &opts).unwrap();
    let n = 10 * res.mc_samples;
    let plain = sample_dbar_nonrepulsive(&prior, Case::LocationOnly, 6, n, &mut rng(9001)).unwrap();
    let spec = res.spec().unwrap();
    let rep = sample_dbar_slice_chain(&prior, &spec, 6, n, &mut rng(9002)).unwrap();
    let (r2, s2) = mean_sd(&plain);
    let (r1, s1) = mean_sd(&rep);
    let ok = r1 - r2 >= 4.0 * s1.max(s2);
    let detail = format!(
        "tau* = {:.4} ({:?}); recheck with {n} draws: rho1 = {r1:.4}, rho2 = {r2:.4}, sd = ({s1:.4}, {s2:.4}), margin {:.4}",
        res.tau_star,
        res.method,
        (r1 - r2) - 4.0 * s1.max(s2)
    );
    (res, Outcome::new("calibration re-verified", ok, detail))
}
