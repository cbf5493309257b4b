//! Invariant suites with machine-readable reports.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convex::{ConjDomain, PhiSpec, TAU_DOM};
use crate::distributed::{comm_stats, run_distributed, AggregationRule, DistributedOptions};
use crate::dynamics::{
    explicit_of_implicit, implicit_of_explicit, step_explicit, step_implicit, ContinuousConfig, DiscreteConfig,
    OptState,
};
use crate::error::{Error, Result};
use crate::lyapunov::{
    coeffs, decomposition_fields, delta1, delta2, descent_residual, h_continuous, h_discrete, phase1_rate_check,
    Snapshot,
};
use crate::oracle::sample_probe;
use crate::problems::{derive_seed, NoiseModel, Objective, Problem, Quadratic, StochasticOracle};
use crate::runner::{sample_domain_point, sample_interior_point};
use crate::stochastic::{
    covariance_term_mc, ema_fisher_bound, ema_fisher_exact, fisher_gaussian, fisher_gaussian_mc, lipschitz_constant,
    stein_bound, telescoped_sgd_run, GaussianSpec, Hypothesis,
};
use crate::vecops::{dot, norm_inf, norm2_sq, scale, sub};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Convex,
    Lyapunov,
    Stochastic,
    Distributed,
    All,
}

impl Suite {
    pub fn name(&self) -> &'static str {
        match self {
            Suite::Convex => "convex",
            Suite::Lyapunov => "lyapunov",
            Suite::Stochastic => "stochastic",
            Suite::Distributed => "distributed",
            Suite::All => "all",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "convex" => Suite::Convex,
            "lyapunov" => Suite::Lyapunov,
            "stochastic" => Suite::Stochastic,
            "distributed" => Suite::Distributed,
            "all" => Suite::All,
            _ => return Err(Error::usage(format!("unknown suite \"{s}\""))),
        })
    }
}

/// One invariant: its worst observed value and the bound it is held to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub worst: f64,
    pub threshold: f64,
}

impl Check {
    /// Passes when `worst ≥ threshold`.
    pub fn at_least(name: impl Into<String>, worst: f64, threshold: f64) -> Self {
        Self { name: name.into(), passed: worst >= threshold, worst, threshold }
    }

    /// Passes when `worst ≤ threshold`.
    pub fn at_most(name: impl Into<String>, worst: f64, threshold: f64) -> Self {
        Self { name: name.into(), passed: worst <= threshold, worst, threshold }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub seed: u64,
    pub samples: usize,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl VerifyReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Subgradient selection used by the suites; swappable to test that the
/// suites catch a wrong selection.
pub trait SubgradientMap: Sync {
    fn apply(&self, spec: &PhiSpec, m: &[f64]) -> Result<Vec<f64>>;
}

/// The library's selection, `PhiSpec::subgrad`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Standard;

impl SubgradientMap for Standard {
    fn apply(&self, spec: &PhiSpec, m: &[f64]) -> Result<Vec<f64>> {
        spec.subgrad(m)
    }
}

/// `sign(0) = +1` for `L1`: still a subgradient, but not the odd selection.
#[derive(Debug, Clone, Copy, Default)]
pub struct SignZeroUp;

impl SubgradientMap for SignZeroUp {
    fn apply(&self, spec: &PhiSpec, m: &[f64]) -> Result<Vec<f64>> {
        match spec {
            PhiSpec::L1 => Ok(m.iter().map(|&v| if v >= 0.0 { 1.0 } else { -1.0 }).collect()),
            _ => spec.subgrad(m),
        }
    }
}

/// Dimension used for per-kind random checks.
const DIM: usize = 4;

/// Kind name with the parameter that tells catalog entries apart.
pub fn spec_label(spec: &PhiSpec) -> String {
    match spec {
        PhiSpec::Lp { p } | PhiSpec::GroupLp { p, .. } | PhiSpec::TruncatedLpVec { p, .. } => {
            format!("{}(p={p})", spec.kind_name())
        }
        _ => spec.kind_name().to_string(),
    }
}

fn kind_rng(seed: u64, suite: u64, k: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(derive_seed(seed, suite), k as u64))
}

fn random_discrete(rng: &mut ChaCha8Rng) -> DiscreteConfig {
    let beta2 = rng.random_range(0.5..0.999);
    DiscreteConfig {
        lr: 10f64.powf(rng.random_range(-3.0..-0.5)),
        lambda: rng.random_range(0.1..2.0),
        beta1: rng.random_range(0.0..beta2),
        beta2,
    }
}

fn per_kind<F>(seed: u64, suite: u64, f: F) -> Result<Vec<Check>>
where
    F: Fn(&PhiSpec, &mut ChaCha8Rng) -> Result<Vec<Check>> + Sync,
{
    let nested = PhiSpec::catalog(DIM)
        .par_iter()
        .enumerate()
        .map(|(k, spec)| f(spec, &mut kind_rng(seed, suite, k)))
        .collect::<Result<Vec<_>>>()?;
    Ok(nested.into_iter().flatten().collect())
}

/// Fenchel–Young, subgradient validity and the selection-sensitive checks.
pub fn convex_suite(seed: u64, samples: usize, map: &dyn SubgradientMap) -> Result<Vec<Check>> {
    let mut checks = fenchel_young_checks(seed, samples, map)?;
    checks.push(implicit_explicit_check(seed, samples.min(1000), map)?);
    checks.push(stationary_fixed_point_check(map)?);
    Ok(checks)
}

/// Per kind: Fenchel–Young gap sign and equality on subgradient pairs, the
/// subgradient inequality, and the conjugate subgradient pairing.
pub fn fenchel_young_checks(seed: u64, samples: usize, map: &dyn SubgradientMap) -> Result<Vec<Check>> {
    per_kind(seed, 0, |spec, rng| {
        let kind = spec_label(spec);
        let mut gap_min = f64::INFINITY;
        let mut equality = 0.0f64;
        let mut subgrad_min = f64::INFINITY;
        let mut conj_pair = 0.0f64;
        for _ in 0..samples {
            let x = sample_probe(rng, DIM, 50.0);
            let y = sample_domain_point(spec, DIM, rng)?;
            let scale_x = 1.0 + spec.value(&x)?.abs();
            gap_min = gap_min.min(spec.fenchel_gap(&x, &y)?.to_f64());
            let u = map.apply(spec, &x)?;
            equality = equality.max(spec.fenchel_gap(&x, &u)?.to_f64().abs() / scale_x);
            let z = sample_probe(rng, DIM, 50.0);
            let slack = (spec.value(&z)? - dot(&u, &z)) - (spec.value(&x)? - dot(&u, &x));
            subgrad_min = subgrad_min.min(slack / (scale_x + spec.value(&z)?.abs()));
            let w = spec.conj_subgrad(&y, TAU_DOM)?;
            conj_pair = conj_pair.max(spec.fenchel_gap(&w, &y)?.to_f64().abs() / (1.0 + spec.value(&w)?.abs()));
        }
        Ok(vec![
            Check::at_least(format!("fenchel_young_gap/{kind}"), gap_min, -1e-9),
            Check::at_most(format!("fenchel_young_equality/{kind}"), equality, 1e-9),
            Check::at_least(format!("subgradient_inequality/{kind}"), subgrad_min, -1e-12),
            Check::at_most(format!("conjugate_subgradient_pair/{kind}"), conj_pair, 1e-9),
        ])
    })
}

/// An implicit step and the explicit step at `lr/(1 + lr λ)` agree
/// componentwise, relative to the size of the update's terms.
pub fn implicit_explicit_check(seed: u64, steps: usize, map: &dyn SubgradientMap) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 100));
    let spec = PhiSpec::L1;
    let mut worst = 0.0f64;
    for _ in 0..steps {
        let cfg = random_discrete(&mut rng);
        let ex = explicit_of_implicit(&cfg);
        let x = sample_probe(&mut rng, DIM, 50.0);
        let m_tilde = sample_probe(&mut rng, DIM, 50.0);
        let u = map.apply(&spec, &m_tilde)?;
        for j in 0..DIM {
            let implicit = (x[j] + cfg.lr * u[j]) / (1.0 + cfg.lr * cfg.lambda);
            let explicit = x[j] + ex.lr * (u[j] - ex.lambda * x[j]);
            let size = x[j].abs() + cfg.lr * u[j].abs();
            if size > 0.0 {
                worst = worst.max((implicit - explicit).abs() / size);
            }
        }
    }
    Ok(Check::at_most("implicit_explicit_equivalence", worst, 1e-14))
}

/// Without decay, zero momentum and zero gradient leave every coordinate in place.
pub fn stationary_fixed_point_check(map: &dyn SubgradientMap) -> Result<Check> {
    let mut worst = 0.0f64;
    for spec in PhiSpec::catalog(DIM) {
        let u = map.apply(&spec, &[0.0; DIM])?;
        worst = worst.max(norm_inf(&u));
    }
    Ok(Check::at_most("stationary_fixed_point", worst, 0.0))
}

/// Δ nonnegativity, discrete descent, the Phase-1 rate and the gradient
/// decomposition of the continuous H.
pub fn lyapunov_suite(seed: u64, samples: usize) -> Result<Vec<Check>> {
    let mut checks = delta_nonnegativity_checks(seed, samples)?;
    checks.push(descent_check(seed, (samples / 10).max(1))?);
    checks.extend(telescoped_descent_checks(seed, (samples / 10).max(1))?);
    checks.push(phase1_check(seed)?);
    checks.push(decomposition_check(seed, 100)?);
    Ok(checks)
}

/// `Δ₁, Δ₂ ≥ 0` per kind at random Phase-2 points.
pub fn delta_nonnegativity_checks(seed: u64, samples: usize) -> Result<Vec<Check>> {
    per_kind(seed, 1, |spec, rng| {
        let kind = spec_label(spec);
        let (mut d1_min, mut d2_min) = (f64::INFINITY, f64::INFINITY);
        for _ in 0..samples {
            let lambda = rng.random_range(0.1..3.0);
            let x = scale(&sample_domain_point(spec, DIM, rng)?, 1.0 / lambda);
            let mt = sample_probe(rng, DIM, 5.0);
            let mn = sample_probe(rng, DIM, 5.0);
            d1_min = d1_min.min(delta1(spec, lambda, &x, &mt)?);
            d2_min = d2_min.min(delta2(spec, &mt, &mn)?);
        }
        Ok(vec![
            Check::at_least(format!("delta1_nonnegative/{kind}"), d1_min, -1e-12),
            Check::at_least(format!("delta2_nonnegative/{kind}"), d2_min, -1e-12),
        ])
    })
}

/// Largest single-step descent residual over random quadratics, configurations
/// and kinds, from feasible starts.
pub fn descent_check(seed: u64, cases: usize) -> Result<Check> {
    let worst = (0..cases)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(derive_seed(seed, 200), i as u64));
            let dim = rng.random_range(1..=16usize);
            let q = Quadratic::random(dim, rng.random())?;
            let kinds = PhiSpec::catalog(dim);
            let spec = &kinds[rng.random_range(0..kinds.len())];
            let cfg = random_discrete(&mut rng);
            let x = scale(&sample_domain_point(spec, dim, &mut rng)?, 1.0 / cfg.lambda);
            let m = sample_probe(&mut rng, dim, 5.0);
            let s = OptState { x, m, t: 0 };
            let step = step_implicit(&cfg, spec, &s, &q.gradient(&s.x))?;
            descent_residual(
                &cfg,
                spec,
                q.smoothness().expect("quadratic smoothness"),
                Snapshot { f: q.value(&s.x), x: &s.x, m: &s.m },
                Snapshot { f: q.value(&step.state.x), x: &step.state.x, m: &step.state.m },
                &step.m_tilde,
            )
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(Check::at_most("descent_residual", worst, 1e-9))
}

/// Averaged descent over one long run per kind:
/// `mean(aΔ₁ + bΔ₂) − (H₀ − H_T)/(lr T) − (L lr/2) B_T`.
pub fn telescoped_descent_checks(seed: u64, steps: usize) -> Result<Vec<Check>> {
    let q = Quadratic::random(6, derive_seed(seed, 300))?;
    let smooth = q.smoothness().expect("quadratic smoothness");
    let cfg = DiscreteConfig::new(0.01, 0.8, 0.9, 0.99);
    let k = coeffs(&cfg)?;
    PhiSpec::catalog(6)
        .par_iter()
        .map(|spec| {
            let mut s = OptState::at(vec![0.1; 6]);
            let h0 = h_discrete(&cfg, spec, q.value(&s.x), &s.x, &s.m)?.to_f64();
            let (mut sum_d, mut sum_b) = (0.0, 0.0);
            for _ in 0..steps {
                let step = step_implicit(&cfg, spec, &s, &q.gradient(&s.x))?;
                let d1 = delta1(spec, cfg.lambda, &step.state.x, &step.m_tilde)?;
                let d2 = delta2(spec, &step.m_tilde, &step.state.m)?;
                sum_d += k.a * d1 + k.b * d2;
                sum_b += norm2_sq(&sub(&step.direction, &scale(&step.state.x, cfg.lambda)));
                s = step.state;
            }
            let ht = h_discrete(&cfg, spec, q.value(&s.x), &s.x, &s.m)?.to_f64();
            let t = steps as f64;
            let excess = sum_d / t - (h0 - ht) / (cfg.lr * t) - 0.5 * smooth * cfg.lr * sum_b / t;
            Ok(Check::at_most(format!("telescoped_descent/{}", spec_label(spec)), excess, 1e-9))
        })
        .collect()
}

/// `dist(λxₜ) ≤ 2⁻ᵗ dist(λx₀)` with `λ = lr = 1` from `‖λx₀‖∞ = 10`.
pub fn phase1_check(seed: u64) -> Result<Check> {
    let cfg = DiscreteConfig::new(1.0, 1.0, 0.9, 0.99);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 400));
    let mut worst = 0.0f64;
    for spec in PhiSpec::catalog(DIM).into_iter().filter(|s| s.conj_domain() != ConjDomain::Whole) {
        let q = Quadratic::random(DIM, rng.random())?;
        let mut x: Vec<f64> = (0..DIM).map(|_| rng.random_range(-10.0..10.0)).collect();
        x[0] = 10.0;
        let mut s = OptState::at(x);
        let mut dists = vec![spec.dom_distance(&s.x)?];
        for _ in 0..60 {
            s = step_implicit(&cfg, &spec, &s, &q.gradient(&s.x))?.state;
            dists.push(spec.dom_distance(&s.x)?);
        }
        if !phase1_rate_check(&cfg, &dists) {
            worst = worst.max(1.0);
        }
        for (t, d) in dists.iter().enumerate() {
            worst = worst.max(d - 0.5f64.powi(t as i32) * dists[0]);
        }
    }
    Ok(Check::at_most("phase1_rate", worst, 1e-12))
}

/// Relative error of the analytic `∇H` against central differences at random
/// interior points for the smooth kinds.
pub fn decomposition_check(seed: u64, points: usize) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 500));
    let mut worst = 0.0f64;
    for spec in [PhiSpec::Huber { a: 1.0 }, PhiSpec::HalfSquaredL2] {
        for _ in 0..points {
            let q = Quadratic::random(3, rng.random())?;
            let gamma = rng.random_range(0.1..2.0);
            let c = ContinuousConfig::new(rng.random_range(0.1..2.0), gamma, rng.random_range(0.2..2.0), rng.random_range(0.0..1.0 / gamma));
            let x = scale(&sample_interior_point(&spec, 3, &mut rng)?, 1.0 / c.lambda);
            let m = sample_probe(&mut rng, 3, 2.0);
            let dec = decomposition_fields(&c, &spec, &x, &m, &q.gradient(&x))?;
            let h = |x: &[f64], m: &[f64]| -> Result<f64> { Ok(h_continuous(&c, &spec, q.value(x), x, m)?.to_f64()) };
            let eps = 1e-6;
            let (gx, gm) = (dec.grad_x(), dec.grad_m());
            let mut fd_x = vec![0.0; 3];
            let mut fd_m = vec![0.0; 3];
            for i in 0..3 {
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[i] += eps;
                xm[i] -= eps;
                fd_x[i] = (h(&xp, &m)? - h(&xm, &m)?) / (2.0 * eps);
                let (mut mp, mut mm) = (m.clone(), m.clone());
                mp[i] += eps;
                mm[i] -= eps;
                fd_m[i] = (h(&x, &mp)? - h(&x, &mm)?) / (2.0 * eps);
            }
            let rel = |fd: &[f64], an: &[f64]| norm_inf(&sub(fd, an)) / norm_inf(an).max(1.0);
            worst = worst.max(rel(&fd_x, &gx)).max(rel(&fd_m, &gm));
        }
    }
    Ok(Check::at_most("gradient_decomposition", worst, 1e-5))
}

/// Covariance term against the Stein bound, EMA Fisher information and the
/// telescoped stochastic descent inequality.
pub fn stochastic_suite(seed: u64, samples: usize) -> Result<Vec<Check>> {
    let mut checks = vec![stein_check(seed, samples)?, ema_fisher_check()?];
    let g = GaussianSpec::isotropic(4, 0.5, 2.0)?;
    let mc = fisher_gaussian_mc(&g, samples, derive_seed(seed, 700))?;
    checks.push(Check::at_most(
        "fisher_monte_carlo_z",
        (mc.mean - fisher_gaussian(&g)).abs() / mc.se,
        5.0,
    ));

    let q = Quadratic::random(4, derive_seed(seed, 800))?;
    let cfg = DiscreteConfig::new(0.01, 0.5, 0.9, 0.99);
    let mut slack = f64::NEG_INFINITY;
    for r in 0..5 {
        let rep = telescoped_sgd_run(&cfg, &PhiSpec::L1, &q, 1.0, 4, &[0.0; 4], 2000, derive_seed(seed, 900 + r))?;
        slack = slack.max(rep.lhs - rep.rhs);
    }
    checks.push(Check::at_most("telescoped_sgd", slack, 0.0));
    Ok(checks)
}

/// Largest ratio of the Monte Carlo covariance term to the Stein bound over
/// `β₁ ∈ {0.5, 0.9}`, `σ ∈ {0.5, 1, 2}`, `d ∈ {1, 4}` for `L1` and `Huber`.
pub fn stein_check(seed: u64, samples: usize) -> Result<Check> {
    let mut grid = Vec::new();
    for beta1 in [0.5, 0.9] {
        for sigma in [0.5, 1.0, 2.0] {
            for dim in [1usize, 4] {
                grid.push((beta1, sigma, dim));
            }
        }
    }
    let ratios = grid
        .par_iter()
        .enumerate()
        .map(|(i, &(beta1, sigma, dim))| {
            let mut ratio = 0.0f64;
            for spec in [PhiSpec::L1, PhiSpec::Huber { a: 1.0 }] {
                let m_dist = GaussianSpec::isotropic(dim, 0.0, sigma * sigma)?;
                let g_dist = GaussianSpec::isotropic(dim, 0.3, sigma * sigma)?;
                let est = covariance_term_mc(&spec, beta1, &m_dist, &g_dist, samples, derive_seed(seed, 600 + i as u64))?;
                let l_phi = lipschitz_constant(&spec, dim, Hypothesis::LipschitzValue)?.expect("Lipschitz kind");
                let j = dim as f64 / (beta1 * beta1 * sigma * sigma);
                let bound = stein_bound(l_phi, 1.0 - beta1, g_dist.total_variance(), j)?;
                ratio = ratio.max(est.mean.abs() / bound);
            }
            Ok(ratio)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(Check::at_most("stein_bound_ratio", ratios.into_iter().fold(0.0, f64::max), 1.1))
}

/// Exact Fisher information of the Gaussian EMA relative to its bound, minus one,
/// for `t ≤ 200`.
pub fn ema_fisher_check() -> Result<Check> {
    let mut worst = f64::NEG_INFINITY;
    for beta2 in [0.5, 0.9, 0.99, 0.999] {
        for (sigma2, dim) in [(0.25, 1usize), (1.0, 4), (4.0, 16)] {
            let bound = ema_fisher_bound(beta2, dim as f64 / sigma2)?;
            for t in 1..=200 {
                worst = worst.max(ema_fisher_exact(beta2, sigma2, sigma2, dim, t) / bound - 1.0);
            }
        }
    }
    Ok(Check::at_most("ema_fisher_bound", worst, 1e-12))
}

/// Bit identity with centralized Lion, exact bit accounting and Phase-1
/// contraction under aggregation.
pub fn distributed_suite(seed: u64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let cfg = DiscreteConfig::new(0.01, 0.5, 0.9, 0.99);
    let base = Problem::Quadratic(Quadratic::random(5, derive_seed(seed, 1000))?);
    let x0 = vec![0.5, -1.0, 2.0, 0.0, 1.5];
    let mut worst = 0.0f64;
    for n in [1usize, 2, 4, 8] {
        for rule in [AggregationRule::AverageSigns, AggregationRule::MajoritySign] {
            let oracles = vec![StochasticOracle::exact(base.clone()); n];
            let opts = DistributedOptions { rule, seed, strict_binary: false };
            let run = run_distributed(&cfg, &PhiSpec::L1, &opts, &oracles, &x0, 300)?;
            let mut s = OptState::at(x0.clone());
            for x in &run.xs[1..] {
                s = step_explicit(&cfg, &PhiSpec::L1, &s, &base.gradient(&s.x))?.state;
                worst = worst.max(norm_inf(&sub(x, &s.x)));
            }
        }
    }
    checks.push(Check::at_most("noiseless_matches_centralized", worst, 0.0));

    let mut mismatch = 0.0f64;
    for (n, d) in [(1usize, 1usize), (8, 10), (3, 7)] {
        let avg = comm_stats(AggregationRule::AverageSigns, &PhiSpec::L1, n, d, false, 1);
        let full = comm_stats(AggregationRule::GlobalLion, &PhiSpec::L1, n, d, false, 1);
        mismatch = mismatch
            .max((avg.bits_upstream_per_round as f64 - (2 * d * n) as f64).abs())
            .max((full.bits_upstream_per_round as f64 - (64 * d * n) as f64).abs());
    }
    checks.push(Check::at_most("upstream_bit_accounting", mismatch, 0.0));

    let noisy = StochasticOracle::new(base, NoiseModel::GaussianIid { sigma: 1.0 }, 1)?;
    let far = DiscreteConfig::new(0.1, 1.0, 0.9, 0.99);
    let cert = implicit_of_explicit(&far).expect("lr * lambda < 1");
    let big: Vec<f64> = x0.iter().map(|v| 5.0 * v).collect();
    let opts = DistributedOptions { rule: AggregationRule::AverageSigns, seed, strict_binary: false };
    let run = run_distributed(&far, &PhiSpec::L1, &opts, &vec![noisy; 4], &big, 100)?;
    let dists: Vec<f64> = run.records.iter().map(|r| r.dist_dom).collect();
    checks.push(Check::at_most(
        "aggregated_phase1_rate",
        if phase1_rate_check(&cert, &dists) { 0.0 } else { 1.0 },
        0.0,
    ));
    Ok(checks)
}

/// Runs a suite. `samples` sets the random evaluations per kind and the Monte
/// Carlo sample count.
pub fn run_suite(suite: Suite, seed: u64, samples: usize, map: &dyn SubgradientMap) -> Result<VerifyReport> {
    if samples < 100 {
        return Err(Error::usage("samples must be >= 100"));
    }
    let mut checks = Vec::new();
    if matches!(suite, Suite::Convex | Suite::All) {
        checks.extend(convex_suite(seed, samples, map)?);
    }
    if matches!(suite, Suite::Lyapunov | Suite::All) {
        checks.extend(lyapunov_suite(seed, samples)?);
    }
    if matches!(suite, Suite::Stochastic | Suite::All) {
        checks.extend(stochastic_suite(seed, samples)?);
    }
    if matches!(suite, Suite::Distributed | Suite::All) {
        checks.extend(distributed_suite(seed)?);
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport { suite, seed, samples, checks, passed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names() {
        for s in ["convex", "lyapunov", "stochastic", "distributed", "all"] {
            assert_eq!(s.parse::<Suite>().unwrap().name(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn convex_suite_passes() {
        let r = run_suite(Suite::Convex, 3, 2000, &Standard).unwrap();
        assert!(r.passed, "{:#?}", r.failures().collect::<Vec<_>>());
    }

    #[test]
    fn sign_zero_up_is_caught_only_by_the_fixed_point() {
        let r = run_suite(Suite::Convex, 3, 2000, &SignZeroUp).unwrap();
        let failed: Vec<&str> = r.failures().map(|c| c.name.as_str()).collect();
        assert_eq!(failed, vec!["stationary_fixed_point"]);
    }

    #[test]
    fn lyapunov_suite_passes() {
        let r = run_suite(Suite::Lyapunov, 5, 1000, &Standard).unwrap();
        assert!(r.passed, "{:#?}", r.failures().collect::<Vec<_>>());
    }

    #[test]
    fn stochastic_suite_is_deterministic() {
        let a = run_suite(Suite::Stochastic, 9, 10_000, &Standard).unwrap();
        assert!(a.passed, "{:#?}", a.failures().collect::<Vec<_>>());
        let b = run_suite(Suite::Stochastic, 9, 10_000, &Standard).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn distributed_suite_passes() {
        let r = run_suite(Suite::Distributed, 2, 100, &Standard).unwrap();
        assert!(r.passed, "{:#?}", r.failures().collect::<Vec<_>>());
    }
}
