//! Monte Carlo checks of the stochastic-gradient analysis.
//!
//! The noise enters the descent inequality through the covariance
//! `V = E[(g − Eg)·∂φ(β₁m + (1 − β₁)g)]`. For independent `m`, `g` and a
//! Lipschitz `φ` the Stein identity gives
//!
//! ```text
//! |V| ≤ (1 − β₁) · L_φ · var(g) · √J(β₁m)
//! ```
//!
//! with `var` the trace of the covariance and `J` the Fisher information.
//! For an EMA `mₜ` of independent draws, `J(mₜ) ≤ (1 + β₂)/(1 − β₂) · J_max`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convex::PhiSpec;
use crate::dynamics::{step_implicit, DiscreteConfig, OptState};
use crate::error::{Error, Result};
use crate::lyapunov::{coeffs, delta1, delta2, h_discrete};
use crate::problems::{derive_seed, Objective};
use crate::vecops::{dot, norm2_sq, scale, sub};

/// Isotropic Gaussian `N(mean, sigma2 · I)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub mean: Vec<f64>,
    pub sigma2: f64,
}

impl GaussianSpec {
    pub fn new(mean: Vec<f64>, sigma2: f64) -> Result<Self> {
        if mean.is_empty() {
            return Err(Error::usage("Gaussian needs dimension >= 1"));
        }
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::usage(format!("sigma2 must be > 0, got {sigma2}")));
        }
        Ok(Self { mean, sigma2 })
    }

    pub fn isotropic(dim: usize, mean: f64, sigma2: f64) -> Result<Self> {
        Self::new(vec![mean; dim], sigma2)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Trace of the covariance.
    pub fn total_variance(&self) -> f64 {
        self.dim() as f64 * self.sigma2
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let s = self.sigma2.sqrt();
        self.mean
            .iter()
            .map(|mu| {
                let z: f64 = StandardNormal.sample(rng);
                mu + s * z
            })
            .collect()
    }
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub se: f64,
}

const MC_BATCHES: usize = 100;

/// Mean of `sample(rng)` over `samples` draws, split into 100 batches with
/// their own derived seeds. The standard error is that of the batch means.
pub fn batched_mean<F>(samples: usize, rng_seed: u64, sample: F) -> Result<McEstimate>
where
    F: Fn(&mut ChaCha8Rng) -> Result<f64> + Sync,
{
    if samples < MC_BATCHES {
        return Err(Error::usage(format!("need at least {MC_BATCHES} samples")));
    }
    let per = samples / MC_BATCHES;
    let means = (0..MC_BATCHES)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(rng_seed, b as u64));
            let mut acc = 0.0;
            for _ in 0..per {
                acc += sample(&mut rng)?;
            }
            Ok(acc / per as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let k = MC_BATCHES as f64;
    let mean = means.iter().sum::<f64>() / k;
    let var = means.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    Ok(McEstimate {
        mean,
        se: (var / k).sqrt(),
    })
}

/// Estimate of `E[(g − Eg)·∂φ(β₁m + (1 − β₁)g)]` for independent `m` and `g`.
pub fn covariance_term_mc(
    spec: &PhiSpec,
    beta1: f64,
    m_dist: &GaussianSpec,
    g_dist: &GaussianSpec,
    samples: usize,
    rng_seed: u64,
) -> Result<McEstimate> {
    if m_dist.dim() != g_dist.dim() {
        return Err(Error::usage("m and g distributions must share a dimension"));
    }
    spec.check_dim(m_dist.dim())?;
    if !(0.0..=1.0).contains(&beta1) {
        return Err(Error::usage("beta1 must lie in [0, 1]"));
    }
    batched_mean(samples, rng_seed, |rng| {
        let m = m_dist.draw(rng);
        let g = g_dist.draw(rng);
        let mix: Vec<f64> = m.iter().zip(&g).map(|(a, b)| beta1 * a + (1.0 - beta1) * b).collect();
        Ok(dot(&sub(&g, &g_dist.mean), &spec.subgrad(&mix)?))
    })
}

/// `ε · L_φ · var(Y) · √J(X)`.
pub fn stein_bound(l_phi: f64, eps_coeff: f64, var_y: f64, j_x: f64) -> Result<f64> {
    if [l_phi, eps_coeff, var_y, j_x].iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::usage("Stein bound inputs must be nonnegative"));
    }
    Ok(eps_coeff * l_phi * var_y * j_x.sqrt())
}

/// Bound on `|V|` when `∂φ` is `L`-Lipschitz: `ε · L · var(Y)`.
pub fn gradient_lipschitz_bound(l_grad: f64, eps_coeff: f64, var_y: f64) -> Result<f64> {
    if [l_grad, eps_coeff, var_y].iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::usage("bound inputs must be nonnegative"));
    }
    Ok(eps_coeff * l_grad * var_y)
}

/// Which Lipschitz property of φ a constant refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hypothesis {
    /// `|φ(x) − φ(y)| ≤ L ‖x − y‖₂`
    LipschitzValue,
    /// `‖∂φ(x) − ∂φ(y)‖₂ ≤ L ‖x − y‖₂`
    LipschitzGradient,
}

/// Lipschitz constant of φ (or of its gradient) in ℓ2 on `R^dim`, `None` when
/// the property fails.
pub fn lipschitz_constant(spec: &PhiSpec, dim: usize, hyp: Hypothesis) -> Result<Option<f64>> {
    spec.check_dim(dim)?;
    let d = dim as f64;
    let dual_ball = |p: f64, n: f64| n.powf((1.0 / p - 0.5).max(0.0));
    Ok(match hyp {
        Hypothesis::LipschitzValue => match spec {
            PhiSpec::L1 | PhiSpec::TruncatedL1 { .. } => Some(d.sqrt()),
            PhiSpec::Lp { p } | PhiSpec::TruncatedLpVec { p, .. } => Some(dual_ball(*p, d)),
            PhiSpec::GroupLp { p, partition } => Some(
                partition
                    .groups()
                    .map(|g| dual_ball(*p, g.len() as f64).powi(2))
                    .sum::<f64>()
                    .sqrt(),
            ),
            PhiSpec::SortingTopK { i_cut } => Some((*i_cut as f64).sqrt()),
            PhiSpec::Huber { .. } | PhiSpec::Entropy { .. } | PhiSpec::Relativistic { .. } => Some(d.sqrt()),
            PhiSpec::HalfSquaredL2 => None,
        },
        Hypothesis::LipschitzGradient => match spec {
            PhiSpec::Huber { a } => Some(1.0 / a),
            PhiSpec::Entropy { a } => Some(*a),
            PhiSpec::Relativistic { e } => Some(1.0 / e),
            PhiSpec::HalfSquaredL2 => Some(1.0),
            _ => None,
        },
    })
}

/// `J = dim / σ²` for an isotropic Gaussian.
pub fn fisher_gaussian(spec: &GaussianSpec) -> f64 {
    spec.dim() as f64 / spec.sigma2
}

/// Monte Carlo `E‖∇ log π(X)‖²` for an isotropic Gaussian.
pub fn fisher_gaussian_mc(spec: &GaussianSpec, samples: usize, rng_seed: u64) -> Result<McEstimate> {
    batched_mean(samples, rng_seed, |rng| {
        let x = spec.draw(rng);
        Ok(norm2_sq(&sub(&x, &spec.mean)) / (spec.sigma2 * spec.sigma2))
    })
}

/// `(1 + β₂)/(1 − β₂) · J_max`.
pub fn ema_fisher_bound(beta2: f64, j_max: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&beta2) {
        return Err(Error::usage("beta2 must lie in [0, 1)"));
    }
    Ok((1.0 + beta2) / (1.0 - beta2) * j_max)
}

/// Per-coordinate variance of `mₜ = β₂ mₜ₋₁ + (1 − β₂) gₜ` with iid gradients of
/// variance `sigma2` and `m₀` of variance `sigma0_2`.
pub fn ema_variance(beta2: f64, sigma2: f64, sigma0_2: f64, t: u32) -> f64 {
    let q = beta2 * beta2;
    let geometric = if q == 1.0 { t as f64 } else { (1.0 - q.powi(t as i32)) / (1.0 - q) };
    (1.0 - beta2).powi(2) * geometric * sigma2 + q.powi(t as i32) * sigma0_2
}

/// Exact `J(mₜ)` for the Gaussian EMA chain in `dim` dimensions.
pub fn ema_fisher_exact(beta2: f64, sigma2: f64, sigma0_2: f64, dim: usize, t: u32) -> f64 {
    dim as f64 / ema_variance(beta2, sigma2, sigma0_2, t)
}

/// `C/√n_batch` with `C = L_φ / (β₁ (1 + λ lr)) · √((1 + β₂)/(1 − β₂)) · √J_max · v_max`,
/// where `J_max` and `v_max` are per-sample Fisher information and trace variance.
pub fn sgd_excess_term(cfg: &DiscreteConfig, l_phi: f64, j_max: f64, v_max: f64, n_batch: usize) -> Result<f64> {
    if n_batch == 0 {
        return Err(Error::usage("n_batch must be >= 1"));
    }
    if !(cfg.beta1 > 0.0) {
        return Err(Error::usage("excess term needs beta1 > 0"));
    }
    let c = l_phi / (cfg.beta1 * (1.0 + cfg.lambda * cfg.lr))
        * ((1.0 + cfg.beta2) / (1.0 - cfg.beta2)).sqrt()
        * j_max.sqrt()
        * v_max;
    Ok(c / (n_batch as f64).sqrt())
}

/// Both sides of the telescoped stochastic descent inequality for one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TelescopeReport {
    /// `(1/T) Σ (a Δ₁ + b Δ₂)`
    pub lhs: f64,
    /// `(H₀ − H_T)/(lr T) + (L lr/2) B_T + excess`
    pub rhs: f64,
    pub h0: f64,
    pub h_final: f64,
    pub b_t: f64,
    pub excess: f64,
}

impl TelescopeReport {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs
    }
}

/// Implicit Lion-φ on `objective` with gradients perturbed by
/// `N(0, σ²/n_batch · I)` and Gaussian initial momentum of the same law.
#[allow(clippy::too_many_arguments)]
pub fn telescoped_sgd_run<O: Objective>(
    cfg: &DiscreteConfig,
    spec: &PhiSpec,
    objective: &O,
    sigma: f64,
    n_batch: usize,
    x0: &[f64],
    steps: usize,
    rng_seed: u64,
) -> Result<TelescopeReport> {
    let d = objective.dim();
    let smooth = objective
        .smoothness()
        .ok_or_else(|| Error::usage("objective needs a known smoothness constant"))?;
    let l_phi = lipschitz_constant(spec, d, Hypothesis::LipschitzValue)?
        .ok_or_else(|| Error::usage(format!("{} is not Lipschitz", spec.kind_name())))?;
    if !(sigma > 0.0) || steps == 0 {
        return Err(Error::usage("need sigma > 0 and steps >= 1"));
    }
    let k = coeffs(cfg)?;
    let per_draw = sigma / (n_batch as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let noise = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..d)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                per_draw * z
            })
            .collect()
    };
    let m0 = noise(&mut rng);
    let mut state = OptState::new(x0.to_vec(), m0)?;
    let h0 = h_discrete(cfg, spec, objective.value(&state.x), &state.x, &state.m)?
        .finite()
        .ok_or_else(|| Error::usage("initial point must satisfy the domain constraint"))?;
    let mut sum_delta = 0.0;
    let mut sum_b = 0.0;
    for _ in 0..steps {
        let g: Vec<f64> = objective
            .gradient(&state.x)
            .iter()
            .zip(noise(&mut rng))
            .map(|(a, b)| a + b)
            .collect();
        let step = step_implicit(cfg, spec, &state, &g)?;
        let d1 = delta1(spec, cfg.lambda, &step.state.x, &step.m_tilde)?;
        let d2 = delta2(spec, &step.m_tilde, &step.state.m)?;
        sum_delta += k.a * d1 + k.b * d2;
        sum_b += norm2_sq(&sub(&step.direction, &scale(&step.state.x, cfg.lambda)));
        state = step.state;
    }
    let h_final = h_discrete(cfg, spec, objective.value(&state.x), &state.x, &state.m)?.to_f64();
    let t = steps as f64;
    let b_t = sum_b / t;
    let excess = sgd_excess_term(cfg, l_phi, d as f64 / (sigma * sigma), d as f64 * sigma * sigma, n_batch)?;
    Ok(TelescopeReport {
        lhs: sum_delta / t,
        rhs: (h0 - h_final) / (cfg.lr * t) + 0.5 * smooth * cfg.lr * b_t + excess,
        h0,
        h_final,
        b_t,
        excess,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::Quadratic;

    #[test]
    fn fisher_examples() {
        let g = GaussianSpec::isotropic(1, 0.0, 1.0).unwrap();
        assert_eq!(fisher_gaussian(&g), 1.0);
        let g = GaussianSpec::isotropic(3, 1.0, 0.5).unwrap();
        let scaled = GaussianSpec::isotropic(3, 2.0, 0.5 * 4.0).unwrap();
        assert!((fisher_gaussian(&scaled) - fisher_gaussian(&g) / 4.0).abs() < 1e-15);
        let mc = fisher_gaussian_mc(&g, 1_000_000, 4).unwrap();
        assert!((mc.mean - 6.0).abs() <= 0.01 * 6.0, "{mc:?}");
        assert!(GaussianSpec::isotropic(2, 0.0, 0.0).is_err());
    }

    #[test]
    fn ema_bound_examples() {
        assert!((ema_fisher_bound(0.99, 1.0).unwrap() - 199.0).abs() < 1e-9);
        assert_eq!(ema_fisher_bound(0.0, 3.0).unwrap(), 3.0);
        for beta2 in [0.0, 0.5, 0.9, 0.99, 0.999] {
            for (s2, s02) in [(1.0, 1.0), (1.0, 4.0), (4.0, 1.0)] {
                let j_max = 3.0 / f64::min(s2, s02);
                let bound = ema_fisher_bound(beta2, j_max).unwrap();
                for t in 1..=200 {
                    assert!(ema_fisher_exact(beta2, s2, s02, 3, t) <= bound * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn stein_bound_examples() {
        assert_eq!(stein_bound(2.0, 0.1, 0.0, 4.0).unwrap(), 0.0);
        assert_eq!(stein_bound(2.0, 0.5, 3.0, 4.0).unwrap(), 6.0);
        assert!(stein_bound(-1.0, 0.1, 1.0, 1.0).is_err());
        assert_eq!(lipschitz_constant(&PhiSpec::L1, 9, Hypothesis::LipschitzValue).unwrap(), Some(3.0));
        assert_eq!(lipschitz_constant(&PhiSpec::HalfSquaredL2, 9, Hypothesis::LipschitzValue).unwrap(), None);
        assert_eq!(lipschitz_constant(&PhiSpec::L1, 9, Hypothesis::LipschitzGradient).unwrap(), None);
        assert_eq!(
            lipschitz_constant(&PhiSpec::Lp { p: 2.0 }, 9, Hypothesis::LipschitzValue).unwrap(),
            Some(1.0)
        );
    }

    #[test]
    fn covariance_closed_form_for_linear_map() {
        let m = GaussianSpec::isotropic(3, 0.5, 1.0).unwrap();
        let g = GaussianSpec::isotropic(3, -0.2, 0.25).unwrap();
        let est = covariance_term_mc(&PhiSpec::HalfSquaredL2, 0.9, &m, &g, 100_000, 7).unwrap();
        let exact = 0.1 * g.total_variance();
        assert!((est.mean - exact).abs() <= 4.0 * est.se, "{est:?} vs {exact}");
        let est = covariance_term_mc(&PhiSpec::L1, 1.0, &m, &g, 100_000, 8).unwrap();
        assert!(est.mean.abs() <= 4.0 * est.se);
    }

    #[test]
    fn covariance_below_stein_bound_for_l1() {
        let m = GaussianSpec::isotropic(4, 0.0, 1.0).unwrap();
        let g = GaussianSpec::isotropic(4, 0.0, 0.01).unwrap();
        let est = covariance_term_mc(&PhiSpec::L1, 0.9, &m, &g, 100_000, 1).unwrap();
        let j = fisher_gaussian(&GaussianSpec::isotropic(4, 0.0, 0.81).unwrap());
        let bound = stein_bound(2.0, 0.1, g.total_variance(), j).unwrap();
        assert!(est.mean <= 1.1 * bound, "{est:?} vs {bound}");
    }

    #[test]
    fn mc_is_deterministic() {
        let m = GaussianSpec::isotropic(2, 0.0, 1.0).unwrap();
        let a = covariance_term_mc(&PhiSpec::L1, 0.5, &m, &m, 10_000, 3).unwrap();
        let b = covariance_term_mc(&PhiSpec::L1, 0.5, &m, &m, 10_000, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn excess_term_scaling() {
        let c = DiscreteConfig::new(0.01, 0.5, 0.9, 0.99);
        let one = sgd_excess_term(&c, 2.0, 1.0, 1.0, 1).unwrap();
        let two = sgd_excess_term(&c, 2.0, 1.0, 1.0, 2).unwrap();
        assert!((one / two - 2f64.sqrt()).abs() < 1e-12);
        assert!(sgd_excess_term(&c, 2.0, 1.0, 1.0, 1 << 40).unwrap() < 1e-5 * one);
        assert!(sgd_excess_term(&c, 2.0, 1.0, 1.0, 0).is_err());
    }

    #[test]
    fn telescoped_run_satisfies_bound() {
        let q = Quadratic::toy();
        let c = DiscreteConfig::new(0.01, 0.5, 0.9, 0.99);
        let r = telescoped_sgd_run(&c, &PhiSpec::L1, &q, 0.5, 8, &[0.0, 0.0], 500, 3).unwrap();
        assert!(r.holds(), "{r:?}");
    }
}
