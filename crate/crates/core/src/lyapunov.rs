//! Lyapunov certificates for Lion-φ.
//!
//! Continuous time:
//!
//! ```text
//! H(x, m) = α f(x) + (γ/λ) φ*(λx) + (1 − εγ)/(1 + ελ) · (φ*(λx) + φ(m) − λ x·m)
//! ```
//!
//! Discrete time, for the implicit step with `D = lr λ (1 − β₁) + (1 − β₂)`:
//!
//! ```text
//! H(x, m) = f(x) + (1/λ) φ*(λx) + (lr β₁ / D) · (φ*(λx) + φ(m) − λ x·m)
//! H(xₜ₊₁, mₜ₊₁) − H(xₜ, mₜ) ≤ −lr (a Δ₁ + b Δ₂) + (L lr²/2) ‖∂φ(m̃ₜ₊₁) − λ xₜ₊₁‖²
//! ```
//!
//! The bracket is the Fenchel–Young gap and is nonnegative. `Δ₁` and `Δ₂` are
//! monotone pairings of the subgradient maps and are nonnegative too. Before
//! `λx` reaches `dom φ*` (phase 1) `H` is infinite and only the distance to the
//! domain is tracked; it contracts by `1/(1 + lr λ)` per step.

use serde::{Deserialize, Serialize};

use crate::convex::{ExtReal, PhiSpec, TAU_DOM};
use crate::dynamics::{ContinuousConfig, DiscreteConfig};
use crate::error::{Error, Result};
use crate::vecops::{dot, norm2_sq, norm_inf, scale, sub};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapCoeffs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

fn denominator(cfg: &DiscreteConfig) -> f64 {
    cfg.lr * cfg.lambda * (1.0 - cfg.beta1) + (1.0 - cfg.beta2)
}

fn require_ordered_betas(cfg: &DiscreteConfig) -> Result<()> {
    if !(cfg.beta2 > cfg.beta1) {
        return Err(Error::usage(format!(
            "Lyapunov diagnostics need beta2 > beta1 (got beta1 = {}, beta2 = {})",
            cfg.beta1, cfg.beta2
        )));
    }
    if !(cfg.beta2 < 1.0 && cfg.beta1 >= 0.0) {
        return Err(Error::usage("Lyapunov diagnostics need 0 <= beta1 < beta2 < 1"));
    }
    Ok(())
}

/// Weights of `Δ₁` and `Δ₂` in the discrete descent inequality.
pub fn coeffs(cfg: &DiscreteConfig) -> Result<LyapCoeffs> {
    require_ordered_betas(cfg)?;
    let d = denominator(cfg);
    let c = cfg.lr * cfg.lambda * cfg.beta1 / d;
    let b = cfg.beta1 * (1.0 - cfg.beta2) / ((cfg.beta2 - cfg.beta1) * d);
    Ok(LyapCoeffs { a: c + 1.0, b, c })
}

/// Coefficient of the Fenchel–Young gap in the discrete `H`.
pub fn gap_weight(cfg: &DiscreteConfig) -> Result<f64> {
    require_ordered_betas(cfg)?;
    Ok(cfg.lr * cfg.beta1 / denominator(cfg))
}

fn conj_scaled(spec: &PhiSpec, lambda: f64, x: &[f64]) -> Result<ExtReal> {
    spec.conj_value_within(&scale(x, lambda), TAU_DOM)
}

/// `φ*(λx) + φ(m) − λ x·m`.
pub fn fenchel_gap_term(spec: &PhiSpec, lambda: f64, x: &[f64], m: &[f64]) -> Result<ExtReal> {
    if x.len() != m.len() {
        return Err(Error::usage("dimension mismatch between x and m"));
    }
    let conj = conj_scaled(spec, lambda, x)?;
    Ok(conj + (spec.value(m)? - lambda * dot(x, m)))
}

/// Continuous-time Lyapunov function; `+∞` iff `λx ∉ dom φ*`.
pub fn h_continuous(ccfg: &ContinuousConfig, spec: &PhiSpec, f_val: f64, x: &[f64], m: &[f64]) -> Result<ExtReal> {
    if !(ccfg.lambda > 0.0) {
        return Err(Error::usage("continuous H needs lambda > 0"));
    }
    let conj = conj_scaled(spec, ccfg.lambda, x)?;
    let eta = (1.0 - ccfg.epsilon * ccfg.gamma) / (1.0 + ccfg.epsilon * ccfg.lambda);
    let gap = fenchel_gap_term(spec, ccfg.lambda, x, m)?;
    Ok(conj * (ccfg.gamma / ccfg.lambda) + gap * eta + ccfg.alpha * f_val)
}

/// Discrete-time Lyapunov function for the implicit step `cfg`.
///
/// At `λ = 0` the term `(1/λ) φ*(λx)` is replaced by its limit.
pub fn h_discrete(cfg: &DiscreteConfig, spec: &PhiSpec, f_val: f64, x: &[f64], m: &[f64]) -> Result<ExtReal> {
    let weight = gap_weight(cfg)?;
    let penalty = if cfg.lambda > 0.0 {
        conj_scaled(spec, cfg.lambda, x)? * (1.0 / cfg.lambda)
    } else {
        ExtReal::new(spec.conj_slope_at_zero(x)?)
    };
    let gap = fenchel_gap_term(spec, cfg.lambda, x, m)?;
    Ok(penalty + gap * weight + f_val)
}

fn require_feasible(spec: &PhiSpec, y: &[f64]) -> Result<()> {
    let distance = spec.dom_distance(y)?;
    if distance > TAU_DOM {
        return Err(Error::DomainViolation { distance, tol: TAU_DOM });
    }
    Ok(())
}

/// `Δ₁ = (∂φ(m̃) − λx)·(m̃ − ∂φ*(λx))` at the new iterate.
pub fn delta1(spec: &PhiSpec, lambda: f64, x_next: &[f64], m_tilde: &[f64]) -> Result<f64> {
    if x_next.len() != m_tilde.len() {
        return Err(Error::usage("dimension mismatch between x and m_tilde"));
    }
    let y = scale(x_next, lambda);
    require_feasible(spec, &y)?;
    let dual = spec.conj_subgrad(&y, TAU_DOM)?;
    Ok(dot(&sub(&spec.subgrad(m_tilde)?, &y), &sub(m_tilde, &dual)))
}

/// `Δ₂ = (∂φ(m̃) − ∂φ(m'))·(m̃ − m')`.
pub fn delta2(spec: &PhiSpec, m_tilde: &[f64], m_next: &[f64]) -> Result<f64> {
    if m_tilde.len() != m_next.len() {
        return Err(Error::usage("dimension mismatch between m_tilde and m_next"));
    }
    Ok(dot(
        &sub(&spec.subgrad(m_tilde)?, &spec.subgrad(m_next)?),
        &sub(m_tilde, m_next),
    ))
}

/// `f`, `x` and `m` at one iterate.
#[derive(Debug, Clone, Copy)]
pub struct Snapshot<'a> {
    pub f: f64,
    pub x: &'a [f64],
    pub m: &'a [f64],
}

/// Slack of the discrete descent inequality for one implicit step:
/// `ΔH + lr (a Δ₁ + b Δ₂) − (L lr²/2) ‖∂φ(m̃) − λ x'‖²`, which is `≤ 0` up to rounding.
pub fn descent_residual(
    cfg: &DiscreteConfig,
    spec: &PhiSpec,
    smoothness: f64,
    before: Snapshot<'_>,
    after: Snapshot<'_>,
    m_tilde: &[f64],
) -> Result<f64> {
    let k = coeffs(cfg)?;
    require_feasible(spec, &scale(before.x, cfg.lambda))?;
    require_feasible(spec, &scale(after.x, cfg.lambda))?;
    let h0 = h_discrete(cfg, spec, before.f, before.x, before.m)?;
    let h1 = h_discrete(cfg, spec, after.f, after.x, after.m)?;
    let (Some(h0), Some(h1)) = (h0.finite(), h1.finite()) else {
        return Err(Error::DomainViolation {
            distance: f64::INFINITY,
            tol: TAU_DOM,
        });
    };
    let d1 = delta1(spec, cfg.lambda, after.x, m_tilde)?;
    let d2 = delta2(spec, m_tilde, after.m)?;
    let v = sub(&spec.subgrad(m_tilde)?, &scale(after.x, cfg.lambda));
    Ok(h1 - h0 + cfg.lr * (k.a * d1 + k.b * d2) - 0.5 * smoothness * cfg.lr * cfg.lr * norm2_sq(&v))
}

/// True iff `dists[t] ≤ rᵗ⁻ˢ dists[s] · slack + 1e−12` for all `s ≤ t`.
fn geometric_decay(rate: f64, slack: f64, dists: &[f64]) -> bool {
    let log_r = rate.ln();
    // running min over s of log(dists[s]) − s log r
    let mut best = f64::INFINITY;
    for (t, &d) in dists.iter().enumerate() {
        best = best.min(d.ln() - t as f64 * log_r);
        let bound = (t as f64 * log_r + best).exp() * slack;
        if d > bound + 1e-12 {
            return false;
        }
    }
    true
}

/// Phase-1 contraction `dist_t ≤ (1/(1 + lr λ))^{t−s} dist_s + 1e−12` over a
/// sequence of domain distances of `λxₜ`.
pub fn phase1_rate_check(cfg: &DiscreteConfig, dists: &[f64]) -> bool {
    geometric_decay(1.0 / (1.0 + cfg.lr * cfg.lambda), 1.0, dists)
}

/// Continuous analogue on a grid of spacing `h`:
/// `dist(t) ≤ e^{−λ(t−s)} dist(s) (1 + 2h)`.
pub fn phase1_rate_check_continuous(lambda: f64, h: f64, dists: &[f64]) -> bool {
    geometric_decay((-lambda * h).exp(), 1.0 + 2.0 * h, dists)
}

/// Descent and conservative parts of the continuous vector field.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    /// `∂φ(m̃) − λx`
    pub vx: Vec<f64>,
    /// `−α∇f − γm`
    pub vm: Vec<f64>,
    /// `m̃ − ∂φ*(λx)`
    pub vhat_x: Vec<f64>,
    /// `∂φ(m̃) − ∂φ(m)`
    pub vhat_m: Vec<f64>,
    pub eta: f64,
    pub eta_prime: f64,
}

impl Decomposition {
    /// `∇ₓH = −η' V̂x − η Vm`
    pub fn grad_x(&self) -> Vec<f64> {
        self.vhat_x
            .iter()
            .zip(&self.vm)
            .map(|(a, b)| -self.eta_prime * a - self.eta * b)
            .collect()
    }

    /// `∇ₘH = −η V̂m + η Vx`
    pub fn grad_m(&self) -> Vec<f64> {
        self.vhat_m
            .iter()
            .zip(&self.vx)
            .map(|(a, b)| self.eta * (b - a))
            .collect()
    }
}

pub fn decomposition_fields(
    ccfg: &ContinuousConfig,
    spec: &PhiSpec,
    x: &[f64],
    m: &[f64],
    grad: &[f64],
) -> Result<Decomposition> {
    if x.len() != m.len() || grad.len() != x.len() {
        return Err(Error::usage("dimension mismatch in decomposition_fields"));
    }
    let y = scale(x, ccfg.lambda);
    let dual = spec.conj_subgrad(&y, TAU_DOM)?;
    let vm: Vec<f64> = grad
        .iter()
        .zip(m)
        .map(|(g, mi)| -ccfg.alpha * g - ccfg.gamma * mi)
        .collect();
    let m_tilde: Vec<f64> = m.iter().zip(&vm).map(|(mi, v)| mi + ccfg.epsilon * v).collect();
    let dir = spec.subgrad(&m_tilde)?;
    let scale_inv = 1.0 + ccfg.epsilon * ccfg.lambda;
    Ok(Decomposition {
        vx: sub(&dir, &y),
        vhat_x: sub(&m_tilde, &dual),
        vhat_m: sub(&dir, &spec.subgrad(m)?),
        vm,
        eta: (1.0 - ccfg.epsilon * ccfg.gamma) / scale_inv,
        eta_prime: (ccfg.gamma + ccfg.lambda) / scale_inv,
    })
}

/// `‖α∇f + γ ∂φ*(λx)‖∞`, zero at stationary points of `αf + (γ/λ) φ*(λ·)`.
pub fn stationarity_residual(ccfg: &ContinuousConfig, spec: &PhiSpec, x: &[f64], grad: &[f64]) -> Result<f64> {
    if x.len() != grad.len() {
        return Err(Error::usage("dimension mismatch in stationarity_residual"));
    }
    let dual = spec.conj_subgrad(&scale(x, ccfg.lambda), TAU_DOM)?;
    Ok(grad
        .iter()
        .zip(&dual)
        .map(|(g, u)| (ccfg.alpha * g + ccfg.gamma * u).abs())
        .fold(0.0, f64::max))
}

/// One row of per-step diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub step: u64,
    pub f: f64,
    /// `None` when the configuration admits no Lyapunov function (`β₂ ≤ β₁`).
    pub h: Option<ExtReal>,
    pub delta1: Option<f64>,
    pub delta2: Option<f64>,
    /// `a Δ₁ + b Δ₂`
    pub delta_total: Option<f64>,
    pub dist_dom: f64,
    pub feasible: bool,
    pub linf_x: f64,
    pub phase: u8,
    pub descent_residual: Option<f64>,
}

/// Diagnostics of an iterate that has no predecessor.
pub fn diagnose_initial(cfg: &DiscreteConfig, spec: &PhiSpec, f: f64, x: &[f64], m: &[f64], step: u64) -> Result<Diagnostics> {
    let dist_dom = spec.dom_distance(&scale(x, cfg.lambda))?;
    let feasible = dist_dom <= TAU_DOM;
    let h = match coeffs(cfg) {
        Ok(_) => Some(h_discrete(cfg, spec, f, x, m)?),
        Err(_) => None,
    };
    Ok(Diagnostics {
        step,
        f,
        h,
        delta1: None,
        delta2: None,
        delta_total: None,
        dist_dom,
        feasible,
        linf_x: norm_inf(x),
        phase: if feasible { 2 } else { 1 },
        descent_residual: None,
    })
}

/// Diagnostics of the iterate produced by an implicit step `cfg` from `before`.
///
/// `Δ₁`, `Δ₂` and their weighted sum are reported once the new iterate is in
/// phase 2; the descent residual needs both iterates in phase 2 and a known
/// smoothness constant.
pub fn diagnose_step(
    cfg: &DiscreteConfig,
    spec: &PhiSpec,
    smoothness: Option<f64>,
    before: Snapshot<'_>,
    after: Snapshot<'_>,
    m_tilde: &[f64],
    step: u64,
) -> Result<Diagnostics> {
    let mut diag = diagnose_initial(cfg, spec, after.f, after.x, after.m, step)?;
    if diag.phase == 2 {
        let d1 = delta1(spec, cfg.lambda, after.x, m_tilde)?;
        let d2 = delta2(spec, m_tilde, after.m)?;
        diag.delta1 = Some(d1);
        diag.delta2 = Some(d2);
        if let Ok(k) = coeffs(cfg) {
            diag.delta_total = Some(k.a * d1 + k.b * d2);
            let before_ok = spec.dom_distance(&scale(before.x, cfg.lambda))? <= TAU_DOM;
            if let (true, Some(l)) = (before_ok, smoothness) {
                diag.descent_residual = Some(descent_residual(cfg, spec, l, before, after, m_tilde)?);
            }
        }
    }
    Ok(diag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{step_implicit, OptState};
    use crate::problems::{Objective, Quadratic};

    fn cfg() -> DiscreteConfig {
        DiscreteConfig::new(1e-4, 10.0, 0.9, 0.99)
    }

    #[test]
    fn coefficient_identity() {
        let k = coeffs(&cfg()).unwrap();
        let c = cfg();
        assert!((k.c - ((k.a + k.b) * c.beta1 - k.b * c.beta2)).abs() < 1e-12);
        assert!(k.a >= 1.0 && k.b >= 0.0);
    }

    #[test]
    fn coefficients_without_decay() {
        let k = coeffs(&DiscreteConfig::new(0.1, 0.0, 0.9, 0.99)).unwrap();
        assert_eq!(k.a, 1.0);
        assert!((k.b - 0.9 / 0.09).abs() < 1e-12);
        assert!(coeffs(&DiscreteConfig::new(0.1, 0.0, 0.9, 0.9)).is_err());
        assert!(coeffs(&DiscreteConfig::new(0.1, 0.0, 0.99, 0.9)).is_err());
    }

    #[test]
    fn continuous_h_examples() {
        let c = ContinuousConfig::new(1.0, 0.5, 1.0, 0.2);
        let h = h_continuous(&c, &PhiSpec::L1, 0.0, &[1.5, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(h, ExtReal::PosInf);
        // ∂φ(m) = λx with λx interior: the gap vanishes
        let x = [0.5, -0.25];
        let m = [2.0, -3.0];
        let gap = fenchel_gap_term(&PhiSpec::L1, 2.0, &x, &m).unwrap();
        assert!(gap.to_f64().abs() < 1e-12 || gap.to_f64() > 0.0);
        let gap = fenchel_gap_term(&PhiSpec::L1, 2.0, &[0.5, -0.5], &m).unwrap();
        assert_eq!(gap, ExtReal::new(0.0));
        let c0 = ContinuousConfig::new(2.0, 0.0, 1.0, 0.0);
        let h = h_continuous(&c0, &PhiSpec::Huber { a: 1.0 }, 3.0, &x, &m).unwrap();
        let expect = 6.0 + fenchel_gap_term(&PhiSpec::Huber { a: 1.0 }, 1.0, &x, &m).unwrap().to_f64();
        assert!((h.to_f64() - expect).abs() < 1e-12);
        assert!(h_continuous(&ContinuousConfig::new(1.0, 1.0, 0.0, 0.0), &PhiSpec::L1, 0.0, &x, &m).is_err());
    }

    #[test]
    fn discrete_h_at_matched_pair() {
        let c = DiscreteConfig::new(0.1, 0.5, 0.9, 0.99);
        let spec = PhiSpec::Huber { a: 1.0 };
        let x = [0.4, -1.0];
        let y = scale(&x, c.lambda);
        let m = spec.conj_subgrad(&y, 0.0).unwrap();
        let h = h_discrete(&c, &spec, 1.25, &x, &m).unwrap().to_f64();
        let expect = 1.25 + spec.conj_value(&y).unwrap().to_f64() / c.lambda;
        assert!((h - expect).abs() < 1e-12);
    }

    #[test]
    fn delta_examples() {
        let d1 = delta1(&PhiSpec::L1, 1.0, &[0.5, 0.2], &[2.0, -1.0]).unwrap();
        assert!((d1 - 2.2).abs() < 1e-15);
        assert_eq!(delta2(&PhiSpec::L1, &[1.0, -1.0], &[-1.0, -1.0]).unwrap(), 4.0);
        assert_eq!(delta2(&PhiSpec::L1, &[1.0, -1.0], &[1.0, -1.0]).unwrap(), 0.0);
        assert!(matches!(
            delta1(&PhiSpec::L1, 1.0, &[2.0, 0.0], &[1.0, 1.0]),
            Err(Error::DomainViolation { .. })
        ));
        let spec = PhiSpec::HalfSquaredL2;
        assert_eq!(delta1(&spec, 2.0, &[0.5, 1.0], &[1.0, 2.0]).unwrap(), 0.0);
    }

    #[test]
    fn descent_on_quadratic_steps() {
        let q = Quadratic::toy();
        let c = DiscreteConfig::new(0.05, 0.5, 0.9, 0.99);
        for spec in PhiSpec::catalog(2) {
            let mut s = OptState::new(vec![0.3, -0.4], vec![0.2, 0.1]).unwrap();
            for _ in 0..200 {
                let g = q.gradient(&s.x);
                let step = step_implicit(&c, &spec, &s, &g).unwrap();
                let r = descent_residual(
                    &c,
                    &spec,
                    2.0,
                    Snapshot { f: q.value(&s.x), x: &s.x, m: &s.m },
                    Snapshot { f: q.value(&step.state.x), x: &step.state.x, m: &step.state.m },
                    &step.m_tilde,
                )
                .unwrap();
                assert!(r <= 1e-9, "{spec:?}: {r}");
                s = step.state;
            }
        }
    }

    #[test]
    fn zero_step_has_zero_residual() {
        // x = ∂φ(m)/λ with zero gradient and m̃ = m' = m requires β-independent m = 0
        let c = DiscreteConfig::new(0.1, 1.0, 0.5, 0.9);
        let spec = PhiSpec::Huber { a: 1.0 };
        let x = [0.0, 0.0];
        let m = [0.0, 0.0];
        let r = descent_residual(&c, &spec, 2.0, Snapshot { f: 0.0, x: &x, m: &m }, Snapshot { f: 0.0, x: &x, m: &m }, &m).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn phase1_examples() {
        let c = DiscreteConfig::new(1.0, 1.0, 0.9, 0.99);
        let dists: Vec<f64> = (0..20).map(|t| 8.0 * 0.5f64.powi(t)).collect();
        assert!(phase1_rate_check(&c, &dists));
        let mut bad = dists.clone();
        bad[5] *= 1.01;
        assert!(!phase1_rate_check(&c, &bad));
        assert!(phase1_rate_check(&c, &[3.0, 0.0, 0.0, 0.0]));
        assert!(!phase1_rate_check(&c, &[3.0, 0.0, 1e-6]));
        assert!(phase1_rate_check_continuous(1.0, 0.01, &[1.0, (-0.01f64).exp(), (-0.02f64).exp()]));
    }

    #[test]
    fn decomposition_matches_finite_differences() {
        let c = ContinuousConfig::new(1.5, 0.7, 0.8, 0.3);
        let q = Quadratic::toy();
        for spec in [PhiSpec::Huber { a: 1.0 }, PhiSpec::HalfSquaredL2] {
            let x = [0.3, -0.5];
            let m = [0.4, 0.2];
            let dec = decomposition_fields(&c, &spec, &x, &m, &q.gradient(&x)).unwrap();
            let h = |x: &[f64], m: &[f64]| h_continuous(&c, &spec, q.value(x), x, m).unwrap().to_f64();
            let eps = 1e-6;
            for i in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[i] += eps;
                xm[i] -= eps;
                let fd = (h(&xp, &m) - h(&xm, &m)) / (2.0 * eps);
                assert!((fd - dec.grad_x()[i]).abs() <= 1e-5 * (1.0 + fd.abs()), "{spec:?}");
                let mut mp = m;
                let mut mm = m;
                mp[i] += eps;
                mm[i] -= eps;
                let fd = (h(&x, &mp) - h(&x, &mm)) / (2.0 * eps);
                assert!((fd - dec.grad_m()[i]).abs() <= 1e-5 * (1.0 + fd.abs()), "{spec:?}");
            }
            assert!(dot(&dec.vhat_x, &dec.vx) >= -1e-12);
        }
    }

    #[test]
    fn stationarity_examples() {
        let c = ContinuousConfig::new(2.0, 1.0, 0.1, 0.5);
        let r = stationarity_residual(&c, &PhiSpec::L1, &[1.0, 0.0], &[0.5, -0.25]).unwrap();
        assert_eq!(r, 1.0);
        let q = Quadratic::new(vec![0.5, -0.5], crate::problems::PsdScale::Identity).unwrap();
        let r = stationarity_residual(&c, &PhiSpec::L1, &[0.5, -0.5], &q.gradient(&[0.5, -0.5])).unwrap();
        assert_eq!(r, 0.0);
        assert!(stationarity_residual(&c, &PhiSpec::L1, &[20.0, 0.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn diagnostics_phases() {
        let c = DiscreteConfig::new(0.1, 1.0, 0.9, 0.99);
        let d = diagnose_initial(&c, &PhiSpec::L1, 1.0, &[3.0, 0.0], &[0.0, 0.0], 0).unwrap();
        assert_eq!(d.phase, 1);
        assert!(!d.feasible);
        assert_eq!(d.h, Some(ExtReal::PosInf));
        assert!((d.dist_dom - 2.0).abs() < 1e-15);
        let d = diagnose_initial(&DiscreteConfig::new(0.1, 1.0, 0.9, 0.9), &PhiSpec::L1, 1.0, &[0.5, 0.0], &[0.0, 0.0], 0).unwrap();
        assert_eq!((d.phase, d.h), (2, None));
    }
}
