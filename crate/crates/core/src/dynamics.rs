//! Lion-φ updates.
//!
//! The discrete optimizer keeps two vectors, parameters `x` and momentum `m`:
//!
//! ```text
//! m̃ₜ₊₁ = β₁ mₜ − (1 − β₁) gₜ
//! mₜ₊₁ = β₂ mₜ − (1 − β₂) gₜ
//! xₜ₊₁ = xₜ + lr (∂φ(m̃ₜ₊₁) − λ xₜ)              explicit decay
//! xₜ₊₁ = (xₜ + lr ∂φ(m̃ₜ₊₁)) / (1 + lr λ)          implicit decay
//! ```
//!
//! With `φ = ‖·‖₁` and the explicit form this is Lion. The implicit form equals the
//! explicit one run with `lr / (1 + lr λ)`, see [`explicit_of_implicit`].
//!
//! The continuous-time system is
//!
//! ```text
//! ṁ = −α ∇f(x) − γ m
//! ẋ = ∂φ(m − ε (α ∇f(x) + γ m)) − λ x
//! ```

use serde::{Deserialize, Serialize};

use crate::convex::PhiSpec;
use crate::error::{Error, Result};
use crate::vecops::all_finite;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteConfig {
    pub lr: f64,
    pub lambda: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl DiscreteConfig {
    pub fn new(lr: f64, lambda: f64, beta1: f64, beta2: f64) -> Self {
        Self {
            lr,
            lambda,
            beta1,
            beta2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::usage(format!("lr must be > 0, got {}", self.lr)));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::usage(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::usage(format!("{name} must lie in (0, 1), got {b}")));
            }
        }
        Ok(())
    }

    /// Approximate continuous counterpart for the `α = γ` Euler correspondence:
    /// `γ = α = (1 − β₂)/lr`, `ε = (1 − β₁)/γ`, step size `lr`.
    ///
    /// This is first-order only; it is not used by any certificate.
    pub fn to_continuous_approx(&self) -> (ContinuousConfig, f64) {
        let gamma = (1.0 - self.beta2) / self.lr;
        let cfg = ContinuousConfig {
            alpha: gamma,
            gamma,
            lambda: self.lambda,
            epsilon: (1.0 - self.beta1) / gamma,
        };
        (cfg, self.lr)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuousConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub epsilon: f64,
}

impl ContinuousConfig {
    pub fn new(alpha: f64, gamma: f64, lambda: f64, epsilon: f64) -> Self {
        Self {
            alpha,
            gamma,
            lambda,
            epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.gamma > 0.0) {
            return Err(Error::usage("alpha and gamma must be > 0"));
        }
        if !(self.lambda >= 0.0 && self.epsilon >= 0.0) {
            return Err(Error::usage("lambda and epsilon must be >= 0"));
        }
        if self.epsilon * self.gamma > 1.0 {
            return Err(Error::usage(format!(
                "epsilon * gamma must be <= 1, got {}",
                self.epsilon * self.gamma
            )));
        }
        Ok(())
    }
}

/// Parameters and momentum, plus the number of steps taken so far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptState {
    pub x: Vec<f64>,
    pub m: Vec<f64>,
    pub t: u64,
}

impl OptState {
    pub fn new(x: Vec<f64>, m: Vec<f64>) -> Result<Self> {
        if x.len() != m.len() {
            return Err(Error::usage(format!(
                "x has dimension {} but m has dimension {}",
                x.len(),
                m.len()
            )));
        }
        Ok(Self { x, m, t: 0 })
    }

    /// Momentum starts at zero.
    pub fn at(x: Vec<f64>) -> Self {
        let m = vec![0.0; x.len()];
        Self { x, m, t: 0 }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

/// Output of one discrete step: the new state and the transient quantities the
/// certificates need.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub state: OptState,
    /// `m̃ₜ₊₁ = β₁ mₜ − (1 − β₁) gₜ`
    pub m_tilde: Vec<f64>,
    /// `∂φ(m̃ₜ₊₁)`
    pub direction: Vec<f64>,
}

fn check_step_inputs(spec: &PhiSpec, state: &OptState, grad: &[f64]) -> Result<()> {
    if state.x.len() != state.m.len() || grad.len() != state.x.len() {
        return Err(Error::usage(format!(
            "dimension mismatch: x {}, m {}, grad {}",
            state.x.len(),
            state.m.len(),
            grad.len()
        )));
    }
    spec.check_dim(grad.len())?;
    if !all_finite(grad) {
        return Err(Error::numeric(state.t, "non-finite gradient"));
    }
    Ok(())
}

fn momenta(cfg: &DiscreteConfig, m: &[f64], grad: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let m_tilde = m
        .iter()
        .zip(grad)
        .map(|(mi, gi)| cfg.beta1 * mi - (1.0 - cfg.beta1) * gi)
        .collect();
    let m_next = m
        .iter()
        .zip(grad)
        .map(|(mi, gi)| cfg.beta2 * mi - (1.0 - cfg.beta2) * gi)
        .collect();
    (m_tilde, m_next)
}

fn finish(state: &OptState, x: Vec<f64>, m: Vec<f64>, m_tilde: Vec<f64>, direction: Vec<f64>) -> Result<Step> {
    if !all_finite(&x) || !all_finite(&m) {
        return Err(Error::numeric(state.t + 1, "non-finite state after update"));
    }
    Ok(Step {
        state: OptState {
            x,
            m,
            t: state.t + 1,
        },
        m_tilde,
        direction,
    })
}

/// Lion-φ step with decoupled decay applied to `xₜ`.
pub fn step_explicit(cfg: &DiscreteConfig, spec: &PhiSpec, state: &OptState, grad: &[f64]) -> Result<Step> {
    check_step_inputs(spec, state, grad)?;
    let (m_tilde, m_next) = momenta(cfg, &state.m, grad);
    let direction = spec.subgrad(&m_tilde)?;
    let x = state
        .x
        .iter()
        .zip(&direction)
        .map(|(xi, di)| xi + cfg.lr * (di - cfg.lambda * xi))
        .collect();
    finish(state, x, m_next, m_tilde, direction)
}

/// Lion-φ step with the decay applied to `xₜ₊₁`.
pub fn step_implicit(cfg: &DiscreteConfig, spec: &PhiSpec, state: &OptState, grad: &[f64]) -> Result<Step> {
    check_step_inputs(spec, state, grad)?;
    let denom = 1.0 + cfg.lr * cfg.lambda;
    if denom <= 0.0 {
        return Err(Error::usage("implicit step needs 1 + lr * lambda > 0"));
    }
    let (m_tilde, m_next) = momenta(cfg, &state.m, grad);
    let direction = spec.subgrad(&m_tilde)?;
    let x = state
        .x
        .iter()
        .zip(&direction)
        .map(|(xi, di)| (xi + cfg.lr * di) / denom)
        .collect();
    finish(state, x, m_next, m_tilde, direction)
}

/// The explicit configuration reproducing an implicit step: `lr' = lr / (1 + lr λ)`.
pub fn explicit_of_implicit(cfg: &DiscreteConfig) -> DiscreteConfig {
    DiscreteConfig {
        lr: cfg.lr / (1.0 + cfg.lr * cfg.lambda),
        ..*cfg
    }
}

/// Inverse of [`explicit_of_implicit`]; exists only while `lr λ < 1`.
pub fn implicit_of_explicit(cfg: &DiscreteConfig) -> Option<DiscreteConfig> {
    let shrink = 1.0 - cfg.lr * cfg.lambda;
    (shrink > 0.0).then(|| DiscreteConfig {
        lr: cfg.lr / shrink,
        ..*cfg
    })
}

/// Right-hand side of the continuous system, returning `(ẋ, ṁ)`.
pub fn ode_rhs(
    ccfg: &ContinuousConfig,
    spec: &PhiSpec,
    x: &[f64],
    m: &[f64],
    grad: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if x.len() != m.len() || grad.len() != x.len() {
        return Err(Error::usage("dimension mismatch in ode_rhs"));
    }
    let mdot: Vec<f64> = grad
        .iter()
        .zip(m)
        .map(|(g, mi)| -ccfg.alpha * g - ccfg.gamma * mi)
        .collect();
    // m̃ = m + ε ṁ
    let m_tilde: Vec<f64> = m.iter().zip(&mdot).map(|(mi, d)| mi + ccfg.epsilon * d).collect();
    let direction = spec.subgrad(&m_tilde)?;
    let xdot = direction
        .iter()
        .zip(x)
        .map(|(d, xi)| d - ccfg.lambda * xi)
        .collect();
    Ok((xdot, mdot))
}

/// A fixed-step integration result.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// `steps + 1` states including the initial one.
    pub states: Vec<OptState>,
    /// Set when `φ` has a discontinuous subgradient, for which classical RK4
    /// carries no order guarantee.
    pub nonsmooth: bool,
}

/// Classical four-stage Runge–Kutta on the continuous system.
pub fn integrate_rk4<G>(
    ccfg: &ContinuousConfig,
    spec: &PhiSpec,
    state: &OptState,
    gradfn: G,
    h: f64,
    steps: usize,
) -> Result<Trajectory>
where
    G: Fn(&[f64]) -> Vec<f64>,
{
    if !(h > 0.0) {
        return Err(Error::usage(format!("step size must be > 0, got {h}")));
    }
    if state.x.len() != state.m.len() {
        return Err(Error::usage("dimension mismatch between x and m"));
    }
    let field = |x: &[f64], m: &[f64]| -> Result<(Vec<f64>, Vec<f64>)> {
        let g = gradfn(x);
        ode_rhs(ccfg, spec, x, m, &g)
    };
    let shifted = |base: &[f64], k: &[f64], s: f64| -> Vec<f64> {
        base.iter().zip(k).map(|(b, v)| b + s * v).collect()
    };

    let mut states = Vec::with_capacity(steps + 1);
    states.push(state.clone());
    let mut cur = state.clone();
    for _ in 0..steps {
        let (k1x, k1m) = field(&cur.x, &cur.m)?;
        let (k2x, k2m) = field(&shifted(&cur.x, &k1x, h / 2.0), &shifted(&cur.m, &k1m, h / 2.0))?;
        let (k3x, k3m) = field(&shifted(&cur.x, &k2x, h / 2.0), &shifted(&cur.m, &k2m, h / 2.0))?;
        let (k4x, k4m) = field(&shifted(&cur.x, &k3x, h), &shifted(&cur.m, &k3m, h))?;
        let combine = |base: &[f64], a: &[f64], b: &[f64], c: &[f64], d: &[f64]| -> Vec<f64> {
            (0..base.len())
                .map(|i| base[i] + h / 6.0 * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]))
                .collect()
        };
        let x = combine(&cur.x, &k1x, &k2x, &k3x, &k4x);
        let m = combine(&cur.m, &k1m, &k2m, &k3m, &k4m);
        if !all_finite(&x) || !all_finite(&m) {
            return Err(Error::numeric(cur.t + 1, "non-finite state in RK4 integration"));
        }
        cur = OptState { x, m, t: cur.t + 1 };
        states.push(cur.clone());
    }
    Ok(Trajectory {
        states,
        nonsmooth: !spec.is_smooth(),
    })
}

/// `β₁ = β₂ − b (1 − β₂)`: the Lion momentum mix matching Nesterov's look-ahead `b`.
pub fn nesterov_beta1(beta2: f64, b: f64) -> f64 {
    beta2 - b * (1.0 - beta2)
}

/// Look-ahead `b = (β₂ − β₁)/(1 − β₂)` matching a Lion `(β₁, β₂)` pair.
pub fn nesterov_lookahead(beta1: f64, beta2: f64) -> f64 {
    (beta2 - beta1) / (1.0 - beta2)
}

/// One step of Nesterov momentum in look-ahead form:
/// `m' = β₂ m + (1 − β₂) ∇f(y − b lr m)`, `y' = y − lr m'`.
///
/// The iterates `x = y − b lr m` follow the sign-free Lion recursion
/// (`∂φ = id`, `λ = 0`) with `β₁ = β₂ − b (1 − β₂)` and momentum `−m`.
pub fn nesterov_pair_step<G>(beta2: f64, b: f64, lr: f64, y: &[f64], m: &[f64], gradfn: G) -> (Vec<f64>, Vec<f64>)
where
    G: Fn(&[f64]) -> Vec<f64>,
{
    let lookahead: Vec<f64> = y.iter().zip(m).map(|(yi, mi)| yi - b * lr * mi).collect();
    let g = gradfn(&lookahead);
    let m_next: Vec<f64> = m
        .iter()
        .zip(&g)
        .map(|(mi, gi)| beta2 * mi + (1.0 - beta2) * gi)
        .collect();
    let y_next = y.iter().zip(&m_next).map(|(yi, mi)| yi - lr * mi).collect();
    (y_next, m_next)
}

/// Conditional-gradient step toward `y* = ∂φ(−∇f)/λ`:
/// `x' = (1 − eps0) x + eps0 y*`.
pub fn frank_wolfe_step(spec: &PhiSpec, lambda: f64, eps0: f64, x: &[f64], grad: &[f64]) -> Result<Vec<f64>> {
    if !(lambda > 0.0) {
        return Err(Error::usage("Frank-Wolfe step needs lambda > 0"));
    }
    if !(eps0 > 0.0 && eps0 <= 1.0) {
        return Err(Error::usage(format!("eps0 must lie in (0, 1], got {eps0}")));
    }
    if x.len() != grad.len() {
        return Err(Error::usage("dimension mismatch in frank_wolfe_step"));
    }
    let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
    let vertex = spec.subgrad(&neg)?;
    Ok(x.iter()
        .zip(&vertex)
        .map(|(xi, v)| (1.0 - eps0) * xi + eps0 * v / lambda)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(lr: f64, lambda: f64) -> DiscreteConfig {
        DiscreteConfig::new(lr, lambda, 0.9, 0.99)
    }

    #[test]
    fn first_lion_step_from_rest() {
        let s = OptState::at(vec![0.0, 0.0]);
        let step = step_explicit(&cfg(0.1, 0.0), &PhiSpec::L1, &s, &[1.0, -1.0]).unwrap();
        assert!((step.state.x[0] + 0.1).abs() < 1e-15 && (step.state.x[1] - 0.1).abs() < 1e-15);
        assert!((step.state.m[0] + 0.01).abs() < 1e-15 && (step.state.m[1] - 0.01).abs() < 1e-15);
        assert_eq!(step.state.t, 1);
    }

    #[test]
    fn polyak_momentum_when_betas_match() {
        // ∂φ = id, λ = 0, β₁ = β₂: x' = x + lr m' with m' the heavy-ball buffer
        let c = DiscreteConfig::new(0.05, 0.0, 0.8, 0.8);
        let s = OptState::new(vec![1.0, -2.0], vec![0.3, 0.1]).unwrap();
        let g = [0.5, -0.25];
        let step = step_explicit(&c, &PhiSpec::HalfSquaredL2, &s, &g).unwrap();
        for i in 0..2 {
            assert!((step.state.x[i] - (s.x[i] + c.lr * step.state.m[i])).abs() < 1e-15);
        }
    }

    #[test]
    fn pure_decay_without_gradient() {
        let s = OptState::at(vec![2.0, -4.0]);
        let c = cfg(0.1, 0.5);
        let step = step_explicit(&c, &PhiSpec::L1, &s, &[0.0, 0.0]).unwrap();
        assert_eq!(step.state.x, vec![2.0 * 0.95, -4.0 * 0.95]);
        let imp = step_implicit(&DiscreteConfig::new(1.0, 1.0, 0.9, 0.99), &PhiSpec::L1, &OptState::at(vec![1.0, 1.0]), &[0.0, 0.0]).unwrap();
        assert_eq!(imp.state.x, vec![0.5, 0.5]);
        assert_eq!(imp.state.m, vec![0.0, 0.0]);
    }

    #[test]
    fn implicit_matches_explicit_at_zero_decay() {
        let s = OptState::new(vec![0.3, -0.2], vec![0.1, 0.4]).unwrap();
        let g = [0.7, -1.1];
        let a = step_explicit(&cfg(0.01, 0.0), &PhiSpec::L1, &s, &g).unwrap();
        let b = step_implicit(&cfg(0.01, 0.0), &PhiSpec::L1, &s, &g).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn step_size_map_examples() {
        assert_eq!(explicit_of_implicit(&cfg(1.0, 1.0)).lr, 0.5);
        assert_eq!(explicit_of_implicit(&cfg(0.3, 0.0)), cfg(0.3, 0.0));
        assert!((explicit_of_implicit(&cfg(0.1, 10.0)).lr - 0.05).abs() < 1e-17);
        let back = implicit_of_explicit(&explicit_of_implicit(&cfg(0.2, 3.0))).unwrap();
        assert!((back.lr - 0.2).abs() < 1e-15);
        assert!(implicit_of_explicit(&cfg(1.0, 1.0)).is_none());
    }

    #[test]
    fn non_finite_gradient_is_numeric_error() {
        let s = OptState::at(vec![0.0]);
        let err = step_explicit(&cfg(0.1, 0.0), &PhiSpec::L1, &s, &[f64::NAN]).unwrap_err();
        assert!(matches!(err, Error::Numeric { step: 0, .. }));
        assert!(matches!(
            step_explicit(&cfg(0.1, 0.0), &PhiSpec::L1, &s, &[1.0, 2.0]),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn ode_rhs_examples() {
        let c = ContinuousConfig::new(2.0, 0.5, 0.25, 0.4);
        // fixed point: grad = −γ m / α and ∂φ(m̃) = λ x; with m̃ = m and ∂φ = id, x = m / λ
        let m = [0.4, -0.8];
        let x = [m[0] / c.lambda, m[1] / c.lambda];
        let grad = [-c.gamma * m[0] / c.alpha, -c.gamma * m[1] / c.alpha];
        let (xd, md) = ode_rhs(&c, &PhiSpec::HalfSquaredL2, &x, &m, &grad).unwrap();
        assert!(xd.iter().chain(&md).all(|v| v.abs() < 1e-15));

        // εγ = 1 removes the momentum from m̃
        let c = ContinuousConfig::new(3.0, 2.0, 0.1, 0.5);
        let (xd, _) = ode_rhs(&c, &PhiSpec::HalfSquaredL2, &[1.0, 1.0], &[5.0, -7.0], &[0.2, 0.4]).unwrap();
        for (i, g) in [0.2, 0.4].iter().enumerate() {
            assert!((xd[i] - (-c.epsilon * c.alpha * g - c.lambda * 1.0)).abs() < 1e-14);
        }

        let c = ContinuousConfig::new(1.0, 1.0, 0.0, 0.1);
        let (xd, _) = ode_rhs(&c, &PhiSpec::L1, &[3.0], &[0.0], &[2.0]).unwrap();
        assert_eq!(xd, vec![-1.0]);
    }

    #[test]
    fn rk4_trivial_trajectories() {
        let c = ContinuousConfig::new(1.0, 1.0, 0.0, 0.5);
        let s = OptState::at(vec![1.0, -2.0]);
        let traj = integrate_rk4(&c, &PhiSpec::Huber { a: 1.0 }, &s, |x: &[f64]| vec![0.0; x.len()], 0.1, 5).unwrap();
        assert_eq!(traj.states.len(), 6);
        assert!(traj.states.iter().all(|st| st.x == s.x));
        assert!(!traj.nonsmooth);
        assert!(integrate_rk4(&c, &PhiSpec::L1, &s, |x: &[f64]| vec![0.0; x.len()], 0.1, 1).unwrap().nonsmooth);
        assert!(integrate_rk4(&c, &PhiSpec::L1, &s, |x: &[f64]| vec![0.0; x.len()], 0.0, 1).is_err());
    }

    #[test]
    fn rk4_reports_blow_up_step() {
        let c = ContinuousConfig::new(1.0, 1.0, 0.0, 0.0);
        let s = OptState::at(vec![1.0]);
        let err = integrate_rk4(&c, &PhiSpec::HalfSquaredL2, &s, |x: &[f64]| vec![if x[0] > 1.0 { f64::INFINITY } else { -1.0 }], 0.5, 10).unwrap_err();
        assert!(matches!(err, Error::Numeric { .. }));
    }

    #[test]
    fn nesterov_lookahead_for_default_betas() {
        assert!((nesterov_lookahead(0.9, 0.99) - 9.0).abs() < 1e-12);
        assert!((nesterov_beta1(0.99, 9.0) - 0.9).abs() < 1e-12);
        // b = 0 is heavy-ball momentum on y
        let (y, m) = nesterov_pair_step(0.5, 0.0, 0.1, &[1.0], &[2.0], |v: &[f64]| vec![v[0]]);
        assert_eq!(m, vec![1.5]);
        assert!((y[0] - 0.85).abs() < 1e-15);
    }

    #[test]
    fn frank_wolfe_examples() {
        let x = frank_wolfe_step(&PhiSpec::L1, 2.0, 1.0, &[3.0, 3.0], &[1.0, -1.0]).unwrap();
        assert_eq!(x, vec![-0.5, 0.5]);
        let x = frank_wolfe_step(&PhiSpec::L1, 2.0, 1e-12, &[3.0, 3.0], &[1.0, -1.0]).unwrap();
        assert!((x[0] - 3.0).abs() < 1e-11);
        assert!(frank_wolfe_step(&PhiSpec::L1, 0.0, 0.5, &[0.0], &[1.0]).is_err());
        assert!(frank_wolfe_step(&PhiSpec::L1, 1.0, 1.5, &[0.0], &[1.0]).is_err());
    }

    #[test]
    fn continuous_map_reproduces_euler_step() {
        let c = DiscreteConfig::new(0.01, 0.3, 0.9, 0.99);
        let (cc, h) = c.to_continuous_approx();
        let s = OptState::new(vec![0.4, -1.0], vec![0.2, 0.1]).unwrap();
        let g = [0.3, -0.6];
        let step = step_explicit(&c, &PhiSpec::HalfSquaredL2, &s, &g).unwrap();
        let (xd, md) = ode_rhs(&cc, &PhiSpec::HalfSquaredL2, &s.x, &s.m, &g).unwrap();
        for i in 0..2 {
            assert!((s.x[i] + h * xd[i] - step.state.x[i]).abs() < 1e-14);
            assert!((s.m[i] + h * md[i] - step.state.m[i]).abs() < 1e-14);
        }
    }
}
