//! Small dense-vector helpers shared across modules.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm2_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn norm1(a: &[f64]) -> f64 {
    a.iter().map(|v| v.abs()).sum()
}

/// `‖a‖_p` for `p ∈ [1, ∞]`, computed on the rescaled vector `a / ‖a‖∞`
/// so large exponents neither overflow nor underflow.
pub fn norm_p(a: &[f64], p: f64) -> f64 {
    let scale = norm_inf(a);
    if scale == 0.0 {
        return 0.0;
    }
    if p.is_infinite() {
        return scale;
    }
    if p == 1.0 {
        return norm1(a);
    }
    if p == 2.0 {
        let s: f64 = a.iter().map(|v| (v / scale).powi(2)).sum();
        return scale * s.sqrt();
    }
    let s: f64 = a.iter().map(|v| (v.abs() / scale).powf(p)).sum();
    scale * s.powf(1.0 / p)
}

/// Gradient selection of `‖a‖_p`: `sign(a)|a|^{p-1} / ‖a‖_p^{p-1}`, and 0 at the origin.
/// For `p = ∞` the mass goes to the first coordinate of largest magnitude.
pub fn norm_p_grad(a: &[f64], p: f64) -> Vec<f64> {
    let scale = norm_inf(a);
    if scale == 0.0 {
        return vec![0.0; a.len()];
    }
    if p == 1.0 {
        return a.iter().map(|&v| sign(v)).collect();
    }
    if p.is_infinite() {
        let mut out = vec![0.0; a.len()];
        let idx = a
            .iter()
            .position(|v| v.abs() == scale)
            .expect("max attained");
        out[idx] = sign(a[idx]);
        return out;
    }
    let u: Vec<f64> = a.iter().map(|v| v / scale).collect();
    let n = norm_p(&u, p);
    let denom = n.powf(p - 1.0);
    u.iter()
        .map(|&v| sign(v) * v.abs().powf(p - 1.0) / denom)
        .collect()
}

/// Sign with `sign(0) = 0`.
#[inline]
pub fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|v| v * s).collect()
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// Conjugate exponent `q` with `1/p + 1/q = 1`.
pub fn dual_exponent(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norms_agree_on_simple_vectors() {
        let v = [3.0, -4.0];
        assert_eq!(norm1(&v), 7.0);
        assert_eq!(norm2(&v), 5.0);
        assert_eq!(norm_inf(&v), 4.0);
        assert!((norm_p(&v, 2.0) - 5.0).abs() < 1e-15);
        assert!((norm_p(&v, 3.0) - (27.0f64 + 64.0).powf(1.0 / 3.0)).abs() < 1e-14);
        assert_eq!(norm_p(&v, f64::INFINITY), 4.0);
    }

    #[test]
    fn large_exponent_does_not_overflow() {
        let v = [1e200, 2e200];
        let n = norm_p(&v, 50.0);
        assert!(n.is_finite());
        assert!((2e200..=2.1e200).contains(&n));
    }

    #[test]
    fn lp_gradient_has_unit_dual_norm() {
        let v = [0.3, -1.2, 2.0];
        for p in [1.5, 2.0, 3.0, 7.0] {
            let g = norm_p_grad(&v, p);
            let q = dual_exponent(p);
            assert!((norm_p(&g, q) - 1.0).abs() < 1e-12, "p={p}");
            assert!((dot(&g, &v) - norm_p(&v, p)).abs() < 1e-12);
        }
    }

    #[test]
    fn sign_of_zero_is_zero() {
        assert_eq!(sign(0.0), 0.0);
        assert_eq!(sign(-0.0), 0.0);
        assert_eq!(sign(-2.0), -1.0);
    }
}
