//! The φ catalog.
//!
//! Every [`PhiSpec`] is a closed convex function with `φ(0) = 0` and `0 ∈ ∂φ(0)`.
//! For each kind this module provides, in closed form:
//!
//! * `φ(x)` and a documented subgradient selection `∂φ(x)`,
//! * the conjugate `φ*(y) = sup_z (y·z − φ(z))` as an [`ExtReal`],
//! * a subgradient selection of the conjugate inside its effective domain,
//! * the ℓ∞ distance from a point to `dom φ*`.
//!
//! | kind              | φ(x)                              | dom φ*                         |
//! |-------------------|-----------------------------------|--------------------------------|
//! | `L1`              | ‖x‖₁                              | ‖y‖∞ ≤ 1                       |
//! | `Lp(p)`           | ‖x‖_p                             | ‖y‖_q ≤ 1                      |
//! | `GroupLp(p, G)`   | Σ_G ‖x_G‖_p                       | ‖y_G‖_q ≤ 1 for every group    |
//! | `TruncatedL1(e)`  | Σ max(\|xᵢ\| − e, 0)              | ‖y‖∞ ≤ 1, φ* = e‖y‖₁           |
//! | `TruncatedLpVec`  | max(‖x‖_p − e, 0)                 | ‖y‖_q ≤ 1, φ* = e‖y‖_q         |
//! | `SortingTopK(k)`  | sum of the k largest \|xᵢ\|       | ‖y‖∞ ≤ 1 and ‖y‖₁ ≤ k          |
//! | `Huber(a)`        | Σ huber_a(xᵢ)                     | ‖y‖∞ ≤ 1, φ* = (a/2)‖y‖²       |
//! | `Entropy(a)`      | Σ (1/a) log cosh(a xᵢ)            | ‖y‖∞ ≤ 1, binary entropy form  |
//! | `Relativistic(e)` | Σ (√(xᵢ² + e²) − e)               | ‖y‖∞ ≤ 1, e Σ (1 − √(1 − yᵢ²)) |
//! | `HalfSquaredL2`   | ½‖x‖²                             | ℝ^d, φ* = ½‖y‖²                |

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vecops::{dot, dual_exponent, norm1, norm2_sq, norm_inf, norm_p, norm_p_grad, sign};

/// Default tolerance on `dist(y, dom φ*)` for operations that require domain membership.
pub const TAU_DOM: f64 = 1e-9;

/// Float slack used when deciding whether `φ*(y)` is finite.
const DOM_SLACK: f64 = 1e-12;

/// An extended real value: finite, or `+∞`. Never NaN.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    PosInf,
}

impl ExtReal {
    /// Wraps a float. `+∞` maps to [`ExtReal::PosInf`].
    ///
    /// Panics on NaN or `−∞`, neither of which is a legal conjugate value.
    pub fn new(v: f64) -> Self {
        assert!(!v.is_nan(), "ExtReal cannot hold NaN");
        assert!(v != f64::NEG_INFINITY, "ExtReal cannot hold -inf");
        if v == f64::INFINITY {
            ExtReal::PosInf
        } else {
            ExtReal::Finite(v)
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            ExtReal::Finite(v) => Some(v),
            ExtReal::PosInf => None,
        }
    }

    /// Lossy conversion, `+∞` becomes `f64::INFINITY`.
    pub fn to_f64(&self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => a.partial_cmp(b),
            (ExtReal::Finite(_), ExtReal::PosInf) => Some(Ordering::Less),
            (ExtReal::PosInf, ExtReal::Finite(_)) => Some(Ordering::Greater),
            (ExtReal::PosInf, ExtReal::PosInf) => Some(Ordering::Equal),
        }
    }
}

impl Add for ExtReal {
    type Output = ExtReal;
    fn add(self, rhs: ExtReal) -> ExtReal {
        match (self, rhs) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => ExtReal::new(a + b),
            _ => ExtReal::PosInf,
        }
    }
}

impl Add<f64> for ExtReal {
    type Output = ExtReal;
    fn add(self, rhs: f64) -> ExtReal {
        self + ExtReal::new(rhs)
    }
}

/// Scaling by a nonnegative constant, with `0 · ∞ = 0`.
impl Mul<f64> for ExtReal {
    type Output = ExtReal;
    fn mul(self, c: f64) -> ExtReal {
        assert!(c >= 0.0, "ExtReal may only be scaled by c >= 0");
        match self {
            ExtReal::Finite(v) => ExtReal::new(v * c),
            ExtReal::PosInf if c == 0.0 => ExtReal::Finite(0.0),
            ExtReal::PosInf => ExtReal::PosInf,
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(v) => write!(f, "{v}"),
            ExtReal::PosInf => write!(f, "inf"),
        }
    }
}

/// Contiguous, non-empty index groups `[start, end)` covering `0..dim` exactly once.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[usize; 2]>", into = "Vec<[usize; 2]>")]
pub struct GroupPartition {
    bounds: Vec<(usize, usize)>,
}

impl GroupPartition {
    pub fn new(bounds: Vec<(usize, usize)>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::usage("group partition must contain at least one group"));
        }
        let mut expected = 0;
        for &(start, end) in &bounds {
            if start != expected {
                return Err(Error::usage(format!(
                    "group partition is not contiguous: expected start {expected}, got {start}"
                )));
            }
            if end <= start {
                return Err(Error::usage(format!("empty group [{start}, {end})")));
            }
            expected = end;
        }
        Ok(Self { bounds })
    }

    /// Equal-size groups; `dim` must be divisible by `size`.
    pub fn uniform(dim: usize, size: usize) -> Result<Self> {
        if size == 0 || !dim.is_multiple_of(size) {
            return Err(Error::usage(format!("cannot split {dim} into groups of {size}")));
        }
        Self::new((0..dim / size).map(|g| (g * size, (g + 1) * size)).collect())
    }

    pub fn dim(&self) -> usize {
        self.bounds.last().map(|b| b.1).unwrap_or(0)
    }

    pub fn groups(&self) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
        self.bounds.iter().map(|&(s, e)| s..e)
    }
}

impl TryFrom<Vec<[usize; 2]>> for GroupPartition {
    type Error = Error;
    fn try_from(v: Vec<[usize; 2]>) -> Result<Self> {
        GroupPartition::new(v.into_iter().map(|[s, e]| (s, e)).collect())
    }
}

impl From<GroupPartition> for Vec<[usize; 2]> {
    fn from(g: GroupPartition) -> Self {
        g.bounds.into_iter().map(|(s, e)| [s, e]).collect()
    }
}

/// A convex function from the catalog, with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PhiSpecJson", into = "PhiSpecJson")]
pub enum PhiSpec {
    L1,
    Lp { p: f64 },
    GroupLp { p: f64, partition: GroupPartition },
    TruncatedL1 { e: f64 },
    TruncatedLpVec { p: f64, e: f64 },
    SortingTopK { i_cut: usize },
    Huber { a: f64 },
    Entropy { a: f64 },
    Relativistic { e: f64 },
    HalfSquaredL2,
}

/// Effective domain of φ*, in the shapes the catalog produces.
#[derive(Debug, Clone, PartialEq)]
pub enum ConjDomain {
    Whole,
    /// `‖y‖∞ ≤ 1`
    UnitBox,
    /// `‖y‖_q ≤ 1`
    QBall(f64),
    /// `‖y_G‖_q ≤ 1` for every group.
    GroupQBall(f64, GroupPartition),
    /// `‖y‖∞ ≤ 1` and `‖y‖₁ ≤ k`
    TopK(usize),
}

impl PhiSpec {
    /// Every kind in the catalog with representative parameters.
    pub fn catalog(dim: usize) -> Vec<PhiSpec> {
        let partition = if dim.is_multiple_of(2) && dim >= 2 {
            GroupPartition::uniform(dim, 2).expect("even split")
        } else {
            GroupPartition::uniform(dim, 1).expect("singleton split")
        };
        vec![
            PhiSpec::L1,
            PhiSpec::Lp { p: 1.5 },
            PhiSpec::Lp { p: 3.0 },
            PhiSpec::GroupLp { p: 2.0, partition },
            PhiSpec::TruncatedL1 { e: 0.5 },
            PhiSpec::TruncatedLpVec { p: 2.0, e: 0.5 },
            PhiSpec::SortingTopK { i_cut: dim.div_ceil(2) },
            PhiSpec::Huber { a: 1.0 },
            PhiSpec::Entropy { a: 1.0 },
            PhiSpec::Relativistic { e: 1.0 },
            PhiSpec::HalfSquaredL2,
        ]
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            PhiSpec::L1 => "L1",
            PhiSpec::Lp { .. } => "Lp",
            PhiSpec::GroupLp { .. } => "GroupLp",
            PhiSpec::TruncatedL1 { .. } => "TruncatedL1",
            PhiSpec::TruncatedLpVec { .. } => "TruncatedLpVec",
            PhiSpec::SortingTopK { .. } => "SortingTopK",
            PhiSpec::Huber { .. } => "Huber",
            PhiSpec::Entropy { .. } => "Entropy",
            PhiSpec::Relativistic { .. } => "Relativistic",
            PhiSpec::HalfSquaredL2 => "HalfSquaredL2",
        }
    }

    /// Checks parameter ranges.
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::usage(format!("{}: {name} must be > 0, got {v}", self.kind_name())))
            }
        };
        let exponent = |p: f64| {
            if p.is_finite() && p >= 1.0 {
                Ok(())
            } else {
                Err(Error::usage(format!("{}: p must be >= 1, got {p}", self.kind_name())))
            }
        };
        match self {
            PhiSpec::L1 | PhiSpec::HalfSquaredL2 => Ok(()),
            PhiSpec::Lp { p } | PhiSpec::GroupLp { p, .. } => exponent(*p),
            PhiSpec::TruncatedL1 { e } | PhiSpec::Relativistic { e } => positive("e", *e),
            PhiSpec::TruncatedLpVec { p, e } => exponent(*p).and_then(|_| positive("e", *e)),
            PhiSpec::SortingTopK { i_cut } => {
                if *i_cut >= 1 {
                    Ok(())
                } else {
                    Err(Error::usage("SortingTopK: i_cut must be >= 1"))
                }
            }
            PhiSpec::Huber { a } | PhiSpec::Entropy { a } => positive("a", *a),
        }
    }

    /// Checks that a vector of length `dim` is admissible for this spec.
    pub fn check_dim(&self, dim: usize) -> Result<()> {
        match self {
            PhiSpec::GroupLp { partition, .. } if partition.dim() != dim => Err(Error::usage(format!(
                "dimension {dim} does not match group partition of dimension {}",
                partition.dim()
            ))),
            PhiSpec::SortingTopK { i_cut } if *i_cut > dim => Err(Error::usage(format!(
                "SortingTopK: i_cut {i_cut} exceeds dimension {dim}"
            ))),
            _ => Ok(()),
        }
    }

    /// True when every subgradient selection lies in `{−1, 0, 1}^d`.
    pub fn is_ternary(&self) -> bool {
        match self {
            PhiSpec::L1 | PhiSpec::TruncatedL1 { .. } | PhiSpec::SortingTopK { .. } => true,
            PhiSpec::Lp { p } => *p == 1.0,
            PhiSpec::GroupLp { p, partition } => *p == 1.0 || partition.groups().all(|g| g.len() == 1),
            _ => false,
        }
    }

    /// True for kinds with a continuous `∂φ` and differentiable `φ*` inside its domain.
    pub fn is_smooth(&self) -> bool {
        matches!(
            self,
            PhiSpec::Huber { .. }
                | PhiSpec::Entropy { .. }
                | PhiSpec::Relativistic { .. }
                | PhiSpec::HalfSquaredL2
        )
    }

    pub fn conj_domain(&self) -> ConjDomain {
        match self {
            PhiSpec::L1
            | PhiSpec::TruncatedL1 { .. }
            | PhiSpec::Huber { .. }
            | PhiSpec::Entropy { .. }
            | PhiSpec::Relativistic { .. } => ConjDomain::UnitBox,
            PhiSpec::Lp { p } | PhiSpec::TruncatedLpVec { p, .. } => {
                let q = dual_exponent(*p);
                if q.is_infinite() {
                    ConjDomain::UnitBox
                } else {
                    ConjDomain::QBall(q)
                }
            }
            PhiSpec::GroupLp { p, partition } => {
                ConjDomain::GroupQBall(dual_exponent(*p), partition.clone())
            }
            PhiSpec::SortingTopK { i_cut } => ConjDomain::TopK(*i_cut),
            PhiSpec::HalfSquaredL2 => ConjDomain::Whole,
        }
    }

    /// `φ(x)`.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        let v = match self {
            PhiSpec::L1 => norm1(x),
            PhiSpec::Lp { p } => norm_p(x, *p),
            PhiSpec::GroupLp { p, partition } => {
                partition.groups().map(|g| norm_p(&x[g], *p)).sum()
            }
            PhiSpec::TruncatedL1 { e } => x.iter().map(|v| (v.abs() - e).max(0.0)).sum(),
            PhiSpec::TruncatedLpVec { p, e } => (norm_p(x, *p) - e).max(0.0),
            PhiSpec::SortingTopK { i_cut } => {
                let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
                mags.sort_by(|a, b| b.total_cmp(a));
                mags.iter().take(*i_cut).sum()
            }
            PhiSpec::Huber { a } => x.iter().map(|&v| huber(v, *a)).sum(),
            PhiSpec::Entropy { a } => x.iter().map(|&v| log_cosh(a * v) / a).sum(),
            PhiSpec::Relativistic { e } => x
                .iter()
                .map(|&v| v * v / ((v * v + e * e).sqrt() + e))
                .sum(),
            PhiSpec::HalfSquaredL2 => 0.5 * norm2_sq(x),
        };
        Ok(v)
    }

    /// The documented subgradient selection `∂φ(x)`.
    ///
    /// Kinks resolve to 0 on zero coordinates (`sign(0) = 0`), to 0 for a vanishing
    /// Lp norm or group norm, and `SortingTopK` ranks by `|xᵢ|` with ties broken by
    /// lower index so exactly `i_cut` coordinates are active.
    pub fn subgrad(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x.len())?;
        let g = match self {
            PhiSpec::L1 => x.iter().map(|&v| sign(v)).collect(),
            PhiSpec::Lp { p } => norm_p_grad(x, *p),
            PhiSpec::GroupLp { p, partition } => {
                let mut out = vec![0.0; x.len()];
                for g in partition.groups() {
                    let gg = norm_p_grad(&x[g.clone()], *p);
                    out[g].copy_from_slice(&gg);
                }
                out
            }
            PhiSpec::TruncatedL1 { e } => x
                .iter()
                .map(|&v| if v.abs() > *e { sign(v) } else { 0.0 })
                .collect(),
            PhiSpec::TruncatedLpVec { p, e } => {
                if norm_p(x, *p) > *e {
                    norm_p_grad(x, *p)
                } else {
                    vec![0.0; x.len()]
                }
            }
            PhiSpec::SortingTopK { i_cut } => {
                let mut idx: Vec<usize> = (0..x.len()).collect();
                // stable: equal magnitudes keep index order
                idx.sort_by(|&i, &j| x[j].abs().total_cmp(&x[i].abs()));
                let mut out = vec![0.0; x.len()];
                for &i in idx.iter().take(*i_cut) {
                    out[i] = sign(x[i]);
                }
                out
            }
            PhiSpec::Huber { a } => x.iter().map(|&v| v.clamp(-a, *a) / a).collect(),
            PhiSpec::Entropy { a } => x.iter().map(|&v| (a * v).tanh()).collect(),
            PhiSpec::Relativistic { e } => {
                x.iter().map(|&v| v / (v * v + e * e).sqrt()).collect()
            }
            PhiSpec::HalfSquaredL2 => x.to_vec(),
        };
        Ok(g)
    }

    /// `φ*(y)`, `+∞` outside the effective domain.
    pub fn conj_value(&self, y: &[f64]) -> Result<ExtReal> {
        self.conj_value_within(y, DOM_SLACK)
    }

    /// `φ*` with points up to `tol` outside the domain evaluated by continuous
    /// extension of the closed form.
    pub fn conj_value_within(&self, y: &[f64], tol: f64) -> Result<ExtReal> {
        self.check_dim(y.len())?;
        if self.dom_distance(y)? > tol {
            return Ok(ExtReal::PosInf);
        }
        let v = match self {
            PhiSpec::L1
            | PhiSpec::Lp { .. }
            | PhiSpec::GroupLp { .. }
            | PhiSpec::SortingTopK { .. } => 0.0,
            PhiSpec::TruncatedL1 { e } => e * norm1(y),
            PhiSpec::TruncatedLpVec { p, e } => e * norm_p(y, dual_exponent(*p)),
            PhiSpec::Huber { a } => 0.5 * a * norm2_sq(y),
            PhiSpec::Entropy { a } => y
                .iter()
                .map(|&v| {
                    let v = v.clamp(-1.0, 1.0);
                    (xlog1p(v) + xlog1p(-v)) / (2.0 * a)
                })
                .sum(),
            PhiSpec::Relativistic { e } => y
                .iter()
                .map(|&v| {
                    let v2 = (v * v).min(1.0);
                    e * v2 / (1.0 + (1.0 - v2).sqrt())
                })
                .sum(),
            PhiSpec::HalfSquaredL2 => 0.5 * norm2_sq(y),
        };
        Ok(ExtReal::new(v))
    }

    /// `lim_{λ→0⁺} φ*(λx)/λ`, the directional derivative of φ* at 0 along `x`.
    pub fn conj_slope_at_zero(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        Ok(match self {
            PhiSpec::TruncatedL1 { e } => e * norm1(x),
            PhiSpec::TruncatedLpVec { p, e } => e * norm_p(x, dual_exponent(*p)),
            _ => 0.0,
        })
    }

    /// A subgradient selection of φ* at `y`, which must lie within `tol` of `dom φ*`.
    ///
    /// Indicator-type kinds return 0; `TruncatedL1` and `TruncatedLpVec` return the
    /// gradient selection of their `e‖·‖` term. `Entropy` and `Relativistic` need the
    /// open box, so `|yᵢ| ≥ 1` is reported as a domain violation.
    pub fn conj_subgrad(&self, y: &[f64], tol: f64) -> Result<Vec<f64>> {
        self.check_dim(y.len())?;
        let distance = self.dom_distance(y)?;
        if distance > tol {
            return Err(Error::DomainViolation { distance, tol });
        }
        let g = match self {
            PhiSpec::L1
            | PhiSpec::Lp { .. }
            | PhiSpec::GroupLp { .. }
            | PhiSpec::SortingTopK { .. } => vec![0.0; y.len()],
            PhiSpec::TruncatedL1 { e } => y.iter().map(|&v| e * sign(v)).collect(),
            PhiSpec::TruncatedLpVec { p, e } => norm_p_grad(y, dual_exponent(*p))
                .into_iter()
                .map(|v| e * v)
                .collect(),
            PhiSpec::Huber { a } => y.iter().map(|&v| a * v.clamp(-1.0, 1.0)).collect(),
            PhiSpec::Entropy { a } => {
                open_box(y, tol)?;
                y.iter().map(|&v| v.atanh() / a).collect()
            }
            PhiSpec::Relativistic { e } => {
                open_box(y, tol)?;
                y.iter().map(|&v| e * v / (1.0 - v * v).sqrt()).collect()
            }
            PhiSpec::HalfSquaredL2 => y.to_vec(),
        };
        Ok(g)
    }

    /// `inf_{z ∈ dom φ*} ‖y − z‖∞`, in closed form for every kind.
    pub fn dom_distance(&self, y: &[f64]) -> Result<f64> {
        self.check_dim(y.len())?;
        Ok(domain_distance(&self.conj_domain(), y))
    }

    /// `dom_distance(y) ≤ tol`.
    pub fn is_in_dom(&self, y: &[f64], tol: f64) -> Result<bool> {
        if tol < 0.0 {
            return Err(Error::usage("tolerance must be nonnegative"));
        }
        Ok(self.dom_distance(y)? <= tol)
    }

    /// Fenchel–Young gap `φ(x) + φ*(y) − x·y`, `+∞` when `y ∉ dom φ*`.
    pub fn fenchel_gap(&self, x: &[f64], y: &[f64]) -> Result<ExtReal> {
        let conj = self.conj_value(y)?;
        Ok(conj + (self.value(x)? - dot(x, y)))
    }
}

fn open_box(y: &[f64], tol: f64) -> Result<()> {
    let worst = norm_inf(y);
    if worst >= 1.0 {
        return Err(Error::DomainViolation {
            distance: worst - 1.0,
            tol,
        });
    }
    Ok(())
}

fn huber(v: f64, a: f64) -> f64 {
    let m = v.abs();
    if m <= a {
        0.5 * v * v / a
    } else {
        m - 0.5 * a
    }
}

/// `log cosh(u)`, stable for large `|u|`.
fn log_cosh(u: f64) -> f64 {
    let m = u.abs();
    m + (-2.0 * m).exp().ln_1p() - std::f64::consts::LN_2
}

/// `(1 + v) log(1 + v)` with `0 log 0 = 0`.
fn xlog1p(v: f64) -> f64 {
    if v <= -1.0 {
        0.0
    } else {
        (1.0 + v) * v.ln_1p()
    }
}

fn domain_distance(domain: &ConjDomain, y: &[f64]) -> f64 {
    match domain {
        ConjDomain::Whole => 0.0,
        ConjDomain::UnitBox => (norm_inf(y) - 1.0).max(0.0),
        ConjDomain::QBall(q) => qball_distance(y, *q),
        ConjDomain::GroupQBall(q, partition) => partition
            .groups()
            .map(|g| qball_distance(&y[g], *q))
            .fold(0.0, f64::max),
        ConjDomain::TopK(k) => {
            let box_part = (norm_inf(y) - 1.0).max(0.0);
            box_part.max(l1_shrink_distance(y, *k as f64))
        }
    }
}

/// ℓ∞ distance to the unit q-ball: the smallest `t ≥ 0` with
/// `‖(|y| − t)₊‖_q ≤ 1`, since shrinking every magnitude by `t` is optimal.
fn qball_distance(y: &[f64], q: f64) -> f64 {
    if q.is_infinite() {
        return (norm_inf(y) - 1.0).max(0.0);
    }
    if norm_p(y, q) <= 1.0 {
        return 0.0;
    }
    let shrunk = |t: f64| -> f64 {
        let v: Vec<f64> = y.iter().map(|v| (v.abs() - t).max(0.0)).collect();
        norm_p(&v, q)
    };
    let (mut lo, mut hi) = (0.0, norm_inf(y));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if shrunk(mid) <= 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Smallest `t ≥ 0` with `Σ (|yᵢ| − t)₊ ≤ k`.
fn l1_shrink_distance(y: &[f64], k: f64) -> f64 {
    if norm1(y) <= k {
        return 0.0;
    }
    let mut mags: Vec<f64> = y.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    // with the top j magnitudes active, t = (Σ_{i<j} mᵢ − k) / j; pick the j where t
    // falls in [m_j, m_{j−1}]
    let mut prefix = 0.0;
    for (j, &m) in mags.iter().enumerate() {
        prefix += m;
        let t = (prefix - k) / (j + 1) as f64;
        let next = mags.get(j + 1).copied().unwrap_or(0.0);
        if t >= next {
            return t.max(0.0);
        }
    }
    0.0
}

#[derive(Serialize, Deserialize)]
struct PhiSpecJson {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    e: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    i_cut: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    groups: Option<GroupPartition>,
}

impl TryFrom<PhiSpecJson> for PhiSpec {
    type Error = Error;
    fn try_from(j: PhiSpecJson) -> Result<Self> {
        fn need<T>(v: Option<T>, kind: &str, field: &str) -> Result<T> {
            v.ok_or_else(|| Error::usage(format!("{kind}: missing field \"{field}\"")))
        }
        let k = j.kind.as_str();
        let spec = match k {
            "L1" => PhiSpec::L1,
            "Lp" => PhiSpec::Lp { p: need(j.p, k, "p")? },
            "GroupLp" => PhiSpec::GroupLp {
                p: need(j.p, k, "p")?,
                partition: need(j.groups, k, "groups")?,
            },
            "TruncatedL1" => PhiSpec::TruncatedL1 { e: need(j.e, k, "e")? },
            "TruncatedLpVec" => PhiSpec::TruncatedLpVec {
                p: need(j.p, k, "p")?,
                e: need(j.e, k, "e")?,
            },
            "SortingTopK" => PhiSpec::SortingTopK {
                i_cut: need(j.i_cut, k, "i_cut")?,
            },
            "Huber" => PhiSpec::Huber { a: need(j.a, k, "a")? },
            "Entropy" => PhiSpec::Entropy { a: need(j.a, k, "a")? },
            "Relativistic" => PhiSpec::Relativistic { e: need(j.e, k, "e")? },
            "HalfSquaredL2" => PhiSpec::HalfSquaredL2,
            other => return Err(Error::usage(format!("unknown phi kind \"{other}\""))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl From<PhiSpec> for PhiSpecJson {
    fn from(spec: PhiSpec) -> Self {
        let mut j = PhiSpecJson {
            kind: spec.kind_name().to_string(),
            p: None,
            e: None,
            i_cut: None,
            a: None,
            groups: None,
        };
        match spec {
            PhiSpec::L1 | PhiSpec::HalfSquaredL2 => {}
            PhiSpec::Lp { p } => j.p = Some(p),
            PhiSpec::GroupLp { p, partition } => {
                j.p = Some(p);
                j.groups = Some(partition);
            }
            PhiSpec::TruncatedL1 { e } | PhiSpec::Relativistic { e } => j.e = Some(e),
            PhiSpec::TruncatedLpVec { p, e } => {
                j.p = Some(p);
                j.e = Some(e);
            }
            PhiSpec::SortingTopK { i_cut } => j.i_cut = Some(i_cut),
            PhiSpec::Huber { a } | PhiSpec::Entropy { a } => j.a = Some(a),
        }
        j
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn l1_value_and_zero() {
        assert_eq!(PhiSpec::L1.value(&[1.0, -2.0, 0.0]).unwrap(), 3.0);
        for spec in PhiSpec::catalog(4) {
            assert_eq!(spec.value(&[0.0; 4]).unwrap(), 0.0, "{spec:?}");
            assert!(spec.subgrad(&[0.0; 4]).unwrap().iter().all(|&g| g == 0.0), "{spec:?}");
        }
    }

    #[test]
    fn sorting_topk_value_matches_brute_force() {
        // top two of |(0.5, -3, 1)| are 3 and 1
        let x = [0.5, -3.0, 1.0];
        let mut mags: Vec<f64> = x.iter().map(|v: &f64| v.abs()).collect();
        mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let brute: f64 = mags[..2].iter().sum();
        assert_eq!(brute, 4.0);
        assert_eq!(PhiSpec::SortingTopK { i_cut: 2 }.value(&x).unwrap(), brute);
    }

    #[test]
    fn sorting_topk_ties_activate_exactly_i_cut() {
        let g = PhiSpec::SortingTopK { i_cut: 2 }
            .subgrad(&[1.0, -1.0, 1.0, 0.5])
            .unwrap();
        assert_eq!(g, vec![1.0, -1.0, 0.0, 0.0]);
    }

    #[test]
    fn subgradient_examples() {
        assert_eq!(PhiSpec::L1.subgrad(&[2.0, -0.1, 0.0]).unwrap(), vec![1.0, -1.0, 0.0]);
        assert_eq!(
            PhiSpec::TruncatedL1 { e: 1.0 }.subgrad(&[0.5, 2.0, -3.0]).unwrap(),
            vec![0.0, 1.0, -1.0]
        );
        let x = [0.3, -7.0];
        assert_eq!(PhiSpec::HalfSquaredL2.subgrad(&x).unwrap(), x.to_vec());
    }

    #[test]
    fn conjugate_examples() {
        assert_eq!(PhiSpec::L1.conj_value(&[0.5, -0.3]).unwrap(), ExtReal::Finite(0.0));
        assert_eq!(PhiSpec::L1.conj_value(&[2.0, 0.0]).unwrap(), ExtReal::PosInf);
        let h = PhiSpec::Huber { a: 2.0 }.conj_value(&[0.5, 0.5]).unwrap();
        assert!(approx(h.finite().unwrap(), 0.5, 1e-15));
        // entropy boundary uses the continuous extension log(2)/a
        let ent = PhiSpec::Entropy { a: 2.0 }.conj_value(&[1.0]).unwrap();
        assert!(approx(ent.finite().unwrap(), std::f64::consts::LN_2 / 2.0, 1e-15));
        let topk = PhiSpec::SortingTopK { i_cut: 1 };
        assert_eq!(topk.conj_value(&[0.5, 0.5]).unwrap(), ExtReal::Finite(0.0));
        assert_eq!(topk.conj_value(&[0.6, 0.5]).unwrap(), ExtReal::PosInf);
    }

    #[test]
    fn conj_subgrad_examples() {
        assert_eq!(PhiSpec::L1.conj_subgrad(&[0.5, 0.2], TAU_DOM).unwrap(), vec![0.0, 0.0]);
        let y = [0.4, -3.0];
        assert_eq!(PhiSpec::HalfSquaredL2.conj_subgrad(&y, TAU_DOM).unwrap(), y.to_vec());
        assert_eq!(
            PhiSpec::Entropy { a: 1.0 }.conj_subgrad(&[0.0, 0.0], TAU_DOM).unwrap(),
            vec![0.0, 0.0]
        );
        assert!(matches!(
            PhiSpec::L1.conj_subgrad(&[1.5, 0.0], TAU_DOM),
            Err(Error::DomainViolation { .. })
        ));
        assert!(matches!(
            PhiSpec::Entropy { a: 1.0 }.conj_subgrad(&[1.0, 0.0], TAU_DOM),
            Err(Error::DomainViolation { .. })
        ));
    }

    #[test]
    fn dom_distance_examples() {
        assert_eq!(PhiSpec::L1.dom_distance(&[2.0, 0.0]).unwrap(), 1.0);
        assert_eq!(PhiSpec::L1.dom_distance(&[0.5, 0.5]).unwrap(), 0.0);
        // {‖z‖₁ ≤ 1, ‖z‖∞ ≤ 1}: from (1.5, 1.5) shrink both by t with 2(1.5 − t) = 1
        let topk = PhiSpec::SortingTopK { i_cut: 1 };
        assert!(approx(topk.dom_distance(&[1.5, 1.5]).unwrap(), 1.0, 1e-15));
        assert!(approx(topk.dom_distance(&[0.8, 0.8]).unwrap(), 0.3, 1e-15));
        // the box part dominates when one coordinate is far out
        assert!(approx(topk.dom_distance(&[3.0, 0.0]).unwrap(), 2.0, 1e-15));
        let l2 = PhiSpec::Lp { p: 2.0 };
        // shrink (1, 1) by t: √2 (1 − t) = 1
        assert!(approx(l2.dom_distance(&[1.0, 1.0]).unwrap(), 1.0 - 1.0 / 2f64.sqrt(), 1e-12));
        assert_eq!(PhiSpec::HalfSquaredL2.dom_distance(&[1e9]).unwrap(), 0.0);
    }

    #[test]
    fn is_in_dom_examples() {
        assert!(PhiSpec::L1.is_in_dom(&[1.0, -1.0], 0.0).unwrap());
        assert!(!PhiSpec::L1.is_in_dom(&[1.0 + 1e-6, 0.0], 1e-9).unwrap());
        assert!(PhiSpec::Huber { a: 1.0 }.is_in_dom(&[0.999, 0.0], 1e-3).unwrap());
        assert!(PhiSpec::L1.is_in_dom(&[0.0], -1.0).is_err());
    }

    #[test]
    fn partition_mismatch_is_usage_error() {
        let spec = PhiSpec::GroupLp {
            p: 2.0,
            partition: GroupPartition::uniform(4, 2).unwrap(),
        };
        assert!(matches!(spec.value(&[1.0; 3]), Err(Error::Usage(_))));
        assert!(GroupPartition::new(vec![(0, 2), (3, 4)]).is_err());
        assert!(GroupPartition::new(vec![(0, 2), (2, 2)]).is_err());
    }

    #[test]
    fn json_round_trip_and_validation() {
        let spec: PhiSpec =
            serde_json::from_str(r#"{"kind":"GroupLp","p":2,"groups":[[0,2],[2,5]]}"#).unwrap();
        assert_eq!(spec.check_dim(5).unwrap(), ());
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(text, r#"{"kind":"GroupLp","p":2.0,"groups":[[0,2],[2,5]]}"#);
        assert!(serde_json::from_str::<PhiSpec>(r#"{"kind":"Huber","a":-1}"#).is_err());
        assert!(serde_json::from_str::<PhiSpec>(r#"{"kind":"Lp"}"#).is_err());
        assert!(serde_json::from_str::<PhiSpec>(r#"{"kind":"Nope"}"#).is_err());
    }

    #[test]
    fn extreal_ordering_and_arithmetic() {
        let a = ExtReal::Finite(1e300);
        assert!(ExtReal::PosInf > a);
        assert_eq!(a + ExtReal::PosInf, ExtReal::PosInf);
        assert_eq!(ExtReal::PosInf * 0.0, ExtReal::Finite(0.0));
        assert_eq!(ExtReal::new(f64::INFINITY), ExtReal::PosInf);
        assert_eq!(ExtReal::PosInf.to_string(), "inf");
    }

    #[test]
    #[should_panic]
    fn extreal_rejects_nan() {
        let _ = ExtReal::new(f64::NAN);
    }

    #[test]
    fn inverse_map_on_smooth_kinds() {
        let y = [0.3, -0.7, 0.95];
        for spec in [
            PhiSpec::Huber { a: 0.7 },
            PhiSpec::Entropy { a: 2.0 },
            PhiSpec::Relativistic { e: 0.5 },
            PhiSpec::HalfSquaredL2,
        ] {
            let x = spec.conj_subgrad(&y, TAU_DOM).unwrap();
            let back = spec.subgrad(&x).unwrap();
            for (b, v) in back.iter().zip(y) {
                assert!(approx(*b, v, 1e-9), "{spec:?}: {b} vs {v}");
            }
            // Fenchel equality on the matched pair
            let gap = spec.fenchel_gap(&x, &y).unwrap().finite().unwrap();
            assert!(gap.abs() < 1e-9, "{spec:?}: gap {gap}");
        }
    }
}
