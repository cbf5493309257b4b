//! Test objectives with exact gradients, and stochastic gradient oracles.

use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vecops::{dot, norm2_sq};

/// Seed for stream `stream` derived from a base seed. Distinct streams of the same
/// base seed never coincide.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

pub trait Objective {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    /// Lipschitz constant of the gradient, when known.
    fn smoothness(&self) -> Option<f64>;
    fn unconstrained_min(&self) -> Option<Vec<f64>>;
}

/// Positive semidefinite matrix `A` in `(x − c)ᵀ A (x − c)`.
#[derive(Debug, Clone, PartialEq)]
pub enum PsdScale {
    Identity,
    Diagonal(Vec<f64>),
    /// Row-major `d × d`.
    Dense(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    center: Vec<f64>,
    scale: PsdScale,
    lambda_max: f64,
}

impl Quadratic {
    pub fn new(center: Vec<f64>, scale: PsdScale) -> Result<Self> {
        let d = center.len();
        if d == 0 {
            return Err(Error::usage("quadratic needs dimension >= 1"));
        }
        let lambda_max = match &scale {
            PsdScale::Identity => 1.0,
            PsdScale::Diagonal(diag) => {
                if diag.len() != d {
                    return Err(Error::usage("diagonal length must equal dim(center)"));
                }
                if diag.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(Error::usage("diagonal entries must be finite and >= 0"));
                }
                diag.iter().cloned().fold(0.0, f64::max)
            }
            PsdScale::Dense(a) => {
                if a.len() != d * d {
                    return Err(Error::usage("dense scale must be d x d"));
                }
                let m = DMatrix::from_row_slice(d, d, a);
                let asym = (&m - m.transpose()).abs().max();
                if !(asym <= 1e-12 * (1.0 + m.abs().max())) {
                    return Err(Error::usage("dense scale must be symmetric"));
                }
                let eig = m.symmetric_eigen().eigenvalues;
                let lo = eig.min();
                let hi = eig.max();
                if lo < -1e-10 * (1.0 + hi.abs()) {
                    return Err(Error::usage(format!("dense scale is not PSD (eigenvalue {lo})")));
                }
                hi.max(0.0)
            }
        };
        Ok(Self {
            center,
            scale,
            lambda_max,
        })
    }

    /// `f(x) = (x₁ − 1.5)² + x₂²`.
    pub fn toy() -> Self {
        Self::new(vec![1.5, 0.0], PsdScale::Identity).expect("valid toy quadratic")
    }

    /// Random PSD quadratic `A = BᵀB / d` with a Gaussian center.
    pub fn random(dim: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b: Vec<f64> = (0..dim * dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let b = DMatrix::from_row_slice(dim, dim, &b);
        let a = b.transpose() * &b / dim as f64;
        let a = (&a + a.transpose()) * 0.5;
        let center = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let rows: Vec<f64> = (0..dim).flat_map(|i| (0..dim).map(move |j| (i, j))).map(|(i, j)| a[(i, j)]).collect();
        Self::new(center, PsdScale::Dense(rows))
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn scale(&self) -> &PsdScale {
        &self.scale
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        match &self.scale {
            PsdScale::Identity => v.to_vec(),
            PsdScale::Diagonal(diag) => v.iter().zip(diag).map(|(a, b)| a * b).collect(),
            PsdScale::Dense(a) => {
                let d = v.len();
                (0..d).map(|i| dot(&a[i * d..(i + 1) * d], v)).collect()
            }
        }
    }
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let r: Vec<f64> = x.iter().zip(&self.center).map(|(a, c)| a - c).collect();
        dot(&r, &self.apply(&r))
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let r: Vec<f64> = x.iter().zip(&self.center).map(|(a, c)| a - c).collect();
        self.apply(&r).into_iter().map(|v| 2.0 * v).collect()
    }

    fn smoothness(&self) -> Option<f64> {
        Some(2.0 * self.lambda_max)
    }

    fn unconstrained_min(&self) -> Option<Vec<f64>> {
        Some(self.center.clone())
    }
}

/// Labelled dataset with `±1` labels; features stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<f64>,
    dim: usize,
}

impl Dataset {
    pub fn new(features: Vec<f64>, labels: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || labels.is_empty() {
            return Err(Error::usage("dataset needs at least one row and one feature"));
        }
        if features.len() != labels.len() * dim {
            return Err(Error::usage(format!(
                "shape mismatch: {} feature values for {} rows of dimension {dim}",
                features.len(),
                labels.len()
            )));
        }
        if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::usage("labels must be -1 or +1"));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::usage("features must be finite"));
        }
        Ok(Self {
            features,
            labels,
            dim,
        })
    }

    /// CSV without header: label first, then the features.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)?;
        let mut features = Vec::new();
        let mut labels = Vec::new();
        let mut dim = None;
        for (row, record) in reader.records().enumerate() {
            let record = record?;
            let values = record
                .iter()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::usage(format!("row {row}: {e}")))?;
            if values.len() < 2 {
                return Err(Error::usage(format!("row {row}: need a label and at least one feature")));
            }
            match dim {
                None => dim = Some(values.len() - 1),
                Some(d) if d != values.len() - 1 => {
                    return Err(Error::usage(format!("row {row}: expected {d} features")));
                }
                _ => {}
            }
            labels.push(values[0]);
            features.extend_from_slice(&values[1..]);
        }
        Self::new(features, labels, dim.unwrap_or(0))
    }

    /// Gaussian features labelled by a random hyperplane, with a fraction `flip`
    /// of labels inverted.
    pub fn synthetic(n: usize, dim: usize, flip: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut features = Vec::with_capacity(n * dim);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let row: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let mut y = if dot(&row, &w) >= 0.0 { 1.0 } else { -1.0 };
            if rng.random::<f64>() < flip {
                y = -y;
            }
            features.extend(row);
            labels.push(y);
        }
        Self::new(features, labels, dim)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> (&[f64], f64) {
        (&self.features[i * self.dim..(i + 1) * self.dim], self.labels[i])
    }
}

/// `log(1 + eᵗ)` without overflow.
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Mean logistic loss plus `(reg/2)‖x‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct Logistic {
    data: Dataset,
    reg: f64,
    smoothness: f64,
}

impl Logistic {
    pub fn new(data: Dataset, reg: f64) -> Result<Self> {
        if !(reg.is_finite() && reg >= 0.0) {
            return Err(Error::usage("reg must be >= 0"));
        }
        let d = data.dim();
        let n = data.len();
        let x = DMatrix::from_row_slice(n, d, &data.features);
        let gram = x.transpose() * &x;
        let top = gram.symmetric_eigen().eigenvalues.max().max(0.0);
        Ok(Self {
            data,
            reg,
            smoothness: top / (4.0 * n as f64) + reg,
        })
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn reg(&self) -> f64 {
        self.reg
    }

    /// Gradient of the loss on row `i` alone, regularizer included.
    pub fn row_gradient(&self, x: &[f64], i: usize) -> Vec<f64> {
        let (a, y) = self.data.row(i);
        let s = -y * sigmoid(-y * dot(a, x));
        a.iter().zip(x).map(|(ai, xi)| s * ai + self.reg * xi).collect()
    }
}

impl Objective for Logistic {
    fn dim(&self) -> usize {
        self.data.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let n = self.data.len();
        let loss: f64 = (0..n)
            .map(|i| {
                let (a, y) = self.data.row(i);
                softplus(-y * dot(a, x))
            })
            .sum::<f64>()
            / n as f64;
        loss + 0.5 * self.reg * norm2_sq(x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let n = self.data.len();
        let mut g = vec![0.0; self.dim()];
        for i in 0..n {
            let (a, y) = self.data.row(i);
            let s = -y * sigmoid(-y * dot(a, x)) / n as f64;
            for (gj, aj) in g.iter_mut().zip(a) {
                *gj += s * aj;
            }
        }
        for (gj, xj) in g.iter_mut().zip(x) {
            *gj += self.reg * xj;
        }
        g
    }

    fn smoothness(&self) -> Option<f64> {
        Some(self.smoothness)
    }

    fn unconstrained_min(&self) -> Option<Vec<f64>> {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Problem {
    Quadratic(Quadratic),
    Logistic(Logistic),
}

impl Objective for Problem {
    fn dim(&self) -> usize {
        match self {
            Problem::Quadratic(q) => q.dim(),
            Problem::Logistic(l) => l.dim(),
        }
    }

    fn value(&self, x: &[f64]) -> f64 {
        match self {
            Problem::Quadratic(q) => q.value(x),
            Problem::Logistic(l) => l.value(x),
        }
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Problem::Quadratic(q) => q.gradient(x),
            Problem::Logistic(l) => l.gradient(x),
        }
    }

    fn smoothness(&self) -> Option<f64> {
        match self {
            Problem::Quadratic(q) => q.smoothness(),
            Problem::Logistic(l) => l.smoothness(),
        }
    }

    fn unconstrained_min(&self) -> Option<Vec<f64>> {
        match self {
            Problem::Quadratic(q) => q.unconstrained_min(),
            Problem::Logistic(l) => l.unconstrained_min(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n: usize,
    pub dim: usize,
    #[serde(default)]
    pub flip: f64,
    pub seed: u64,
}

/// JSON description of an objective.
///
/// ```json
/// {"kind": "quadratic", "center": [1.5, 0.0]}
/// {"kind": "quadratic", "center": [0, 0], "diag": [1, 4]}
/// {"kind": "logistic", "csv": "data.csv", "reg": 0.01}
/// {"kind": "logistic", "synthetic": {"n": 200, "dim": 10, "seed": 7}, "reg": 0.01}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    Quadratic {
        center: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        diag: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        matrix: Option<Vec<Vec<f64>>>,
    },
    Logistic {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        csv: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        synthetic: Option<SyntheticSpec>,
        #[serde(default)]
        reg: f64,
    },
}

impl ProblemSpec {
    pub fn build(&self) -> Result<Problem> {
        match self {
            ProblemSpec::Quadratic { center, diag, matrix } => {
                let scale = match (diag, matrix) {
                    (None, None) => PsdScale::Identity,
                    (Some(d), None) => PsdScale::Diagonal(d.clone()),
                    (None, Some(rows)) => {
                        if rows.iter().any(|r| r.len() != center.len()) {
                            return Err(Error::usage("matrix rows must have dim(center) entries"));
                        }
                        PsdScale::Dense(rows.concat())
                    }
                    (Some(_), Some(_)) => return Err(Error::usage("give either diag or matrix, not both")),
                };
                Ok(Problem::Quadratic(Quadratic::new(center.clone(), scale)?))
            }
            ProblemSpec::Logistic { csv, synthetic, reg } => {
                let data = match (csv, synthetic) {
                    (Some(path), None) => Dataset::from_csv(path)?,
                    (None, Some(s)) => Dataset::synthetic(s.n, s.dim, s.flip, s.seed)?,
                    _ => return Err(Error::usage("logistic needs exactly one of csv or synthetic")),
                };
                Ok(Problem::Logistic(Logistic::new(data, *reg)?))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseModel {
    /// Exact gradient plus `N(0, σ²/n_batch · I)`.
    GaussianIid { sigma: f64 },
    /// Mean of `n_batch` row gradients drawn without replacement.
    MinibatchSubset,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StochasticOracle {
    base: Problem,
    noise: NoiseModel,
    n_batch: usize,
}

impl StochasticOracle {
    pub fn new(base: Problem, noise: NoiseModel, n_batch: usize) -> Result<Self> {
        if n_batch == 0 {
            return Err(Error::usage("n_batch must be >= 1"));
        }
        match noise {
            NoiseModel::GaussianIid { sigma } if !(sigma.is_finite() && sigma >= 0.0) => {
                return Err(Error::usage("sigma must be >= 0"));
            }
            NoiseModel::MinibatchSubset => match &base {
                Problem::Logistic(l) if n_batch > l.data().len() => {
                    return Err(Error::usage(format!(
                        "n_batch {n_batch} exceeds dataset size {}",
                        l.data().len()
                    )));
                }
                Problem::Logistic(_) => {}
                _ => return Err(Error::usage("minibatch sampling needs a dataset objective")),
            },
            _ => {}
        }
        Ok(Self { base, noise, n_batch })
    }

    /// Oracle returning the exact gradient.
    pub fn exact(base: Problem) -> Self {
        Self {
            base,
            noise: NoiseModel::GaussianIid { sigma: 0.0 },
            n_batch: 1,
        }
    }

    pub fn base(&self) -> &Problem {
        &self.base
    }

    pub fn noise(&self) -> NoiseModel {
        self.noise
    }

    pub fn n_batch(&self) -> usize {
        self.n_batch
    }

    /// Per-sample coordinate variance `v_max`, known for the Gaussian model.
    pub fn v_max(&self) -> Option<f64> {
        match self.noise {
            NoiseModel::GaussianIid { sigma } => Some(sigma * sigma),
            NoiseModel::MinibatchSubset => None,
        }
    }
}

/// One unbiased gradient draw at `x`, fully determined by `rng_seed`.
pub fn sample_gradient(oracle: &StochasticOracle, x: &[f64], rng_seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    match (oracle.noise, &oracle.base) {
        (NoiseModel::GaussianIid { sigma }, base) => {
            let mut g = base.gradient(x);
            if sigma > 0.0 {
                let s = sigma / (oracle.n_batch as f64).sqrt();
                for gi in g.iter_mut() {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *gi += s * z;
                }
            }
            g
        }
        (NoiseModel::MinibatchSubset, Problem::Logistic(l)) => {
            let mut g = vec![0.0; l.dim()];
            for i in sample_indices(&mut rng, l.data().len(), oracle.n_batch).iter() {
                for (gj, v) in g.iter_mut().zip(l.row_gradient(x, i)) {
                    *gj += v;
                }
            }
            g.iter_mut().for_each(|v| *v /= oracle.n_batch as f64);
            g
        }
        (NoiseModel::MinibatchSubset, base) => base.gradient(x),
    }
}
