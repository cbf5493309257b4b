//! Brute-force ground truth for low dimensions.
//!
//! These routines do not share code paths with the closed forms in [`crate::convex`]
//! beyond evaluating `φ` itself: conjugates are a direct maximum over a lattice and
//! domain membership is decided by watching that maximum grow as the lattice radius
//! doubles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::convex::PhiSpec;
use crate::error::{Error, Result};
use crate::vecops::{dot, norm_inf, sub};

/// Upper bound on the number of lattice points a single grid may hold.
pub const MAX_GRID_POINTS: f64 = 1e7;

/// Symmetric lattice `{k·step : |k·step| ≤ radius}^dim`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub radius: f64,
    pub step: f64,
    pub dim: usize,
}

impl GridSpec {
    pub fn new(radius: f64, step: f64, dim: usize) -> Result<Self> {
        let g = GridSpec { radius, step, dim };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.step > 0.0 && self.step < self.radius) {
            return Err(Error::usage(format!(
                "grid needs 0 < step < radius, got step {} radius {}",
                self.step, self.radius
            )));
        }
        if self.dim == 0 || self.dim > 3 {
            return Err(Error::usage(format!("grid oracles support dim 1..=3, got {}", self.dim)));
        }
        if (2.0 * self.radius / self.step).powi(self.dim as i32) > MAX_GRID_POINTS {
            return Err(Error::usage(format!(
                "grid of radius {} step {} in dim {} exceeds the cost guard",
                self.radius, self.step, self.dim
            )));
        }
        Ok(())
    }

    fn half_count(&self) -> i64 {
        (self.radius / self.step + 1e-9).floor() as i64
    }

    pub fn points_per_axis(&self) -> usize {
        (2 * self.half_count() + 1) as usize
    }

    /// All lattice points, row-major, flattened.
    pub fn points(&self) -> Vec<f64> {
        let n = self.points_per_axis();
        let h = self.half_count();
        let total = n.pow(self.dim as u32);
        let mut out = Vec::with_capacity(total * self.dim);
        for flat in 0..total {
            let mut rem = flat;
            for _ in 0..self.dim {
                let k = (rem % n) as i64 - h;
                rem /= n;
                out.push(k as f64 * self.step);
            }
        }
        out
    }
}

/// A lattice with `φ` pre-evaluated at every point, so that many conjugate queries
/// against the same spec cost one dot product per point.
pub struct ConjGrid {
    dim: usize,
    points: Vec<f64>,
    phi: Vec<f64>,
    linf: Vec<f64>,
}

impl ConjGrid {
    pub fn new(spec: &PhiSpec, grid: GridSpec) -> Result<Self> {
        grid.validate()?;
        spec.check_dim(grid.dim)?;
        let points = grid.points();
        let phi = points
            .par_chunks(grid.dim)
            .map(|z| spec.value(z))
            .collect::<Result<Vec<f64>>>()?;
        let linf = points.chunks(grid.dim).map(norm_inf).collect();
        Ok(ConjGrid {
            dim: grid.dim,
            points,
            phi,
            linf,
        })
    }

    /// `max_z y·z − φ(z)` over the lattice.
    pub fn sup(&self, y: &[f64]) -> Result<f64> {
        Ok(self.sup_within(y, f64::INFINITY)?.0)
    }

    /// Returns `(sup over the whole lattice, sup over points with ‖z‖∞ ≤ inner)`.
    fn sup_within(&self, y: &[f64], inner: f64) -> Result<(f64, f64)> {
        if y.len() != self.dim {
            return Err(Error::usage(format!(
                "query of dimension {} against a grid of dimension {}",
                y.len(),
                self.dim
            )));
        }
        let d = self.dim;
        // max is associative and commutative on non-NaN floats, so the parallel
        // reduction is deterministic
        let (outer, inner_max) = self
            .points
            .par_chunks(d)
            .zip(self.phi.par_iter())
            .zip(self.linf.par_iter())
            .map(|((z, &p), &n)| {
                let v = dot(y, z) - p;
                (v, if n <= inner { v } else { f64::NEG_INFINITY })
            })
            .reduce(
                || (f64::NEG_INFINITY, f64::NEG_INFINITY),
                |a, b| (a.0.max(b.0), a.1.max(b.1)),
            );
        Ok((outer, inner_max))
    }
}

/// Grid lower bound on `φ*(y)`.
pub fn conj_grid_oracle(spec: &PhiSpec, y: &[f64], grid: GridSpec) -> Result<f64> {
    if y.len() != grid.dim {
        return Err(Error::usage("dim(y) must equal grid.dim"));
    }
    ConjGrid::new(spec, grid)?.sup(y)
}

/// Decides `z ∈ dom φ*` by comparing the grid conjugate at radius `R` and `2R`:
/// inside the domain the supremum is attained at bounded `z` and stops growing,
/// outside it grows linearly in the radius.
pub struct DomainMembershipOracle {
    grid: ConjGrid,
    inner_radius: f64,
    threshold: f64,
}

impl DomainMembershipOracle {
    pub fn new(spec: &PhiSpec, dim: usize, threshold: f64) -> Result<Self> {
        Self::with_budget(spec, dim, threshold, 1_000_000)
    }

    /// Same test on a lattice of about `points` nodes.
    pub fn with_budget(spec: &PhiSpec, dim: usize, threshold: f64, points: usize) -> Result<Self> {
        if points < 27 {
            return Err(Error::usage("membership lattice needs at least 27 points"));
        }
        let inner_radius = 20.0;
        let per_axis = (points as f64).powf(1.0 / dim as f64).floor().clamp(3.0, 1601.0);
        let step = 4.0 * inner_radius / (per_axis - 1.0);
        let outer = GridSpec::new(2.0 * inner_radius, step, dim)?;
        Ok(Self {
            grid: ConjGrid::new(spec, outer)?,
            inner_radius,
            threshold,
        })
    }

    /// Returns `(in_domain, growth)` where growth is the increase of the grid
    /// supremum when the radius doubles.
    pub fn test(&self, z: &[f64]) -> Result<(bool, f64)> {
        let (outer, inner) = self.grid.sup_within(z, self.inner_radius + 1e-12)?;
        let growth = outer - inner;
        Ok((growth <= self.threshold, growth))
    }
}

const PROJECTION_BUDGET: usize = 100_000;

/// Grid estimate of `inf_{z ∈ dom φ*} ‖y − z‖∞`: the ℓ∞ distance from `y` to the
/// nearest lattice point of `grid` that the growth test accepts.
///
/// Candidates are visited in order of distance, so only points closer than the
/// answer are ever tested.
pub fn dom_projection_oracle(
    spec: &PhiSpec,
    y: &[f64],
    grid: GridSpec,
    threshold: f64,
) -> Result<f64> {
    grid.validate()?;
    if y.len() != grid.dim {
        return Err(Error::usage("dim(y) must equal grid.dim"));
    }
    let membership = DomainMembershipOracle::with_budget(spec, grid.dim, threshold, PROJECTION_BUDGET)?;
    if membership.test(y)?.0 {
        return Ok(0.0);
    }
    let points = grid.points();
    let mut candidates: Vec<(f64, &[f64])> = points
        .chunks(grid.dim)
        .map(|z| (norm_inf(&sub(y, z)), z))
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    for batch in candidates.chunks(256) {
        let accepted = batch
            .par_iter()
            .map(|(_, z)| membership.test(z).map(|r| r.0))
            .collect::<Result<Vec<bool>>>()?;
        if let Some(i) = accepted.iter().position(|&a| a) {
            return Ok(batch[i].0);
        }
    }
    Err(Error::usage("no lattice point of the grid lies in dom φ*; enlarge the grid"))
}

/// Draws a test vector: a random scale, a sprinkle of exact zeros and repeated
/// magnitudes so kinks and ties are exercised.
pub(crate) fn sample_probe(rng: &mut ChaCha8Rng, dim: usize, max_abs: f64) -> Vec<f64> {
    let scale = 10f64.powf(rng.random_range(-2.0..1.0));
    let mut v: Vec<f64> = (0..dim)
        .map(|_| {
            let u: f64 = rng.random_range(-1.0..1.0);
            (u * 3.0 * scale).clamp(-max_abs, max_abs)
        })
        .collect();
    for i in 0..dim {
        let r: f64 = rng.random();
        if r < 0.15 {
            v[i] = 0.0;
        } else if r < 0.25 && i > 0 {
            v[i] = -v[i - 1];
        }
    }
    v
}

/// Worst value of `φ(y) − φ(x) − ∂φ(x)·(y − x)` over random pairs; a valid
/// subgradient selection keeps this ≥ 0 up to rounding.
pub fn subgrad_inequality_sample(
    spec: &PhiSpec,
    dim: usize,
    trials: usize,
    rng_seed: u64,
) -> Result<f64> {
    if trials == 0 {
        return Err(Error::usage("trials must be >= 1"));
    }
    spec.check_dim(dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut worst = f64::INFINITY;
    for _ in 0..trials {
        let x = sample_probe(&mut rng, dim, 50.0);
        let y = sample_probe(&mut rng, dim, 50.0);
        let g = spec.subgrad(&x)?;
        let slack = (spec.value(&y)? - dot(&g, &y)) - (spec.value(&x)? - dot(&g, &x));
        worst = worst.min(slack);
    }
    Ok(worst)
}
