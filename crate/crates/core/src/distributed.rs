//! In-process simulation of distributed Lion.
//!
//! Each worker keeps its own momentum, draws its own stochastic gradient and
//! sends only the update direction `uᵢ = ∂φ(β₁mᵢ − (1 − β₁)gᵢ)`. For ternary
//! kinds that is two bits per coordinate. The server combines the directions
//! and applies `x' = x + lr (agg − λx)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convex::{PhiSpec, TAU_DOM};
use crate::dynamics::DiscreteConfig;
use crate::error::{Error, Result};
use crate::lyapunov::{delta1, delta2};
use crate::problems::{derive_seed, sample_gradient, Objective, StochasticOracle};
use crate::vecops::{all_finite, scale, sign};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerState {
    pub id: usize,
    pub m: Vec<f64>,
    pub seed: u64,
}

impl WorkerState {
    /// Worker `id` with zero momentum and seed `base_seed + id`.
    pub fn new(id: usize, dim: usize, base_seed: u64) -> Self {
        Self {
            id,
            m: vec![0.0; dim],
            seed: base_seed.wrapping_add(id as u64),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationRule {
    /// Mean of the workers' directions.
    AverageSigns,
    /// Sign of the sum of the workers' directions.
    MajoritySign,
    /// Workers ship `m̃ᵢ` in full; the server applies `∂φ` to their mean.
    GlobalLion,
}

impl AggregationRule {
    pub fn name(&self) -> &'static str {
        match self {
            AggregationRule::AverageSigns => "average_signs",
            AggregationRule::MajoritySign => "majority_sign",
            AggregationRule::GlobalLion => "global_lion",
        }
    }

    pub fn is_compressed(&self) -> bool {
        !matches!(self, AggregationRule::GlobalLion)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommStats {
    pub bits_upstream_per_round: u64,
    pub bits_downstream_per_round: u64,
    pub rounds: u64,
}

impl CommStats {
    pub fn total_bits(&self) -> u64 {
        (self.bits_upstream_per_round + self.bits_downstream_per_round) * self.rounds
    }
}

/// Bits per round for `workers` workers in `dim` dimensions.
///
/// Ternary directions cost 2 bits per coordinate, 1 in strict-binary mode;
/// full vectors cost 64. Downstream, the server broadcasts the vote sum for
/// `AverageSigns` (`2N + 1` levels), a ternary vector for `MajoritySign`, and
/// `∂φ` of the mean for `GlobalLion`.
pub fn comm_stats(
    rule: AggregationRule,
    spec: &PhiSpec,
    workers: usize,
    dim: usize,
    strict_binary: bool,
    rounds: u64,
) -> CommStats {
    let (n, d) = (workers as u64, dim as u64);
    let symbol = if strict_binary { 1 } else { 2 };
    let (up, down) = match rule {
        AggregationRule::AverageSigns => {
            let levels = 2 * n + 1;
            let bits = 64 - (levels - 1).leading_zeros() as u64;
            (n * symbol * d, d * bits)
        }
        AggregationRule::MajoritySign => (n * symbol * d, symbol * d),
        AggregationRule::GlobalLion => (n * 64 * d, if spec.is_ternary() { 2 * d } else { 64 * d }),
    };
    CommStats {
        bits_upstream_per_round: up,
        bits_downstream_per_round: down,
        rounds,
    }
}

/// One worker's contribution to a round.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkerRound {
    /// Update direction `∂φ(m̃ᵢ)`; the message for compressed rules.
    pub u: Vec<f64>,
    /// `m̃ᵢ`; the message for `GlobalLion`.
    pub m_tilde: Vec<f64>,
    pub worker: WorkerState,
}

/// Gradient draw, momentum update and direction for one worker. The gradient
/// seed is `derive_seed(worker.seed, round)`.
#[allow(clippy::too_many_arguments)]
pub fn worker_round(
    worker: &WorkerState,
    cfg: &DiscreteConfig,
    spec: &PhiSpec,
    oracle: &StochasticOracle,
    x: &[f64],
    round: u64,
    rule: AggregationRule,
    strict_binary: bool,
) -> Result<WorkerRound> {
    if rule.is_compressed() && !spec.is_ternary() {
        return Err(Error::usage(format!(
            "{} needs a kind with ternary subgradients, got {}",
            rule.name(),
            spec.kind_name()
        )));
    }
    if worker.m.len() != x.len() {
        return Err(Error::usage("worker momentum and x differ in dimension"));
    }
    let g = sample_gradient(oracle, x, derive_seed(worker.seed, round));
    if !all_finite(&g) {
        return Err(Error::numeric(round, format!("non-finite gradient on worker {}", worker.id)));
    }
    let m_tilde: Vec<f64> = worker
        .m
        .iter()
        .zip(&g)
        .map(|(m, g)| cfg.beta1 * m - (1.0 - cfg.beta1) * g)
        .collect();
    let m: Vec<f64> = worker
        .m
        .iter()
        .zip(&g)
        .map(|(m, g)| cfg.beta2 * m - (1.0 - cfg.beta2) * g)
        .collect();
    let mut u = spec.subgrad(&m_tilde)?;
    if strict_binary {
        u.iter_mut().filter(|v| **v == 0.0).for_each(|v| *v = 1.0);
    }
    Ok(WorkerRound {
        u,
        m_tilde,
        worker: WorkerState {
            id: worker.id,
            m,
            seed: worker.seed,
        },
    })
}

/// Combines ternary directions. `GlobalLion` is handled by [`server_round`]'s
/// caller, so it is rejected here.
pub fn aggregate(rule: AggregationRule, updates: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = updates.first().ok_or_else(|| Error::usage("no updates to aggregate"))?;
    let d = first.len();
    if updates.iter().any(|u| u.len() != d) {
        return Err(Error::usage("updates differ in dimension"));
    }
    let sum: Vec<f64> = (0..d).map(|j| updates.iter().map(|u| u[j]).sum()).collect();
    match rule {
        AggregationRule::AverageSigns => Ok(sum.into_iter().map(|s| s / updates.len() as f64).collect()),
        AggregationRule::MajoritySign => Ok(sum.into_iter().map(sign).collect()),
        AggregationRule::GlobalLion => Err(Error::usage("global_lion aggregates momenta, not directions")),
    }
}

/// `x' = x + lr (agg − λx)`.
pub fn server_round(x: &[f64], agg: &[f64], cfg: &DiscreteConfig) -> Result<Vec<f64>> {
    if x.len() != agg.len() {
        return Err(Error::usage("x and aggregate differ in dimension"));
    }
    Ok(x.iter()
        .zip(agg)
        .map(|(xi, ai)| xi + cfg.lr * (ai - cfg.lambda * xi))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributedOptions {
    pub rule: AggregationRule,
    pub seed: u64,
    #[serde(default)]
    pub strict_binary: bool,
}

/// Per-round record of a distributed run.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: u64,
    pub loss: f64,
    pub dist_dom: f64,
    pub bits_cum: u64,
    /// Per worker `Δ₁` at the shared new iterate, once `λx` is feasible.
    pub delta1: Vec<Option<f64>>,
    /// Per worker `Δ₂` from the worker's own `(m̃ᵢ, mᵢ)`.
    pub delta2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributedRun {
    /// `rounds + 1` iterates including `x0`.
    pub xs: Vec<Vec<f64>>,
    pub records: Vec<RoundRecord>,
    pub stats: CommStats,
    pub workers: Vec<WorkerState>,
}

impl DistributedRun {
    pub fn final_x(&self) -> &[f64] {
        self.xs.last().expect("trajectory holds x0")
    }
}

/// Runs `rounds` synchronous rounds with one worker per oracle. Worker rounds
/// run in parallel and are reduced in worker order, so the result does not
/// depend on the thread count.
pub fn run_distributed(
    cfg: &DiscreteConfig,
    spec: &PhiSpec,
    opts: &DistributedOptions,
    oracles: &[StochasticOracle],
    x0: &[f64],
    rounds: u64,
) -> Result<DistributedRun> {
    if oracles.is_empty() {
        return Err(Error::usage("need at least one worker"));
    }
    let d = x0.len();
    spec.check_dim(d)?;
    if oracles.iter().any(|o| o.base().dim() != d) {
        return Err(Error::usage("every oracle must match dim(x0)"));
    }
    if oracles.iter().any(|o| o.base() != oracles[0].base()) {
        return Err(Error::usage("all oracles must share the same base objective"));
    }
    let objective = oracles[0].base();
    let per_round = comm_stats(opts.rule, spec, oracles.len(), d, opts.strict_binary, 1);
    let round_bits = per_round.bits_upstream_per_round + per_round.bits_downstream_per_round;

    let mut workers: Vec<WorkerState> = (0..oracles.len()).map(|i| WorkerState::new(i, d, opts.seed)).collect();
    let mut x = x0.to_vec();
    let mut xs = vec![x.clone()];
    let mut records = vec![RoundRecord {
        round: 0,
        loss: objective.value(&x),
        dist_dom: spec.dom_distance(&scale(&x, cfg.lambda))?,
        bits_cum: 0,
        delta1: vec![None; oracles.len()],
        delta2: vec![0.0; oracles.len()],
    }];

    for round in 0..rounds {
        let results = workers
            .par_iter()
            .zip(oracles.par_iter())
            .map(|(w, o)| worker_round(w, cfg, spec, o, &x, round, opts.rule, opts.strict_binary))
            .collect::<Result<Vec<WorkerRound>>>()?;
        let agg = match opts.rule {
            AggregationRule::GlobalLion => {
                let n = results.len() as f64;
                let mean: Vec<f64> = (0..d)
                    .map(|j| results.iter().map(|r| r.m_tilde[j]).sum::<f64>() / n)
                    .collect();
                spec.subgrad(&mean)?
            }
            rule => aggregate(rule, &results.iter().map(|r| r.u.clone()).collect::<Vec<_>>())?,
        };
        x = server_round(&x, &agg, cfg)?;
        if !all_finite(&x) {
            return Err(Error::numeric(round + 1, "non-finite iterate"));
        }
        let y = scale(&x, cfg.lambda);
        let dist_dom = spec.dom_distance(&y)?;
        let mut d1 = Vec::with_capacity(results.len());
        let mut d2 = Vec::with_capacity(results.len());
        for r in &results {
            d1.push(if dist_dom <= TAU_DOM {
                Some(delta1(spec, cfg.lambda, &x, &r.m_tilde)?)
            } else {
                None
            });
            d2.push(delta2(spec, &r.m_tilde, &r.worker.m)?);
        }
        workers = results.into_iter().map(|r| r.worker).collect();
        records.push(RoundRecord {
            round: round + 1,
            loss: objective.value(&x),
            dist_dom,
            bits_cum: round_bits * (round + 1),
            delta1: d1,
            delta2: d2,
        });
        xs.push(x.clone());
    }
    Ok(DistributedRun {
        xs,
        records,
        stats: CommStats { rounds, ..per_round },
        workers,
    })
}
