//! Configuration-driven experiments and their CSV/JSON artifacts.

use std::fmt::Write as _;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convex::{ConjDomain, ExtReal, PhiSpec, TAU_DOM};
use crate::distributed::{run_distributed, AggregationRule, DistributedOptions, DistributedRun};
use crate::dynamics::{
    implicit_of_explicit, integrate_rk4, step_explicit, step_implicit, ContinuousConfig, DiscreteConfig, OptState,
};
use crate::error::{Error, Result};
use crate::lyapunov::{diagnose_initial, diagnose_step, h_continuous, Diagnostics, Snapshot};
use crate::oracle::{dom_projection_oracle, ConjGrid, GridSpec};
use crate::problems::{derive_seed, sample_gradient, NoiseModel, Objective, Problem, ProblemSpec, StochasticOracle};
use crate::vecops::{norm_inf, scale};

/// Where the weight decay is applied in a discrete step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    Explicit,
    Implicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributedSection {
    pub workers: usize,
    pub rule: AggregationRule,
    #[serde(default)]
    pub strict_binary: bool,
}

fn default_n_batch() -> usize {
    1
}

fn default_true() -> bool {
    true
}

/// A single JSON experiment description.
///
/// ```json
/// {
///   "objective": {"kind": "quadratic", "center": [1.5, 0.0]},
///   "phi": {"kind": "L1"},
///   "discrete": {"lr": 0.01, "lambda": 0.5, "beta1": 0.9, "beta2": 0.99},
///   "x0": [-2.0, 2.0],
///   "steps": 5000
/// }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub objective: ProblemSpec,
    pub phi: PhiSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discrete: Option<DiscreteConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub continuous: Option<ContinuousConfig>,
    #[serde(default)]
    pub scheme: Scheme,
    /// Integration step for continuous runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    pub x0: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m0: Option<Vec<f64>>,
    pub steps: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseModel>,
    #[serde(default = "default_n_batch")]
    pub n_batch: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default = "default_true")]
    pub diagnostics: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distributed: Option<DistributedSection>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::usage(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.discrete, &self.continuous) {
            (Some(d), None) => d.validate()?,
            (None, Some(c)) => {
                c.validate()?;
                if !self.h.is_some_and(|h| h > 0.0) {
                    return Err(Error::usage("continuous runs need a step size h > 0"));
                }
            }
            _ => return Err(Error::usage("give exactly one of \"discrete\" or \"continuous\"")),
        }
        if self.steps == 0 {
            return Err(Error::usage("steps must be >= 1"));
        }
        if self.x0.is_empty() {
            return Err(Error::usage("x0 must be non-empty"));
        }
        if let Some(m0) = &self.m0 {
            if m0.len() != self.x0.len() {
                return Err(Error::usage("m0 and x0 differ in dimension"));
            }
        }
        self.phi.check_dim(self.x0.len())?;
        Ok(())
    }

    pub fn problem(&self) -> Result<Problem> {
        let p = self.objective.build()?;
        if p.dim() != self.x0.len() {
            return Err(Error::usage(format!(
                "objective has dimension {} but x0 has {}",
                p.dim(),
                self.x0.len()
            )));
        }
        Ok(p)
    }

    pub fn oracle(&self) -> Result<StochasticOracle> {
        let base = self.problem()?;
        match self.noise {
            Some(noise) => StochasticOracle::new(base, noise, self.n_batch),
            None => Ok(StochasticOracle::exact(base)),
        }
    }

    fn initial_state(&self) -> OptState {
        let m = self.m0.clone().unwrap_or_else(|| vec![0.0; self.x0.len()]);
        OptState {
            x: self.x0.clone(),
            m,
            t: 0,
        }
    }

    fn require_discrete(&self) -> Result<DiscreteConfig> {
        self.discrete
            .ok_or_else(|| Error::usage("this command needs a \"discrete\" configuration"))
    }
}

/// One CSV row of a trace: diagnostics plus the iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub step: u64,
    pub f: f64,
    pub h: Option<ExtReal>,
    pub delta1: Option<f64>,
    pub delta2: Option<f64>,
    pub delta_total: Option<f64>,
    pub dist_dom: f64,
    pub feasible: bool,
    pub linf_x: f64,
    pub phase: u8,
    pub x: Vec<f64>,
}

impl TraceRow {
    fn from_diag(d: Diagnostics, x: &[f64]) -> Self {
        Self {
            step: d.step,
            f: d.f,
            h: d.h,
            delta1: d.delta1,
            delta2: d.delta2,
            delta_total: d.delta_total,
            dist_dom: d.dist_dom,
            feasible: d.feasible,
            linf_x: d.linf_x,
            phase: d.phase,
            x: x.to_vec(),
        }
    }

    fn plain(step: u64, f: f64, lambda: f64, spec: &PhiSpec, x: &[f64]) -> Result<Self> {
        let dist_dom = spec.dom_distance(&scale(x, lambda))?;
        let feasible = dist_dom <= TAU_DOM;
        Ok(Self {
            step,
            f,
            h: None,
            delta1: None,
            delta2: None,
            delta_total: None,
            dist_dom,
            feasible,
            linf_x: norm_inf(x),
            phase: if feasible { 2 } else { 1 },
            x: x.to_vec(),
        })
    }
}

/// Float as written to CSV: 17 significant digits, `inf` for `+∞`.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

fn parse_float(s: &str) -> Result<f64> {
    match s {
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        "nan" => Ok(f64::NAN),
        _ => s.parse().map_err(|_| Error::usage(format!("bad number \"{s}\""))),
    }
}

fn opt_float(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

fn parse_opt(s: &str) -> Result<Option<f64>> {
    if s.is_empty() { Ok(None) } else { parse_float(s).map(Some) }
}

const TRACE_COLUMNS: [&str; 10] = [
    "step", "f", "H", "delta1", "delta2", "delta_total", "dist_dom", "feasible", "linf_x", "phase",
];

/// Renders trace rows as CSV with `x0..x{d−1}` appended.
pub fn trace_to_csv(rows: &[TraceRow]) -> String {
    let d = rows.first().map_or(0, |r| r.x.len());
    let mut out = TRACE_COLUMNS.join(",");
    for j in 0..d {
        let _ = write!(out, ",x{j}");
    }
    out.push('\n');
    for r in rows {
        let h = match r.h {
            None => String::new(),
            Some(ExtReal::PosInf) => "inf".into(),
            Some(ExtReal::Finite(v)) => format_float(v),
        };
        let fields = [
            r.step.to_string(),
            format_float(r.f),
            h,
            opt_float(r.delta1),
            opt_float(r.delta2),
            opt_float(r.delta_total),
            format_float(r.dist_dom),
            r.feasible.to_string(),
            format_float(r.linf_x),
            r.phase.to_string(),
        ];
        out.push_str(&fields.join(","));
        for v in &r.x {
            out.push(',');
            out.push_str(&format_float(*v));
        }
        out.push('\n');
    }
    out
}

/// Parses the output of [`trace_to_csv`].
pub fn trace_from_csv(text: &str) -> Result<Vec<TraceRow>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    if header.len() < TRACE_COLUMNS.len() || header.iter().zip(TRACE_COLUMNS).any(|(a, b)| a != b) {
        return Err(Error::usage("not a trace CSV"));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let r = record?;
        let field = |i: usize| r.get(i).unwrap_or("");
        let h = match field(2) {
            "" => None,
            "inf" => Some(ExtReal::PosInf),
            s => Some(ExtReal::new(parse_float(s)?)),
        };
        rows.push(TraceRow {
            step: field(0).parse().map_err(|_| Error::usage("bad step"))?,
            f: parse_float(field(1))?,
            h,
            delta1: parse_opt(field(3))?,
            delta2: parse_opt(field(4))?,
            delta_total: parse_opt(field(5))?,
            dist_dom: parse_float(field(6))?,
            feasible: field(7).parse().map_err(|_| Error::usage("bad feasible flag"))?,
            linf_x: parse_float(field(8))?,
            phase: field(9).parse().map_err(|_| Error::usage("bad phase"))?,
            x: (TRACE_COLUMNS.len()..r.len()).map(|i| parse_float(field(i))).collect::<Result<_>>()?,
        });
    }
    Ok(rows)
}

fn discrete_step(scheme: Scheme, cfg: &DiscreteConfig, spec: &PhiSpec, s: &OptState, g: &[f64]) -> Result<crate::dynamics::Step> {
    match scheme {
        Scheme::Explicit => step_explicit(cfg, spec, s, g),
        Scheme::Implicit => step_implicit(cfg, spec, s, g),
    }
}

/// The implicit configuration whose certificates apply to a run.
fn certificate_config(scheme: Scheme, cfg: &DiscreteConfig) -> Option<DiscreteConfig> {
    match scheme {
        Scheme::Implicit => Some(*cfg),
        Scheme::Explicit => implicit_of_explicit(cfg),
    }
}

/// Iterates `x₀ … x_T` of a discrete run, without diagnostics.
pub fn discrete_iterates(cfg: &RunConfig, dcfg: &DiscreteConfig) -> Result<Vec<Vec<f64>>> {
    let oracle = cfg.oracle()?;
    let mut s = cfg.initial_state();
    let mut xs = Vec::with_capacity(cfg.steps as usize + 1);
    xs.push(s.x.clone());
    for t in 0..cfg.steps {
        let g = sample_gradient(&oracle, &s.x, derive_seed(cfg.seed, t));
        s = discrete_step(cfg.scheme, dcfg, &cfg.phi, &s, &g)?.state;
        xs.push(s.x.clone());
    }
    Ok(xs)
}

/// Mean of the last `ceil(len · frac)` iterates.
pub fn tail_mean(xs: &[Vec<f64>], frac: f64) -> Vec<f64> {
    let n = ((xs.len() as f64 * frac).ceil() as usize).clamp(1, xs.len());
    let tail = &xs[xs.len() - n..];
    let d = tail[0].len();
    (0..d).map(|j| tail.iter().map(|x| x[j]).sum::<f64>() / n as f64).collect()
}

fn trace_discrete(cfg: &RunConfig, dcfg: &DiscreteConfig) -> Result<Vec<TraceRow>> {
    let oracle = cfg.oracle()?;
    let problem = oracle.base();
    let spec = &cfg.phi;
    let cert = certificate_config(cfg.scheme, dcfg);
    let smooth = problem.smoothness();
    let mut s = cfg.initial_state();
    let mut f = problem.value(&s.x);
    let mut rows = Vec::with_capacity(cfg.steps as usize + 1);
    let first = if cfg.diagnostics {
        let mut d = diagnose_initial(&cert.unwrap_or(*dcfg), spec, f, &s.x, &s.m, 0)?;
        if cert.is_none() {
            d.h = None;
        }
        TraceRow::from_diag(d, &s.x)
    } else {
        TraceRow::plain(0, f, dcfg.lambda, spec, &s.x)?
    };
    rows.push(first);
    for t in 0..cfg.steps {
        let g = sample_gradient(&oracle, &s.x, derive_seed(cfg.seed, t));
        let step = discrete_step(cfg.scheme, dcfg, spec, &s, &g)?;
        let f_next = problem.value(&step.state.x);
        if !f_next.is_finite() {
            return Err(Error::numeric(t + 1, "non-finite objective value"));
        }
        let row = match (cfg.diagnostics, cert) {
            (true, Some(c)) => {
                let d = diagnose_step(
                    &c,
                    spec,
                    smooth,
                    Snapshot { f, x: &s.x, m: &s.m },
                    Snapshot { f: f_next, x: &step.state.x, m: &step.state.m },
                    &step.m_tilde,
                    t + 1,
                )?;
                TraceRow::from_diag(d, &step.state.x)
            }
            _ => TraceRow::plain(t + 1, f_next, dcfg.lambda, spec, &step.state.x)?,
        };
        rows.push(row);
        s = step.state;
        f = f_next;
    }
    Ok(rows)
}

fn trace_continuous(cfg: &RunConfig, ccfg: &ContinuousConfig, h: f64) -> Result<Vec<TraceRow>> {
    let problem = cfg.problem()?;
    let traj = integrate_rk4(ccfg, &cfg.phi, &cfg.initial_state(), |x: &[f64]| problem.gradient(x), h, cfg.steps as usize)?;
    traj.states
        .iter()
        .map(|s| {
            let f = problem.value(&s.x);
            let mut row = TraceRow::plain(s.t, f, ccfg.lambda, &cfg.phi, &s.x)?;
            if cfg.diagnostics && ccfg.lambda > 0.0 {
                row.h = Some(h_continuous(ccfg, &cfg.phi, f, &s.x, &s.m)?);
            }
            Ok(row)
        })
        .collect()
}

/// Runs a single optimization trace, one row per iterate including the start.
pub fn run_trace(cfg: &RunConfig) -> Result<Vec<TraceRow>> {
    cfg.validate()?;
    match (&cfg.discrete, &cfg.continuous) {
        (Some(d), _) => trace_discrete(cfg, d),
        (_, Some(c)) => trace_continuous(cfg, c, cfg.h.unwrap_or_default()),
        _ => unreachable!("validated"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    /// Objective at the mean of the last 10% of iterates.
    pub loss: f64,
    /// `λ x_T ∈ dom φ*` at the final iterate.
    pub feasible: bool,
    pub linf_x: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub rows: Vec<SweepRow>,
    /// Midpoint between the last λ whose loss is within `flat_tol` of the
    /// smallest λ's loss and the first λ beyond it.
    pub lambda0: Option<f64>,
    pub flat_tol: f64,
}

/// Fraction of the final iterates averaged for converged quantities.
pub const TAIL_FRACTION: f64 = 0.1;

pub fn run_sweep(cfg: &RunConfig, lambdas: &[f64]) -> Result<Sweep> {
    cfg.validate()?;
    let base = cfg.require_discrete()?;
    if lambdas.len() < 2 {
        return Err(Error::usage("a sweep needs at least two lambda values"));
    }
    let problem = cfg.problem()?;
    let mut rows = lambdas
        .par_iter()
        .map(|&lambda| {
            let dcfg = DiscreteConfig { lambda, ..base };
            dcfg.validate()?;
            let xs = discrete_iterates(cfg, &dcfg)?;
            let avg = tail_mean(&xs, TAIL_FRACTION);
            let last = xs.last().expect("non-empty");
            Ok(SweepRow {
                lambda,
                loss: problem.value(&avg),
                feasible: cfg.phi.dom_distance(&scale(last, lambda))? <= TAU_DOM,
                linf_x: norm_inf(&avg),
            })
        })
        .collect::<Result<Vec<SweepRow>>>()?;
    rows.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    let flat_tol = 1e-4;
    let reference = rows[0].loss;
    let lambda0 = rows
        .iter()
        .position(|r| r.loss > reference + flat_tol)
        .filter(|&i| i > 0)
        .map(|i| 0.5 * (rows[i - 1].lambda + rows[i].lambda));
    Ok(Sweep { rows, lambda0, flat_tol })
}

pub fn sweep_to_csv(sweep: &Sweep) -> String {
    let mut out = String::from("lambda,loss,feasible,linf_x,lambda0\n");
    let l0 = opt_float(sweep.lambda0);
    for r in &sweep.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            format_float(r.lambda),
            format_float(r.loss),
            r.feasible,
            format_float(r.linf_x),
            l0
        );
    }
    out
}

/// Distributed run as configured; needs a `distributed` section.
pub fn run_distributed_config(cfg: &RunConfig) -> Result<DistributedRun> {
    cfg.validate()?;
    let dcfg = cfg.require_discrete()?;
    let section = cfg
        .distributed
        .as_ref()
        .ok_or_else(|| Error::usage("config needs a \"distributed\" section"))?;
    if section.workers == 0 {
        return Err(Error::usage("workers must be >= 1"));
    }
    let oracle = cfg.oracle()?;
    let oracles = vec![oracle; section.workers];
    let opts = DistributedOptions {
        rule: section.rule,
        seed: cfg.seed,
        strict_binary: section.strict_binary,
    };
    run_distributed(&dcfg, &cfg.phi, &opts, &oracles, &cfg.x0, cfg.steps)
}

/// `round,loss,dist_dom,bits_cum,delta1_w*,delta2_w*` rows and a
/// `# bits_upstream_per_round=…` footer.
pub fn distributed_to_csv(run: &DistributedRun) -> String {
    let n = run.workers.len();
    let mut out = String::from("round,loss,dist_dom,bits_cum");
    for i in 0..n {
        let _ = write!(out, ",delta1_w{i}");
    }
    for i in 0..n {
        let _ = write!(out, ",delta2_w{i}");
    }
    out.push('\n');
    for r in &run.records {
        let _ = write!(out, "{},{},{},{}", r.round, format_float(r.loss), format_float(r.dist_dom), r.bits_cum);
        for d in &r.delta1 {
            out.push(',');
            out.push_str(&opt_float(*d));
        }
        for d in &r.delta2 {
            out.push(',');
            out.push_str(&format_float(*d));
        }
        out.push('\n');
    }
    let s = run.stats;
    let _ = writeln!(
        out,
        "# bits_upstream_per_round={},bits_downstream_per_round={},rounds={}",
        s.bits_upstream_per_round, s.bits_downstream_per_round, s.rounds
    );
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionProbe {
    pub y: Vec<f64>,
    pub closed_form: f64,
    pub oracle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjKindReport {
    pub kind: String,
    pub spec: PhiSpec,
    pub points: usize,
    pub max_abs_err: f64,
    pub projection: Vec<ProjectionProbe>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjCheckReport {
    pub seed: u64,
    pub tolerance: f64,
    pub kinds: Vec<ConjKindReport>,
    pub passed: bool,
}

/// Random point of `dom φ*`: a random direction in the box, scaled to the
/// domain's boundary along that ray by bisection, then shrunk by a random
/// factor. A quarter of the draws stay on the boundary, except for kinds whose
/// conjugate is only differentiable in the open box.
pub fn sample_domain_point(spec: &PhiSpec, dim: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let z: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    if spec.conj_domain() == ConjDomain::Whole {
        return Ok(scale(&z, 3.0));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while spec.dom_distance(&scale(&z, hi))? == 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if spec.dom_distance(&scale(&z, mid))? == 0.0 { lo = mid } else { hi = mid }
    }
    let open = matches!(spec, PhiSpec::Entropy { .. } | PhiSpec::Relativistic { .. });
    let r = if rng.random::<f64>() < 0.25 && !open { 1.0 } else { rng.random_range(0.0..0.95) };
    Ok(scale(&z, r * lo))
}

/// Random point in `0.95 · dom φ*`.
pub fn sample_interior_point(spec: &PhiSpec, dim: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    loop {
        let y = sample_domain_point(spec, dim, rng)?;
        if spec.dom_distance(&scale(&y, 1.0 / 0.95))? == 0.0 {
            return Ok(y);
        }
    }
}

/// Compares the closed-form φ* with the lattice supremum at `points` random
/// points per catalog kind in two dimensions, and the closed-form domain
/// distance with the lattice projection at `projection_points` points outside
/// the domain.
pub fn conj_check(seed: u64, points: usize, grid: GridSpec, projection_points: usize) -> Result<ConjCheckReport> {
    let tolerance = 0.05;
    let dim = grid.dim;
    let kinds = PhiSpec::catalog(dim)
        .into_iter()
        .enumerate()
        .map(|(k, spec)| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, k as u64));
            let lattice = ConjGrid::new(&spec, grid)?;
            let mut max_abs_err: f64 = 0.0;
            for _ in 0..points {
                let y = sample_interior_point(&spec, dim, &mut rng)?;
                let exact = spec.conj_value(&y)?.to_f64();
                max_abs_err = max_abs_err.max((exact - lattice.sup(&y)?).abs());
            }
            let coarse = GridSpec::new(2.5, 0.1, dim)?;
            let mut projection = Vec::new();
            for _ in 0..projection_points {
                let y: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
                projection.push(ProjectionProbe {
                    closed_form: spec.dom_distance(&y)?,
                    oracle: dom_projection_oracle(&spec, &y, coarse, 0.1)?,
                    y,
                });
            }
            let proj_ok = projection
                .iter()
                .all(|p| (p.closed_form - p.oracle).abs() <= 2.0 * coarse.step + 0.01);
            Ok(ConjKindReport {
                kind: spec.kind_name().to_string(),
                passed: max_abs_err <= tolerance && proj_ok,
                spec,
                points,
                max_abs_err,
                projection,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let passed = kinds.iter().all(|k| k.passed);
    Ok(ConjCheckReport {
        seed,
        tolerance,
        kinds,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_config(lambda: f64, steps: u64) -> RunConfig {
        RunConfig::from_json(&format!(
            r#"{{"objective": {{"kind": "quadratic", "center": [1.5, 0.0]}},
                "phi": {{"kind": "L1"}},
                "discrete": {{"lr": 0.01, "lambda": {lambda}, "beta1": 0.9, "beta2": 0.99}},
                "x0": [-2.0, 2.0], "steps": {steps}}}"#
        ))
        .unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(RunConfig::from_json("{}").is_err());
        let mut c = toy_config(0.5, 10);
        c.continuous = Some(ContinuousConfig::new(1.0, 1.0, 0.5, 0.5));
        assert!(c.validate().is_err());
        let mut c = toy_config(0.5, 10);
        c.steps = 0;
        assert!(c.validate().is_err());
        let mut c = toy_config(0.5, 10);
        c.x0 = vec![0.0; 3];
        assert!(c.problem().is_err());
        assert!(RunConfig::from_json(r#"{"objective": {"kind": "quadratic", "center": [0]}, "phi": {"kind": "L1"},
            "discrete": {"lr": 0.1, "lambda": 0, "beta1": 0.9, "beta2": 0.99}, "x0": [0], "steps": 1, "bogus": 1}"#)
            .is_err());
    }

    #[test]
    fn trace_csv_round_trip() {
        let rows = run_trace(&toy_config(1.5, 300)).unwrap();
        assert_eq!(rows.len(), 301);
        assert_eq!(rows[0].h, Some(ExtReal::PosInf));
        assert!(rows[0].delta1.is_none());
        let text = trace_to_csv(&rows);
        assert!(text.starts_with("step,f,H,delta1,delta2,delta_total,dist_dom,feasible,linf_x,phase,x0,x1\n"));
        let back = trace_from_csv(&text).unwrap();
        assert_eq!(trace_to_csv(&back), text);
        assert!(rows.iter().any(|r| r.phase == 2 && r.delta1.is_some()));
    }

    #[test]
    fn traces_are_reproducible() {
        let mut c = toy_config(0.5, 200);
        c.noise = Some(NoiseModel::GaussianIid { sigma: 1.0 });
        c.seed = 4;
        assert_eq!(trace_to_csv(&run_trace(&c).unwrap()), trace_to_csv(&run_trace(&c).unwrap()));
    }

    #[test]
    fn continuous_trace_rows() {
        let c = RunConfig::from_json(
            r#"{"objective": {"kind": "quadratic", "center": [1.5, 0.0]}, "phi": {"kind": "Huber", "a": 1.0},
                "continuous": {"alpha": 1.0, "gamma": 1.0, "lambda": 0.5, "epsilon": 0.5}, "h": 0.01,
                "x0": [0.0, 0.0], "steps": 100}"#,
        )
        .unwrap();
        let rows = run_trace(&c).unwrap();
        assert_eq!(rows.len(), 101);
        for w in rows.windows(2) {
            let (a, b) = (w[0].h.unwrap().to_f64(), w[1].h.unwrap().to_f64());
            assert!(b <= a + 1e-8 * 0.01, "{a} -> {b}");
        }
    }

    #[test]
    fn numeric_blow_up_reports_step() {
        let c = RunConfig::from_json(
            r#"{"objective": {"kind": "quadratic", "center": [0.0], "diag": [1e300]}, "phi": {"kind": "HalfSquaredL2"},
                "discrete": {"lr": 1.0, "lambda": 0.0, "beta1": 0.5, "beta2": 0.9}, "x0": [1e10], "steps": 50}"#,
        )
        .unwrap();
        let err = run_trace(&c).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(matches!(err, Error::Numeric { .. }));
    }

    #[test]
    fn sweep_shape() {
        let c = toy_config(0.5, 2000);
        let s = run_sweep(&c, &[0.2, 1.0, 2.0]).unwrap();
        assert_eq!(s.rows.len(), 3);
        assert!(s.rows[0].loss < 1e-4);
        assert!(s.rows[2].loss > s.rows[1].loss);
        assert_eq!(s.lambda0, Some(0.6));
        assert!(run_sweep(&c, &[0.5]).is_err());
        assert!(sweep_to_csv(&s).starts_with("lambda,loss,feasible,linf_x,lambda0\n"));
    }

    #[test]
    fn distributed_single_worker_matches_trace() {
        let mut c = toy_config(0.5, 200);
        c.noise = Some(NoiseModel::GaussianIid { sigma: 0.5 });
        c.seed = 17;
        c.distributed = Some(DistributedSection { workers: 1, rule: AggregationRule::AverageSigns, strict_binary: false });
        let run = run_distributed_config(&c).unwrap();
        let trace = run_trace(&c).unwrap();
        for (r, t) in run.records.iter().zip(&trace) {
            assert_eq!((r.loss, r.dist_dom), (t.f, t.dist_dom));
        }
        let text = distributed_to_csv(&run);
        assert!(text.ends_with("# bits_upstream_per_round=4,bits_downstream_per_round=4,rounds=200\n"));
    }

    #[test]
    fn tail_mean_examples() {
        let xs: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        assert_eq!(tail_mean(&xs, 0.2), vec![8.5]);
        assert_eq!(tail_mean(&xs, 0.0), vec![9.0]);
    }

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 6.02e23, 0.0] {
            let s = format_float(v);
            assert_eq!(parse_float(&s).unwrap(), v);
        }
        assert_eq!(format_float(f64::INFINITY), "inf");
    }

    #[test]
    fn conj_check_small() {
        let grid = GridSpec::new(5.0, 0.05, 2).unwrap();
        let r = conj_check(1, 10, grid, 0).unwrap();
        assert_eq!(r.kinds.len(), 11);
        assert!(r.passed, "{r:#?}");
    }
}
