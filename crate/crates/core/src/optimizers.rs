//! The iteration loops: medoid descent (plain and clipped) plus the
//! mini-batch SGD, clipped SGD, median-of-means, and mean-aggregator
//! baselines, all sharing one sampling-and-aggregation skeleton.
//!
//! Per-point noise draws are addressed by `(run, t, flat batch index)`, so
//! every optimizer running under the same seed consumes the identical
//! draws. Chunk sums accumulate in sample order and are divided once, which
//! makes the mean-aggregator route and the pooled mini-batch SGD route
//! bit-identical whenever the chunk size is a power of two.

use crate::aggregation::{clip_unchecked, elementwise_median, medoid, robust_norm, VectorSet};
use crate::noise::{chunk_noise_sums, VectorSampler};
use crate::problems::Problem;
use crate::stream::RngFactory;
use serde::{Deserialize, Serialize};
use std::time::Instant;
use thiserror::Error;

/// Iterates whose norm passes this are treated as diverged and truncate the
/// run; heavy-tailed noise can genuinely send plain SGD here.
pub const DIVERGENCE_NORM_LIMIT: f64 = 1e12;

#[derive(Debug, Error, PartialEq)]
pub enum OptimizerError {
    #[error(
        "batch size K = {batch} must be divisible by chunk size R = {chunk_size} (the K = M*R split allows no remainder)"
    )]
    IndivisibleBatch { batch: usize, chunk_size: usize },
    #[error("dimension mismatch: {what} has dimension {got} but the problem has dimension {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    /// Select the chunk gradient that is the medoid of all chunk gradients.
    RsgdMini,
    /// Medoid selection followed by norm clipping.
    RcsgdMini,
    /// Mean of all K per-point gradients (pooled accumulation).
    Sgd,
    ClippedSgd,
    /// Element-wise median across the chunk gradients.
    Mom,
    ClippedMom,
    /// Mean of the M chunk gradients; agrees with `Sgd` exactly in real
    /// arithmetic and bit-exactly for power-of-two chunk sizes.
    MeanAgg,
}

impl OptimizerKind {
    pub fn uses_clipping(self) -> bool {
        matches!(
            self,
            OptimizerKind::RcsgdMini | OptimizerKind::ClippedSgd | OptimizerKind::ClippedMom
        )
    }

    pub fn selects_chunk(self) -> bool {
        matches!(self, OptimizerKind::RsgdMini | OptimizerKind::RcsgdMini)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            OptimizerKind::RsgdMini => "rsgd_mini",
            OptimizerKind::RcsgdMini => "rcsgd_mini",
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::ClippedSgd => "clipped_sgd",
            OptimizerKind::Mom => "mom",
            OptimizerKind::ClippedMom => "clipped_mom",
            OptimizerKind::MeanAgg => "mean_agg",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSize {
    Constant { alpha: f64 },
    /// alpha = coeff * T^(-1/2) for the known horizon T.
    HorizonScaled { coeff: f64 },
}

impl StepSize {
    pub fn resolve(&self, horizon: usize) -> f64 {
        match *self {
            StepSize::Constant { alpha } => alpha,
            StepSize::HorizonScaled { coeff } => coeff * (horizon as f64).powf(-0.5),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub label: String,
    pub kind: OptimizerKind,
    /// Batch size K.
    pub batch: usize,
    /// Points per chunk R; the chunk count is M = K / R.
    pub chunk_size: usize,
    pub step: StepSize,
    /// Clipping threshold for the clipped kinds; must be absent otherwise.
    pub lambda: Option<f64>,
    /// Horizon T: the run executes exactly T iterations.
    pub horizon: usize,
    /// Overrides the problem's default starting point when present.
    pub initial_point: Option<Vec<f64>>,
}

impl OptimizerConfig {
    pub fn chunk_count(&self) -> usize {
        self.batch / self.chunk_size
    }

    pub fn validate(&self) -> Result<(), OptimizerError> {
        if self.label.is_empty() {
            return Err(OptimizerError::Invalid("label must not be empty".into()));
        }
        if self.batch == 0 || self.chunk_size == 0 {
            return Err(OptimizerError::Invalid(
                "batch and chunk size must be at least 1".into(),
            ));
        }
        if self.batch % self.chunk_size != 0 {
            return Err(OptimizerError::IndivisibleBatch {
                batch: self.batch,
                chunk_size: self.chunk_size,
            });
        }
        if self.horizon == 0 {
            return Err(OptimizerError::Invalid("horizon must be at least 1".into()));
        }
        let alpha = self.step.resolve(self.horizon);
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(OptimizerError::Invalid(format!(
                "step size must resolve to a positive value, got {alpha}"
            )));
        }
        match (self.kind.uses_clipping(), self.lambda) {
            (true, Some(l)) if l.is_finite() && l > 0.0 => Ok(()),
            (true, other) => Err(OptimizerError::Invalid(format!(
                "optimizer {} needs a positive finite clipping threshold, got {other:?}",
                self.kind.as_str()
            ))),
            (false, None) => Ok(()),
            (false, Some(_)) => Err(OptimizerError::Invalid(format!(
                "optimizer {} does not clip; remove the threshold",
                self.kind.as_str()
            ))),
        }
    }
}

/// One optimizer update: the next iterate plus what the step did.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next: Vec<f64>,
    /// Index of the selected chunk for medoid kinds.
    pub selected: Option<usize>,
    /// Whether the clipping stage actually rescaled (clipped kinds only).
    pub clipped: Option<bool>,
    /// Norm of the applied step vector alpha * g.
    pub step_norm: f64,
}

fn apply_step(x: &[f64], g: &[f64], alpha: f64) -> (Vec<f64>, f64) {
    let steps: Vec<f64> = g.iter().map(|gi| alpha * gi).collect();
    let next = x.iter().zip(&steps).map(|(xi, s)| xi - s).collect();
    (next, robust_norm(&steps))
}

/// Chunk gradients at `x`: vector j is the true gradient plus the k-ordered
/// average of the `chunk_size` per-point draws of chunk j.
pub fn form_chunk_gradients(
    problem: &Problem,
    x: &[f64],
    sampler: &dyn VectorSampler,
    batch: usize,
    chunk_size: usize,
    factory: &RngFactory,
    run: u64,
    step: u64,
) -> Result<VectorSet, OptimizerError> {
    if batch == 0 || chunk_size == 0 || batch % chunk_size != 0 {
        return Err(OptimizerError::IndivisibleBatch { batch, chunk_size });
    }
    if sampler.dim() != problem.dim() {
        return Err(OptimizerError::DimensionMismatch {
            what: "noise",
            expected: problem.dim(),
            got: sampler.dim(),
        });
    }
    let g0 = problem.gradient(x);
    let sums = chunk_noise_sums(sampler, batch / chunk_size, chunk_size, factory, run, step);
    Ok(gradient_set_from_sums(&g0, &sums, chunk_size))
}

fn gradient_set_from_sums(g0: &[f64], sums: &[Vec<f64>], chunk_size: usize) -> VectorSet {
    let r = chunk_size as f64;
    let rows: Vec<Vec<f64>> = sums
        .iter()
        .map(|s| g0.iter().zip(s).map(|(g, si)| g + si / r).collect())
        .collect();
    VectorSet::from_rows(&rows).expect("chunk gradients share the problem dimension")
}

fn medoid_step(x: &[f64], set: &VectorSet, alpha: f64, lambda: Option<f64>) -> StepOutcome {
    let med = medoid(set);
    let g = set.vector(med.index);
    let (g, clipped) = match lambda {
        Some(l) => {
            let (v, c) = clip_unchecked(g, l);
            (v, Some(c))
        }
        None => (g.to_vec(), None),
    };
    let (next, step_norm) = apply_step(x, &g, alpha);
    StepOutcome {
        next,
        selected: Some(med.index),
        clipped,
        step_norm,
    }
}

/// Medoid descent step: selects the medoid chunk gradient and moves against
/// it. Returns the next iterate and the selected index.
pub fn rsgd_mini_step(x: &[f64], set: &VectorSet, alpha: f64) -> (Vec<f64>, usize) {
    let out = medoid_step(x, set, alpha, None);
    (out.next, out.selected.unwrap())
}

/// Clipped medoid descent step. Also reports whether the threshold bit.
pub fn rcsgd_mini_step(
    x: &[f64],
    set: &VectorSet,
    alpha: f64,
    lambda: f64,
) -> (Vec<f64>, usize, bool) {
    let out = medoid_step(x, set, alpha, Some(lambda));
    (out.next, out.selected.unwrap(), out.clipped.unwrap())
}

/// One update of any non-selecting optimizer, given the true gradient and
/// the per-chunk noise sums for this iteration.
///
/// * `Sgd` / `ClippedSgd`: pooled mean of all K per-point gradients, formed
///   as the j-ordered sum of chunk sums divided once by K.
/// * `Mom` / `ClippedMom`: element-wise median over the chunk gradients.
/// * `MeanAgg`: mean of the chunk gradients, formed as the j-ordered sum of
///   chunk averages divided once by M.
pub fn baseline_step(
    kind: OptimizerKind,
    x: &[f64],
    true_grad: &[f64],
    chunk_sums: &[Vec<f64>],
    chunk_size: usize,
    alpha: f64,
    lambda: Option<f64>,
) -> Result<StepOutcome, OptimizerError> {
    if kind.selects_chunk() {
        return Err(OptimizerError::Invalid(format!(
            "{} is not a baseline; use the medoid step",
            kind.as_str()
        )));
    }
    let dim = true_grad.len();
    let r = chunk_size as f64;
    let g = match kind {
        OptimizerKind::Sgd | OptimizerKind::ClippedSgd => {
            let mut pooled = vec![0.0f64; dim];
            for s in chunk_sums {
                for (a, v) in pooled.iter_mut().zip(s) {
                    *a += v;
                }
            }
            let k = (chunk_sums.len() * chunk_size) as f64;
            pooled
                .iter()
                .zip(true_grad)
                .map(|(n, g0)| g0 + n / k)
                .collect::<Vec<f64>>()
        }
        OptimizerKind::MeanAgg => {
            let mut acc = vec![0.0f64; dim];
            for s in chunk_sums {
                for (a, v) in acc.iter_mut().zip(s) {
                    *a += v / r;
                }
            }
            let m = chunk_sums.len() as f64;
            acc.iter()
                .zip(true_grad)
                .map(|(n, g0)| g0 + n / m)
                .collect::<Vec<f64>>()
        }
        OptimizerKind::Mom | OptimizerKind::ClippedMom => {
            let set = gradient_set_from_sums(true_grad, chunk_sums, chunk_size);
            elementwise_median(&set)
        }
        OptimizerKind::RsgdMini | OptimizerKind::RcsgdMini => unreachable!(),
    };
    let (g, clipped) = if kind.uses_clipping() {
        let l = lambda.ok_or_else(|| {
            OptimizerError::Invalid(format!("{} needs a clipping threshold", kind.as_str()))
        })?;
        let (v, c) = clip_unchecked(&g, l);
        (v, Some(c))
    } else {
        (g, None)
    };
    let (next, step_norm) = apply_step(x, &g, alpha);
    Ok(StepOutcome {
        next,
        selected: None,
        clipped,
        step_norm,
    })
}

/// Constant clipping threshold and step size for a known horizon, balancing
/// the high-probability bound: with tau = max(ln(1/delta), 1),
///
/// lambda = max( (8 tau / sqrt(L D1))^(1/(p-1)) T^(1/(3p-2)) sigma^(p/(p-1)),
///               2 sqrt(90 L D1),
///               32^(1/p) sigma T^(1/(3p-2)) )
/// alpha  = sqrt(D1) T^((1-p)/(3p-2)) / (8 lambda sqrt(L) tau)
///
/// For the medoid noise the caller passes p = 2 and sigma = sqrt(B) from the
/// second-moment bound, since the selected gradient has finite variance.
pub fn clipping_schedule(
    horizon: usize,
    delta: f64,
    delta1: f64,
    l: f64,
    sigma: f64,
    p: f64,
) -> Result<(f64, f64), OptimizerError> {
    let bad = |msg: String| Err(OptimizerError::Invalid(msg));
    if horizon == 0 {
        return bad("horizon must be at least 1".into());
    }
    if !(delta > 0.0 && delta < 1.0) {
        return bad(format!("delta must lie in (0, 1), got {delta}"));
    }
    if !(delta1.is_finite() && delta1 > 0.0) {
        return bad(format!("delta1 must be positive, got {delta1}"));
    }
    if !(l.is_finite() && l > 0.0) {
        return bad(format!("smoothness must be positive, got {l}"));
    }
    if !(sigma.is_finite() && sigma >= 0.0) {
        return bad(format!("sigma must be non-negative, got {sigma}"));
    }
    if !(p.is_finite() && p > 1.0) {
        return bad(format!("moment order must exceed 1, got {p}"));
    }
    let t = horizon as f64;
    let tau = (1.0 / delta).ln().max(1.0);
    let t_pow = t.powf(1.0 / (3.0 * p - 2.0));
    let term1 = (8.0 * tau / (l * delta1).sqrt()).powf(1.0 / (p - 1.0))
        * t_pow
        * sigma.powf(p / (p - 1.0));
    let term2 = 2.0 * (90.0 * l * delta1).sqrt();
    let term3 = 32.0f64.powf(1.0 / p) * sigma * t_pow;
    let lambda = term1.max(term2).max(term3);
    let alpha = delta1.sqrt() * t.powf((1.0 - p) / (3.0 * p - 2.0)) / (8.0 * lambda * l.sqrt() * tau);
    Ok((lambda, alpha))
}

/// Per-iteration record: the iterate before the step, its exact loss and
/// squared gradient norm, and what the step taken from it did. The final
/// row of a completed run carries no step fields.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRow {
    pub iterate: Vec<f64>,
    pub loss: f64,
    pub grad_norm_sq: f64,
    pub selected: Option<usize>,
    pub clipped: Option<bool>,
    pub step_norm: Option<f64>,
}

/// Full trajectory of one run. A completed run holds horizon + 1 rows
/// (including the starting point); a diverged run truncates earlier and
/// sets the flag.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub label: String,
    pub run_id: u64,
    pub horizon: usize,
    pub rows: Vec<IterationRow>,
    pub diverged: bool,
    /// Wall time spent in optimizer steps, excluding instrumentation.
    pub step_seconds: f64,
}

impl RunRecord {
    pub fn is_complete(&self) -> bool {
        !self.diverged && self.rows.len() == self.horizon + 1
    }

    pub fn final_iterate(&self) -> &[f64] {
        &self.rows.last().expect("runs record at least x0").iterate
    }

    pub fn final_loss(&self) -> f64 {
        self.rows.last().expect("runs record at least x0").loss
    }

    /// (1/T) * sum over t = 0..=T of |grad F(x_t)|^2, the stationarity
    /// metric. Uses the configured horizon T as the divisor.
    pub fn time_avg_grad_norm_sq(&self) -> f64 {
        self.rows.iter().map(|r| r.grad_norm_sq).sum::<f64>() / self.horizon as f64
    }

    pub fn max_iterate_norm(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| robust_norm(&r.iterate))
            .fold(0.0, f64::max)
    }
}

fn iterate_diverged(x: &[f64]) -> bool {
    x.iter().any(|v| !v.is_finite()) || robust_norm(x) > DIVERGENCE_NORM_LIMIT
}

/// Executes `cfg.horizon` iterations from the initial point, recording every
/// iterate. Deterministic given `(factory, run_id, cfg)`: same inputs, same
/// record, bit for bit.
pub fn run(
    problem: &Problem,
    sampler: &dyn VectorSampler,
    cfg: &OptimizerConfig,
    factory: &RngFactory,
    run_id: u64,
) -> Result<RunRecord, OptimizerError> {
    cfg.validate()?;
    if sampler.dim() != problem.dim() {
        return Err(OptimizerError::DimensionMismatch {
            what: "noise",
            expected: problem.dim(),
            got: sampler.dim(),
        });
    }
    let x0 = cfg
        .initial_point
        .clone()
        .unwrap_or_else(|| problem.initial_point());
    if x0.len() != problem.dim() {
        return Err(OptimizerError::DimensionMismatch {
            what: "initial point",
            expected: problem.dim(),
            got: x0.len(),
        });
    }
    let alpha = cfg.step.resolve(cfg.horizon);
    let m = cfg.chunk_count();
    let mut rows = Vec::with_capacity(cfg.horizon + 1);
    let mut diverged = false;
    let mut step_seconds = 0.0f64;
    let mut x = x0;

    for t in 0..cfg.horizon {
        let g0 = problem.gradient(&x);
        let loss = problem.value(&x);
        let grad_norm_sq = g0.iter().map(|g| g * g).sum::<f64>();

        let started = Instant::now();
        let sums = chunk_noise_sums(sampler, m, cfg.chunk_size, factory, run_id, t as u64);
        let outcome = if cfg.kind.selects_chunk() {
            let set = gradient_set_from_sums(&g0, &sums, cfg.chunk_size);
            medoid_step(&x, &set, alpha, cfg.lambda)
        } else {
            baseline_step(
                cfg.kind,
                &x,
                &g0,
                &sums,
                cfg.chunk_size,
                alpha,
                cfg.lambda,
            )?
        };
        step_seconds += started.elapsed().as_secs_f64();

        rows.push(IterationRow {
            iterate: x,
            loss,
            grad_norm_sq,
            selected: outcome.selected,
            clipped: outcome.clipped,
            step_norm: Some(outcome.step_norm),
        });

        if iterate_diverged(&outcome.next) {
            diverged = true;
            x = outcome.next;
            break;
        }
        x = outcome.next;
    }

    if !diverged {
        let g0 = problem.gradient(&x);
        rows.push(IterationRow {
            loss: problem.value(&x),
            grad_norm_sq: g0.iter().map(|g| g * g).sum::<f64>(),
            iterate: x,
            selected: None,
            clipped: None,
            step_norm: None,
        });
    }

    Ok(RunRecord {
        label: cfg.label.clone(),
        run_id,
        horizon: cfg.horizon,
        rows,
        diverged,
        step_seconds,
    })
}
