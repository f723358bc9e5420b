//! Experiment configuration: a fixed JSON schema, eager validation with
//! field-level messages, and a content hash recorded in every artifact.

use crate::HarnessError;
use rsgd_core::noise::NoiseModel;
use rsgd_core::optimizers::{clipping_schedule, OptimizerConfig, OptimizerKind, StepSize};
use rsgd_core::problems::Problem;
use rsgd_core::theory::{second_moment_bound, TheoryParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub const DEFAULT_GAMMA: f64 = 0.25;
pub const DEFAULT_THETA: f64 = 0.5;

fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}

fn default_theta() -> f64 {
    DEFAULT_THETA
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    TanhQuadratic,
    Quadratic { dim: usize, condition: f64 },
}

impl ProblemConfig {
    pub fn build(&self) -> Result<Problem, HarnessError> {
        match *self {
            ProblemConfig::TanhQuadratic => Ok(Problem::tanh_quadratic()),
            ProblemConfig::Quadratic { dim, condition } => Problem::quadratic(dim, condition)
                .map_err(|e| HarnessError::Config(format!("problem: {e}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ClipConfig {
    /// Fixed threshold.
    Constant { lambda: f64 },
    /// Horizon-balanced threshold and step size with failure probability
    /// `delta`; the remaining inputs come from the problem and noise model.
    Schedule { delta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerEntry {
    pub label: String,
    pub kind: OptimizerKind,
    /// Batch size K; must match across all optimizers of the experiment.
    pub batch: usize,
    /// Points per chunk R with K = M * R exactly.
    pub chunk_size: usize,
    /// Required unless `clip` is a schedule (which fixes the step itself).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<StepSize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip: Option<ClipConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub noise: NoiseModel,
    pub optimizers: Vec<OptimizerEntry>,
    /// Monte Carlo run count; runs are paired across optimizers.
    pub runs: usize,
    pub master_seed: u64,
    /// Horizon T; every run executes exactly T iterations.
    pub horizon: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_theta")]
    pub theta: f64,
    /// When set, reject step sizes above 1/(2L).
    #[serde(default)]
    pub require_guarantee: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_point: Option<Vec<f64>>,
}

/// A validated experiment with all thresholds and step sizes resolved.
#[derive(Debug, Clone)]
pub struct ResolvedExperiment {
    pub problem: Problem,
    pub noise: NoiseModel,
    pub optimizers: Vec<OptimizerConfig>,
    pub runs: usize,
    pub master_seed: u64,
    pub horizon: usize,
    pub gamma: f64,
    pub theta: f64,
    pub output_dir: PathBuf,
    pub config_hash: String,
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, HarnessError> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, HarnessError> {
    let mut de = serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(&mut de)
        .map_err(|e| HarnessError::Config(format!("config field `{}`: {}", e.path(), e.inner())))
}

/// Canonical serialization hash, recorded in every output artifact.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let bytes = serde_json::to_vec(cfg).expect("config serializes");
    let digest = Sha256::digest(&bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn label_is_safe(label: &str) -> bool {
    !label.is_empty()
        && label
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

impl ExperimentConfig {
    pub fn resolve(&self) -> Result<ResolvedExperiment, HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        if !(self.gamma > 0.0 && self.gamma < 0.5) {
            return bad(format!("gamma must lie in (0, 1/2), got {}", self.gamma));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return bad(format!("theta must lie in (0, 1), got {}", self.theta));
        }
        let problem = self.problem.build()?;
        self.noise
            .validate()
            .map_err(|e| HarnessError::Config(format!("noise: {e}")))?;
        if self.noise.dim() != problem.dim() {
            return bad(format!(
                "noise dimension {} does not match problem dimension {}",
                self.noise.dim(),
                problem.dim()
            ));
        }
        if let Some(x0) = &self.initial_point {
            if x0.len() != problem.dim() {
                return bad(format!(
                    "initial_point has dimension {} but the problem has dimension {}",
                    x0.len(),
                    problem.dim()
                ));
            }
            if x0.iter().any(|v| !v.is_finite()) {
                return bad("initial_point must be finite".into());
            }
        }
        if self.optimizers.is_empty() {
            return bad("at least one optimizer is required".into());
        }
        let batch = self.optimizers[0].batch;
        let mut labels = std::collections::HashSet::new();
        let mut resolved = Vec::with_capacity(self.optimizers.len());
        for entry in &self.optimizers {
            if !label_is_safe(&entry.label) {
                return bad(format!(
                    "label `{}` must be non-empty and use only [A-Za-z0-9._-]",
                    entry.label
                ));
            }
            if !labels.insert(entry.label.clone()) {
                return bad(format!("duplicate optimizer label `{}`", entry.label));
            }
            if entry.batch != batch {
                return bad(format!(
                    "optimizer `{}` has batch {} but the experiment batch is {}; all optimizers share one batch so comparisons stay paired",
                    entry.label, entry.batch, batch
                ));
            }
            resolved.push(self.resolve_entry(entry, &problem)?);
        }
        let output_dir = self
            .output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("out"));
        Ok(ResolvedExperiment {
            problem,
            noise: self.noise.clone(),
            optimizers: resolved,
            runs: self.runs,
            master_seed: self.master_seed,
            horizon: self.horizon,
            gamma: self.gamma,
            theta: self.theta,
            output_dir,
            config_hash: config_hash(self),
        })
    }

    fn resolve_entry(
        &self,
        entry: &OptimizerEntry,
        problem: &Problem,
    ) -> Result<OptimizerConfig, HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        let (step, lambda) = match &entry.clip {
            Some(ClipConfig::Schedule { delta }) => {
                if !entry.kind.uses_clipping() {
                    return bad(format!(
                        "optimizer `{}`: schedule clipping requires a clipped kind",
                        entry.label
                    ));
                }
                if entry.step.is_some() {
                    return bad(format!(
                        "optimizer `{}`: the clipping schedule fixes the step size; remove `step`",
                        entry.label
                    ));
                }
                let (sigma, p) = self.noise.declared_sigma_p().ok_or_else(|| {
                    HarnessError::Config(format!(
                        "optimizer `{}`: schedule clipping needs a noise model with an analytic moment (pareto_amplitude, gaussian, or none)",
                        entry.label
                    ))
                })?;
                if entry.chunk_size == 0 || entry.batch == 0 || entry.batch % entry.chunk_size != 0
                {
                    return bad(format!(
                        "optimizer `{}`: batch {} must be divisible by chunk size {}",
                        entry.label, entry.batch, entry.chunk_size
                    ));
                }
                let params = TheoryParams {
                    gamma: self.gamma,
                    theta: self.theta,
                    p,
                    sigma,
                    chunk_count: entry.batch / entry.chunk_size,
                    chunk_size: entry.chunk_size,
                };
                let b = second_moment_bound(&params).map_err(|e| {
                    HarnessError::Config(format!("optimizer `{}`: {e}", entry.label))
                })?;
                let x0 = self
                    .initial_point
                    .clone()
                    .unwrap_or_else(|| problem.initial_point());
                let delta1 = problem.value(&x0) - problem.optimal_value();
                let (lambda, alpha) = clipping_schedule(
                    self.horizon,
                    *delta,
                    delta1,
                    problem.smoothness(),
                    b.sqrt(),
                    2.0,
                )
                .map_err(|e| HarnessError::Config(format!("optimizer `{}`: {e}", entry.label)))?;
                (StepSize::Constant { alpha }, Some(lambda))
            }
            Some(ClipConfig::Constant { lambda }) => {
                let step = entry.step.ok_or_else(|| {
                    HarnessError::Config(format!("optimizer `{}`: missing `step`", entry.label))
                })?;
                (step, Some(*lambda))
            }
            None => {
                let step = entry.step.ok_or_else(|| {
                    HarnessError::Config(format!("optimizer `{}`: missing `step`", entry.label))
                })?;
                (step, None)
            }
        };
        let cfg = OptimizerConfig {
            label: entry.label.clone(),
            kind: entry.kind,
            batch: entry.batch,
            chunk_size: entry.chunk_size,
            step,
            lambda,
            horizon: self.horizon,
            initial_point: self.initial_point.clone(),
        };
        cfg.validate()
            .map_err(|e| HarnessError::Config(format!("optimizer `{}`: {e}", entry.label)))?;
        if self.require_guarantee && !matches!(entry.clip, Some(ClipConfig::Schedule { .. })) {
            let alpha = cfg.step.resolve(self.horizon);
            let limit = 1.0 / (2.0 * problem.smoothness());
            if alpha > limit {
                return bad(format!(
                    "optimizer `{}`: step size {alpha} exceeds the guarantee limit 1/(2L) = {limit}",
                    entry.label
                ));
            }
        }
        Ok(cfg)
    }
}
