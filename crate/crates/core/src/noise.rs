//! Symmetric heavy-tailed random-vector generators.
//!
//! Each model declares the moment order it keeps finite, and the heavy-tailed
//! kinds have infinite variance. Sampling is addressed through
//! [`StreamKey`] coordinates so that every draw is reproducible and
//! independent across coordinates.

use crate::stream::{RngFactory, StreamKey};
use crate::util::block_results;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Pareto, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Gap between the Pareto tail exponent and the declared moment order: the
/// amplitude has shape `p + PARETO_TAIL_MARGIN`, keeping the p-th moment
/// finite while the variance stays infinite for p < 2.
pub const PARETO_TAIL_MARGIN: f64 = 0.01;

#[derive(Debug, Error, PartialEq)]
pub enum NoiseError {
    #[error("noise dimension must be at least 1")]
    ZeroDimension,
    #[error("{field} must be finite and {requirement}, got {value}")]
    InvalidParameter {
        field: &'static str,
        requirement: &'static str,
        value: f64,
    },
}

fn check(
    field: &'static str,
    requirement: &'static str,
    value: f64,
    ok: bool,
) -> Result<(), NoiseError> {
    if value.is_finite() && ok {
        Ok(())
    } else {
        Err(NoiseError::InvalidParameter {
            field,
            requirement,
            value,
        })
    }
}

/// A zero-mean symmetric noise distribution on R^d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    /// Zero vector; the noiseless control.
    None { dim: usize },
    /// Independent N(0, scale^2) coordinates; the light-tailed control.
    Gaussian { dim: usize, scale: f64 },
    /// scale * z / |u| with z a standard Gaussian vector and u an independent
    /// standard Gaussian scalar. The division couples the coordinates, so the
    /// tails are heavy and correlated across dimensions.
    MultivariateCauchy { dim: usize, scale: f64 },
    /// Independent Student-t coordinates with `tail_index` degrees of
    /// freedom, times `scale`. Moments of order below `tail_index` are
    /// finite.
    StudentT {
        dim: usize,
        scale: f64,
        tail_index: f64,
    },
    /// A Pareto-distributed amplitude along a uniform direction on the unit
    /// sphere, calibrated so that E[|nu|^p] = sigma^p exactly while the
    /// variance is infinite for p < 2.
    ParetoAmplitude { dim: usize, sigma: f64, p: f64 },
}

impl NoiseModel {
    pub fn none(dim: usize) -> Result<Self, NoiseError> {
        let m = NoiseModel::None { dim };
        m.validate()?;
        Ok(m)
    }

    pub fn gaussian(dim: usize, scale: f64) -> Result<Self, NoiseError> {
        let m = NoiseModel::Gaussian { dim, scale };
        m.validate()?;
        Ok(m)
    }

    pub fn multivariate_cauchy(dim: usize, scale: f64) -> Result<Self, NoiseError> {
        let m = NoiseModel::MultivariateCauchy { dim, scale };
        m.validate()?;
        Ok(m)
    }

    pub fn student_t(dim: usize, scale: f64, tail_index: f64) -> Result<Self, NoiseError> {
        let m = NoiseModel::StudentT {
            dim,
            scale,
            tail_index,
        };
        m.validate()?;
        Ok(m)
    }

    /// `sigma` is the exact p-th moment root: E[|nu|^p] = sigma^p.
    pub fn pareto_amplitude(dim: usize, sigma: f64, p: f64) -> Result<Self, NoiseError> {
        let m = NoiseModel::ParetoAmplitude { dim, sigma, p };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), NoiseError> {
        if self.dim() == 0 {
            return Err(NoiseError::ZeroDimension);
        }
        match *self {
            NoiseModel::None { .. } => Ok(()),
            NoiseModel::Gaussian { scale, .. } | NoiseModel::MultivariateCauchy { scale, .. } => {
                check("scale", "non-negative", scale, scale >= 0.0)
            }
            NoiseModel::StudentT {
                scale, tail_index, ..
            } => {
                check("scale", "non-negative", scale, scale >= 0.0)?;
                check("tail_index", "positive", tail_index, tail_index > 0.0)
            }
            NoiseModel::ParetoAmplitude { sigma, p, .. } => {
                check("sigma", "non-negative", sigma, sigma >= 0.0)?;
                check("p", "in (1, 2]", p, p > 1.0 && p <= 2.0)
            }
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            NoiseModel::None { dim }
            | NoiseModel::Gaussian { dim, .. }
            | NoiseModel::MultivariateCauchy { dim, .. }
            | NoiseModel::StudentT { dim, .. }
            | NoiseModel::ParetoAmplitude { dim, .. } => dim,
        }
    }

    /// Pareto amplitude shape (tail exponent); only for `ParetoAmplitude`.
    pub fn pareto_shape(&self) -> Option<f64> {
        match *self {
            NoiseModel::ParetoAmplitude { p, .. } => Some(p + PARETO_TAIL_MARGIN),
            _ => None,
        }
    }

    /// Multiplier applied to the raw Pareto amplitude so the declared p-th
    /// moment calibration holds.
    fn pareto_multiplier(&self) -> Option<f64> {
        match *self {
            NoiseModel::ParetoAmplitude { sigma, p, .. } => {
                let a = p + PARETO_TAIL_MARGIN;
                Some(sigma * ((a - p) / a).powf(1.0 / p))
            }
            _ => None,
        }
    }

    /// Exact E[|nu|^q] where a closed form exists: ParetoAmplitude for
    /// q below its tail exponent, Gaussian for q = 2, and the zero model.
    pub fn analytic_norm_moment(&self, q: f64) -> Option<f64> {
        match *self {
            NoiseModel::None { .. } => Some(0.0),
            NoiseModel::ParetoAmplitude { .. } => {
                let a = self.pareto_shape()?;
                if q >= a {
                    return None;
                }
                let c = self.pareto_multiplier()?;
                Some(c.powf(q) * a / (a - q))
            }
            NoiseModel::Gaussian { dim, scale } if q == 2.0 => {
                Some(scale * scale * dim as f64)
            }
            _ => None,
        }
    }

    /// The `(sigma, p)` pair for which E[|nu|^p] <= sigma^p holds with a
    /// known constant, used when theory-side bounds need an analytic scale.
    pub fn declared_sigma_p(&self) -> Option<(f64, f64)> {
        match *self {
            NoiseModel::None { .. } => Some((0.0, 2.0)),
            NoiseModel::ParetoAmplitude { sigma, p, .. } => Some((sigma, p)),
            NoiseModel::Gaussian { dim, scale } => Some((scale * (dim as f64).sqrt(), 2.0)),
            _ => None,
        }
    }

    /// One draw from the given stream.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match *self {
            NoiseModel::None { dim } => vec![0.0; dim],
            NoiseModel::Gaussian { dim, scale } => {
                if scale == 0.0 {
                    return vec![0.0; dim];
                }
                (0..dim)
                    .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            }
            NoiseModel::MultivariateCauchy { dim, scale } => {
                if scale == 0.0 {
                    return vec![0.0; dim];
                }
                let z: Vec<f64> = (0..dim)
                    .map(|_| rng.sample::<f64, _>(StandardNormal))
                    .collect();
                let mut u: f64 = rng.sample(StandardNormal);
                while u == 0.0 {
                    u = rng.sample(StandardNormal);
                }
                let f = scale / u.abs();
                z.into_iter().map(|zi| f * zi).collect()
            }
            NoiseModel::StudentT {
                dim,
                scale,
                tail_index,
            } => {
                if scale == 0.0 {
                    return vec![0.0; dim];
                }
                let dist = StudentT::new(tail_index).expect("validated tail_index");
                (0..dim).map(|_| scale * rng.sample::<f64, _>(&dist)).collect()
            }
            NoiseModel::ParetoAmplitude { dim, .. } => {
                let c = self.pareto_multiplier().expect("pareto kind");
                if c == 0.0 {
                    return vec![0.0; dim];
                }
                let shape = self.pareto_shape().expect("pareto kind");
                let amp = Pareto::new(1.0, shape).expect("validated shape");
                let a: f64 = rng.sample(amp);
                // uniform direction on the unit sphere
                let mut dir: Vec<f64> = (0..dim)
                    .map(|_| rng.sample::<f64, _>(StandardNormal))
                    .collect();
                let mut n = crate::aggregation::robust_norm(&dir);
                while n == 0.0 {
                    for x in dir.iter_mut() {
                        *x = rng.sample(StandardNormal);
                    }
                    n = crate::aggregation::robust_norm(&dir);
                }
                let f = c * a / n;
                dir.into_iter().map(|x| f * x).collect()
            }
        }
    }
}

/// Anything that can produce one random vector per stream coordinate. The
/// optimizer loops and the theory verifiers are written against this, so
/// tests can pin exact draws.
pub trait VectorSampler: Sync {
    fn dim(&self) -> usize;
    fn sample_at(&self, factory: &RngFactory, key: StreamKey) -> Vec<f64>;
}

impl VectorSampler for NoiseModel {
    fn dim(&self) -> usize {
        NoiseModel::dim(self)
    }

    fn sample_at(&self, factory: &RngFactory, key: StreamKey) -> Vec<f64> {
        self.sample(&mut factory.stream(key))
    }
}

/// Adds a constant offset to every draw, breaking symmetry. This is the
/// negative control for the zero-mean checks; it is not a valid noise model
/// for the optimizer guarantees.
#[derive(Debug, Clone)]
pub struct Shifted<S> {
    pub inner: S,
    pub offset: Vec<f64>,
}

impl<S: VectorSampler> VectorSampler for Shifted<S> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn sample_at(&self, factory: &RngFactory, key: StreamKey) -> Vec<f64> {
        let mut v = self.inner.sample_at(factory, key);
        for (x, o) in v.iter_mut().zip(&self.offset) {
            *x += o;
        }
        v
    }
}

/// Per-chunk sums of per-point draws: entry j is the k-ordered sum of the
/// `chunk_size` draws at coordinates `(run, step, j*chunk_size + k)`.
/// Chunk averages and pooled batch means both divide these sums, which is
/// what makes the two reductions agree bit-exactly for power-of-two chunk
/// sizes.
pub fn chunk_noise_sums(
    sampler: &dyn VectorSampler,
    chunk_count: usize,
    chunk_size: usize,
    factory: &RngFactory,
    run: u64,
    step: u64,
) -> Vec<Vec<f64>> {
    let dim = sampler.dim();
    (0..chunk_count)
        .map(|j| {
            let mut acc = vec![0.0f64; dim];
            for k in 0..chunk_size {
                let key =
                    StreamKey::chunk_sample(run, step, j as u64, k as u64, chunk_size as u64);
                let draw = sampler.sample_at(factory, key);
                for (a, v) in acc.iter_mut().zip(&draw) {
                    *a += v;
                }
            }
            acc
        })
        .collect()
}

/// Chunk noises: each chunk sum divided by the chunk size.
pub fn chunk_noises(
    sampler: &dyn VectorSampler,
    chunk_count: usize,
    chunk_size: usize,
    factory: &RngFactory,
    run: u64,
    step: u64,
) -> Vec<Vec<f64>> {
    let r = chunk_size as f64;
    chunk_noise_sums(sampler, chunk_count, chunk_size, factory, run, step)
        .into_iter()
        .map(|mut s| {
            for x in s.iter_mut() {
                *x /= r;
            }
            s
        })
        .collect()
}

/// Empirical statistics of |nu|^q over independent draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentStats {
    pub mean: f64,
    /// Standard error of the mean, from the sample standard deviation.
    pub standard_error: f64,
    pub draws: u64,
}

/// (1/n) sum of |nu_i|^q over n fresh draws at coordinates
/// `(run, 0, i)`. Deterministic for fixed coordinates and thread-safe.
pub fn empirical_moment(
    model: &NoiseModel,
    q: f64,
    n_draws: u64,
    factory: &RngFactory,
    run: u64,
) -> f64 {
    empirical_moment_stats(model, q, n_draws, factory, run).mean
}

pub fn empirical_moment_stats(
    model: &NoiseModel,
    q: f64,
    n_draws: u64,
    factory: &RngFactory,
    run: u64,
) -> MomentStats {
    assert!(n_draws >= 1, "need at least one draw");
    assert!(q > 0.0, "moment order must be positive");
    let blocks = block_results(n_draws, 8192, |range| {
        let mut sum = 0.0f64;
        let mut sum_sq = 0.0f64;
        for i in range {
            let v = model.sample_at(factory, StreamKey::new(run, 0, i));
            let x = crate::aggregation::robust_norm(&v).powf(q);
            sum += x;
            sum_sq += x * x;
        }
        (sum, sum_sq)
    });
    let (sum, sum_sq) = blocks
        .into_iter()
        .fold((0.0, 0.0), |(a, b), (s, ss)| (a + s, b + ss));
    let n = n_draws as f64;
    let mean = sum / n;
    let standard_error = if n_draws > 1 {
        (((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0) / n).sqrt()
    } else {
        0.0
    };
    MomentStats {
        mean,
        standard_error,
        draws: n_draws,
    }
}
