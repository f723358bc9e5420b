//! Closed-form constants and bounds for the medoid noise analysis, plus the
//! brute-force / Monte Carlo verifiers that check them against sampled data:
//! the dispersion constant, the binomial Chernoff exponent, chunk moment and
//! tail bounds, the medoid second-moment bound, and the stationarity bound
//! it implies for the optimizer.

use crate::aggregation::{medoid, norm, VectorSet};
use crate::noise::{chunk_noises, VectorSampler};
use crate::stream::{RngFactory, StreamKey};
use crate::util::block_results;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TheoryError {
    #[error("{field} must satisfy {requirement}, got {value}")]
    OutOfRange {
        field: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error(
        "chunk count M = {m} is too small: the second-moment bound needs M > 2/(p*theta*gamma) = {threshold}"
    )]
    ChunkCountTooSmall { m: usize, threshold: f64 },
}

fn require(
    field: &'static str,
    requirement: &'static str,
    value: f64,
    ok: bool,
) -> Result<(), TheoryError> {
    if value.is_finite() && ok {
        Ok(())
    } else {
        Err(TheoryError::OutOfRange {
            field,
            requirement,
            value,
        })
    }
}

/// Parameters of the medoid moment bounds: the far-fraction gamma, the tail
/// split theta, the per-point moment order p and scale sigma, the chunk
/// count M and the points per chunk R.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryParams {
    pub gamma: f64,
    pub theta: f64,
    pub p: f64,
    pub sigma: f64,
    pub chunk_count: usize,
    pub chunk_size: usize,
}

impl TheoryParams {
    pub fn validate(&self) -> Result<(), TheoryError> {
        require("gamma", "in (0, 1/2)", self.gamma, self.gamma > 0.0 && self.gamma < 0.5)?;
        require("theta", "in (0, 1)", self.theta, self.theta > 0.0 && self.theta < 1.0)?;
        require("p", "in (1, 2]", self.p, self.p > 1.0 && self.p <= 2.0)?;
        require("sigma", "non-negative", self.sigma, self.sigma >= 0.0)?;
        require("chunk_count", ">= 1", self.chunk_count as f64, self.chunk_count >= 1)?;
        require("chunk_size", ">= 1", self.chunk_size as f64, self.chunk_size >= 1)?;
        Ok(())
    }

    /// The chunk-count threshold 2/(p*theta*gamma) that the second-moment
    /// bound requires M to exceed.
    pub fn min_chunk_count(&self) -> f64 {
        2.0 / (self.p * self.theta * self.gamma)
    }

    fn require_chunk_count(&self) -> Result<(), TheoryError> {
        let threshold = self.min_chunk_count();
        if (self.chunk_count as f64) > threshold {
            Ok(())
        } else {
            Err(TheoryError::ChunkCountTooSmall {
                m: self.chunk_count,
                threshold,
            })
        }
    }
}

/// Dispersion constant C_{gamma,M} = ((3-2*gamma)*M + 3) / ((1-2*gamma)*M).
/// Strictly decreasing in M with limit (3-2*gamma)/(1-2*gamma).
pub fn c_gamma_m(gamma: f64, m: usize) -> Result<f64, TheoryError> {
    require("gamma", "in (0, 1/2)", gamma, gamma > 0.0 && gamma < 0.5)?;
    require("m", ">= 1", m as f64, m >= 1)?;
    let mf = m as f64;
    Ok(((3.0 - 2.0 * gamma) * mf + 3.0) / ((1.0 - 2.0 * gamma) * mf))
}

/// Binomial Chernoff exponent psi(gamma, p) =
/// (1-gamma) ln((1-gamma)/(1-p)) + gamma ln(gamma/p), for 0 < p < gamma < 1/2.
/// This is the KL divergence between Bernoulli(gamma) and Bernoulli(p), so it
/// is strictly positive on the domain.
pub fn psi(gamma: f64, p: f64) -> Result<f64, TheoryError> {
    require("gamma", "in (0, 1/2)", gamma, gamma > 0.0 && gamma < 0.5)?;
    require("p", "in (0, gamma)", p, p > 0.0 && p < gamma)?;
    Ok((1.0 - gamma) * ((1.0 - gamma) / (1.0 - p)).ln() + gamma * (gamma / p).ln())
}

/// Moment bound for one chunk of R averaged points: sigma^p / R^(p-1).
pub fn chunk_moment_bound(sigma: f64, p: f64, r: usize) -> Result<f64, TheoryError> {
    require("sigma", "positive", sigma, sigma > 0.0)?;
    require("p", "> 1", p, p > 1.0)?;
    require("r", ">= 1", r as f64, r >= 1)?;
    Ok(sigma.powf(p) / (r as f64).powf(p - 1.0))
}

/// Markov tail for one chunk noise: min(1, sigma^p / (R^(p-1) u^p)).
pub fn tail_bound_chunk(sigma: f64, p: f64, r: usize, u: f64) -> Result<f64, TheoryError> {
    require("u", "positive", u, u > 0.0)?;
    let bound = chunk_moment_bound(sigma, p, r)? / u.powf(p);
    Ok(bound.min(1.0))
}

/// Tail threshold q above which the medoid tail switches to the fast decay:
/// q = sigma ((3-2g)M + 3) / (R^((p-1)/p) ((1-2g)M) ((1-g)^(1-g) g^g)^(1/((1-t)pg))).
pub fn q_threshold(params: &TheoryParams) -> Result<f64, TheoryError> {
    params.validate()?;
    let TheoryParams {
        gamma,
        theta,
        p,
        sigma,
        chunk_count,
        chunk_size,
    } = *params;
    let mf = chunk_count as f64;
    let rf = chunk_size as f64;
    let numerator = sigma * ((3.0 - 2.0 * gamma) * mf + 3.0);
    let entropy = (1.0 - gamma).powf(1.0 - gamma) * gamma.powf(gamma);
    let denominator =
        rf.powf((p - 1.0) / p) * ((1.0 - 2.0 * gamma) * mf) * entropy.powf(1.0 / ((1.0 - theta) * p * gamma));
    Ok(numerator / denominator)
}

/// Second-moment bound for the medoid of M chunk noises:
/// B = q^2 (1 + 2/(p*theta*gamma*M - 2)), valid for M > 2/(p*theta*gamma).
/// Scales as R^(-2(p-1)/p) in the chunk size.
pub fn second_moment_bound(params: &TheoryParams) -> Result<f64, TheoryError> {
    params.validate()?;
    params.require_chunk_count()?;
    let q = q_threshold(params)?;
    let x = params.p * params.theta * params.gamma * params.chunk_count as f64;
    Ok(q * q * (1.0 + 2.0 / (x - 2.0)))
}

/// Stationarity bound for the medoid-descent loop after T iterations with
/// step size alpha <= 1/(2L): 2 F(x0) / (alpha T) + 2 L alpha B.
pub fn theorem3_bound(
    f_x0: f64,
    alpha: f64,
    horizon: usize,
    l: f64,
    params: &TheoryParams,
) -> Result<f64, TheoryError> {
    require("f_x0", "finite", f_x0, true)?;
    require("l", "positive", l, l > 0.0)?;
    require("alpha", "positive", alpha, alpha > 0.0)?;
    require("alpha", "<= 1/(2L)", alpha, alpha <= 1.0 / (2.0 * l))?;
    require("horizon", ">= 1", horizon as f64, horizon >= 1)?;
    let b = second_moment_bound(params)?;
    Ok(2.0 * f_x0 / (alpha * horizon as f64) + 2.0 * l * alpha * b)
}

/// Result of the far-points dispersion check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaReport {
    pub trials: u64,
    /// Trials where the medoid was far from z yet at most gamma*M points
    /// were far: expected to be exactly 0.
    pub violations: u64,
    /// Trials where the antecedent was false, passing vacuously.
    pub vacuous: u64,
    /// Distance-sum ties observed; expected 0 under continuous sampling.
    pub ties: u64,
}

/// Brute-force check of the dispersion lemma: sample M Gaussian points, a
/// Gaussian reference z, and a radius r; whenever the medoid is farther from
/// z than C_{gamma,M} * r, strictly more than gamma*M points must be farther
/// from z than r. Radii are drawn so roughly two thirds of the trials make
/// the antecedent true.
pub fn verify_lemma_farenough(
    chunk_count: usize,
    dim: usize,
    gamma: f64,
    trials: u64,
    factory: &RngFactory,
    stream_id: u64,
) -> Result<LemmaReport, TheoryError> {
    let c = c_gamma_m(gamma, chunk_count)?;
    require("dim", ">= 1", dim as f64, dim >= 1)?;
    let blocks = block_results(trials, 512, |range| {
        let mut violations = 0u64;
        let mut vacuous = 0u64;
        let mut ties = 0u64;
        for trial in range {
            let mut rng = factory.stream(StreamKey::new(stream_id, trial, 0));
            let rows: Vec<Vec<f64>> = (0..chunk_count)
                .map(|_| (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
                .collect();
            let z: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let fraction: f64 = rng.random_range(0.0..1.5);
            let set = VectorSet::from_rows(&rows).expect("valid trial set");
            let med = medoid(&set);
            if med.tie_detected {
                ties += 1;
            }
            let dist_mz = distance(set.vector(med.index), &z);
            if dist_mz == 0.0 {
                vacuous += 1;
                continue;
            }
            let r = fraction * dist_mz / c;
            if r <= 0.0 || !(dist_mz > c * r) {
                vacuous += 1;
                continue;
            }
            let far = rows.iter().filter(|v| distance(v, &z) > r).count();
            if !(far as f64 > gamma * chunk_count as f64) {
                violations += 1;
            }
        }
        (violations, vacuous, ties)
    });
    let (violations, vacuous, ties) = blocks
        .into_iter()
        .fold((0, 0, 0), |(a, b, c), (x, y, z)| (a + x, b + y, c + z));
    Ok(LemmaReport {
        trials,
        violations,
        vacuous,
        ties,
    })
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Result of the zero-mean medoid check.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroMeanReport {
    pub mean: Vec<f64>,
    pub mean_norm: f64,
    /// Central-limit band 5 * sqrt(trace(cov) / n).
    pub band: f64,
    pub pass: bool,
    pub draws: u64,
    pub ties: u64,
}

/// Draws `n_draws` independent M-sets of chunk noises, takes the medoid of
/// each, and checks that the empirical mean lands inside a five-sigma
/// central-limit band. Valid because the medoid has finite second moment
/// even when the raw noise does not.
pub fn verify_zero_mean(
    sampler: &dyn VectorSampler,
    chunk_count: usize,
    chunk_size: usize,
    n_draws: u64,
    factory: &RngFactory,
    stream_id: u64,
) -> ZeroMeanReport {
    let dim = sampler.dim();
    let blocks = block_results(n_draws, 256, |range| {
        let mut sum = vec![0.0f64; dim];
        let mut sum_sq = vec![0.0f64; dim];
        let mut ties = 0u64;
        for i in range {
            let rows = chunk_noises(sampler, chunk_count, chunk_size, factory, stream_id, i);
            let set = VectorSet::from_rows(&rows).expect("valid chunk set");
            let med = medoid(&set);
            if med.tie_detected {
                ties += 1;
            }
            for (k, v) in set.vector(med.index).iter().enumerate() {
                sum[k] += v;
                sum_sq[k] += v * v;
            }
        }
        (sum, sum_sq, ties)
    });
    let mut sum = vec![0.0f64; dim];
    let mut sum_sq = vec![0.0f64; dim];
    let mut ties = 0u64;
    for (s, ss, t) in blocks {
        for k in 0..dim {
            sum[k] += s[k];
            sum_sq[k] += ss[k];
        }
        ties += t;
    }
    let n = n_draws as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let trace: f64 = (0..dim)
        .map(|k| ((sum_sq[k] - n * mean[k] * mean[k]) / (n - 1.0).max(1.0)).max(0.0))
        .sum();
    let mean_norm = norm(&mean);
    let band = 5.0 * (trace / n).sqrt();
    ZeroMeanReport {
        mean,
        mean_norm,
        band,
        pass: mean_norm <= band,
        draws: n_draws,
        ties,
    }
}

/// Result of the medoid second-moment check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondMomentReport {
    /// Monte Carlo estimate of E[|medoid noise|^2].
    pub estimate: f64,
    /// The closed-form bound B it must stay under.
    pub bound: f64,
    pub pass: bool,
    pub draws: u64,
}

/// Monte Carlo estimate of the medoid's second moment against the
/// closed-form bound. The sampler must be the noise whose analytic
/// `(sigma, p)` pair is recorded in `params`; the check is one-sided since
/// B is an upper bound.
pub fn verify_second_moment(
    sampler: &dyn VectorSampler,
    params: &TheoryParams,
    n_draws: u64,
    factory: &RngFactory,
    stream_id: u64,
) -> Result<SecondMomentReport, TheoryError> {
    let bound = second_moment_bound(params)?;
    let estimate = medoid_second_moment(
        sampler,
        params.chunk_count,
        params.chunk_size,
        n_draws,
        factory,
        stream_id,
    );
    Ok(SecondMomentReport {
        estimate,
        bound,
        pass: estimate <= bound,
        draws: n_draws,
    })
}

/// Monte Carlo estimate of E[|medoid of M chunk noises|^2].
pub fn medoid_second_moment(
    sampler: &dyn VectorSampler,
    chunk_count: usize,
    chunk_size: usize,
    n_draws: u64,
    factory: &RngFactory,
    stream_id: u64,
) -> f64 {
    let blocks = block_results(n_draws, 256, |range| {
        let mut sum = 0.0f64;
        for i in range {
            let rows = chunk_noises(sampler, chunk_count, chunk_size, factory, stream_id, i);
            let set = VectorSet::from_rows(&rows).expect("valid chunk set");
            let med = medoid(&set);
            let v = set.vector(med.index);
            sum += v.iter().map(|x| x * x).sum::<f64>();
        }
        sum
    });
    blocks.into_iter().sum::<f64>() / n_draws as f64
}
