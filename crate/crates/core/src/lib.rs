//! Robust stochastic gradient descent with medoid mini-batch aggregation.
//!
//! At each iteration a batch of K noisy gradients is split into M chunks of
//! R points; each chunk yields an averaged stochastic gradient, and the
//! update follows the chunk whose gradient is the medoid of the M candidates.
//! Selecting instead of averaging keeps the effective noise variance finite
//! even when the per-point noise has infinite variance, so the loop stays
//! stable under heavy-tailed noise where plain SGD diverges.
//!
//! The crate provides the aggregation primitives, symmetric heavy-tailed
//! noise generators with reproducible counter-based streams, analytic test
//! problems, the optimizer loops (medoid descent, its clipped variant, and
//! SGD / clipped SGD / median-of-means baselines), and the closed-form
//! moment bounds together with Monte Carlo verifiers for them.

pub mod aggregation;
pub mod noise;
pub mod optimizers;
pub mod problems;
pub mod stream;
pub mod theory;
mod util;

pub use util::{mean_std, median};
