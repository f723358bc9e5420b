//! Pure vector-set operators: medoid selection, element-wise median, mean,
//! and norm clipping. These are independent of any optimization loop and of
//! where the vectors came from.
//!
//! All reductions accumulate in a fixed index order so results are
//! bit-identical across runs and across sequential/parallel callers.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AggregationError {
    #[error("vector set must contain at least one vector")]
    EmptySet,
    #[error("vectors must have dimension at least 1")]
    ZeroDimension,
    #[error("vector {index} has dimension {got}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("flat data of length {len} is not a multiple of dimension {dim}")]
    RaggedData { len: usize, dim: usize },
    #[error("clipping threshold must be positive and finite, got {0}")]
    InvalidThreshold(f64),
    #[error("input contains a non-finite component")]
    NonFinite,
}

/// An ordered list of M vectors sharing one dimension d. Storage is a flat
/// row-major buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorSet {
    data: Vec<f64>,
    count: usize,
    dim: usize,
}

impl VectorSet {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, AggregationError> {
        if rows.is_empty() {
            return Err(AggregationError::EmptySet);
        }
        let dim = rows[0].len();
        if dim == 0 {
            return Err(AggregationError::ZeroDimension);
        }
        for (index, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(AggregationError::DimensionMismatch {
                    index,
                    expected: dim,
                    got: row.len(),
                });
            }
        }
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            data.extend_from_slice(row);
        }
        Ok(Self {
            data,
            count: rows.len(),
            dim,
        })
    }

    pub fn from_flat(data: Vec<f64>, dim: usize) -> Result<Self, AggregationError> {
        if dim == 0 {
            return Err(AggregationError::ZeroDimension);
        }
        if data.is_empty() {
            return Err(AggregationError::EmptySet);
        }
        if data.len() % dim != 0 {
            return Err(AggregationError::RaggedData {
                len: data.len(),
                dim,
            });
        }
        let count = data.len() / dim;
        Ok(Self { data, count, dim })
    }

    /// Number of vectors M.
    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vector(&self, j: usize) -> &[f64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }
}

/// Outcome of a medoid selection.
#[derive(Debug, Clone, PartialEq)]
pub struct MedoidResult {
    /// Index of the selected vector (smallest index on ties).
    pub index: usize,
    /// D(v_j) = sum over i of the Euclidean distance from v_i to v_j,
    /// including the zero self term.
    pub distance_sums: Vec<f64>,
    /// True iff the minimum distance sum is attained at two or more indices
    /// under exact floating-point comparison.
    pub tie_detected: bool,
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Overflow-safe Euclidean norm: scales by the largest magnitude first.
pub(crate) fn robust_norm(v: &[f64]) -> f64 {
    let m = v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    if m == 0.0 || !m.is_finite() {
        return if m == 0.0 { 0.0 } else { f64::INFINITY };
    }
    let s: f64 = v
        .iter()
        .map(|x| {
            let r = x / m;
            r * r
        })
        .sum();
    m * s.sqrt()
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// D(v_j) for every j, each accumulated over i in ascending index order.
pub fn distance_sums(set: &VectorSet) -> Vec<f64> {
    let m = set.len();
    let mut pair = vec![0.0f64; m * m];
    for j in 0..m {
        for i in (j + 1)..m {
            let d = euclidean(set.vector(i), set.vector(j));
            pair[i * m + j] = d;
            pair[j * m + i] = d;
        }
    }
    (0..m)
        .map(|j| (0..m).map(|i| pair[i * m + j]).sum())
        .collect()
}

/// The vector minimizing the sum of distances to all others. Ties break to
/// the smallest index and are reported via `tie_detected`.
pub fn medoid(set: &VectorSet) -> MedoidResult {
    let sums = distance_sums(set);
    let mut index = 0;
    for (j, &s) in sums.iter().enumerate() {
        if s < sums[index] {
            index = j;
        }
    }
    let min = sums[index];
    let tie_detected = sums.iter().filter(|&&s| s == min).count() > 1;
    MedoidResult {
        index,
        distance_sums: sums,
        tie_detected,
    }
}

/// Coordinate-wise scalar median. For even M the median is the midpoint of
/// the two middle order statistics.
pub fn elementwise_median(set: &VectorSet) -> Vec<f64> {
    let m = set.len();
    let mut column = vec![0.0f64; m];
    (0..set.dim())
        .map(|k| {
            for (j, slot) in column.iter_mut().enumerate() {
                *slot = set.vector(j)[k];
            }
            column.sort_by(f64::total_cmp);
            if m % 2 == 1 {
                column[m / 2]
            } else {
                0.5 * (column[m / 2 - 1] + column[m / 2])
            }
        })
        .collect()
}

/// Arithmetic mean of the vectors, accumulated in index order.
pub fn mean(set: &VectorSet) -> Vec<f64> {
    let mut acc = vec![0.0f64; set.dim()];
    for row in set.iter() {
        for (a, v) in acc.iter_mut().zip(row) {
            *a += v;
        }
    }
    let m = set.len() as f64;
    for a in acc.iter_mut() {
        *a /= m;
    }
    acc
}

/// Rescales `g` to Euclidean norm at most `lambda`, preserving direction;
/// returns `g` unchanged when its norm already fits. Rejects non-finite
/// inputs and non-positive thresholds.
pub fn clip(g: &[f64], lambda: f64) -> Result<Vec<f64>, AggregationError> {
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(AggregationError::InvalidThreshold(lambda));
    }
    if g.iter().any(|x| !x.is_finite()) {
        return Err(AggregationError::NonFinite);
    }
    Ok(clip_unchecked(g, lambda).0)
}

/// Clipping core shared with the optimizer step; also reports whether the
/// input exceeded the threshold. Rescales until the recomputed norm fits:
/// rounding can leave a freshly scaled vector an ulp above `lambda`, and the
/// extra passes make clipping exactly idempotent.
pub(crate) fn clip_unchecked(g: &[f64], lambda: f64) -> (Vec<f64>, bool) {
    let mut out = g.to_vec();
    let exceeded = robust_norm(&out) > lambda;
    loop {
        let n = robust_norm(&out);
        if !(n > lambda) {
            break;
        }
        let s = lambda / n;
        let mut changed = false;
        for x in out.iter_mut() {
            let y = *x * s;
            if y != *x {
                changed = true;
            }
            *x = y;
        }
        if !changed {
            break;
        }
    }
    (out, exceeded)
}
