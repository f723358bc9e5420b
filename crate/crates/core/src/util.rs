//! Small shared helpers.

use rayon::prelude::*;
use std::ops::Range;

/// Splits `0..n` into fixed blocks, runs `job` on each block in parallel,
/// and returns the per-block results in block order. Callers merge the
/// results sequentially, so the final value is independent of thread count.
pub(crate) fn block_results<R, F>(n: u64, block_size: u64, job: F) -> Vec<R>
where
    R: Send,
    F: Fn(Range<u64>) -> R + Sync,
{
    assert!(block_size > 0);
    let blocks = n.div_ceil(block_size);
    (0..blocks)
        .into_par_iter()
        .map(|b| {
            let lo = b * block_size;
            let hi = (lo + block_size).min(n);
            job(lo..hi)
        })
        .collect()
}

/// Mean and sample standard deviation (n-1 normalization; 0 for n < 2).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, (ss / (n - 1) as f64).sqrt())
}

/// Median of a slice (midpoint convention for even lengths).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocks_cover_range_in_order() {
        let got = block_results(10, 3, |r| r.collect::<Vec<_>>());
        assert_eq!(
            got,
            vec![vec![0, 1, 2], vec![3, 4, 5], vec![6, 7, 8], vec![9]]
        );
    }

    #[test]
    fn mean_std_basic() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-12);
        assert_eq!(mean_std(&[5.0]), (5.0, 0.0));
    }

    #[test]
    fn median_conventions() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 0.0]), 2.0);
    }
}
