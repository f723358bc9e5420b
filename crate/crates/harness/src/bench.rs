//! Micro-benchmark of the aggregation operators over random inputs.

use rand::Rng;
use rsgd_core::aggregation::{elementwise_median, mean, medoid, VectorSet};
use rsgd_core::median;
use rsgd_core::stream::{RngFactory, StreamKey};
use std::fmt::Write as _;
use std::time::Instant;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub dim: usize,
    pub chunk_count: usize,
    pub op: &'static str,
    pub reps: usize,
    pub median_ns: f64,
}

pub const BENCH_HEADER: &str = "dim,m,op,reps,median_ns";

/// Median wall time per call for medoid, element-wise median, and mean over
/// one random vector set per (dim, M) pair. Emits |dims| x |chunk_counts| x 3
/// rows.
pub fn bench_aggregators(
    dims: &[usize],
    chunk_counts: &[usize],
    reps: usize,
    seed: u64,
) -> Vec<BenchRow> {
    let factory = RngFactory::new(seed);
    let mut rows = Vec::new();
    for (di, &dim) in dims.iter().enumerate() {
        for (mi, &m) in chunk_counts.iter().enumerate() {
            let mut rng = factory.stream(StreamKey::new(di as u64, mi as u64, 0));
            let data: Vec<f64> = (0..m * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let set = VectorSet::from_flat(data, dim).expect("non-empty set");
            for (op, f) in ops() {
                f(&set); // warm up
                let mut times = Vec::with_capacity(reps);
                for _ in 0..reps.max(1) {
                    let start = Instant::now();
                    std::hint::black_box(f(std::hint::black_box(&set)));
                    times.push(start.elapsed().as_nanos() as f64);
                }
                rows.push(BenchRow {
                    dim,
                    chunk_count: m,
                    op,
                    reps: reps.max(1),
                    median_ns: median(&times),
                });
            }
        }
    }
    rows
}

type OpFn = fn(&VectorSet) -> Vec<f64>;

fn ops() -> [(&'static str, OpFn); 3] {
    fn medoid_op(set: &VectorSet) -> Vec<f64> {
        let r = medoid(set);
        set.vector(r.index).to_vec()
    }
    [
        ("medoid", medoid_op as OpFn),
        ("elementwise_median", elementwise_median as OpFn),
        ("mean", mean as OpFn),
    ]
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::new();
    writeln!(out, "{BENCH_HEADER}").unwrap();
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.dim, r.chunk_count, r.op, r.reps, r.median_ns
        )
        .unwrap();
    }
    out
}
