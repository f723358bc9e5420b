//! Exact reduction identities between the optimizer routes, plus the
//! chunk-gradient formation contract.

use rand::Rng;
use rsgd_core::aggregation::VectorSet;
use rsgd_core::noise::{chunk_noise_sums, NoiseModel, VectorSampler};
use rsgd_core::optimizers::{
    baseline_step, form_chunk_gradients, rcsgd_mini_step, rsgd_mini_step, run, OptimizerConfig,
    OptimizerKind, StepSize,
};
use rsgd_core::problems::Problem;
use rsgd_core::stream::{RngFactory, StreamKey};

fn base_cfg(kind: OptimizerKind, batch: usize, chunk_size: usize, horizon: usize) -> OptimizerConfig {
    OptimizerConfig {
        label: kind.as_str().to_string(),
        kind,
        batch,
        chunk_size,
        step: StepSize::Constant { alpha: 0.05 },
        lambda: None,
        horizon,
        initial_point: None,
    }
}

#[test]
fn noiseless_chunks_equal_true_gradient() {
    let problem = Problem::quadratic(3, 5.0).unwrap();
    let noise = NoiseModel::none(3).unwrap();
    let factory = RngFactory::new(1);
    let x = [0.4, -1.0, 2.5];
    let set = form_chunk_gradients(&problem, &x, &noise, 12, 3, &factory, 0, 0).unwrap();
    let g0 = problem.gradient(&x);
    assert_eq!(set.len(), 4);
    for row in set.iter() {
        assert_eq!(row, &g0[..]);
    }
}

#[test]
fn single_point_chunks_add_one_raw_draw() {
    let problem = Problem::quadratic(2, 1.0).unwrap();
    let noise = NoiseModel::gaussian(2, 0.7).unwrap();
    let factory = RngFactory::new(2);
    let x = [1.0, 1.0];
    let set = form_chunk_gradients(&problem, &x, &noise, 4, 1, &factory, 5, 9).unwrap();
    let g0 = problem.gradient(&x);
    for (j, row) in set.iter().enumerate() {
        let draw = noise.sample_at(&factory, StreamKey::chunk_sample(5, 9, j as u64, 0, 1));
        for ((r, g), n) in row.iter().zip(&g0).zip(&draw) {
            assert_eq!(*r, g + n / 1.0);
        }
    }
}

#[test]
fn pinned_draws_cancel_within_chunk() {
    // per-point draws cycle e1, -e1, 2 e1, -2 e1, so every chunk of 4 sums
    // to zero and the chunk gradients equal the true gradient exactly
    struct Pinned;
    impl VectorSampler for Pinned {
        fn dim(&self) -> usize {
            2
        }
        fn sample_at(&self, _f: &RngFactory, key: StreamKey) -> Vec<f64> {
            match key.draw % 4 {
                0 => vec![1.0, 0.0],
                1 => vec![-1.0, 0.0],
                2 => vec![2.0, 0.0],
                _ => vec![-2.0, 0.0],
            }
        }
    }
    let problem = Problem::tanh_quadratic();
    let factory = RngFactory::new(3);
    let x = [0.3, -0.8];
    let set = form_chunk_gradients(&problem, &x, &Pinned, 8, 4, &factory, 0, 0).unwrap();
    let g0 = problem.gradient(&x);
    for row in set.iter() {
        assert_eq!(row, &g0[..]);
    }
}

#[test]
fn indivisible_batch_is_rejected() {
    let problem = Problem::tanh_quadratic();
    let noise = NoiseModel::none(2).unwrap();
    let factory = RngFactory::new(4);
    let err = form_chunk_gradients(&problem, &[0.0, 0.0], &noise, 256, 100, &factory, 0, 0)
        .unwrap_err();
    assert!(err.to_string().contains("divisible"));
}

#[test]
fn mean_aggregator_bit_identical_to_pooled_sgd_over_100_steps() {
    // power-of-two chunk size: (1/M) sum of chunk averages and the pooled
    // (1/K) sum coincide bit for bit, so whole trajectories must match
    let problem = Problem::quadratic(4, 3.0).unwrap();
    let noise = NoiseModel::pareto_amplitude(4, 1.0, 1.5).unwrap();
    let factory = RngFactory::new(5);
    let mean_cfg = base_cfg(OptimizerKind::MeanAgg, 32, 8, 100);
    let sgd_cfg = base_cfg(OptimizerKind::Sgd, 32, 8, 100);
    let a = run(&problem, &noise, &mean_cfg, &factory, 0).unwrap();
    let b = run(&problem, &noise, &sgd_cfg, &factory, 0).unwrap();
    assert_eq!(a.rows.len(), b.rows.len());
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        assert_eq!(ra.iterate, rb.iterate);
        assert_eq!(ra.step_norm, rb.step_norm);
    }
}

#[test]
fn single_chunk_medoid_reduces_to_minibatch_sgd() {
    // M = 1: the lone chunk is its own medoid and R = K, including a chunk
    // size that is not a power of two
    let problem = Problem::tanh_quadratic();
    let noise = NoiseModel::multivariate_cauchy(2, 0.5).unwrap();
    let factory = RngFactory::new(6);
    let med_cfg = base_cfg(OptimizerKind::RsgdMini, 24, 24, 100);
    let sgd_cfg = base_cfg(OptimizerKind::Sgd, 24, 24, 100);
    let a = run(&problem, &noise, &med_cfg, &factory, 1).unwrap();
    let b = run(&problem, &noise, &sgd_cfg, &factory, 1).unwrap();
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        assert_eq!(ra.iterate, rb.iterate);
    }
}

#[test]
fn huge_threshold_clipped_medoid_matches_unclipped() {
    // lambda = 1e30 never binds, so the clipped step is the identity route
    let factory = RngFactory::new(7);
    let mut rng = factory.stream(StreamKey::new(0, 0, 0));
    for trial in 0..100 {
        let m = rng.random_range(2..8);
        let d = rng.random_range(1..6);
        let rows: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..d).map(|_| rng.random_range(-1e4..1e4)).collect())
            .collect();
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-10.0..10.0)).collect();
        let set = VectorSet::from_rows(&rows).unwrap();
        let alpha = rng.random_range(1e-4..1.0);
        let (plain, j_plain) = rsgd_mini_step(&x, &set, alpha);
        let (clipped, j_clip, hit) = rcsgd_mini_step(&x, &set, alpha, 1e30);
        assert_eq!(plain, clipped, "trial {trial}");
        assert_eq!(j_plain, j_clip);
        assert!(!hit);
    }
}

#[test]
fn clipped_run_with_huge_threshold_matches_unclipped_run() {
    let problem = Problem::tanh_quadratic();
    let noise = NoiseModel::multivariate_cauchy(2, 3.0).unwrap();
    let factory = RngFactory::new(8);
    let plain = base_cfg(OptimizerKind::RsgdMini, 64, 16, 100);
    let mut clipped = base_cfg(OptimizerKind::RcsgdMini, 64, 16, 100);
    clipped.lambda = Some(1e30);
    let a = run(&problem, &noise, &plain, &factory, 2).unwrap();
    let b = run(&problem, &noise, &clipped, &factory, 2).unwrap();
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        assert_eq!(ra.iterate, rb.iterate);
        assert_eq!(ra.selected, rb.selected);
    }
}

#[test]
fn noiseless_descent_is_monotone_under_step_rule() {
    // alpha <= 1/(2L) gives deterministic descent without noise
    for problem in [Problem::tanh_quadratic(), Problem::quadratic(6, 10.0).unwrap()] {
        let dim = problem.dim();
        let noise = NoiseModel::none(dim).unwrap();
        let factory = RngFactory::new(9);
        let mut cfg = base_cfg(OptimizerKind::RsgdMini, 4, 1, 50);
        cfg.step = StepSize::Constant {
            alpha: 1.0 / (2.0 * problem.smoothness()),
        };
        let record = run(&problem, &noise, &cfg, &factory, 0).unwrap();
        for w in record.rows.windows(2) {
            assert!(w[1].loss <= w[0].loss + 1e-15);
        }
    }
}

#[test]
fn mom_step_follows_elementwise_median_example() {
    // chunks (1,5), (2,1), (9,3) -> median direction (2,3)
    let sums = vec![vec![1.0, 5.0], vec![2.0, 1.0], vec![9.0, 3.0]];
    let g0 = vec![0.0, 0.0];
    let x = vec![0.0, 0.0];
    let out = baseline_step(OptimizerKind::Mom, &x, &g0, &sums, 1, 1.0, None).unwrap();
    assert_eq!(out.next, vec![-2.0, -3.0]);
}

#[test]
fn chunk_scale_equivariance_of_medoid_step() {
    // doubling every chunk gradient doubles the step and keeps the index
    let rows = vec![vec![0.5, 0.25], vec![0.75, -0.5], vec![-0.125, 0.375]];
    let set = VectorSet::from_rows(&rows).unwrap();
    let scaled = VectorSet::from_rows(
        &rows
            .iter()
            .map(|r| r.iter().map(|v| v * 8.0).collect())
            .collect::<Vec<_>>(),
    )
    .unwrap();
    let x = [1.0, 1.0];
    let (a, ja) = rsgd_mini_step(&x, &set, 0.25);
    let (b, jb) = rsgd_mini_step(&x, &scaled, 0.25);
    assert_eq!(ja, jb);
    for ((xa, xb), xi) in a.iter().zip(&b).zip(&x) {
        // steps: xi - a_step and xi - 8 * a_step
        let step_a = xi - xa;
        let step_b = xi - xb;
        assert_eq!(step_b, step_a * 8.0);
    }
}

#[test]
fn same_coordinates_same_draws_across_kinds() {
    // the chunk sums consumed at (run, t) are a pure function of the
    // factory, independent of which optimizer asks
    let noise = NoiseModel::multivariate_cauchy(2, 3.0).unwrap();
    let factory = RngFactory::new(10);
    let a = chunk_noise_sums(&noise, 4, 8, &factory, 3, 17);
    let b = chunk_noise_sums(&noise, 4, 8, &factory, 3, 17);
    assert_eq!(a, b);
    // a different split of the same batch consumes the identical per-point
    // draws: chunk j of the coarse split covers flat indices 8j..8j+8, and
    // the fine split reads the same values at the same flat indices
    for flat in 0..32u64 {
        let coarse = noise.sample_at(&factory, StreamKey::chunk_sample(3, 17, flat / 8, flat % 8, 8));
        let fine = noise.sample_at(&factory, StreamKey::chunk_sample(3, 17, flat / 4, flat % 4, 4));
        assert_eq!(coarse, fine);
    }
}
