//! Gradient and smoothness contracts for the built-in problems.

use rand::Rng;
use rsgd_core::problems::{finite_diff_check, Problem};
use rsgd_core::stream::{RngFactory, StreamKey};

fn problems() -> Vec<Problem> {
    vec![
        Problem::tanh_quadratic(),
        Problem::quadratic(1, 1.0).unwrap(),
        Problem::quadratic(4, 10.0).unwrap(),
        Problem::quadratic(10, 100.0).unwrap(),
    ]
}

#[test]
fn finite_differences_match_analytic_gradients() {
    let factory = RngFactory::new(41);
    for (pi, problem) in problems().iter().enumerate() {
        let mut rng = factory.stream(StreamKey::new(pi as u64, 0, 0));
        let h = 1e-6;
        for _ in 0..100 {
            let x: Vec<f64> = (0..problem.dim())
                .map(|_| rng.random_range(-3.0..3.0))
                .collect();
            let gap = finite_diff_check(problem, &x, h);
            let norm_x = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let tol = 1e-6 * problem.smoothness() * norm_x + 1e-8;
            assert!(gap <= tol, "{}: gap {gap} tol {tol}", problem.name());
        }
    }
}

#[test]
fn descent_lemma_quadratic_upper_bound() {
    // F(y) <= F(x) + grad F(x)'(y - x) + (L/2) |y - x|^2
    let factory = RngFactory::new(42);
    for (pi, problem) in problems().iter().enumerate() {
        let mut rng = factory.stream(StreamKey::new(pi as u64, 1, 0));
        let l = problem.smoothness();
        for _ in 0..200 {
            let x: Vec<f64> = (0..problem.dim())
                .map(|_| rng.random_range(-5.0..5.0))
                .collect();
            let y: Vec<f64> = (0..problem.dim())
                .map(|_| rng.random_range(-5.0..5.0))
                .collect();
            let g = problem.gradient(&x);
            let inner: f64 = g.iter().zip(&y).zip(&x).map(|((gi, yi), xi)| gi * (yi - xi)).sum();
            let dist_sq: f64 = y.iter().zip(&x).map(|(yi, xi)| (yi - xi) * (yi - xi)).sum();
            let upper = problem.value(&x) + inner + 0.5 * l * dist_sq;
            assert!(
                problem.value(&y) <= upper + 1e-10,
                "{}: value {} upper {}",
                problem.name(),
                problem.value(&y),
                upper
            );
        }
    }
}

#[test]
fn gradient_lipschitz_on_random_pairs() {
    let factory = RngFactory::new(43);
    for (pi, problem) in problems().iter().enumerate() {
        let mut rng = factory.stream(StreamKey::new(pi as u64, 2, 0));
        let l = problem.smoothness();
        for _ in 0..200 {
            let x: Vec<f64> = (0..problem.dim())
                .map(|_| rng.random_range(-5.0..5.0))
                .collect();
            let y: Vec<f64> = (0..problem.dim())
                .map(|_| rng.random_range(-5.0..5.0))
                .collect();
            let gx = problem.gradient(&x);
            let gy = problem.gradient(&y);
            let grad_gap = gx
                .iter()
                .zip(&gy)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let point_gap = x
                .iter()
                .zip(&y)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(grad_gap <= l * point_gap + 1e-10);
        }
    }
}

#[test]
fn values_bounded_below_by_optimum() {
    let factory = RngFactory::new(44);
    for (pi, problem) in problems().iter().enumerate() {
        let mut rng = factory.stream(StreamKey::new(pi as u64, 3, 0));
        for _ in 0..200 {
            let x: Vec<f64> = (0..problem.dim())
                .map(|_| rng.random_range(-20.0..20.0))
                .collect();
            assert!(problem.value(&x) >= problem.optimal_value());
        }
    }
}
