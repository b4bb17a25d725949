#![allow(dead_code)]

use nalgebra::DMatrix;
use nlslope_core::FunctionalDataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Strictly increasing grid in `[0, 1]` with jittered spacing.
pub fn jittered_grid(g: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let steps: Vec<f64> = (0..g - 1).map(|_| rng.random_range(0.5..1.5)).collect();
    let total: f64 = steps.iter().sum();
    let start = rng.random_range(0.0..0.1);
    let span = 1.0 - start - rng.random_range(0.0..0.1);
    let mut grid = vec![start];
    let mut acc = 0.0;
    for s in &steps {
        acc += s;
        grid.push(start + span * acc / total);
    }
    grid
}

/// Curves from `k` smooth basis functions with decaying score variances,
/// plus responses from `beta`.
pub fn smooth_dataset(n: usize, grid: Vec<f64>, k: usize, seed: u64, beta: impl Fn(f64) -> f64) -> FunctionalDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = grid.len();
    let mut curves = DMatrix::zeros(n, g);
    for i in 0..n {
        let level: f64 = rng.random_range(-1.0..1.0);
        for j in 0..g {
            curves[(i, j)] = level;
        }
        for r in 1..k {
            let a: f64 = rng.random_range(-1.0..1.0) / r as f64;
            for (j, &t) in grid.iter().enumerate() {
                curves[(i, j)] += a * (std::f64::consts::PI * r as f64 * t).cos();
            }
        }
    }
    let w = nlslope_core::trapezoid_rule(&grid).unwrap();
    let b: Vec<f64> = grid.iter().map(|&t| beta(t)).collect();
    let responses = (0..n)
        .map(|i| {
            let row: Vec<f64> = curves.row(i).iter().copied().collect();
            w.inner(&row, &b)
        })
        .collect();
    FunctionalDataset::new(grid, curves, responses).unwrap()
}

/// Sorted uniform draws on `[lo, hi]`.
pub fn uniform_v(m: usize, lo: f64, hi: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..m).map(|_| rng.random_range(lo..hi)).collect();
    v.sort_by(f64::total_cmp);
    v
}
