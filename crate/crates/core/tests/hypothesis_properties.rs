mod common;

use nalgebra::DMatrix;
use nlslope_core::hypothesis::{bootstrap_pvalue, critical_from_null, test_statistic};
use nlslope_core::locpoly::build_paired_sample;
use nlslope_core::{GpCalibration, PairedSample, TestConfig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

use common::uniform_v;

fn noisy_sample(m: usize, seed: u64) -> PairedSample {
    let v = uniform_v(m, -1.0, 2.0, seed);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0xbeef);
    let noise = Normal::new(0.0, 0.2).unwrap();
    let u: Vec<f64> = v.iter().map(|&x| (2.0 * x).sin() + noise.sample(&mut rng)).collect();
    build_paired_sample(&u, &v).unwrap()
}

fn small_cfg() -> TestConfig {
    TestConfig { eval_grid_size: 200, bootstrap_reps: 60, ..TestConfig::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn statistic_ignores_affine_terms_and_scales(
        seed in any::<u64>(),
        a in -20.0f64..20.0,
        b in -20.0f64..20.0,
        c in -10.0f64..10.0,
        h in 0.3f64..1.0,
    ) {
        let cfg = small_cfg();
        let s = noisy_sample(150, seed);
        let t = test_statistic(&s, h, &cfg).unwrap().statistic;
        prop_assert!(t >= 0.0);

        let shifted: Vec<f64> = s.u.iter().zip(&s.v).map(|(u, v)| u + a + b * v).collect();
        let t_shift = test_statistic(&s.with_u(shifted).unwrap(), h, &cfg).unwrap().statistic;
        prop_assert!((t_shift - t).abs() <= 1e-8 * (1.0 + t));

        let scaled: Vec<f64> = s.u.iter().map(|u| c * u).collect();
        let t_scale = test_statistic(&s.with_u(scaled).unwrap(), h, &cfg).unwrap().statistic;
        prop_assert!((t_scale - c.abs() * t).abs() <= 1e-8 * (1.0 + c.abs() * t));
    }

    #[test]
    fn bootstrap_residuals_are_centered(seed in any::<u64>()) {
        let cfg = TestConfig { seed, ..small_cfg() };
        let out = bootstrap_pvalue(&noisy_sample(100, seed), 0.5, &cfg).unwrap();
        prop_assert!(out.residual_mean.abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&out.p_value));
        prop_assert_eq!(out.stats.len(), cfg.bootstrap_reps);
    }

    #[test]
    fn critical_values_fall_as_alpha_grows(
        stats in prop::collection::vec(0.0f64..100.0, 1..300),
        a1 in 0.001f64..0.999,
        a2 in 0.001f64..0.999,
    ) {
        let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
        prop_assert!(critical_from_null(&stats, lo) >= critical_from_null(&stats, hi));
    }
}

#[test]
fn bootstrap_does_not_depend_on_thread_count() {
    let sample = noisy_sample(200, 5);
    let cfg = TestConfig { seed: 99, ..small_cfg() };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| bootstrap_pvalue(&sample, 0.4, &cfg).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, bootstrap_pvalue(&sample, 0.4, &cfg).unwrap());
    let other = bootstrap_pvalue(&sample, 0.4, &TestConfig { seed: 100, ..cfg.clone() }).unwrap();
    assert_ne!(one.stats, other.stats);
}

#[test]
fn gp_quantile_is_monotone_in_alpha() {
    let k = 12;
    let cov = DMatrix::from_fn(k, k, |a, b| (-((a as f64 - b as f64) / 4.0).powi(2)).exp());
    let grid: Vec<f64> = (0..k).map(|i| i as f64).collect();
    let strict = GpCalibration::from_covariance(grid.clone(), cov.clone(), 5000, 0.01, 3).unwrap();
    let loose = GpCalibration::from_covariance(grid, cov, 5000, 0.10, 3).unwrap();
    assert!(strict.b_alpha >= loose.b_alpha);
    assert!(loose.b_alpha > 0.0 && !strict.clipped);
}
