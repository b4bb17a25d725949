mod common;

use nlslope_core::hypothesis::eval_grid;
use nlslope_core::locpoly::{
    build_paired_sample, kernel_eval, local_cubic_fit, region_weights, rot_bandwidth, second_derivative_curve,
};
use nlslope_core::sim::true_sup_g2;
use nlslope_core::{Example, Kernel};
use proptest::prelude::*;

use common::uniform_v;

fn sample_of(v: &[f64], f: impl Fn(f64) -> f64) -> nlslope_core::PairedSample {
    let u: Vec<f64> = v.iter().map(|&x| f(x)).collect();
    build_paired_sample(&u, v).unwrap()
}

fn kernel_strategy() -> impl Strategy<Value = Kernel> {
    prop_oneof![Just(Kernel::Gaussian), Just(Kernel::Epanechnikov)]
}

fn interior(n: usize) -> Vec<f64> {
    eval_grid(0.2, 0.8, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cubics_are_reproduced(
        c in prop::array::uniform4(-5.0f64..5.0),
        m in 30usize..200,
        v0 in 0.2f64..0.8,
        h in 0.25f64..1.0,
        kernel in kernel_strategy(),
        seed in any::<u64>(),
    ) {
        let p = |x: f64| c[0] + c[1] * x + c[2] * x * x + c[3] * x * x * x;
        let v = uniform_v(m, 0.0, 1.0, seed);
        let sample = sample_of(&v, p);
        let fit = local_cubic_fit(&sample, v0, h, kernel, &vec![1.0; m]).unwrap();
        let taylor = [
            p(v0),
            c[1] + 2.0 * c[2] * v0 + 3.0 * c[3] * v0 * v0,
            c[2] + 3.0 * c[3] * v0,
            c[3],
        ];
        for (k, (g, t)) in fit.gammas.iter().zip(&taylor).enumerate() {
            prop_assert!((g - t).abs() < 1e-8, "gamma_{k}: {g} vs {t}");
        }
    }

    #[test]
    fn second_derivative_ignores_affine_terms(
        a in -10.0f64..10.0,
        b in -10.0f64..10.0,
        h in 0.1f64..0.5,
        kernel in kernel_strategy(),
        seed in any::<u64>(),
    ) {
        let v = uniform_v(150, 0.0, 1.0, seed);
        let base = sample_of(&v, |x| (4.0 * x).sin() + x * x * x * x);
        let shifted = sample_of(&v, |x| (4.0 * x).sin() + x * x * x * x + a + b * x);
        let w = vec![1.0; v.len()];
        let pts = interior(25);
        let c0 = second_derivative_curve(&base, h, kernel, &w, &pts).unwrap();
        let c1 = second_derivative_curve(&shifted, h, kernel, &w, &pts).unwrap();
        for (x, y) in c0.iter().zip(&c1) {
            match (x, y) {
                (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-8 * (1.0 + x.abs())),
                (None, None) => {}
                _ => prop_assert!(false, "degeneracy must depend on V only"),
            }
        }
    }

    #[test]
    fn second_derivative_is_equivariant_under_rescaling_v(
        a in 0.1f64..10.0,
        shift in -5.0f64..5.0,
        h in 0.1f64..0.5,
        kernel in kernel_strategy(),
        seed in any::<u64>(),
    ) {
        let v = uniform_v(120, 0.0, 1.0, seed);
        let u: Vec<f64> = v.iter().map(|&x| (3.0 * x).cos() + x.powi(5)).collect();
        let base = build_paired_sample(&u, &v).unwrap();
        let v2: Vec<f64> = v.iter().map(|x| a * x + shift).collect();
        let moved = build_paired_sample(&u, &v2).unwrap();
        let w = vec![1.0; v.len()];
        let pts = interior(20);
        let pts2: Vec<f64> = pts.iter().map(|x| a * x + shift).collect();
        let c0 = second_derivative_curve(&base, h, kernel, &w, &pts).unwrap();
        let c1 = second_derivative_curve(&moved, a * h, kernel, &w, &pts2).unwrap();
        for (x, y) in c0.iter().zip(&c1) {
            if let (Some(x), Some(y)) = (x, y) {
                prop_assert!((x / (a * a) - y).abs() < 1e-8 * (1.0 + x.abs() / (a * a)));
            }
        }
    }

    #[test]
    fn kernels_are_even(x in -10.0f64..10.0, kernel in kernel_strategy()) {
        prop_assert_eq!(kernel_eval(kernel, x), kernel_eval(kernel, -x));
    }
}

fn dense_sample(example: Example, m: usize) -> nlslope_core::PairedSample {
    let v: Vec<f64> = (0..m).map(|j| (j as f64 + 0.5) / m as f64).collect();
    sample_of(&v, |x| example.g(x).unwrap())
}

fn interior_sup_error(example: Example, m: usize, h: f64) -> f64 {
    let sample = dense_sample(example, m);
    let w = vec![1.0; m];
    let pts = eval_grid(0.1, 0.9, 400);
    let est = second_derivative_curve(&sample, h, Kernel::Gaussian, &w, &pts).unwrap();
    pts.iter().zip(&est).map(|(&v, e)| (e.unwrap() - example.g_and_g2(v).unwrap().1).abs()).fold(0.0, f64::max)
}

#[test]
fn bumps_second_derivative_at_midpoint() {
    let sample = dense_sample(Example::Bumps, 5000);
    let fit = local_cubic_fit(&sample, 0.5, 0.05, Kernel::Gaussian, &vec![1.0; 5000]).unwrap();
    let truth = Example::Bumps.g_and_g2(0.5).unwrap().1;
    let sup = true_sup_g2(Example::Bumps, 0.0, 1.0, 100_000).unwrap();
    assert!((fit.second_derivative() - truth).abs() <= 0.05 * sup);
}

#[test]
fn quartic_second_derivative_within_five_percent() {
    let err = interior_sup_error(Example::Quartic, 5000, 0.03);
    assert!(err <= 0.05 * 2.75, "sup error {err}");
}

#[test]
fn halving_bandwidth_reduces_bias_for_noiseless_bumps() {
    let errs: Vec<f64> = [0.2, 0.1, 0.05].iter().map(|&h| interior_sup_error(Example::Bumps, 10_000, h)).collect();
    assert!(errs[1] < errs[0] && errs[2] < errs[1], "{errs:?}");
}

#[test]
fn rule_of_thumb_scales_like_m_to_minus_one_ninth() {
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};
    let noise = Normal::new(0.0, 0.1).unwrap();
    let mean_h = |m: usize| {
        let draws = 20;
        (0..draws)
            .map(|d| {
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1000 * m as u64 + d);
                let v = uniform_v(m, 0.0, 1.0, d + 17 * m as u64);
                let u: Vec<f64> = v.iter().map(|&x| Example::Quartic.g(x).unwrap() + noise.sample(&mut rng)).collect();
                let sample = build_paired_sample(&u, &v).unwrap();
                let w = region_weights(&sample, (0.1, 0.9));
                rot_bandwidth(&sample, Kernel::Gaussian, &w, 1.0).unwrap().h_rot
            })
            .sum::<f64>()
            / draws as f64
    };
    let ratio = mean_h(1000) / mean_h(500);
    let target = 2f64.powf(-1.0 / 9.0);
    assert!((ratio / target - 1.0).abs() < 0.1, "ratio {ratio}, target {target}");
}
