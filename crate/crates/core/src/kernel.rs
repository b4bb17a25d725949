//! Smoothing kernels and their moments `nu_{a,b} = ∫ v^a K(v)^b dv`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Symmetric, non-negative kernel integrating to one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// Standard normal density.
    Gaussian,
    /// `0.75 (1 - x^2)_+`.
    Epanechnikov,
}

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

impl Kernel {
    #[inline]
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Kernel::Gaussian => INV_SQRT_2PI * (-0.5 * x * x).exp(),
            Kernel::Epanechnikov => {
                let x2 = x * x;
                if x2 <= 1.0 {
                    0.75 * (1.0 - x2)
                } else {
                    0.0
                }
            }
        }
    }

    /// Half-width of the support.
    pub fn support(self) -> f64 {
        match self {
            Kernel::Gaussian => f64::INFINITY,
            Kernel::Epanechnikov => 1.0,
        }
    }

    /// `∫ v^a K(v)^b dv` in closed form. Odd `a` vanish by symmetry.
    pub fn moment(self, a: u32, b: u32) -> f64 {
        assert!(b >= 1, "kernel power must be positive");
        if a % 2 == 1 {
            return 0.0;
        }
        match self {
            // K^b = (2π)^{-b/2} exp(-b x²/2) is a scaled N(0, 1/b) density, so the
            // moment is that scale times E[Z^a] = (a-1)!! b^{-a/2}.
            Kernel::Gaussian => {
                let b = b as f64;
                let scale = (2.0 * PI).powf((1.0 - b) / 2.0) / b.sqrt();
                scale * double_factorial_odd(a) * b.powf(-(a as f64) / 2.0)
            }
            // Expand (1 - v²)^b binomially and integrate term by term over [-1, 1].
            Kernel::Epanechnikov => {
                let mut acc = 0.0;
                let mut binom = 1.0;
                for k in 0..=b {
                    if k > 0 {
                        binom *= (b - k + 1) as f64 / k as f64;
                    }
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    acc += sign * binom * 2.0 / (a + 2 * k + 1) as f64;
                }
                0.75f64.powi(b as i32) * acc
            }
        }
    }
}

/// `(a-1)!!` for even `a`, with `(-1)!! = 1`.
fn double_factorial_odd(a: u32) -> f64 {
    (1..a).step_by(2).map(|k| k as f64).product()
}
