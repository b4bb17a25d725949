//! Rule-of-thumb bandwidth for estimating `g''` with a local cubic.
//!
//! A global polynomial pilot of degree `p + 2` supplies both the residual
//! variance and the `(p+1)`-th derivative that enter the asymptotically
//! optimal bandwidth
//!
//! ```text
//! h = C_{ν,p}(K) · { η² ∫ω₀ / Σ_j (ğ^{(p+1)}(V_j))² ω₀(V_j) }^{1/(2p+3)}
//! ```

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{PairedSample, DEGREE};
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::lsq::HouseholderQr;

/// Degree of the global pilot polynomial.
pub const PILOT_DEGREE: usize = DEGREE + 2;

/// Derivative order targeted by the test.
const NU: usize = 2;

/// Below this the pilot curvature is treated as zero.
const FLAT_CURVATURE: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthReport {
    pub h_rot: f64,
    pub h_used: f64,
    pub inflation: f64,
    /// `C_{ν,p}(K)`.
    pub constant: f64,
    /// Pilot coefficients in the standardized variable `z = (V - center) / scale`.
    pub pilot_coeffs: Vec<f64>,
    pub pilot_center: f64,
    pub pilot_scale: f64,
    /// Pilot residual variance `RSS / (m - (PILOT_DEGREE + 1))`.
    pub eta_breve_sq: f64,
    /// `Σ_j (ğ^{(p+1)}(V_j))² ω₀(V_j)`.
    pub curvature: f64,
    /// Set when the curvature vanished and the fallback `range(V) m^{-1/9}` was used.
    pub flat_curvature: bool,
}

/// Equivalent-kernel constant `C_{ν,p}(K)` of local polynomial regression:
///
/// ```text
/// C = [ ((p+1)!)² (2ν+1) ∫K*² / (2 (p+1-ν) (∫ t^{p+1} K*)²) ]^{1/(2p+3)}
/// ```
///
/// with `K*(t) = e_ν' S⁻¹ (1, t, …, t^p)' K(t)` and `S = (μ_{j+l})`.
pub fn equivalent_kernel_constant(kernel: Kernel, nu: usize, p: usize) -> f64 {
    assert!(nu <= p);
    let dim = p + 1;
    let s = DMatrix::from_fn(dim, dim, |j, l| kernel.moment((j + l) as u32, 1));
    let s_star = DMatrix::from_fn(dim, dim, |j, l| kernel.moment((j + l) as u32, 2));
    let s_inv = s.try_inverse().expect("kernel moment matrix is positive definite");
    let row = s_inv.row(nu).clone_owned();
    let int_k_sq = (&row * &s_star * row.transpose())[(0, 0)];
    let tail = DMatrix::from_fn(dim, 1, |j, _| kernel.moment((j + p + 1) as u32, 1));
    let int_t_k = (&row * tail)[(0, 0)];
    let fact: f64 = (1..=p + 1).map(|k| k as f64).product();
    let inner = fact * fact * (2 * nu + 1) as f64 * int_k_sq / (2.0 * (p + 1 - nu) as f64 * int_t_k * int_t_k);
    inner.powf(1.0 / (2 * p + 3) as f64)
}

/// Rule-of-thumb bandwidth for `ĝ''` with a local cubic, scaled by `inflation`.
///
/// `omega0` are the region weights; `∫ω₀` is taken over `[min V, max V]`.
pub fn rot_bandwidth(sample: &PairedSample, kernel: Kernel, omega0: &[f64], inflation: f64) -> Result<BandwidthReport> {
    let m = sample.len();
    let ncoef = PILOT_DEGREE + 1;
    if omega0.len() != m {
        return Err(Error::LengthMismatch { left: m, right: omega0.len() });
    }
    sample.require_min_len(ncoef + 1)?;
    let distinct = 1 + sample.v.windows(2).filter(|w| w[1] != w[0]).count();
    if distinct < ncoef {
        return Err(Error::Degenerate { v: sample.v_min(), effective: distinct });
    }
    let (lo, hi) = (sample.v_min(), sample.v_max());
    let range = hi - lo;
    let center = 0.5 * (lo + hi);
    let scale = 0.5 * range;
    let z: Vec<f64> = sample.v.iter().map(|v| (v - center) / scale).collect();

    let mut design = Vec::with_capacity(m * ncoef);
    for k in 0..ncoef as i32 {
        design.extend(z.iter().map(|x| x.powi(k)));
    }
    let qr = HouseholderQr::factor(design, m, ncoef);
    if !qr.full_rank() {
        return Err(Error::Degenerate { v: lo, effective: distinct });
    }
    let coeffs = qr.solve(&sample.u);
    let rss: f64 = z
        .iter()
        .zip(&sample.u)
        .map(|(x, u)| {
            let fit = coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c);
            (u - fit).powi(2)
        })
        .sum();
    let eta_breve_sq = rss / (m - ncoef) as f64;

    // (p+1)-th derivative of the pilot in V.
    let order = DEGREE + 1;
    let chain = scale.powi(order as i32);
    let curvature: f64 = z
        .iter()
        .zip(omega0)
        .map(|(x, w)| {
            let d: f64 = (order..ncoef)
                .map(|k| {
                    let falling: f64 = ((k - order + 1)..=k).map(|i| i as f64).product();
                    falling * coeffs[k] * x.powi((k - order) as i32)
                })
                .sum::<f64>()
                / chain;
            d * d * w
        })
        .sum();

    let constant = equivalent_kernel_constant(kernel, NU, DEGREE);
    let exponent = 1.0 / (2 * DEGREE + 3) as f64;
    let weighted_len = omega_integral(sample, omega0);
    let (h_rot, flat_curvature) = if curvature < FLAT_CURVATURE {
        (range * (m as f64).powf(-exponent), true)
    } else {
        (constant * (eta_breve_sq * weighted_len / curvature).powf(exponent), false)
    };
    Ok(BandwidthReport {
        h_rot,
        h_used: inflation * h_rot,
        inflation,
        constant,
        pilot_coeffs: coeffs,
        pilot_center: center,
        pilot_scale: scale,
        eta_breve_sq,
        curvature,
        flat_curvature,
    })
}

/// Length of the part of `[min V, max V]` where the 0/1 weights are on, read off
/// from the extreme weighted pairs.
fn omega_integral(sample: &PairedSample, omega0: &[f64]) -> f64 {
    let on: Vec<f64> = sample.v.iter().zip(omega0).filter(|(_, w)| **w > 0.0).map(|(v, _)| *v).collect();
    match (on.first(), on.last()) {
        (Some(a), Some(b)) => b - a,
        _ => 0.0,
    }
}
