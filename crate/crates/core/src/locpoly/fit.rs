use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{PairedSample, DEGREE};
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::lsq::HouseholderQr;

/// Fits whose scaled design has a larger 2-norm condition number are flagged.
pub const MAX_CONDITION: f64 = 1e12;

/// Beyond this many bandwidths the Gaussian weight underflows to zero.
const GAUSS_REACH: f64 = 40.0;

const NCOEF: usize = DEGREE + 1;

/// Result of one local cubic fit around `v`.
///
/// `gammas[k]` multiplies `(V - v)^k`, so `gammas[2]` is half the second derivative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalPolyFit {
    pub gammas: [f64; NCOEF],
    pub v: f64,
    pub h: f64,
    pub effective_count: usize,
    pub condition: f64,
    pub condition_ok: bool,
}

impl LocalPolyFit {
    pub fn second_derivative(&self) -> f64 {
        2.0 * self.gammas[2]
    }
}

/// Weighted design around one evaluation point, factored.
struct LocalSystem {
    start: usize,
    sqrt_w: Vec<f64>,
    qr: HouseholderQr,
    effective: usize,
    condition: f64,
}

fn window(v_sorted: &[f64], kernel: Kernel, v: f64, h: f64) -> (usize, usize) {
    let reach = kernel.support().min(GAUSS_REACH) * h;
    let start = v_sorted.partition_point(|x| *x < v - reach);
    let end = v_sorted.partition_point(|x| *x <= v + reach);
    (start, end)
}

fn local_system(v_sorted: &[f64], region: &[f64], kernel: Kernel, v: f64, h: f64) -> Result<LocalSystem> {
    let (start, end) = window(v_sorted, kernel, v, h);
    let rows = end - start;
    let mut x = Vec::with_capacity(rows);
    let mut sqrt_w = Vec::with_capacity(rows);
    let mut effective = 0;
    let mut distinct = 0;
    let mut last = f64::NAN;
    for j in start..end {
        let xj = (v_sorted[j] - v) / h;
        let w = kernel.eval(xj) * region[j];
        if w > 0.0 {
            effective += 1;
            if v_sorted[j] != last {
                distinct += 1;
                last = v_sorted[j];
            }
        }
        x.push(xj);
        sqrt_w.push(w.sqrt());
    }
    if distinct < NCOEF {
        return Err(Error::Degenerate { v, effective: distinct });
    }
    let mut a = Vec::with_capacity(rows * NCOEF);
    for k in 0..NCOEF as i32 {
        a.extend(x.iter().zip(&sqrt_w).map(|(xj, s)| s * xj.powi(k)));
    }
    let qr = HouseholderQr::factor(a, rows, NCOEF);
    if !qr.full_rank() {
        return Err(Error::Degenerate { v, effective: distinct });
    }
    let condition = qr.condition();
    Ok(LocalSystem { start, sqrt_w, qr, effective, condition })
}

/// Kernel-weighted least-squares cubic around `v`:
/// minimizes `Σ_j {U_j - Σ_k γ_k (V_j - v)^k}² K((V_j - v)/h) ω_j`.
///
/// The design is scaled to `(V - v)/h` and solved by Householder QR.
pub fn local_cubic_fit(
    sample: &PairedSample,
    v: f64,
    h: f64,
    kernel: Kernel,
    region_weights: &[f64],
) -> Result<LocalPolyFit> {
    check_inputs(sample, h, region_weights)?;
    let sys = local_system(&sample.v, region_weights, kernel, v, h)?;
    let rhs: Vec<f64> = sys.sqrt_w.iter().zip(&sample.u[sys.start..]).map(|(s, u)| s * u).collect();
    let theta = sys.qr.solve(&rhs);
    let mut gammas = [0.0; NCOEF];
    for (k, g) in gammas.iter_mut().enumerate() {
        *g = theta[k] / h.powi(k as i32);
    }
    Ok(LocalPolyFit {
        gammas,
        v,
        h,
        effective_count: sys.effective,
        condition: sys.condition,
        condition_ok: sys.condition <= MAX_CONDITION,
    })
}

fn check_inputs(sample: &PairedSample, h: f64, region_weights: &[f64]) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidConfig(format!("bandwidth must be positive, got {h}")));
    }
    if region_weights.len() != sample.len() {
        return Err(Error::LengthMismatch { left: sample.len(), right: region_weights.len() });
    }
    Ok(())
}

/// Weights `s_j` of one evaluation point: the estimate is `Σ_j s_j U_{start + j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmootherRow {
    pub start: usize,
    pub weights: Vec<f64>,
}

impl SmootherRow {
    #[inline]
    pub fn apply(&self, u: &[f64]) -> f64 {
        self.weights.iter().zip(&u[self.start..]).map(|(s, u)| s * u).sum()
    }
}

/// The local-cubic estimate of `g^{(order)}` as a fixed linear map of `U`.
///
/// With `V`, `h` and the evaluation points fixed, every estimate is linear in
/// the responses, so the map is built once and reused across resamples.
/// Rows are `None` where the local fit is degenerate.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSmoother {
    pub order: usize,
    pub h: f64,
    pub eval_points: Vec<f64>,
    pub rows: Vec<Option<SmootherRow>>,
    pub ill_conditioned: usize,
}

impl LinearSmoother {
    pub fn new(
        v_sorted: &[f64],
        region_weights: &[f64],
        kernel: Kernel,
        h: f64,
        eval_points: &[f64],
        order: usize,
    ) -> Result<Self> {
        assert!(order <= DEGREE);
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidConfig(format!("bandwidth must be positive, got {h}")));
        }
        if region_weights.len() != v_sorted.len() {
            return Err(Error::LengthMismatch { left: v_sorted.len(), right: region_weights.len() });
        }
        let factor = (1..=order).map(|k| k as f64).product::<f64>() / h.powi(order as i32);
        let built: Vec<(Option<SmootherRow>, bool)> = eval_points
            .par_iter()
            .map(|&v| match local_system(v_sorted, region_weights, kernel, v, h) {
                Ok(sys) => {
                    let rows = sys.sqrt_w.len();
                    let mut z = vec![0.0; rows];
                    z[order] = 1.0;
                    sys.qr.solve_rt(&mut z);
                    for e in z[NCOEF..].iter_mut() {
                        *e = 0.0;
                    }
                    sys.qr.apply_q(&mut z);
                    for (zj, s) in z.iter_mut().zip(&sys.sqrt_w) {
                        *zj *= s * factor;
                    }
                    (Some(SmootherRow { start: sys.start, weights: z }), sys.condition > MAX_CONDITION)
                }
                Err(_) => (None, false),
            })
            .collect();
        let ill_conditioned = built.iter().filter(|(_, ill)| *ill).count();
        Ok(LinearSmoother {
            order,
            h,
            eval_points: eval_points.to_vec(),
            rows: built.into_iter().map(|(r, _)| r).collect(),
            ill_conditioned,
        })
    }

    pub fn apply(&self, u: &[f64]) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.as_ref().map(|r| r.apply(u))).collect()
    }

    /// `max_a |estimate(v_a)|` over non-degenerate points.
    pub fn sup_abs(&self, u: &[f64]) -> Option<f64> {
        self.rows.iter().flatten().map(|r| r.apply(u).abs()).reduce(f64::max)
    }

    pub fn n_missing(&self) -> usize {
        self.rows.iter().filter(|r| r.is_none()).count()
    }
}

/// `ĝ''(v) = 2 γ_2(v)` at each evaluation point; `None` marks a degenerate fit.
pub fn second_derivative_curve(
    sample: &PairedSample,
    h: f64,
    kernel: Kernel,
    region_weights: &[f64],
    eval_points: &[f64],
) -> Result<Vec<Option<f64>>> {
    check_inputs(sample, h, region_weights)?;
    let (lo, hi) = (sample.v_min(), sample.v_max());
    if let Some(&t) = eval_points.iter().find(|&&t| !(t >= lo && t <= hi)) {
        return Err(Error::OutOfRange { t, lo, hi });
    }
    let smoother = LinearSmoother::new(&sample.v, region_weights, kernel, h, eval_points, 2)?;
    Ok(smoother.apply(&sample.u))
}
