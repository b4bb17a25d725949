//! Local cubic smoothing of the paired slope sample `U = g(V) + η`.

mod bandwidth;
mod fit;

pub use bandwidth::{equivalent_kernel_constant, rot_bandwidth, BandwidthReport, PILOT_DEGREE};
pub use fit::{local_cubic_fit, second_derivative_curve, LinearSmoother, LocalPolyFit, SmootherRow, MAX_CONDITION};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Kernel;

/// Fewest pairs the statistic and the bandwidth selector accept.
pub const MIN_PAIRS: usize = 8;

/// Local polynomial degree.
pub const DEGREE: usize = 3;

/// Pairs `(V_j, U_j)` sorted by `V` ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedSample {
    pub v: Vec<f64>,
    pub u: Vec<f64>,
}

impl PairedSample {
    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn v_min(&self) -> f64 {
        self.v[0]
    }

    pub fn v_max(&self) -> f64 {
        self.v[self.v.len() - 1]
    }

    /// Same `V`, new responses (bootstrap resamples, rescaled data).
    pub fn with_u(&self, u: Vec<f64>) -> Result<Self> {
        if u.len() != self.v.len() {
            return Err(Error::LengthMismatch { left: self.v.len(), right: u.len() });
        }
        Ok(PairedSample { v: self.v.clone(), u })
    }

    pub(crate) fn require_min_len(&self, needed: usize) -> Result<()> {
        if self.len() < needed {
            return Err(Error::InvalidConfig(format!(
                "paired sample has {} points, need at least {needed}",
                self.len()
            )));
        }
        Ok(())
    }
}

/// Stable-sorts pairs by the second group's slope values; ties keep time order.
pub fn build_paired_sample(beta1_at_tj: &[f64], beta2_at_tj: &[f64]) -> Result<PairedSample> {
    if beta1_at_tj.len() != beta2_at_tj.len() {
        return Err(Error::LengthMismatch { left: beta1_at_tj.len(), right: beta2_at_tj.len() });
    }
    if beta1_at_tj.is_empty() {
        return Err(Error::EmptyList);
    }
    if let Some(index) = beta1_at_tj.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFiniteValue { what: "beta1", index });
    }
    if let Some(index) = beta2_at_tj.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFiniteValue { what: "beta2", index });
    }
    let mut order: Vec<usize> = (0..beta2_at_tj.len()).collect();
    order.sort_by(|&a, &b| beta2_at_tj[a].total_cmp(&beta2_at_tj[b]));
    Ok(PairedSample {
        v: order.iter().map(|&j| beta2_at_tj[j]).collect(),
        u: order.iter().map(|&j| beta1_at_tj[j]).collect(),
    })
}

/// `K` evaluated at `x`.
pub fn kernel_eval(kernel: Kernel, x: f64) -> f64 {
    kernel.eval(x)
}

/// `ν_{a,b} = ∫ v^a K(v)^b dv`.
pub fn kernel_moment(kernel: Kernel, a: u32, b: u32) -> f64 {
    kernel.moment(a, b)
}

/// 0/1 weights selecting pairs whose `V` lies in the `[lo, hi]` fraction of the `V` span.
pub fn region_weights(sample: &PairedSample, trim: (f64, f64)) -> Vec<f64> {
    let (a, b) = trimmed_span(sample.v_min(), sample.v_max(), trim);
    sample.v.iter().map(|&v| if v >= a && v <= b { 1.0 } else { 0.0 }).collect()
}

/// `[lo + trim.0 * range, lo + trim.1 * range]`.
pub fn trimmed_span(lo: f64, hi: f64, trim: (f64, f64)) -> (f64, f64) {
    let range = hi - lo;
    (lo + trim.0 * range, lo + trim.1 * range)
}
