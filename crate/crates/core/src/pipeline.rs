//! End-to-end analysis of two groups: slopes, pairing, bandwidth and test.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::hypothesis::{asymptotic_test, bootstrap_test, test_statistic, TestReport};
use crate::locpoly::{build_paired_sample, region_weights, rot_bandwidth, BandwidthReport, PairedSample};
use crate::slope::SlopeEstimate;
use crate::types::{BandwidthPolicy, FunctionalDataset, TestConfig};

/// How the observed statistic is calibrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "calibration", rename_all = "snake_case")]
pub enum Calibration {
    /// Statistic only.
    None,
    Bootstrap,
    Asymptotic {
        draws: usize,
    },
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub beta1: SlopeEstimate,
    pub beta2: SlopeEstimate,
    pub pairing_times: Vec<f64>,
    pub sample: PairedSample,
    pub bandwidth: Option<BandwidthReport>,
    pub report: TestReport,
}

/// `t_j = (j - 0.5) / m`, `j = 1..m`.
pub fn pairing_times(m: usize) -> Vec<f64> {
    (1..=m).map(|j| (j as f64 - 0.5) / m as f64).collect()
}

/// Slope value at `t`, held constant beyond the ends of the observation grid.
fn slope_at(est: &SlopeEstimate, t: f64) -> Result<f64> {
    let (lo, hi) = (est.grid[0], est.grid[est.grid.len() - 1]);
    est.evaluate(t.clamp(lo, hi))
}

/// Evaluates both slopes at the pairing times and sorts by the second.
pub fn pair_slopes(beta1: &SlopeEstimate, beta2: &SlopeEstimate, times: &[f64]) -> Result<PairedSample> {
    let u = times.iter().map(|&t| slope_at(beta1, t)).collect::<Result<Vec<_>>>()?;
    let v = times.iter().map(|&t| slope_at(beta2, t)).collect::<Result<Vec<_>>>()?;
    build_paired_sample(&u, &v)
}

/// Bandwidth according to the configured policy.
pub fn select_bandwidth(sample: &PairedSample, cfg: &TestConfig) -> Result<(f64, Option<BandwidthReport>)> {
    match cfg.bandwidth {
        BandwidthPolicy::Fixed { h } => Ok((h, None)),
        BandwidthPolicy::RuleOfThumb { inflation } => {
            let w = region_weights(sample, cfg.boundary_trim);
            let rep = rot_bandwidth(sample, cfg.kernel, &w, inflation)?;
            Ok((rep.h_used, Some(rep)))
        }
    }
}

/// Slope estimates of both groups under `cfg`.
pub fn fit_slopes(
    group1: &FunctionalDataset,
    group2: &FunctionalDataset,
    cfg: &TestConfig,
) -> Result<(SlopeEstimate, SlopeEstimate)> {
    let beta1 = SlopeEstimate::fit_with(group1, cfg.quadrature, cfg.fve_threshold, cfg.eigen_tol)?;
    let beta2 = SlopeEstimate::fit_with(group2, cfg.quadrature, cfg.fve_threshold, cfg.eigen_tol)?;
    Ok((beta1, beta2))
}

/// `(beta1, beta2, pairing times, paired sample, bandwidth, bandwidth report)`.
pub type Prepared = (SlopeEstimate, SlopeEstimate, Vec<f64>, PairedSample, f64, Option<BandwidthReport>);

/// Paired sample and bandwidth from two datasets.
pub fn prepare(group1: &FunctionalDataset, group2: &FunctionalDataset, cfg: &TestConfig) -> Result<Prepared> {
    cfg.validate()?;
    let (beta1, beta2) = fit_slopes(group1, group2, cfg)?;
    let times = pairing_times(cfg.pairing_points);
    let sample = pair_slopes(&beta1, &beta2, &times)?;
    let (h, bw) = select_bandwidth(&sample, cfg)?;
    Ok((beta1, beta2, times, sample, h, bw))
}

/// `T_n` of two datasets, without calibration.
pub fn statistic(group1: &FunctionalDataset, group2: &FunctionalDataset, cfg: &TestConfig) -> Result<f64> {
    let (_, _, _, sample, h, _) = prepare(group1, group2, cfg)?;
    Ok(test_statistic(&sample, h, cfg)?.statistic)
}

pub fn analyze(
    group1: &FunctionalDataset,
    group2: &FunctionalDataset,
    cfg: &TestConfig,
    calibration: Calibration,
) -> Result<Analysis> {
    let (beta1, beta2, pairing_times, sample, h, bandwidth) = prepare(group1, group2, cfg)?;
    let report = match calibration {
        Calibration::None => test_statistic(&sample, h, cfg)?,
        Calibration::Bootstrap => bootstrap_test(&sample, h, cfg)?,
        Calibration::Asymptotic { draws } => asymptotic_test(&sample, h, cfg, draws)?,
    };
    Ok(Analysis { beta1, beta2, pairing_times, sample, bandwidth, report })
}
