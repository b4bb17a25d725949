//! The sup-norm statistic `T_n = sup |ĝ''|` and its calibrations.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::locpoly::{region_weights, trimmed_span, LinearSmoother, PairedSample, DEGREE, MIN_PAIRS};
use crate::types::{BootstrapScheme, SupRegion, TestConfig};

/// Share of degenerate bootstrap replicates above which a report is unreliable.
pub const UNRELIABLE_SHARE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Bootstrap,
    AsymptoticGp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub statistic: f64,
    pub h_used: f64,
    pub v_hat_1: f64,
    pub v_hat_2: f64,
    pub eval_points: Vec<f64>,
    /// `ĝ''` at each evaluation point; `None` where the local fit is degenerate.
    pub g2_curve: Vec<Option<f64>>,
    pub degenerate_points: usize,
    pub ill_conditioned_points: usize,
    pub method: Option<Method>,
    pub p_value: Option<f64>,
    pub bootstrap_stats: Vec<f64>,
    pub bootstrap_missing: usize,
    /// Rejection threshold on the `T_n` scale, for the asymptotic calibration.
    pub critical_value: Option<f64>,
    pub reject: Option<bool>,
    pub unreliable: bool,
    pub seed: Option<u64>,
}

/// `n` equispaced points from `lo` to `hi` inclusive.
pub fn eval_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect(),
    }
}

/// Interval over which the supremum is taken.
pub fn sup_interval(sample: &PairedSample, cfg: &TestConfig) -> (f64, f64) {
    let (lo, hi) = (sample.v_min(), sample.v_max());
    match cfg.sup_region {
        SupRegion::Full => (lo, hi),
        SupRegion::Trimmed => trimmed_span(lo, hi, cfg.boundary_trim),
    }
}

/// `U ↦ ĝ''` on the evaluation grid for fixed `V` and `h`.
#[derive(Debug, Clone)]
pub struct CurvatureOperator {
    pub smoother: LinearSmoother,
    pub region: Vec<f64>,
}

impl CurvatureOperator {
    pub fn new(sample: &PairedSample, h: f64, cfg: &TestConfig) -> Result<Self> {
        sample.require_min_len(MIN_PAIRS)?;
        let region = region_weights(sample, cfg.boundary_trim);
        let (lo, hi) = sup_interval(sample, cfg);
        let grid = eval_grid(lo, hi, cfg.eval_grid_size);
        let smoother = LinearSmoother::new(&sample.v, &region, cfg.kernel, h, &grid, 2)?;
        if smoother.n_missing() == grid.len() {
            return Err(Error::AllDegenerate);
        }
        Ok(CurvatureOperator { smoother, region })
    }

    pub fn curve(&self, u: &[f64]) -> Vec<Option<f64>> {
        self.smoother.apply(u)
    }

    pub fn statistic(&self, u: &[f64]) -> f64 {
        self.smoother.sup_abs(u).expect("operator has at least one evaluable point")
    }
}

/// Computes `T_n` over `cfg.eval_grid_size` equispaced points, skipping degenerate fits.
pub fn test_statistic(sample: &PairedSample, h: f64, cfg: &TestConfig) -> Result<TestReport> {
    let op = CurvatureOperator::new(sample, h, cfg)?;
    Ok(report_from(&op, sample, h))
}

fn report_from(op: &CurvatureOperator, sample: &PairedSample, h: f64) -> TestReport {
    let g2_curve = op.curve(&sample.u);
    let statistic = g2_curve.iter().flatten().fold(0.0f64, |acc, x| acc.max(x.abs()));
    TestReport {
        statistic,
        h_used: h,
        v_hat_1: sample.v_min(),
        v_hat_2: sample.v_max(),
        eval_points: op.smoother.eval_points.clone(),
        degenerate_points: op.smoother.n_missing(),
        ill_conditioned_points: op.smoother.ill_conditioned,
        g2_curve,
        method: None,
        p_value: None,
        bootstrap_stats: Vec::new(),
        bootstrap_missing: 0,
        critical_value: None,
        reject: None,
        unreliable: false,
        seed: None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapOutcome {
    pub statistic: f64,
    pub p_value: f64,
    pub stats: Vec<f64>,
    pub missing: usize,
    pub unreliable: bool,
    /// Mean of the centered residuals (zero up to rounding).
    pub residual_mean: f64,
    /// Points where the level fit `ĝ(V_j)` was degenerate and `U_j` was kept.
    pub level_fallbacks: usize,
}

/// `#{b : stats_b ≥ t} / B`.
pub fn exceedance_pvalue(stats: &[f64], t: f64) -> f64 {
    assert!(!stats.is_empty(), "need at least one replicate");
    stats.iter().filter(|s| **s >= t).count() as f64 / stats.len() as f64
}

/// Residual bootstrap of `T_n` with `cfg.bootstrap_reps` replicates.
///
/// Replicate `b` draws from its own ChaCha stream `(cfg.seed, b)`, so the result
/// does not depend on the number of worker threads. `V` and `h` are fixed
/// across replicates, which makes every replicate a linear map of the
/// resampled responses; degeneracy is decided by `V` alone and is therefore
/// shared by all replicates.
pub fn bootstrap_pvalue(sample: &PairedSample, h: f64, cfg: &TestConfig) -> Result<BootstrapOutcome> {
    let op = CurvatureOperator::new(sample, h, cfg)?;
    bootstrap_with(&op, sample, h, cfg)
}

fn bootstrap_with(op: &CurvatureOperator, sample: &PairedSample, h: f64, cfg: &TestConfig) -> Result<BootstrapOutcome> {
    let reps = cfg.bootstrap_reps;
    if reps == 0 {
        return Err(Error::InvalidConfig("bootstrap replicates must be at least 1".into()));
    }
    let m = sample.len();
    let level = LinearSmoother::new(&sample.v, &op.region, cfg.kernel, h, &sample.v, 0)?;
    let fitted: Vec<Option<f64>> = level.apply(&sample.u);
    let level_fallbacks = fitted.iter().filter(|x| x.is_none()).count();
    let g_hat: Vec<f64> = fitted.iter().zip(&sample.u).map(|(f, u)| f.unwrap_or(*u)).collect();
    let raw: Vec<f64> = sample.u.iter().zip(&g_hat).map(|(u, g)| u - g).collect();
    let mean = raw.iter().sum::<f64>() / m as f64;
    let resid: Vec<f64> = raw.iter().map(|r| r - mean).collect();
    let residual_mean = resid.iter().sum::<f64>() / m as f64;

    let statistic = op.statistic(&sample.u);
    let stats: Vec<f64> = (0..reps as u64)
        .into_par_iter()
        .map_init(
            || vec![0.0; m],
            |u_star, b| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(b);
                for (j, slot) in u_star.iter_mut().enumerate() {
                    let eta = resid[rng.random_range(0..m)];
                    *slot = match cfg.bootstrap_scheme {
                        BootstrapScheme::Literal => g_hat[j] + eta,
                        // E*[ĝ''*] is the smoother applied to ĝ(V); subtracting it
                        // leaves the smoother applied to η*.
                        BootstrapScheme::Centered => eta,
                    };
                }
                op.statistic(u_star)
            },
        )
        .collect();
    let missing = 0;
    Ok(BootstrapOutcome {
        statistic,
        p_value: exceedance_pvalue(&stats, statistic),
        stats,
        missing,
        unreliable: missing as f64 > UNRELIABLE_SHARE * reps as f64,
        residual_mean,
        level_fallbacks,
    })
}

/// `T_n` plus its bootstrap p-value.
pub fn bootstrap_test(sample: &PairedSample, h: f64, cfg: &TestConfig) -> Result<TestReport> {
    let op = CurvatureOperator::new(sample, h, cfg)?;
    let mut report = report_from(&op, sample, h);
    let boot = bootstrap_with(&op, sample, h, cfg)?;
    report.method = Some(Method::Bootstrap);
    report.p_value = Some(boot.p_value);
    report.reject = Some(boot.p_value <= cfg.alpha);
    report.bootstrap_stats = boot.stats;
    report.bootstrap_missing = boot.missing;
    report.unreliable = boot.unreliable;
    report.seed = Some(cfg.seed);
    Ok(report)
}

/// Simulated quantile of the supremum of a discretized Gaussian process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpCalibration {
    pub grid: Vec<f64>,
    /// Covariance of the process on `grid`.
    #[serde(skip)]
    pub covariance: DMatrix<f64>,
    pub draws: usize,
    pub alpha: f64,
    pub b_alpha: f64,
    /// Set when negative eigenvalues had to be clipped to make the covariance PSD.
    pub clipped: bool,
}

impl GpCalibration {
    /// Calibrates from an explicit covariance matrix, factored through its
    /// eigendecomposition with negative eigenvalues clipped to zero.
    pub fn from_covariance(
        grid: Vec<f64>,
        covariance: DMatrix<f64>,
        draws: usize,
        alpha: f64,
        seed: u64,
    ) -> Result<Self> {
        check_draws(draws, alpha)?;
        let a = covariance.nrows();
        if covariance.ncols() != a || grid.len() != a {
            return Err(Error::ShapeMismatch(format!(
                "covariance is {}x{}, grid has {} points",
                covariance.nrows(),
                covariance.ncols(),
                grid.len()
            )));
        }
        let sym = (&covariance + covariance.transpose()) * 0.5;
        let eig = nalgebra::SymmetricEigen::try_new(sym, f64::EPSILON, 100_000).ok_or(Error::EigenFailure)?;
        let scale = eig.eigenvalues.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        let clipped = eig.eigenvalues.iter().any(|l| *l < -1e-8 * scale.max(1.0));
        let mut factor = eig.eigenvectors.clone();
        for (mut col, l) in factor.column_iter_mut().zip(eig.eigenvalues.iter()) {
            col *= l.max(0.0).sqrt();
        }
        let b_alpha = simulate_quantile(&factor, 1.0, draws, alpha, seed);
        Ok(GpCalibration { grid, covariance, draws, alpha, b_alpha, clipped })
    }

    /// Rejection threshold `b_α / √(m h⁵)` on the scale of `T_n`.
    pub fn threshold(&self, m: usize, h: f64) -> f64 {
        self.b_alpha / (m as f64 * h.powi(5)).sqrt()
    }
}

fn check_draws(draws: usize, alpha: f64) -> Result<()> {
    if draws == 0 {
        return Err(Error::InvalidConfig("need at least one Gaussian draw".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// `(1-α)` order statistic of `max_a |(c · F z)_a|` over `draws` standard normal `z`.
fn simulate_quantile(factor: &DMatrix<f64>, c: f64, draws: usize, alpha: f64, seed: u64) -> f64 {
    let k = factor.ncols();
    let maxima: Vec<f64> = (0..draws as u64)
        .into_par_iter()
        .map(|d| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(d);
            let z = DVector::from_iterator(k, (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)));
            (factor * z).iter().fold(0.0f64, |acc, x| acc.max((c * x).abs()))
        })
        .collect();
    order_statistic(maxima, alpha)
}

/// Value at 1-based rank `⌈(1-α) B⌉` of the ascending sort.
fn order_statistic(mut values: Vec<f64>, alpha: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let b = values.len();
    let k = (((1.0 - alpha) * b as f64) - 1e-9).ceil().clamp(1.0, b as f64) as usize;
    values[k - 1]
}

/// Gaussian-process calibration from the empirical influence functions
/// `f_a(j) = e₃' Ω⁻¹ Ψ_h(v_a; V_j, U_j) / √h`.
///
/// Draws are generated as `m^{-1/2} F z` with `F` the centered influence
/// matrix, which has exactly the empirical covariance without factoring it.
pub fn asymptotic_critical_value(
    sample: &PairedSample,
    h: f64,
    cfg: &TestConfig,
    draws: usize,
    seed: u64,
) -> Result<GpCalibration> {
    check_draws(draws, cfg.alpha)?;
    sample.require_min_len(MIN_PAIRS)?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidConfig(format!("bandwidth must be positive, got {h}")));
    }
    let m = sample.len();
    let dim = DEGREE + 1;
    let omega = DMatrix::from_fn(dim, dim, |i, j| cfg.kernel.moment((i + j) as u32, 1));
    let omega_inv = omega.try_inverse().ok_or(Error::EigenFailure)?;
    let row: Vec<f64> = omega_inv.row(2).iter().copied().collect();
    let (lo, hi) = sup_interval(sample, cfg);
    let grid = eval_grid(lo, hi, cfg.eval_grid_size);
    let inv_sqrt_h = 1.0 / h.sqrt();

    let rows: Vec<Vec<f64>> = grid
        .par_iter()
        .map(|&v| {
            let f: Vec<f64> = sample
                .v
                .iter()
                .zip(&sample.u)
                .map(|(vj, uj)| {
                    let x = (vj - v) / h;
                    let k = cfg.kernel.eval(x);
                    let mut p = 1.0;
                    let mut acc = 0.0;
                    for c in &row {
                        acc += c * p;
                        p *= x;
                    }
                    uj * k * acc * inv_sqrt_h
                })
                .collect();
            let mean = f.iter().sum::<f64>() / m as f64;
            f.into_iter().map(|x| x - mean).collect()
        })
        .collect();
    let a = grid.len();
    let centered = DMatrix::from_fn(a, m, |i, j| rows[i][j]);
    let covariance = &centered * centered.transpose() / m as f64;
    let b_alpha = simulate_quantile(&centered, 1.0 / (m as f64).sqrt(), draws, cfg.alpha, seed);
    Ok(GpCalibration { grid, covariance, draws, alpha: cfg.alpha, b_alpha, clipped: false })
}

/// `T_n` judged against the asymptotic threshold `b_α / √(m h⁵)`.
pub fn asymptotic_test(sample: &PairedSample, h: f64, cfg: &TestConfig, draws: usize) -> Result<TestReport> {
    let op = CurvatureOperator::new(sample, h, cfg)?;
    let mut report = report_from(&op, sample, h);
    let gp = asymptotic_critical_value(sample, h, cfg, draws, cfg.seed)?;
    let threshold = gp.threshold(sample.len(), h);
    report.method = Some(Method::AsymptoticGp);
    report.critical_value = Some(threshold);
    report.reject = Some(report.statistic >= threshold);
    report.seed = Some(cfg.seed);
    Ok(report)
}

/// Order statistic at rank `⌈(1-α) B⌉` of simulated null statistics.
///
/// # Panics
/// If `null_stats` is empty.
pub fn critical_from_null(null_stats: &[f64], alpha: f64) -> f64 {
    assert!(!null_stats.is_empty(), "need at least one null statistic");
    order_statistic(null_stats.to_vec(), alpha)
}

/// Fraction of statistics strictly above `critical`.
pub fn size_power(stats: &[f64], critical: f64) -> f64 {
    assert!(!stats.is_empty(), "need at least one statistic");
    stats.iter().filter(|s| **s > critical).count() as f64 / stats.len() as f64
}

/// Minimum of per-pair statistics, for more than two groups.
pub fn multisample_statistic(stats: &[f64]) -> Result<f64> {
    stats.iter().copied().reduce(f64::min).ok_or(Error::EmptyList)
}
