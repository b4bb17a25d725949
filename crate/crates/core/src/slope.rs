//! Truncated FPCA estimate of a functional slope.

use crate::error::{Error, Result};
use crate::fpca::{select_kappa, FpcaModel};
use crate::types::{FunctionalDataset, QuadratureKind};

#[derive(Debug, Clone, PartialEq)]
pub struct SlopeEstimate {
    pub kappa: usize,
    pub coefficients: Vec<f64>,
    pub grid: Vec<f64>,
    /// `β(t_g) = Σ_{r ≤ κ} b_r φ_r(t_g)`.
    pub values: Vec<f64>,
    pub model: FpcaModel,
}

impl SlopeEstimate {
    /// Fits the FPCA basis, picks `κ` by fraction of variance explained and
    /// estimates the slope coefficients.
    pub fn fit(data: &FunctionalDataset, fve_threshold: f64, eigen_tol: f64) -> Result<Self> {
        Self::fit_with(data, QuadratureKind::Trapezoid, fve_threshold, eigen_tol)
    }

    pub fn fit_with(
        data: &FunctionalDataset,
        quadrature: QuadratureKind,
        fve_threshold: f64,
        eigen_tol: f64,
    ) -> Result<Self> {
        let model = FpcaModel::fit_with(data, quadrature.rule(&data.grid)?, eigen_tol)?;
        let kappa = select_kappa(&model.eigenvalues, fve_threshold)?;
        Self::with_kappa(model, &data.responses, kappa)
    }

    pub fn with_kappa(model: FpcaModel, responses: &[f64], kappa: usize) -> Result<Self> {
        let coefficients = slope_coefficients(&model, responses, kappa)?;
        let values = slope_function_values(&coefficients, &model);
        Ok(SlopeEstimate { kappa, coefficients, grid: model.grid.clone(), values, model })
    }

    pub fn evaluate(&self, t: f64) -> Result<f64> {
        evaluate_slope(&self.grid, &self.values, t)
    }
}

/// `b_r = [(1/n) Σ_i ξ_{i,r} Y_i] / λ_r` for `r < κ`.
pub fn slope_coefficients(model: &FpcaModel, responses: &[f64], kappa: usize) -> Result<Vec<f64>> {
    let n = model.scores.nrows();
    if responses.len() != n {
        return Err(Error::LengthMismatch { left: n, right: responses.len() });
    }
    if kappa == 0 {
        return Err(Error::InvalidConfig("truncation level must be at least 1".into()));
    }
    (0..kappa)
        .map(|r| {
            let lambda = model.eigenvalues.get(r).copied().unwrap_or(0.0);
            if !(lambda > 0.0) {
                return Err(Error::ZeroEigenvalue { component: r });
            }
            let cross: f64 = model.scores.column(r).iter().zip(responses).map(|(x, y)| x * y).sum();
            Ok(cross / n as f64 / lambda)
        })
        .collect()
}

/// `Σ_r b_r φ_r(t_g)` on the model grid.
pub fn slope_function_values(coefficients: &[f64], model: &FpcaModel) -> Vec<f64> {
    assert!(coefficients.len() <= model.n_components(), "more coefficients than retained components");
    let g = model.grid.len();
    let mut out = vec![0.0; g];
    for (r, b) in coefficients.iter().enumerate() {
        for (o, phi) in out.iter_mut().zip(model.eigenfunctions.row(r).iter()) {
            *o += b * phi;
        }
    }
    out
}

/// Linear interpolation of grid values; exact at the nodes.
pub fn evaluate_slope(grid: &[f64], values: &[f64], t: f64) -> Result<f64> {
    let (lo, hi) = (grid[0], grid[grid.len() - 1]);
    if !(t >= lo && t <= hi) {
        return Err(Error::OutOfRange { t, lo, hi });
    }
    // First index with grid[idx] >= t.
    let idx = grid.partition_point(|x| *x < t);
    if grid[idx] == t {
        return Ok(values[idx]);
    }
    let (t0, t1) = (grid[idx - 1], grid[idx]);
    let frac = (t - t0) / (t1 - t0);
    Ok(values[idx - 1] + frac * (values[idx] - values[idx - 1]))
}
