//! Empirical functional principal component analysis on a common grid.
//!
//! Integrals are discretized with the dataset's trapezoid weights `w`, so the
//! integral eigenproblem `∫ V(s, t) φ(s) ds = λ φ(t)` becomes the symmetric
//! matrix problem `W^{1/2} V W^{1/2} u = λ u` with `φ = W^{-1/2} u`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::types::{trapezoid_rule, FunctionalDataset, QuadratureRule};

/// Relative eigenvalue cut-off used when none is configured.
pub const DEFAULT_EIGEN_TOL: f64 = 1e-12;

const SIGN_EPS: f64 = 1e-10;
const MAX_EIGEN_ITERS: usize = 100_000;

/// Retained eigencomponents of a covariance operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigencomponents {
    /// Non-increasing, strictly positive.
    pub values: Vec<f64>,
    /// `R x G`; row `r` is the `r`-th eigenfunction on the grid.
    pub functions: DMatrix<f64>,
    /// Sum of all eigenvalues before clipping.
    pub trace: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FpcaModel {
    pub grid: Vec<f64>,
    pub mean_curve: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    /// `R x G`, quadrature-orthonormal rows.
    pub eigenfunctions: DMatrix<f64>,
    /// `n x R`.
    pub scores: DMatrix<f64>,
    pub quadrature: QuadratureRule,
    /// `Σ_g w_g V(t_g, t_g)`, the total variance before clipping.
    pub total_variance: f64,
}

impl FpcaModel {
    /// Fits with trapezoid weights.
    pub fn fit(data: &FunctionalDataset, tol: f64) -> Result<Self> {
        Self::fit_with(data, trapezoid_rule(&data.grid)?, tol)
    }

    pub fn fit_with(data: &FunctionalDataset, quadrature: QuadratureRule, tol: f64) -> Result<Self> {
        if quadrature.len() != data.grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} quadrature weights for a grid of {} points",
                quadrature.len(),
                data.grid.len()
            )));
        }
        let mean_curve = compute_mean(data);
        let cov = covariance_about(data, &mean_curve);
        let eig = eigendecompose(&cov, &quadrature, tol)?;
        let scores = project_scores(data, &mean_curve, &eig.functions, &quadrature);
        Ok(FpcaModel {
            grid: data.grid.clone(),
            mean_curve,
            eigenvalues: eig.values,
            eigenfunctions: eig.functions,
            scores,
            quadrature,
            total_variance: eig.trace,
        })
    }

    pub fn n_components(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenfunction(&self, r: usize) -> Vec<f64> {
        self.eigenfunctions.row(r).iter().copied().collect()
    }
}

/// Pointwise mean over subjects.
pub fn compute_mean(data: &FunctionalDataset) -> Vec<f64> {
    let n = data.curves.nrows() as f64;
    data.curves.column_iter().map(|col| col.sum() / n).collect()
}

/// `G x G` covariance with divisor `n`.
pub fn empirical_covariance(data: &FunctionalDataset) -> DMatrix<f64> {
    covariance_about(data, &compute_mean(data))
}

fn centered(data: &FunctionalDataset, mean: &[f64]) -> DMatrix<f64> {
    let mut xc = data.curves.clone();
    for (mut col, m) in xc.column_iter_mut().zip(mean) {
        col.add_scalar_mut(-m);
    }
    xc
}

fn covariance_about(data: &FunctionalDataset, mean: &[f64]) -> DMatrix<f64> {
    let xc = centered(data, mean);
    let mut cov = xc.tr_mul(&xc);
    cov /= data.curves.nrows() as f64;
    // Exact symmetry regardless of summation order in the product.
    let g = cov.nrows();
    for a in 0..g {
        for b in 0..a {
            let s = 0.5 * (cov[(a, b)] + cov[(b, a)]);
            cov[(a, b)] = s;
            cov[(b, a)] = s;
        }
    }
    cov
}

/// Solves the quadrature-discretized integral eigenproblem.
///
/// Components whose eigenvalue is negative or below `tol * λ_1` are dropped.
/// Each eigenfunction is signed so that its integral is non-negative; when the
/// integral vanishes (within `1e-10`) the first entry exceeding `1e-10` in
/// magnitude is made positive.
pub fn eigendecompose(cov: &DMatrix<f64>, quad: &QuadratureRule, tol: f64) -> Result<Eigencomponents> {
    let g = cov.nrows();
    if cov.ncols() != g || quad.len() != g {
        return Err(Error::ShapeMismatch(format!(
            "covariance is {}x{} but the quadrature has {} weights",
            g,
            cov.ncols(),
            quad.len()
        )));
    }
    let sqrt_w: Vec<f64> = quad.weights.iter().map(|w| w.sqrt()).collect();
    let m = DMatrix::from_fn(g, g, |a, b| sqrt_w[a] * cov[(a, b)] * sqrt_w[b]);
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, MAX_EIGEN_ITERS).ok_or(Error::EigenFailure)?;

    let trace: f64 = eig.eigenvalues.iter().sum();
    let mut order: Vec<usize> = (0..g).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));

    let lead = eig.eigenvalues[order[0]];
    let keep: Vec<usize> = if lead > 0.0 {
        order.into_iter().take_while(|&i| eig.eigenvalues[i] > tol * lead && eig.eigenvalues[i] > 0.0).collect()
    } else {
        Vec::new()
    };

    let mut functions = DMatrix::zeros(keep.len(), g);
    let mut values = Vec::with_capacity(keep.len());
    for (r, &idx) in keep.iter().enumerate() {
        let u = eig.eigenvectors.column(idx);
        let mut phi: Vec<f64> = u.iter().zip(&sqrt_w).map(|(x, s)| x / s).collect();
        if orientation(&phi, quad) < 0.0 {
            phi.iter_mut().for_each(|x| *x = -*x);
        }
        for (c, x) in phi.into_iter().enumerate() {
            functions[(r, c)] = x;
        }
        values.push(eig.eigenvalues[idx]);
    }
    Ok(Eigencomponents { values, functions, trace })
}

fn orientation(phi: &[f64], quad: &QuadratureRule) -> f64 {
    let integral = quad.integrate(phi);
    if integral.abs() > SIGN_EPS {
        return integral;
    }
    phi.iter().copied().find(|x| x.abs() > SIGN_EPS).unwrap_or(1.0)
}

/// `ξ_{i,r} = Σ_g w_g (X_i(t_g) - X̄(t_g)) φ_r(t_g)`.
pub fn project_scores(
    data: &FunctionalDataset,
    mean: &[f64],
    functions: &DMatrix<f64>,
    quad: &QuadratureRule,
) -> DMatrix<f64> {
    let xc = centered(data, mean);
    let mut weighted = functions.transpose();
    for (mut row, w) in weighted.row_iter_mut().zip(&quad.weights) {
        row *= *w;
    }
    xc * weighted
}

/// Per-subject scores against an already fitted model.
pub fn scores(data: &FunctionalDataset, model: &FpcaModel) -> DMatrix<f64> {
    project_scores(data, &model.mean_curve, &model.eigenfunctions, &model.quadrature)
}

/// Smallest `κ` whose leading eigenvalues explain at least `fve_threshold` of the
/// retained variance.
pub fn select_kappa(eigenvalues: &[f64], fve_threshold: f64) -> Result<usize> {
    let total: f64 = eigenvalues.iter().filter(|l| **l > 0.0).sum();
    if !(total > 0.0) {
        return Err(Error::AllZeroSpectrum);
    }
    let positive = eigenvalues.iter().take_while(|l| **l > 0.0).count();
    let mut cum = 0.0;
    for (k, l) in eigenvalues.iter().take(positive).enumerate() {
        cum += l;
        // Relative slack so that a threshold of exactly 1 is reachable despite rounding.
        if cum / total >= fve_threshold - 1e-12 {
            return Ok(k + 1);
        }
    }
    Ok(positive)
}
