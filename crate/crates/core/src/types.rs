//! Shared data model: functional samples, quadrature weights and run configuration.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Kernel;

/// One group's curves sampled on a common grid, together with the scalar responses.
///
/// `curves` is `n x G`: row `i` holds subject `i` evaluated at `grid`.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalDataset {
    pub grid: Vec<f64>,
    pub curves: DMatrix<f64>,
    pub responses: Vec<f64>,
}

pub const MIN_SUBJECTS: usize = 2;
pub const MIN_GRID_POINTS: usize = 4;

impl FunctionalDataset {
    /// Builds and validates a dataset.
    pub fn new(grid: Vec<f64>, curves: DMatrix<f64>, responses: Vec<f64>) -> Result<Self> {
        validate_dataset(FunctionalDataset { grid, curves, responses })
    }

    pub fn n_subjects(&self) -> usize {
        self.curves.nrows()
    }

    pub fn n_grid(&self) -> usize {
        self.grid.len()
    }
}

/// Checks the dataset invariants and hands the dataset back untouched.
pub fn validate_dataset(raw: FunctionalDataset) -> Result<FunctionalDataset> {
    let n = raw.curves.nrows();
    if raw.curves.ncols() != raw.grid.len() {
        return Err(Error::ShapeMismatch(format!(
            "curves have {} columns but the grid has {} points",
            raw.curves.ncols(),
            raw.grid.len()
        )));
    }
    if n != raw.responses.len() {
        return Err(Error::ShapeMismatch(format!("{} curves but {} responses", n, raw.responses.len())));
    }
    if let Some(index) = raw.grid.iter().position(|t| !t.is_finite()) {
        return Err(Error::NonFiniteValue { what: "grid", index });
    }
    if let Some(index) = raw.grid.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::NonMonotoneGrid { index: index + 1 });
    }
    if let Some(&value) = raw.grid.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::GridOutOfUnitInterval { value });
    }
    if raw.grid.len() < MIN_GRID_POINTS {
        return Err(Error::GridTooShort { needed: MIN_GRID_POINTS, got: raw.grid.len() });
    }
    if n < MIN_SUBJECTS {
        return Err(Error::ShapeMismatch(format!("need at least {MIN_SUBJECTS} subjects, got {n}")));
    }
    // DMatrix storage is column-major; report the row-major subject-wise index.
    if let Some(pos) = raw.curves.iter().position(|x| !x.is_finite()) {
        let (row, col) = (pos % n, pos / n);
        return Err(Error::NonFiniteValue { what: "curves", index: row * raw.grid.len() + col });
    }
    if let Some(index) = raw.responses.iter().position(|y| !y.is_finite()) {
        return Err(Error::NonFiniteValue { what: "responses", index });
    }
    Ok(raw)
}

/// Quadrature weights attached to a grid; `integrate` approximates the integral
/// of grid-sampled values over `[t_1, t_G]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.weights.len());
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// Weighted inner product of two grid-sampled functions.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weights.iter().zip(a).zip(b).map(|((w, x), y)| w * x * y).sum()
    }
}

/// Composite trapezoid weights for a strictly increasing grid.
pub fn trapezoid_rule(grid: &[f64]) -> Result<QuadratureRule> {
    let g = grid.len();
    if g < 2 {
        return Err(Error::GridTooShort { needed: 2, got: g });
    }
    if let Some(index) = grid.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::NonMonotoneGrid { index: index + 1 });
    }
    let weights = (0..g)
        .map(|i| {
            let left = if i == 0 { grid[0] } else { grid[i - 1] };
            let right = if i == g - 1 { grid[g - 1] } else { grid[i + 1] };
            0.5 * (right - left)
        })
        .collect();
    Ok(QuadratureRule { weights })
}

/// Midpoint-cell weights over `[0, 1]`: each node owns the part of the unit
/// interval closer to it than to its neighbours.
///
/// Coincides with the trapezoid rule when the grid contains both ends of
/// `[0, 1]`, and with the equal-weight Riemann sum on a cell-centred grid.
pub fn unit_cell_rule(grid: &[f64]) -> Result<QuadratureRule> {
    let g = grid.len();
    if g < 2 {
        return Err(Error::GridTooShort { needed: 2, got: g });
    }
    if let Some(index) = grid.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::NonMonotoneGrid { index: index + 1 });
    }
    if let Some(&value) = grid.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::GridOutOfUnitInterval { value });
    }
    let weights = (0..g)
        .map(|i| {
            let left = if i == 0 { 0.0 } else { 0.5 * (grid[i - 1] + grid[i]) };
            let right = if i == g - 1 { 1.0 } else { 0.5 * (grid[i] + grid[i + 1]) };
            right - left
        })
        .collect();
    Ok(QuadratureRule { weights })
}

/// Which quadrature discretizes the integrals over `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureKind {
    /// Trapezoid rule over `[t_1, t_G]`.
    #[default]
    Trapezoid,
    /// [`unit_cell_rule`] over `[0, 1]`.
    UnitCells,
}

impl QuadratureKind {
    pub fn rule(self, grid: &[f64]) -> Result<QuadratureRule> {
        match self {
            QuadratureKind::Trapezoid => trapezoid_rule(grid),
            QuadratureKind::UnitCells => unit_cell_rule(grid),
        }
    }
}

/// How the local-polynomial bandwidth is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum BandwidthPolicy {
    /// Rule-of-thumb bandwidth multiplied by `inflation`.
    RuleOfThumb {
        inflation: f64,
    },
    Fixed {
        h: f64,
    },
}

impl Default for BandwidthPolicy {
    fn default() -> Self {
        BandwidthPolicy::RuleOfThumb { inflation: DEFAULT_INFLATION }
    }
}

pub const DEFAULT_INFLATION: f64 = 2.0;

/// What a bootstrap replicate is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BootstrapScheme {
    /// `T*_b = sup |ĝ''*|`, counted against `T_n`.
    #[default]
    Literal,
    /// `T*_b = sup |ĝ''* - E*ĝ''*|`: the resampled deviation process, whose law
    /// under a linear `g` matches that of `T_n`.
    Centered,
}

/// Evaluation interval for the supremum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupRegion {
    /// All of `[min V, max V]`.
    #[default]
    Full,
    /// The boundary-trimmed span also used by the region weights.
    Trimmed,
}

/// Everything that parameterizes a single run of the test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestConfig {
    /// Number of pairing time points `m`.
    pub pairing_points: usize,
    pub fve_threshold: f64,
    pub quadrature: QuadratureKind,
    /// Relative cut-off below which eigenvalues are treated as zero.
    pub eigen_tol: f64,
    pub kernel: Kernel,
    pub bandwidth: BandwidthPolicy,
    pub eval_grid_size: usize,
    /// Fractions of the `[min V, max V]` span that delimit the region weights.
    pub boundary_trim: (f64, f64),
    pub bootstrap_reps: usize,
    pub bootstrap_scheme: BootstrapScheme,
    /// Part of `[min V, max V]` over which the supremum is taken.
    pub sup_region: SupRegion,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for TestConfig {
    fn default() -> Self {
        TestConfig {
            pairing_points: 500,
            fve_threshold: 0.99,
            quadrature: QuadratureKind::default(),
            eigen_tol: 1e-12,
            kernel: Kernel::Gaussian,
            bandwidth: BandwidthPolicy::default(),
            eval_grid_size: 2000,
            boundary_trim: (0.1, 0.9),
            bootstrap_reps: 500,
            bootstrap_scheme: BootstrapScheme::default(),
            sup_region: SupRegion::default(),
            alpha: 0.05,
            seed: 0,
        }
    }
}

impl TestConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.pairing_points < crate::locpoly::MIN_PAIRS {
            return bad(format!(
                "pairing points must be at least {}, got {}",
                crate::locpoly::MIN_PAIRS,
                self.pairing_points
            ));
        }
        if !(self.fve_threshold > 0.0 && self.fve_threshold <= 1.0) {
            return bad(format!("FVE threshold must lie in (0, 1], got {}", self.fve_threshold));
        }
        if !(self.eigen_tol >= 0.0 && self.eigen_tol < 1.0) {
            return bad(format!("eigen tolerance must lie in [0, 1), got {}", self.eigen_tol));
        }
        match self.bandwidth {
            BandwidthPolicy::RuleOfThumb { inflation } if !(inflation > 0.0 && inflation.is_finite()) => {
                return bad(format!("bandwidth inflation must be positive, got {inflation}"));
            }
            BandwidthPolicy::Fixed { h } if !(h > 0.0 && h.is_finite()) => {
                return bad(format!("fixed bandwidth must be positive, got {h}"));
            }
            _ => {}
        }
        if self.eval_grid_size < 10 {
            return bad(format!("evaluation grid needs at least 10 points, got {}", self.eval_grid_size));
        }
        let (lo, hi) = self.boundary_trim;
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo >= hi {
            return bad(format!("boundary trim must satisfy 0 <= lo < hi <= 1, got ({lo}, {hi})"));
        }
        if self.bootstrap_reps < 1 {
            return bad("bootstrap replicates must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        Ok(())
    }
}
