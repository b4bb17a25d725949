//! Two-sample test of whether two functional regression slopes are related by
//! a non-linear transformation `β₁ = g(β₂)`.
//!
//! Each group's slope is estimated by truncated functional principal
//! components. The two slope estimates are evaluated at common time points and
//! paired as `U = β̂₁`, `V = β̂₂`; a local cubic smoother estimates `g''` and
//! the test statistic is `T_n = sup |ĝ''|` over the observed range of `V`.
//! The statistic can be calibrated by a residual bootstrap or by simulating
//! the supremum of the limiting Gaussian process.
//!
//! ```
//! use nlslope_core::{locpoly, hypothesis, TestConfig};
//!
//! let v: Vec<f64> = (0..200).map(|j| (j as f64 + 0.5) / 200.0).collect();
//! let u: Vec<f64> = v.iter().map(|x| x * x).collect();
//! let sample = locpoly::build_paired_sample(&u, &v).unwrap();
//! let cfg = TestConfig { eval_grid_size: 100, ..TestConfig::default() };
//! let report = hypothesis::test_statistic(&sample, 0.2, &cfg).unwrap();
//! assert!((report.statistic - 2.0).abs() < 1e-8);
//! ```

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fpca;
pub mod hypothesis;
pub mod kernel;
pub mod locpoly;
mod lsq;
pub mod pipeline;
pub mod sim;
pub mod slope;
pub mod types;

pub use error::{Error, Result};
pub use fpca::FpcaModel;
pub use hypothesis::{GpCalibration, Method, TestReport};
pub use kernel::Kernel;
pub use locpoly::{BandwidthReport, LocalPolyFit, PairedSample};
pub use pipeline::{Analysis, Calibration};
pub use sim::{Example, ExperimentRow, SimSpec};
pub use slope::SlopeEstimate;
pub use types::{
    trapezoid_rule, unit_cell_rule, validate_dataset, BandwidthPolicy, BootstrapScheme, FunctionalDataset,
    QuadratureKind, QuadratureRule, SupRegion, TestConfig,
};
