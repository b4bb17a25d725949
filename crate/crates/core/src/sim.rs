//! Simulation design: Fourier covariates, four choices of `g`, and a size/power runner.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypothesis::{critical_from_null, size_power};
use crate::locpoly::{trimmed_span, MIN_PAIRS};
use crate::pipeline;
use crate::types::{FunctionalDataset, TestConfig};

/// Points of the Riemann grid on which curves are generated.
pub const RIEMANN_POINTS: usize = 500;
/// Sine and cosine terms in the covariate expansion.
pub const FOURIER_TERMS: usize = 50;
/// Standard deviation of the response noise.
pub const NOISE_SD: f64 = 0.01;
/// Points of the dense grid used by default for `sup |g''|`.
pub const DENSE_GRID: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Example {
    /// `10 v + 1`
    Linear,
    /// `1 - 4v + 2v² - 3v³ + v⁴`
    Quartic,
    /// `0.3 exp(-3(v+1)²) + 0.7 exp(-7(v-1)²)`
    Bumps,
    /// `sin 8v + cos 8v + log(4/3 + v)`
    Oscillating,
}

impl Example {
    pub const ALL: [Example; 4] = [Example::Linear, Example::Quartic, Example::Bumps, Example::Oscillating];

    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            1 => Ok(Example::Linear),
            2 => Ok(Example::Quartic),
            3 => Ok(Example::Bumps),
            4 => Ok(Example::Oscillating),
            _ => Err(Error::InvalidConfig(format!("example must be 1..=4, got {id}"))),
        }
    }

    pub fn id(self) -> u8 {
        match self {
            Example::Linear => 1,
            Example::Quartic => 2,
            Example::Bumps => 3,
            Example::Oscillating => 4,
        }
    }

    /// `(g(v), g''(v))`.
    pub fn g_and_g2(self, v: f64) -> Result<(f64, f64)> {
        Ok(match self {
            Example::Linear => (10.0 * v + 1.0, 0.0),
            Example::Quartic => {
                let g = 1.0 + v * (-4.0 + v * (2.0 + v * (-3.0 + v)));
                (g, 4.0 - 18.0 * v + 12.0 * v * v)
            }
            Example::Bumps => {
                let a = v + 1.0;
                let b = v - 1.0;
                let ea = (-3.0 * a * a).exp();
                let eb = (-7.0 * b * b).exp();
                let g = 0.3 * ea + 0.7 * eb;
                // d²/dv² exp(-c (v-s)²) = (4c²(v-s)² - 2c) exp(-c (v-s)²)
                let g2 = 0.3 * (36.0 * a * a - 6.0) * ea + 0.7 * (196.0 * b * b - 14.0) * eb;
                (g, g2)
            }
            Example::Oscillating => {
                let x = 4.0 / 3.0 + v;
                if x <= 0.0 {
                    return Err(Error::DomainError { example: 4, v });
                }
                let (s, c) = (8.0 * v).sin_cos();
                (s + c + x.ln(), -64.0 * (s + c) - 1.0 / (x * x))
            }
        })
    }

    pub fn g(self, v: f64) -> Result<f64> {
        self.g_and_g2(v).map(|(g, _)| g)
    }
}

/// `(g(v), g''(v))` for example `1..=4`.
pub fn g_and_derivatives(example_id: u8, v: f64) -> Result<(f64, f64)> {
    Example::from_id(example_id)?.g_and_g2(v)
}

/// `max |g''|` over `gridsize` equispaced points of `[v1, v2]`.
pub fn true_sup_g2(example: Example, v1: f64, v2: f64, gridsize: usize) -> Result<f64> {
    if !(v1 < v2) || gridsize < 2 {
        return Err(Error::InvalidConfig(format!("need v1 < v2 and at least 2 points, got [{v1}, {v2}], {gridsize}")));
    }
    let step = (v2 - v1) / (gridsize - 1) as f64;
    (0..gridsize).try_fold(0.0f64, |acc, i| {
        let v = if i + 1 == gridsize { v2 } else { v1 + step * i as f64 };
        Ok(acc.max(example.g_and_g2(v)?.1.abs()))
    })
}

/// Midpoints `(g - 0.5) / G` of `G` equal cells of `[0, 1]`.
pub fn riemann_grid(points: usize) -> Vec<f64> {
    (1..=points).map(|g| (g as f64 - 0.5) / points as f64).collect()
}

/// `(1/G) Σ_g f(t_g)`.
pub fn riemann_integral(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// `sin(π t / 2)`.
pub fn beta2(t: f64) -> f64 {
    (0.5 * PI * t).sin()
}

/// `g(β₂(t))`.
pub fn beta1(example: Example, t: f64) -> Result<f64> {
    example.g(beta2(t))
}

/// Whether the two groups observe the same covariate curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariateDesign {
    /// Each group draws its own curves.
    #[default]
    Independent,
    /// Both groups share one draw of curves; only the response noise differs.
    Shared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    pub example: Example,
    /// Subjects per group.
    pub n: usize,
    /// Decay exponent of the Fourier coefficient variances `r^{-2 α₀}`.
    pub alpha0: f64,
    pub reps: usize,
    pub seed: u64,
    #[serde(default)]
    pub covariates: CovariateDesign,
    /// Test settings; `cfg.pairing_points` is the number of pairing times `m`.
    #[serde(default)]
    pub cfg: TestConfig,
}

impl SimSpec {
    pub fn new(example: Example, n: usize, alpha0: f64, reps: usize, seed: u64) -> Self {
        SimSpec { example, n, alpha0, reps, seed, covariates: CovariateDesign::default(), cfg: TestConfig::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < MIN_PAIRS {
            return Err(Error::InvalidConfig(format!("n must be at least {MIN_PAIRS}, got {}", self.n)));
        }
        if self.reps < 1 {
            return Err(Error::InvalidConfig("reps must be at least 1".into()));
        }
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return Err(Error::InvalidConfig(format!("alpha0 must be positive, got {}", self.alpha0)));
        }
        self.cfg.validate()
    }

    /// The same design with a linear `g`.
    pub fn null_counterpart(&self) -> Self {
        SimSpec { example: Example::Linear, ..self.clone() }
    }
}

/// Purpose tag folded into the random stream, so that observed and
/// calibration runs never share draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamPurpose {
    Observed = 0,
    NullCalibration = 1,
}

/// Stream id for one group of one replicate.
pub fn stream_id(purpose: StreamPurpose, rep: usize, group: u8) -> u64 {
    assert!(group == 1 || group == 2);
    ((purpose as u64) << 62) | ((rep as u64) << 1) | (group as u64 - 1)
}

/// Bit that separates response-noise streams from covariate streams.
const NOISE_STREAM_BIT: u64 = 1 << 61;

/// One group's covariates and responses on the Riemann grid.
///
/// `X(t) = c₀ + Σ_r a_r sin(2πrt) + b_r cos(2πrt)` with `c₀ ~ N(0,1)` and
/// `a_r, b_r ~ N(0, r^{-2α₀})`; `Y = (1/G) Σ_g β(t_g) X(t_g) + ε`.
/// Covariates come from `stream`, response noise from a companion stream.
pub fn gen_group(spec: &SimSpec, group: u8, stream: u64) -> Result<FunctionalDataset> {
    gen_group_from(spec, group, stream, stream | NOISE_STREAM_BIT)
}

/// As [`gen_group`] with explicit covariate and noise streams.
pub fn gen_group_from(
    spec: &SimSpec,
    group: u8,
    covariate_stream: u64,
    noise_stream: u64,
) -> Result<FunctionalDataset> {
    let grid = riemann_grid(RIEMANN_POINTS);
    let beta: Vec<f64> = match group {
        1 => grid.iter().map(|&t| beta1(spec.example, t)).collect::<Result<_>>()?,
        2 => grid.iter().map(|&t| beta2(t)).collect(),
        _ => return Err(Error::InvalidConfig(format!("group must be 1 or 2, got {group}"))),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(covariate_stream);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    noise_rng.set_stream(noise_stream);
    let g = grid.len();
    // basis[(2(r-1) + k) * g + j]: k = 0 for sine, 1 for cosine.
    let mut basis = Vec::with_capacity(2 * FOURIER_TERMS * g);
    for r in 1..=FOURIER_TERMS {
        for f in [f64::sin, f64::cos] {
            basis.extend(grid.iter().map(|t| f(2.0 * PI * r as f64 * t)));
        }
    }
    let sds: Vec<f64> = (1..=FOURIER_TERMS).map(|r| (r as f64).powf(-spec.alpha0)).collect();
    let noise = Normal::new(0.0, NOISE_SD).expect("valid noise sd");
    let mut curves = DMatrix::zeros(spec.n, g);
    let mut responses = Vec::with_capacity(spec.n);
    let mut row = vec![0.0; g];
    for i in 0..spec.n {
        let c0: f64 = StandardNormal.sample(&mut rng);
        row.iter_mut().for_each(|x| *x = c0);
        for (r, sd) in sds.iter().enumerate() {
            for k in 0..2 {
                let z: f64 = StandardNormal.sample(&mut rng);
                let coef = sd * z;
                let b = &basis[(2 * r + k) * g..(2 * r + k + 1) * g];
                row.iter_mut().zip(b).for_each(|(x, phi)| *x += coef * phi);
            }
        }
        let prod: Vec<f64> = row.iter().zip(&beta).map(|(x, b)| x * b).collect();
        responses.push(riemann_integral(&prod) + noise.sample(&mut noise_rng));
        for (j, x) in row.iter().enumerate() {
            curves[(i, j)] = *x;
        }
    }
    FunctionalDataset::new(grid, curves, responses)
}

/// Both groups of replicate `rep`.
pub fn gen_pair(spec: &SimSpec, purpose: StreamPurpose, rep: usize) -> Result<(FunctionalDataset, FunctionalDataset)> {
    let s1 = stream_id(purpose, rep, 1);
    let s2 = stream_id(purpose, rep, 2);
    let x2 = match spec.covariates {
        CovariateDesign::Independent => s2,
        CovariateDesign::Shared => s1,
    };
    Ok((gen_group_from(spec, 1, s1, s1 | NOISE_STREAM_BIT)?, gen_group_from(spec, 2, x2, s2 | NOISE_STREAM_BIT)?))
}

/// `T_n` of replicate `rep`, using the given stream purpose.
pub fn replicate_statistic(spec: &SimSpec, purpose: StreamPurpose, rep: usize) -> Result<f64> {
    let (g1, g2) = gen_pair(spec, purpose, rep)?;
    pipeline::statistic(&g1, &g2, &spec.cfg)
}

/// Per-replicate `T_n`, in replicate order; failed replicates are `None`.
pub fn replicate_statistics(spec: &SimSpec, purpose: StreamPurpose) -> Result<Vec<Option<f64>>> {
    spec.validate()?;
    Ok((0..spec.reps).into_par_iter().map(|rep| replicate_statistic(spec, purpose, rep).ok()).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub example: Example,
    pub n: usize,
    pub alpha0: f64,
    pub reps: usize,
    pub mean_tn: f64,
    /// Sample standard deviation (divisor `R - 1`; 0 for a single replicate).
    pub sd_tn: f64,
    /// Rejection rate against `critical_value`: size for the linear example, power otherwise.
    pub size_or_power: f64,
    pub critical_value: f64,
    /// `sup |g''|` over the trimmed span of `[0, 1]`.
    pub t_true: f64,
    pub tn_values: Vec<f64>,
    pub failures: usize,
    pub null_failures: usize,
}

/// Mean and sample standard deviation.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|x| (x - mean).powi(2)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

/// Assembles a row from observed statistics and null statistics for calibration.
pub fn summarize(spec: &SimSpec, observed: &[Option<f64>], null: &[Option<f64>]) -> Result<ExperimentRow> {
    let tn_values: Vec<f64> = observed.iter().flatten().copied().collect();
    let null_values: Vec<f64> = null.iter().flatten().copied().collect();
    if tn_values.is_empty() || null_values.is_empty() {
        return Err(Error::AllDegenerate);
    }
    let (mean_tn, sd_tn) = mean_sd(&tn_values);
    let critical_value = critical_from_null(&null_values, spec.cfg.alpha);
    let (a, b) = trimmed_span(0.0, 1.0, spec.cfg.boundary_trim);
    Ok(ExperimentRow {
        example: spec.example,
        n: spec.n,
        alpha0: spec.alpha0,
        reps: spec.reps,
        mean_tn,
        sd_tn,
        size_or_power: size_power(&tn_values, critical_value),
        critical_value,
        t_true: true_sup_g2(spec.example, a, b, DENSE_GRID)?,
        failures: observed.len() - tn_values.len(),
        null_failures: null.len() - null_values.len(),
        tn_values,
    })
}

/// Runs the design and a matched null design for the critical value.
///
/// The null run draws from separate streams, so the size of the linear
/// example is judged out of sample.
pub fn run_experiment(spec: &SimSpec) -> Result<ExperimentRow> {
    let observed = replicate_statistics(spec, StreamPurpose::Observed)?;
    let null = replicate_statistics(&spec.null_counterpart(), StreamPurpose::NullCalibration)?;
    summarize(spec, &observed, &null)
}
