//! Kernel hazard estimators.
//!
//! Every estimator is a weighted kernel sum `sum_i K_h(x - x_i) w_i`; they
//! differ only in the weights `w_i`:
//!
//! | kind   | `w_i`                                         |
//! |--------|-----------------------------------------------|
//! | np     | `phi_i / (1 - F_n(x_i-))`                     |
//! | sp     | `alpha n^-1 G(x_i)^-1 / (1 - F_theta(x_i-))`  |
//! | naive  | `n^-1 / (1 - F*_n(x_i-))`                     |
//! | oracle | `alpha n^-1 G(x_i)^-1 / (1 - F(x_i))`         |

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::data::{Sample, WeightedDF};
use crate::error::{Error, Result};
use crate::fit::{hazard_increments, CorrectedFit};
use crate::npmle::NpmleFit;
use crate::parametric::SpmleFit;
use crate::quadrature::linspace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    #[default]
    Epanechnikov,
    Gaussian,
}

impl Kernel {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Self::Epanechnikov => {
                if t.abs() <= 1.0 {
                    0.75 * (1.0 - t * t)
                } else {
                    0.0
                }
            }
            Self::Gaussian => (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt(),
        }
    }

    /// `K_h(t) = K(t / h) / h`.
    pub fn scaled(&self, t: f64, h: f64) -> f64 {
        self.eval(t / h) / h
    }

    /// `R(K) = int K^2`.
    pub fn roughness(&self) -> f64 {
        match self {
            Self::Epanechnikov => 0.6,
            Self::Gaussian => 0.5 / std::f64::consts::PI.sqrt(),
        }
    }

    /// `mu_2(K) = int t^2 K(t) dt`.
    pub fn second_moment(&self) -> f64 {
        match self {
            Self::Epanechnikov => 0.2,
            Self::Gaussian => 1.0,
        }
    }

    /// Half-width of the support in units of `h`, if compact.
    pub fn support_radius(&self) -> Option<f64> {
        match self {
            Self::Epanechnikov => Some(1.0),
            Self::Gaussian => None,
        }
    }

    /// Draws from the kernel density.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Epanechnikov => {
                // median-of-three construction: keep u2 when u3 has the largest magnitude
                let mut u = || 2.0 * rng.random::<f64>() - 1.0;
                let (u1, u2, u3) = (u(), u(), u());
                if u3.abs() >= u2.abs() && u3.abs() >= u1.abs() {
                    u2
                } else {
                    u3
                }
            }
            Self::Gaussian => rng.sample(StandardNormal),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Epanechnikov => "epanechnikov",
            Self::Gaussian => "gaussian",
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "epanechnikov" | "epa" => Ok(Self::Epanechnikov),
            "gaussian" | "normal" => Ok(Self::Gaussian),
            other => Err(Error::InvalidParameter(format!("unknown kernel '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Np,
    Sp,
    Naive,
    Oracle,
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Np => "np",
            Self::Sp => "sp",
            Self::Naive => "naive",
            Self::Oracle => "oracle",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "np" => Ok(Self::Np),
            "sp" => Ok(Self::Sp),
            "naive" => Ok(Self::Naive),
            "oracle" => Ok(Self::Oracle),
            other => Err(Error::InvalidParameter(format!("unknown estimator kind '{other}'"))),
        }
    }
}

/// Pointwise lower and upper limits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bands {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// A function tabulated on a grid, optionally with bands.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Curve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub bands: Option<Bands>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HazardCurve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub bandwidth: f64,
    pub kernel: Kernel,
    pub kind: EstimatorKind,
    pub bands: Option<Bands>,
}

impl HazardCurve {
    pub fn as_curve(&self) -> Curve {
        Curve { grid: self.grid.clone(), values: self.values.clone(), bands: self.bands.clone() }
    }
}

/// `count` equispaced points over `[min x, max x]`.
pub fn default_grid(sample: &Sample, count: usize) -> Vec<f64> {
    let xs = sample.lifetimes();
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    linspace(lo, hi, count)
}

pub const DEFAULT_GRID_POINTS: usize = 256;

/// True when some grid point lies within `h` of the sample's extreme lifetimes,
/// where the estimators carry boundary bias.
pub fn near_boundary(grid: &[f64], sample: &Sample, h: f64) -> bool {
    let xs = sample.lifetimes();
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    grid.iter().any(|&g| g < lo + h || g > hi - h)
}

pub(crate) fn check_bandwidth(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("bandwidth must be positive, got {h}")))
    }
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid.iter().any(|g| !g.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("grid must be non-empty, finite and strictly increasing".into()));
    }
    Ok(())
}

/// Atoms sorted by location for windowed kernel sums.
#[derive(Debug, Clone)]
pub struct KernelSum {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl KernelSum {
    pub fn new(points: &[f64], weights: &[f64]) -> Self {
        let mut pairs: Vec<(f64, f64)> = points.iter().copied().zip(weights.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (points, weights) = pairs.into_iter().unzip();
        Self { points, weights }
    }

    /// `sum_i K_h(x - x_i) w_i`.
    pub fn at(&self, x: f64, h: f64, kernel: Kernel) -> f64 {
        let (lo, hi) = match kernel.support_radius() {
            Some(r) => (
                self.points.partition_point(|&p| p < x - r * h),
                self.points.partition_point(|&p| p <= x + r * h),
            ),
            None => (0, self.points.len()),
        };
        self.points[lo..hi]
            .iter()
            .zip(&self.weights[lo..hi])
            .map(|(&p, &w)| kernel.scaled(x - p, h) * w)
            .sum()
    }

    pub fn on_grid(&self, grid: &[f64], h: f64, kernel: Kernel) -> Vec<f64> {
        map_grid(grid, |x| self.at(x, h, kernel))
    }
}

#[cfg(feature = "parallel")]
fn map_grid<F: Fn(f64) -> f64 + Sync>(grid: &[f64], f: F) -> Vec<f64> {
    use rayon::prelude::*;
    grid.par_iter().map(|&x| f(x)).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_grid<F: Fn(f64) -> f64 + Sync>(grid: &[f64], f: F) -> Vec<f64> {
    grid.iter().map(|&x| f(x)).collect()
}

fn weighted_curve(
    points: &[f64],
    weights: &[f64],
    h: f64,
    kernel: Kernel,
    grid: &[f64],
    kind: EstimatorKind,
) -> Result<HazardCurve> {
    check_bandwidth(h)?;
    check_grid(grid)?;
    let values = KernelSum::new(points, weights).on_grid(grid, h, kernel);
    Ok(HazardCurve { grid: grid.to_vec(), values, bandwidth: h, kernel, kind, bands: None })
}

/// Hazard estimate from any truncation-corrected fit.
pub fn hazard_corrected<F: CorrectedFit + ?Sized>(
    fit: &F,
    h: f64,
    kernel: Kernel,
    grid: &[f64],
    kind: EstimatorKind,
) -> Result<HazardCurve> {
    weighted_curve(&fit.sample().lifetimes(), fit.hazard_weights(), h, kernel, grid, kind)
}

/// `lambda_h(x) = sum_i K_h(x - x_i) phi_i / (1 - F_n(x_i-))`.
pub fn hazard_np(fit: &NpmleFit, h: f64, kernel: Kernel, grid: &[f64]) -> Result<HazardCurve> {
    hazard_corrected(fit, h, kernel, grid, EstimatorKind::Np)
}

/// `lambda_{theta,h}(x) = alpha n^-1 sum_i K_h(x - x_i) G_theta(x_i)^-1 / (1 - F_theta(x_i-))`.
pub fn hazard_sp(fit: &SpmleFit, h: f64, kernel: Kernel, grid: &[f64]) -> Result<HazardCurve> {
    hazard_corrected(fit, h, kernel, grid, EstimatorKind::Sp)
}

/// Weights of the estimator that ignores truncation.
pub fn naive_weights(sample: &Sample) -> Result<Vec<f64>> {
    let xs = sample.lifetimes();
    let masses = vec![1.0 / xs.len() as f64; xs.len()];
    let df = WeightedDF::new(&xs, &masses)?;
    Ok(hazard_increments(&df, &xs, &masses))
}

/// Complete-data kernel hazard estimate that ignores truncation.
pub fn hazard_naive(sample: &Sample, h: f64, kernel: Kernel, grid: &[f64]) -> Result<HazardCurve> {
    let weights = naive_weights(sample)?;
    weighted_curve(&sample.lifetimes(), &weights, h, kernel, grid, EstimatorKind::Naive)
}

/// Weights `alpha n^-1 G(x_i)^-1 / (1 - F(x_i))` from a known model.
pub fn oracle_weights(
    sample: &Sample,
    true_g: impl Fn(f64) -> f64,
    true_cdf: impl Fn(f64) -> f64,
    alpha: f64,
) -> Result<Vec<f64>> {
    let n = sample.len() as f64;
    sample
        .lifetimes()
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let g = true_g(x);
            let s = 1.0 - true_cdf(x);
            if !(g > 0.0) || !(s > 0.0) {
                return Err(Error::InvalidDistribution(format!(
                    "model gives G={g} and 1-F={s} at observed lifetime {i} (x={x})"
                )));
            }
            Ok(alpha / (n * g * s))
        })
        .collect()
}

/// `lambda_bar_h(x) = alpha n^-1 sum_i K_h(x - x_i) G(x_i)^-1 / (1 - F(x_i))`
/// with the true `G`, `F` and `alpha`.
pub fn hazard_oracle(
    sample: &Sample,
    true_g: impl Fn(f64) -> f64,
    true_cdf: impl Fn(f64) -> f64,
    alpha: f64,
    h: f64,
    kernel: Kernel,
    grid: &[f64],
) -> Result<HazardCurve> {
    let weights = oracle_weights(sample, true_g, true_cdf, alpha)?;
    weighted_curve(&sample.lifetimes(), &weights, h, kernel, grid, EstimatorKind::Oracle)
}

/// `f_{h0}(x) = alpha n^-1 sum_i K_{h0}(x - x_i) G(x_i)^-1`, the smoothed
/// corrected lifetime density.
pub fn weighted_density<F: CorrectedFit + ?Sized>(fit: &F, h0: f64, kernel: Kernel, grid: &[f64]) -> Result<Curve> {
    check_bandwidth(h0)?;
    check_grid(grid)?;
    let values = KernelSum::new(&fit.sample().lifetimes(), fit.masses()).on_grid(grid, h0, kernel);
    Ok(Curve { grid: grid.to_vec(), values, bands: None })
}

/// The fit's biasing function on a grid.
pub fn biasing_curve<F: CorrectedFit + ?Sized>(fit: &F, grid: &[f64]) -> Result<Curve> {
    check_grid(grid)?;
    Ok(Curve { grid: grid.to_vec(), values: grid.iter().map(|&t| fit.biasing_g(t)).collect(), bands: None })
}
