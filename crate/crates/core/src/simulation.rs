//! Simulation models with analytic truth and Monte Carlo studies of the
//! hazard estimators.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Normal as NormalSampler};
use serde::Serialize;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::bootstrap::replicate_rng;
use crate::data::{Observation, Sample};
use crate::error::{Error, Result};
use crate::fit::CorrectedFit;
use crate::kernel::{naive_weights, oracle_weights, Curve, EstimatorKind, HazardCurve, Kernel, KernelSum};
use crate::npmle::{fit_npmle, NpmleOptions};
use crate::parametric::{fit_spmle, Family, SpmleFit, SpmleOptions, TruncationLaw};
use crate::quadrature::{adaptive_simpson, linspace, trapezoid};

/// Simulation designs. Misspecified designs replace the `Uniform(0, 1)` left
/// truncation of the first model with `Beta(1, a)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelId {
    M1,
    M2,
    M31,
    M32,
    M33,
    Misspec(f64),
}

impl ModelId {
    pub fn parse(name: &str, a: Option<f64>) -> Result<Self> {
        Ok(match name.to_ascii_lowercase().as_str() {
            "m1" => Self::M1,
            "m2" => Self::M2,
            "m31" => Self::M31,
            "m32" => Self::M32,
            "m33" => Self::M33,
            "misspec" => Self::Misspec(a.ok_or_else(|| Error::InvalidParameter("misspec model needs a value for a".into()))?),
            other => return Err(Error::InvalidParameter(format!("unknown model '{other}'"))),
        })
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::M1 => f.write_str("m1"),
            Self::M2 => f.write_str("m2"),
            Self::M31 => f.write_str("m31"),
            Self::M32 => f.write_str("m32"),
            Self::M33 => f.write_str("m33"),
            Self::Misspec(a) => write!(f, "misspec(a={a})"),
        }
    }
}

/// Lifetime law `X* = 0.25 + 0.75 Z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum LifetimeLaw {
    /// `Z ~ Beta(p, 1)`.
    ScaledBetaOne { p: f64 },
    /// `Z ~ Normal(mean, sd)`, not truncated.
    ScaledNormal { mean: f64, sd: f64 },
}

const SHIFT: f64 = 0.25;
const SCALE: f64 = 0.75;

impl LifetimeLaw {
    fn normal(mean: f64, sd: f64) -> Normal {
        Normal::new(mean, sd).expect("positive sd")
    }

    pub fn density(&self, x: f64) -> f64 {
        let z = (x - SHIFT) / SCALE;
        match *self {
            Self::ScaledBetaOne { p } => {
                if z > 0.0 && z <= 1.0 {
                    p * z.powf(p - 1.0) / SCALE
                } else {
                    0.0
                }
            }
            Self::ScaledNormal { mean, sd } => Self::normal(mean, sd).pdf(z) / SCALE,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let z = (x - SHIFT) / SCALE;
        match *self {
            Self::ScaledBetaOne { p } => z.clamp(0.0, 1.0).powf(p),
            Self::ScaledNormal { mean, sd } => Self::normal(mean, sd).cdf(z),
        }
    }

    pub fn quantile(&self, q: f64) -> f64 {
        let z = match *self {
            Self::ScaledBetaOne { p } => q.powf(1.0 / p),
            Self::ScaledNormal { mean, sd } => Self::normal(mean, sd).inverse_cdf(q),
        };
        SHIFT + SCALE * z
    }

    /// `f / (1 - F)`.
    pub fn hazard(&self, x: f64) -> f64 {
        let survival = match *self {
            Self::ScaledBetaOne { .. } => 1.0 - self.cdf(x),
            Self::ScaledNormal { mean, sd } => Self::normal(mean, sd).sf((x - SHIFT) / SCALE),
        };
        self.density(x) / survival
    }

    /// Second derivative of the hazard by a five-point central difference.
    pub fn hazard_dd(&self, x: f64) -> f64 {
        let e = 1e-3 * SCALE;
        let l = |t: f64| self.hazard(t);
        (-l(x + 2.0 * e) + 16.0 * l(x + e) - 30.0 * l(x) + 16.0 * l(x - e) - l(x - 2.0 * e)) / (12.0 * e * e)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z = match *self {
            Self::ScaledBetaOne { p } => rng.random::<f64>().powf(1.0 / p),
            Self::ScaledNormal { mean, sd } => NormalSampler::new(mean, sd).expect("positive sd").sample(rng),
        };
        SHIFT + SCALE * z
    }

    /// `E[h(X*)]` by quadrature.
    fn expectation(&self, h: impl Fn(f64) -> f64) -> f64 {
        match *self {
            // z = s^(1/p) turns p z^(p-1) dz into ds
            Self::ScaledBetaOne { p } => adaptive_simpson(|s| h(SHIFT + SCALE * s.powf(1.0 / p)), 0.0, 1.0, 1e-12),
            Self::ScaledNormal { mean, sd } => {
                let lo = SHIFT + SCALE * (mean - 12.0 * sd);
                let hi = SHIFT + SCALE * (mean + 12.0 * sd);
                adaptive_simpson(|x| h(x) * self.density(x), lo, hi, 1e-12)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelSpec {
    pub id: ModelId,
    pub lifetime: LifetimeLaw,
    pub truncation: TruncationLaw,
    pub tau: f64,
    alpha: f64,
}

impl ModelSpec {
    pub fn new(id: ModelId) -> Result<Self> {
        let beta = LifetimeLaw::ScaledBetaOne { p: 0.75 };
        let unit = TruncationLaw::Uniform { a: 0.0, b: 1.0 };
        let late = TruncationLaw::Uniform { a: 0.25, b: 1.0 };
        let (lifetime, truncation, tau) = match id {
            ModelId::M1 => (beta, unit, 0.25),
            ModelId::M2 => (LifetimeLaw::ScaledNormal { mean: 0.5, sd: 0.15 }, unit, 0.25),
            ModelId::M31 => (beta, late, 0.25),
            ModelId::M32 => (beta, late, 0.15),
            ModelId::M33 => (beta, late, 0.10),
            ModelId::Misspec(a) => {
                if !(a > 0.0 && a.is_finite()) {
                    return Err(Error::InvalidParameter(format!("misspecification parameter must be positive, got {a}")));
                }
                (beta, TruncationLaw::Beta { p: 1.0, q: a }, 0.25)
            }
        };
        let mut spec = Self { id, lifetime, truncation, tau, alpha: 0.0 };
        spec.alpha = spec.lifetime.expectation(|x| spec.g(x));
        Ok(spec)
    }

    /// `G(t) = L(t) - L(t - tau)`.
    pub fn g(&self, t: f64) -> f64 {
        self.truncation.cdf(t) - self.truncation.cdf(t - self.tau)
    }

    /// `P(U* <= X* <= V*)`.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn density(&self, x: f64) -> f64 {
        self.lifetime.density(x)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.lifetime.cdf(x)
    }

    pub fn quantile(&self, q: f64) -> f64 {
        self.lifetime.quantile(q)
    }

    pub fn hazard(&self, x: f64) -> f64 {
        self.lifetime.hazard(x)
    }

    pub fn hazard_dd(&self, x: f64) -> f64 {
        self.lifetime.hazard_dd(x)
    }

    /// ISE range `[F^-1(0.05), F^-1(0.90)]` of the true lifetime law.
    pub fn ise_range(&self) -> (f64, f64) {
        (self.quantile(0.05), self.quantile(0.90))
    }

    /// `(shift, scale)` with `(t + shift) / scale` mapping the support of `U*`
    /// onto `(0, 1)`, where the `Beta(p, 1)` working family lives.
    pub fn truncation_scale(&self) -> (f64, f64) {
        let (lo, hi) = self.truncation.support();
        (-lo, hi - lo)
    }

    /// SPMLE with the `Beta(p, 1)` working family placed on the known support of
    /// `U*`. The fit is in the rescaled coordinates of [`Self::truncation_scale`];
    /// its masses and hazard weights line up with the observations of `sample`.
    pub fn fit_working_spmle(&self, sample: &Sample, options: &SpmleOptions) -> Result<SpmleFit> {
        let (shift, scale) = self.truncation_scale();
        fit_spmle(&sample.affine_rescale(shift, scale)?, Family::BetaOne, None, options)
    }

    /// One untruncated proposal `(U*, X*, U* + tau)`.
    pub fn propose<R: Rng + ?Sized>(&self, rng: &mut R) -> Observation {
        let x = self.lifetime.sample(rng);
        let u = self.truncation.sample(rng);
        Observation::new(u, x, u + self.tau)
    }
}

/// Proposals per acceptance check in [`generate_sample`].
const ACCEPTANCE_CHECK: u64 = 10_000_000;
const MIN_ACCEPTANCE: f64 = 1e-6;

/// Draws proposals until `n` satisfy `U* <= X* <= V*`.
pub fn generate_sample<R: Rng + ?Sized>(model: &ModelSpec, n: usize, rng: &mut R) -> Result<Sample> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample size must be at least 1".into()));
    }
    let mut observations = Vec::with_capacity(n);
    let mut proposals: u64 = 0;
    while observations.len() < n {
        let o = model.propose(rng);
        proposals += 1;
        if o.u <= o.x && o.x <= o.v {
            observations.push(o);
        }
        if proposals.is_multiple_of(ACCEPTANCE_CHECK) && (observations.len() as f64) < MIN_ACCEPTANCE * proposals as f64 {
            return Err(Error::LowAcceptance { proposals, threshold: MIN_ACCEPTANCE });
        }
    }
    Sample::new(observations)
}

/// Analytic `G` on a grid.
pub fn true_g_curve(model: &ModelSpec, grid: &[f64]) -> Curve {
    Curve { grid: grid.to_vec(), values: grid.iter().map(|&t| model.g(t)).collect(), bands: None }
}

/// `G` estimated as the share of `draws` untruncated windows `[U*, U* + tau]` covering each grid point.
pub fn true_g_mc<R: Rng + ?Sized>(model: &ModelSpec, draws: usize, grid: &[f64], rng: &mut R) -> Curve {
    let mut lefts: Vec<f64> = (0..draws).map(|_| model.truncation.sample(rng)).collect();
    lefts.sort_by(f64::total_cmp);
    let values = grid
        .iter()
        .map(|&t| {
            // windows covering t have t - tau <= u <= t
            let hi = lefts.partition_point(|&u| u <= t);
            let lo = lefts.partition_point(|&u| u < t - model.tau);
            (hi - lo) as f64 / draws as f64
        })
        .collect();
    Curve { grid: grid.to_vec(), values, bands: None }
}

/// Trapezoid integral of `(curve - lambda)^2` over `range`, with linear
/// interpolation of the curve at range ends that are not grid points.
pub fn ise(curve: &HazardCurve, true_lambda: impl Fn(f64) -> f64, range: (f64, f64)) -> Result<f64> {
    let grid = &curve.grid;
    let (lo, hi) = range;
    if !(lo < hi) || grid.is_empty() || lo < grid[0] || hi > grid[grid.len() - 1] {
        return Err(Error::InvalidParameter(format!("range {range:?} is not inside the curve grid")));
    }
    let interp = |t: f64| {
        let k = grid.partition_point(|&g| g <= t).clamp(1, grid.len() - 1);
        let (x0, x1) = (grid[k - 1], grid[k]);
        let w = if x1 > x0 { (t - x0) / (x1 - x0) } else { 0.0 };
        curve.values[k - 1] + w * (curve.values[k] - curve.values[k - 1])
    };
    let mut xs = vec![lo];
    let mut ys = vec![interp(lo)];
    for (&g, &v) in grid.iter().zip(&curve.values) {
        if g > lo && g < hi {
            xs.push(g);
            ys.push(v);
        }
    }
    xs.push(hi);
    ys.push(interp(hi));
    let sq: Vec<f64> = xs.iter().zip(&ys).map(|(&x, &y)| (y - true_lambda(x)).powi(2)).collect();
    Ok(trapezoid(&xs, &sq))
}

/// Settings shared by the studies.
#[derive(Debug, Clone, Serialize)]
pub struct StudyConfig {
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub kernel: Kernel,
    /// Points of the ISE grid over the model's ISE range.
    pub ise_points: usize,
    pub spmle_restarts: usize,
}

impl StudyConfig {
    pub fn new(n: usize, reps: usize, seed: u64) -> Self {
        Self { n, reps, seed, kernel: Kernel::Epanechnikov, ise_points: 512, spmle_restarts: 5 }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.reps == 0 {
            return Err(Error::InvalidParameter("studies need n >= 1 and at least one replicate".into()));
        }
        if self.ise_points < 2 {
            return Err(Error::InvalidParameter("ISE grid needs at least two points".into()));
        }
        Ok(())
    }
}

/// Hazard weights of each requested estimator on one replicate, or `None`
/// when a fit fails (NPMLE nonexistence or non-convergence, SPMLE failure).
fn replicate_weights(model: &ModelSpec, sample: &Sample, kinds: &[EstimatorKind], restarts: usize) -> Result<Option<Vec<Vec<f64>>>> {
    let mut out = Vec::with_capacity(kinds.len());
    for kind in kinds {
        let w = match kind {
            EstimatorKind::Np => match fit_npmle(sample, NpmleOptions::default()) {
                Ok(fit) if fit.exists_unique() => fit.hazard_weights().to_vec(),
                Ok(_) | Err(Error::NonConvergence { .. }) => return Ok(None),
                Err(e) => return Err(e),
            },
            EstimatorKind::Sp => {
                let options = SpmleOptions { restarts, ..Default::default() };
                match model.fit_working_spmle(sample, &options) {
                    Ok(fit) => fit.hazard_weights().to_vec(),
                    Err(Error::OptimizerFailure(_) | Error::DegenerateData(_) | Error::InvalidDistribution(_)) => return Ok(None),
                    Err(e) => return Err(e),
                }
            }
            EstimatorKind::Naive => naive_weights(sample)?,
            EstimatorKind::Oracle => oracle_weights(sample, |t| model.g(t), |t| model.cdf(t), model.alpha())?,
        };
        out.push(w);
    }
    Ok(Some(out))
}

#[cfg(feature = "parallel")]
fn map_reps<T: Send>(reps: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    (0..reps).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_reps<T>(reps: usize, f: impl Fn(usize) -> T) -> Vec<T> {
    (0..reps).map(f).collect()
}

/// Runs `evaluate` on the weights of every usable replicate, in replicate order.
fn run_replicates<T: Send>(
    model: &ModelSpec,
    kinds: &[EstimatorKind],
    config: &StudyConfig,
    evaluate: impl Fn(&Sample, &[Vec<f64>]) -> T + Sync + Send,
) -> Result<(Vec<T>, usize)> {
    config.validate()?;
    if kinds.is_empty() {
        return Err(Error::InvalidParameter("no estimator kinds requested".into()));
    }
    let outcomes = map_reps(config.reps, |r| -> Result<Option<T>> {
        let mut rng = replicate_rng(config.seed, r);
        let sample = generate_sample(model, config.n, &mut rng)?;
        Ok(replicate_weights(model, &sample, kinds, config.spmle_restarts)?.map(|w| evaluate(&sample, &w)))
    });
    let mut kept = Vec::with_capacity(config.reps);
    let mut dropped = 0;
    for o in outcomes {
        match o? {
            Some(v) => kept.push(v),
            None => dropped += 1,
        }
    }
    if kept.is_empty() {
        return Err(Error::DegenerateData(format!("all {} replicates failed to fit", config.reps)));
    }
    Ok((kept, dropped))
}

/// Mean ISE per estimator over a bandwidth grid.
#[derive(Debug, Clone, Serialize)]
pub struct KindMise {
    pub kind: EstimatorKind,
    pub mean_ise: Vec<f64>,
    /// Monte Carlo standard error of each mean.
    pub std_error: Vec<f64>,
    pub h_opt: f64,
    pub min_mise: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MiseStudy {
    pub model: ModelId,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub kernel: Kernel,
    pub ise_range: (f64, f64),
    pub h_grid: Vec<f64>,
    pub kinds: Vec<KindMise>,
    /// `MISE_sp(h) / MISE_np(h)` when both kinds were run.
    pub ratio_sp_np: Option<Vec<f64>>,
    pub used: usize,
    pub dropped: usize,
}

impl MiseStudy {
    pub fn kind(&self, kind: EstimatorKind) -> Option<&KindMise> {
        self.kinds.iter().find(|k| k.kind == kind)
    }
}

fn check_h_grid(h_grid: &[f64]) -> Result<()> {
    if h_grid.is_empty() || h_grid.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
        return Err(Error::InvalidParameter("bandwidth grid must be non-empty and positive".into()));
    }
    Ok(())
}

/// Mean ISE of each estimator for every bandwidth in `h_grid`.
pub fn run_mise_study(model: &ModelSpec, h_grid: &[f64], kinds: &[EstimatorKind], config: &StudyConfig) -> Result<MiseStudy> {
    check_h_grid(h_grid)?;
    let range = model.ise_range();
    let grid = linspace(range.0, range.1, config.ise_points);
    let truth: Vec<f64> = grid.iter().map(|&x| model.hazard(x)).collect();
    let kernel = config.kernel;
    // per replicate: ise[kind][h]
    let (ises, dropped) = run_replicates(model, kinds, config, |sample, weights| {
        let xs = sample.lifetimes();
        weights
            .iter()
            .map(|w| {
                let sum = KernelSum::new(&xs, w);
                h_grid
                    .iter()
                    .map(|&h| {
                        let sq: Vec<f64> = grid.iter().zip(&truth).map(|(&x, &l)| (sum.at(x, h, kernel) - l).powi(2)).collect();
                        trapezoid(&grid, &sq)
                    })
                    .collect::<Vec<f64>>()
            })
            .collect::<Vec<_>>()
    })?;
    let used = ises.len() as f64;
    let kinds_out: Vec<KindMise> = kinds
        .iter()
        .enumerate()
        .map(|(k, &kind)| {
            let mean_ise: Vec<f64> = (0..h_grid.len()).map(|j| ises.iter().map(|r| r[k][j]).sum::<f64>() / used).collect();
            let std_error = (0..h_grid.len())
                .map(|j| {
                    let m = mean_ise[j];
                    let var = ises.iter().map(|r| (r[k][j] - m).powi(2)).sum::<f64>() / (used - 1.0).max(1.0);
                    (var / used).sqrt()
                })
                .collect();
            let (j, min) = mean_ise.iter().enumerate().fold((0, f64::INFINITY), |acc, (j, &v)| if v < acc.1 { (j, v) } else { acc });
            KindMise { kind, mean_ise, std_error, h_opt: h_grid[j], min_mise: min }
        })
        .collect();
    let find = |kind| kinds_out.iter().find(|k: &&KindMise| k.kind == kind);
    let ratio_sp_np = match (find(EstimatorKind::Sp), find(EstimatorKind::Np)) {
        (Some(sp), Some(np)) => Some(sp.mean_ise.iter().zip(&np.mean_ise).map(|(s, n)| s / n).collect()),
        _ => None,
    };
    Ok(MiseStudy {
        model: model.id,
        n: config.n,
        reps: config.reps,
        seed: config.seed,
        kernel,
        ise_range: range,
        h_grid: h_grid.to_vec(),
        kinds: kinds_out,
        ratio_sp_np,
        used: ises.len(),
        dropped,
    })
}

/// Bias and variance of one estimator at the quartiles of `F`.
#[derive(Debug, Clone, Serialize)]
pub struct QuartileCell {
    pub kind: EstimatorKind,
    pub h: f64,
    pub points: [f64; 3],
    pub truth: [f64; 3],
    pub bias: [f64; 3],
    pub variance: [f64; 3],
}

#[derive(Debug, Clone, Serialize)]
pub struct QuartileStudy {
    pub model: ModelId,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub cells: Vec<QuartileCell>,
    pub used: usize,
    pub dropped: usize,
}

/// Empirical bias and variance (denominator `M - 1`) of each estimator at
/// `F^-1(0.25)`, `F^-1(0.5)` and `F^-1(0.75)`, each kind at its own bandwidth.
pub fn bias_variance_at_quartiles(model: &ModelSpec, bandwidths: &[(EstimatorKind, f64)], config: &StudyConfig) -> Result<QuartileStudy> {
    check_h_grid(&bandwidths.iter().map(|b| b.1).collect::<Vec<_>>())?;
    let points = [model.quantile(0.25), model.quantile(0.5), model.quantile(0.75)];
    let kinds: Vec<EstimatorKind> = bandwidths.iter().map(|b| b.0).collect();
    let kernel = config.kernel;
    let (values, dropped) = run_replicates(model, &kinds, config, |sample, weights| {
        let xs = sample.lifetimes();
        weights
            .iter()
            .zip(bandwidths)
            .map(|(w, &(_, h))| {
                let sum = KernelSum::new(&xs, w);
                points.map(|x| sum.at(x, h, kernel))
            })
            .collect::<Vec<[f64; 3]>>()
    })?;
    let used = values.len() as f64;
    let truth = points.map(|x| model.hazard(x));
    let cells = bandwidths
        .iter()
        .enumerate()
        .map(|(k, &(kind, h))| {
            let mean = [0, 1, 2].map(|q| values.iter().map(|v| v[k][q]).sum::<f64>() / used);
            let variance = [0, 1, 2].map(|q| values.iter().map(|v| (v[k][q] - mean[q]).powi(2)).sum::<f64>() / (used - 1.0).max(1.0));
            QuartileCell { kind, h, points, truth, bias: [0, 1, 2].map(|q| mean[q] - truth[q]), variance }
        })
        .collect();
    Ok(QuartileStudy { model: model.id, n: config.n, reps: config.reps, seed: config.seed, cells, used: values.len(), dropped })
}

#[derive(Debug, Clone, Serialize)]
pub struct MisspecRecord {
    pub a: f64,
    pub mise: MiseStudy,
    pub quartiles: QuartileStudy,
}

/// For each `a`, generates with `U* ~ Beta(1, a)` and compares the
/// nonparametric estimator with the `Beta(p, 1)` semiparametric one.
pub fn misspecification_study(a_values: &[f64], h_grid: &[f64], config: &StudyConfig) -> Result<Vec<MisspecRecord>> {
    let kinds = [EstimatorKind::Np, EstimatorKind::Sp];
    a_values
        .iter()
        .map(|&a| {
            let model = ModelSpec::new(ModelId::Misspec(a))?;
            let mise = run_mise_study(&model, h_grid, &kinds, config)?;
            let bandwidths: Vec<(EstimatorKind, f64)> = mise.kinds.iter().map(|k| (k.kind, k.h_opt)).collect();
            let quartiles = bias_variance_at_quartiles(&model, &bandwidths, config)?;
            Ok(MisspecRecord { a, mise, quartiles })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::hazard_oracle;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn all_models() -> Vec<ModelSpec> {
        [ModelId::M1, ModelId::M2, ModelId::M31, ModelId::M32, ModelId::M33, ModelId::Misspec(0.5), ModelId::Misspec(5.0)]
            .into_iter()
            .map(|id| ModelSpec::new(id).unwrap())
            .collect()
    }

    #[test]
    fn analytic_self_consistency() {
        for m in all_models() {
            let mass = m.lifetime.expectation(|_| 1.0);
            assert!((mass - 1.0).abs() < 1e-8, "{}: {mass}", m.id);
            for x in linspace(m.quantile(0.05), m.quantile(0.9), 25) {
                let e = 1e-5;
                let fd = (m.cdf(x + e) - m.cdf(x - e)) / (2.0 * e);
                assert!((fd - m.density(x)).abs() < 1e-4 * (1.0 + m.density(x)), "{} x={x}", m.id);
                assert!((m.hazard(x) - m.density(x) / (1.0 - m.cdf(x))).abs() < 1e-10 * m.hazard(x));
            }
        }
    }

    #[test]
    fn hazard_second_derivative_matches_closed_form() {
        // for the scaled Beta(p, 1) law, lambda(x) = p z^(p-1) / (0.75 (1 - z^p)) with z = (x - 0.25) / 0.75
        let m = ModelSpec::new(ModelId::M1).unwrap();
        let p = 0.75;
        let lam = |z: f64| p * z.powf(p - 1.0) / (SCALE * (1.0 - z.powf(p)));
        for x in [0.4, 0.6, 0.8] {
            let z = (x - SHIFT) / SCALE;
            let e = 1e-4;
            // independent finite difference in z with a wider stencil
            let d2z = (lam(z + e) - 2.0 * lam(z) + lam(z - e)) / (e * e);
            let expected = d2z / (SCALE * SCALE);
            assert!((m.hazard_dd(x) - expected).abs() < 1e-3 * expected.abs().max(1.0), "{x}: {} vs {expected}", m.hazard_dd(x));
        }
    }

    #[test]
    fn flat_g_for_unit_uniform_models() {
        for id in [ModelId::M1, ModelId::M2] {
            let m = ModelSpec::new(id).unwrap();
            for t in linspace(0.25, 1.0, 301) {
                assert!((m.g(t) - 0.25).abs() < 1e-12);
            }
        }
        // Model 3.1: increasing from 0 at t = 0.25, then flat at tau / 0.75
        let m = ModelSpec::new(ModelId::M31).unwrap();
        assert_eq!(m.g(0.25), 0.0);
        assert!(m.g(0.3) < m.g(0.4) && m.g(0.4) < m.g(0.5));
        assert!((m.g(0.7) - 0.25 / 0.75).abs() < 1e-12);
    }

    #[test]
    fn alpha_by_independent_formula() {
        // Model 1: G = 0.25 on the whole lifetime support
        assert!((ModelSpec::new(ModelId::M1).unwrap().alpha() - 0.25).abs() < 1e-10);
        // Model 3.1: G(x) = (x - 0.25) / 0.75 on [0.25, 0.5], 1/3 above, so with z = (x - 0.25) / 0.75
        // alpha = int_0^{1/3} z * 0.75 z^{-1/4} dz + (1/3) (1 - (1/3)^{3/4})
        let z0: f64 = 1.0 / 3.0;
        let alpha = 0.75 * z0.powf(1.75) / 1.75 + (1.0 / 3.0) * (1.0 - z0.powf(0.75));
        assert!((ModelSpec::new(ModelId::M31).unwrap().alpha() - alpha).abs() < 1e-9);
    }

    #[test]
    fn acceptance_rate_matches_alpha() {
        let proposals = 100_000;
        for id in [ModelId::M33, ModelId::M2, ModelId::Misspec(5.0)] {
            let m = ModelSpec::new(id).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(17);
            let accepted = (0..proposals)
                .filter(|_| {
                    let o = m.propose(&mut rng);
                    o.u <= o.x && o.x <= o.v
                })
                .count() as f64;
            let rate = accepted / proposals as f64;
            let se = (m.alpha() * (1.0 - m.alpha()) / proposals as f64).sqrt();
            assert!((rate - m.alpha()).abs() < 3.0 * se, "{}: {rate} vs {}", m.id, m.alpha());
        }
    }

    #[test]
    fn generated_samples() {
        let m = ModelSpec::new(ModelId::M1).unwrap();
        let a = generate_sample(&m, 100, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = generate_sample(&m, 100, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a, b);
        assert!(a.observations().iter().all(|o| o.x >= 0.25 && o.x <= 1.0 && (o.v - o.u - 0.25).abs() < 1e-12));
        assert!(a.is_interval_sampling());
        assert!(generate_sample(&m, 0, &mut ChaCha8Rng::seed_from_u64(1)).is_err());
    }

    #[test]
    fn working_family_sits_on_the_truncation_support() {
        let m = ModelSpec::new(ModelId::M31).unwrap();
        assert_eq!(m.truncation_scale(), (-0.25, 0.75));
        assert_eq!(ModelSpec::new(ModelId::M1).unwrap().truncation_scale(), (0.0, 1.0));
        let sample = generate_sample(&m, 2000, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let fit = m.fit_working_spmle(&sample, &SpmleOptions::default()).unwrap();
        // U* is uniform on its support, i.e. p = 1 after rescaling
        assert!((fit.theta()[0] - 1.0).abs() < 0.15, "{:?}", fit.theta());
        // G is invariant under the rescaling, so the masses follow 1 / G(x) on the original scale
        let df = fit.lifetime_df();
        let inverse_g: Vec<f64> = df.points().iter().map(|&x| 1.0 / m.g(0.25 + 0.75 * x)).collect();
        let total: f64 = inverse_g.iter().sum();
        for (mass, w) in df.masses().iter().zip(&inverse_g) {
            assert!((mass / (w / total) - 1.0).abs() < 0.2, "{mass} vs {}", w / total);
        }
        assert_eq!(fit.hazard_weights().len(), sample.len());
    }

    #[test]
    fn mc_g_close_to_analytic() {
        let grid = linspace(0.2, 1.1, 181);
        for m in all_models() {
            let exact = true_g_curve(&m, &grid);
            let mc = true_g_mc(&m, 20_000, &grid, &mut ChaCha8Rng::seed_from_u64(2));
            let sup = exact.values.iter().zip(&mc.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(sup < 0.02, "{}: {sup}", m.id);
        }
    }

    fn flat_curve(grid: Vec<f64>, v: f64) -> HazardCurve {
        let values = vec![v; grid.len()];
        HazardCurve { grid, values, bandwidth: 1.0, kernel: Kernel::Epanechnikov, kind: EstimatorKind::Oracle, bands: None }
    }

    #[test]
    fn ise_examples() {
        let c = flat_curve(linspace(0.0, 1.0, 101), 2.0);
        assert_eq!(ise(&c, |_| 2.0, (0.1, 0.9)).unwrap(), 0.0);
        assert!((ise(&c, |_| 1.5, (0.13, 0.77)).unwrap() - 0.25 * 0.64).abs() < 1e-12);
        assert!(ise(&c, |_| 1.0, (0.5, 1.5)).is_err());

        let m = ModelSpec::new(ModelId::M1).unwrap();
        let s = generate_sample(&m, 500, &mut ChaCha8Rng::seed_from_u64(44)).unwrap();
        let range = m.ise_range();
        let curve = hazard_oracle(&s, |t| m.g(t), |t| m.cdf(t), m.alpha(), 0.02, Kernel::Epanechnikov, &linspace(range.0, range.1, 512)).unwrap();
        let v = ise(&curve, |x| m.hazard(x), range).unwrap();
        assert!(v.is_finite() && v > 0.0);
    }

    #[test]
    fn single_rep_single_h_is_one_ise() {
        let m = ModelSpec::new(ModelId::M1).unwrap();
        let cfg = StudyConfig::new(100, 1, 3);
        let study = run_mise_study(&m, &[0.1], &[EstimatorKind::Oracle], &cfg).unwrap();
        let sample = generate_sample(&m, 100, &mut replicate_rng(3, 0)).unwrap();
        let range = m.ise_range();
        let curve = hazard_oracle(&sample, |t| m.g(t), |t| m.cdf(t), m.alpha(), 0.1, Kernel::Epanechnikov, &linspace(range.0, range.1, 512)).unwrap();
        let direct = ise(&curve, |x| m.hazard(x), range).unwrap();
        assert!((study.kinds[0].mean_ise[0] - direct).abs() < 1e-12 * direct);
        assert_eq!(study.kinds[0].h_opt, 0.1);
    }

    #[test]
    fn two_rep_variance_identity() {
        let m = ModelSpec::new(ModelId::M1).unwrap();
        let cfg = StudyConfig::new(80, 2, 9);
        let study = bias_variance_at_quartiles(&m, &[(EstimatorKind::Naive, 0.1)], &cfg).unwrap();
        let cell = &study.cells[0];
        let vals: Vec<[f64; 3]> = (0..2)
            .map(|r| {
                let s = generate_sample(&m, 80, &mut replicate_rng(9, r)).unwrap();
                let c = crate::kernel::hazard_naive(&s, 0.1, Kernel::Epanechnikov, &cell.points).unwrap();
                [c.values[0], c.values[1], c.values[2]]
            })
            .collect();
        for q in 0..3 {
            let expected = 0.5 * (vals[0][q] - vals[1][q]).powi(2);
            assert!((cell.variance[q] - expected).abs() < 1e-12 * (1.0 + expected));
        }
    }

    #[test]
    fn deterministic_study() {
        let m = ModelSpec::new(ModelId::M31).unwrap();
        let cfg = StudyConfig::new(100, 6, 5);
        let kinds = [EstimatorKind::Np, EstimatorKind::Sp, EstimatorKind::Naive, EstimatorKind::Oracle];
        let a = run_mise_study(&m, &[0.08, 0.15], &kinds, &cfg).unwrap();
        let b = run_mise_study(&m, &[0.08, 0.15], &kinds, &cfg).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert!(a.ratio_sp_np.is_some());
        assert!(a.kinds.iter().all(|k| k.mean_ise.iter().all(|v| *v >= 0.0)));
    }

    #[test]
    fn narrow_windows_drop_replicates() {
        let m = ModelSpec::new(ModelId::M33).unwrap();
        let study = run_mise_study(&m, &[0.1], &[EstimatorKind::Np], &StudyConfig::new(100, 30, 1)).unwrap();
        assert!(study.dropped > 0, "{}", study.dropped);
        assert_eq!(study.used + study.dropped, 30);
    }

    #[test]
    fn parse_models() {
        assert_eq!(ModelId::parse("M31", None).unwrap(), ModelId::M31);
        assert_eq!(ModelId::parse("misspec", Some(5.0)).unwrap(), ModelId::Misspec(5.0));
        assert!(ModelId::parse("misspec", None).is_err());
        assert!(ModelId::parse("m4", None).is_err());
        assert!(ModelSpec::new(ModelId::Misspec(-1.0)).is_err());
    }
}
