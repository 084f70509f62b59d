//! Smoothed bootstrap with rejection resampling and percentile bands.
//!
//! A replicate triplet is drawn as follows:
//! 1. pick lifetime atom `i` with probability equal to its corrected mass and
//!    set `X = x_i + h0 * eps` with `eps ~ K`;
//! 2. draw `(U, V)` from the fitted truncation law (semiparametric) or from
//!    the NPMLE truncation atoms with weights `psi_j` (nonparametric);
//! 3. keep the triplet only if `U <= X <= V`, otherwise start over.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::data::{Observation, Sample};
use crate::error::{Error, Result};
use crate::fit::{CorrectedFit, Correction};
use crate::kernel::{hazard_corrected, Bands, EstimatorKind, HazardCurve, Kernel};
use crate::npmle::{fit_npmle, NpmleFit, NpmleOptions};
use crate::parametric::{fit_spmle, SpmleFit, SpmleOptions, TruncationLaw, WindowDesign};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub level: f64,
    pub pilot_h0: f64,
    pub seed: u64,
    pub max_rejections_per_draw: u64,
}

impl BootstrapConfig {
    pub fn new(replicates: usize, pilot_h0: f64, seed: u64) -> Self {
        Self { replicates, level: 0.95, pilot_h0, seed, max_rejections_per_draw: 1_000_000 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidParameter("bootstrap needs at least one replicate".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidParameter(format!("band level must lie in (0, 1), got {}", self.level)));
        }
        if !(self.pilot_h0 > 0.0 && self.pilot_h0.is_finite()) {
            return Err(Error::InvalidParameter(format!("pilot bandwidth must be positive, got {}", self.pilot_h0)));
        }
        if self.max_rejections_per_draw == 0 {
            return Err(Error::InvalidParameter("rejection budget must be positive".into()));
        }
        Ok(())
    }

    /// Usable replicates needed before bands are reported.
    pub fn required_replicates(&self) -> usize {
        self.replicates.min(20.max(self.replicates.div_ceil(2)))
    }
}

#[derive(Debug, Clone)]
enum TruncationSource {
    Parametric { law: TruncationLaw, design: WindowDesign },
    Atoms { pairs: Vec<(f64, f64)>, index: WeightedIndex<f64> },
}

/// Sampler for observable triplets from a fitted model.
#[derive(Debug, Clone)]
pub struct Resampler {
    lifetimes: Vec<f64>,
    lifetime_index: WeightedIndex<f64>,
    pilot_h0: f64,
    kernel: Kernel,
    truncation: TruncationSource,
    max_rejections: u64,
}

impl Resampler {
    fn lifetime_part<F: CorrectedFit>(fit: &F) -> Result<(Vec<f64>, WeightedIndex<f64>)> {
        let index = WeightedIndex::new(fit.masses().iter().copied())
            .map_err(|e| Error::InvalidDistribution(format!("lifetime masses: {e}")))?;
        Ok((fit.sample().lifetimes(), index))
    }

    /// Lifetimes from the smoothed NPMLE, truncation pairs from the NPMLE atoms.
    pub fn nonparametric(fit: &NpmleFit, pilot_h0: f64, kernel: Kernel, max_rejections: u64) -> Result<Self> {
        let (lifetimes, lifetime_index) = Self::lifetime_part(fit)?;
        let pairs = fit.sample().observations().iter().map(|o| (o.u, o.v)).collect();
        let index = WeightedIndex::new(fit.psi().iter().copied())
            .map_err(|e| Error::InvalidDistribution(format!("truncation masses: {e}")))?;
        Ok(Self {
            lifetimes,
            lifetime_index,
            pilot_h0,
            kernel,
            truncation: TruncationSource::Atoms { pairs, index },
            max_rejections,
        })
    }

    /// Lifetimes from the smoothed SPMLE, truncation pairs from the fitted law.
    pub fn semiparametric(fit: &SpmleFit, pilot_h0: f64, kernel: Kernel, max_rejections: u64) -> Result<Self> {
        let (lifetimes, lifetime_index) = Self::lifetime_part(fit)?;
        Ok(Self {
            lifetimes,
            lifetime_index,
            pilot_h0,
            kernel,
            truncation: TruncationSource::Parametric { law: *fit.law(), design: *fit.design() },
            max_rejections,
        })
    }

    fn propose<R: Rng + ?Sized>(&self, rng: &mut R) -> Observation {
        let x = self.lifetimes[self.lifetime_index.sample(rng)] + self.pilot_h0 * self.kernel.sample(rng);
        let (u, v) = match &self.truncation {
            TruncationSource::Parametric { law, design } => {
                let u = law.sample(rng);
                (u, u + design.sample_width(rng))
            }
            TruncationSource::Atoms { pairs, index } => pairs[index.sample(rng)],
        };
        Observation::new(u, x, v)
    }
}

/// One observable triplet, redrawing until `u <= x <= v`.
pub fn resample_one<R: Rng + ?Sized>(resampler: &Resampler, rng: &mut R) -> Result<Observation> {
    for _ in 0..resampler.max_rejections {
        let o = resampler.propose(rng);
        if o.u <= o.x && o.x <= o.v {
            return Ok(o);
        }
    }
    Err(Error::RejectionBudgetExceeded { budget: resampler.max_rejections })
}

/// `n` accepted triplets.
pub fn resample<R: Rng + ?Sized>(resampler: &Resampler, n: usize, rng: &mut R) -> Result<Sample> {
    let observations = (0..n)
        .map(|_| {
            let o = resample_one(resampler, rng)?;
            assert!(o.u <= o.x && o.x <= o.v, "accepted triplet violates observability");
            Ok(o)
        })
        .collect::<Result<Vec<_>>>()?;
    Sample::new(observations)
}

/// Generator for replicate `b`, independent of execution order.
pub fn replicate_rng(seed: u64, b: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(b as u64);
    rng
}

/// Curves from the usable replicates, in replicate order.
#[derive(Debug, Clone)]
pub struct ReplicateSet {
    pub curves: Vec<Vec<f64>>,
    pub requested: usize,
    pub dropped: usize,
}

#[cfg(feature = "parallel")]
fn map_replicates<T: Send>(count: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    (0..count).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_replicates<T>(count: usize, f: impl Fn(usize) -> T) -> Vec<T> {
    (0..count).map(f).collect()
}

/// Draws `config.replicates` samples of size `n`, refits each with
/// `correction` and evaluates `evaluate` on the refit. Refits without a
/// unique or convergent NPMLE, or with a failed SPMLE, are dropped.
pub fn bootstrap_replicates(
    resampler: &Resampler,
    n: usize,
    correction: &Correction,
    spmle_init: Option<TruncationLaw>,
    config: &BootstrapConfig,
    evaluate: impl Fn(&dyn CorrectedFit) -> Result<Vec<f64>> + Sync + Send,
) -> Result<ReplicateSet> {
    config.validate()?;
    let outcomes = map_replicates(config.replicates, |b| -> Result<Option<Vec<f64>>> {
        let mut rng = replicate_rng(config.seed, b);
        let sample = resample(resampler, n, &mut rng)?;
        match correction {
            Correction::Nonparametric => match fit_npmle(&sample, NpmleOptions::default()) {
                Ok(fit) if fit.exists_unique() => evaluate(&fit).map(Some),
                Ok(_) | Err(Error::NonConvergence { .. }) => Ok(None),
                Err(e) => Err(e),
            },
            Correction::Semiparametric { family, design } => {
                let options = SpmleOptions { init: spmle_init, restarts: 0, ..Default::default() };
                match fit_spmle(&sample, *family, *design, &options) {
                    Ok(fit) => evaluate(&fit).map(Some),
                    Err(
                        Error::OptimizerFailure(_)
                        | Error::DegenerateData(_)
                        | Error::OutsideUnitInterval { .. }
                        | Error::InvalidDistribution(_),
                    ) => Ok(None),
                    Err(e) => Err(e),
                }
            }
        }
    });
    let mut curves = Vec::with_capacity(config.replicates);
    let mut dropped = 0;
    for outcome in outcomes {
        match outcome? {
            Some(c) => curves.push(c),
            None => dropped += 1,
        }
    }
    let required = config.required_replicates();
    if curves.len() < required {
        return Err(Error::InsufficientReplicates { usable: curves.len(), requested: config.replicates, required });
    }
    Ok(ReplicateSet { curves, requested: config.replicates, dropped })
}

/// Linear-interpolation quantile of sorted values.
fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Pointwise percentile bands at `(1 - level)/2` and `(1 + level)/2`.
pub fn percentile_bands(curves: &[Vec<f64>], level: f64) -> Result<Bands> {
    let Some(first) = curves.first() else {
        return Err(Error::InvalidParameter("no replicate curves".into()));
    };
    let m = first.len();
    let mut lower = Vec::with_capacity(m);
    let mut upper = Vec::with_capacity(m);
    let mut column = Vec::with_capacity(curves.len());
    for k in 0..m {
        column.clear();
        column.extend(curves.iter().map(|c| c[k]));
        column.sort_by(f64::total_cmp);
        lower.push(sorted_quantile(&column, 0.5 * (1.0 - level)));
        upper.push(sorted_quantile(&column, 0.5 * (1.0 + level)));
    }
    Ok(Bands { lower, upper })
}

/// What the bands were computed from.
#[derive(Debug, Clone, Serialize)]
pub struct BandReport {
    pub replicates_requested: usize,
    pub replicates_used: usize,
    pub replicates_dropped: usize,
    pub level: f64,
    pub pilot_h0: f64,
    pub seed: u64,
}

fn report(set: &ReplicateSet, config: &BootstrapConfig) -> BandReport {
    BandReport {
        replicates_requested: set.requested,
        replicates_used: set.curves.len(),
        replicates_dropped: set.dropped,
        level: config.level,
        pilot_h0: config.pilot_h0,
        seed: config.seed,
    }
}

enum BaseFit {
    Np(NpmleFit),
    Sp(SpmleFit),
}

impl BaseFit {
    fn new(sample: &Sample, correction: &Correction, seed: u64) -> Result<Self> {
        Ok(match correction {
            Correction::Nonparametric => {
                let fit = fit_npmle(sample, NpmleOptions::default())?;
                if !fit.exists_unique() {
                    return Err(Error::NonExistence { scc_count: fit.existence().scc_count });
                }
                Self::Np(fit)
            }
            Correction::Semiparametric { family, design } => {
                Self::Sp(fit_spmle(sample, *family, *design, &SpmleOptions { seed, ..Default::default() })?)
            }
        })
    }

    fn as_fit(&self) -> &dyn CorrectedFit {
        match self {
            Self::Np(f) => f,
            Self::Sp(f) => f,
        }
    }

    fn resampler(&self, kernel: Kernel, config: &BootstrapConfig) -> Result<Resampler> {
        match self {
            Self::Np(f) => Resampler::nonparametric(f, config.pilot_h0, kernel, config.max_rejections_per_draw),
            Self::Sp(f) => Resampler::semiparametric(f, config.pilot_h0, kernel, config.max_rejections_per_draw),
        }
    }

    fn law(&self) -> Option<TruncationLaw> {
        match self {
            Self::Np(_) => None,
            Self::Sp(f) => Some(*f.law()),
        }
    }
}

/// Hazard estimate on `grid` with pointwise percentile bootstrap bands.
pub fn confidence_bands(
    sample: &Sample,
    correction: &Correction,
    h: f64,
    kernel: Kernel,
    grid: &[f64],
    config: &BootstrapConfig,
) -> Result<(HazardCurve, BandReport)> {
    config.validate()?;
    let base = BaseFit::new(sample, correction, config.seed)?;
    let kind = match correction {
        Correction::Nonparametric => EstimatorKind::Np,
        Correction::Semiparametric { .. } => EstimatorKind::Sp,
    };
    let mut curve = hazard_corrected(base.as_fit(), h, kernel, grid, kind)?;
    let resampler = base.resampler(kernel, config)?;
    let set = bootstrap_replicates(&resampler, sample.len(), correction, base.law(), config, |fit| {
        Ok(hazard_corrected(fit, h, kernel, grid, kind)?.values)
    })?;
    curve.bands = Some(percentile_bands(&set.curves, config.level)?);
    Ok((curve, report(&set, config)))
}

/// Biasing function on `grid` with pointwise percentile bootstrap bands.
pub fn biasing_bands(
    sample: &Sample,
    correction: &Correction,
    kernel: Kernel,
    grid: &[f64],
    config: &BootstrapConfig,
) -> Result<(crate::kernel::Curve, BandReport)> {
    config.validate()?;
    let base = BaseFit::new(sample, correction, config.seed)?;
    let mut curve = crate::kernel::biasing_curve(base.as_fit(), grid)?;
    let resampler = base.resampler(kernel, config)?;
    let set = bootstrap_replicates(&resampler, sample.len(), correction, base.law(), config, |fit| {
        Ok(grid.iter().map(|&t| fit.biasing_g(t)).collect())
    })?;
    curve.bands = Some(percentile_bands(&set.curves, config.level)?);
    Ok((curve, report(&set, config)))
}
