//! Least-squares cross-validation and the AMISE-optimal bandwidth.
//!
//! For a corrected fit with masses `m_i` the LSCV criterion is
//!
//! ```text
//! LSCV(h) = int_a^b lambda_h^2 - (2/n) sum_{x_i in [a,b]} alpha_{-i} lambda_{h,-i}(x_i) / (G_{-i}(x_i) (1 - F_{-i}(x_i-)))
//! ```
//!
//! where the `-i` quantities come from a refit without observation `i`. The
//! refits do not depend on `h`, so they are computed once and cached.

use serde::Serialize;

use crate::data::{Sample, WeightedDF};
use crate::error::{Error, Result};
use crate::fit::CorrectedFit;
use crate::graph::check_existence;
use crate::kernel::{check_bandwidth, EstimatorKind, Kernel, KernelSum};
use crate::npmle::{fit_npmle, fit_npmle_warm, NpmleFit, NpmleOptions};
use crate::parametric::{fit_spmle, Family, SpmleFit, SpmleOptions, WindowDesign};
use crate::quadrature::{adaptive_simpson, geomspace, linspace, trapezoid};

#[derive(Debug, Clone)]
pub struct LscvOptions {
    /// Integration range; `[F^-1(0.05), F^-1(0.90)]` of the corrected fit when absent.
    pub range: Option<(f64, f64)>,
    /// Trapezoid points for `int lambda_h^2`.
    pub points: usize,
    pub loo_npmle_iterations: usize,
    pub loo_spmle_steps: usize,
}

impl Default for LscvOptions {
    fn default() -> Self {
        Self { range: None, points: 512, loo_npmle_iterations: 200, loo_spmle_steps: 100 }
    }
}

/// Lower and upper corrected-CDF quantiles bounding the default range.
pub const RANGE_QUANTILES: (f64, f64) = (0.05, 0.90);

/// `[F^-1(0.05), F^-1(0.90)]` of a corrected distribution.
pub fn default_range(df: &WeightedDF) -> (f64, f64) {
    (df.quantile(RANGE_QUANTILES.0), df.quantile(RANGE_QUANTILES.1))
}

#[derive(Debug, Clone)]
struct LooTerm {
    x: f64,
    /// `alpha_{-i} / (G_{-i}(x_i) (1 - F_{-i}(x_i-)))`
    coef: f64,
    hazard: KernelSum,
}

/// Leave-one-out refits restricted to the lifetimes inside the range.
#[derive(Debug, Clone)]
pub struct LscvCache {
    kind: EstimatorKind,
    n: usize,
    range: (f64, f64),
    points: usize,
    full: KernelSum,
    terms: Vec<LooTerm>,
    in_range: usize,
    skipped: usize,
    /// A non-skippable degenerate denominator makes every score infinite.
    degenerate: bool,
}

enum LooOutcome {
    Term(LooTerm),
    Skip,
    Degenerate,
}

fn loo_term<F: CorrectedFit>(fit: &F, x: f64, is_largest: bool) -> LooOutcome {
    let g = fit.biasing_g(x);
    let survival = fit.lifetime_df().survival_left(x);
    if survival < 1e-10 {
        return if is_largest { LooOutcome::Skip } else { LooOutcome::Degenerate };
    }
    if !(g > 0.0) {
        return LooOutcome::Skip;
    }
    LooOutcome::Term(LooTerm {
        x,
        coef: fit.alpha() / (g * survival),
        hazard: KernelSum::new(&fit.sample().lifetimes(), fit.hazard_weights()),
    })
}

#[cfg(feature = "parallel")]
fn map_indices<T: Send, F: Fn(usize) -> T + Sync + Send>(indices: &[usize], f: F) -> Vec<T> {
    use rayon::prelude::*;
    indices.par_iter().map(|&i| f(i)).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_indices<T, F: Fn(usize) -> T>(indices: &[usize], f: F) -> Vec<T> {
    indices.iter().map(|&i| f(i)).collect()
}

impl LscvCache {
    fn assemble<F: CorrectedFit>(
        kind: EstimatorKind,
        fit: &F,
        options: &LscvOptions,
        refit: impl Fn(usize) -> Result<Option<LooOutcome>> + Sync + Send,
    ) -> Result<Self> {
        if options.points < 2 {
            return Err(Error::InvalidParameter("LSCV needs at least two integration points".into()));
        }
        let range = options.range.unwrap_or_else(|| default_range(fit.lifetime_df()));
        if !(range.0 < range.1) {
            return Err(Error::InvalidParameter(format!("empty integration range {range:?}")));
        }
        let sample = fit.sample();
        let xs = sample.lifetimes();
        let indices: Vec<usize> = (0..xs.len()).filter(|&i| xs[i] >= range.0 && xs[i] <= range.1).collect();
        let outcomes = map_indices(&indices, refit);

        let mut terms = Vec::with_capacity(indices.len());
        let mut skipped = 0;
        let mut degenerate = false;
        for outcome in outcomes {
            match outcome? {
                Some(LooOutcome::Term(t)) => terms.push(t),
                Some(LooOutcome::Degenerate) => degenerate = true,
                Some(LooOutcome::Skip) | None => skipped += 1,
            }
        }
        Ok(Self {
            kind,
            n: xs.len(),
            range,
            points: options.points,
            full: KernelSum::new(&xs, fit.hazard_weights()),
            terms,
            in_range: indices.len(),
            skipped,
            degenerate,
        })
    }

    /// Leave-one-out NPMLE refits, warm-started from the full fit. A subsample
    /// without a unique NPMLE is skipped.
    pub fn nonparametric(fit: &NpmleFit, options: &LscvOptions) -> Result<Self> {
        let sample = fit.sample();
        let largest = largest_index(sample);
        let loo = NpmleOptions { tol: 1e-9, max_iter: options.loo_npmle_iterations };
        Self::assemble(EstimatorKind::Np, fit, options, |i| {
            let sub = sample.without(i)?;
            if !check_existence(&sub).exists_unique {
                return Ok(None);
            }
            let init: Vec<f64> = fit.phi().iter().enumerate().filter(|&(j, _)| j != i).map(|(_, p)| *p).collect();
            let refit = fit_npmle_warm(&sub, &init, loo)?;
            Ok(Some(loo_term(&refit, sample.get(i).x, i == largest)))
        })
    }

    /// Leave-one-out SPMLE refits, warm-started at the full-data `theta`.
    pub fn semiparametric(fit: &SpmleFit, options: &LscvOptions) -> Result<Self> {
        let sample = fit.sample();
        let largest = largest_index(sample);
        let spmle = SpmleOptions { init: Some(*fit.law()), restarts: 0, max_iter: options.loo_spmle_steps, ..Default::default() };
        let design = *fit.design();
        let family = fit.family();
        Self::assemble(EstimatorKind::Sp, fit, options, |i| {
            let sub = sample.without(i)?;
            match fit_spmle(&sub, family, Some(design), &spmle) {
                Ok(refit) => Ok(Some(loo_term(&refit, sample.get(i).x, i == largest))),
                Err(Error::DegenerateData(_) | Error::OptimizerFailure(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
    }

    pub fn kind(&self) -> EstimatorKind {
        self.kind
    }

    pub fn range(&self) -> (f64, f64) {
        self.range
    }

    /// Lifetimes in range whose leave-one-out term was dropped.
    pub fn skipped(&self) -> usize {
        self.skipped
    }

    pub fn used(&self) -> usize {
        self.terms.len()
    }

    /// `LSCV(h)`, or `+inf` when a leave-one-out denominator degenerates.
    pub fn score(&self, h: f64, kernel: Kernel) -> Result<f64> {
        check_bandwidth(h)?;
        if self.degenerate || (self.terms.is_empty() && self.in_range > 0) {
            return Ok(f64::INFINITY);
        }
        let grid = linspace(self.range.0, self.range.1, self.points);
        let squares: Vec<f64> = grid.iter().map(|&x| self.full.at(x, h, kernel).powi(2)).collect();
        let integral = trapezoid(&grid, &squares);
        let cross: f64 = self.terms.iter().map(|t| t.coef * t.hazard.at(t.x, h, kernel)).sum();
        // skipped points are replaced by the average of the used ones
        let scale = if self.terms.is_empty() { 0.0 } else { self.in_range as f64 / self.terms.len() as f64 };
        Ok(integral - 2.0 / self.n as f64 * scale * cross)
    }
}

fn largest_index(sample: &Sample) -> usize {
    let xs = sample.lifetimes();
    (0..xs.len()).fold(0, |best, i| if xs[i] > xs[best] { i } else { best })
}

/// `LSCV(h)` for the nonparametric estimator.
pub fn lscv_score_np(sample: &Sample, h: f64, kernel: Kernel, range: Option<(f64, f64)>) -> Result<f64> {
    let fit = fit_npmle(sample, NpmleOptions::default())?;
    LscvCache::nonparametric(&fit, &LscvOptions { range, ..Default::default() })?.score(h, kernel)
}

/// `LSCV(h)` for the semiparametric estimator.
pub fn lscv_score_sp(
    sample: &Sample,
    family: Family,
    design: Option<WindowDesign>,
    h: f64,
    kernel: Kernel,
    range: Option<(f64, f64)>,
) -> Result<f64> {
    let fit = fit_spmle(sample, family, design, &SpmleOptions::default())?;
    LscvCache::semiparametric(&fit, &LscvOptions { range, ..Default::default() })?.score(h, kernel)
}

#[derive(Debug, Clone, Serialize)]
pub struct BandwidthSearch {
    pub kind: EstimatorKind,
    pub h_grid: Vec<f64>,
    pub scores: Vec<f64>,
    pub h_star: f64,
    pub integration_range: (f64, f64),
    /// The minimiser is the first or last grid point.
    pub at_endpoint: bool,
    pub loo_used: usize,
    pub loo_skipped: usize,
}

/// Evaluates LSCV on `h_grid` and returns the minimiser (first one on ties).
pub fn select_bandwidth(cache: &LscvCache, kernel: Kernel, h_grid: &[f64]) -> Result<BandwidthSearch> {
    if h_grid.is_empty() {
        return Err(Error::InvalidParameter("bandwidth grid is empty".into()));
    }
    if h_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("bandwidth grid must be strictly increasing".into()));
    }
    let scores = h_grid.iter().map(|&h| cache.score(h, kernel)).collect::<Result<Vec<_>>>()?;
    let best = scores
        .iter()
        .enumerate()
        .filter(|(_, s)| s.is_finite())
        .fold(None, |acc: Option<(usize, f64)>, (i, &s)| match acc {
            Some((_, b)) if b <= s => acc,
            _ => Some((i, s)),
        });
    let Some((k, _)) = best else {
        return Err(Error::AllScoresInfinite);
    };
    Ok(BandwidthSearch {
        kind: cache.kind,
        h_grid: h_grid.to_vec(),
        scores,
        h_star: h_grid[k],
        integration_range: cache.range,
        at_endpoint: k == 0 || k == h_grid.len() - 1,
        loo_used: cache.used(),
        loo_skipped: cache.skipped,
    })
}

/// Normal-reference density bandwidth `1.06 min(sd, IQR/1.34) n^-1/5`.
pub fn normal_reference_bandwidth(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
    let spread = match WeightedDF::empirical(xs) {
        Ok(df) => {
            let iqr = df.quantile(0.75) - df.quantile(0.25);
            if iqr > 0.0 {
                sd.min(iqr / 1.34)
            } else {
                sd
            }
        }
        Err(_) => sd,
    };
    1.06 * spread * n.powf(-0.2)
}

/// Geometric grid of `count` points from `0.25` to `4` times the normal-reference bandwidth.
pub fn default_h_grid(sample: &Sample, count: usize) -> Result<Vec<f64>> {
    let h = normal_reference_bandwidth(&sample.lifetimes());
    if !(h > 0.0) {
        return Err(Error::DegenerateData("lifetimes have no spread to set a bandwidth grid".into()));
    }
    Ok(geomspace(0.25 * h, 4.0 * h, count))
}

pub const DEFAULT_H_GRID_POINTS: usize = 30;

/// `h = [alpha R(K) int lambda / (G (1 - F)) / (R(lambda'') mu_2(K)^2)]^(1/5) n^(-1/5)`,
/// with both integrals over `range`.
#[allow(clippy::too_many_arguments)]
pub fn amise_bandwidth(
    lambda: impl Fn(f64) -> f64,
    lambda_dd: impl Fn(f64) -> f64,
    g: impl Fn(f64) -> f64,
    cdf: impl Fn(f64) -> f64,
    alpha: f64,
    kernel: Kernel,
    n: usize,
    range: (f64, f64),
) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidParameter("AMISE bandwidth needs n >= 2".into()));
    }
    if !(range.0 < range.1) {
        return Err(Error::InvalidParameter(format!("empty integration range {range:?}")));
    }
    let tol = 1e-12;
    let variance = adaptive_simpson(|x| lambda(x) / (g(x) * (1.0 - cdf(x))), range.0, range.1, tol);
    let curvature = adaptive_simpson(|x| lambda_dd(x).powi(2), range.0, range.1, tol);
    if !(curvature > 1e-300) {
        return Err(Error::FlatCurvature);
    }
    if !(variance.is_finite() && variance > 0.0) {
        return Err(Error::InvalidDistribution("variance functional is not positive and finite".into()));
    }
    let ratio = alpha * kernel.roughness() * variance / (curvature * kernel.second_moment().powi(2));
    Ok(ratio.powf(0.2) * (n as f64).powf(-0.2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::validate_sample;
    use crate::kernel::hazard_naive;
    use crate::npmle::oracle::grid_argmax_3;
    use crate::parametric::TruncationLaw;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn universal(xs: &[f64]) -> Sample {
        validate_sample(&xs.iter().map(|&x| (-10.0, x, 10.0)).collect::<Vec<_>>()).unwrap()
    }

    fn weibull_sample(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (-(1.0 - rng.random::<f64>()).ln()).powf(0.5)).collect()
    }

    /// Classical complete-data hazard LSCV, written out directly.
    fn classical_lscv(xs: &[f64], h: f64, k: Kernel, range: (f64, f64), points: usize) -> f64 {
        let n = xs.len() as f64;
        let at_risk = |x: f64, pool: &[f64]| pool.iter().filter(|&&v| v >= x).count() as f64 / pool.len() as f64;
        let lambda = |x: f64, pool: &[f64]| -> f64 {
            pool.iter().map(|&xi| k.scaled(x - xi, h) / pool.len() as f64 / at_risk(xi, pool)).sum()
        };
        let grid = linspace(range.0, range.1, points);
        let sq: Vec<f64> = grid.iter().map(|&x| lambda(x, xs).powi(2)).collect();
        let mut cross = 0.0;
        let mut inside = 0;
        for (i, &xi) in xs.iter().enumerate() {
            if xi < range.0 || xi > range.1 {
                continue;
            }
            inside += 1;
            let rest: Vec<f64> = xs.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, v)| *v).collect();
            cross += lambda(xi, &rest) / at_risk(xi, &rest);
        }
        assert!(inside > 0);
        trapezoid(&grid, &sq) - 2.0 / n * cross
    }

    #[test]
    fn no_truncation_reduces_to_classical_lscv() {
        let xs = weibull_sample(40, 3);
        let s = universal(&xs);
        let fit = fit_npmle(&s, NpmleOptions::default()).unwrap();
        let cache = LscvCache::nonparametric(&fit, &LscvOptions::default()).unwrap();
        let range = cache.range();
        for h in [0.1, 0.3, 0.6] {
            let ours = cache.score(h, Kernel::Epanechnikov).unwrap();
            let direct = classical_lscv(&xs, h, Kernel::Epanechnikov, range, 512);
            assert!((ours - direct).abs() < 1e-9 * (1.0 + direct.abs()), "h={h}: {ours} vs {direct}");
        }
        // a fixed uniform law covering every window gives the same scores
        let raw: Vec<_> = xs.iter().map(|&x| (0.01, x, 5.01)).collect();
        let wide = validate_sample(&raw).unwrap();
        let sp = fit_spmle(&wide, Family::Uniform { fixed: Some((0.0, 0.02)) }, None, &SpmleOptions::default()).unwrap();
        let np = fit_npmle(&wide, NpmleOptions::default()).unwrap();
        let opts = LscvOptions { range: Some(range), ..Default::default() };
        let a = LscvCache::semiparametric(&sp, &opts).unwrap();
        let b = LscvCache::nonparametric(&np, &opts).unwrap();
        for h in [0.1, 0.3] {
            let (x, y) = (a.score(h, Kernel::Epanechnikov).unwrap(), b.score(h, Kernel::Epanechnikov).unwrap());
            assert!((x - y).abs() < 1e-9 * (1.0 + x.abs()), "{x} vs {y}");
        }
    }

    #[test]
    fn u_shaped_on_small_sample() {
        use statrs::distribution::{ContinuousCDF, Normal};
        // normal quantiles: a curved hazard and no near-ties
        let normal = Normal::new(1.0, 0.3).unwrap();
        let xs: Vec<f64> = (0..20).map(|i| normal.inverse_cdf((i as f64 + 0.5) / 20.0)).collect();
        let s = universal(&xs);
        let fit = fit_npmle(&s, NpmleOptions::default()).unwrap();
        let cache = LscvCache::nonparametric(&fit, &LscvOptions::default()).unwrap();
        let grid = geomspace(0.01, 20.0, 40);
        let search = select_bandwidth(&cache, Kernel::Epanechnikov, &grid).unwrap();
        assert!(!search.at_endpoint, "{:?}", search.scores);
        let min = search.scores.iter().copied().fold(f64::INFINITY, f64::min);
        // tiny h: no neighbour within h, so the score is the integral of lambda^2 alone
        let sq = hazard_naive(&s, 0.01, Kernel::Epanechnikov, &linspace(cache.range().0, cache.range().1, 512)).unwrap();
        let integral = trapezoid(&sq.grid, &sq.values.iter().map(|v| v * v).collect::<Vec<_>>());
        assert!((search.scores[0] - integral).abs() < 1e-12 * integral);
        assert!(search.scores[0] > 0.0 && search.scores[0] > min + 1.0);
        assert!(*search.scores.last().unwrap() > min);
    }

    #[test]
    fn three_point_loo_matches_brute_force() {
        // every leave-one-out pair of this sample is strongly connected
        let s = validate_sample(&[(0.0, 1.0, 1.6), (0.5, 1.5, 2.5), (1.2, 2.0, 3.0), (0.8, 1.8, 2.2)]).unwrap();
        let fit = fit_npmle(&s, NpmleOptions::default()).unwrap();
        let opts = LscvOptions { range: Some((0.9, 2.1)), loo_npmle_iterations: 10_000, ..Default::default() };
        let cache = LscvCache::nonparametric(&fit, &opts).unwrap();
        assert_eq!(cache.used() + cache.skipped(), 4);
        for t in &cache.terms {
            let i = (0..4).find(|&i| s.get(i).x == t.x).unwrap();
            let sub = s.without(i).unwrap();
            let phi = grid_argmax_3(&sub, 1000);
            let refit = fit_npmle(&sub, NpmleOptions::default()).unwrap();
            for (a, b) in phi.iter().zip(refit.phi()) {
                assert!((a - b).abs() < 2e-3);
            }
        }
        assert!(cache.score(0.5, Kernel::Epanechnikov).unwrap().is_finite());
    }

    #[test]
    fn largest_lifetime_is_skipped_not_infinite() {
        let xs = weibull_sample(30, 1);
        let s = universal(&xs);
        let fit = fit_npmle(&s, NpmleOptions::default()).unwrap();
        let cache = LscvCache::nonparametric(&fit, &LscvOptions { range: Some((0.0, 10.0)), ..Default::default() }).unwrap();
        assert_eq!(cache.skipped(), 1);
        assert!(cache.score(0.3, Kernel::Epanechnikov).unwrap().is_finite());
    }

    #[test]
    fn single_point_grid_and_errors() {
        let s = universal(&weibull_sample(25, 2));
        let fit = fit_npmle(&s, NpmleOptions::default()).unwrap();
        let cache = LscvCache::nonparametric(&fit, &LscvOptions::default()).unwrap();
        let one = select_bandwidth(&cache, Kernel::Epanechnikov, &[0.4]).unwrap();
        assert_eq!(one.h_star, 0.4);
        assert!(one.at_endpoint);
        assert!(select_bandwidth(&cache, Kernel::Epanechnikov, &[]).is_err());
        assert!(cache.score(0.0, Kernel::Epanechnikov).is_err());
    }

    #[test]
    fn permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut raw = Vec::new();
        while raw.len() < 60 {
            let x = rng.random::<f64>();
            let u = rng.random::<f64>() * 1.2 - 0.4;
            if u <= x && x <= u + 0.4 {
                raw.push((u, x, u + 0.4));
            }
        }
        let s = validate_sample(&raw).unwrap();
        let mut rev = raw.clone();
        rev.reverse();
        let r = validate_sample(&rev).unwrap();
        let grid = default_h_grid(&s, 12).unwrap();
        let a = select_bandwidth(&LscvCache::nonparametric(&fit_npmle(&s, NpmleOptions::default()).unwrap(), &LscvOptions::default()).unwrap(), Kernel::Epanechnikov, &grid).unwrap();
        let b = select_bandwidth(&LscvCache::nonparametric(&fit_npmle(&r, NpmleOptions::default()).unwrap(), &LscvOptions::default()).unwrap(), Kernel::Epanechnikov, &grid).unwrap();
        assert_eq!(a.h_star, b.h_star);
        for (x, y) in a.scores.iter().zip(&b.scores) {
            assert!((x - y).abs() < 1e-8 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn sp_scores_on_interval_data() {
        let law = TruncationLaw::BetaOne { p: 1.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut raw = Vec::new();
        while raw.len() < 80 {
            let x = 0.25 + 0.75 * rng.random::<f64>().powf(4.0 / 3.0);
            let u = law.sample(&mut rng);
            if u <= x && x <= u + 0.25 {
                raw.push((u, x, u + 0.25));
            }
        }
        let s = validate_sample(&raw).unwrap();
        let h = lscv_score_sp(&s, Family::BetaOne, None, 0.1, Kernel::Epanechnikov, None).unwrap();
        assert!(h.is_finite());
    }

    /// Gauss–Legendre with 20 nodes on each of `pieces` panels.
    fn gauss_legendre(f: impl Fn(f64) -> f64, a: f64, b: f64, pieces: usize) -> f64 {
        const NODES: [(f64, f64); 10] = [
            (0.0765265211334973, 0.1527533871307258),
            (0.2277858511416451, 0.1491729864726037),
            (0.3737060887154195, 0.1420961093183820),
            (0.5108670019508271, 0.1316886384491766),
            (0.6360536807265150, 0.1181945319615184),
            (0.7463319064601508, 0.1019301198172404),
            (0.8391169718222188, 0.0832767415767048),
            (0.9122344282513259, 0.0626720483341091),
            (0.9639719272779138, 0.0406014298003869),
            (0.9931285991850949, 0.0176140071391521),
        ];
        let w = (b - a) / pieces as f64;
        (0..pieces)
            .map(|k| {
                let mid = a + (k as f64 + 0.5) * w;
                NODES.iter().map(|&(x, wt)| wt * (f(mid - 0.5 * w * x) + f(mid + 0.5 * w * x))).sum::<f64>() * 0.5 * w
            })
            .sum()
    }

    #[test]
    fn amise_formula_and_scaling() {
        // Weibull(shape 3): lambda = 3x^2, lambda'' = 6, F = 1 - exp(-x^3)
        let lambda = |x: f64| 3.0 * x * x;
        let dd = |_: f64| 6.0;
        let cdf = |x: f64| 1.0 - (-x.powi(3)).exp();
        let range = (0.2, 1.0);
        let k = Kernel::Epanechnikov;
        let h = amise_bandwidth(lambda, dd, |_| 1.0, cdf, 1.0, k, 500, range).unwrap();
        let var = gauss_legendre(|x| lambda(x) / (1.0 - cdf(x)), range.0, range.1, 8);
        let curv = 36.0 * 0.8;
        let expected = (0.6 * var / (curv * 0.04)).powf(0.2) * 500f64.powf(-0.2);
        assert!((h - expected).abs() < 1e-9);
        let h4 = amise_bandwidth(lambda, dd, |_| 1.0, cdf, 1.0, k, 2000, range).unwrap();
        assert!((h4 / h - 4f64.powf(-0.2)).abs() < 1e-12);
        // a linear hazard has no curvature
        assert!(matches!(
            amise_bandwidth(|x| x, |_| 0.0, |_| 1.0, |x| 1.0 - (-0.5 * x * x).exp(), 1.0, k, 100, range),
            Err(Error::FlatCurvature)
        ));
    }

    #[test]
    fn amise_homogeneous_in_time_scale() {
        // t -> t / b with uniform G: lambda_b(t) = b lambda(b t), G and alpha unchanged
        let b = 3.0;
        let lambda = |x: f64| 3.0 * x * x;
        let dd = |_: f64| 6.0;
        let cdf = |x: f64| 1.0 - (-x.powi(3)).exp();
        let k = Kernel::Gaussian;
        let h = amise_bandwidth(lambda, dd, |_| 0.3, cdf, 0.3, k, 400, (0.2, 1.0)).unwrap();
        let hb = amise_bandwidth(
            |t| b * lambda(b * t),
            |t| b * b * b * dd(b * t),
            |_| 0.3,
            |t| cdf(b * t),
            0.3,
            k,
            400,
            (0.2 / b, 1.0 / b),
        )
        .unwrap();
        assert!((hb - h / b).abs() < 1e-9 * h);
    }
}
