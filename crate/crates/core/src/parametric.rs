//! Parametric truncation laws and the semiparametric (SPMLE) fit.
//!
//! The left truncation time `U*` follows a parametric law `L_theta`; the right
//! limit is `V* = U* + W` with either a fixed width (`W = tau`, interval
//! sampling) or an independent `Uniform(lo, hi)` width. `theta` maximises the
//! conditional likelihood of the truncation times given the lifetimes,
//! `prod_i l_theta(u_i) / G_theta(x_i)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use statrs::function::beta::{beta_reg, ln_beta};

use crate::data::{Sample, WeightedDF};
use crate::error::{Error, Result};
use crate::fit::{lifetime_summary, CorrectedFit};
use crate::optim::{maximize, NelderMeadOptions};
use crate::quadrature::adaptive_simpson;

/// Fully specified law of the left truncation time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum TruncationLaw {
    Uniform { a: f64, b: f64 },
    Beta { p: f64, q: f64 },
    /// `Beta(p, 1)`, with `L(u) = u^p` on `[0, 1]`.
    BetaOne { p: f64 },
}

impl TruncationLaw {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Uniform { a, b } => a.is_finite() && b.is_finite() && a < b,
            Self::Beta { p, q } => p > 0.0 && q > 0.0 && p.is_finite() && q.is_finite(),
            Self::BetaOne { p } => p > 0.0 && p.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidDistribution(format!("parameters out of bounds: {self:?}")))
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match *self {
            Self::Uniform { a, b } => (a, b),
            _ => (0.0, 1.0),
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            Self::Uniform { a, b } => vec![a, b],
            Self::Beta { p, q } => vec![p, q],
            Self::BetaOne { p } => vec![p],
        }
    }

    /// Log density; `-inf` outside the support.
    pub fn ln_density(&self, u: f64) -> f64 {
        let (lo, hi) = self.support();
        if !(u >= lo && u <= hi) {
            return f64::NEG_INFINITY;
        }
        // (p - 1) ln u with p = 1 must stay 0 at u = 0
        let power = |e: f64, base: f64| if e == 0.0 { 0.0 } else { e * base.ln() };
        match *self {
            Self::Uniform { a, b } => -(b - a).ln(),
            Self::Beta { p, q } => power(p - 1.0, u) + power(q - 1.0, 1.0 - u) - ln_beta(p, q),
            Self::BetaOne { p } => p.ln() + power(p - 1.0, u),
        }
    }

    pub fn density(&self, u: f64) -> f64 {
        self.ln_density(u).exp()
    }

    pub fn cdf(&self, u: f64) -> f64 {
        let (lo, hi) = self.support();
        if u <= lo {
            return 0.0;
        }
        if u >= hi {
            return 1.0;
        }
        match *self {
            Self::Uniform { a, b } => (u - a) / (b - a),
            Self::Beta { p, q } => beta_reg(p, q, u),
            Self::BetaOne { p } => u.powf(p),
        }
    }

    /// Numerical integral of the density over the support.
    ///
    /// Beta endpoints with exponent below one are integrable singularities, so
    /// each half is integrated on a logarithmic scale from its endpoint.
    pub fn total_mass(&self) -> f64 {
        let tol = 1e-10;
        // log density at distance e^lt from an endpoint, without the endpoint's own power
        let rest = |lt: f64, e_there: f64, ln_norm: f64| (e_there - 1.0) * (-lt.exp()).ln_1p() - ln_norm;
        match *self {
            Self::Uniform { a, b } => adaptive_simpson(|u| self.density(u), a, b, tol),
            Self::Beta { p, q } => {
                let ln_norm = ln_beta(p, q);
                endpoint_half(|lt| rest(lt, q, ln_norm), p, tol) + endpoint_half(|lt| rest(lt, p, ln_norm), q, tol)
            }
            Self::BetaOne { p } => {
                let ln_norm = -p.ln();
                endpoint_half(|lt| rest(lt, 1.0, ln_norm), p, tol) + endpoint_half(|lt| rest(lt, p, ln_norm), 1.0, tol)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Uniform { a, b } => a + (b - a) * rng.random::<f64>(),
            Self::Beta { p, q } => rand_distr::Beta::new(p, q).expect("validated parameters").sample(rng),
            Self::BetaOne { p } => rng.random::<f64>().powf(1.0 / p),
        }
    }
}

/// `int_0^{1/2} u^(e-1) r(u) du`, given `ln_r(ln u)` with `r` bounded near zero.
///
/// With `y = -e ln u` the integrand becomes `exp(-y) r(exp(-y/e)) / e`, smooth
/// for every `e > 0`; the tail beyond `e ln 2 + 50` is below any useful tolerance.
fn endpoint_half<F: Fn(f64) -> f64>(ln_r: F, e: f64, tol: f64) -> f64 {
    let lo = e * std::f64::consts::LN_2;
    adaptive_simpson(|y| (-y - e.ln() + ln_r(-y / e)).exp(), lo, lo + 50.0, tol)
}

/// How the right truncation limit relates to the left one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "design", rename_all = "snake_case")]
pub enum WindowDesign {
    /// `V* = U* + tau`.
    Interval { tau: f64 },
    /// `V* = U* + W` with `W ~ Uniform(lo, hi)` independent of `U*`.
    UniformWidth { lo: f64, hi: f64 },
}

impl WindowDesign {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Interval { tau } => tau >= 0.0 && tau.is_finite(),
            Self::UniformWidth { lo, hi } => lo >= 0.0 && lo < hi && hi.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid window design {self:?}")))
        }
    }

    pub fn sample_width<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Interval { tau } => tau,
            Self::UniformWidth { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
        }
    }

    /// Log density of the window given its left end (zero for a fixed width).
    fn ln_width_density(&self, width: f64) -> f64 {
        match *self {
            Self::Interval { tau } => {
                if (width - tau).abs() <= 1e-9 * tau.max(1.0) {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            Self::UniformWidth { lo, hi } => {
                let slack = 1e-12 * hi.max(1.0);
                if width >= lo - slack && width <= hi + slack {
                    -(hi - lo).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }
}

/// `G_theta(t) = P(U* <= t <= V*)`.
///
/// For interval sampling this is `L(t) - L(t - tau)`. For a random width the
/// double integral over `{u <= t <= u + w}` is evaluated as an adaptive
/// quadrature over `w` of the inner probability `L(t) - L(t - w)`.
pub fn g_theta(law: &TruncationLaw, design: &WindowDesign, t: f64) -> f64 {
    let value = match *design {
        WindowDesign::Interval { tau } => law.cdf(t) - law.cdf(t - tau),
        WindowDesign::UniformWidth { lo, hi } => {
            let inner = |w: f64| law.cdf(t) - law.cdf(t - w);
            adaptive_simpson(inner, lo, hi, 1e-10) / (hi - lo)
        }
    };
    value.clamp(0.0, 1.0)
}

/// Checked form of [`g_theta`].
pub fn g_theta_checked(law: &TruncationLaw, design: &WindowDesign, t: f64) -> Result<f64> {
    law.validate()?;
    design.validate()?;
    Ok(g_theta(law, design, t))
}

/// `sum_i [ln g_theta(u_i, v_i) - ln G_theta(x_i)]`, or `-inf` when any term
/// is undefined.
pub fn conditional_loglik_sp(sample: &Sample, law: &TruncationLaw, design: &WindowDesign) -> f64 {
    if law.validate().is_err() {
        return f64::NEG_INFINITY;
    }
    let mut total = 0.0;
    for o in sample.observations() {
        let g = g_theta(law, design, o.x);
        let term = law.ln_density(o.u) + design.ln_width_density(o.v - o.u) - g.ln();
        if !term.is_finite() {
            return f64::NEG_INFINITY;
        }
        total += term;
    }
    total
}

/// Parametric family to fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// Uniform on `[a, b]`; when not fixed, `(a, b)` is estimated.
    Uniform { fixed: Option<(f64, f64)> },
    Beta,
    BetaOne,
}

impl Family {
    fn is_beta(&self) -> bool {
        matches!(self, Self::Beta | Self::BetaOne)
    }

    fn to_unconstrained(&self, law: &TruncationLaw) -> Vec<f64> {
        law.params().iter().map(|p| p.ln()).collect()
    }

    fn from_unconstrained(&self, z: &[f64]) -> TruncationLaw {
        match self {
            Self::Beta => TruncationLaw::Beta { p: z[0].exp(), q: z[1].exp() },
            Self::BetaOne => TruncationLaw::BetaOne { p: z[0].exp() },
            Self::Uniform { .. } => unreachable!("uniform families are not searched"),
        }
    }

    fn accepts(&self, law: &TruncationLaw) -> bool {
        matches!(
            (self, law),
            (Self::Uniform { .. }, TruncationLaw::Uniform { .. })
                | (Self::Beta, TruncationLaw::Beta { .. })
                | (Self::BetaOne, TruncationLaw::BetaOne { .. })
        )
    }

    /// Method-of-moments starting law from the truncation times.
    pub fn moments_init(&self, us: &[f64]) -> TruncationLaw {
        let n = us.len() as f64;
        let mean = us.iter().sum::<f64>() / n;
        let var = us.iter().map(|u| (u - mean).powi(2)).sum::<f64>() / n;
        let fallback = |p: f64| if p.is_finite() && p > 1e-3 && p < 1e3 { p } else { 1.0 };
        match self {
            Self::BetaOne => TruncationLaw::BetaOne { p: fallback(mean / (1.0 - mean)) },
            Self::Beta => {
                let common = mean * (1.0 - mean) / var - 1.0;
                if var > 0.0 && common > 0.0 {
                    TruncationLaw::Beta { p: fallback(mean * common), q: fallback((1.0 - mean) * common) }
                } else {
                    TruncationLaw::Beta { p: 1.0, q: 1.0 }
                }
            }
            Self::Uniform { fixed } => {
                let (a, b) = fixed.unwrap_or_else(|| uniform_mle(us));
                TruncationLaw::Uniform { a, b }
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Uniform { .. } => "uniform",
            Self::Beta => "beta",
            Self::BetaOne => "beta1",
        }
    }
}

/// The conditional likelihood of a free uniform law is `prod 1/|[x_i - w, x_i] cap [a, b]|`
/// (averaged over `w`), which only grows as `[a, b]` shrinks onto the
/// observed truncation times.
fn uniform_mle(us: &[f64]) -> (f64, f64) {
    let lo = us.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = us.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpmleOptions {
    /// Starting law; the method-of-moments law when absent.
    pub init: Option<TruncationLaw>,
    /// Jittered restarts in addition to the initial start.
    pub restarts: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub diameter_tol: f64,
}

impl Default for SpmleOptions {
    fn default() -> Self {
        Self { init: None, restarts: 5, seed: 0, max_iter: 2000, diameter_tol: 1e-7 }
    }
}

/// Per-start record of the simplex searches.
#[derive(Debug, Clone, Default, Serialize)]
pub struct OptimizerTrace {
    pub start_logliks: Vec<f64>,
    pub final_logliks: Vec<f64>,
    pub iterations: Vec<usize>,
    pub converged: Vec<bool>,
    pub best_start: usize,
}

#[derive(Debug, Clone)]
pub struct SpmleFit {
    sample: Sample,
    family: Family,
    law: TruncationLaw,
    design: WindowDesign,
    alpha: f64,
    masses: Vec<f64>,
    g: Vec<f64>,
    df: WeightedDF,
    hazard_weights: Vec<f64>,
    cond_loglik: f64,
    trace: OptimizerTrace,
}

/// JSON fit summary.
#[derive(Debug, Clone, Serialize)]
pub struct SpmleSummary {
    pub family: &'static str,
    pub theta: Vec<f64>,
    pub design: WindowDesign,
    pub alpha_sp: f64,
    pub cond_loglik: f64,
    pub trace: OptimizerTrace,
}

/// Resolves the window design: explicit, else the sample's common width.
pub fn resolve_design(sample: &Sample, design: Option<WindowDesign>) -> Result<WindowDesign> {
    let design = match design {
        Some(d) => d,
        None => match sample.tau() {
            Some(tau) => WindowDesign::Interval { tau },
            None => {
                return Err(Error::InvalidParameter(
                    "windows have no common width; supply tau or a window design".into(),
                ))
            }
        },
    };
    design.validate()?;
    Ok(design)
}

/// Maximises the conditional likelihood over `family` and builds the fit.
pub fn fit_spmle(sample: &Sample, family: Family, design: Option<WindowDesign>, options: &SpmleOptions) -> Result<SpmleFit> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let design = resolve_design(sample, design)?;
    let xs = sample.lifetimes();
    if xs.iter().all(|&x| x == xs[0]) {
        return Err(Error::DegenerateData("all lifetimes are equal".into()));
    }
    let us = sample.left_truncation();
    if family.is_beta() {
        if let Some(index) = us.iter().position(|&u| !(u > 0.0 && u < 1.0)) {
            return Err(Error::OutsideUnitInterval { index, u: us[index] });
        }
    }
    if let Some(init) = &options.init {
        init.validate()?;
        if !family.accepts(init) {
            return Err(Error::InvalidParameter(format!("initial law {init:?} is not in the {} family", family.name())));
        }
    }

    let (law, trace) = match family {
        Family::Uniform { .. } => {
            // no free parameters to search, or a closed-form argmax
            let law = family.moments_init(&us);
            law.validate()?;
            let ll = conditional_loglik_sp(sample, &law, &design);
            let trace = OptimizerTrace {
                start_logliks: vec![ll],
                final_logliks: vec![ll],
                iterations: vec![0],
                converged: vec![true],
                best_start: 0,
            };
            (law, trace)
        }
        Family::Beta | Family::BetaOne => search(sample, family, &design, &us, options),
    };

    let cond_loglik = conditional_loglik_sp(sample, &law, &design);
    if !cond_loglik.is_finite() {
        return Err(Error::OptimizerFailure(format!(
            "every start of the {} search ended at an infeasible point",
            family.name()
        )));
    }
    let mass = law.total_mass();
    if !((mass - 1.0).abs() <= 1e-6) {
        return Err(Error::InvalidDistribution(format!("fitted density integrates to {mass}, not 1")));
    }
    build_fit(sample.clone(), family, law, design, cond_loglik, trace)
}

fn search(sample: &Sample, family: Family, design: &WindowDesign, us: &[f64], options: &SpmleOptions) -> (TruncationLaw, OptimizerTrace) {
    let init = options.init.unwrap_or_else(|| family.moments_init(us));
    let z0 = family.to_unconstrained(&init);
    let nm = NelderMeadOptions { max_iter: options.max_iter, diameter_tol: options.diameter_tol, initial_step: 0.5 };
    let objective = |z: &[f64]| conditional_loglik_sp(sample, &family.from_unconstrained(z), design);

    let mut trace = OptimizerTrace::default();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for start in 0..=options.restarts {
        let z_start: Vec<f64> = if start == 0 {
            z0.clone()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
            rng.set_stream(start as u64);
            z0.iter().map(|z| z + 0.5 * rng.sample::<f64, _>(StandardNormal)).collect()
        };
        let start_ll = objective(&z_start);
        let result = maximize(objective, &z_start, nm);
        trace.start_logliks.push(start_ll);
        trace.final_logliks.push(result.value);
        trace.iterations.push(result.iterations);
        trace.converged.push(result.converged);
        // strict improvement keeps the lowest start index on ties
        if result.value.is_finite() && best.as_ref().is_none_or(|(v, _)| result.value > *v) {
            trace.best_start = start;
            best = Some((result.value, result.x));
        }
    }
    let z = best.map(|(_, z)| z).unwrap_or(z0);
    (family.from_unconstrained(&z), trace)
}

fn build_fit(
    sample: Sample,
    family: Family,
    law: TruncationLaw,
    design: WindowDesign,
    cond_loglik: f64,
    trace: OptimizerTrace,
) -> Result<SpmleFit> {
    let g: Vec<f64> = sample.observations().iter().map(|o| g_theta(&law, &design, o.x)).collect();
    if let Some(i) = g.iter().position(|&v| v < 1e-12) {
        return Err(Error::DegenerateData(format!("fitted G vanishes at observation {i}")));
    }
    let n = sample.len() as f64;
    let alpha = 1.0 / g.iter().map(|v| 1.0 / (n * v)).sum::<f64>();
    let masses: Vec<f64> = g.iter().map(|v| alpha / (n * v)).collect();
    let (df, hazard_weights) = lifetime_summary(&sample, &masses)?;
    Ok(SpmleFit { sample, family, law, design, alpha, masses, g, df, hazard_weights, cond_loglik, trace })
}

impl SpmleFit {
    pub fn law(&self) -> &TruncationLaw {
        &self.law
    }

    pub fn theta(&self) -> Vec<f64> {
        self.law.params()
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn design(&self) -> &WindowDesign {
        &self.design
    }

    pub fn cond_loglik(&self) -> f64 {
        self.cond_loglik
    }

    pub fn trace(&self) -> &OptimizerTrace {
        &self.trace
    }

    /// `F_theta(x) = alpha n^-1 sum_i I(x_i <= x) / G_theta(x_i)`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.df.cdf(x)
    }

    pub fn summary(&self) -> SpmleSummary {
        SpmleSummary {
            family: self.family.name(),
            theta: self.theta(),
            design: self.design,
            alpha_sp: self.alpha,
            cond_loglik: self.cond_loglik,
            trace: self.trace.clone(),
        }
    }
}

impl CorrectedFit for SpmleFit {
    fn sample(&self) -> &Sample {
        &self.sample
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn masses(&self) -> &[f64] {
        &self.masses
    }

    fn g_at_lifetimes(&self) -> &[f64] {
        &self.g
    }

    fn lifetime_df(&self) -> &WeightedDF {
        &self.df
    }

    fn biasing_g(&self, t: f64) -> f64 {
        g_theta(&self.law, &self.design, t)
    }

    fn hazard_weights(&self) -> &[f64] {
        &self.hazard_weights
    }
}

/// See [`SpmleFit::cdf`].
pub fn spmle_cdf(fit: &SpmleFit, x: f64) -> f64 {
    fit.cdf(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::validate_sample;
    use crate::quadrature::linspace;

    const TAU: WindowDesign = WindowDesign::Interval { tau: 0.25 };

    /// Draws `n` interval-sampled triplets with `U ~ law`, `X ~ 0.25 + 0.75 Beta(3/4, 1)`.
    fn interval_sample(law: TruncationLaw, tau: f64, n: usize, seed: u64) -> Sample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut raw = Vec::with_capacity(n);
        while raw.len() < n {
            let x = 0.25 + 0.75 * rng.random::<f64>().powf(4.0 / 3.0);
            let u = law.sample(&mut rng);
            if u <= x && x <= u + tau {
                raw.push((u, x, u + tau));
            }
        }
        validate_sample(&raw).unwrap()
    }

    #[test]
    fn g_theta_examples() {
        let unif = TruncationLaw::Uniform { a: 0.0, b: 1.0 };
        for t in linspace(0.25, 1.0, 31) {
            assert!((g_theta(&unif, &TAU, t) - 0.25).abs() < 1e-15);
        }
        let b11 = TruncationLaw::Beta { p: 1.0, q: 1.0 };
        assert!((g_theta(&b11, &TAU, 0.1) - 0.1).abs() < 1e-12);
        let b21 = TruncationLaw::Beta { p: 2.0, q: 1.0 };
        assert!((g_theta(&b21, &TAU, 0.5) - 0.1875).abs() < 1e-12);
        assert!((g_theta(&TruncationLaw::BetaOne { p: 2.0 }, &TAU, 0.5) - 0.1875).abs() < 1e-15);
        assert!(g_theta_checked(&TruncationLaw::Beta { p: -1.0, q: 1.0 }, &TAU, 0.5).is_err());
    }

    #[test]
    fn random_width_g_matches_monte_carlo() {
        let law = TruncationLaw::Beta { p: 2.0, q: 3.0 };
        let design = WindowDesign::UniformWidth { lo: 0.1, hi: 0.4 };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 200_000;
        let pairs: Vec<(f64, f64)> = (0..draws)
            .map(|_| {
                let u = law.sample(&mut rng);
                (u, u + design.sample_width(&mut rng))
            })
            .collect();
        for t in [0.1, 0.3, 0.5, 0.8] {
            let mc = pairs.iter().filter(|(u, v)| *u <= t && t <= *v).count() as f64 / draws as f64;
            let exact = g_theta(&law, &design, t);
            assert!((mc - exact).abs() < 4.0 * (exact * (1.0 - exact) / draws as f64).sqrt() + 1e-4, "t={t}: {mc} vs {exact}");
        }
        // a degenerate width range collapses to interval sampling
        let narrow = WindowDesign::UniformWidth { lo: 0.25, hi: 0.25 + 1e-9 };
        assert!((g_theta(&law, &narrow, 0.4) - g_theta(&law, &TAU, 0.4)).abs() < 1e-8);
    }

    #[test]
    fn loglik_examples() {
        let s = validate_sample(&[(0.1, 0.3, 1.1), (0.2, 0.9, 1.2)]).unwrap();
        let unif = TruncationLaw::Uniform { a: 0.0, b: 1.0 };
        let ll = conditional_loglik_sp(&s, &unif, &WindowDesign::Interval { tau: 1.0 });
        // G(x) = L(x) - L(x - 1) = x, since both windows reach below zero
        assert!((ll - (-(0.3f64.ln()) - 0.9f64.ln())).abs() < 1e-12);

        let s = validate_sample(&[(0.2, 0.3, 0.45), (0.5, 0.6, 0.75)]).unwrap();
        let b21 = TruncationLaw::Beta { p: 2.0, q: 1.0 };
        let tau = 0.25f64;
        let direct: f64 = [(0.2f64, 0.3f64), (0.5, 0.6)]
            .iter()
            .map(|&(u, x)| (2.0 * u).ln() - (x * x - (x - tau).max(0.0).powi(2)).ln())
            .sum();
        let ll = conditional_loglik_sp(&s, &b21, &TAU);
        assert!((ll - direct).abs() < 1e-12, "{ll} vs {direct}");

        // Beta(2, 1) has zero density at u = 0
        let s0 = validate_sample(&[(0.0, 0.1, 0.25), (0.5, 0.6, 0.75)]).unwrap();
        assert_eq!(conditional_loglik_sp(&s0, &b21, &TAU), f64::NEG_INFINITY);
    }

    #[test]
    fn uniform_constant_g_gives_empirical_weights() {
        let s = validate_sample(&[(0.3, 0.4, 0.55), (0.35, 0.5, 0.6), (0.5, 0.7, 0.75), (0.6, 0.8, 0.85)]).unwrap();
        // with L uniform on [0, 1] every lifetime in [0.25, 1] has G = tau
        let fit = fit_spmle(&s, Family::Uniform { fixed: Some((0.0, 1.0)) }, None, &SpmleOptions::default()).unwrap();
        assert_eq!(fit.theta(), vec![0.0, 1.0]);
        assert!(fit.masses().iter().all(|m| (m - 0.25).abs() < 1e-12));
        assert!((fit.alpha() - 0.25).abs() < 1e-12);
        for (m, g) in fit.masses().iter().zip(fit.g_at_lifetimes()) {
            assert!((fit.alpha() / g - 1.0).abs() < 1e-12 && (m - 0.25).abs() < 1e-12);
        }
        let ecdf = WeightedDF::empirical(&s.lifetimes()).unwrap();
        for x in linspace(0.3, 0.9, 13) {
            assert!((spmle_cdf(&fit, x) - ecdf.cdf(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn spmle_cdf_limits() {
        let s = interval_sample(TruncationLaw::BetaOne { p: 1.0 }, 0.25, 200, 3);
        let fit = fit_spmle(&s, Family::BetaOne, None, &SpmleOptions::default()).unwrap();
        let xs = s.lifetimes();
        let max = xs.iter().copied().fold(f64::MIN, f64::max);
        let min = xs.iter().copied().fold(f64::MAX, f64::min);
        assert!((spmle_cdf(&fit, max) - 1.0).abs() < 1e-8);
        assert_eq!(spmle_cdf(&fit, min - 1e-9), 0.0);
        assert!((fit.masses().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(fit.alpha() > 0.0 && fit.alpha() <= 1.0);
    }

    #[test]
    fn uniform_truth_gives_beta_one_near_one() {
        let reps = 20;
        let mut close = 0;
        let mut total = 0.0;
        for r in 0..reps {
            let s = interval_sample(TruncationLaw::Uniform { a: 0.0, b: 1.0 }, 0.25, 500, 5 + r);
            let fit = fit_spmle(&s, Family::BetaOne, None, &SpmleOptions::default()).unwrap();
            let p = fit.theta()[0];
            total += p;
            close += usize::from((p - 1.0).abs() < 0.2);
            let t = fit.trace();
            assert_eq!(t.start_logliks.len(), 6);
            assert!(t.start_logliks.iter().all(|&v| fit.cond_loglik() >= v));
        }
        // the sampling sd of p at n = 500 is about 0.13
        assert!(close >= 14, "{close}/{reps}");
        assert!((total / reps as f64 - 1.0).abs() < 0.1);
    }

    #[test]
    fn misspecified_truth_still_fits() {
        let s = interval_sample(TruncationLaw::Beta { p: 1.0, q: 5.0 }, 0.25, 500, 9);
        let fit = fit_spmle(&s, Family::BetaOne, None, &SpmleOptions::default()).unwrap();
        assert!(fit.cond_loglik().is_finite());
        assert!(fit.theta()[0] < 1.0);
        let full = fit_spmle(&s, Family::Beta, None, &SpmleOptions::default()).unwrap();
        assert!(full.cond_loglik() >= fit.cond_loglik() - 1e-6);
        assert!((full.theta()[1] - 5.0).abs() < 2.5, "{:?}", full.theta());
    }

    #[test]
    fn free_uniform_hugs_the_truncation_times() {
        let s = interval_sample(TruncationLaw::Uniform { a: 0.0, b: 1.0 }, 0.25, 100, 2);
        let fit = fit_spmle(&s, Family::Uniform { fixed: None }, None, &SpmleOptions::default()).unwrap();
        let us = s.left_truncation();
        let th = fit.theta();
        assert_eq!(th[0], us.iter().copied().fold(f64::MAX, f64::min));
        assert_eq!(th[1], us.iter().copied().fold(f64::MIN, f64::max));
        // widening either end lowers the likelihood
        for (a, b) in [(th[0] - 0.05, th[1]), (th[0], th[1] + 0.05)] {
            let wider = conditional_loglik_sp(&s, &TruncationLaw::Uniform { a, b }, &TAU);
            assert!(wider < fit.cond_loglik());
        }
    }

    #[test]
    fn errors() {
        let s = validate_sample(&[(0.5, 0.9, 1.0), (1.2, 1.4, 1.7)]).unwrap();
        assert!(matches!(
            fit_spmle(&s, Family::Beta, None, &SpmleOptions::default()),
            Err(Error::OutsideUnitInterval { index: 1, .. })
        ));
        let same = validate_sample(&[(0.1, 0.3, 0.35), (0.2, 0.3, 0.45)]).unwrap();
        assert!(matches!(fit_spmle(&same, Family::BetaOne, None, &SpmleOptions::default()), Err(Error::DegenerateData(_))));
        let ragged = validate_sample(&[(0.1, 0.3, 0.5), (0.2, 0.4, 0.45)]).unwrap();
        assert!(matches!(fit_spmle(&ragged, Family::BetaOne, None, &SpmleOptions::default()), Err(Error::InvalidParameter(_))));
        // uniform law on [0, 0.15] excludes u = 0.2
        let bad = validate_sample(&[(0.1, 0.3, 0.35), (0.2, 0.4, 0.45)]).unwrap();
        assert!(matches!(
            fit_spmle(&bad, Family::Uniform { fixed: Some((0.0, 0.15)) }, None, &SpmleOptions::default()),
            Err(Error::OptimizerFailure(_))
        ));
    }

    #[test]
    fn deterministic_given_seed() {
        let s = interval_sample(TruncationLaw::Beta { p: 2.0, q: 2.0 }, 0.25, 150, 4);
        let opts = SpmleOptions { seed: 77, ..Default::default() };
        let a = fit_spmle(&s, Family::Beta, None, &opts).unwrap();
        let b = fit_spmle(&s, Family::Beta, None, &opts).unwrap();
        assert_eq!(a.theta(), b.theta());
        assert_eq!(a.masses(), b.masses());
    }

    #[test]
    fn densities_integrate_to_one() {
        for law in [
            TruncationLaw::Uniform { a: -2.0, b: 3.0 },
            TruncationLaw::Beta { p: 0.4, q: 0.7 },
            TruncationLaw::Beta { p: 3.0, q: 1.5 },
            TruncationLaw::BetaOne { p: 0.3 },
            TruncationLaw::BetaOne { p: 4.0 },
            // exponents small enough that u = s^m underflows over most of the range
            TruncationLaw::BetaOne { p: 1e-3 },
            TruncationLaw::Beta { p: 2e-3, q: 5e-3 },
            TruncationLaw::Beta { p: 50.0, q: 1e-3 },
            TruncationLaw::BetaOne { p: 1e-15 },
            TruncationLaw::Beta { p: 1e-12, q: 0.7 },
            TruncationLaw::BetaOne { p: 1e-100 },
            TruncationLaw::Beta { p: 1e-30, q: 1e-20 },
        ] {
            assert!((law.total_mass() - 1.0).abs() < 1e-6, "{law:?}: {}", law.total_mass());
        }
    }

    #[test]
    fn mle_beats_truth_usually() {
        let truth = TruncationLaw::BetaOne { p: 1.5 };
        let reps = 200;
        let mut wins = 0;
        for r in 0..reps {
            let s = interval_sample(truth, 0.25, 500, 1000 + r);
            let fit = fit_spmle(&s, Family::BetaOne, None, &SpmleOptions { restarts: 1, ..Default::default() }).unwrap();
            if fit.cond_loglik() >= conditional_loglik_sp(&s, &truth, &TAU) {
                wins += 1;
            }
        }
        assert!(wins as f64 >= 0.95 * reps as f64, "{wins}/{reps}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn beta_one_closed_form_matches_quadrature(p in 0.3f64..5.0, t in 0.01f64..1.0) {
                let law = TruncationLaw::BetaOne { p };
                let numeric = if t <= 0.5 {
                    integrate_from_zero(&law, p, t)
                } else {
                    integrate_from_zero(&law, p, 0.5) + adaptive_simpson(|u| law.density(u), 0.5, t, 1e-12)
                };
                prop_assert!((numeric - law.cdf(t)).abs() < 1e-8, "{} vs {}", numeric, law.cdf(t));
            }
        }

        fn integrate_from_zero(law: &TruncationLaw, p: f64, t: f64) -> f64 {
            let m = (2.0 / p).max(1.0);
            adaptive_simpson(|s| if s <= 0.0 { 0.0 } else { m * s.powf(m - 1.0) * law.density(s.powf(m)) }, 0.0, t.powf(1.0 / m), 1e-12)
        }
    }
}
