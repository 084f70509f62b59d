use crate::data::{Sample, WeightedDF};
use crate::error::Result;

/// Common view of a truncation-corrected fit (nonparametric or semiparametric).
///
/// Both fits put mass `alpha / (n G(x_i))` on every observed lifetime; they
/// only differ in how `G` is estimated.
pub trait CorrectedFit {
    fn sample(&self) -> &Sample;

    /// Estimated probability that a random individual is observable.
    fn alpha(&self) -> f64;

    /// Mass of observation `i` under the corrected lifetime distribution.
    fn masses(&self) -> &[f64];

    /// Estimated biasing function at the observed lifetimes.
    fn g_at_lifetimes(&self) -> &[f64];

    /// Corrected lifetime distribution with ties merged.
    fn lifetime_df(&self) -> &WeightedDF;

    /// Estimated biasing function `G(t) = P(U* <= t <= V*)`.
    fn biasing_g(&self, t: f64) -> f64;

    /// `mass_i / (1 - F(x_i-))`, the hazard increments at the observations.
    fn hazard_weights(&self) -> &[f64];
}

/// Builds the corrected distribution and its hazard increments.
pub(crate) fn lifetime_summary(sample: &Sample, masses: &[f64]) -> Result<(WeightedDF, Vec<f64>)> {
    let xs = sample.lifetimes();
    let df = WeightedDF::new(&xs, masses)?;
    let weights = hazard_increments(&df, &xs, masses);
    Ok((df, weights))
}

pub(crate) fn hazard_increments(df: &WeightedDF, xs: &[f64], masses: &[f64]) -> Vec<f64> {
    xs.iter().zip(masses).map(|(&x, &m)| m / df.survival_left(x)).collect()
}

/// Which correction to apply to a sample.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Correction {
    Nonparametric,
    Semiparametric {
        family: crate::parametric::Family,
        design: Option<crate::parametric::WindowDesign>,
    },
}
