//! Efron–Petrosian NPMLE for doubly truncated data.
//!
//! The conditional likelihood `L1(phi) = prod_j phi_j / Phi_j`, with
//! `Phi_j = sum_m phi_m J_jm` and `J_jm = I(u_j <= x_m <= v_j)`, is maximised
//! by the alternating self-consistency iteration
//!
//! ```text
//! psi_j <- (1/Phi_j) / sum_k (1/Phi_k)
//! G_i   <- sum_j psi_j J_ji
//! phi_i <- (1/G_i) / sum_k (1/G_k)
//! ```
//!
//! The sums over `J` are evaluated with prefix sums over the sorted lifetimes
//! (every window covers a contiguous run of them), so one sweep costs `O(n)`.

use serde::Serialize;

use crate::data::{Sample, WeightedDF};
use crate::error::{Error, Result};
use crate::fit::{lifetime_summary, CorrectedFit};
use crate::graph::{check_existence, ExistenceReport};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NpmleOptions {
    /// Stop when `max_i |phi_i(new) - phi_i(old)| < tol`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NpmleOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: 10_000 }
    }
}

#[derive(Debug, Clone)]
pub struct NpmleFit {
    sample: Sample,
    phi: Vec<f64>,
    psi: Vec<f64>,
    g: Vec<f64>,
    alpha: f64,
    loglik: f64,
    iterations: usize,
    converged: bool,
    last_step: f64,
    existence: ExistenceReport,
    df: WeightedDF,
    hazard_weights: Vec<f64>,
}

/// JSON fit summary.
#[derive(Debug, Clone, Serialize)]
pub struct NpmleSummary {
    pub alpha_n: f64,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    pub exists_unique: bool,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
}

/// Window structure shared by every sweep.
struct Windows {
    /// sorted position -> original index
    order: Vec<usize>,
    /// per original index, covered sorted positions `[lo, hi)`
    ranges: Vec<(usize, usize)>,
}

impl Windows {
    fn new(sample: &Sample) -> Self {
        let obs = sample.observations();
        let mut order: Vec<usize> = (0..obs.len()).collect();
        order.sort_by(|&a, &b| obs[a].x.total_cmp(&obs[b].x).then(a.cmp(&b)));
        let xs: Vec<f64> = order.iter().map(|&i| obs[i].x).collect();
        let ranges = obs
            .iter()
            .map(|o| (xs.partition_point(|&x| x < o.u), xs.partition_point(|&x| x <= o.v)))
            .collect();
        Self { order, ranges }
    }

    /// `Phi_j = sum_m phi_m J_jm` for every window `j`.
    fn coverage_mass(&self, phi: &[f64], prefix: &mut [f64], out: &mut [f64]) {
        prefix[0] = 0.0;
        for (p, &i) in self.order.iter().enumerate() {
            prefix[p + 1] = prefix[p] + phi[i];
        }
        for (j, &(lo, hi)) in self.ranges.iter().enumerate() {
            // rounding in the prefix difference must not drop below the own atom
            out[j] = (prefix[hi] - prefix[lo]).max(phi[j]);
        }
    }

    /// `G_i = sum_j psi_j J_ji` at every lifetime.
    fn biasing_at_lifetimes(&self, psi: &[f64], diff: &mut [f64], out: &mut [f64]) {
        diff.iter_mut().for_each(|d| *d = 0.0);
        for (j, &(lo, hi)) in self.ranges.iter().enumerate() {
            diff[lo] += psi[j];
            diff[hi] -= psi[j];
        }
        let mut acc = 0.0;
        for (p, &i) in self.order.iter().enumerate() {
            acc += diff[p];
            out[i] = acc.max(psi[i]);
        }
    }
}

fn normalized_reciprocals(values: &[f64], out: &mut [f64]) {
    let total: f64 = values.iter().map(|v| 1.0 / v).sum();
    for (o, v) in out.iter_mut().zip(values) {
        *o = (1.0 / v) / total;
    }
}

fn conditional_loglik(phi: &[f64], coverage: &[f64]) -> f64 {
    phi.iter().zip(coverage).map(|(p, c)| (p / c).ln()).sum()
}

/// Fits the NPMLE, failing with [`Error::NonConvergence`] when the iteration
/// budget runs out. A sample that fails the existence condition is still fitted
/// and flagged through [`NpmleFit::exists_unique`].
pub fn fit_npmle(sample: &Sample, options: NpmleOptions) -> Result<NpmleFit> {
    let fit = iterate(sample, None, options)?;
    if !fit.converged {
        return Err(Error::NonConvergence { iterations: fit.iterations, last_step: fit.last_step });
    }
    Ok(fit)
}

/// Like [`fit_npmle`] but starts from `init` (any positive vector) and
/// returns the last iterate even without convergence.
pub fn fit_npmle_warm(sample: &Sample, init: &[f64], options: NpmleOptions) -> Result<NpmleFit> {
    if init.len() != sample.len() || init.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
        return Err(Error::InvalidParameter("warm start must be positive with one entry per observation".into()));
    }
    iterate(sample, Some(init), options)
}

fn iterate(sample: &Sample, init: Option<&[f64]>, options: NpmleOptions) -> Result<NpmleFit> {
    if !(options.tol > 0.0) || options.max_iter == 0 {
        return Err(Error::InvalidParameter("NPMLE needs tol > 0 and max_iter >= 1".into()));
    }
    let n = sample.len();
    let existence = check_existence(sample);
    let windows = Windows::new(sample);

    let mut phi: Vec<f64> = match init {
        Some(init) => {
            let total: f64 = init.iter().sum();
            init.iter().map(|p| p / total).collect()
        }
        None => vec![1.0 / n as f64; n],
    };
    let mut coverage = vec![0.0; n];
    let mut psi = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut prefix = vec![0.0; n + 1];
    let mut diff = vec![0.0; n + 1];

    let mut iterations = 0;
    let mut last_step = f64::INFINITY;
    let mut converged = false;
    while iterations < options.max_iter {
        windows.coverage_mass(&phi, &mut prefix, &mut coverage);
        normalized_reciprocals(&coverage, &mut psi);
        windows.biasing_at_lifetimes(&psi, &mut diff, &mut g);
        normalized_reciprocals(&g, &mut next);
        iterations += 1;
        last_step = phi.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        std::mem::swap(&mut phi, &mut next);
        if last_step < options.tol {
            converged = true;
            break;
        }
    }

    windows.coverage_mass(&phi, &mut prefix, &mut coverage);
    let loglik = conditional_loglik(&phi, &coverage);
    let alpha = 1.0 / g.iter().map(|gi| 1.0 / (n as f64 * gi)).sum::<f64>();
    let (df, hazard_weights) = lifetime_summary(sample, &phi)?;

    Ok(NpmleFit {
        sample: sample.clone(),
        phi,
        psi,
        g,
        alpha,
        loglik,
        iterations,
        converged,
        last_step,
        existence,
        df,
        hazard_weights,
    })
}

impl NpmleFit {
    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn loglik(&self) -> f64 {
        self.loglik
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn exists_unique(&self) -> bool {
        self.existence.exists_unique
    }

    pub fn existence(&self) -> &ExistenceReport {
        &self.existence
    }

    /// `F_n(x) = sum_i phi_i I(x_i <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.df.cdf(x)
    }

    /// `F_n(x)` through its inverse-probability-weighted form
    /// `alpha_n n^-1 sum_i I(x_i <= x) / G_n(x_i)`.
    pub fn ipwe_cdf(&self, x: f64) -> Result<f64> {
        if let Some(i) = self.g.iter().position(|&g| !(g > 0.0)) {
            return Err(Error::DegenerateData(format!("G_n vanishes at observation {i}")));
        }
        let n = self.sample.len() as f64;
        let s: f64 = self
            .sample
            .observations()
            .iter()
            .zip(&self.g)
            .filter(|(o, _)| o.x <= x)
            .map(|(_, g)| 1.0 / g)
            .sum();
        Ok(self.alpha * s / n)
    }

    /// `T_n(u, v) = sum_i psi_i I(u_i <= u, v_i <= v)`.
    pub fn truncation_cdf(&self, u: f64, v: f64) -> f64 {
        self.sample
            .observations()
            .iter()
            .zip(&self.psi)
            .filter(|(o, _)| o.u <= u && o.v <= v)
            .map(|(_, p)| p)
            .sum()
    }

    pub fn summary(&self) -> NpmleSummary {
        NpmleSummary {
            alpha_n: self.alpha,
            loglik: self.loglik,
            iterations: self.iterations,
            converged: self.converged,
            exists_unique: self.existence.exists_unique,
            phi: self.phi.clone(),
            psi: self.psi.clone(),
        }
    }
}

impl CorrectedFit for NpmleFit {
    fn sample(&self) -> &Sample {
        &self.sample
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn masses(&self) -> &[f64] {
        &self.phi
    }

    fn g_at_lifetimes(&self) -> &[f64] {
        &self.g
    }

    fn lifetime_df(&self) -> &WeightedDF {
        &self.df
    }

    /// `G_n(t) = sum_j psi_j I(u_j <= t <= v_j)`; zero outside every window.
    fn biasing_g(&self, t: f64) -> f64 {
        self.sample
            .observations()
            .iter()
            .zip(&self.psi)
            .filter(|(o, _)| o.covers(t))
            .map(|(_, p)| p)
            .sum()
    }

    fn hazard_weights(&self) -> &[f64] {
        &self.hazard_weights
    }
}

/// See [`CorrectedFit::biasing_g`].
pub fn biasing_g_np(fit: &NpmleFit, t: f64) -> f64 {
    fit.biasing_g(t)
}

/// See [`NpmleFit::ipwe_cdf`].
pub fn ipwe_cdf(fit: &NpmleFit, x: f64) -> Result<f64> {
    fit.ipwe_cdf(x)
}

/// See [`NpmleFit::truncation_cdf`].
pub fn npmle_truncation_cdf(fit: &NpmleFit, u: f64, v: f64) -> f64 {
    fit.truncation_cdf(u, v)
}

#[cfg(test)]
pub(crate) mod oracle {
    //! Brute-force maximiser of `L1` on the simplex grid.

    use crate::data::Sample;

    pub fn loglik(sample: &Sample, phi: &[f64]) -> f64 {
        let obs = sample.observations();
        let mut ll = 0.0;
        for (j, oj) in obs.iter().enumerate() {
            let cover: f64 = obs.iter().zip(phi).filter(|(om, _)| oj.covers(om.x)).map(|(_, p)| p).sum();
            ll += phi[j].ln() - cover.ln();
        }
        ll
    }

    /// Exhaustive search over the 2-simplex grid with the given step count.
    pub fn grid_argmax_3(sample: &Sample, steps: usize) -> Vec<f64> {
        let mut best = (f64::NEG_INFINITY, vec![]);
        for a in 1..steps {
            for b in 1..(steps - a) {
                let c = steps - a - b;
                let phi = [a as f64 / steps as f64, b as f64 / steps as f64, c as f64 / steps as f64];
                let ll = loglik(sample, &phi);
                if ll > best.0 {
                    best = (ll, phi.to_vec());
                }
            }
        }
        best.1
    }
}
