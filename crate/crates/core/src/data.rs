//! Observations, samples and discrete distributions.
//!
//! A [`Sample`] is an ordered list of triplets `(u, x, v)` with
//! `u <= x <= v`. When every window has the same width the sample is
//! flagged as interval sampling and remembers that width.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One observed triplet: left truncation time, lifetime, right truncation time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub u: f64,
    pub x: f64,
    pub v: f64,
}

impl Observation {
    pub fn new(u: f64, x: f64, v: f64) -> Self {
        Self { u, x, v }
    }

    /// True when `u <= t <= v`.
    #[inline]
    pub fn covers(&self, t: f64) -> bool {
        self.u <= t && t <= self.v
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.v - self.u
    }

    fn check(&self, index: usize) -> Result<()> {
        if !(self.u.is_finite() && self.x.is_finite() && self.v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        if !(self.u <= self.x && self.x <= self.v) {
            return Err(Error::Observability { index, u: self.u, x: self.x, v: self.v });
        }
        Ok(())
    }
}

impl From<(f64, f64, f64)> for Observation {
    fn from((u, x, v): (f64, f64, f64)) -> Self {
        Self { u, x, v }
    }
}

/// A validated, non-empty sample of doubly truncated observations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    observations: Vec<Observation>,
    tau: Option<f64>,
}

impl Sample {
    /// Validates every triplet and detects a constant window width.
    pub fn new(observations: Vec<Observation>) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::EmptySample);
        }
        for (i, o) in observations.iter().enumerate() {
            o.check(i)?;
        }
        let tau = detect_interval_width(&observations);
        Ok(Self { observations, tau })
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn get(&self, i: usize) -> Observation {
        self.observations[i]
    }

    /// Common window width `v - u` when the sample comes from interval sampling.
    pub fn tau(&self) -> Option<f64> {
        self.tau
    }

    pub fn is_interval_sampling(&self) -> bool {
        self.tau.is_some()
    }

    pub fn lifetimes(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.x).collect()
    }

    pub fn left_truncation(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.u).collect()
    }

    /// Sub-sample keeping the given indices in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Self::new(indices.iter().map(|&i| self.observations[i]).collect())
    }

    /// The sample without observation `i`.
    pub fn without(&self, i: usize) -> Result<Self> {
        let obs = self
            .observations
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, o)| *o)
            .collect();
        Self::new(obs)
    }

    /// Applies `t -> (t + a) / b` to all three coordinates.
    pub fn affine_rescale(&self, a: f64, b: f64) -> Result<Self> {
        if !(b > 0.0 && b.is_finite() && a.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "affine rescale needs finite a and b > 0 (got a={a}, b={b})"
            )));
        }
        let map = |t: f64| (t + a) / b;
        let obs = self
            .observations
            .iter()
            .map(|o| Observation::new(map(o.u), map(o.x), map(o.v)))
            .collect();
        Self::new(obs)
    }
}

/// Validates raw `(u, x, v)` triplets.
pub fn validate_sample(raw: &[(f64, f64, f64)]) -> Result<Sample> {
    Sample::new(raw.iter().copied().map(Observation::from).collect())
}

/// See [`Sample::affine_rescale`].
pub fn affine_rescale(sample: &Sample, a: f64, b: f64) -> Result<Sample> {
    sample.affine_rescale(a, b)
}

fn detect_interval_width(obs: &[Observation]) -> Option<f64> {
    let mut widths: Vec<f64> = obs.iter().map(Observation::width).collect();
    widths.sort_by(f64::total_cmp);
    let m = widths.len();
    let median = if m % 2 == 1 {
        widths[m / 2]
    } else {
        0.5 * (widths[m / 2 - 1] + widths[m / 2])
    };
    if median <= 0.0 {
        return None;
    }
    let tol = 1e-9 * median.max(1.0);
    let spread = (widths[0] - median).abs().max((widths[m - 1] - median).abs());
    (spread < tol).then_some(median)
}

/// Reads a `u,x,v` CSV. Lines starting with `#` are ignored.
pub fn read_csv<R: Read>(reader: R) -> Result<Sample> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Csv { line: 1, message: e.to_string() })?
        .clone();
    let cols: Vec<&str> = headers.iter().collect();
    if cols != ["u", "x", "v"] {
        return Err(Error::Csv {
            line: headers.position().map_or(1, |p| p.line()),
            message: format!("expected header \"u,x,v\", found \"{}\"", cols.join(",")),
        });
    }
    let mut obs = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Csv {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 3 {
            return Err(Error::Csv { line, message: format!("expected 3 fields, found {}", rec.len()) });
        }
        let mut vals = [0.0; 3];
        for (slot, field) in vals.iter_mut().zip(rec.iter()) {
            *slot = field.parse::<f64>().map_err(|_| Error::Csv {
                line,
                message: format!("cannot parse \"{field}\" as a number"),
            })?;
        }
        let o = Observation::new(vals[0], vals[1], vals[2]);
        o.check(obs.len()).map_err(|e| Error::Csv { line, message: e.to_string() })?;
        obs.push(o);
    }
    Sample::new(obs)
}

/// A discrete distribution on strictly increasing support points.
///
/// Tied points are merged on construction. Masses must sum to one within
/// `1e-10`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightedDF {
    points: Vec<f64>,
    masses: Vec<f64>,
    // cumulative[k] = sum of masses[..=k]
    cumulative: Vec<f64>,
    // tail[k] = sum of masses[k..]
    tail: Vec<f64>,
}

impl WeightedDF {
    pub fn new(points: &[f64], masses: &[f64]) -> Result<Self> {
        if points.len() != masses.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} points but {} masses",
                points.len(),
                masses.len()
            )));
        }
        if points.is_empty() {
            return Err(Error::InvalidDistribution("no support points".into()));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidDistribution("non-finite support point".into()));
        }
        if masses.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::InvalidDistribution("masses must be finite and non-negative".into()));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidDistribution(format!("masses sum to {total}, not 1")));
        }

        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&a, &b| points[a].total_cmp(&points[b]));
        let mut merged_p: Vec<f64> = Vec::with_capacity(points.len());
        let mut merged_m: Vec<f64> = Vec::with_capacity(points.len());
        for i in order {
            match merged_p.last() {
                Some(&last) if last == points[i] => *merged_m.last_mut().unwrap() += masses[i],
                _ => {
                    merged_p.push(points[i]);
                    merged_m.push(masses[i]);
                }
            }
        }

        let mut cumulative = Vec::with_capacity(merged_m.len());
        let mut acc = 0.0;
        for m in &merged_m {
            acc += m;
            cumulative.push(acc);
        }
        let mut tail = vec![0.0; merged_m.len()];
        let mut acc = 0.0;
        for k in (0..merged_m.len()).rev() {
            acc += merged_m[k];
            tail[k] = acc;
        }
        Ok(Self { points: merged_p, masses: merged_m, cumulative, tail })
    }

    /// Equal mass on every point (the ordinary empirical distribution).
    pub fn empirical(points: &[f64]) -> Result<Self> {
        let m = 1.0 / points.len() as f64;
        let masses = vec![m; points.len()];
        // n * (1/n) can miss 1 by a few ulps; that is well inside the tolerance.
        Self::new(points, &masses)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// `F(t)` or, with `left_limit`, `F(t-)`.
    pub fn cdf_eval(&self, t: f64, left_limit: bool) -> f64 {
        let k = if left_limit {
            self.points.partition_point(|&p| p < t)
        } else {
            self.points.partition_point(|&p| p <= t)
        };
        if k == 0 {
            0.0
        } else if k == self.points.len() {
            1.0
        } else {
            self.cumulative[k - 1].min(1.0)
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        self.cdf_eval(t, false)
    }

    pub fn cdf_left(&self, t: f64) -> f64 {
        self.cdf_eval(t, true)
    }

    /// `1 - F(t-)`, the mass at or above `t`, summed from the upper tail so
    /// that it stays positive at the largest support point.
    pub fn survival_left(&self, t: f64) -> f64 {
        let k = self.points.partition_point(|&p| p < t);
        if k == self.points.len() {
            0.0
        } else {
            self.tail[k]
        }
    }

    /// Smallest support point with `F(p) >= q`.
    pub fn quantile(&self, q: f64) -> f64 {
        let q = q.clamp(0.0, 1.0);
        let k = self.cumulative.partition_point(|&c| c < q - 1e-12);
        self.points[k.min(self.points.len() - 1)]
    }
}

/// See [`WeightedDF::cdf_eval`].
pub fn cdf_eval(df: &WeightedDF, t: f64, left_limit: bool) -> f64 {
    df.cdf_eval(t, left_limit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_triplet_is_interval_sampling() {
        let s = validate_sample(&[(0.0, 0.5, 1.0)]).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.tau(), Some(1.0));
    }

    #[test]
    fn reports_first_violation() {
        let err = validate_sample(&[(0.2, 0.1, 0.9)]).unwrap_err();
        assert!(matches!(err, Error::Observability { index: 0, .. }), "{err}");
        let err = validate_sample(&[(0.0, 0.5, 1.0), (0.0, 2.0, 1.0)]).unwrap_err();
        assert!(matches!(err, Error::Observability { index: 1, .. }));
    }

    #[test]
    fn rejects_non_finite_and_empty() {
        assert!(matches!(validate_sample(&[(0.0, f64::NAN, 1.0)]), Err(Error::NonFinite { index: 0 })));
        assert!(matches!(validate_sample(&[]), Err(Error::EmptySample)));
    }

    #[test]
    fn detects_constant_width() {
        let s = validate_sample(&[(0.0, 0.1, 0.25), (0.3, 0.4, 0.55), (0.5, 0.6, 0.75)]).unwrap();
        assert!(s.is_interval_sampling());
        assert!((s.tau().unwrap() - 0.25).abs() < 1e-12);
        let s = validate_sample(&[(0.0, 0.1, 0.25), (0.3, 0.4, 0.56)]).unwrap();
        assert_eq!(s.tau(), None);
    }

    #[test]
    fn step_cdf_examples() {
        let df = WeightedDF::new(&[1.0, 2.0], &[0.4, 0.6]).unwrap();
        assert_eq!(df.cdf_eval(1.5, false), 0.4);
        assert_eq!(df.cdf_eval(2.0, true), 0.4);
        assert_eq!(df.cdf_eval(3.0, false), 1.0);
        assert_eq!(df.cdf_eval(0.5, false), 0.0);
        assert_eq!(df.survival_left(2.0), 0.6);
    }

    #[test]
    fn merges_ties() {
        let df = WeightedDF::new(&[2.0, 1.0, 2.0], &[0.25, 0.5, 0.25]).unwrap();
        assert_eq!(df.points(), &[1.0, 2.0]);
        assert_eq!(df.masses(), &[0.5, 0.5]);
        assert!(WeightedDF::new(&[1.0, 2.0], &[0.3, 0.3]).is_err());
    }

    #[test]
    fn rescale_examples() {
        let s = validate_sample(&[(0.0, 0.5, 1.0), (0.2, 0.3, 1.2)]).unwrap();
        assert_eq!(s.affine_rescale(0.0, 1.0).unwrap(), s);
        assert!(s.affine_rescale(1.0, 0.0).is_err());
        assert!(s.affine_rescale(1.0, -2.0).is_err());

        let months = validate_sample(&[(-42.0, 10.0, 12.0), (45.0, 50.0, 99.0)]).unwrap();
        let months = months.affine_rescale(0.0, 1.0).unwrap();
        assert!((months.tau().unwrap() - 54.0).abs() < 1e-12);
        let t = months.affine_rescale(49.0, 95.0).unwrap();
        assert!((t.tau().unwrap() - 54.0 / 95.0).abs() < 1e-12);
        assert!((54.0f64 / 95.0 - 0.5684).abs() < 1e-4);
        assert!(t.observations().iter().all(|o| o.u > 0.0 && o.u < 1.0));
    }

    #[test]
    fn csv_round_trip_and_line_numbers() {
        let s = read_csv("# comment\nu,x,v\n0,0.5,1\n0.1, 0.2 ,0.3\n".as_bytes()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.get(1), Observation::new(0.1, 0.2, 0.3));

        let err = read_csv("u,x,v\n0,0.5,1\n0.5,0.1,1\n".as_bytes()).unwrap_err();
        match err {
            Error::Csv { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("observability"), "{message}");
            }
            other => panic!("unexpected {other}"),
        }
        assert!(read_csv("a,b,c\n1,2,3\n".as_bytes()).is_err());
        assert!(matches!(read_csv("u,x,v\n1,x,3\n".as_bytes()), Err(Error::Csv { line: 2, .. })));
    }

    fn arb_df() -> impl Strategy<Value = WeightedDF> {
        prop::collection::vec((-10.0f64..10.0, 0.01f64..1.0), 1..20).prop_map(|pairs| {
            let total: f64 = pairs.iter().map(|p| p.1).sum();
            let pts: Vec<f64> = pairs.iter().map(|p| (p.0 * 4.0).round() / 4.0).collect();
            let ms: Vec<f64> = pairs.iter().map(|p| p.1 / total).collect();
            WeightedDF::new(&pts, &ms).unwrap()
        })
    }

    fn arb_triplets() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
        prop::collection::vec((-5.0f64..5.0, 0.0f64..1.0, 0.0f64..3.0), 1..15).prop_map(|v| {
            v.into_iter().map(|(u, frac, w)| (u, u + frac * w, u + w)).collect()
        })
    }

    proptest! {
        #[test]
        fn cdf_monotone_and_right_continuous(df in arb_df(), a in -12.0f64..12.0, b in -12.0f64..12.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(df.cdf(lo) <= df.cdf(hi));
            prop_assert!(df.cdf_left(lo) <= df.cdf(lo));
            prop_assert!((df.cdf(lo + 1e-9) - df.cdf(lo)).abs() < 1e-12 || df.points().iter().any(|&p| p > lo && p <= lo + 1e-9));
        }

        #[test]
        fn atom_jumps_sum_to_one(df in arb_df()) {
            let total: f64 = df.points().iter().map(|&p| df.cdf(p) - df.cdf_left(p)).sum();
            prop_assert!((total - 1.0).abs() < 1e-10);
        }

        #[test]
        fn rescale_commutes_with_validation(raw in arb_triplets(), a in -3.0f64..3.0, b in 0.1f64..10.0) {
            let s = validate_sample(&raw).unwrap();
            let mapped: Vec<(f64, f64, f64)> =
                raw.iter().map(|&(u, x, v)| ((u + a) / b, (x + a) / b, (v + a) / b)).collect();
            prop_assert_eq!(s.affine_rescale(a, b).unwrap(), validate_sample(&mapped).unwrap());
        }
    }
}
