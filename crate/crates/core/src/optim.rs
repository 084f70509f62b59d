//! Derivative-free simplex search.

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    pub max_iter: usize,
    /// Converged when every vertex is within this sup-norm distance of the best.
    pub diameter_tol: f64,
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { max_iter: 2000, diameter_tol: 1e-7, initial_step: 0.5 }
    }
}

#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Maximises `f` from `x0`. Non-finite values (including `-inf`) count as
/// infeasible and are never preferred over a finite value.
pub fn maximize<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], opts: NelderMeadOptions) -> NelderMeadResult {
    let dim = x0.len();
    let mut evaluations = 0;
    // minimise the negated objective; infeasible points get +inf
    let mut cost = |x: &[f64]| {
        evaluations += 1;
        let v = f(x);
        if v.is_finite() {
            -v
        } else {
            f64::INFINITY
        }
    };

    if dim == 0 {
        let c = cost(x0);
        return NelderMeadResult { x: Vec::new(), value: -c, iterations: 0, evaluations: 1, converged: true };
    }

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((x0.to_vec(), cost(x0)));
    for k in 0..dim {
        let mut x = x0.to_vec();
        x[k] += opts.initial_step;
        let c = cost(&x);
        simplex.push((x, c));
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let diameter = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if diameter < opts.diameter_tol {
            converged = true;
            break;
        }
        iterations += 1;

        let worst = simplex[dim].clone();
        let centroid: Vec<f64> = (0..dim)
            .map(|k| simplex[..dim].iter().map(|(x, _)| x[k]).sum::<f64>() / dim as f64)
            .collect();
        let toward = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&worst.0).map(|(c, w)| c + t * (c - w)).collect()
        };

        let xr = toward(1.0);
        let cr = cost(&xr);
        if cr < simplex[0].1 {
            let xe = toward(2.0);
            let ce = cost(&xe);
            simplex[dim] = if ce < cr { (xe, ce) } else { (xr, cr) };
            continue;
        }
        if cr < simplex[dim - 1].1 {
            simplex[dim] = (xr, cr);
            continue;
        }
        let (xc, cc) = if cr < worst.1 {
            let x = toward(0.5);
            let c = cost(&x);
            (x, c)
        } else {
            let x = toward(-0.5);
            let c = cost(&x);
            (x, c)
        };
        if cc < worst.1.min(cr) || (cc.is_finite() && !worst.1.is_finite()) {
            simplex[dim] = (xc, cc);
            continue;
        }
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x: Vec<f64> = best.iter().zip(&vertex.0).map(|(b, v)| b + 0.5 * (v - b)).collect();
            let c = cost(&x);
            *vertex = (x, c);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, c) = simplex.swap_remove(0);
    NelderMeadResult { x, value: -c, iterations, evaluations, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_quadratic_peak() {
        let r = maximize(|x| -(x[0] - 1.0).powi(2) - 3.0 * (x[1] + 2.0).powi(2), &[0.0, 0.0], Default::default());
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] + 2.0).abs() < 1e-6, "{:?}", r.x);
    }

    #[test]
    fn one_dimensional_with_infeasible_region() {
        let r = maximize(|x| if x[0] <= 0.0 { f64::NEG_INFINITY } else { x[0].ln() - x[0] }, &[3.0], Default::default());
        assert!((r.x[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn rosenbrock() {
        let r = maximize(
            |x| -(100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2)),
            &[-1.2, 1.0],
            NelderMeadOptions { max_iter: 5000, ..Default::default() },
        );
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] - 1.0).abs() < 1e-4, "{:?}", r.x);
    }

    #[test]
    fn never_worse_than_start() {
        let f = |x: &[f64]| (x[0] * 3.0).sin() + (x[1] * 2.0).cos();
        let r = maximize(f, &[0.3, -0.4], Default::default());
        assert!(r.value >= f(&[0.3, -0.4]));
    }
}
