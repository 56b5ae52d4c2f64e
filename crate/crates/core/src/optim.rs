//! Box-constrained smooth minimization by projected gradient descent.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimOptions {
    pub max_iters: usize,
    /// Relative objective change regarded as stalled.
    pub rel_tol: f64,
    /// Projected-gradient infinity norm regarded as stationary.
    pub grad_tol: f64,
}

impl Default for OptimOptions {
    fn default() -> Self {
        OptimOptions {
            max_iters: 5000,
            rel_tol: 1e-9,
            grad_tol: 1e-7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimReport {
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
    pub projected_gradient: f64,
}

const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;
/// Projected-gradient level accepted once progress has stalled.
const STALL_GRAD_TOL: f64 = 1e-6;

fn project(x: &mut [f64], lower: &[f64]) {
    for (v, &lo) in x.iter_mut().zip(lower) {
        if *v < lo {
            *v = lo;
        }
    }
}

/// Infinity norm of `P(x - g) - x`, zero exactly at a KKT point.
pub fn projected_gradient_norm(x: &[f64], g: &[f64], lower: &[f64]) -> f64 {
    x.iter()
        .zip(g)
        .zip(lower)
        .map(|((&xi, &gi), &lo)| ((xi - gi).max(lo) - xi).abs())
        .fold(0.0, f64::max)
}

/// Minimizes `f` subject to `x >= lower` (use `-inf` for free coordinates).
/// Steps start from a Barzilai-Borwein estimate (1.0 on the first
/// iteration) and are halved until the Armijo condition holds.
pub fn minimize<F>(x0: Vec<f64>, lower: &[f64], opts: &OptimOptions, f: F) -> (Vec<f64>, OptimReport)
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let mut x = x0;
    project(&mut x, lower);
    let (mut fx, mut g) = f(&x);
    let mut step = 1.0;
    let mut iterations = 0;
    let mut converged = false;
    let mut pg = projected_gradient_norm(&x, &g, lower);
    while iterations < opts.max_iters {
        if pg <= opts.grad_tol {
            converged = true;
            break;
        }
        iterations += 1;
        let mut accepted = None;
        let mut t = step;
        for _ in 0..MAX_HALVINGS {
            let mut xn: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - t * gi).collect();
            project(&mut xn, lower);
            let decrease: f64 = g.iter().zip(&xn).zip(&x).map(|((gi, a), b)| gi * (a - b)).sum();
            let (fxn, gn) = f(&xn);
            if fxn <= fx + ARMIJO_C * decrease {
                accepted = Some((xn, fxn, gn));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fxn, gn)) = accepted else {
            // no descent left at machine precision
            converged = pg <= opts.grad_tol.max(STALL_GRAD_TOL);
            break;
        };
        let mut ss = 0.0;
        let mut sy = 0.0;
        for i in 0..x.len() {
            let s = xn[i] - x[i];
            ss += s * s;
            sy += s * (gn[i] - g[i]);
        }
        step = if sy > 0.0 { (ss / sy).clamp(1e-10, 1e10) } else { 1.0 };
        let rel = (fx - fxn).abs() / fx.abs().max(1.0);
        x = xn;
        fx = fxn;
        g = gn;
        pg = projected_gradient_norm(&x, &g, lower);
        if pg <= opts.grad_tol || (rel < opts.rel_tol && pg <= STALL_GRAD_TOL) {
            converged = true;
            break;
        }
    }
    (
        x,
        OptimReport {
            iterations,
            converged,
            objective: fx,
            projected_gradient: pg,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unconstrained_quadratic() {
        let f = |x: &[f64]| {
            let v = (x[0] - 3.0).powi(2) + 10.0 * (x[1] + 1.0).powi(2);
            (v, vec![2.0 * (x[0] - 3.0), 20.0 * (x[1] + 1.0)])
        };
        let (x, r) = minimize(vec![0.0, 0.0], &[f64::NEG_INFINITY; 2], &OptimOptions::default(), f);
        assert!(r.converged);
        assert!((x[0] - 3.0).abs() < 1e-6 && (x[1] + 1.0).abs() < 1e-6);
    }

    #[test]
    fn bound_is_active() {
        let f = |x: &[f64]| ((x[0] + 2.0).powi(2), vec![2.0 * (x[0] + 2.0)]);
        let (x, r) = minimize(vec![5.0], &[0.0], &OptimOptions::default(), f);
        assert!(r.converged);
        assert_eq!(x[0], 0.0);
    }
}
