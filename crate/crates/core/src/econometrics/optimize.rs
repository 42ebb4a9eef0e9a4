//! Damped-Newton maximizer with backtracking line search.
//!
//! Likelihoods here are smooth and (except for corners of the ZINB surface)
//! concave, so a Newton step with an Armijo backtracking search converges in
//! a handful of iterations. When the Hessian is not negative definite a
//! ridge is added until it is; if no ascent direction emerges the gradient
//! direction is tried before giving up.

use nalgebra::{Cholesky, DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct OptimOptions {
    pub max_iterations: usize,
    /// Convergence: gradient max-norm below this ...
    pub gradient_tolerance: f64,
    /// ... or relative objective change below this after an accepted step.
    pub value_tolerance: f64,
}

impl Default for OptimOptions {
    fn default() -> Self {
        OptimOptions {
            max_iterations: 200,
            gradient_tolerance: 1e-8,
            value_tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Maximum {
    pub theta: DVector<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

fn max_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Solves `(-H + tau I) d = g` for an ascent direction, escalating the
/// ridge until the factorization succeeds.
fn ascent_direction(hessian: &DMatrix<f64>, gradient: &DVector<f64>) -> Option<DVector<f64>> {
    let neg_h = -hessian;
    let scale = neg_h.diagonal().amax().max(1.0);
    let mut tau = 0.0;
    for _ in 0..40 {
        let mut m = neg_h.clone();
        if tau > 0.0 {
            for i in 0..m.nrows() {
                m[(i, i)] += tau;
            }
        }
        if let Some(chol) = Cholesky::new(m) {
            let d = chol.solve(gradient);
            if d.iter().all(|x| x.is_finite()) {
                return Some(d);
            }
        }
        tau = if tau == 0.0 { scale * 1e-10 } else { tau * 10.0 };
        if tau > scale * 1e12 {
            break;
        }
    }
    None
}

/// Maximizes `f` from `theta0` using analytic gradient and Hessian
/// callbacks. The objective may return `-inf` (or NaN, treated the same)
/// outside its domain; the line search backs off until a finite
/// improvement appears.
pub fn maximize(
    f: &dyn Fn(&DVector<f64>) -> f64,
    gradient: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    hessian: &dyn Fn(&DVector<f64>) -> DMatrix<f64>,
    theta0: DVector<f64>,
    options: &OptimOptions,
) -> Maximum {
    let sanitize = |v: f64| if v.is_nan() { f64::NEG_INFINITY } else { v };
    let mut theta = theta0;
    let mut value = sanitize(f(&theta));
    let mut iterations = 0;
    let mut converged = false;
    let mut gradient_norm = f64::INFINITY;

    while iterations < options.max_iterations {
        iterations += 1;
        let g = gradient(&theta);
        gradient_norm = max_norm(&g);
        if gradient_norm < options.gradient_tolerance {
            converged = true;
            break;
        }
        let h = hessian(&theta);
        let newton = ascent_direction(&h, &g);
        let direction = match newton {
            Some(d) if d.dot(&g) > 0.0 => d,
            _ => g.clone(),
        };
        let slope = direction.dot(&g);

        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACKS {
            let candidate = &theta + &direction * step;
            let cv = sanitize(f(&candidate));
            if cv.is_finite() && cv >= value + ARMIJO_C1 * step * slope {
                let improvement = cv - value;
                theta = candidate;
                let relative = improvement.abs() / (1.0 + value.abs());
                value = cv;
                accepted = true;
                if relative < options.value_tolerance {
                    converged = true;
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // No step improves the objective: numerically at a maximum.
            converged = true;
            break;
        }
        if converged {
            // Recompute the gradient norm at the final point for reporting.
            gradient_norm = max_norm(&gradient(&theta));
            break;
        }
    }
    if !converged {
        gradient_norm = max_norm(&gradient(&theta));
        if gradient_norm < options.gradient_tolerance {
            converged = true;
        }
    }
    Maximum {
        theta,
        value,
        gradient_norm,
        iterations,
        converged,
    }
}

/// Central-difference Hessian built from an analytic gradient.
pub fn hessian_from_gradient(
    gradient: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    theta: &DVector<f64>,
) -> DMatrix<f64> {
    let k = theta.len();
    let mut h = DMatrix::zeros(k, k);
    for j in 0..k {
        let step = 1e-5 * theta[j].abs().max(1.0);
        let mut hi = theta.clone();
        hi[j] += step;
        let mut lo = theta.clone();
        lo[j] -= step;
        let diff = (gradient(&hi) - gradient(&lo)) / (2.0 * step);
        for i in 0..k {
            h[(i, j)] = diff[i];
        }
    }
    // Symmetrize to remove finite-difference noise.
    let ht = h.transpose();
    (h + ht) * 0.5
}

/// Central-difference gradient of a scalar function (test oracle).
pub fn gradient_from_value(
    f: &dyn Fn(&DVector<f64>) -> f64,
    theta: &DVector<f64>,
) -> DVector<f64> {
    let k = theta.len();
    let mut g = DVector::zeros(k);
    for j in 0..k {
        let step = 1e-6 * theta[j].abs().max(1.0);
        let mut hi = theta.clone();
        hi[j] += step;
        let mut lo = theta.clone();
        lo[j] -= step;
        g[j] = (f(&hi) - f(&lo)) / (2.0 * step);
    }
    g
}
