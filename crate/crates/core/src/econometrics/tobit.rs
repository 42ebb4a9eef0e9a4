//! Left-censored (Tobit type I) regression by maximum likelihood.
//!
//! The likelihood is maximized in the precision parametrization
//! `(gamma, h) = (beta / sigma, 1 / sigma)`, under which it is globally
//! concave, with analytic gradient and Hessian; estimates and the
//! covariance are mapped back to `(beta, sigma)` by the delta method.

use nalgebra::{Cholesky, DMatrix, DVector};

use super::ols::{clamp_lr, ols_solve, pseudo_r2};
use super::optimize::{maximize, Maximum, OptimOptions};
use super::special::{
    chi_squared_sf, inverse_mills, ln_normal_cdf, ln_normal_pdf, two_sided_normal_p,
};
use super::standardize::{canonical_order, check_rank, permute_rows, ColumnScaler};
use super::{validate_design, Coefficient, EconError, ModelFit, ModelKind};

/// Tobit log-likelihood in the `(gamma, h)` parametrization.
///
/// Parameter layout: `theta = [gamma_1 .. gamma_k, h]` with `h > 0`.
/// For uncensored rows the contribution is `ln h + ln phi(h*y - x*gamma)`;
/// for rows censored at the limit `L` it is `ln Phi(h*L - x*gamma)`.
pub struct TobitLikelihood<'a> {
    y: &'a DVector<f64>,
    x: &'a DMatrix<f64>,
    limit: f64,
    censored: Vec<bool>,
}

impl<'a> TobitLikelihood<'a> {
    /// Requires `y[i] >= limit` for all rows; rows with `y[i] == limit`
    /// are treated as censored.
    pub fn new(y: &'a DVector<f64>, x: &'a DMatrix<f64>, limit: f64) -> Self {
        let censored = y.iter().map(|&v| v <= limit).collect();
        TobitLikelihood {
            y,
            x,
            limit,
            censored,
        }
    }

    pub fn dim(&self) -> usize {
        self.x.ncols() + 1
    }

    pub fn censored_count(&self) -> usize {
        self.censored.iter().filter(|&&c| c).count()
    }

    fn split(&self, theta: &DVector<f64>) -> (DVector<f64>, f64) {
        let k = self.x.ncols();
        let gamma = DVector::from_fn(k, |j, _| theta[j]);
        (gamma, theta[k])
    }

    pub fn value(&self, theta: &DVector<f64>) -> f64 {
        let (gamma, h) = self.split(theta);
        if h <= 0.0 || !h.is_finite() {
            return f64::NEG_INFINITY;
        }
        let xg = self.x * &gamma;
        let ln_h = h.ln();
        let mut ll = 0.0;
        for i in 0..self.y.len() {
            if self.censored[i] {
                ll += ln_normal_cdf(h * self.limit - xg[i]);
            } else {
                ll += ln_h + ln_normal_pdf(h * self.y[i] - xg[i]);
            }
        }
        ll
    }

    pub fn gradient(&self, theta: &DVector<f64>) -> DVector<f64> {
        let (gamma, h) = self.split(theta);
        let k = self.x.ncols();
        let xg = self.x * &gamma;
        // Weight vector w with d ll / d gamma = X' w.
        let mut w = DVector::zeros(self.y.len());
        let mut dh = 0.0;
        for i in 0..self.y.len() {
            if self.censored[i] {
                let lambda = inverse_mills(h * self.limit - xg[i]);
                w[i] = -lambda;
                dh += lambda * self.limit;
            } else {
                let e = h * self.y[i] - xg[i];
                w[i] = e;
                dh += 1.0 / h - e * self.y[i];
            }
        }
        let dg = self.x.transpose() * w;
        let mut g = DVector::zeros(k + 1);
        for j in 0..k {
            g[j] = dg[j];
        }
        g[k] = dh;
        g
    }

    pub fn hessian(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let (gamma, h) = self.split(theta);
        let k = self.x.ncols();
        let n = self.y.len();
        let xg = self.x * &gamma;
        // Row weights: gamma-gamma block is -X' diag(c) X, the gamma-h
        // column X' v, and the h-h scalar accumulates separately.
        let mut c = DVector::zeros(n);
        let mut v = DVector::zeros(n);
        let mut hh = 0.0;
        for i in 0..n {
            if self.censored[i] {
                let z = h * self.limit - xg[i];
                let lambda = inverse_mills(z);
                let delta = lambda * (z + lambda);
                c[i] = delta;
                v[i] = self.limit * delta;
                hh -= self.limit * self.limit * delta;
            } else {
                c[i] = 1.0;
                v[i] = self.y[i];
                hh -= 1.0 / (h * h) + self.y[i] * self.y[i];
            }
        }
        let mut scaled = self.x.clone();
        for i in 0..n {
            for j in 0..k {
                scaled[(i, j)] *= c[i];
            }
        }
        let gg = -(self.x.transpose() * scaled);
        let gh = self.x.transpose() * v;
        let mut hess = DMatrix::zeros(k + 1, k + 1);
        hess.view_mut((0, 0), (k, k)).copy_from(&gg);
        for j in 0..k {
            hess[(j, k)] = gh[j];
            hess[(k, j)] = gh[j];
        }
        hess[(k, k)] = hh;
        hess
    }
}

/// Log-likelihood of a Tobit model at a raw-scale parameter vector
/// `[beta_1 .. beta_k, sigma]`.
pub fn tobit_loglik(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    limit: f64,
    beta: &[f64],
    sigma: f64,
) -> f64 {
    let k = x.ncols();
    assert_eq!(beta.len(), k, "coefficient count must match columns");
    let mut theta = DVector::zeros(k + 1);
    for j in 0..k {
        theta[j] = beta[j] / sigma;
    }
    theta[k] = 1.0 / sigma;
    TobitLikelihood::new(y, x, limit).value(&theta)
}

struct TobitInternal {
    maximum: Maximum,
    beta: DVector<f64>,
    sigma: f64,
    covariance: DMatrix<f64>,
}

fn fit_tobit_core(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    names: &[String],
    limit: f64,
) -> Result<TobitInternal, EconError> {
    let scaler = ColumnScaler::fit(x, names)?;
    let xs = scaler.transform(x);
    check_rank(&xs, names)?;
    let k = xs.ncols();

    // Start from least squares on all rows.
    let (beta0, rss) = ols_solve(y, &xs)?;
    let sigma0 = (rss / y.len() as f64).sqrt().max(1e-3);
    let mut theta0 = DVector::zeros(k + 1);
    for j in 0..k {
        theta0[j] = beta0[j] / sigma0;
    }
    theta0[k] = 1.0 / sigma0;

    let lik = TobitLikelihood::new(y, &xs, limit);
    let maximum = maximize(
        &|t| lik.value(t),
        &|t| lik.gradient(t),
        &|t| lik.hessian(t),
        theta0,
        &OptimOptions::default(),
    );
    if !maximum.converged {
        return Err(EconError::NonConvergence {
            iterations: maximum.iterations,
            gradient_norm: maximum.gradient_norm,
        });
    }

    // Covariance of (gamma, h) from the observed information.
    let info = -lik.hessian(&maximum.theta);
    let cov_olsen = Cholesky::new(info)
        .ok_or(EconError::DegenerateSample {
            reason: "observed information is not positive definite".to_string(),
        })?
        .inverse();

    // Delta method to (beta_std, sigma) ...
    let h = maximum.theta[k];
    let mut jac = DMatrix::zeros(k + 1, k + 1);
    for j in 0..k {
        jac[(j, j)] = 1.0 / h;
        jac[(j, k)] = -maximum.theta[j] / (h * h);
    }
    jac[(k, k)] = -1.0 / (h * h);
    let cov_std = &jac * cov_olsen * jac.transpose();

    // ... then the affine map back to raw regressor scale.
    let a = scaler.jacobian();
    let mut full = DMatrix::zeros(k + 1, k + 1);
    full.view_mut((0, 0), (k, k)).copy_from(&a);
    full[(k, k)] = 1.0;
    let covariance = &full * cov_std * full.transpose();

    let beta_std = DVector::from_fn(k, |j, _| maximum.theta[j] / h);
    let beta = &a * beta_std;
    Ok(TobitInternal {
        maximum,
        beta,
        sigma: 1.0 / h,
        covariance,
    })
}

/// Fits a Tobit model with left-censoring at `limit`.
///
/// Requires `y >= limit` with at least one uncensored row. With no
/// censored rows the estimates coincide with least squares (and `sigma`
/// with the MLE residual standard deviation). Row order does not affect
/// the result.
pub fn fit_tobit(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    names: &[String],
    limit: f64,
) -> Result<ModelFit, EconError> {
    validate_design(y, x, names)?;
    let n = x.nrows();
    let k = x.ncols();
    if n < k + 2 {
        return Err(EconError::InvalidInput {
            reason: format!("{n} observations cannot identify {k} coefficients plus sigma"),
        });
    }
    if let Some(i) = y.iter().position(|&v| v < limit) {
        return Err(EconError::InvalidInput {
            reason: format!("y[{i}] = {} lies below the censoring limit {limit}", y[i]),
        });
    }
    let n_censored = y.iter().filter(|&&v| v <= limit).count();
    if n_censored == n {
        return Err(EconError::AllCensored);
    }

    let order = canonical_order(y, x);
    let (y, x) = permute_rows(y, x, &order);
    let fitted = fit_tobit_core(&y, &x, names, limit)?;

    // Null model: intercept (and sigma) only.
    let ones = DMatrix::from_element(n, 1, 1.0);
    let null_names = vec!["const".to_string()];
    let null = fit_tobit_core(&y, &ones, &null_names, limit)?;

    let loglik = fitted.maximum.value;
    let loglik_null = null.maximum.value;
    let has_const = ColumnScaler::fit(&x, names)?.constant.is_some();
    let lr_df = k.saturating_sub(usize::from(has_const));
    let lr_chi2 = clamp_lr(2.0 * (loglik - loglik_null));

    let coefficients = (0..k)
        .map(|j| {
            let estimate = fitted.beta[j];
            let std_err = fitted.covariance[(j, j)].max(0.0).sqrt();
            let z = estimate / std_err;
            Coefficient {
                name: names[j].clone(),
                estimate,
                std_err,
                z,
                p: two_sided_normal_p(z),
            }
        })
        .collect();

    let mut params: Vec<f64> = fitted.beta.iter().copied().collect();
    params.push(fitted.sigma);
    Ok(ModelFit {
        kind: ModelKind::Tobit,
        coefficients,
        inflate: Vec::new(),
        sigma: Some(fitted.sigma),
        sigma_se: Some(fitted.covariance[(k, k)].max(0.0).sqrt()),
        ln_alpha: None,
        ln_alpha_se: None,
        loglik,
        loglik_null,
        lr_chi2,
        lr_df,
        lr_p: chi_squared_sf(lr_chi2, lr_df.max(1)),
        pseudo_r2: pseudo_r2(loglik, loglik_null),
        n,
        n_censored: Some(n_censored),
        n_uncensored: Some(n - n_censored),
        n_zero: None,
        left_limit: Some(limit),
        converged: true,
        iterations: fitted.maximum.iterations,
        gradient_norm: fitted.maximum.gradient_norm,
        params,
    })
}
