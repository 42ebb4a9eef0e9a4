//! Negative binomial (NB2) and zero-inflated negative binomial models.
//!
//! Both likelihoods carry analytic gradients; Hessians come from central
//! differences of the gradient. The dispersion parameter is optimized on
//! the log scale. Gamma-function differences switch to exact sums when the
//! dispersion gets large (the Poisson limit), where `lgamma(y + r) -
//! lgamma(r)` would cancel catastrophically.

use nalgebra::{Cholesky, DMatrix, DVector};
use statrs::function::gamma::{digamma, ln_gamma};

use super::ols::{clamp_lr, ols_solve, pseudo_r2};
use super::optimize::{hessian_from_gradient, maximize, Maximum, OptimOptions};
use super::special::{chi_squared_sf, ln_logistic, logistic, two_sided_normal_p};
use super::standardize::{canonical_order, check_rank, permute_rows, ColumnScaler};
use super::{validate_design, Coefficient, EconError, ModelFit, ModelKind};

/// Switch point above which gamma/digamma differences use exact sums over
/// the integer response.
const LARGE_R: f64 = 1e6;

/// `ln Gamma(y + r) - ln Gamma(r)` for integer `y >= 0`.
fn ln_gamma_ratio(y: f64, r: f64) -> f64 {
    if r > LARGE_R {
        let mut sum = 0.0;
        let mut j = 0.0;
        while j < y {
            sum += (r + j).ln();
            j += 1.0;
        }
        sum
    } else {
        ln_gamma(y + r) - ln_gamma(r)
    }
}

/// `psi(y + r) - psi(r)` for integer `y >= 0`.
fn digamma_diff(y: f64, r: f64) -> f64 {
    if r > LARGE_R {
        let mut sum = 0.0;
        let mut j = 0.0;
        while j < y {
            sum += 1.0 / (r + j);
            j += 1.0;
        }
        sum
    } else {
        digamma(y + r) - digamma(r)
    }
}

/// Per-observation NB2 pieces at linear predictor `eta` and dispersion
/// `r = 1/alpha`: log-density of `y`.
fn nb_ln_density(y: f64, eta: f64, r: f64) -> f64 {
    let mu = eta.exp();
    if !mu.is_finite() {
        return f64::NEG_INFINITY;
    }
    // ln(r / (r + mu)) and ln(mu / (r + mu)) without forming r + mu naively.
    let a = -(mu / r).ln_1p();
    let ln_y_fact = ln_gamma(y + 1.0);
    let b = eta - (r.ln() - a); // ln mu - ln(r + mu)
    ln_gamma_ratio(y, r) - ln_y_fact + r * a + if y > 0.0 { y * b } else { 0.0 }
}

/// NB2 log-likelihood with parameter layout `[beta_1 .. beta_k, ln_alpha]`.
pub struct Nb2Likelihood<'a> {
    y: &'a DVector<f64>,
    x: &'a DMatrix<f64>,
}

impl<'a> Nb2Likelihood<'a> {
    pub fn new(y: &'a DVector<f64>, x: &'a DMatrix<f64>) -> Self {
        Nb2Likelihood { y, x }
    }

    pub fn dim(&self) -> usize {
        self.x.ncols() + 1
    }

    fn split(&self, theta: &DVector<f64>) -> (DVector<f64>, f64) {
        let k = self.x.ncols();
        (DVector::from_fn(k, |j, _| theta[j]), theta[k])
    }

    pub fn value(&self, theta: &DVector<f64>) -> f64 {
        self.loglik_obs(theta).sum()
    }

    /// Per-observation log-likelihood contributions.
    pub fn loglik_obs(&self, theta: &DVector<f64>) -> DVector<f64> {
        let (beta, ln_alpha) = self.split(theta);
        let r = (-ln_alpha).exp();
        let eta = self.x * &beta;
        DVector::from_fn(self.y.len(), |i, _| nb_ln_density(self.y[i], eta[i], r))
    }

    pub fn gradient(&self, theta: &DVector<f64>) -> DVector<f64> {
        let (beta, ln_alpha) = self.split(theta);
        let k = self.x.ncols();
        let r = (-ln_alpha).exp();
        let eta = self.x * &beta;
        let mut w = DVector::zeros(self.y.len());
        let mut dr = 0.0;
        for i in 0..self.y.len() {
            let y = self.y[i];
            let mu = eta[i].exp();
            w[i] = r * (y - mu) / (r + mu);
            dr += digamma_diff(y, r) - (mu / r).ln_1p() + (mu - y) / (r + mu);
        }
        let db = self.x.transpose() * w;
        let mut g = DVector::zeros(k + 1);
        for j in 0..k {
            g[j] = db[j];
        }
        // Chain rule: d/d ln_alpha = (d/dr) * dr/d ln_alpha, dr/d ln_alpha = -r.
        g[k] = -r * dr;
        g
    }
}

/// ZINB log-likelihood.
///
/// Parameter layout: `[beta_1 .. beta_k1, gamma_1 .. gamma_k2, ln_alpha]`
/// where `beta` drives the count mean and `gamma` the inflation logit.
pub struct ZinbLikelihood<'a> {
    y: &'a DVector<f64>,
    x_count: &'a DMatrix<f64>,
    x_inflate: &'a DMatrix<f64>,
}

impl<'a> ZinbLikelihood<'a> {
    pub fn new(
        y: &'a DVector<f64>,
        x_count: &'a DMatrix<f64>,
        x_inflate: &'a DMatrix<f64>,
    ) -> Self {
        ZinbLikelihood {
            y,
            x_count,
            x_inflate,
        }
    }

    pub fn dim(&self) -> usize {
        self.x_count.ncols() + self.x_inflate.ncols() + 1
    }

    fn split(&self, theta: &DVector<f64>) -> (DVector<f64>, DVector<f64>, f64) {
        let k1 = self.x_count.ncols();
        let k2 = self.x_inflate.ncols();
        let beta = DVector::from_fn(k1, |j, _| theta[j]);
        let gamma = DVector::from_fn(k2, |j, _| theta[k1 + j]);
        (beta, gamma, theta[k1 + k2])
    }

    pub fn value(&self, theta: &DVector<f64>) -> f64 {
        self.loglik_obs(theta).sum()
    }

    pub fn loglik_obs(&self, theta: &DVector<f64>) -> DVector<f64> {
        let (beta, gamma, ln_alpha) = self.split(theta);
        let r = (-ln_alpha).exp();
        let eta = self.x_count * &beta;
        let v = self.x_inflate * &gamma;
        DVector::from_fn(self.y.len(), |i, _| {
            let y = self.y[i];
            if y > 0.0 {
                ln_logistic(-v[i]) + nb_ln_density(y, eta[i], r)
            } else {
                let mu = eta[i].exp();
                if !mu.is_finite() {
                    return f64::NEG_INFINITY;
                }
                // logsumexp(ln pi, ln(1 - pi) + r * ln(r / (r + mu)))
                let ln_pi = ln_logistic(v[i]);
                let ln_one_minus = ln_logistic(-v[i]);
                let ln_p0 = -r * (mu / r).ln_1p();
                let a = ln_pi;
                let b = ln_one_minus + ln_p0;
                let m = a.max(b);
                m + ((a - m).exp() + (b - m).exp()).ln()
            }
        })
    }

    pub fn gradient(&self, theta: &DVector<f64>) -> DVector<f64> {
        let (beta, gamma, ln_alpha) = self.split(theta);
        let k1 = self.x_count.ncols();
        let k2 = self.x_inflate.ncols();
        let r = (-ln_alpha).exp();
        let eta = self.x_count * &beta;
        let v = self.x_inflate * &gamma;
        let n = self.y.len();
        let mut w_count = DVector::zeros(n);
        let mut w_inflate = DVector::zeros(n);
        let mut dr = 0.0;
        for i in 0..n {
            let y = self.y[i];
            let mu = eta[i].exp();
            let pi = logistic(v[i]);
            if y > 0.0 {
                w_count[i] = r * (y - mu) / (r + mu);
                w_inflate[i] = -pi;
                dr += digamma_diff(y, r) - (mu / r).ln_1p() + (mu - y) / (r + mu);
            } else {
                let a = -(mu / r).ln_1p(); // ln(r / (r + mu))
                // Posterior weight of the inflation component.
                let ln_pi = ln_logistic(v[i]);
                let ln_one_minus = ln_logistic(-v[i]);
                let diff = ln_pi - (ln_one_minus + r * a);
                let w_a = logistic(diff);
                let w_b = 1.0 - w_a;
                w_count[i] = w_b * (-r * mu / (r + mu));
                w_inflate[i] = w_a * (1.0 - pi) - w_b * pi;
                dr += w_b * (a + mu / (r + mu));
            }
        }
        let db = self.x_count.transpose() * w_count;
        let dg = self.x_inflate.transpose() * w_inflate;
        let mut g = DVector::zeros(k1 + k2 + 1);
        for j in 0..k1 {
            g[j] = db[j];
        }
        for j in 0..k2 {
            g[k1 + j] = dg[j];
        }
        g[k1 + k2] = -r * dr;
        g
    }
}

fn validate_counts(y: &DVector<f64>) -> Result<(), EconError> {
    for (i, &v) in y.iter().enumerate() {
        if v < 0.0 || v.fract() != 0.0 || !v.is_finite() {
            return Err(EconError::NonIntegerResponse { index: i, value: v });
        }
    }
    Ok(())
}

fn count_start(y: &DVector<f64>, xs: &DMatrix<f64>) -> Result<DVector<f64>, EconError> {
    let ln_y = DVector::from_fn(y.len(), |i, _| (1.0 + y[i]).ln());
    let (beta0, _) = ols_solve(&ln_y, xs)?;
    Ok(beta0)
}

struct CountInternal {
    maximum: Maximum,
    estimates: DVector<f64>,
    covariance: DMatrix<f64>,
}

/// Shared driver: maximize, check convergence, covariance from the
/// finite-difference observed information.
fn drive(
    value: &dyn Fn(&DVector<f64>) -> f64,
    gradient: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    theta0: DVector<f64>,
) -> Result<CountInternal, EconError> {
    let maximum = maximize(
        value,
        gradient,
        &|t| hessian_from_gradient(gradient, t),
        theta0,
        &OptimOptions::default(),
    );
    if !maximum.converged {
        return Err(EconError::NonConvergence {
            iterations: maximum.iterations,
            gradient_norm: maximum.gradient_norm,
        });
    }
    let info = -hessian_from_gradient(gradient, &maximum.theta);
    let covariance = match Cholesky::new(info.clone()) {
        Some(c) => c.inverse(),
        None => {
            // Fall back to a pseudo-inverse when the information matrix is
            // at the edge of positive definiteness.
            info.pseudo_inverse(1e-12).map_err(|_| EconError::DegenerateSample {
                reason: "observed information is singular".to_string(),
            })?
        }
    };
    let estimates = maximum.theta.clone();
    Ok(CountInternal {
        maximum,
        estimates,
        covariance,
    })
}

/// Fits an NB2 regression (`Var(y) = mu + alpha * mu^2`).
///
/// `y` must hold non-negative integers. Row order does not affect the
/// result.
pub fn fit_nb2(y: &DVector<f64>, x: &DMatrix<f64>, names: &[String]) -> Result<ModelFit, EconError> {
    validate_design(y, x, names)?;
    validate_counts(y)?;
    let n = x.nrows();
    let k = x.ncols();
    if n < k + 2 {
        return Err(EconError::InvalidInput {
            reason: format!("{n} observations cannot identify {k} coefficients plus alpha"),
        });
    }
    let order = canonical_order(y, x);
    let (y, x) = permute_rows(y, x, &order);
    let scaler = ColumnScaler::fit(&x, names)?;
    let xs = scaler.transform(&x);
    check_rank(&xs, names)?;

    let beta0 = count_start(&y, &xs)?;
    let mut theta0 = DVector::zeros(k + 1);
    for j in 0..k {
        theta0[j] = beta0[j];
    }
    theta0[k] = 0.5f64.ln();

    let lik = Nb2Likelihood::new(&y, &xs);
    let fitted = drive(&|t| lik.value(t), &|t| lik.gradient(t), theta0)?;

    // Null: intercept and dispersion only.
    let ones = DMatrix::from_element(n, 1, 1.0);
    let null_lik = Nb2Likelihood::new(&y, &ones);
    let mean = y.sum() / n as f64;
    let null0 = DVector::from_vec(vec![(mean.max(1e-8)).ln(), 0.5f64.ln()]);
    let null = drive(&|t| null_lik.value(t), &|t| null_lik.gradient(t), null0)?;

    // Back-transform beta to raw scale; ln_alpha is scale-free.
    let a = scaler.jacobian();
    let mut full = DMatrix::identity(k + 1, k + 1);
    full.view_mut((0, 0), (k, k)).copy_from(&a);
    let estimates = &full * &fitted.estimates;
    let covariance = &full * &fitted.covariance * full.transpose();

    let coefficients = (0..k)
        .map(|j| {
            let estimate = estimates[j];
            let std_err = covariance[(j, j)].max(0.0).sqrt();
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

    let loglik = fitted.maximum.value;
    let loglik_null = null.maximum.value;
    let lr_df = k.saturating_sub(usize::from(scaler.constant.is_some()));
    let lr_chi2 = clamp_lr(2.0 * (loglik - loglik_null));
    let n_zero = y.iter().filter(|&&v| v == 0.0).count();

    Ok(ModelFit {
        kind: ModelKind::NegativeBinomial,
        coefficients,
        inflate: Vec::new(),
        sigma: None,
        sigma_se: None,
        ln_alpha: Some(estimates[k]),
        ln_alpha_se: Some(covariance[(k, k)].max(0.0).sqrt()),
        loglik,
        loglik_null,
        lr_chi2,
        lr_df,
        lr_p: chi_squared_sf(lr_chi2, lr_df.max(1)),
        pseudo_r2: pseudo_r2(loglik, loglik_null),
        n,
        n_censored: None,
        n_uncensored: None,
        n_zero: Some(n_zero),
        left_limit: None,
        converged: true,
        iterations: fitted.maximum.iterations,
        gradient_norm: fitted.maximum.gradient_norm,
        params: estimates.iter().copied().collect(),
    })
}

/// Fits a ZINB model: a logit gate for structural zeros around an NB2
/// count process.
///
/// `y` must hold non-negative integers with at least one zero (otherwise
/// the gate is unidentified) and at least one positive value. Row order
/// does not affect the result.
pub fn fit_zinb(
    y: &DVector<f64>,
    x_count: &DMatrix<f64>,
    count_names: &[String],
    x_inflate: &DMatrix<f64>,
    inflate_names: &[String],
) -> Result<ModelFit, EconError> {
    validate_design(y, x_count, count_names)?;
    validate_design(y, x_inflate, inflate_names)?;
    validate_counts(y)?;
    let n = y.len();
    let k1 = x_count.ncols();
    let k2 = x_inflate.ncols();
    let n_zero = y.iter().filter(|&&v| v == 0.0).count();
    if n_zero == 0 {
        return Err(EconError::NoZeros);
    }
    if n_zero == n {
        return Err(EconError::DegenerateSample {
            reason: "response is identically zero".to_string(),
        });
    }
    if n < k1 + k2 + 2 {
        return Err(EconError::InvalidInput {
            reason: format!(
                "{n} observations cannot identify {} parameters",
                k1 + k2 + 1
            ),
        });
    }

    // Canonical order must cover both matrices: sort by (y, count row,
    // inflate row).
    let glued = {
        let mut m = DMatrix::zeros(n, k1 + k2);
        m.view_mut((0, 0), (n, k1)).copy_from(x_count);
        m.view_mut((0, k1), (n, k2)).copy_from(x_inflate);
        m
    };
    let order = canonical_order(y, &glued);
    let (y, glued) = permute_rows(y, &glued, &order);
    let x_count = glued.view((0, 0), (n, k1)).into_owned();
    let x_inflate = glued.view((0, k1), (n, k2)).into_owned();

    let scaler_count = ColumnScaler::fit(&x_count, count_names)?;
    let xs_count = scaler_count.transform(&x_count);
    check_rank(&xs_count, count_names)?;
    let scaler_inflate = ColumnScaler::fit(&x_inflate, inflate_names)?;
    let xs_inflate = scaler_inflate.transform(&x_inflate);
    check_rank(&xs_inflate, inflate_names)?;

    let beta0 = count_start(&y, &xs_count)?;
    let zero_share = n_zero as f64 / n as f64;
    let gate0 = (zero_share.clamp(0.05, 0.95) / (1.0 - zero_share.clamp(0.05, 0.95))).ln();
    let mut theta0 = DVector::zeros(k1 + k2 + 1);
    for j in 0..k1 {
        theta0[j] = beta0[j];
    }
    if let Some((c, _)) = scaler_inflate.constant {
        theta0[k1 + c] = gate0;
    }
    theta0[k1 + k2] = 0.5f64.ln();

    let lik = ZinbLikelihood::new(&y, &xs_count, &xs_inflate);
    let fitted = drive(&|t| lik.value(t), &|t| lik.gradient(t), theta0)?;

    // Null: intercepts in both parts plus dispersion.
    let ones = DMatrix::from_element(n, 1, 1.0);
    let null_lik = ZinbLikelihood::new(&y, &ones, &ones);
    let mean = y.sum() / n as f64;
    let null0 = DVector::from_vec(vec![(mean.max(1e-8)).ln(), gate0, 0.5f64.ln()]);
    let null = drive(&|t| null_lik.value(t), &|t| null_lik.gradient(t), null0)?;

    // Block affine back-transform.
    let dim = k1 + k2 + 1;
    let mut full = DMatrix::identity(dim, dim);
    full.view_mut((0, 0), (k1, k1))
        .copy_from(&scaler_count.jacobian());
    full.view_mut((k1, k1), (k2, k2))
        .copy_from(&scaler_inflate.jacobian());
    let estimates = &full * &fitted.estimates;
    let covariance = &full * &fitted.covariance * full.transpose();

    let coefficient_at = |j: usize, name: &str| {
        let estimate = estimates[j];
        let std_err = covariance[(j, j)].max(0.0).sqrt();
        let z = estimate / std_err;
        Coefficient {
            name: name.to_string(),
            estimate,
            std_err,
            z,
            p: two_sided_normal_p(z),
        }
    };
    let coefficients = (0..k1)
        .map(|j| coefficient_at(j, &count_names[j]))
        .collect();
    let inflate = (0..k2)
        .map(|j| coefficient_at(k1 + j, &inflate_names[j]))
        .collect();

    let loglik = fitted.maximum.value;
    let loglik_null = null.maximum.value;
    let lr_df = k1.saturating_sub(usize::from(scaler_count.constant.is_some()))
        + k2.saturating_sub(usize::from(scaler_inflate.constant.is_some()));
    let lr_chi2 = clamp_lr(2.0 * (loglik - loglik_null));

    Ok(ModelFit {
        kind: ModelKind::ZeroInflatedNegativeBinomial,
        coefficients,
        inflate,
        sigma: None,
        sigma_se: None,
        ln_alpha: Some(estimates[dim - 1]),
        ln_alpha_se: Some(covariance[(dim - 1, dim - 1)].max(0.0).sqrt()),
        loglik,
        loglik_null,
        lr_chi2,
        lr_df,
        lr_p: chi_squared_sf(lr_chi2, lr_df.max(1)),
        pseudo_r2: pseudo_r2(loglik, loglik_null),
        n,
        n_censored: None,
        n_uncensored: None,
        n_zero: Some(n_zero),
        left_limit: None,
        converged: true,
        iterations: fitted.maximum.iterations,
        gradient_norm: fitted.maximum.gradient_norm,
        params: estimates.iter().copied().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::econometrics::optimize::gradient_from_value;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Gamma, Normal, Poisson};

    fn names(k: usize) -> Vec<String> {
        (0..k)
            .map(|j| if j == 0 { "const".into() } else { format!("x{j}") })
            .collect()
    }

    fn simulate_nb(
        n: usize,
        beta: &[f64],
        alpha: f64,
        seed: u64,
    ) -> (DVector<f64>, DMatrix<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let k = beta.len();
        let mut x = DMatrix::zeros(n, k);
        let mut y = DVector::zeros(n);
        let r = 1.0 / alpha;
        for i in 0..n {
            x[(i, 0)] = 1.0;
            for j in 1..k {
                x[(i, j)] = normal.sample(&mut rng);
            }
            let mut eta = 0.0;
            for j in 0..k {
                eta += x[(i, j)] * beta[j];
            }
            let mu: f64 = eta.exp();
            let lambda = Gamma::new(r, mu / r).unwrap().sample(&mut rng);
            y[i] = Poisson::new(lambda.max(1e-12)).unwrap().sample(&mut rng);
        }
        (y, x)
    }

    #[test]
    fn nb_density_matches_closed_form() {
        // NB2 pmf at y=2, mu=1.5, alpha=0.5 (r=2):
        // P(2) = Gamma(4)/(Gamma(2) 2!) * (2/3.5)^2 * (1.5/3.5)^2.
        let p = (ln_gamma(4.0) - ln_gamma(2.0) - ln_gamma(3.0)
            + 2.0 * (2.0f64 / 3.5).ln()
            + 2.0 * (1.5f64 / 3.5).ln())
        .exp();
        let ours = nb_ln_density(2.0, 1.5f64.ln(), 2.0).exp();
        assert_relative_eq!(ours, p, max_relative = 1e-12);
    }

    #[test]
    fn large_dispersion_approaches_poisson() {
        // r huge => Poisson(mu). Compare to Poisson pmf.
        let mu: f64 = 3.0;
        let y = 4.0;
        let poisson = (-mu + y * mu.ln() - ln_gamma(y + 1.0)).exp();
        let nb = nb_ln_density(y, mu.ln(), 1e9).exp();
        assert_relative_eq!(nb, poisson, max_relative = 1e-6);
        // The exact-sum branch stays finite and close at r = 1e12.
        assert!(nb_ln_density(y, mu.ln(), 1e12).is_finite());
    }

    #[test]
    fn nb_gradient_matches_finite_differences() {
        let (y, x) = simulate_nb(250, &[0.8, 0.5, -0.4], 0.7, 3);
        let lik = Nb2Likelihood::new(&y, &x);
        for theta in [
            DVector::from_vec(vec![0.5, 0.3, -0.2, -0.3]),
            DVector::from_vec(vec![0.0, 0.0, 0.0, 0.0]),
            DVector::from_vec(vec![1.0, -0.5, 0.5, 1.5]),
        ] {
            let analytic = lik.gradient(&theta);
            let numeric = gradient_from_value(&|t| lik.value(t), &theta);
            for j in 0..theta.len() {
                let denom = numeric[j].abs().max(1.0);
                assert!(
                    (analytic[j] - numeric[j]).abs() / denom < 1e-6,
                    "component {j}: {} vs {}",
                    analytic[j],
                    numeric[j]
                );
            }
        }
    }

    #[test]
    fn zinb_gradient_matches_finite_differences() {
        let (y, x) = simulate_zinb(300, &[0.8, 0.6], &[-0.5, 0.9], 0.6, 9);
        let lik = ZinbLikelihood::new(&y, &x, &x);
        for theta in [
            DVector::from_vec(vec![0.5, 0.3, -0.4, 0.6, -0.2]),
            DVector::from_vec(vec![0.0, 0.0, 0.0, 0.0, 0.0]),
            DVector::from_vec(vec![0.9, -0.3, 0.2, -0.8, 0.7]),
        ] {
            let analytic = lik.gradient(&theta);
            let numeric = gradient_from_value(&|t| lik.value(t), &theta);
            for j in 0..theta.len() {
                let denom = numeric[j].abs().max(1.0);
                assert!(
                    (analytic[j] - numeric[j]).abs() / denom < 1e-6,
                    "component {j}: {} vs {}",
                    analytic[j],
                    numeric[j]
                );
            }
        }
    }

    fn simulate_zinb(
        n: usize,
        beta: &[f64],
        gamma: &[f64],
        alpha: f64,
        seed: u64,
    ) -> (DVector<f64>, DMatrix<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let k = beta.len();
        let mut x = DMatrix::zeros(n, k);
        let mut y = DVector::zeros(n);
        let r = 1.0 / alpha;
        for i in 0..n {
            x[(i, 0)] = 1.0;
            for j in 1..k {
                x[(i, j)] = normal.sample(&mut rng);
            }
            let mut eta = 0.0;
            let mut v = 0.0;
            for j in 0..k {
                eta += x[(i, j)] * beta[j];
                v += x[(i, j)] * gamma[j];
            }
            let pi = logistic(v);
            let u: f64 = rand::Rng::random(&mut rng);
            if u < pi {
                y[i] = 0.0;
            } else {
                let mu: f64 = eta.exp();
                let lambda = Gamma::new(r, mu / r).unwrap().sample(&mut rng);
                y[i] = Poisson::new(lambda.max(1e-12)).unwrap().sample(&mut rng);
            }
        }
        (y, x)
    }

    #[test]
    fn nb_recovers_parameters() {
        let truth = [1.0, 0.6, -0.4];
        let alpha = 0.8;
        let (y, x) = simulate_nb(6000, &truth, alpha, 17);
        let fit = fit_nb2(&y, &x, &names(3)).unwrap();
        for (j, t) in truth.iter().enumerate() {
            let c = &fit.coefficients[j];
            assert!(
                (c.estimate - t).abs() < 3.5 * c.std_err,
                "{}: {} vs {}",
                c.name,
                c.estimate,
                t
            );
        }
        let alpha_hat = fit.alpha().unwrap();
        assert!((alpha_hat - alpha).abs() < 0.12, "alpha {alpha_hat}");
        assert!(fit.lr_chi2 > 0.0);
        assert_eq!(fit.lr_df, 2);
    }

    #[test]
    fn zinb_recovers_parameters() {
        let beta = [1.2, 0.5];
        let gamma = [-0.4, 0.8];
        let alpha = 0.6;
        let (y, x) = simulate_zinb(8000, &beta, &gamma, alpha, 23);
        let fit = fit_zinb(&y, &x, &names(2), &x, &names(2)).unwrap();
        for (j, t) in beta.iter().enumerate() {
            let c = &fit.coefficients[j];
            assert!(
                (c.estimate - t).abs() < 3.5 * c.std_err,
                "count {}: {} vs {}",
                c.name,
                c.estimate,
                t
            );
        }
        for (j, t) in gamma.iter().enumerate() {
            let c = &fit.inflate[j];
            assert!(
                (c.estimate - t).abs() < 3.5 * c.std_err,
                "inflate {}: {} vs {}",
                c.name,
                c.estimate,
                t
            );
        }
        assert!((fit.alpha().unwrap() - alpha).abs() < 0.15);
        assert!(fit.n_zero.unwrap() > 1000);
    }

    #[test]
    fn rejects_invalid_responses() {
        let x = DMatrix::from_element(20, 1, 1.0);
        let mut y = DVector::from_element(20, 1.0);
        y[3] = 2.5;
        assert!(matches!(
            fit_nb2(&y, &x, &names(1)),
            Err(EconError::NonIntegerResponse { index: 3, .. })
        ));
        let positive = DVector::from_element(20, 2.0);
        assert!(matches!(
            fit_zinb(&positive, &x, &names(1), &x, &names(1)),
            Err(EconError::NoZeros)
        ));
    }

    #[test]
    fn nb_row_permutation_is_bit_identical() {
        let (y, x) = simulate_nb(400, &[0.5, 0.5], 0.5, 29);
        let fit = fit_nb2(&y, &x, &names(2)).unwrap();
        let order: Vec<usize> = (0..y.len()).rev().collect();
        let yr = DVector::from_fn(y.len(), |i, _| y[order[i]]);
        let xr = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(order[i], j)]);
        let fit_r = fit_nb2(&yr, &xr, &names(2)).unwrap();
        for (a, b) in fit.coefficients.iter().zip(&fit_r.coefficients) {
            assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
        }
        assert_eq!(fit.loglik.to_bits(), fit_r.loglik.to_bits());
    }
}
