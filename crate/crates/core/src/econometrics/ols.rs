//! Ordinary least squares, the uncensored baseline for the Tobit model.

use nalgebra::{Cholesky, DMatrix, DVector};

use super::special::{chi_squared_sf, two_sided_normal_p};
use super::standardize::{canonical_order, check_rank, permute_rows, ColumnScaler};
use super::{validate_design, Coefficient, EconError, ModelFit, ModelKind};

/// Least-squares solve via the normal equations; returns the coefficient
/// vector and residual sum of squares. Callers pass well-conditioned
/// (standardized) regressors.
pub(crate) fn ols_solve(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
) -> Result<(DVector<f64>, f64), EconError> {
    let xtx = x.transpose() * x;
    let xty = x.transpose() * y;
    let chol = Cholesky::new(xtx).ok_or(EconError::RankDeficient {
        column: "<unknown>".to_string(),
    })?;
    let beta = chol.solve(&xty);
    let resid = y - x * &beta;
    Ok((beta, resid.norm_squared()))
}

/// Gaussian log-likelihood at the variance MLE `rss / n`.
pub(crate) fn gaussian_loglik(rss: f64, n: usize) -> f64 {
    let nf = n as f64;
    -0.5 * nf * ((2.0 * std::f64::consts::PI * rss / nf).ln() + 1.0)
}

/// Fits `y = x * beta + eps` by least squares.
///
/// Reported standard errors use the classical `rss / (n - k)` variance;
/// the log-likelihood uses the variance MLE, so likelihood-ratio
/// comparisons against the censored models line up. Row order does not
/// affect the result.
pub fn fit_ols(y: &DVector<f64>, x: &DMatrix<f64>, names: &[String]) -> Result<ModelFit, EconError> {
    validate_design(y, x, names)?;
    let n = x.nrows();
    let k = x.ncols();
    if n < k + 1 {
        return Err(EconError::InvalidInput {
            reason: format!("{n} observations cannot identify {k} coefficients"),
        });
    }
    let order = canonical_order(y, x);
    let (y, x) = permute_rows(y, x, &order);

    let scaler = ColumnScaler::fit(&x, names)?;
    let xs = scaler.transform(&x);
    check_rank(&xs, names)?;

    let (beta_std, rss) = ols_solve(&y, &xs)?;
    // A residual RMS below 1e-12 of the response RMS means the data are
    // numerically noiseless; variance estimates would be meaningless.
    if rss <= 1e-24 * y.norm_squared() {
        return Err(EconError::DegenerateSample {
            reason: "zero residual variance".to_string(),
        });
    }
    let sigma2 = rss / (n - k) as f64;
    let xtx = xs.transpose() * &xs;
    let cov_std = Cholesky::new(xtx)
        .ok_or(EconError::RankDeficient {
            column: "<unknown>".to_string(),
        })?
        .inverse()
        * sigma2;
    let a = scaler.jacobian();
    let beta = &a * &beta_std;
    let cov = &a * cov_std * a.transpose();

    let loglik = gaussian_loglik(rss, n);
    let loglik_null = null_loglik(&y)?;
    let lr_df = k.saturating_sub(usize::from(scaler.constant.is_some()));
    let lr_chi2 = clamp_lr(2.0 * (loglik - loglik_null));

    let coefficients = (0..k)
        .map(|j| {
            let estimate = beta[j];
            let std_err = cov[(j, j)].max(0.0).sqrt();
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

    let mut params: Vec<f64> = beta.iter().copied().collect();
    params.push((rss / n as f64).sqrt());
    Ok(ModelFit {
        kind: ModelKind::Ols,
        coefficients,
        inflate: Vec::new(),
        sigma: Some(sigma2.sqrt()),
        sigma_se: None,
        ln_alpha: None,
        ln_alpha_se: None,
        loglik,
        loglik_null,
        lr_chi2,
        lr_df,
        lr_p: chi_squared_sf(lr_chi2, lr_df.max(1)),
        pseudo_r2: pseudo_r2(loglik, loglik_null),
        n,
        n_censored: None,
        n_uncensored: None,
        n_zero: None,
        left_limit: None,
        converged: true,
        iterations: 0,
        gradient_norm: 0.0,
        params,
    })
}

/// Intercept-only Gaussian log-likelihood.
fn null_loglik(y: &DVector<f64>) -> Result<f64, EconError> {
    let n = y.len();
    let mean = y.sum() / n as f64;
    let rss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if rss <= 1e-24 * y.norm_squared() {
        return Err(EconError::DegenerateSample {
            reason: "response is constant".to_string(),
        });
    }
    Ok(gaussian_loglik(rss, n))
}

pub(crate) fn clamp_lr(stat: f64) -> f64 {
    if stat < 0.0 && stat > -1e-8 {
        0.0
    } else {
        stat
    }
}

pub(crate) fn pseudo_r2(loglik: f64, loglik_null: f64) -> f64 {
    if loglik_null == 0.0 {
        f64::NAN
    } else {
        1.0 - loglik / loglik_null
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn simulate(n: usize, beta: &[f64], sigma: f64, seed: u64) -> (DVector<f64>, DMatrix<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let k = beta.len();
        let mut x = DMatrix::zeros(n, k);
        for i in 0..n {
            x[(i, 0)] = 1.0;
            for j in 1..k {
                x[(i, j)] = normal.sample(&mut rng);
            }
        }
        let mut y = DVector::zeros(n);
        for i in 0..n {
            let mut mu = 0.0;
            for j in 0..k {
                mu += x[(i, j)] * beta[j];
            }
            y[i] = mu + sigma * normal.sample(&mut rng);
        }
        (y, x)
    }

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|j| if j == 0 { "const".into() } else { format!("x{j}") }).collect()
    }

    #[test]
    fn exact_fit_on_noiseless_data_is_rejected() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let y = &x * DVector::from_vec(vec![2.0, -1.0]);
        assert!(matches!(
            fit_ols(&y, &x, &names(2)),
            Err(EconError::DegenerateSample { .. })
        ));
    }

    #[test]
    fn recovers_coefficients_on_simulated_data() {
        let truth = [1.0, -2.0, 0.5];
        let (y, x) = simulate(4000, &truth, 1.0, 42);
        let fit = fit_ols(&y, &x, &names(3)).unwrap();
        for (j, t) in truth.iter().enumerate() {
            let c = &fit.coefficients[j];
            assert!(
                (c.estimate - t).abs() < 3.0 * c.std_err,
                "{}: {} vs {}",
                c.name,
                c.estimate,
                t
            );
        }
        assert!(fit.lr_chi2 > 0.0);
        assert_eq!(fit.lr_df, 2);
        assert!(fit.sigma.unwrap() > 0.9 && fit.sigma.unwrap() < 1.1);
    }

    #[test]
    fn matches_normal_equation_oracle_exactly() {
        // Tiny case solvable by hand: y = [1, 2, 4], x = [1; 1 1; 1 2].
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0]);
        let y = DVector::from_vec(vec![1.0, 2.0, 4.0]);
        let fit = fit_ols(&y, &x, &names(2)).unwrap();
        // beta = (X'X)^-1 X'y: X'X = [[3,3],[3,5]], X'y = [7, 10].
        // det = 6, beta = ([5*7-3*10]/6, [3*10-3*7]/6) = (5/6, 3/2).
        assert_relative_eq!(fit.coefficients[0].estimate, 5.0 / 6.0, max_relative = 1e-12);
        assert_relative_eq!(fit.coefficients[1].estimate, 1.5, max_relative = 1e-12);
    }

    #[test]
    fn row_permutation_is_bit_identical() {
        let (y, x) = simulate(500, &[0.5, 1.5, -0.7], 2.0, 7);
        let fit = fit_ols(&y, &x, &names(3)).unwrap();
        // Reverse the rows.
        let order: Vec<usize> = (0..y.len()).rev().collect();
        let yr = DVector::from_fn(y.len(), |i, _| y[order[i]]);
        let xr = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(order[i], j)]);
        let fit_r = fit_ols(&yr, &xr, &names(3)).unwrap();
        for (a, b) in fit.coefficients.iter().zip(&fit_r.coefficients) {
            assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
            assert_eq!(a.std_err.to_bits(), b.std_err.to_bits());
        }
        assert_eq!(fit.loglik.to_bits(), fit_r.loglik.to_bits());
    }

    #[test]
    fn collinear_design_is_rejected_with_column_name() {
        let (y, mut x) = simulate(100, &[1.0, 2.0, 0.0], 1.0, 3);
        for i in 0..x.nrows() {
            x[(i, 2)] = 3.0 * x[(i, 1)];
        }
        let err = fit_ols(&y, &x, &names(3)).unwrap_err();
        assert!(matches!(err, EconError::RankDeficient { column } if column == "x2"));
    }
}
