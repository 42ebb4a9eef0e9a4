//! Cross-model tests: structural-break (Chow-style likelihood ratio) and
//! Vuong's non-nested comparison.

use nalgebra::{DMatrix, DVector};

use super::count::{Nb2Likelihood, ZinbLikelihood};
use super::ols::clamp_lr;
use super::special::{chi_squared_sf, two_sided_normal_p};
use super::{EconError, ModelFit, ModelKind, TestResult};

/// Likelihood-ratio form of the Chow test for a structural break.
///
/// `pooled` must be the same model family fitted to the stacked sample of
/// the two sub-samples behind `a` and `b`, with identical regressor
/// columns. Under the null of parameter constancy,
/// `2 (ll_a + ll_b - ll_pooled)` is asymptotically chi-squared with as
/// many degrees of freedom as one sub-model has free parameters.
pub fn chow_test(pooled: &ModelFit, a: &ModelFit, b: &ModelFit) -> Result<TestResult, EconError> {
    if pooled.kind != a.kind || pooled.kind != b.kind {
        return Err(EconError::FamilyMismatch);
    }
    fn names(fit: &ModelFit) -> (Vec<&str>, Vec<&str>) {
        (
            fit.coefficients.iter().map(|c| c.name.as_str()).collect(),
            fit.inflate.iter().map(|c| c.name.as_str()).collect(),
        )
    }
    if names(pooled) != names(a) || names(pooled) != names(b) {
        return Err(EconError::RegressorMismatch);
    }
    if pooled.n != a.n + b.n {
        return Err(EconError::MismatchedObservations);
    }
    let df = a.free_params();
    let statistic = clamp_lr(2.0 * (a.loglik + b.loglik - pooled.loglik));
    Ok(TestResult {
        name: "chow".to_string(),
        statistic,
        df,
        p_value: chi_squared_sf(statistic, df),
    })
}

/// Vuong's test comparing a fitted ZINB model against a fitted NB2 model
/// on the same sample.
///
/// Positive statistics favour the zero-inflated model. The statistic is
/// referred to a standard normal; `df` is reported as 1 because the
/// squared statistic is chi-squared with one degree of freedom, which
/// yields the same two-sided p-value.
pub fn vuong_test(
    zinb: &ModelFit,
    nb: &ModelFit,
    y: &DVector<f64>,
    x_count: &DMatrix<f64>,
    x_inflate: &DMatrix<f64>,
) -> Result<TestResult, EconError> {
    if zinb.kind != ModelKind::ZeroInflatedNegativeBinomial
        || nb.kind != ModelKind::NegativeBinomial
    {
        return Err(EconError::FamilyMismatch);
    }
    let n = y.len();
    if n != zinb.n || n != nb.n || x_count.nrows() != n || x_inflate.nrows() != n {
        return Err(EconError::MismatchedObservations);
    }
    if x_count.ncols() != zinb.coefficients.len()
        || x_count.ncols() != nb.coefficients.len()
        || x_inflate.ncols() != zinb.inflate.len()
    {
        return Err(EconError::RegressorMismatch);
    }
    if n < 2 {
        return Err(EconError::InvalidInput {
            reason: "need at least two observations".to_string(),
        });
    }

    let zinb_lik = ZinbLikelihood::new(y, x_count, x_inflate);
    let nb_lik = Nb2Likelihood::new(y, x_count);
    let zinb_theta = DVector::from_vec(zinb.params.clone());
    let nb_theta = DVector::from_vec(nb.params.clone());
    let ll_zinb = zinb_lik.loglik_obs(&zinb_theta);
    let ll_nb = nb_lik.loglik_obs(&nb_theta);

    let m = DVector::from_fn(n, |i, _| ll_zinb[i] - ll_nb[i]);
    let mean = m.sum() / n as f64;
    let var = m.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    if var <= 0.0 {
        return Err(EconError::Undefined {
            reason: "per-observation log-likelihood differences have zero variance".to_string(),
        });
    }
    let statistic = (n as f64).sqrt() * mean / var.sqrt();
    Ok(TestResult {
        name: "vuong".to_string(),
        statistic,
        df: 1,
        p_value: two_sided_normal_p(statistic),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::econometrics::ols::fit_ols;
    use nalgebra::{DMatrix, DVector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn simulate(
        n: usize,
        beta: &[f64],
        sigma: f64,
        rng: &mut ChaCha8Rng,
    ) -> (DVector<f64>, DMatrix<f64>) {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let k = beta.len();
        let mut x = DMatrix::zeros(n, k);
        let mut y = DVector::zeros(n);
        for i in 0..n {
            x[(i, 0)] = 1.0;
            for j in 1..k {
                x[(i, j)] = normal.sample(rng);
            }
            let mut mu = 0.0;
            for j in 0..k {
                mu += x[(i, j)] * beta[j];
            }
            y[i] = mu + sigma * normal.sample(rng);
        }
        (y, x)
    }

    fn stack(
        a: &(DVector<f64>, DMatrix<f64>),
        b: &(DVector<f64>, DMatrix<f64>),
    ) -> (DVector<f64>, DMatrix<f64>) {
        let n = a.0.len() + b.0.len();
        let k = a.1.ncols();
        let mut y = DVector::zeros(n);
        let mut x = DMatrix::zeros(n, k);
        for i in 0..a.0.len() {
            y[i] = a.0[i];
            for j in 0..k {
                x[(i, j)] = a.1[(i, j)];
            }
        }
        for i in 0..b.0.len() {
            y[a.0.len() + i] = b.0[i];
            for j in 0..k {
                x[(a.0.len() + i, j)] = b.1[(i, j)];
            }
        }
        (y, x)
    }

    fn names(k: usize) -> Vec<String> {
        (0..k)
            .map(|j| if j == 0 { "const".into() } else { format!("x{j}") })
            .collect()
    }

    #[test]
    fn chow_detects_a_break() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = simulate(600, &[1.0, 2.0], 1.0, &mut rng);
        let b = simulate(600, &[1.0, -2.0], 1.0, &mut rng);
        let pooled = stack(&a, &b);
        let fit_a = fit_ols(&a.0, &a.1, &names(2)).unwrap();
        let fit_b = fit_ols(&b.0, &b.1, &names(2)).unwrap();
        let fit_p = fit_ols(&pooled.0, &pooled.1, &names(2)).unwrap();
        let test = chow_test(&fit_p, &fit_a, &fit_b).unwrap();
        assert_eq!(test.df, 3); // two coefficients plus sigma
        assert!(test.statistic > 100.0, "statistic {}", test.statistic);
        assert!(test.p_value < 1e-6);
    }

    #[test]
    fn chow_is_calm_under_the_null() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = simulate(600, &[1.0, 2.0], 1.0, &mut rng);
        let b = simulate(600, &[1.0, 2.0], 1.0, &mut rng);
        let pooled = stack(&a, &b);
        let fit_a = fit_ols(&a.0, &a.1, &names(2)).unwrap();
        let fit_b = fit_ols(&b.0, &b.1, &names(2)).unwrap();
        let fit_p = fit_ols(&pooled.0, &pooled.1, &names(2)).unwrap();
        let test = chow_test(&fit_p, &fit_a, &fit_b).unwrap();
        assert!(test.p_value > 0.01, "p {}", test.p_value);
    }

    #[test]
    fn chow_rejects_mismatches() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = simulate(100, &[1.0, 2.0], 1.0, &mut rng);
        let b = simulate(100, &[1.0, 2.0], 1.0, &mut rng);
        let pooled = stack(&a, &b);
        let fit_a = fit_ols(&a.0, &a.1, &names(2)).unwrap();
        let fit_b = fit_ols(&b.0, &b.1, &names(2)).unwrap();
        let fit_p = fit_ols(&pooled.0, &pooled.1, &names(2)).unwrap();
        // Wrong pooled sample size.
        assert!(matches!(
            chow_test(&fit_a, &fit_a, &fit_b),
            Err(EconError::MismatchedObservations)
        ));
        // Wrong names.
        let other = fit_ols(&a.0, &a.1, &["const".into(), "z".into()]).unwrap();
        assert!(matches!(
            chow_test(&fit_p, &other, &fit_b),
            Err(EconError::RegressorMismatch)
        ));
    }
}
