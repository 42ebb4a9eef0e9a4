//! Regression models and statistical diagnostics for dyadic flow data.
//!
//! The module provides four estimators behind a common report type
//! ([`ModelFit`]): least squares ([`fit_ols`]), left-censored Tobit
//! regression ([`fit_tobit`]), NB2 negative binomial ([`fit_nb2`]) and
//! zero-inflated negative binomial ([`fit_zinb`]); cross-model tests
//! (structural break via [`chow_test`], non-nested comparison via
//! [`vuong_test`]); and supporting diagnostics (variance inflation
//! factors, descriptive statistics, kernel density estimation).
//!
//! All fitting is deterministic and invariant to row order: rows are
//! sorted into a canonical order and regressors are standardized
//! internally, with estimates mapped back to the raw scale, so repeated
//! runs and permuted inputs give bit-identical results.

mod diagnostics;
mod inference;
mod kde;
mod ols;
mod standardize;
mod tobit;

pub mod count;
pub mod optimize;
pub mod special;

pub use count::{fit_nb2, fit_zinb, Nb2Likelihood, ZinbLikelihood};
pub use diagnostics::{
    correlation_matrix, descriptive_stats, vif, write_correlations, write_descriptive_stats,
    write_vif, ColumnSummary, CorrelationEntry, VifEntry,
};
pub use inference::{chow_test, vuong_test};
pub use kde::{
    kde, kde_at, silverman_bandwidth, write_kde_curve, KdeCurve, KDE_GRID_POINTS,
};
pub use ols::fit_ols;
pub use tobit::{fit_tobit, tobit_loglik, TobitLikelihood};

use std::io::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Errors produced by estimators and diagnostics.
#[derive(Debug, Error)]
pub enum EconError {
    /// The design matrix is (numerically) rank deficient.
    #[error("design matrix is rank deficient at column {column}")]
    RankDeficient { column: String },
    /// The optimizer stopped before meeting the convergence criteria.
    #[error("optimizer failed to converge after {iterations} iterations (gradient norm {gradient_norm:.3e})")]
    NonConvergence { iterations: usize, gradient_norm: f64 },
    /// Every response value sits at the censoring limit.
    #[error("all observations are censored")]
    AllCensored,
    /// A zero-inflated model needs at least one zero response.
    #[error("response contains no zeros; the inflation component is unidentified")]
    NoZeros,
    /// Count models need non-negative integer responses.
    #[error("response at index {index} is not a non-negative integer (value {value})")]
    NonIntegerResponse { index: usize, value: f64 },
    /// Inputs that should describe the same observations disagree in length.
    #[error("inputs describe different numbers of observations")]
    MismatchedObservations,
    /// A test was asked to compare fits from different model families.
    #[error("model fits come from different families")]
    FamilyMismatch,
    /// A test was asked to compare fits with different regressor sets.
    #[error("model fits use different regressors")]
    RegressorMismatch,
    /// The sample carries no usable signal for the requested quantity.
    #[error("degenerate sample: {reason}")]
    DegenerateSample { reason: String },
    /// The requested statistic is undefined for this input.
    #[error("statistic undefined: {reason}")]
    Undefined { reason: String },
    /// The inputs are malformed.
    #[error("invalid input: {reason}")]
    InvalidInput { reason: String },
}

/// Model family of a [`ModelFit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Ols,
    Tobit,
    NegativeBinomial,
    ZeroInflatedNegativeBinomial,
}

impl ModelKind {
    /// Short lowercase label used in file output.
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Ols => "ols",
            ModelKind::Tobit => "tobit",
            ModelKind::NegativeBinomial => "nb2",
            ModelKind::ZeroInflatedNegativeBinomial => "zinb",
        }
    }
}

/// Significance stars under the usual three-level convention:
/// `***` for p < 0.01, `**` for p < 0.05, `*` for p < 0.10.
pub fn significance_stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.10 {
        "*"
    } else {
        ""
    }
}

/// One estimated coefficient with its Wald inference.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_err: f64,
    /// Wald statistic `estimate / std_err`.
    pub z: f64,
    /// Two-sided p-value from the standard normal reference.
    pub p: f64,
}

impl Coefficient {
    pub fn stars(&self) -> &'static str {
        significance_stars(self.p)
    }
}

/// A fitted regression model.
#[derive(Debug, Clone)]
pub struct ModelFit {
    pub kind: ModelKind,
    /// Coefficients of the mean (count) equation.
    pub coefficients: Vec<Coefficient>,
    /// Coefficients of the inflation equation (ZINB only).
    pub inflate: Vec<Coefficient>,
    /// Residual scale (OLS, Tobit).
    pub sigma: Option<f64>,
    /// Standard error of `sigma` (Tobit; OLS reports none).
    pub sigma_se: Option<f64>,
    /// Log dispersion (NB2, ZINB).
    pub ln_alpha: Option<f64>,
    pub ln_alpha_se: Option<f64>,
    /// Maximized log-likelihood.
    pub loglik: f64,
    /// Log-likelihood of the intercept-only null model.
    pub loglik_null: f64,
    /// Likelihood-ratio statistic against the null model.
    pub lr_chi2: f64,
    /// Degrees of freedom of the likelihood-ratio test (slope count).
    pub lr_df: usize,
    pub lr_p: f64,
    /// McFadden pseudo R-squared, `1 - loglik / loglik_null`.
    pub pseudo_r2: f64,
    /// Number of observations.
    pub n: usize,
    pub n_censored: Option<usize>,
    pub n_uncensored: Option<usize>,
    /// Number of zero responses (count models).
    pub n_zero: Option<usize>,
    /// Censoring limit (Tobit).
    pub left_limit: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Max-norm of the score at the reported maximum.
    pub gradient_norm: f64,
    /// Raw parameter vector in likelihood layout: mean coefficients, then
    /// inflation coefficients (ZINB), then the auxiliary parameter
    /// (`sigma` for OLS/Tobit as the variance MLE, `ln_alpha` for counts).
    pub params: Vec<f64>,
}

impl ModelFit {
    /// Number of freely estimated parameters, including auxiliary scale
    /// or dispersion parameters.
    pub fn free_params(&self) -> usize {
        self.coefficients.len()
            + self.inflate.len()
            + usize::from(self.sigma.is_some())
            + usize::from(self.ln_alpha.is_some())
    }

    /// Dispersion `alpha` on the natural scale (count models).
    pub fn alpha(&self) -> Option<f64> {
        self.ln_alpha.map(f64::exp)
    }

    /// Looks up a mean-equation coefficient by name.
    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }

    /// Looks up an inflation-equation coefficient by name.
    pub fn inflate_coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.inflate.iter().find(|c| c.name == name)
    }
}

/// Outcome of a hypothesis test.
#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub name: String,
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

impl TestResult {
    pub fn stars(&self) -> &'static str {
        significance_stars(self.p_value)
    }
}

/// Validates the common shape requirements of a regression problem.
pub(crate) fn validate_design(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    names: &[String],
) -> Result<(), EconError> {
    if y.len() != x.nrows() {
        return Err(EconError::MismatchedObservations);
    }
    if names.len() != x.ncols() {
        return Err(EconError::InvalidInput {
            reason: format!("{} names for {} columns", names.len(), x.ncols()),
        });
    }
    if x.ncols() == 0 {
        return Err(EconError::InvalidInput {
            reason: "design matrix has no columns".to_string(),
        });
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(EconError::InvalidInput {
            reason: format!("y[{i}] is not finite"),
        });
    }
    for j in 0..x.ncols() {
        for i in 0..x.nrows() {
            if !x[(i, j)].is_finite() {
                return Err(EconError::InvalidInput {
                    reason: format!("column {} has a non-finite value at row {i}", names[j]),
                });
            }
        }
    }
    Ok(())
}

/// Writes a fitted model as a rectangular CSV report.
///
/// Row sections: `coef` (mean equation), `inflate` (inflation equation),
/// `aux` (scale or dispersion) and `stat` (scalar fit statistics). The
/// `std_err`, `z`, `p` and `stars` cells are left empty where they do not
/// apply.
pub fn write_fit_report(path: &Path, fit: &ModelFit) -> Result<(), std::io::Error> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(file, "name,section,value,std_err,z,p,stars")?;
    let coef_row = |file: &mut dyn std::io::Write,
                        section: &str,
                        c: &Coefficient|
     -> Result<(), std::io::Error> {
        writeln!(
            file,
            "{},{},{},{},{},{},{}",
            c.name,
            section,
            c.estimate,
            c.std_err,
            c.z,
            c.p,
            c.stars()
        )
    };
    for c in &fit.coefficients {
        coef_row(&mut file, "coef", c)?;
    }
    for c in &fit.inflate {
        coef_row(&mut file, "inflate", c)?;
    }
    if let Some(sigma) = fit.sigma {
        let se = fit.sigma_se.map(|v| v.to_string()).unwrap_or_default();
        writeln!(file, "sigma,aux,{sigma},{se},,,")?;
    }
    if let Some(ln_alpha) = fit.ln_alpha {
        let se = fit.ln_alpha_se.map(|v| v.to_string()).unwrap_or_default();
        writeln!(file, "ln_alpha,aux,{ln_alpha},{se},,,")?;
        writeln!(file, "alpha,aux,{},,,,", ln_alpha.exp())?;
    }
    let stat = |file: &mut dyn std::io::Write,
                    name: &str,
                    value: String|
     -> Result<(), std::io::Error> { writeln!(file, "{name},stat,{value},,,,") };
    stat(&mut file, "model", fit.kind.label().to_string())?;
    stat(&mut file, "n", fit.n.to_string())?;
    if let Some(v) = fit.n_censored {
        stat(&mut file, "n_censored", v.to_string())?;
    }
    if let Some(v) = fit.n_uncensored {
        stat(&mut file, "n_uncensored", v.to_string())?;
    }
    if let Some(v) = fit.n_zero {
        stat(&mut file, "n_zero", v.to_string())?;
    }
    if let Some(v) = fit.left_limit {
        stat(&mut file, "left_limit", v.to_string())?;
    }
    stat(&mut file, "loglik", fit.loglik.to_string())?;
    stat(&mut file, "loglik_null", fit.loglik_null.to_string())?;
    stat(&mut file, "lr_chi2", fit.lr_chi2.to_string())?;
    stat(&mut file, "lr_df", fit.lr_df.to_string())?;
    stat(&mut file, "lr_p", fit.lr_p.to_string())?;
    stat(&mut file, "pseudo_r2", fit.pseudo_r2.to_string())?;
    stat(&mut file, "iterations", fit.iterations.to_string())?;
    stat(&mut file, "converged", fit.converged.to_string())?;
    file.flush()
}

/// Writes one or more test results as CSV (`name,statistic,df,p,stars`).
pub fn write_test_results(path: &Path, tests: &[TestResult]) -> Result<(), std::io::Error> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(file, "name,statistic,df,p,stars")?;
    for t in tests {
        writeln!(
            file,
            "{},{},{},{},{}",
            t.name,
            t.statistic,
            t.df,
            t.p_value,
            t.stars()
        )?;
    }
    file.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stars_use_strict_thresholds() {
        assert_eq!(significance_stars(0.009), "***");
        assert_eq!(significance_stars(0.01), "**");
        assert_eq!(significance_stars(0.049), "**");
        assert_eq!(significance_stars(0.05), "*");
        assert_eq!(significance_stars(0.099), "*");
        assert_eq!(significance_stars(0.10), "");
        assert_eq!(significance_stars(0.9), "");
    }

    #[test]
    fn validate_design_catches_shape_errors() {
        let y = DVector::from_vec(vec![1.0, 2.0]);
        let x = DMatrix::from_element(3, 2, 1.0);
        assert!(matches!(
            validate_design(&y, &x, &["a".into(), "b".into()]),
            Err(EconError::MismatchedObservations)
        ));
        let y3 = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert!(matches!(
            validate_design(&y3, &x, &["a".into()]),
            Err(EconError::InvalidInput { .. })
        ));
        let mut bad = x.clone();
        bad[(1, 1)] = f64::NAN;
        assert!(matches!(
            validate_design(&y3, &bad, &["a".into(), "b".into()]),
            Err(EconError::InvalidInput { .. })
        ));
    }

    #[test]
    fn fit_report_has_expected_sections() {
        let fit = ModelFit {
            kind: ModelKind::Tobit,
            coefficients: vec![Coefficient {
                name: "const".into(),
                estimate: 1.0,
                std_err: 0.5,
                z: 2.0,
                p: 0.0455,
            }],
            inflate: Vec::new(),
            sigma: Some(2.0),
            sigma_se: Some(0.1),
            ln_alpha: None,
            ln_alpha_se: None,
            loglik: -10.0,
            loglik_null: -12.0,
            lr_chi2: 4.0,
            lr_df: 1,
            lr_p: 0.0455,
            pseudo_r2: 1.0 - 10.0 / 12.0,
            n: 20,
            n_censored: Some(5),
            n_uncensored: Some(15),
            n_zero: None,
            left_limit: Some(0.0),
            converged: true,
            iterations: 7,
            gradient_norm: 1e-9,
            params: vec![1.0, 2.0],
        };
        let dir = std::env::temp_dir().join(format!("fitrep-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("fit.csv");
        write_fit_report(&path, &fit).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("name,section,value,std_err,z,p,stars\n"));
        assert!(text.contains("const,coef,1,0.5,2,0.0455,**"));
        assert!(text.contains("sigma,aux,2,0.1,,,"));
        assert!(text.contains("model,stat,tobit,,,,"));
        assert!(text.contains("n_censored,stat,5,,,,"));
        std::fs::remove_dir_all(&dir).unwrap();
        assert_eq!(fit.free_params(), 2);
        assert!(fit.coefficient("const").is_some());
        assert!(fit.coefficient("missing").is_none());
    }
}
