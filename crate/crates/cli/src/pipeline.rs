//! The shared estimation pipeline behind `fit`.
//!
//! Given an assembled corpus and a run configuration this module slices the
//! corpus into the lagged and outcome windows, builds both flow networks,
//! fits the topic model on the lagged slice, derives the eligible
//! institution set, assembles the dyadic design matrix, and runs the model
//! ladder plus the optional sub-period and count-model passes.

use crate::config::RunConfig;
use crate::error::CliError;
use leadflow_core::corpus::{eligible_institutions, filter_corpus, Corpus, InstitutionId, Period};
use leadflow_core::econometrics::{
    chow_test, fit_nb2, fit_ols, fit_tobit, fit_zinb, vuong_test, ModelFit, TestResult,
};
use leadflow_core::leadership::{
    build_network, leadership_mass, CountingScheme, FlowNetwork, MassVector,
};
use leadflow_core::proximity::{
    build_design_matrix, build_proximity_set, ProximitySet, RegressionDataset,
};
use leadflow_core::topicmodel::{fit_lda, institution_vectors, perplexity, TopicModel};
use nalgebra::{DMatrix, DVector};
use std::collections::BTreeSet;

/// The five nested regressor sets, from the bare gravity core to the full
/// specification. Each adds one proximity dimension to the previous set.
pub const LADDER: [&[&str]; 5] = [
    &["const", "ln_LM_i", "ln_LM_j", "ln_geo"],
    &["const", "ln_LM_i", "ln_LM_j", "ln_geo", "ln_cogn"],
    &["const", "ln_LM_i", "ln_LM_j", "ln_geo", "ln_cogn", "inst"],
    &["const", "ln_LM_i", "ln_LM_j", "ln_geo", "ln_cogn", "inst", "soc"],
    &[
        "const", "ln_LM_i", "ln_LM_j", "ln_geo", "ln_cogn", "inst", "soc", "ln_econ",
    ],
];

/// Institutions dropped between the base eligibility rule and the final
/// regression sample, by reason.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EligibilityTally {
    /// Institutions passing the base rule (led a multi-institution paper in
    /// every outcome year).
    pub led_every_year: usize,
    /// Removed for zero leadership mass in the lagged window.
    pub dropped_zero_mass: usize,
    /// Removed because no lagged paper carried keywords, so the topic
    /// profile is empty.
    pub dropped_zero_vector: usize,
    /// Removed for a missing grant count over the lagged window.
    pub dropped_missing_grants: usize,
}

/// Everything `fit` derives from the corpus before estimation.
#[derive(Debug)]
pub struct RegressionInputs {
    pub lag_network: FlowNetwork,
    pub outcome_network: FlowNetwork,
    pub lag_mass: MassVector,
    pub eligible: BTreeSet<InstitutionId>,
    pub proximities: ProximitySet,
    pub dataset: RegressionDataset,
    pub topic_model: TopicModel,
    pub perplexity: f64,
    pub tally: EligibilityTally,
}

/// Builds networks, proximities and the design matrix for `corpus`.
pub fn build_regression_inputs(
    corpus: &Corpus,
    config: &RunConfig,
) -> Result<RegressionInputs, CliError> {
    let field = config.run.field.as_deref();
    let scheme: CountingScheme = config.run.counting.into();
    let lag_period = config.periods.lag;
    let outcome_period = config.periods.outcome;

    let lag_slice = filter_corpus(corpus, lag_period, field);
    let outcome_slice = filter_corpus(corpus, outcome_period, field);
    let lag_network = build_network(corpus, lag_period, field, scheme);
    let outcome_network = build_network(corpus, outcome_period, field, scheme);
    let lag_mass = leadership_mass(&lag_network);

    let lda_config = config.lda.to_lda_config(config.run.seed);
    let topic_model = fit_lda(&lag_slice, &lda_config)?;
    let lda_perplexity = perplexity(&topic_model, &lag_slice)?;
    let vectors = institution_vectors(&lag_slice, &topic_model);

    let base = eligible_institutions(&outcome_slice, outcome_period);
    let mut tally = EligibilityTally {
        led_every_year: base.len(),
        ..EligibilityTally::default()
    };
    let mut eligible = BTreeSet::new();
    for id in base {
        if lag_mass.get(&id).unwrap_or(0.0) <= 0.0 {
            tally.dropped_zero_mass += 1;
            continue;
        }
        let has_profile = vectors
            .get(&id)
            .is_some_and(|v| v.weights.iter().any(|&w| w > 0.0));
        if !has_profile {
            tally.dropped_zero_vector += 1;
            continue;
        }
        let has_grants = corpus
            .registry
            .get(&id)
            .is_some_and(|r| r.nsfc_counts.contains_key(&lag_period));
        if !has_grants {
            tally.dropped_missing_grants += 1;
            continue;
        }
        eligible.insert(id);
    }
    if eligible.len() < 3 {
        return Err(CliError::data(format!(
            "only {} institution(s) remain eligible; need at least 3 \
             (base rule kept {}, dropped {} for zero lagged mass, {} for an \
             empty topic profile, {} for missing grant counts)",
            eligible.len(),
            tally.led_every_year,
            tally.dropped_zero_mass,
            tally.dropped_zero_vector,
            tally.dropped_missing_grants
        )));
    }

    let proximities = build_proximity_set(
        &eligible,
        &corpus.registry,
        &vectors,
        &lag_network,
        lag_period,
    )?;
    let dataset = build_design_matrix(
        &outcome_network,
        &lag_network,
        &lag_mass,
        &proximities,
        &eligible,
        &config.transforms.guards(),
    )?;

    Ok(RegressionInputs {
        lag_network,
        outcome_network,
        lag_mass,
        eligible,
        proximities,
        dataset,
        topic_model,
        perplexity: lda_perplexity,
        tally,
    })
}

/// Selects named columns from the dataset, failing with a data error when a
/// column is missing.
pub fn design_columns(
    dataset: &RegressionDataset,
    columns: &[&str],
) -> Result<(DMatrix<f64>, Vec<String>), CliError> {
    dataset.select(columns).ok_or_else(|| {
        CliError::data(format!(
            "design matrix lacks one of the columns {columns:?}"
        ))
    })
}

/// Fits the left-censored model on one regressor subset.
pub fn fit_censored(dataset: &RegressionDataset, columns: &[&str]) -> Result<ModelFit, CliError> {
    let (x, names) = design_columns(dataset, columns)?;
    Ok(fit_tobit(&dataset.y, &x, &names, 0.0)?)
}

/// Fits the nested ladder in order.
pub fn fit_ladder(dataset: &RegressionDataset) -> Result<Vec<ModelFit>, CliError> {
    LADDER
        .iter()
        .map(|columns| fit_censored(dataset, columns))
        .collect()
}

/// Least-squares baseline on the full column set.
pub fn fit_baseline(dataset: &RegressionDataset) -> Result<ModelFit, CliError> {
    let (x, names) = design_columns(dataset, LADDER[4])?;
    Ok(fit_ols(&dataset.y, &x, &names)?)
}

/// Output of the sub-period comparison.
#[derive(Debug)]
pub struct ChowRun {
    pub sub_fits: Vec<(Period, ModelFit)>,
    pub pooled: ModelFit,
    pub test: TestResult,
}

/// Fits the full specification separately on two outcome sub-windows and
/// compares against the pooled fit. The regressors stay fixed at their
/// lagged values; only the response window moves, so the pooled sample is
/// the two sub-samples stacked.
pub fn subperiod_chow(
    corpus: &Corpus,
    config: &RunConfig,
    inputs: &RegressionInputs,
) -> Result<ChowRun, CliError> {
    if config.subperiods.len() != 2 {
        return Err(CliError::usage(format!(
            "the structural-break test needs exactly two subperiods, found {}",
            config.subperiods.len()
        )));
    }
    let field = config.run.field.as_deref();
    let scheme: CountingScheme = config.run.counting.into();
    let (x, names) = design_columns(&inputs.dataset, LADDER[4])?;
    let n = x.nrows();

    let mut sub_fits = Vec::with_capacity(2);
    let mut ys = Vec::with_capacity(2);
    for &sub in &config.subperiods {
        let network = build_network(corpus, sub, field, scheme);
        let dataset = build_design_matrix(
            &network,
            &inputs.lag_network,
            &inputs.lag_mass,
            &inputs.proximities,
            &inputs.eligible,
            &config.transforms.guards(),
        )?;
        let fit = fit_tobit(&dataset.y, &x, &names, 0.0)?;
        ys.push(dataset.y);
        sub_fits.push((sub, fit));
    }

    let pooled_y = DVector::from_fn(2 * n, |r, _| if r < n { ys[0][r] } else { ys[1][r - n] });
    let pooled_x = DMatrix::from_fn(2 * n, x.ncols(), |r, c| x[(r % n, c)]);
    let pooled = fit_tobit(&pooled_y, &pooled_x, &names, 0.0)?;
    let test = chow_test(&pooled, &sub_fits[0].1, &sub_fits[1].1)?;
    Ok(ChowRun {
        sub_fits,
        pooled,
        test,
    })
}

/// Output of the count-model robustness pass.
#[derive(Debug)]
pub struct RobustnessRun {
    /// Design matrix rebuilt under full counting (integer responses).
    pub dataset: RegressionDataset,
    pub nb: ModelFit,
    pub zinb: ModelFit,
    pub vuong: TestResult,
}

/// Rebuilds both networks under full counting, where flows are integer
/// counts, and fits the count models plus the model-comparison test. The
/// proximity measures carry over unchanged: they do not depend on the
/// counting scheme (prior-collaboration positivity is identical under
/// both).
pub fn zinb_robustness(
    corpus: &Corpus,
    config: &RunConfig,
    inputs: &RegressionInputs,
) -> Result<RobustnessRun, CliError> {
    let field = config.run.field.as_deref();
    let lag_full = build_network(corpus, config.periods.lag, field, CountingScheme::Full);
    let outcome_full = build_network(
        corpus,
        config.periods.outcome,
        field,
        CountingScheme::Full,
    );
    let mass_full = leadership_mass(&lag_full);
    let dataset = build_design_matrix(
        &outcome_full,
        &lag_full,
        &mass_full,
        &inputs.proximities,
        &inputs.eligible,
        &config.transforms.guards(),
    )?;
    // Full-counting flows are sums of unit weights; rounding only clears
    // accumulated float dust.
    let y = DVector::from_fn(dataset.n(), |r, _| dataset.y[r].round());
    let (x, names) = design_columns(&dataset, LADDER[4])?;
    let nb = fit_nb2(&y, &x, &names)?;
    let zinb = fit_zinb(&y, &x, &names, &x, &names)?;
    let vuong = vuong_test(&zinb, &nb, &y, &x, &x)?;
    Ok(RobustnessRun {
        dataset,
        nb,
        zinb,
        vuong,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::load_config;
    use leadflow_core::synth::{gen_corpus, CorpusConfig};

    fn small_config() -> RunConfig {
        load_config(
            None,
            &[
                "synth.institutions=24".to_string(),
                "synth.papers=900".to_string(),
                "lda.iterations=120".to_string(),
                "lda.burn_in=40".to_string(),
                "lda.thin=5".to_string(),
            ],
        )
        .expect("test config")
    }

    fn small_corpus(config: &RunConfig, seed: u64) -> Corpus {
        let synth: CorpusConfig = config.synth.clone();
        gen_corpus(&synth, seed).expect("synthetic corpus").corpus
    }

    #[test]
    fn pipeline_produces_consistent_inputs() {
        let config = small_config();
        let corpus = small_corpus(&config, 11);
        let inputs = build_regression_inputs(&corpus, &config).expect("pipeline");
        let n_eligible = inputs.eligible.len();
        assert!(n_eligible >= 3, "eligible = {n_eligible}");
        assert_eq!(inputs.dataset.n(), n_eligible * (n_eligible - 1));
        assert_eq!(
            inputs.tally.led_every_year,
            n_eligible
                + inputs.tally.dropped_zero_mass
                + inputs.tally.dropped_zero_vector
                + inputs.tally.dropped_missing_grants
        );
        assert!(inputs.perplexity.is_finite() && inputs.perplexity > 1.0);
        // Responses are non-negative and some dyads are censored at zero.
        assert!(inputs.dataset.y.iter().all(|&v| v >= 0.0));
        assert!(inputs.dataset.y.iter().any(|&v| v == 0.0));
        assert!(inputs.dataset.y.iter().any(|&v| v > 0.0));
    }

    #[test]
    fn ladder_is_nested_and_monotone() {
        let config = small_config();
        let corpus = small_corpus(&config, 12);
        let inputs = build_regression_inputs(&corpus, &config).expect("pipeline");
        let fits = fit_ladder(&inputs.dataset).expect("ladder");
        assert_eq!(fits.len(), 5);
        for (step, pair) in fits.windows(2).enumerate() {
            assert!(
                pair[1].lr_chi2 >= pair[0].lr_chi2 - 1e-6,
                "ladder step {step}: {} -> {}",
                pair[0].lr_chi2,
                pair[1].lr_chi2
            );
        }
        assert_eq!(fits[4].coefficients.len(), 8);
    }

    #[test]
    fn subperiod_chow_runs_on_synthetic_data() {
        let config = small_config();
        let corpus = small_corpus(&config, 13);
        let inputs = build_regression_inputs(&corpus, &config).expect("pipeline");
        let run = subperiod_chow(&corpus, &config, &inputs).expect("chow");
        assert_eq!(run.sub_fits.len(), 2);
        assert_eq!(
            run.pooled.n,
            run.sub_fits[0].1.n + run.sub_fits[1].1.n
        );
        assert!(run.test.statistic >= 0.0);
        assert!((0.0..=1.0).contains(&run.test.p_value));
    }

    #[test]
    fn robustness_pass_fits_count_models() {
        let config = small_config();
        let corpus = small_corpus(&config, 14);
        let inputs = build_regression_inputs(&corpus, &config).expect("pipeline");
        let run = zinb_robustness(&corpus, &config, &inputs).expect("robustness");
        // Full counting yields integer responses.
        assert!(run
            .dataset
            .y
            .iter()
            .all(|&v| (v - v.round()).abs() < 1e-9 && v >= 0.0));
        assert_eq!(run.nb.n, run.zinb.n);
        assert!(run.zinb.loglik >= run.nb.loglik - 1e-6,
            "the mixture can only improve the in-sample likelihood: {} vs {}",
            run.zinb.loglik, run.nb.loglik);
        assert!(run.vuong.statistic.is_finite());
    }
}
