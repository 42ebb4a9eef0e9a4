//! Synthetic data generators with known ground truth.
//!
//! Three layers of fixtures, all deterministic in a single `u64` seed:
//!
//! * regression samples for the censored-regression estimator
//!   ([`gen_tobit_dataset`]) with configurable regressor distributions,
//!   noise scale and censoring;
//! * count samples for the negative binomial family
//!   ([`gen_count_dataset`]), optionally zero-inflated;
//! * a full bibliographic corpus ([`gen_corpus`]) in which collaboration
//!   choices follow a planted utility over geography, topic similarity,
//!   shared province, prior collaboration, funding gaps and latent
//!   institution mass — so downstream estimates can be checked against
//!   the planted signs.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{
    Affiliation, Corpus, CorpusError, InstitutionId, InstitutionRecord, PaperId, PaperRecord,
    Period,
};
use crate::proximity::geo_distance;

/// Errors from the generators.
#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid generator configuration: {reason}")]
    InvalidConfig { reason: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

fn invalid(reason: impl Into<String>) -> SynthError {
    SynthError::InvalidConfig {
        reason: reason.into(),
    }
}

// ---------------------------------------------------------------------------
// Regression fixtures
// ---------------------------------------------------------------------------

/// Marginal distribution of one synthetic regressor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RegressorKind {
    /// Always one; the intercept column.
    Constant,
    Normal { mean: f64, sd: f64 },
    /// Indicator that is 1 with probability `p`.
    Bernoulli { p: f64 },
    Uniform { lo: f64, hi: f64 },
}

/// One column of a synthetic design together with its true coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorSpec {
    pub name: String,
    pub kind: RegressorKind,
    pub coefficient: f64,
}

impl RegressorSpec {
    pub fn new(name: impl Into<String>, kind: RegressorKind, coefficient: f64) -> Self {
        RegressorSpec {
            name: name.into(),
            kind,
            coefficient,
        }
    }

    pub fn constant(name: impl Into<String>, coefficient: f64) -> Self {
        RegressorSpec::new(name, RegressorKind::Constant, coefficient)
    }
}

/// How the censoring limit of a Tobit sample is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "lowercase")]
pub enum LimitRule {
    /// Censor at a fixed value.
    Fixed { limit: f64 },
    /// Censor at the empirical quantile of the latent response that
    /// leaves approximately `share` of the sample censored.
    Share { share: f64 },
}

/// Specification of a censored-regression sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TobitDesign {
    pub regressors: Vec<RegressorSpec>,
    pub sigma: f64,
    pub limit: LimitRule,
}

/// A generated censored sample with its ground truth.
#[derive(Debug, Clone)]
pub struct TobitSample {
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    pub names: Vec<String>,
    /// True coefficients, aligned with `names`.
    pub truth: Vec<f64>,
    pub sigma: f64,
    pub limit: f64,
    pub censored_share: f64,
}

fn validate_regressors(regressors: &[RegressorSpec]) -> Result<(), SynthError> {
    if regressors.is_empty() {
        return Err(invalid("no regressors"));
    }
    let mut seen = BTreeSet::new();
    for r in regressors {
        if r.name.trim().is_empty() {
            return Err(invalid("empty regressor name"));
        }
        if !seen.insert(r.name.as_str()) {
            return Err(invalid(format!("duplicate regressor name {}", r.name)));
        }
        match r.kind {
            RegressorKind::Normal { sd, .. } if sd <= 0.0 => {
                return Err(invalid(format!("{}: sd must be positive", r.name)));
            }
            RegressorKind::Bernoulli { p } if !(0.0..=1.0).contains(&p) => {
                return Err(invalid(format!("{}: p must lie in [0, 1]", r.name)));
            }
            RegressorKind::Uniform { lo, hi } if lo >= hi => {
                return Err(invalid(format!("{}: lo must be below hi", r.name)));
            }
            _ => {}
        }
    }
    Ok(())
}

fn draw_design(
    regressors: &[RegressorSpec],
    n: usize,
    rng: &mut ChaCha8Rng,
) -> DMatrix<f64> {
    let k = regressors.len();
    let mut x = DMatrix::zeros(n, k);
    for i in 0..n {
        for (j, spec) in regressors.iter().enumerate() {
            x[(i, j)] = match spec.kind {
                RegressorKind::Constant => 1.0,
                RegressorKind::Normal { mean, sd } => {
                    mean + sd * Normal::new(0.0, 1.0).unwrap().sample(rng)
                }
                RegressorKind::Bernoulli { p } => {
                    if rng.random::<f64>() < p {
                        1.0
                    } else {
                        0.0
                    }
                }
                RegressorKind::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            };
        }
    }
    x
}

/// Linear-interpolation quantile of a pre-sorted slice.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() as f64 - 1.0) * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Generates a left-censored Gaussian regression sample.
pub fn gen_tobit_dataset(
    design: &TobitDesign,
    n: usize,
    seed: u64,
) -> Result<TobitSample, SynthError> {
    validate_regressors(&design.regressors)?;
    if n < 2 {
        return Err(invalid("need at least two observations"));
    }
    if design.sigma <= 0.0 {
        return Err(invalid("sigma must be positive"));
    }
    if let LimitRule::Share { share } = design.limit {
        if !(0.0..1.0).contains(&share) {
            return Err(invalid("censored share must lie in [0, 1)"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = draw_design(&design.regressors, n, &mut rng);
    let noise = Normal::new(0.0, design.sigma).unwrap();
    let truth: Vec<f64> = design.regressors.iter().map(|r| r.coefficient).collect();
    let beta = DVector::from_vec(truth.clone());
    let mut latent = &x * &beta;
    for i in 0..n {
        latent[i] += noise.sample(&mut rng);
    }
    let limit = match design.limit {
        LimitRule::Fixed { limit } => limit,
        LimitRule::Share { share } => {
            let mut sorted: Vec<f64> = latent.iter().copied().collect();
            sorted.sort_by(|a, b| a.total_cmp(b));
            quantile(&sorted, share)
        }
    };
    let y = DVector::from_fn(n, |i, _| latent[i].max(limit));
    let censored = y.iter().filter(|&&v| v <= limit).count();
    Ok(TobitSample {
        y,
        x,
        names: design.regressors.iter().map(|r| r.name.clone()).collect(),
        truth,
        sigma: design.sigma,
        limit,
        censored_share: censored as f64 / n as f64,
    })
}

/// A gravity-style censored design: two mass terms, a distance decay,
/// topic similarity, two indicators and a funding gap, with heavy
/// censoring as in sparse dyadic flows.
pub fn gravity_tobit_design() -> TobitDesign {
    TobitDesign {
        regressors: vec![
            RegressorSpec::constant("const", 10.0),
            RegressorSpec::new("ln_LM_i", RegressorKind::Normal { mean: 1.2, sd: 0.9 }, 6.0),
            RegressorSpec::new("ln_LM_j", RegressorKind::Normal { mean: 1.2, sd: 0.9 }, 4.0),
            RegressorSpec::new("ln_geo", RegressorKind::Normal { mean: 6.9, sd: 0.8 }, -3.5),
            RegressorSpec::new(
                "ln_cogn",
                RegressorKind::Normal {
                    mean: -0.9,
                    sd: 0.6,
                },
                4.0,
            ),
            RegressorSpec::new("inst", RegressorKind::Bernoulli { p: 0.06 }, 5.0),
            RegressorSpec::new("soc", RegressorKind::Bernoulli { p: 0.25 }, 6.0),
            RegressorSpec::new("ln_econ", RegressorKind::Normal { mean: 3.2, sd: 1.4 }, 1.5),
        ],
        sigma: 28.0,
        limit: LimitRule::Share { share: 0.55 },
    }
}

/// Count process of a synthetic count sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "process", rename_all = "lowercase")]
pub enum CountProcess {
    Poisson,
    /// NB2: gamma-mixed Poisson with `Var = mu + alpha mu^2`.
    NegBinomial { alpha: f64 },
    /// NB2 with a logit gate for structural zeros; `inflate` holds the
    /// gate coefficients aligned with the regressor list.
    ZeroInflated { alpha: f64, inflate: Vec<f64> },
}

/// Specification of a count sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountDesign {
    pub regressors: Vec<RegressorSpec>,
    pub process: CountProcess,
}

/// A generated count sample with its ground truth.
#[derive(Debug, Clone)]
pub struct CountSample {
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    pub names: Vec<String>,
    pub truth: Vec<f64>,
    /// True gate coefficients (zero-inflated process only).
    pub inflate_truth: Option<Vec<f64>>,
    /// True dispersion (negative binomial processes only).
    pub alpha: Option<f64>,
    pub zero_share: f64,
}

fn nb_draw(mu: f64, r: f64, rng: &mut ChaCha8Rng) -> f64 {
    let lambda = Gamma::new(r, mu / r).unwrap().sample(rng);
    Poisson::new(lambda.max(1e-12)).unwrap().sample(rng)
}

/// Generates a count-regression sample from the configured process.
pub fn gen_count_dataset(
    design: &CountDesign,
    n: usize,
    seed: u64,
) -> Result<CountSample, SynthError> {
    validate_regressors(&design.regressors)?;
    if n < 2 {
        return Err(invalid("need at least two observations"));
    }
    match &design.process {
        CountProcess::NegBinomial { alpha } | CountProcess::ZeroInflated { alpha, .. }
            if *alpha <= 0.0 =>
        {
            return Err(invalid("alpha must be positive"));
        }
        CountProcess::ZeroInflated { inflate, .. }
            if inflate.len() != design.regressors.len() =>
        {
            return Err(invalid(
                "inflate coefficients must align with the regressors",
            ));
        }
        _ => {}
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = draw_design(&design.regressors, n, &mut rng);
    let truth: Vec<f64> = design.regressors.iter().map(|r| r.coefficient).collect();
    let beta = DVector::from_vec(truth.clone());
    let eta = &x * &beta;
    let mut y = DVector::zeros(n);
    let mut inflate_truth = None;
    let mut alpha_out = None;
    match &design.process {
        CountProcess::Poisson => {
            for i in 0..n {
                y[i] = Poisson::new(eta[i].exp().max(1e-12)).unwrap().sample(&mut rng);
            }
        }
        CountProcess::NegBinomial { alpha } => {
            alpha_out = Some(*alpha);
            let r = 1.0 / alpha;
            for i in 0..n {
                y[i] = nb_draw(eta[i].exp(), r, &mut rng);
            }
        }
        CountProcess::ZeroInflated { alpha, inflate } => {
            alpha_out = Some(*alpha);
            inflate_truth = Some(inflate.clone());
            let gamma = DVector::from_vec(inflate.clone());
            let v = &x * &gamma;
            let r = 1.0 / alpha;
            for i in 0..n {
                let pi = 1.0 / (1.0 + (-v[i]).exp());
                if rng.random::<f64>() < pi {
                    y[i] = 0.0;
                } else {
                    y[i] = nb_draw(eta[i].exp(), r, &mut rng);
                }
            }
        }
    }
    let zeros = y.iter().filter(|&&v| v == 0.0).count();
    Ok(CountSample {
        y,
        x,
        names: design.regressors.iter().map(|r| r.name.clone()).collect(),
        truth,
        inflate_truth,
        alpha: alpha_out,
        zero_share: zeros as f64 / n as f64,
    })
}

/// A gravity-style count design matching [`gravity_tobit_design`] in
/// shape; `zero_inflated` switches between plain NB2 and ZINB.
pub fn gravity_count_design(zero_inflated: bool) -> CountDesign {
    let regressors = vec![
        RegressorSpec::constant("const", 2.5),
        RegressorSpec::new("ln_LM_i", RegressorKind::Normal { mean: 1.2, sd: 0.9 }, 0.5),
        RegressorSpec::new("ln_LM_j", RegressorKind::Normal { mean: 1.2, sd: 0.9 }, 0.35),
        RegressorSpec::new("ln_geo", RegressorKind::Normal { mean: 6.9, sd: 0.8 }, -0.4),
        RegressorSpec::new(
            "ln_cogn",
            RegressorKind::Normal {
                mean: -0.9,
                sd: 0.6,
            },
            0.6,
        ),
        RegressorSpec::new("inst", RegressorKind::Bernoulli { p: 0.06 }, 0.5),
        RegressorSpec::new("soc", RegressorKind::Bernoulli { p: 0.25 }, 0.6),
        RegressorSpec::new("ln_econ", RegressorKind::Normal { mean: 3.2, sd: 1.4 }, 0.2),
    ];
    let process = if zero_inflated {
        CountProcess::ZeroInflated {
            alpha: 0.8,
            inflate: vec![-2.5, 0.0, 0.0, 0.3, 0.0, -0.5, -1.0, 0.0],
        }
    } else {
        CountProcess::NegBinomial { alpha: 0.8 }
    };
    CountDesign {
        regressors,
        process,
    }
}

// ---------------------------------------------------------------------------
// Corpus fixture
// ---------------------------------------------------------------------------

/// Planted utility weights steering who collaborates with whom.
///
/// For a candidate participant `j` given leader `i`, the selection weight
/// is `exp(u)` with
/// `u = geo * ln(max(d_ij_km, 1)) + cognitive * cos(topic_i, topic_j)
///    + institutional * same_province + social * prior_collaboration
///    + economic * ln(1 + |grants_i - grants_j|) + mass * ln(m_j)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UtilityWeights {
    pub geo: f64,
    pub cognitive: f64,
    pub institutional: f64,
    pub social: f64,
    pub economic: f64,
    pub mass: f64,
}

impl Default for UtilityWeights {
    fn default() -> Self {
        UtilityWeights {
            geo: -0.8,
            cognitive: 1.5,
            institutional: 0.8,
            social: 0.9,
            economic: 0.3,
            mass: 1.0,
        }
    }
}

/// Configuration of a synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub institutions: usize,
    pub papers: usize,
    /// Publication years, inclusive.
    pub years: Period,
    /// Field tag carried by in-field papers.
    pub field: String,
    /// Share of papers tagged with an unrelated field.
    pub off_field_share: f64,
    /// Number of planted topics.
    pub topics: usize,
    /// Vocabulary size per topic.
    pub vocab_per_topic: usize,
    pub keywords_per_paper: usize,
    /// Mean number of participants beyond the leader (Poisson).
    pub mean_extra_participants: f64,
    pub max_participants: usize,
    /// Probability that a multi-institution paper carries a second leader.
    pub multi_leader_share: f64,
    /// Grant-count windows carried by the registry.
    pub nsfc_periods: Vec<Period>,
    /// If set, the prior-collaboration channel stops accumulating after this
    /// year: papers published in later years see the collaboration set as it
    /// stood at the end of this year. This makes the social driver coincide
    /// with a lag-window collaboration indicator, so its configured weight is
    /// recoverable from the later years alone. `None` keeps the running set.
    pub social_freeze_year: Option<i32>,
    pub utility: UtilityWeights,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            institutions: 40,
            papers: 4000,
            years: Period::new(2006, 2015).expect("static period"),
            field: "materials".to_string(),
            off_field_share: 0.05,
            topics: 5,
            vocab_per_topic: 40,
            keywords_per_paper: 6,
            mean_extra_participants: 1.4,
            max_participants: 8,
            multi_leader_share: 0.03,
            nsfc_periods: vec![
                Period::new(2006, 2010).expect("static period"),
                Period::new(2011, 2015).expect("static period"),
            ],
            social_freeze_year: Some(2010),
            utility: UtilityWeights::default(),
        }
    }
}

/// Ground truth behind a generated corpus.
#[derive(Debug, Clone, Serialize)]
pub struct CorpusTruth {
    pub utility: UtilityWeights,
    /// Latent institution mass (leadership propensity).
    pub latent_mass: Vec<(InstitutionId, f64)>,
    /// Planted topic mixture per institution.
    pub topic_mixtures: Vec<(InstitutionId, Vec<f64>)>,
}

/// A generated corpus together with its ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    pub truth: CorpusTruth,
}

/// Provincial anchors used to place institutions: (province, lat, lon).
const CAPITALS: [(&str, f64, f64); 15] = [
    ("beijing", 39.904, 116.407),
    ("shanghai", 31.230, 121.474),
    ("jiangsu", 32.060, 118.797),
    ("guangdong", 23.129, 113.264),
    ("hubei", 30.593, 114.306),
    ("shaanxi", 34.341, 108.940),
    ("sichuan", 30.573, 104.067),
    ("liaoning", 41.806, 123.431),
    ("shandong", 36.651, 117.120),
    ("zhejiang", 30.274, 120.155),
    ("tianjin", 39.125, 117.199),
    ("heilongjiang", 45.803, 126.535),
    ("gansu", 36.061, 103.834),
    ("jilin", 43.882, 125.323),
    ("anhui", 31.821, 117.227),
];

struct SynthInstitution {
    id: InstitutionId,
    province: String,
    latitude: f64,
    longitude: f64,
    mass: f64,
    mixture: Vec<f64>,
    grants: Vec<u64>, // aligned with config.nsfc_periods
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

fn validate_corpus_config(config: &CorpusConfig) -> Result<(), SynthError> {
    if config.institutions < 2 {
        return Err(invalid("need at least two institutions"));
    }
    if config.papers == 0 {
        return Err(invalid("need at least one paper"));
    }
    if config.topics == 0 || config.vocab_per_topic == 0 {
        return Err(invalid("topics and vocabulary must be non-empty"));
    }
    if config.keywords_per_paper == 0 {
        return Err(invalid("papers need at least one keyword"));
    }
    if !(0.0..=1.0).contains(&config.off_field_share)
        || !(0.0..=1.0).contains(&config.multi_leader_share)
    {
        return Err(invalid("shares must lie in [0, 1]"));
    }
    if config.mean_extra_participants < 0.0 {
        return Err(invalid("mean_extra_participants must be non-negative"));
    }
    if config.max_participants == 0 {
        return Err(invalid("max_participants must be positive"));
    }
    if config.nsfc_periods.is_empty() {
        return Err(invalid("need at least one grant window"));
    }
    if config.field.trim().is_empty() {
        return Err(invalid("field tag must be non-empty"));
    }
    Ok(())
}

fn gen_institutions(config: &CorpusConfig, rng: &mut ChaCha8Rng) -> Vec<SynthInstitution> {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let width = config.institutions.to_string().len().max(4);
    (0..config.institutions)
        .map(|idx| {
            let (province, base_lat, base_lon) = CAPITALS[idx % CAPITALS.len()];
            let latitude = (base_lat + 1.2 * normal.sample(rng)).clamp(-89.0, 89.0);
            let longitude = (base_lon + 1.2 * normal.sample(rng)).clamp(-179.0, 179.0);
            // A single latent level drives both funding and mass, as
            // strong institutions tend to hold both.
            let level = normal.sample(rng);
            let mass = (0.6 * level + 0.4 * normal.sample(rng)).exp();
            let grants = config
                .nsfc_periods
                .iter()
                .map(|_| {
                    let ln_count = 2.8 + 0.9 * level + 0.4 * normal.sample(rng);
                    ln_count.exp().round().max(0.0) as u64
                })
                .collect();
            let dominant = idx % config.topics;
            let spread = if config.topics > 1 {
                0.25 / (config.topics - 1) as f64
            } else {
                0.0
            };
            let mixture = (0..config.topics)
                .map(|k| if k == dominant { 0.75 } else { spread })
                .collect();
            SynthInstitution {
                id: InstitutionId::new(format!("I{idx:0width$}")),
                province: province.to_string(),
                latitude,
                longitude,
                mass,
                mixture,
                grants,
            }
        })
        .collect()
}

/// Index of the grant window containing `year`, defaulting to the first.
fn grant_window(periods: &[Period], year: i32) -> usize {
    periods
        .iter()
        .position(|p| p.contains(year))
        .unwrap_or(0)
}

/// Generates a corpus whose collaboration patterns follow the configured
/// utility. Papers are generated year by year so that "prior
/// collaboration" is chronologically meaningful.
pub fn gen_corpus(config: &CorpusConfig, seed: u64) -> Result<SyntheticCorpus, SynthError> {
    validate_corpus_config(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let institutions = gen_institutions(config, &mut rng);
    let n_inst = institutions.len();
    let w = &config.utility;

    // Pairwise static utilities (everything except prior collaboration),
    // indexed leader -> candidate.
    let mut static_utility = vec![0.0f64; n_inst * n_inst];
    let mut window_gap_term = vec![vec![0.0f64; n_inst * n_inst]; config.nsfc_periods.len()];
    for i in 0..n_inst {
        for j in 0..n_inst {
            if i == j {
                continue;
            }
            let a = &institutions[i];
            let b = &institutions[j];
            let d = geo_distance(a.latitude, a.longitude, b.latitude, b.longitude)
                .expect("generated coordinates are in range");
            let mut u = w.geo * d.max(1.0).ln();
            u += w.cognitive * cosine(&a.mixture, &b.mixture);
            if a.province == b.province {
                u += w.institutional;
            }
            u += w.mass * b.mass.ln();
            static_utility[i * n_inst + j] = u;
            for (widx, term) in window_gap_term.iter_mut().enumerate() {
                let gap = a.grants[widx].abs_diff(b.grants[widx]);
                term[i * n_inst + j] = w.economic * (1.0 + gap as f64).ln();
            }
        }
    }

    let poisson = Poisson::new(config.mean_extra_participants.max(1e-9)).unwrap();
    let year_count = config.years.year_count();
    let per_year = config.papers / year_count;
    let remainder = config.papers % year_count;
    let mass_total: f64 = institutions.iter().map(|inst| inst.mass).sum();
    let mut collaborated: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut frozen: Option<BTreeSet<(usize, usize)>> = None;
    let mut papers = Vec::with_capacity(config.papers);
    let id_width = config.papers.to_string().len().max(6);
    let mut paper_idx = 0usize;

    for (year_offset, year) in config.years.years().enumerate() {
        if frozen.is_none() && config.social_freeze_year.is_some_and(|cut| year > cut) {
            frozen = Some(collaborated.clone());
        }
        let quota = per_year + usize::from(year_offset < remainder);
        for _ in 0..quota {
            // Leader drawn proportional to latent mass.
            let mut r = rng.random::<f64>() * mass_total;
            let mut leader = n_inst - 1;
            for (idx, inst) in institutions.iter().enumerate() {
                if r < inst.mass {
                    leader = idx;
                    break;
                }
                r -= inst.mass;
            }

            let extra = (poisson.sample(&mut rng) as usize)
                .min(config.max_participants.saturating_sub(1))
                .min(n_inst - 1);
            let window = grant_window(&config.nsfc_periods, year);
            let mut chosen: Vec<usize> = Vec::with_capacity(extra);
            if extra > 0 {
                let social_set = frozen.as_ref().unwrap_or(&collaborated);
                let mut candidates: Vec<(usize, f64)> = (0..n_inst)
                    .filter(|&j| j != leader)
                    .map(|j| {
                        let key = if leader < j {
                            (leader, j)
                        } else {
                            (j, leader)
                        };
                        let mut u = static_utility[leader * n_inst + j]
                            + window_gap_term[window][leader * n_inst + j];
                        if social_set.contains(&key) {
                            u += w.social;
                        }
                        (j, u.exp())
                    })
                    .collect();
                for _ in 0..extra {
                    let total: f64 = candidates.iter().map(|(_, wt)| wt).sum();
                    let mut r = rng.random::<f64>() * total;
                    let mut pick = candidates.len() - 1;
                    for (pos, (_, wt)) in candidates.iter().enumerate() {
                        if r < *wt {
                            pick = pos;
                            break;
                        }
                        r -= wt;
                    }
                    chosen.push(candidates.swap_remove(pick).0);
                }
            }

            let mut affiliations = vec![Affiliation {
                institution_id: institutions[leader].id.clone(),
                is_leading: true,
            }];
            for (pos, &j) in chosen.iter().enumerate() {
                let co_leads = pos == 0 && rng.random::<f64>() < config.multi_leader_share;
                affiliations.push(Affiliation {
                    institution_id: institutions[j].id.clone(),
                    is_leading: co_leads,
                });
            }

            // Keywords from the leader's planted mixture.
            let mixture = &institutions[leader].mixture;
            let keywords = (0..config.keywords_per_paper)
                .map(|_| {
                    let mut r = rng.random::<f64>();
                    let mut topic = config.topics - 1;
                    for (k, &p) in mixture.iter().enumerate() {
                        if r < p {
                            topic = k;
                            break;
                        }
                        r -= p;
                    }
                    let word = rng.random_range(0..config.vocab_per_topic);
                    format!("t{topic:02}w{word:03}")
                })
                .collect();

            let field = if rng.random::<f64>() < config.off_field_share {
                "unrelated"
            } else {
                config.field.as_str()
            };
            papers.push(PaperRecord::new(
                PaperId::new(format!("P{paper_idx:0id_width$}")),
                year,
                field,
                keywords,
                affiliations,
            )?);
            paper_idx += 1;

            // Record collaborations for the social channel.
            let last = papers.last().expect("just pushed");
            let members: Vec<usize> = last
                .institutions()
                .map(|id| {
                    institutions
                        .iter()
                        .position(|inst| &inst.id == id)
                        .expect("generated id")
                })
                .collect();
            for a in 0..members.len() {
                for b in (a + 1)..members.len() {
                    let key = if members[a] < members[b] {
                        (members[a], members[b])
                    } else {
                        (members[b], members[a])
                    };
                    collaborated.insert(key);
                }
            }
        }
    }

    let registry: Vec<InstitutionRecord> = institutions
        .iter()
        .map(|inst| InstitutionRecord {
            institution_id: inst.id.clone(),
            display_name: format!("Institute {}", inst.id.as_str()),
            province: inst.province.clone(),
            latitude: inst.latitude,
            longitude: inst.longitude,
            nsfc_counts: config
                .nsfc_periods
                .iter()
                .zip(&inst.grants)
                .map(|(p, &c)| (*p, c))
                .collect(),
        })
        .collect();

    let assembled = crate::corpus::assemble_corpus(
        papers,
        registry,
        crate::corpus::IngestMode::Strict,
    )?;
    let truth = CorpusTruth {
        utility: *w,
        latent_mass: institutions
            .iter()
            .map(|inst| (inst.id.clone(), inst.mass))
            .collect(),
        topic_mixtures: institutions
            .iter()
            .map(|inst| (inst.id.clone(), inst.mixture.clone()))
            .collect(),
    };
    Ok(SyntheticCorpus {
        corpus: assembled.corpus,
        truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::eligible_institutions;

    #[test]
    fn tobit_sample_hits_the_censoring_target() {
        let design = gravity_tobit_design();
        let sample = gen_tobit_dataset(&design, 4000, 11).unwrap();
        assert!(
            (sample.censored_share - 0.55).abs() < 0.02,
            "share {}",
            sample.censored_share
        );
        assert_eq!(sample.names.len(), 8);
        assert_eq!(sample.truth.len(), 8);
        // Censoring respected.
        assert!(sample.y.iter().all(|&v| v >= sample.limit));
    }

    #[test]
    fn tobit_sample_is_deterministic_in_the_seed() {
        let design = gravity_tobit_design();
        let a = gen_tobit_dataset(&design, 200, 5).unwrap();
        let b = gen_tobit_dataset(&design, 200, 5).unwrap();
        let c = gen_tobit_dataset(&design, 200, 6).unwrap();
        assert_eq!(a.y, b.y);
        assert_eq!(a.x, b.x);
        assert_ne!(a.y, c.y);
    }

    #[test]
    fn fixed_limit_is_respected() {
        let design = TobitDesign {
            regressors: vec![
                RegressorSpec::constant("const", 0.0),
                RegressorSpec::new("x1", RegressorKind::Normal { mean: 0.0, sd: 1.0 }, 1.0),
            ],
            sigma: 1.0,
            limit: LimitRule::Fixed { limit: 0.0 },
        };
        let sample = gen_tobit_dataset(&design, 1000, 3).unwrap();
        assert_eq!(sample.limit, 0.0);
        // Symmetric latent response: roughly half censored.
        assert!((sample.censored_share - 0.5).abs() < 0.06);
    }

    #[test]
    fn count_sample_is_integer_valued_and_zero_inflation_adds_zeros() {
        let nb = gen_count_dataset(&gravity_count_design(false), 3000, 7).unwrap();
        let zi = gen_count_dataset(&gravity_count_design(true), 3000, 7).unwrap();
        assert!(nb.y.iter().all(|v| v.fract() == 0.0 && *v >= 0.0));
        assert!(zi.y.iter().all(|v| v.fract() == 0.0 && *v >= 0.0));
        assert!(
            zi.zero_share > nb.zero_share + 0.1,
            "zi {} vs nb {}",
            zi.zero_share,
            nb.zero_share
        );
        assert!(zi.inflate_truth.is_some());
        assert_eq!(zi.alpha, Some(0.8));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut design = gravity_tobit_design();
        design.sigma = -1.0;
        assert!(gen_tobit_dataset(&design, 100, 1).is_err());
        let mut design = gravity_tobit_design();
        design.regressors[1].name = "const".into();
        assert!(gen_tobit_dataset(&design, 100, 1).is_err());
        let mut count = gravity_count_design(true);
        if let CountProcess::ZeroInflated { inflate, .. } = &mut count.process {
            inflate.pop();
        }
        assert!(gen_count_dataset(&count, 100, 1).is_err());
    }

    #[test]
    fn corpus_has_expected_shape() {
        let config = CorpusConfig {
            institutions: 20,
            papers: 600,
            ..CorpusConfig::default()
        };
        let synth = gen_corpus(&config, 42).unwrap();
        let corpus = &synth.corpus;
        assert_eq!(corpus.paper_count(), 600);
        assert_eq!(corpus.registry.len(), 20);
        for paper in corpus.papers() {
            assert!(config.years.contains(paper.year));
            assert!(paper.leading_count() >= 1);
            assert_eq!(paper.keywords.len(), config.keywords_per_paper);
            assert!(paper.field == config.field || paper.field == "unrelated");
        }
        // Multi-institution papers dominate.
        let multi = corpus
            .papers()
            .filter(|p| p.institution_count() >= 2)
            .count();
        assert!(multi as f64 > 0.5 * 600.0, "multi {multi}");
        // The outcome window supports an eligible set.
        let outcome = Period::new(2011, 2015).unwrap();
        assert!(!eligible_institutions(corpus, outcome).is_empty());
    }

    #[test]
    fn corpus_is_deterministic_in_the_seed() {
        let config = CorpusConfig {
            institutions: 12,
            papers: 150,
            ..CorpusConfig::default()
        };
        let a = gen_corpus(&config, 9).unwrap();
        let b = gen_corpus(&config, 9).unwrap();
        let c = gen_corpus(&config, 10).unwrap();
        let serialize = |corpus: &Corpus| {
            let mut papers = Vec::new();
            crate::corpus::write_papers(corpus, &mut papers).unwrap();
            let mut registry = Vec::new();
            crate::corpus::write_registry(corpus, &mut registry).unwrap();
            (papers, registry)
        };
        assert_eq!(serialize(&a.corpus), serialize(&b.corpus));
        assert_ne!(serialize(&a.corpus).0, serialize(&c.corpus).0);
    }

    #[test]
    fn same_province_pairs_collaborate_more_often() {
        // The institutional channel should raise the rate of same-province
        // collaborations above the rate expected from pair availability.
        let config = CorpusConfig {
            institutions: 30,
            papers: 2000,
            ..CorpusConfig::default()
        };
        let synth = gen_corpus(&config, 17).unwrap();
        let corpus = &synth.corpus;
        let mut same = 0usize;
        let mut cross = 0usize;
        for paper in corpus.papers() {
            let provs: Vec<&str> = paper
                .institutions()
                .map(|id| corpus.registry[id].province.as_str())
                .collect();
            for a in 0..provs.len() {
                for b in (a + 1)..provs.len() {
                    if provs[a] == provs[b] {
                        same += 1;
                    } else {
                        cross += 1;
                    }
                }
            }
        }
        // 30 institutions over 15 provinces: exactly one same-province
        // partner out of 29 candidates, so the baseline same share is
        // 1/29. The planted bonus should lift it well above that.
        let share = same as f64 / (same + cross) as f64;
        assert!(share > 2.0 / 29.0, "same-province share {share}");
    }

    #[test]
    fn social_channel_follows_the_frozen_lag_window() {
        // With the collaboration set frozen after 2010, outcome-year papers
        // should favour partners from the 2006-2010 window. Removing the
        // social weight removes that preference, isolating the channel.
        // Keep the pair space sparse (many institutions, few papers) so the
        // lag window does not cover every pair by sheer volume.
        let make = |social: f64| CorpusConfig {
            institutions: 40,
            papers: 900,
            mean_extra_participants: 1.0,
            social_freeze_year: Some(2010),
            utility: UtilityWeights {
                social,
                ..UtilityWeights::default()
            },
            ..CorpusConfig::default()
        };
        let lag_share = |corpus: &Corpus| {
            let mut lag_pairs: BTreeSet<(InstitutionId, InstitutionId)> = BTreeSet::new();
            for paper in corpus.papers().filter(|p| p.year <= 2010) {
                let ids: Vec<InstitutionId> = paper.institutions().cloned().collect();
                for a in 0..ids.len() {
                    for b in (a + 1)..ids.len() {
                        let key = if ids[a] <= ids[b] {
                            (ids[a].clone(), ids[b].clone())
                        } else {
                            (ids[b].clone(), ids[a].clone())
                        };
                        lag_pairs.insert(key);
                    }
                }
            }
            let mut hits = 0usize;
            let mut total = 0usize;
            for paper in corpus.papers().filter(|p| p.year > 2010) {
                let ids: Vec<InstitutionId> = paper.institutions().cloned().collect();
                for a in 0..ids.len() {
                    for b in (a + 1)..ids.len() {
                        let key = if ids[a] <= ids[b] {
                            (ids[a].clone(), ids[b].clone())
                        } else {
                            (ids[b].clone(), ids[a].clone())
                        };
                        total += 1;
                        hits += usize::from(lag_pairs.contains(&key));
                    }
                }
            }
            hits as f64 / total as f64
        };
        let with_social = gen_corpus(&make(2.0), 21).unwrap();
        let without_social = gen_corpus(&make(0.0), 21).unwrap();
        let on = lag_share(&with_social.corpus);
        let off = lag_share(&without_social.corpus);
        assert!(on > off + 0.05, "lag-pair share {on:.3} vs baseline {off:.3}");

        // The running-set variant still generates.
        let running = CorpusConfig {
            social_freeze_year: None,
            ..make(1.0)
        };
        assert_eq!(gen_corpus(&running, 4).unwrap().corpus.paper_count(), 900);
    }

    #[test]
    fn utility_weights_shape_collaboration_distance() {
        // Stronger distance decay should shorten realized collaborations.
        let near_config = CorpusConfig {
            institutions: 24,
            papers: 800,
            utility: UtilityWeights {
                geo: -2.0,
                ..UtilityWeights::default()
            },
            ..CorpusConfig::default()
        };
        let far_config = CorpusConfig {
            utility: UtilityWeights {
                geo: 0.0,
                ..UtilityWeights::default()
            },
            ..near_config.clone()
        };
        let mean_distance = |corpus: &Corpus| {
            let mut total = 0.0;
            let mut count = 0usize;
            for paper in corpus.papers() {
                let coords: Vec<(f64, f64)> = paper
                    .institutions()
                    .map(|id| {
                        let r = &corpus.registry[id];
                        (r.latitude, r.longitude)
                    })
                    .collect();
                for a in 0..coords.len() {
                    for b in (a + 1)..coords.len() {
                        total += geo_distance(coords[a].0, coords[a].1, coords[b].0, coords[b].1)
                            .unwrap();
                        count += 1;
                    }
                }
            }
            total / count as f64
        };
        let near = gen_corpus(&near_config, 3).unwrap();
        let far = gen_corpus(&far_config, 3).unwrap();
        let d_near = mean_distance(&near.corpus);
        let d_far = mean_distance(&far.corpus);
        assert!(
            d_near < 0.8 * d_far,
            "near {d_near:.0} km vs far {d_far:.0} km"
        );
    }
}
