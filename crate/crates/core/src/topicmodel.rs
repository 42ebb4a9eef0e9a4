//! Topic modelling over paper keywords with collapsed Gibbs LDA.
//!
//! Keywords are treated as tokens (one keyword, however many words, is one
//! token). The sampler draws topic assignments from the collapsed
//! conditionals and averages point estimates over thinned post-burn-in
//! sweeps. Institution topic vectors average the document mixtures of the
//! papers an institution appears on; they feed the cognitive proximity
//! measure.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::{Corpus, InstitutionId, PaperId};

#[derive(Debug, Error)]
pub enum LdaError {
    #[error("no documents with keywords")]
    EmptyCorpus,
    #[error("topic count {0} too small (need at least 2)")]
    InvalidTopicCount(usize),
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("iterations ({iterations}) must exceed burn-in ({burn_in})")]
    InvalidIterations { iterations: usize, burn_in: usize },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Sampler configuration. `alpha` defaults to `50 / topics` when unset.
#[derive(Debug, Clone, PartialEq)]
pub struct LdaConfig {
    pub topics: usize,
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
}

impl LdaConfig {
    pub fn new(topics: usize) -> Self {
        LdaConfig {
            topics,
            alpha: None,
            beta: 0.01,
            iterations: 1000,
            burn_in: 200,
            thin: 10,
            seed: 0,
        }
    }

    pub fn resolved_alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.topics as f64)
    }

    fn validate(&self) -> Result<(), LdaError> {
        if self.topics < 2 {
            return Err(LdaError::InvalidTopicCount(self.topics));
        }
        // `is_nan() || <= 0` rather than `!(> 0)`: NaN must be rejected too.
        let alpha = self.resolved_alpha();
        if alpha.is_nan() || alpha <= 0.0 {
            return Err(LdaError::InvalidHyperparameter(format!("alpha = {alpha}")));
        }
        if self.beta.is_nan() || self.beta <= 0.0 {
            return Err(LdaError::InvalidHyperparameter(format!("beta = {}", self.beta)));
        }
        if self.thin == 0 {
            return Err(LdaError::InvalidHyperparameter("thin = 0".to_string()));
        }
        if self.iterations <= self.burn_in {
            return Err(LdaError::InvalidIterations {
                iterations: self.iterations,
                burn_in: self.burn_in,
            });
        }
        Ok(())
    }
}

/// A fitted topic model.
///
/// `topic_word[k]` and `doc_topic[d]` are probability rows (each sums to 1
/// up to rounding). Documents are the keyword-bearing papers of the
/// training corpus in paper-id order; the vocabulary is sorted.
#[derive(Debug, Clone)]
pub struct TopicModel {
    pub topics: usize,
    pub alpha: f64,
    pub beta: f64,
    pub vocabulary: Vec<String>,
    pub doc_ids: Vec<PaperId>,
    pub topic_word: Vec<Vec<f64>>,
    pub doc_topic: Vec<Vec<f64>>,
    /// Number of thinned post-burn-in states averaged into the estimates.
    pub samples: usize,
}

impl TopicModel {
    pub fn vocab_size(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn doc_count(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn doc_index(&self, id: &PaperId) -> Option<usize> {
        self.doc_ids.binary_search(id).ok()
    }

    pub fn word_index(&self, word: &str) -> Option<usize> {
        self.vocabulary
            .binary_search_by(|w| w.as_str().cmp(word))
            .ok()
    }
}

/// Collapsed Gibbs state over tokenized documents.
struct GibbsState {
    topics: usize,
    vocab_size: usize,
    alpha: f64,
    beta: f64,
    /// Word ids per document.
    tokens: Vec<Vec<u32>>,
    /// Topic assignment per token, parallel to `tokens`.
    assignments: Vec<Vec<u16>>,
    doc_topic_counts: Vec<u32>,
    topic_word_counts: Vec<u32>,
    topic_counts: Vec<u32>,
}

impl GibbsState {
    fn init(tokens: Vec<Vec<u32>>, topics: usize, vocab_size: usize, alpha: f64, beta: f64, rng: &mut ChaCha8Rng) -> Self {
        let docs = tokens.len();
        let mut state = GibbsState {
            topics,
            vocab_size,
            alpha,
            beta,
            assignments: tokens.iter().map(|t| vec![0u16; t.len()]).collect(),
            tokens,
            doc_topic_counts: vec![0; docs * topics],
            topic_word_counts: vec![0; topics * vocab_size],
            topic_counts: vec![0; topics],
        };
        for d in 0..docs {
            for t in 0..state.tokens[d].len() {
                let k = rng.random_range(0..topics) as u16;
                state.assignments[d][t] = k;
                state.increment(d, state.tokens[d][t] as usize, k as usize);
            }
        }
        state
    }

    fn increment(&mut self, d: usize, w: usize, k: usize) {
        self.doc_topic_counts[d * self.topics + k] += 1;
        self.topic_word_counts[k * self.vocab_size + w] += 1;
        self.topic_counts[k] += 1;
    }

    fn decrement(&mut self, d: usize, w: usize, k: usize) {
        self.doc_topic_counts[d * self.topics + k] -= 1;
        self.topic_word_counts[k * self.vocab_size + w] -= 1;
        self.topic_counts[k] -= 1;
    }

    fn sweep(&mut self, rng: &mut ChaCha8Rng, weights: &mut Vec<f64>) {
        let v_beta = self.vocab_size as f64 * self.beta;
        for d in 0..self.tokens.len() {
            for t in 0..self.tokens[d].len() {
                let w = self.tokens[d][t] as usize;
                let old = self.assignments[d][t] as usize;
                self.decrement(d, w, old);
                weights.clear();
                let mut total = 0.0;
                for k in 0..self.topics {
                    let p = (self.doc_topic_counts[d * self.topics + k] as f64 + self.alpha)
                        * (self.topic_word_counts[k * self.vocab_size + w] as f64 + self.beta)
                        / (self.topic_counts[k] as f64 + v_beta);
                    total += p;
                    weights.push(p);
                }
                let mut r = rng.random::<f64>() * total;
                let mut new = self.topics - 1;
                for (k, &p) in weights.iter().enumerate() {
                    r -= p;
                    if r <= 0.0 {
                        new = k;
                        break;
                    }
                }
                self.assignments[d][t] = new as u16;
                self.increment(d, w, new);
            }
        }
    }

    /// Current-state point estimates (smoothed relative counts).
    fn estimates(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let v_beta = self.vocab_size as f64 * self.beta;
        let k_alpha = self.topics as f64 * self.alpha;
        let topic_word = (0..self.topics)
            .map(|k| {
                let denom = self.topic_counts[k] as f64 + v_beta;
                (0..self.vocab_size)
                    .map(|w| (self.topic_word_counts[k * self.vocab_size + w] as f64 + self.beta) / denom)
                    .collect()
            })
            .collect();
        let doc_topic = (0..self.tokens.len())
            .map(|d| {
                let nd = self.tokens[d].len() as f64;
                (0..self.topics)
                    .map(|k| (self.doc_topic_counts[d * self.topics + k] as f64 + self.alpha) / (nd + k_alpha))
                    .collect()
            })
            .collect();
        (topic_word, doc_topic)
    }
}

fn tokenize(corpus: &Corpus) -> (Vec<String>, Vec<PaperId>, Vec<Vec<u32>>) {
    let mut vocab: BTreeMap<&str, u32> = BTreeMap::new();
    for paper in corpus.papers.values() {
        for kw in &paper.keywords {
            let next = vocab.len() as u32;
            vocab.entry(kw.as_str()).or_insert(next);
        }
    }
    // Re-index so ids follow sorted order.
    let words: Vec<String> = vocab.keys().map(|w| w.to_string()).collect();
    for (i, (_, id)) in vocab.iter_mut().enumerate() {
        *id = i as u32;
    }
    let mut doc_ids = Vec::new();
    let mut tokens = Vec::new();
    for paper in corpus.papers.values() {
        if paper.keywords.is_empty() {
            continue;
        }
        doc_ids.push(paper.paper_id.clone());
        tokens.push(
            paper
                .keywords
                .iter()
                .map(|kw| vocab[kw.as_str()])
                .collect(),
        );
    }
    (words, doc_ids, tokens)
}

fn model_from(
    config: &LdaConfig,
    vocabulary: Vec<String>,
    doc_ids: Vec<PaperId>,
    topic_word: Vec<Vec<f64>>,
    doc_topic: Vec<Vec<f64>>,
    samples: usize,
) -> TopicModel {
    TopicModel {
        topics: config.topics,
        alpha: config.resolved_alpha(),
        beta: config.beta,
        vocabulary,
        doc_ids,
        topic_word,
        doc_topic,
        samples,
    }
}

/// Fits LDA on the keyword-bearing papers of `corpus`.
///
/// Identical corpus, configuration and seed reproduce the model bit for
/// bit. Estimates average the thinned post-burn-in states; rows of
/// `topic_word` and `doc_topic` are probability distributions.
pub fn fit_lda(corpus: &Corpus, config: &LdaConfig) -> Result<TopicModel, LdaError> {
    config.validate()?;
    let (vocabulary, doc_ids, tokens) = tokenize(corpus);
    if doc_ids.is_empty() {
        return Err(LdaError::EmptyCorpus);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = GibbsState::init(
        tokens,
        config.topics,
        vocabulary.len(),
        config.resolved_alpha(),
        config.beta,
        &mut rng,
    );
    let mut weights = Vec::with_capacity(config.topics);
    let mut phi_sum: Vec<Vec<f64>> = vec![vec![0.0; vocabulary.len()]; config.topics];
    let mut theta_sum: Vec<Vec<f64>> = vec![vec![0.0; config.topics]; doc_ids.len()];
    let mut samples = 0usize;
    for iteration in 1..=config.iterations {
        state.sweep(&mut rng, &mut weights);
        if iteration > config.burn_in && (iteration - config.burn_in).is_multiple_of(config.thin) {
            let (phi, theta) = state.estimates();
            accumulate(&mut phi_sum, &phi);
            accumulate(&mut theta_sum, &theta);
            samples += 1;
        }
    }
    if samples == 0 {
        // Thinning skipped every post-burn-in sweep; fall back to the
        // final state.
        let (phi, theta) = state.estimates();
        return Ok(model_from(config, vocabulary, doc_ids, phi, theta, 1));
    }
    scale(&mut phi_sum, 1.0 / samples as f64);
    scale(&mut theta_sum, 1.0 / samples as f64);
    Ok(model_from(config, vocabulary, doc_ids, phi_sum, theta_sum, samples))
}

fn accumulate(sum: &mut [Vec<f64>], add: &[Vec<f64>]) {
    for (s, a) in sum.iter_mut().zip(add) {
        for (x, y) in s.iter_mut().zip(a) {
            *x += y;
        }
    }
}

fn scale(m: &mut [Vec<f64>], f: f64) {
    for row in m {
        for x in row {
            *x *= f;
        }
    }
}

/// An institution's topic mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct InstitutionVector {
    pub institution_id: InstitutionId,
    pub weights: Vec<f64>,
}

/// Averages document mixtures over each institution's papers.
///
/// Every registry institution gets an entry. Institutions whose papers all
/// lack keywords (or that have no papers) get an all-zero vector, which the
/// cognitive proximity measure rejects explicitly rather than treating as a
/// valid profile.
pub fn institution_vectors(
    corpus: &Corpus,
    model: &TopicModel,
) -> BTreeMap<InstitutionId, InstitutionVector> {
    let mut sums: BTreeMap<InstitutionId, (Vec<f64>, usize)> = corpus
        .registry
        .keys()
        .map(|id| (id.clone(), (vec![0.0; model.topics], 0usize)))
        .collect();
    for paper in corpus.papers.values() {
        let Some(d) = model.doc_index(&paper.paper_id) else {
            continue;
        };
        for inst in paper.institutions() {
            let entry = sums
                .entry(inst.clone())
                .or_insert_with(|| (vec![0.0; model.topics], 0));
            for (s, w) in entry.0.iter_mut().zip(&model.doc_topic[d]) {
                *s += w;
            }
            entry.1 += 1;
        }
    }
    sums.into_iter()
        .map(|(id, (mut weights, count))| {
            if count > 0 {
                for w in &mut weights {
                    *w /= count as f64;
                }
            }
            (
                id.clone(),
                InstitutionVector {
                    institution_id: id,
                    weights,
                },
            )
        })
        .collect()
}

/// Per-token perplexity of `corpus` under `model`.
///
/// Only papers present in the model and words in its vocabulary
/// contribute. Errors when no token can be scored.
pub fn perplexity(model: &TopicModel, corpus: &Corpus) -> Result<f64, LdaError> {
    let mut log_lik = 0.0;
    let mut tokens = 0usize;
    for paper in corpus.papers.values() {
        let Some(d) = model.doc_index(&paper.paper_id) else {
            continue;
        };
        for kw in &paper.keywords {
            let Some(w) = model.word_index(kw) else {
                continue;
            };
            let p: f64 = (0..model.topics)
                .map(|k| model.doc_topic[d][k] * model.topic_word[k][w])
                .sum();
            log_lik += p.ln();
            tokens += 1;
        }
    }
    if tokens == 0 {
        return Err(LdaError::EmptyCorpus);
    }
    Ok((-log_lik / tokens as f64).exp())
}

/// Writes `topic,word,weight` rows, topics then words in order.
pub fn write_topic_word<W: Write>(model: &TopicModel, writer: W) -> Result<(), LdaError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["topic", "word", "weight"])?;
    for (k, row) in model.topic_word.iter().enumerate() {
        for (w, weight) in row.iter().enumerate() {
            wtr.write_record([
                &k.to_string(),
                model.vocabulary[w].as_str(),
                &format!("{weight}"),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Writes `paper_id,topic,weight` rows, documents then topics in order.
pub fn write_doc_topic<W: Write>(model: &TopicModel, writer: W) -> Result<(), LdaError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["paper_id", "topic", "weight"])?;
    for (d, row) in model.doc_topic.iter().enumerate() {
        for (k, weight) in row.iter().enumerate() {
            wtr.write_record([
                model.doc_ids[d].as_str(),
                &k.to_string(),
                &format!("{weight}"),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}
