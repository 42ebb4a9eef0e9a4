//! Declarative run configuration.
//!
//! A run is described by a single TOML file; every key can be overridden on
//! the command line with `--set key=value` (dotted paths). Defaults are
//! sized so that `synth` followed by `fit` works out of the box on the
//! bundled generator; real corpora will want their own `[periods]`, `[lda]`
//! and `[inputs]` sections.

use crate::error::CliError;
use leadflow_core::corpus::{IngestMode, Period};
use leadflow_core::leadership::CountingScheme;
use leadflow_core::proximity::TransformGuards;
use leadflow_core::synth::CorpusConfig;
use leadflow_core::topicmodel::LdaConfig;
use serde::Deserialize;
use std::fs;
use std::path::{Path, PathBuf};

/// Complete configuration of one CLI run.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub inputs: InputsSection,
    pub run: RunSection,
    pub periods: PeriodsSection,
    /// Outcome sub-windows compared by the structural-break test.
    pub subperiods: Vec<Period>,
    pub lda: LdaSection,
    pub transforms: TransformsSection,
    pub models: ModelsSection,
    pub synth: CorpusConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            inputs: InputsSection::default(),
            run: RunSection::default(),
            periods: PeriodsSection::default(),
            subperiods: vec![
                Period::new(2011, 2012).expect("static period"),
                Period::new(2014, 2015).expect("static period"),
            ],
            lda: LdaSection::default(),
            transforms: TransformsSection::default(),
            models: ModelsSection::default(),
            synth: CorpusConfig::default(),
        }
    }
}

/// Input file locations.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputsSection {
    pub papers: PathBuf,
    pub registry: PathBuf,
}

impl Default for InputsSection {
    fn default() -> Self {
        InputsSection {
            papers: PathBuf::from("papers.jsonl"),
            registry: PathBuf::from("registry.csv"),
        }
    }
}

/// Counting scheme selector (config-file spelling).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Counting {
    Fractional,
    Full,
}

impl From<Counting> for CountingScheme {
    fn from(c: Counting) -> CountingScheme {
        match c {
            Counting::Fractional => CountingScheme::Fractional,
            Counting::Full => CountingScheme::Full,
        }
    }
}

/// Global run options.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Restrict the corpus to one field tag; `None` keeps every field.
    pub field: Option<String>,
    pub counting: Counting,
    /// Master seed for the topic model and the synthetic generator.
    pub seed: u64,
    /// Strict ingestion aborts on the first bad record; lenient skips it.
    pub strict: bool,
    /// Rows kept in the ranking tables.
    pub top_k: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            field: None,
            counting: Counting::Fractional,
            seed: 0,
            strict: true,
            top_k: 15,
        }
    }
}

impl RunSection {
    pub fn ingest_mode(&self) -> IngestMode {
        if self.strict {
            IngestMode::Strict
        } else {
            IngestMode::Lenient
        }
    }
}

/// The lagged regressor window and the outcome window.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PeriodsSection {
    pub lag: Period,
    pub outcome: Period,
}

impl Default for PeriodsSection {
    fn default() -> Self {
        PeriodsSection {
            lag: Period::new(2006, 2010).expect("static period"),
            outcome: Period::new(2011, 2015).expect("static period"),
        }
    }
}

/// Topic-model settings.
///
/// Defaults suit the bundled generator's short keyword lists: few topics
/// and a small document-topic prior. Long documents tolerate the classic
/// `alpha = 50/K` (leave `alpha` unset to get it), but with half a dozen
/// tokens per document that prior swamps the data.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdaSection {
    pub topics: usize,
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
}

impl Default for LdaSection {
    fn default() -> Self {
        LdaSection {
            topics: 5,
            alpha: Some(0.25),
            beta: 0.01,
            iterations: 400,
            burn_in: 100,
            thin: 10,
        }
    }
}

impl LdaSection {
    pub fn to_lda_config(&self, seed: u64) -> LdaConfig {
        LdaConfig {
            topics: self.topics,
            alpha: self.alpha,
            beta: self.beta,
            iterations: self.iterations,
            burn_in: self.burn_in,
            thin: self.thin,
            seed,
        }
    }
}

/// Floors applied before logarithms in the design matrix.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransformsSection {
    pub geo_floor_km: f64,
    pub cogn_floor: f64,
}

impl Default for TransformsSection {
    fn default() -> Self {
        let g = TransformGuards::default();
        TransformsSection {
            geo_floor_km: g.geo_floor_km,
            cogn_floor: g.cogn_floor,
        }
    }
}

impl TransformsSection {
    pub fn guards(&self) -> TransformGuards {
        TransformGuards {
            geo_floor_km: self.geo_floor_km,
            cogn_floor: self.cogn_floor,
        }
    }
}

/// Which estimations `fit` runs.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelsSection {
    /// Fit the five nested censored models instead of only the full one.
    pub ladder: bool,
    /// Also fit least squares on the full column set.
    pub ols_baseline: bool,
    /// Sub-period fits plus the structural-break test.
    pub chow: bool,
    /// Count-model robustness pass (full counting, NB and ZINB plus the
    /// model-comparison test).
    pub zinb: bool,
}

impl Default for ModelsSection {
    fn default() -> Self {
        ModelsSection {
            ladder: true,
            ols_baseline: true,
            chow: true,
            zinb: true,
        }
    }
}

impl RunConfig {
    /// Checks cross-field invariants that serde cannot express.
    pub fn validate(&self) -> Result<(), CliError> {
        let p = &self.periods;
        if p.lag.end() >= p.outcome.start() {
            return Err(CliError::usage(format!(
                "lag period {} must end before the outcome period {} starts",
                p.lag, p.outcome
            )));
        }
        for sp in &self.subperiods {
            if sp.start() < p.outcome.start() || sp.end() > p.outcome.end() {
                return Err(CliError::usage(format!(
                    "subperiod {sp} lies outside the outcome period {}",
                    p.outcome
                )));
            }
        }
        let mut sorted = self.subperiods.clone();
        sorted.sort_by_key(|s| (s.start(), s.end()));
        for pair in sorted.windows(2) {
            if pair[1].start() <= pair[0].end() {
                return Err(CliError::usage(format!(
                    "subperiods {} and {} overlap",
                    pair[0], pair[1]
                )));
            }
        }
        if self.models.chow && self.subperiods.len() != 2 {
            return Err(CliError::usage(format!(
                "the structural-break test needs exactly two subperiods, found {}",
                self.subperiods.len()
            )));
        }
        if self.run.top_k == 0 {
            return Err(CliError::usage("run.top_k must be at least 1"));
        }
        if self.lda.topics < 2 {
            return Err(CliError::usage("lda.topics must be at least 2"));
        }
        if self.lda.iterations <= self.lda.burn_in {
            return Err(CliError::usage(
                "lda.iterations must exceed lda.burn_in",
            ));
        }
        if self.lda.thin == 0 {
            return Err(CliError::usage("lda.thin must be at least 1"));
        }
        // `is_nan() || <= 0` rather than `!(> 0)`: NaN must be rejected too.
        if let Some(a) = self.lda.alpha {
            if a.is_nan() || a <= 0.0 {
                return Err(CliError::usage("lda.alpha must be positive"));
            }
        }
        if self.lda.beta.is_nan() || self.lda.beta <= 0.0 {
            return Err(CliError::usage("lda.beta must be positive"));
        }
        if self.transforms.geo_floor_km.is_nan() || self.transforms.geo_floor_km <= 0.0 {
            return Err(CliError::usage("transforms.geo_floor_km must be positive"));
        }
        if self.transforms.cogn_floor.is_nan() || self.transforms.cogn_floor <= 0.0 {
            return Err(CliError::usage("transforms.cogn_floor must be positive"));
        }
        Ok(())
    }
}

/// Loads the config file (when given), applies `--set` overrides, and
/// validates the result. With no file, overrides apply on top of defaults.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig, CliError> {
    let mut table = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| {
                CliError::usage(format!("cannot read config {}: {e}", p.display()))
            })?;
            text.parse::<toml::Table>()
                .map_err(|e| CliError::usage(format!("config {}: {e}", p.display())))?
        }
        None => toml::Table::new(),
    };
    for spec in overrides {
        apply_override(&mut table, spec)?;
    }
    let config: RunConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e| CliError::usage(format!("config: {e}")))?;
    config.validate()?;
    Ok(config)
}

/// Applies one `key.path=value` override to the raw TOML table. The value
/// is parsed as a TOML literal when possible and falls back to a plain
/// string, so `--set run.seed=7`, `--set periods.lag=2008-2012` and
/// `--set subperiods=["2013-2014","2016-2017"]` all work unquoted.
fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), CliError> {
    let Some((path, raw)) = spec.split_once('=') else {
        return Err(CliError::usage(format!(
            "--set expects KEY=VALUE, got '{spec}'"
        )));
    };
    let path = path.trim();
    if path.is_empty() || path.split('.').any(|part| part.is_empty()) {
        return Err(CliError::usage(format!("--set '{spec}': empty key path")));
    }
    let value = parse_override_value(raw.trim());
    let keys: Vec<&str> = path.split('.').collect();
    let mut current = table;
    for key in &keys[..keys.len() - 1] {
        let entry = current
            .entry(key.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        current = entry.as_table_mut().ok_or_else(|| {
            CliError::usage(format!("--set {path}: '{key}' is not a table"))
        })?;
    }
    current.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

fn parse_override_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let config = load_config(None, &[]).expect("default config");
        assert!(config.run.strict);
        assert_eq!(config.run.top_k, 15);
        assert_eq!(config.periods.lag.to_string(), "2006-2010");
        assert_eq!(config.subperiods.len(), 2);
        config.validate().expect("defaults are consistent");
    }

    #[test]
    fn overrides_reach_nested_keys() {
        let config = load_config(
            None,
            &[
                "run.seed=99".to_string(),
                "run.field=materials".to_string(),
                "periods.lag=2001-2005".to_string(),
                "periods.outcome=2006-2010".to_string(),
                "subperiods=[\"2006-2007\", \"2009-2010\"]".to_string(),
                "lda.alpha=0.5".to_string(),
                "synth.papers=123".to_string(),
            ],
        )
        .expect("overrides apply");
        assert_eq!(config.run.seed, 99);
        assert_eq!(config.run.field.as_deref(), Some("materials"));
        assert_eq!(config.periods.lag.to_string(), "2001-2005");
        assert_eq!(config.subperiods[1].to_string(), "2009-2010");
        assert_eq!(config.lda.alpha, Some(0.5));
        assert_eq!(config.synth.papers, 123);
    }

    #[test]
    fn bad_overrides_are_usage_errors() {
        for spec in ["no_equals", "=5", "run..seed=1", "run.seed.x=1"] {
            let err = load_config(None, &[spec.to_string()]).unwrap_err();
            assert_eq!(err.exit_code(), 3, "spec {spec:?} -> {err}");
        }
        // Unknown key rejected by deny_unknown_fields.
        let err = load_config(None, &["run.sede=7".to_string()]).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn cross_field_invariants_are_enforced() {
        let cases: &[&[&str]] = &[
            &["periods.lag=2011-2013"],                  // overlaps outcome
            &["subperiods=[\"2010-2011\",\"2013-2014\"]"], // outside outcome
            &["subperiods=[\"2011-2013\",\"2013-2015\"]"], // overlapping
            &["subperiods=[\"2011-2012\"]"],             // chow needs two
            &["lda.topics=1"],
            &["lda.iterations=50", "lda.burn_in=50"],
            &["transforms.cogn_floor=0.0"],
            &["run.top_k=0"],
        ];
        for case in cases {
            let overrides: Vec<String> = case.iter().map(|s| s.to_string()).collect();
            let err = load_config(None, &overrides).unwrap_err();
            assert_eq!(err.exit_code(), 3, "case {case:?} -> {err}");
        }
    }

    #[test]
    fn config_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        // Top-level keys must precede the first table header in TOML.
        std::fs::write(
            &path,
            r#"
subperiods = ["2013-2014", "2016-2017"]

[run]
seed = 42
counting = "full"

[periods]
lag = "2008-2012"
outcome = "2013-2017"

[lda]
topics = 50
iterations = 1000
burn_in = 200
"#,
        )
        .unwrap();
        let config = load_config(Some(&path), &["run.seed=7".to_string()]).unwrap();
        assert_eq!(config.run.counting, Counting::Full);
        assert_eq!(config.run.seed, 7, "--set wins over the file");
        assert_eq!(config.lda.topics, 50);
        assert_eq!(config.periods.outcome.to_string(), "2013-2017");
    }
}
