//! Bibliographic corpus: record types, ingestion, validation and slicing.
//!
//! A corpus pairs paper records (one JSON object per line) with an
//! institution registry (CSV). Papers carry affiliation lists flagged with
//! leadership status; the registry carries locations, provinces and grant
//! counts per period. Everything downstream (networks, proximity, topic
//! models) reads from the validated [`Corpus`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Unique paper identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PaperId(String);

impl PaperId {
    pub fn new(id: impl Into<String>) -> Self {
        PaperId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PaperId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Unique institution identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InstitutionId(String);

impl InstitutionId {
    pub fn new(id: impl Into<String>) -> Self {
        InstitutionId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for InstitutionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Inclusive year range, e.g. `2013-2017`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Period {
    start: i32,
    end: i32,
}

impl Period {
    /// Requires `start <= end`; years must be positive and at most 9999 so
    /// the `YYYY-YYYY` form is unambiguous.
    pub fn new(start: i32, end: i32) -> Result<Self, CorpusError> {
        if start <= 0 || end > 9999 || start > end {
            return Err(CorpusError::InvalidPeriod(format!("{start}-{end}")));
        }
        Ok(Period { start, end })
    }

    pub fn start(&self) -> i32 {
        self.start
    }

    pub fn end(&self) -> i32 {
        self.end
    }

    pub fn contains(&self, year: i32) -> bool {
        (self.start..=self.end).contains(&year)
    }

    pub fn years(&self) -> impl Iterator<Item = i32> {
        self.start..=self.end
    }

    pub fn year_count(&self) -> usize {
        (self.end - self.start + 1) as usize
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:04}", self.start, self.end)
    }
}

impl FromStr for Period {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CorpusError::InvalidPeriod(s.to_string());
        let (a, b) = s.split_once('-').ok_or_else(bad)?;
        let start: i32 = a.trim().parse().map_err(|_| bad())?;
        let end: i32 = b.trim().parse().map_err(|_| bad())?;
        Period::new(start, end).map_err(|_| bad())
    }
}

impl TryFrom<String> for Period {
    type Error = CorpusError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Period> for String {
    fn from(p: Period) -> String {
        p.to_string()
    }
}

/// One affiliation on a paper.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Affiliation {
    pub institution_id: InstitutionId,
    pub is_leading: bool,
}

/// A validated paper record.
///
/// Affiliations are unique per institution and sorted by id; keywords are
/// lower-cased with whitespace collapsed. At least one affiliation leads.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PaperRecord {
    pub paper_id: PaperId,
    pub year: i32,
    pub field: String,
    pub keywords: Vec<String>,
    pub affiliations: Vec<Affiliation>,
}

impl PaperRecord {
    /// Normalizes and validates a record. Duplicate affiliations collapse to
    /// one entry that leads if any duplicate led; empty keywords are dropped.
    pub fn new(
        paper_id: PaperId,
        year: i32,
        field: impl Into<String>,
        keywords: Vec<String>,
        affiliations: Vec<Affiliation>,
    ) -> Result<Self, CorpusError> {
        let violation = |reason: &str| CorpusError::InvariantViolation {
            paper_id: paper_id.as_str().to_string(),
            reason: reason.to_string(),
        };
        if paper_id.as_str().trim().is_empty() {
            return Err(CorpusError::InvariantViolation {
                paper_id: String::new(),
                reason: "empty paper_id".to_string(),
            });
        }
        if affiliations.is_empty() {
            return Err(violation("no affiliations"));
        }
        let mut merged: BTreeMap<InstitutionId, bool> = BTreeMap::new();
        for a in affiliations {
            if a.institution_id.as_str().trim().is_empty() {
                return Err(violation("empty institution_id in affiliation"));
            }
            *merged.entry(a.institution_id).or_insert(false) |= a.is_leading;
        }
        let affiliations: Vec<Affiliation> = merged
            .into_iter()
            .map(|(institution_id, is_leading)| Affiliation {
                institution_id,
                is_leading,
            })
            .collect();
        if !affiliations.iter().any(|a| a.is_leading) {
            return Err(violation("no leading affiliation"));
        }
        let keywords = keywords
            .iter()
            .map(|k| normalize_keyword(k))
            .filter(|k| !k.is_empty())
            .collect();
        Ok(PaperRecord {
            paper_id,
            year,
            field: field.into().trim().to_string(),
            keywords,
            affiliations,
        })
    }

    /// Number of distinct affiliated institutions.
    pub fn institution_count(&self) -> usize {
        self.affiliations.len()
    }

    /// Number of leading institutions.
    pub fn leading_count(&self) -> usize {
        self.affiliations.iter().filter(|a| a.is_leading).count()
    }

    pub fn leaders(&self) -> impl Iterator<Item = &InstitutionId> {
        self.affiliations
            .iter()
            .filter(|a| a.is_leading)
            .map(|a| &a.institution_id)
    }

    pub fn institutions(&self) -> impl Iterator<Item = &InstitutionId> {
        self.affiliations.iter().map(|a| &a.institution_id)
    }
}

/// Lower-case, trim, and collapse internal whitespace runs to single spaces.
pub fn normalize_keyword(raw: &str) -> String {
    raw.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Registry entry for one institution.
#[derive(Debug, Clone, PartialEq)]
pub struct InstitutionRecord {
    pub institution_id: InstitutionId,
    pub display_name: String,
    pub province: String,
    pub latitude: f64,
    pub longitude: f64,
    /// Grant counts keyed by the period they cover.
    pub nsfc_counts: BTreeMap<Period, u64>,
}

/// How ingestion treats invalid input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IngestMode {
    /// First problem aborts with an error.
    #[default]
    Strict,
    /// Problems are collected as rejects and good records kept.
    Lenient,
}

/// Ingestion options for [`parse_papers`].
#[derive(Debug, Clone)]
pub struct IngestOptions {
    pub mode: IngestMode,
    /// Publication years outside this range are invalid.
    pub min_year: i32,
    pub max_year: i32,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            mode: IngestMode::Strict,
            min_year: 1900,
            max_year: 2100,
        }
    }
}

/// A line rejected during lenient ingestion.
#[derive(Debug)]
pub struct RejectedLine {
    /// 1-based line number in the input stream.
    pub line: usize,
    pub error: CorpusError,
}

/// Result of parsing a paper stream.
#[derive(Debug, Default)]
pub struct ParsedPapers {
    pub records: Vec<PaperRecord>,
    /// Empty in strict mode (the first problem is returned as `Err` instead).
    pub rejected: Vec<RejectedLine>,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("paper '{paper_id}': {reason}")]
    InvariantViolation { paper_id: String, reason: String },
    #[error("duplicate paper id '{0}'")]
    DuplicatePaper(String),
    #[error("duplicate institution id '{0}'")]
    DuplicateInstitution(String),
    #[error("institution '{institution_id}': {reason}")]
    InvalidInstitution {
        institution_id: String,
        reason: String,
    },
    #[error("registry header: {0}")]
    InvalidRegistryHeader(String),
    #[error("paper '{paper_id}' references institution '{institution_id}' not in the registry")]
    UnknownInstitution {
        paper_id: String,
        institution_id: String,
    },
    #[error("invalid period '{0}' (expected YYYY-YYYY with start <= end)")]
    InvalidPeriod(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Wire format of one paper line. Unknown fields are rejected so silent
/// schema drift cannot pass validation.
#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct PaperLine {
    paper_id: String,
    year: i32,
    field: String,
    keywords: Vec<String>,
    affiliations: Vec<AffiliationLine>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct AffiliationLine {
    institution_id: String,
    is_leading: bool,
}

/// Parses newline-delimited JSON paper records.
///
/// Blank lines are skipped. In strict mode the first malformed line,
/// invariant violation, out-of-range year, or duplicate paper id is returned
/// as an error; in lenient mode such lines land in
/// [`ParsedPapers::rejected`] and parsing continues. Line numbers are
/// 1-based.
pub fn parse_papers<R: BufRead>(
    reader: R,
    options: &IngestOptions,
) -> Result<ParsedPapers, CorpusError> {
    let mut out = ParsedPapers::default();
    let mut seen: BTreeSet<PaperId> = BTreeSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_paper_line(&line, line_no, options, &mut seen) {
            Ok(record) => out.records.push(record),
            Err(error) => match options.mode {
                IngestMode::Strict => return Err(error),
                IngestMode::Lenient => out.rejected.push(RejectedLine {
                    line: line_no,
                    error,
                }),
            },
        }
    }
    Ok(out)
}

fn parse_paper_line(
    line: &str,
    line_no: usize,
    options: &IngestOptions,
    seen: &mut BTreeSet<PaperId>,
) -> Result<PaperRecord, CorpusError> {
    let raw: PaperLine =
        serde_json::from_str(line).map_err(|e| CorpusError::MalformedLine {
            line: line_no,
            reason: e.to_string(),
        })?;
    let record = PaperRecord::new(
        PaperId::new(raw.paper_id),
        raw.year,
        raw.field,
        raw.keywords,
        raw.affiliations
            .into_iter()
            .map(|a| Affiliation {
                institution_id: InstitutionId::new(a.institution_id),
                is_leading: a.is_leading,
            })
            .collect(),
    )?;
    if record.year < options.min_year || record.year > options.max_year {
        return Err(CorpusError::InvariantViolation {
            paper_id: record.paper_id.as_str().to_string(),
            reason: format!(
                "year {} outside [{}, {}]",
                record.year, options.min_year, options.max_year
            ),
        });
    }
    if !seen.insert(record.paper_id.clone()) {
        return Err(CorpusError::DuplicatePaper(
            record.paper_id.as_str().to_string(),
        ));
    }
    Ok(record)
}

const REGISTRY_FIXED_COLUMNS: [&str; 5] = [
    "institution_id",
    "display_name",
    "province",
    "latitude",
    "longitude",
];
const NSFC_PREFIX: &str = "nsfc_";

/// Parses the institution registry CSV.
///
/// The header must start with `institution_id,display_name,province,
/// latitude,longitude`; any further columns must be named `nsfc_<period>`.
/// Registry parsing is always strict: duplicates, out-of-range coordinates,
/// and malformed headers are errors. Empty grant cells count as zero.
pub fn parse_registry<R: std::io::Read>(
    reader: R,
) -> Result<Vec<InstitutionRecord>, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() < REGISTRY_FIXED_COLUMNS.len() {
        return Err(CorpusError::InvalidRegistryHeader(format!(
            "expected at least {} columns, found {}",
            REGISTRY_FIXED_COLUMNS.len(),
            headers.len()
        )));
    }
    for (i, expected) in REGISTRY_FIXED_COLUMNS.iter().enumerate() {
        if &headers[i] != *expected {
            return Err(CorpusError::InvalidRegistryHeader(format!(
                "column {} must be '{}', found '{}'",
                i + 1,
                expected,
                &headers[i]
            )));
        }
    }
    let mut periods: Vec<Period> = Vec::new();
    for h in headers.iter().skip(REGISTRY_FIXED_COLUMNS.len()) {
        let spec = h.strip_prefix(NSFC_PREFIX).ok_or_else(|| {
            CorpusError::InvalidRegistryHeader(format!(
                "grant column '{h}' must be named {NSFC_PREFIX}<YYYY-YYYY>"
            ))
        })?;
        periods.push(spec.parse()?);
    }

    let mut records = Vec::new();
    let mut seen: BTreeSet<InstitutionId> = BTreeSet::new();
    for row in rdr.records() {
        let row = row?;
        let id = InstitutionId::new(row.get(0).unwrap_or_default());
        let invalid = |reason: String| CorpusError::InvalidInstitution {
            institution_id: id.as_str().to_string(),
            reason,
        };
        if id.as_str().is_empty() {
            return Err(invalid("empty institution_id".to_string()));
        }
        if row.len() != headers.len() {
            return Err(invalid(format!(
                "expected {} fields, found {}",
                headers.len(),
                row.len()
            )));
        }
        let display_name = row.get(1).unwrap_or_default().to_string();
        let province = row.get(2).unwrap_or_default().to_string();
        if province.is_empty() {
            return Err(invalid("empty province".to_string()));
        }
        let latitude: f64 = row
            .get(3)
            .unwrap_or_default()
            .parse()
            .map_err(|_| invalid(format!("latitude '{}' not a number", &row[3])))?;
        let longitude: f64 = row
            .get(4)
            .unwrap_or_default()
            .parse()
            .map_err(|_| invalid(format!("longitude '{}' not a number", &row[4])))?;
        if !(-90.0..=90.0).contains(&latitude) {
            return Err(invalid(format!("latitude {latitude} outside [-90, 90]")));
        }
        if !(-180.0..=180.0).contains(&longitude) {
            return Err(invalid(format!(
                "longitude {longitude} outside [-180, 180]"
            )));
        }
        let mut nsfc_counts = BTreeMap::new();
        for (period, cell) in periods
            .iter()
            .zip(row.iter().skip(REGISTRY_FIXED_COLUMNS.len()))
        {
            let count: u64 = if cell.is_empty() {
                0
            } else {
                cell.parse()
                    .map_err(|_| invalid(format!("grant count '{cell}' not a non-negative integer")))?
            };
            nsfc_counts.insert(*period, count);
        }
        if !seen.insert(id.clone()) {
            return Err(CorpusError::DuplicateInstitution(id.as_str().to_string()));
        }
        records.push(InstitutionRecord {
            institution_id: id,
            display_name,
            province,
            latitude,
            longitude,
            nsfc_counts,
        });
    }
    Ok(records)
}

/// Validated papers joined with their institution registry.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub papers: BTreeMap<PaperId, PaperRecord>,
    pub registry: BTreeMap<InstitutionId, InstitutionRecord>,
}

impl Corpus {
    pub fn paper_count(&self) -> usize {
        self.papers.len()
    }

    pub fn institution(&self, id: &InstitutionId) -> Option<&InstitutionRecord> {
        self.registry.get(id)
    }

    pub fn papers(&self) -> impl Iterator<Item = &PaperRecord> {
        self.papers.values()
    }
}

/// Result of [`assemble_corpus`]; `dropped` is populated in lenient mode.
#[derive(Debug)]
pub struct AssembledCorpus {
    pub corpus: Corpus,
    pub dropped: Vec<(PaperId, CorpusError)>,
}

/// Joins papers against the registry.
///
/// Every affiliation must resolve to a registry entry. In strict mode a
/// dangling reference is an error; in lenient mode the offending paper is
/// dropped and recorded.
pub fn assemble_corpus(
    papers: Vec<PaperRecord>,
    registry: Vec<InstitutionRecord>,
    mode: IngestMode,
) -> Result<AssembledCorpus, CorpusError> {
    let mut reg_map = BTreeMap::new();
    for rec in registry {
        if reg_map.contains_key(&rec.institution_id) {
            return Err(CorpusError::DuplicateInstitution(
                rec.institution_id.as_str().to_string(),
            ));
        }
        reg_map.insert(rec.institution_id.clone(), rec);
    }
    let mut corpus = Corpus {
        papers: BTreeMap::new(),
        registry: reg_map,
    };
    let mut dropped = Vec::new();
    for paper in papers {
        let unknown = paper
            .institutions()
            .find(|id| !corpus.registry.contains_key(*id));
        if let Some(id) = unknown {
            let err = CorpusError::UnknownInstitution {
                paper_id: paper.paper_id.as_str().to_string(),
                institution_id: id.as_str().to_string(),
            };
            match mode {
                IngestMode::Strict => return Err(err),
                IngestMode::Lenient => {
                    dropped.push((paper.paper_id.clone(), err));
                    continue;
                }
            }
        }
        if corpus.papers.contains_key(&paper.paper_id) {
            let err = CorpusError::DuplicatePaper(paper.paper_id.as_str().to_string());
            match mode {
                IngestMode::Strict => return Err(err),
                IngestMode::Lenient => {
                    dropped.push((paper.paper_id.clone(), err));
                    continue;
                }
            }
        }
        corpus.papers.insert(paper.paper_id.clone(), paper);
    }
    Ok(AssembledCorpus { corpus, dropped })
}

/// Returns the papers published in `period`, optionally restricted to one
/// field (exact match on the trimmed field string). The registry is carried
/// over unchanged.
pub fn filter_corpus(corpus: &Corpus, period: Period, field: Option<&str>) -> Corpus {
    let papers = corpus
        .papers
        .iter()
        .filter(|(_, p)| period.contains(p.year))
        .filter(|(_, p)| field.is_none_or(|f| p.field == f))
        .map(|(id, p)| (id.clone(), p.clone()))
        .collect();
    Corpus {
        papers,
        registry: corpus.registry.clone(),
    }
}

/// Institutions that led at least one multi-institution paper (two or more
/// distinct institutions) in **every** year of `period`.
pub fn eligible_institutions(corpus: &Corpus, period: Period) -> BTreeSet<InstitutionId> {
    let mut acc: Option<BTreeSet<InstitutionId>> = None;
    for year in period.years() {
        let mut leaders = BTreeSet::new();
        for paper in corpus.papers.values() {
            if paper.year == year && paper.institution_count() >= 2 {
                leaders.extend(paper.leaders().cloned());
            }
        }
        acc = Some(match acc {
            None => leaders,
            Some(prev) => prev.intersection(&leaders).cloned().collect(),
        });
    }
    acc.unwrap_or_default()
}

/// Writes papers as canonical JSONL: sorted by paper id, affiliations sorted
/// by institution id, one object per line.
pub fn write_papers<W: Write>(corpus: &Corpus, mut writer: W) -> Result<(), CorpusError> {
    for paper in corpus.papers.values() {
        let line = PaperLine {
            paper_id: paper.paper_id.as_str().to_string(),
            year: paper.year,
            field: paper.field.clone(),
            keywords: paper.keywords.clone(),
            affiliations: paper
                .affiliations
                .iter()
                .map(|a| AffiliationLine {
                    institution_id: a.institution_id.as_str().to_string(),
                    is_leading: a.is_leading,
                })
                .collect(),
        };
        serde_json::to_writer(&mut writer, &line)
            .map_err(|e| CorpusError::MalformedLine {
                line: 0,
                reason: e.to_string(),
            })?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Writes the registry as canonical CSV: rows sorted by institution id,
/// grant columns the sorted union of all periods present, missing counts
/// written as `0`.
pub fn write_registry<W: Write>(corpus: &Corpus, writer: W) -> Result<(), CorpusError> {
    let mut periods: BTreeSet<Period> = BTreeSet::new();
    for rec in corpus.registry.values() {
        periods.extend(rec.nsfc_counts.keys().copied());
    }
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = REGISTRY_FIXED_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(periods.iter().map(|p| format!("{NSFC_PREFIX}{p}")));
    wtr.write_record(&header)?;
    for rec in corpus.registry.values() {
        let mut row = vec![
            rec.institution_id.as_str().to_string(),
            rec.display_name.clone(),
            rec.province.clone(),
            format!("{}", rec.latitude),
            format!("{}", rec.longitude),
        ];
        for p in &periods {
            row.push(format!("{}", rec.nsfc_counts.get(p).copied().unwrap_or(0)));
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}
