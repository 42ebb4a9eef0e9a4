//! Directed, weighted research-leadership flow networks.
//!
//! Each paper sends flow from its leading institutions to the institutions
//! on its author list. Under fractional counting a paper with `LIN` leaders
//! and `N` institutions sends `1/(LIN*N)` from every leader to every
//! institution (self included), so each paper contributes exactly one unit
//! of flow to the network. Under full counting every leader sends weight 1
//! to every *other* institution on the paper. Edge weights are accumulated
//! as exact rationals; callers read them as `f64`.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::ops::Bound;

use num::bigint::BigInt;
use num::rational::{BigRational, Rational64};
use num::{ToPrimitive, Zero};
use thiserror::Error;

use crate::corpus::{Corpus, CorpusError, InstitutionId, InstitutionRecord, PaperId, PaperRecord, Period};

/// How a paper's flow is attributed to its leaders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountingScheme {
    /// `1/(LIN*N)` per (leader, institution) pair, self-loops included.
    Fractional,
    /// Weight 1 per (leader, other institution) pair, no self-loops.
    Full,
}

#[derive(Debug, Error)]
pub enum LeadershipError {
    #[error("institution '{0}' has no registry entry")]
    MissingRegistryEntry(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// Fractional weight `1/(LIN*N)` carried by one (leader, institution) pair.
///
/// Requires `1 <= lin <= n`.
pub fn fractional_flow_weight(lin: usize, n: usize) -> Rational64 {
    debug_assert!(lin >= 1 && n >= lin);
    Rational64::new(1, (lin * n) as i64)
}

/// Mass a single paper grants each of its leaders under fractional
/// counting: `(1/LIN) * (1 - 1/N)`, i.e. the paper's flow to the `N - 1`
/// other institutions split across `LIN` leaders.
///
/// Requires `1 <= lin <= n`.
pub fn paper_leader_mass(lin: usize, n: usize) -> Rational64 {
    debug_assert!(lin >= 1 && n >= lin);
    Rational64::new((n - 1) as i64, (lin * n) as i64)
}

/// One directed flow contribution from a single paper.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowEdge {
    pub leader: InstitutionId,
    pub participant: InstitutionId,
    pub weight: Rational64,
}

impl FlowEdge {
    pub fn weight_f64(&self) -> f64 {
        *self.weight.numer() as f64 / *self.weight.denom() as f64
    }
}

/// All flow contributions of one paper, leaders and participants in sorted
/// order.
#[derive(Debug, Clone)]
pub struct PaperFlows {
    pub paper_id: PaperId,
    pub edges: Vec<FlowEdge>,
}

/// Expands one paper into its flow edges under `scheme`.
pub fn paper_flows(paper: &PaperRecord, scheme: CountingScheme) -> PaperFlows {
    let n = paper.institution_count();
    let lin = paper.leading_count();
    let mut edges = Vec::new();
    match scheme {
        CountingScheme::Fractional => {
            let w = fractional_flow_weight(lin, n);
            for leader in paper.leaders() {
                for target in paper.institutions() {
                    edges.push(FlowEdge {
                        leader: leader.clone(),
                        participant: target.clone(),
                        weight: w,
                    });
                }
            }
        }
        CountingScheme::Full => {
            for leader in paper.leaders() {
                for target in paper.institutions() {
                    if target != leader {
                        edges.push(FlowEdge {
                            leader: leader.clone(),
                            participant: target.clone(),
                            weight: Rational64::new(1, 1),
                        });
                    }
                }
            }
        }
    }
    PaperFlows {
        paper_id: paper.paper_id.clone(),
        edges,
    }
}

/// Accumulated flow network over a corpus slice.
///
/// Weights are exact rationals, so per-paper conservation survives
/// aggregation: under fractional counting the total weight equals the
/// number of expanded papers exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowNetwork {
    period: Period,
    scheme: CountingScheme,
    weights: BTreeMap<(InstitutionId, InstitutionId), BigRational>,
    institutions: BTreeSet<InstitutionId>,
    paper_count: usize,
}

impl FlowNetwork {
    pub fn new(period: Period, scheme: CountingScheme) -> Self {
        FlowNetwork {
            period,
            scheme,
            weights: BTreeMap::new(),
            institutions: BTreeSet::new(),
            paper_count: 0,
        }
    }

    pub fn period(&self) -> Period {
        self.period
    }

    pub fn scheme(&self) -> CountingScheme {
        self.scheme
    }

    /// Institutions appearing as an endpoint of at least one edge.
    pub fn institutions(&self) -> &BTreeSet<InstitutionId> {
        &self.institutions
    }

    /// Number of papers expanded into this network.
    pub fn paper_count(&self) -> usize {
        self.paper_count
    }

    pub fn edge_count(&self) -> usize {
        self.weights.len()
    }

    /// Accumulated weight on `a -> b`, zero if the edge is absent.
    pub fn weight(&self, a: &InstitutionId, b: &InstitutionId) -> f64 {
        self.weights
            .get(&(a.clone(), b.clone()))
            .map(rational_to_f64)
            .unwrap_or(0.0)
    }

    pub fn weight_exact(&self, a: &InstitutionId, b: &InstitutionId) -> Option<&BigRational> {
        self.weights.get(&(a.clone(), b.clone()))
    }

    pub fn has_edge(&self, a: &InstitutionId, b: &InstitutionId) -> bool {
        self.weights.contains_key(&(a.clone(), b.clone()))
    }

    /// Edges in (leader, participant) order.
    pub fn edges(&self) -> impl Iterator<Item = (&InstitutionId, &InstitutionId, f64)> {
        self.weights
            .iter()
            .map(|((a, b), w)| (a, b, rational_to_f64(w)))
    }

    /// Out-edges of `a` in participant order.
    pub fn out_edges<'a>(
        &'a self,
        a: &'a InstitutionId,
    ) -> impl Iterator<Item = (&'a InstitutionId, f64)> + 'a {
        let lo = (a.clone(), InstitutionId::new(""));
        self.weights
            .range((Bound::Included(lo), Bound::Unbounded))
            .take_while(move |((src, _), _)| src == a)
            .map(|((_, dst), w)| (dst, rational_to_f64(w)))
    }

    pub fn total_weight(&self) -> f64 {
        rational_to_f64(&self.total_weight_exact())
    }

    pub fn total_weight_exact(&self) -> BigRational {
        let mut total = BigRational::zero();
        for w in self.weights.values() {
            total += w;
        }
        total
    }

    /// Adds one paper's edges.
    pub fn absorb(&mut self, flows: &PaperFlows) {
        for edge in &flows.edges {
            let key = (edge.leader.clone(), edge.participant.clone());
            let w = big_rational(edge.weight);
            *self.weights.entry(key).or_insert_with(BigRational::zero) += w;
            self.institutions.insert(edge.leader.clone());
            self.institutions.insert(edge.participant.clone());
        }
        self.paper_count += 1;
    }
}

fn big_rational(r: Rational64) -> BigRational {
    BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
}

fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Builds the flow network for the papers of `corpus` published in
/// `period` (optionally restricted to `field`).
pub fn build_network(
    corpus: &Corpus,
    period: Period,
    field: Option<&str>,
    scheme: CountingScheme,
) -> FlowNetwork {
    let mut network = FlowNetwork::new(period, scheme);
    for paper in corpus.papers.values() {
        if !period.contains(paper.year) {
            continue;
        }
        if let Some(f) = field {
            if paper.field != f {
                continue;
            }
        }
        network.absorb(&paper_flows(paper, scheme));
    }
    network
}

/// Leadership mass per institution: total outgoing flow excluding the
/// self-loop. Every institution in the network gets an entry (participants
/// without out-edges have mass zero).
#[derive(Debug, Clone, PartialEq)]
pub struct MassVector {
    values: BTreeMap<InstitutionId, f64>,
}

impl MassVector {
    pub fn get(&self, id: &InstitutionId) -> Option<f64> {
        self.values.get(id).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&InstitutionId, f64)> {
        self.values.iter().map(|(id, &m)| (id, m))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.values.values().sum()
    }
}

/// Computes leadership mass for every institution in the network.
pub fn leadership_mass(network: &FlowNetwork) -> MassVector {
    let mut exact: BTreeMap<InstitutionId, BigRational> = network
        .institutions
        .iter()
        .map(|id| (id.clone(), BigRational::zero()))
        .collect();
    for ((a, b), w) in &network.weights {
        if a != b {
            *exact.get_mut(a).expect("endpoint indexed") += w;
        }
    }
    MassVector {
        values: exact
            .into_iter()
            .map(|(id, w)| (id, rational_to_f64(&w)))
            .collect(),
    }
}

/// One row of a mass ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct MassRankEntry {
    pub institution_id: InstitutionId,
    pub mass: f64,
    /// Fraction of total mass; zero if total mass is zero.
    pub share: f64,
    pub cumulative_share: f64,
}

/// Top `k` institutions by mass (descending, ties broken by id). Shares are
/// relative to the total mass over *all* institutions.
pub fn rank_by_mass(mass: &MassVector, k: usize) -> Vec<MassRankEntry> {
    let total = mass.total();
    let mut order: Vec<(&InstitutionId, f64)> = mass.iter().collect();
    order.sort_by(|(ida, ma), (idb, mb)| {
        mb.total_cmp(ma).then_with(|| ida.cmp(idb))
    });
    let mut cumulative = 0.0;
    order
        .into_iter()
        .take(k)
        .map(|(id, m)| {
            let share = if total > 0.0 { m / total } else { 0.0 };
            cumulative += share;
            MassRankEntry {
                institution_id: id.clone(),
                mass: m,
                share,
                cumulative_share: cumulative,
            }
        })
        .collect()
}

/// One ranked dyad (self-loops excluded).
#[derive(Debug, Clone, PartialEq)]
pub struct DyadFlow {
    pub leader: InstitutionId,
    pub participant: InstitutionId,
    pub weight: f64,
}

/// Top `k` directed dyads by weight (descending, ties broken by ids).
pub fn rank_dyads(network: &FlowNetwork, k: usize) -> Vec<DyadFlow> {
    let mut dyads: Vec<DyadFlow> = network
        .edges()
        .filter(|(a, b, _)| a != b)
        .map(|(a, b, w)| DyadFlow {
            leader: a.clone(),
            participant: b.clone(),
            weight: w,
        })
        .collect();
    dyads.sort_by(|x, y| {
        y.weight
            .total_cmp(&x.weight)
            .then_with(|| x.leader.cmp(&y.leader))
            .then_with(|| x.participant.cmp(&y.participant))
    });
    dyads.truncate(k);
    dyads
}

/// Why the disparity of an institution's outflows is undefined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum DisparityUndefined {
    /// Fewer than three distinct recipients (excluding the institution
    /// itself); the normalization divides by `recipients - 2`.
    #[error("only {0} outflow recipients (need at least 3)")]
    TooFewRecipients(usize),
    /// No outgoing mass to share.
    #[error("zero leadership mass")]
    ZeroMass,
}

/// Disparity of an institution's outgoing flow shares.
///
/// With `n` recipients (self-loop excluded) and shares `s_j` of the
/// leadership mass, disparity is `((n-1) * sum(s_j^2) - 1) / (n-2)`. An
/// even split approaches the lower bound `-1/(n*(n-2))`; concentration on
/// one recipient approaches 1.
pub fn disparity(
    network: &FlowNetwork,
    institution: &InstitutionId,
) -> Result<f64, DisparityUndefined> {
    let flows: Vec<f64> = network
        .out_edges(institution)
        .filter(|(dst, _)| *dst != institution)
        .map(|(_, w)| w)
        .collect();
    let n = flows.len();
    if n < 3 {
        return Err(DisparityUndefined::TooFewRecipients(n));
    }
    let mass: f64 = flows.iter().sum();
    if mass <= 0.0 {
        return Err(DisparityUndefined::ZeroMass);
    }
    let sum_sq: f64 = flows.iter().map(|w| (w / mass).powi(2)).sum();
    Ok(((n as f64 - 1.0) * sum_sq - 1.0) / (n as f64 - 2.0))
}

/// Disparity for all institutions where it is defined, plus the ones where
/// it is not.
#[derive(Debug, Clone, Default)]
pub struct DisparityDistribution {
    pub values: Vec<(InstitutionId, f64)>,
    pub undefined: Vec<(InstitutionId, DisparityUndefined)>,
}

pub fn disparity_distribution(network: &FlowNetwork) -> DisparityDistribution {
    let mut out = DisparityDistribution::default();
    for id in network.institutions() {
        match disparity(network, id) {
            Ok(v) => out.values.push((id.clone(), v)),
            Err(u) => out.undefined.push((id.clone(), u)),
        }
    }
    out
}

/// Sums flows between provinces, keyed `(leader province, participant
/// province)`. Every network institution must be in the registry.
pub fn aggregate_by_province(
    network: &FlowNetwork,
    registry: &BTreeMap<InstitutionId, InstitutionRecord>,
) -> Result<BTreeMap<(String, String), f64>, LeadershipError> {
    let province = |id: &InstitutionId| -> Result<&str, LeadershipError> {
        registry
            .get(id)
            .map(|r| r.province.as_str())
            .ok_or_else(|| LeadershipError::MissingRegistryEntry(id.as_str().to_string()))
    };
    let mut exact: BTreeMap<(String, String), BigRational> = BTreeMap::new();
    for ((a, b), w) in &network.weights {
        let key = (province(a)?.to_string(), province(b)?.to_string());
        *exact.entry(key).or_insert_with(BigRational::zero) += w;
    }
    Ok(exact
        .into_iter()
        .map(|(k, w)| (k, rational_to_f64(&w)))
        .collect())
}

/// Writes `leader_id,participant_id,flow` rows in sorted order.
pub fn write_edge_list<W: Write>(network: &FlowNetwork, writer: W) -> Result<(), LeadershipError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["leader_id", "participant_id", "flow"])?;
    for (a, b, w) in network.edges() {
        wtr.write_record([a.as_str(), b.as_str(), &format!("{w}")])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Writes `institution_id,LM,share,cumulative_share` rows.
pub fn write_mass_ranking<W: Write>(
    entries: &[MassRankEntry],
    writer: W,
) -> Result<(), LeadershipError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["institution_id", "LM", "share", "cumulative_share"])?;
    for e in entries {
        wtr.write_record([
            e.institution_id.as_str(),
            &format!("{}", e.mass),
            &format!("{}", e.share),
            &format!("{}", e.cumulative_share),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
