//! Dyadic proximity measures and the gravity-style regression dataset.
//!
//! Five measures per institution pair: great-circle distance, cosine
//! similarity of topic vectors, same-province indicator, prior-collaboration
//! indicator, and the absolute gap in grant counts. [`build_design_matrix`]
//! turns them into the directed-dyad dataset used by the regression models:
//! outcome flow as response, log-transformed masses and proximities as
//! regressors.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::{InstitutionId, InstitutionRecord, Period};
use crate::leadership::{FlowNetwork, MassVector};
use crate::topicmodel::InstitutionVector;

/// Mean Earth radius in kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

#[derive(Debug, Error)]
pub enum ProximityError {
    #[error("coordinate ({lat}, {lon}) out of range")]
    CoordinateOutOfRange { lat: f64, lon: f64 },
    #[error("institution '{0}' has an all-zero topic vector")]
    ZeroVector(String),
    #[error("topic vectors have different lengths ({left} vs {right})")]
    DimensionMismatch { left: usize, right: usize },
    #[error("institution '{0}' missing from the registry")]
    MissingInstitution(String),
    #[error("institution '{0}' has no topic vector")]
    MissingVector(String),
    #[error("institution '{institution_id}' has no grant count for {period}")]
    MissingGrantPeriod {
        institution_id: String,
        period: Period,
    },
    #[error("institution '{0}' has no positive lag mass")]
    NonPositiveMass(String),
    #[error("institution pair ({0}, {1}) missing from the proximity set")]
    MissingDyad(String, String),
    #[error("outcome and lag networks use different counting schemes")]
    SchemeMismatch,
    #[error("design matrix: {0}")]
    MalformedMatrix(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Great-circle distance in kilometres between two latitude/longitude
/// points (degrees), haversine formula on a sphere of radius
/// [`EARTH_RADIUS_KM`].
pub fn geo_distance(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> Result<f64, ProximityError> {
    for &(lat, lon) in &[(lat1, lon1), (lat2, lon2)] {
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) || lat.is_nan() || lon.is_nan() {
            return Err(ProximityError::CoordinateOutOfRange { lat, lon });
        }
    }
    let phi1 = lat1.to_radians();
    let phi2 = lat2.to_radians();
    let dphi = (lat2 - lat1).to_radians();
    let dlambda = (lon2 - lon1).to_radians();
    let a = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    Ok(2.0 * EARTH_RADIUS_KM * a.sqrt().min(1.0).asin())
}

/// Cosine similarity of two topic vectors, clamped to `[0, 1]` (topic
/// weights are non-negative).
pub fn cognitive_proximity(
    a: &InstitutionVector,
    b: &InstitutionVector,
) -> Result<f64, ProximityError> {
    if a.weights.len() != b.weights.len() {
        return Err(ProximityError::DimensionMismatch {
            left: a.weights.len(),
            right: b.weights.len(),
        });
    }
    let norm = |v: &InstitutionVector| -> f64 {
        v.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    };
    let na = norm(a);
    if na == 0.0 {
        return Err(ProximityError::ZeroVector(
            a.institution_id.as_str().to_string(),
        ));
    }
    let nb = norm(b);
    if nb == 0.0 {
        return Err(ProximityError::ZeroVector(
            b.institution_id.as_str().to_string(),
        ));
    }
    let dot: f64 = a
        .weights
        .iter()
        .zip(&b.weights)
        .map(|(x, y)| x * y)
        .sum();
    Ok((dot / (na * nb)).clamp(0.0, 1.0))
}

/// Whether two institutions sit in the same province.
pub fn institutional_proximity(
    registry: &BTreeMap<InstitutionId, InstitutionRecord>,
    i: &InstitutionId,
    j: &InstitutionId,
) -> Result<bool, ProximityError> {
    let rec = |id: &InstitutionId| {
        registry
            .get(id)
            .ok_or_else(|| ProximityError::MissingInstitution(id.as_str().to_string()))
    };
    Ok(rec(i)?.province == rec(j)?.province)
}

/// Whether the pair shared a paper in the prior network, in either
/// direction (leader or participant role).
pub fn social_proximity(prior: &FlowNetwork, i: &InstitutionId, j: &InstitutionId) -> bool {
    prior.has_edge(i, j) || prior.has_edge(j, i)
}

/// Absolute difference in grant counts for `period`.
pub fn economic_gap(
    registry: &BTreeMap<InstitutionId, InstitutionRecord>,
    i: &InstitutionId,
    j: &InstitutionId,
    period: Period,
) -> Result<u64, ProximityError> {
    let count = |id: &InstitutionId| -> Result<u64, ProximityError> {
        let rec = registry
            .get(id)
            .ok_or_else(|| ProximityError::MissingInstitution(id.as_str().to_string()))?;
        rec.nsfc_counts.get(&period).copied().ok_or_else(|| {
            ProximityError::MissingGrantPeriod {
                institution_id: id.as_str().to_string(),
                period,
            }
        })
    };
    Ok(count(i)?.abs_diff(count(j)?))
}

/// All five proximity measures for one unordered pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DyadProximity {
    pub geo_km: f64,
    pub cognitive: f64,
    pub institutional: bool,
    pub social: bool,
    pub econ_gap: u64,
}

/// Proximities keyed by unordered institution pair.
#[derive(Debug, Clone, Default)]
pub struct ProximitySet {
    map: BTreeMap<(InstitutionId, InstitutionId), DyadProximity>,
}

impl ProximitySet {
    fn key(i: &InstitutionId, j: &InstitutionId) -> (InstitutionId, InstitutionId) {
        if i <= j {
            (i.clone(), j.clone())
        } else {
            (j.clone(), i.clone())
        }
    }

    pub fn insert(&mut self, i: &InstitutionId, j: &InstitutionId, value: DyadProximity) {
        self.map.insert(Self::key(i, j), value);
    }

    /// Order-insensitive lookup.
    pub fn get(&self, i: &InstitutionId, j: &InstitutionId) -> Option<&DyadProximity> {
        self.map.get(&Self::key(i, j))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Computes proximities for every unordered pair of `ids`.
///
/// Every id needs a registry entry, a non-zero topic vector, and a grant
/// count for `grant_period`. The pair loop runs in parallel; results land in
/// pre-assigned slots so the outcome is deterministic.
pub fn build_proximity_set(
    ids: &BTreeSet<InstitutionId>,
    registry: &BTreeMap<InstitutionId, InstitutionRecord>,
    vectors: &BTreeMap<InstitutionId, InstitutionVector>,
    prior: &FlowNetwork,
    grant_period: Period,
) -> Result<ProximitySet, ProximityError> {
    let ids: Vec<&InstitutionId> = ids.iter().collect();
    let mut pairs = Vec::with_capacity(ids.len() * (ids.len().saturating_sub(1)) / 2);
    for (a, &i) in ids.iter().enumerate() {
        for &j in &ids[a + 1..] {
            pairs.push((i, j));
        }
    }
    let computed: Vec<Result<DyadProximity, ProximityError>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let rec = |id: &InstitutionId| {
                registry
                    .get(id)
                    .ok_or_else(|| ProximityError::MissingInstitution(id.as_str().to_string()))
            };
            let vector = |id: &InstitutionId| {
                vectors
                    .get(id)
                    .ok_or_else(|| ProximityError::MissingVector(id.as_str().to_string()))
            };
            let (ri, rj) = (rec(i)?, rec(j)?);
            Ok(DyadProximity {
                geo_km: geo_distance(ri.latitude, ri.longitude, rj.latitude, rj.longitude)?,
                cognitive: cognitive_proximity(vector(i)?, vector(j)?)?,
                institutional: ri.province == rj.province,
                social: social_proximity(prior, i, j),
                econ_gap: economic_gap(registry, i, j, grant_period)?,
            })
        })
        .collect();
    let mut set = ProximitySet::default();
    for ((i, j), result) in pairs.into_iter().zip(computed) {
        set.insert(i, j, result?);
    }
    Ok(set)
}

/// Floors applied before taking logarithms of proximity measures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformGuards {
    /// Lower bound on distance in km (co-located institutions).
    pub geo_floor_km: f64,
    /// Lower bound on cosine similarity (disjoint topic support).
    pub cogn_floor: f64,
}

impl Default for TransformGuards {
    fn default() -> Self {
        TransformGuards {
            geo_floor_km: 1.0,
            cogn_floor: 1e-6,
        }
    }
}

/// Column names of the regressor block, in order.
pub const DESIGN_COLUMNS: [&str; 8] = [
    "const", "ln_LM_i", "ln_LM_j", "ln_geo", "ln_cogn", "inst", "soc", "ln_econ",
];

/// Directed-dyad regression dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionDataset {
    /// Row order: all ordered pairs (i, j), i != j, sorted by (i, j).
    pub dyads: Vec<(InstitutionId, InstitutionId)>,
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    pub names: Vec<String>,
}

impl RegressionDataset {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Index of a named column.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Keeps only the named regressor columns (plus their order), returning
    /// a matrix view copy.
    pub fn select(&self, names: &[&str]) -> Option<(DMatrix<f64>, Vec<String>)> {
        let mut cols = Vec::with_capacity(names.len());
        for name in names {
            cols.push(self.column(name)?);
        }
        let x = DMatrix::from_fn(self.x.nrows(), cols.len(), |r, c| self.x[(r, cols[c])]);
        Some((x, names.iter().map(|s| s.to_string()).collect()))
    }
}

/// Builds the dyadic design matrix.
///
/// Rows are ordered pairs of `eligible` institutions. The response is the
/// outcome-network flow `i -> j` (zero when absent, hence the censored
/// models downstream). Regressors use lag-period quantities: log lag
/// masses (which must be positive), log floored distance, log floored
/// cosine, the two indicators, and `ln(1 + econ_gap)`.
pub fn build_design_matrix(
    outcome: &FlowNetwork,
    lag: &FlowNetwork,
    lag_mass: &MassVector,
    proximities: &ProximitySet,
    eligible: &BTreeSet<InstitutionId>,
    guards: &TransformGuards,
) -> Result<RegressionDataset, ProximityError> {
    if outcome.scheme() != lag.scheme() {
        return Err(ProximityError::SchemeMismatch);
    }
    let mut ln_mass: BTreeMap<&InstitutionId, f64> = BTreeMap::new();
    for id in eligible {
        let m = lag_mass
            .get(id)
            .ok_or_else(|| ProximityError::NonPositiveMass(id.as_str().to_string()))?;
        if m <= 0.0 {
            return Err(ProximityError::NonPositiveMass(id.as_str().to_string()));
        }
        ln_mass.insert(id, m.ln());
    }
    let k = DESIGN_COLUMNS.len();
    let n = eligible.len() * eligible.len().saturating_sub(1);
    let mut dyads = Vec::with_capacity(n);
    let mut y = DVector::zeros(n);
    let mut x = DMatrix::zeros(n, k);
    let mut row = 0;
    for i in eligible {
        for j in eligible {
            if i == j {
                continue;
            }
            let p = proximities.get(i, j).ok_or_else(|| {
                ProximityError::MissingDyad(i.as_str().to_string(), j.as_str().to_string())
            })?;
            y[row] = outcome.weight(i, j);
            x[(row, 0)] = 1.0;
            x[(row, 1)] = ln_mass[i];
            x[(row, 2)] = ln_mass[j];
            x[(row, 3)] = p.geo_km.max(guards.geo_floor_km).ln();
            x[(row, 4)] = p.cognitive.max(guards.cogn_floor).ln();
            x[(row, 5)] = if p.institutional { 1.0 } else { 0.0 };
            x[(row, 6)] = if p.social { 1.0 } else { 0.0 };
            x[(row, 7)] = (1.0 + p.econ_gap as f64).ln();
            dyads.push((i.clone(), j.clone()));
            row += 1;
        }
    }
    debug_assert_eq!(row, n);
    Ok(RegressionDataset {
        dyads,
        y,
        x,
        names: DESIGN_COLUMNS.iter().map(|s| s.to_string()).collect(),
    })
}

/// Writes `i,j,y,<regressors>` rows in dataset order.
pub fn write_design_matrix<W: Write>(
    dataset: &RegressionDataset,
    writer: W,
) -> Result<(), ProximityError> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["i".to_string(), "j".to_string(), "y".to_string()];
    header.extend(dataset.names.iter().cloned());
    wtr.write_record(&header)?;
    for (row, (i, j)) in dataset.dyads.iter().enumerate() {
        let mut rec = vec![
            i.as_str().to_string(),
            j.as_str().to_string(),
            format!("{}", dataset.y[row]),
        ];
        for c in 0..dataset.x.ncols() {
            rec.push(format!("{}", dataset.x[(row, c)]));
        }
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Parses a design matrix written by [`write_design_matrix`].
pub fn parse_design_matrix<R: std::io::Read>(
    reader: R,
) -> Result<RegressionDataset, ProximityError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() < 4 || &headers[0] != "i" || &headers[1] != "j" || &headers[2] != "y" {
        return Err(ProximityError::MalformedMatrix(
            "header must start with i,j,y".to_string(),
        ));
    }
    let names: Vec<String> = headers.iter().skip(3).map(|s| s.to_string()).collect();
    let mut dyads = Vec::new();
    let mut ys = Vec::new();
    let mut rows: Vec<f64> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != headers.len() {
            return Err(ProximityError::MalformedMatrix(format!(
                "row {} has {} fields, expected {}",
                dyads.len() + 1,
                rec.len(),
                headers.len()
            )));
        }
        dyads.push((InstitutionId::new(&rec[0]), InstitutionId::new(&rec[1])));
        let parse = |s: &str| -> Result<f64, ProximityError> {
            s.parse()
                .map_err(|_| ProximityError::MalformedMatrix(format!("'{s}' is not a number")))
        };
        ys.push(parse(&rec[2])?);
        for c in 0..names.len() {
            rows.push(parse(&rec[3 + c])?);
        }
    }
    let n = dyads.len();
    Ok(RegressionDataset {
        dyads,
        y: DVector::from_vec(ys),
        x: DMatrix::from_row_slice(n, names.len(), &rows),
        names,
    })
}
