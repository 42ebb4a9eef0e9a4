//! Gaussian kernel density estimation with Silverman's bandwidth rule.

use std::io::Write;
use std::path::Path;

use super::EconError;

/// Number of grid points in an evaluated density curve.
pub const KDE_GRID_POINTS: usize = 512;

/// Silverman's rule-of-thumb bandwidth:
/// `0.9 * min(sd, IQR / 1.34) * n^(-1/5)`.
///
/// When one of the two spread measures is zero (for example, more than
/// half the sample sits on a single value, collapsing the IQR), the
/// minimum is taken over the positive candidates only. If both are zero
/// the sample is degenerate.
pub fn silverman_bandwidth(sample: &[f64]) -> Result<f64, EconError> {
    let n = sample.len();
    if n < 2 {
        return Err(EconError::InvalidInput {
            reason: "bandwidth selection needs at least two points".to_string(),
        });
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(EconError::InvalidInput {
            reason: "sample contains a non-finite value".to_string(),
        });
    }
    let mean = sample.iter().sum::<f64>() / n as f64;
    let sd =
        (sample.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let candidates = [sd, iqr / 1.34];
    let spread = candidates
        .iter()
        .copied()
        .filter(|v| *v > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !spread.is_finite() {
        return Err(EconError::DegenerateSample {
            reason: "sample has zero spread".to_string(),
        });
    }
    Ok(0.9 * spread * (n as f64).powf(-0.2))
}

/// Linear-interpolation quantile of a pre-sorted slice (type 7, the
/// common spreadsheet definition).
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let h = (n as f64 - 1.0) * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// A kernel density curve evaluated on an even grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KdeCurve {
    /// `(x, density)` pairs on the evaluation grid.
    pub points: Vec<(f64, f64)>,
    /// Bandwidth used for the Gaussian kernel.
    pub bandwidth: f64,
}

impl KdeCurve {
    /// Grid x-coordinates.
    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|(x, _)| *x)
    }

    /// Trapezoidal integral of the curve over its grid.
    pub fn integral(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
            .sum()
    }

    /// Grid point with the highest density.
    pub fn peak(&self) -> (f64, f64) {
        self.points
            .iter()
            .copied()
            .fold((f64::NAN, f64::NEG_INFINITY), |best, p| {
                if p.1 > best.1 {
                    p
                } else {
                    best
                }
            })
    }
}

/// Evaluates the Gaussian kernel density of `sample` at a single point.
pub fn kde_at(sample: &[f64], bandwidth: f64, x: f64) -> f64 {
    let inv = 1.0 / bandwidth;
    let norm = inv / ((sample.len() as f64) * (2.0 * std::f64::consts::PI).sqrt());
    sample
        .iter()
        .map(|&v| {
            let z = (x - v) * inv;
            (-0.5 * z * z).exp()
        })
        .sum::<f64>()
        * norm
}

/// Gaussian kernel density estimate on a 512-point grid spanning
/// `[min - 3h, max + 3h]` where `h` is Silverman's bandwidth.
pub fn kde(sample: &[f64]) -> Result<KdeCurve, EconError> {
    let bandwidth = silverman_bandwidth(sample)?;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in sample {
        min = min.min(v);
        max = max.max(v);
    }
    let lo = min - 3.0 * bandwidth;
    let hi = max + 3.0 * bandwidth;
    let step = (hi - lo) / (KDE_GRID_POINTS as f64 - 1.0);
    let points = (0..KDE_GRID_POINTS)
        .map(|i| {
            let x = lo + step * i as f64;
            (x, kde_at(sample, bandwidth, x))
        })
        .collect();
    Ok(KdeCurve { points, bandwidth })
}

/// Writes a density curve as CSV (`x,density`).
pub fn write_kde_curve(path: &Path, curve: &KdeCurve) -> Result<(), std::io::Error> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(file, "x,density")?;
    for (x, d) in &curve.points {
        writeln!(file, "{x},{d}")?;
    }
    file.flush()
}
