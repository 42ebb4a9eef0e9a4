//! Collinearity and descriptive diagnostics for regression designs.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::ols::ols_solve;
use super::special::two_sided_t_p;
use super::standardize::{check_rank, ColumnScaler};
use super::{significance_stars, EconError};

/// Variance inflation factor of one design column.
#[derive(Debug, Clone, PartialEq)]
pub struct VifEntry {
    pub name: String,
    pub vif: f64,
}

/// Variance inflation factors for every non-constant column of `x`.
///
/// Each column is regressed on all the others (always including an
/// intercept); `VIF = 1 / (1 - R^2)` of that auxiliary regression. The
/// constant column, if present, gets no entry. Exactly collinear designs
/// are rejected with the name of an offending column.
pub fn vif(x: &DMatrix<f64>, names: &[String]) -> Result<Vec<VifEntry>, EconError> {
    let n = x.nrows();
    let k = x.ncols();
    if names.len() != k {
        return Err(EconError::InvalidInput {
            reason: format!("{} names for {k} columns", names.len()),
        });
    }
    if k < 2 {
        return Err(EconError::InvalidInput {
            reason: "need at least two columns".to_string(),
        });
    }
    if n < k + 1 {
        return Err(EconError::InvalidInput {
            reason: format!("{n} rows cannot support {k} columns"),
        });
    }
    for j in 0..k {
        for i in 0..n {
            if !x[(i, j)].is_finite() {
                return Err(EconError::InvalidInput {
                    reason: format!("column {} contains a non-finite value", names[j]),
                });
            }
        }
    }
    let scaler = ColumnScaler::fit(x, names)?;
    let xs = scaler.transform(x);
    check_rank(&xs, names)?;
    let const_col = scaler.constant.map(|(j, _)| j);

    // Build the auxiliary design with an explicit intercept: the original
    // constant column (if any) is reused, otherwise one is prepended.
    let (aux, aux_names, offset): (DMatrix<f64>, Vec<String>, usize) = if const_col.is_some() {
        (x.clone(), names.to_vec(), 0)
    } else {
        let mut m = DMatrix::zeros(n, k + 1);
        m.view_mut((0, 0), (n, 1))
            .copy_from(&DMatrix::from_element(n, 1, 1.0));
        m.view_mut((0, 1), (n, k)).copy_from(x);
        let mut nm = vec!["const".to_string()];
        nm.extend_from_slice(names);
        (m, nm, 1)
    };

    let mut out = Vec::new();
    for j in 0..k {
        if Some(j) == const_col {
            continue;
        }
        let target_col = offset + j;
        let response = DVector::from_fn(n, |i, _| aux[(i, target_col)]);
        let others: Vec<usize> = (0..aux.ncols()).filter(|&c| c != target_col).collect();
        let mut design = DMatrix::zeros(n, others.len());
        for (c_new, &c_old) in others.iter().enumerate() {
            for i in 0..n {
                design[(i, c_new)] = aux[(i, c_old)];
            }
        }
        let (beta, rss) = ols_solve(&response, &design).map_err(|_| EconError::RankDeficient {
            column: aux_names[target_col].clone(),
        })?;
        let _ = beta;
        let mean = response.sum() / n as f64;
        let tss: f64 = response.iter().map(|v| (v - mean).powi(2)).sum();
        if tss <= 0.0 {
            return Err(EconError::DegenerateSample {
                reason: format!("column {} has zero variance", aux_names[target_col]),
            });
        }
        let r2 = (1.0 - rss / tss).clamp(0.0, 1.0);
        if r2 >= 1.0 {
            return Err(EconError::RankDeficient {
                column: aux_names[target_col].clone(),
            });
        }
        out.push(VifEntry {
            name: aux_names[target_col].clone(),
            vif: 1.0 / (1.0 - r2),
        });
    }
    Ok(out)
}

/// Per-column location and spread summary.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSummary {
    pub name: String,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

/// Mean, sample standard deviation (n-1 denominator), minimum and maximum
/// of each named column.
pub fn descriptive_stats(
    x: &DMatrix<f64>,
    names: &[String],
) -> Result<Vec<ColumnSummary>, EconError> {
    let n = x.nrows();
    if names.len() != x.ncols() {
        return Err(EconError::InvalidInput {
            reason: format!("{} names for {} columns", names.len(), x.ncols()),
        });
    }
    if n < 2 {
        return Err(EconError::InvalidInput {
            reason: "need at least two rows".to_string(),
        });
    }
    let mut out = Vec::with_capacity(x.ncols());
    for (col, name) in x.column_iter().zip(names) {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0;
        for &v in col.iter() {
            if !v.is_finite() {
                return Err(EconError::InvalidInput {
                    reason: format!("column {name} contains a non-finite value"),
                });
            }
            min = min.min(v);
            max = max.max(v);
            sum += v;
        }
        let mean = sum / n as f64;
        let ss: f64 = col.iter().map(|v| (v - mean).powi(2)).sum();
        out.push(ColumnSummary {
            name: name.clone(),
            n,
            mean,
            sd: (ss / (n as f64 - 1.0)).sqrt(),
            min,
            max,
        });
    }
    Ok(out)
}

/// One lower-triangle entry of a correlation matrix.
///
/// `r` and `p` are `None` when either column is constant, so the
/// correlation is undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationEntry {
    pub left: String,
    pub right: String,
    pub r: Option<f64>,
    pub p: Option<f64>,
}

/// Pairwise Pearson correlations over all column pairs `(i, j)` with
/// `i < j`, with two-sided p-values from the t reference with `n - 2`
/// degrees of freedom.
pub fn correlation_matrix(
    x: &DMatrix<f64>,
    names: &[String],
) -> Result<Vec<CorrelationEntry>, EconError> {
    let n = x.nrows();
    if names.len() != x.ncols() {
        return Err(EconError::InvalidInput {
            reason: format!("{} names for {} columns", names.len(), x.ncols()),
        });
    }
    if n < 3 {
        return Err(EconError::InvalidInput {
            reason: "need at least three rows".to_string(),
        });
    }
    let summaries = descriptive_stats(x, names)?;
    let mut out = Vec::new();
    for a in 0..x.ncols() {
        for b in (a + 1)..x.ncols() {
            let (ma, mb) = (summaries[a].mean, summaries[b].mean);
            let (sa, sb) = (summaries[a].sd, summaries[b].sd);
            if sa == 0.0 || sb == 0.0 {
                out.push(CorrelationEntry {
                    left: names[a].clone(),
                    right: names[b].clone(),
                    r: None,
                    p: None,
                });
                continue;
            }
            let mut cov = 0.0;
            for i in 0..n {
                cov += (x[(i, a)] - ma) * (x[(i, b)] - mb);
            }
            cov /= n as f64 - 1.0;
            let r = (cov / (sa * sb)).clamp(-1.0, 1.0);
            let p = if r.abs() >= 1.0 {
                0.0
            } else {
                let t = r * ((n as f64 - 2.0) / (1.0 - r * r)).sqrt();
                two_sided_t_p(t, n - 2)
            };
            out.push(CorrelationEntry {
                left: names[a].clone(),
                right: names[b].clone(),
                r: Some(r),
                p: Some(p),
            });
        }
    }
    Ok(out)
}

/// Writes column summaries as CSV (`column,n,mean,sd,min,max`).
pub fn write_descriptive_stats(
    path: &Path,
    summaries: &[ColumnSummary],
) -> Result<(), std::io::Error> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(file, "column,n,mean,sd,min,max")?;
    for s in summaries {
        writeln!(
            file,
            "{},{},{},{},{},{}",
            s.name, s.n, s.mean, s.sd, s.min, s.max
        )?;
    }
    file.flush()
}

/// Writes correlations in long format (`left,right,r,p,stars`); undefined
/// entries leave `r`, `p` and `stars` empty.
pub fn write_correlations(
    path: &Path,
    entries: &[CorrelationEntry],
) -> Result<(), std::io::Error> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(file, "left,right,r,p,stars")?;
    for e in entries {
        match (e.r, e.p) {
            (Some(r), Some(p)) => {
                writeln!(file, "{},{},{},{},{}", e.left, e.right, r, p, significance_stars(p))?
            }
            _ => writeln!(file, "{},{},,,", e.left, e.right)?,
        }
    }
    file.flush()
}

/// Writes variance inflation factors as CSV (`column,vif`).
pub fn write_vif(path: &Path, entries: &[VifEntry]) -> Result<(), std::io::Error> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(file, "column,vif")?;
    for e in entries {
        writeln!(file, "{},{}", e.name, e.vif)?;
    }
    file.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn names(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn vif_is_one_for_orthogonal_columns() {
        // Exactly orthogonal, mean-zero columns: the auxiliary regressions
        // explain nothing.
        let x = DMatrix::from_row_slice(
            4,
            3,
            &[
                1.0, 1.0, 1.0, //
                1.0, 1.0, -1.0, //
                1.0, -1.0, 1.0, //
                1.0, -1.0, -1.0,
            ],
        );
        let entries = vif(&x, &names(&["const", "a", "b"])).unwrap();
        assert_eq!(entries.len(), 2);
        for e in &entries {
            assert_relative_eq!(e.vif, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn vif_matches_closed_form_for_correlated_pair() {
        // Two standardized columns with correlation rho have
        // VIF = 1 / (1 - rho^2). Construct b = rho a + sqrt(1-rho^2) e
        // with a, e exactly orthonormal columns.
        let n = 8;
        let rho: f64 = 0.6;
        let mut a = DVector::zeros(n);
        let mut e = DVector::zeros(n);
        for i in 0..n {
            // Orthogonal +/-1 patterns with zero mean.
            a[i] = if i % 2 == 0 { 1.0 } else { -1.0 };
            e[i] = if (i / 2) % 2 == 0 { 1.0 } else { -1.0 };
        }
        let b = &a * rho + &e * (1.0 - rho * rho).sqrt();
        let mut x = DMatrix::zeros(n, 3);
        for i in 0..n {
            x[(i, 0)] = 1.0;
            x[(i, 1)] = a[i];
            x[(i, 2)] = b[i];
        }
        let entries = vif(&x, &names(&["const", "a", "b"])).unwrap();
        let expected = 1.0 / (1.0 - rho * rho); // 1.5625
        for entry in &entries {
            assert_relative_eq!(entry.vif, expected, epsilon = 1e-9);
        }
    }

    #[test]
    fn vif_without_constant_adds_one_internally() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let x = DMatrix::from_fn(200, 2, |_, _| normal.sample(&mut rng));
        let entries = vif(&x, &names(&["a", "b"])).unwrap();
        assert_eq!(entries.len(), 2);
        for e in &entries {
            assert!(e.vif >= 1.0 && e.vif < 1.2, "vif {}", e.vif);
        }
    }

    #[test]
    fn vif_rejects_exact_collinearity() {
        let n = 50;
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut x = DMatrix::zeros(n, 3);
        for i in 0..n {
            x[(i, 0)] = 1.0;
            x[(i, 1)] = normal.sample(&mut rng);
            x[(i, 2)] = 2.0 * x[(i, 1)];
        }
        match vif(&x, &names(&["const", "a", "twice_a"])) {
            Err(EconError::RankDeficient { column }) => {
                assert!(column == "a" || column == "twice_a");
            }
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn descriptive_stats_match_hand_computation() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 10.0, 2.0, 10.0, 3.0, 10.0, 4.0, 10.0]);
        let s = descriptive_stats(&x, &names(&["v", "c"])).unwrap();
        assert_relative_eq!(s[0].mean, 2.5);
        // Sample variance of 1..4 is 5/3.
        assert_relative_eq!(s[0].sd, (5.0f64 / 3.0).sqrt(), max_relative = 1e-12);
        assert_eq!(s[0].min, 1.0);
        assert_eq!(s[0].max, 4.0);
        assert_eq!(s[1].sd, 0.0);
    }

    #[test]
    fn correlations_hit_known_values() {
        // y = 2x exactly: r = 1, p = 0. z constant: undefined.
        let x = DMatrix::from_row_slice(
            5,
            3,
            &[
                1.0, 2.0, 7.0, //
                2.0, 4.0, 7.0, //
                3.0, 6.0, 7.0, //
                4.0, 8.0, 7.0, //
                5.0, 10.0, 7.0,
            ],
        );
        let entries = correlation_matrix(&x, &names(&["x", "y", "z"])).unwrap();
        assert_eq!(entries.len(), 3);
        let xy = &entries[0];
        assert_relative_eq!(xy.r.unwrap(), 1.0, epsilon = 1e-12);
        // r is 1 up to floating-point rounding, so p is zero or tiny.
        assert!(xy.p.unwrap() < 1e-20, "p {}", xy.p.unwrap());
        assert!(entries[1].r.is_none() && entries[2].r.is_none());
    }

    #[test]
    fn correlation_p_value_matches_t_reference() {
        // n = 5, r = 0.9: t = 0.9 sqrt(3 / 0.19) = 3.5762..., two-sided p
        // with 3 df is about 0.0374 (textbook value).
        let base = [1.0f64, 2.0, 3.0, 4.0, 5.0];
        // Construct a second column with sample correlation exactly 0.9 by
        // mixing with an orthogonal residual.
        let mean = 3.0;
        let centered: Vec<f64> = base.iter().map(|v| v - mean).collect();
        // Residual orthogonal to centered: [1, -1, 0, -1, 1] has dot 0 with
        // [-2,-1,0,1,2].
        let resid = [1.0, -1.0, 0.0, -1.0, 1.0];
        let norm_c = centered.iter().map(|v| v * v).sum::<f64>().sqrt();
        let norm_r = resid.iter().map(|v| v * v).sum::<f64>().sqrt();
        let rho: f64 = 0.9;
        let mut x = DMatrix::zeros(5, 2);
        for i in 0..5 {
            x[(i, 0)] = base[i];
            x[(i, 1)] =
                rho * centered[i] / norm_c + (1.0 - rho * rho).sqrt() * resid[i] / norm_r;
        }
        let entries = correlation_matrix(&x, &names(&["a", "b"])).unwrap();
        let e = &entries[0];
        assert_relative_eq!(e.r.unwrap(), 0.9, epsilon = 1e-12);
        assert_relative_eq!(e.p.unwrap(), 0.037386, epsilon = 5e-6);
    }

    #[test]
    fn writers_round_trip_basic_shape() {
        let dir = std::env::temp_dir().join(format!("diag-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.5, 2.0, 0.25, 3.0, 0.125, 4.0, 0.0625]);
        let nm = names(&["a", "b"]);
        let stats = descriptive_stats(&x, &nm).unwrap();
        let path = dir.join("stats.csv");
        write_descriptive_stats(&path, &stats).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("column,n,mean,sd,min,max\n"));
        assert_eq!(text.lines().count(), 3);
        let corr = correlation_matrix(&x, &nm).unwrap();
        let cpath = dir.join("corr.csv");
        write_correlations(&cpath, &corr).unwrap();
        let ctext = std::fs::read_to_string(&cpath).unwrap();
        assert!(ctext.starts_with("left,right,r,p,stars\n"));
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
