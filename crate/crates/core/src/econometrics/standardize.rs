//! Internal design-matrix conditioning: canonical row order, column
//! standardization, and rank checks.
//!
//! All fits sort rows into a canonical order before touching the data, so
//! estimates are bit-identical under row permutation, and standardize the
//! regressors so optimizer behavior does not depend on variable units.
//! Estimates and covariances are mapped back to the raw scale, which is an
//! exact affine transform.

use nalgebra::{DMatrix, DVector};

use super::EconError;

/// Canonical row order: lexicographic by `(y_i, x_i1, ..., x_ik)`.
pub(crate) fn canonical_order(y: &DVector<f64>, x: &DMatrix<f64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| {
        y[a].total_cmp(&y[b]).then_with(|| {
            for c in 0..x.ncols() {
                let cmp = x[(a, c)].total_cmp(&x[(b, c)]);
                if cmp != std::cmp::Ordering::Equal {
                    return cmp;
                }
            }
            std::cmp::Ordering::Equal
        })
    });
    order
}

pub(crate) fn permute_rows(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    order: &[usize],
) -> (DVector<f64>, DMatrix<f64>) {
    let yy = DVector::from_fn(y.len(), |i, _| y[order[i]]);
    let xx = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(order[i], j)]);
    (yy, xx)
}

/// Column scaler. At most one constant column is allowed (it plays the
/// intercept); other columns are centered and scaled to unit sample
/// standard deviation.
#[derive(Debug, Clone)]
pub(crate) struct ColumnScaler {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    /// Index and value of the constant column, when present.
    pub constant: Option<(usize, f64)>,
}

impl ColumnScaler {
    pub fn fit(x: &DMatrix<f64>, names: &[String]) -> Result<Self, EconError> {
        let n = x.nrows();
        let k = x.ncols();
        let mut means = vec![0.0; k];
        let mut sds = vec![1.0; k];
        let mut constant = None;
        for j in 0..k {
            let col = x.column(j);
            let mean = col.sum() / n as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            let sd = var.sqrt();
            if sd == 0.0 {
                if constant.is_some() {
                    return Err(EconError::RankDeficient {
                        column: names[j].clone(),
                    });
                }
                if mean == 0.0 {
                    return Err(EconError::RankDeficient {
                        column: names[j].clone(),
                    });
                }
                constant = Some((j, mean));
                means[j] = 0.0;
                sds[j] = 1.0;
            } else {
                means[j] = mean;
                sds[j] = sd;
            }
        }
        Ok(ColumnScaler {
            means,
            sds,
            constant,
        })
    }

    /// Standardized copy: constant column becomes exactly 1, other columns
    /// are centered/scaled only when a constant is present (otherwise just
    /// scaled, so the column space is preserved).
    pub fn transform(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let center = self.constant.is_some();
        DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            if let Some((c, _)) = self.constant {
                if j == c {
                    return 1.0;
                }
            }
            if center {
                (x[(i, j)] - self.means[j]) / self.sds[j]
            } else {
                x[(i, j)] / self.sds[j]
            }
        })
    }

    /// Matrix `A` with `beta_raw = A * beta_std`.
    pub fn jacobian(&self) -> DMatrix<f64> {
        let k = self.sds.len();
        let mut a = DMatrix::zeros(k, k);
        match self.constant {
            Some((c, value)) => {
                for j in 0..k {
                    if j == c {
                        a[(c, c)] = 1.0 / value;
                    } else {
                        a[(j, j)] = 1.0 / self.sds[j];
                        a[(c, j)] = -self.means[j] / (self.sds[j] * value);
                    }
                }
            }
            None => {
                for j in 0..k {
                    a[(j, j)] = 1.0 / self.sds[j];
                }
            }
        }
        a
    }

    #[cfg(test)]
    pub fn back_transform(&self, beta_std: &DVector<f64>) -> DVector<f64> {
        self.jacobian() * beta_std
    }
}

/// Rejects exactly collinear regressors via modified Gram-Schmidt on the
/// standardized columns. Near-collinear columns (tiny but nonzero residual)
/// pass; diagnostics like the variance inflation factor surface those.
pub(crate) fn check_rank(x_std: &DMatrix<f64>, names: &[String]) -> Result<(), EconError> {
    let n = x_std.nrows();
    let k = x_std.ncols();
    let tolerance = 1e-10 * (n as f64).sqrt();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(k);
    debug_assert_eq!(names.len(), k);
    for (column, name) in x_std.column_iter().zip(names) {
        let col = DVector::from_iterator(n, column.iter().copied());
        let scale = col.norm();
        if scale == 0.0 {
            return Err(EconError::RankDeficient {
                column: name.clone(),
            });
        }
        let mut v = col.clone();
        for b in &basis {
            let proj = b.dot(&v);
            v -= b * proj;
        }
        // Re-orthogonalize once; classic fix for numerical drift.
        for b in &basis {
            let proj = b.dot(&v);
            v -= b * proj;
        }
        let r = v.norm();
        if r <= tolerance * scale {
            return Err(EconError::RankDeficient {
                column: name.clone(),
            });
        }
        basis.push(v / r);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("x{i}")).collect()
    }

    #[test]
    fn scaler_round_trips_linear_predictor() {
        let x = DMatrix::from_row_slice(
            4,
            3,
            &[
                1.0, 10.0, -3.0, //
                1.0, 12.0, -1.0, //
                1.0, 9.0, 0.5, //
                1.0, 15.0, 2.0,
            ],
        );
        let scaler = ColumnScaler::fit(&x, &names(3)).unwrap();
        assert_eq!(scaler.constant, Some((0, 1.0)));
        let xs = scaler.transform(&x);
        let beta_std = DVector::from_vec(vec![0.7, -1.3, 2.1]);
        let beta_raw = scaler.back_transform(&beta_std);
        let pred_std = &xs * &beta_std;
        let pred_raw = &x * &beta_raw;
        for i in 0..4 {
            assert_relative_eq!(pred_std[i], pred_raw[i], max_relative = 1e-12);
        }
    }

    #[test]
    fn scaler_without_constant_only_scales() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 4.0, 2.0, 5.0, 3.0, 9.0]);
        let scaler = ColumnScaler::fit(&x, &names(2)).unwrap();
        assert_eq!(scaler.constant, None);
        let xs = scaler.transform(&x);
        let beta_std = DVector::from_vec(vec![1.0, 1.0]);
        let beta_raw = scaler.back_transform(&beta_std);
        let pred_std = &xs * &beta_std;
        let pred_raw = &x * &beta_raw;
        for i in 0..3 {
            assert_relative_eq!(pred_std[i], pred_raw[i], max_relative = 1e-12);
        }
    }

    #[test]
    fn duplicate_constant_columns_are_rank_deficient() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        let err = ColumnScaler::fit(&x, &names(2)).unwrap_err();
        assert!(matches!(err, EconError::RankDeficient { column } if column == "x1"));
    }

    #[test]
    fn rank_check_catches_exact_collinearity() {
        let x = DMatrix::from_row_slice(
            4,
            3,
            &[
                1.0, 2.0, 4.0, //
                1.0, 3.0, 6.0, //
                1.0, -1.0, -2.0, //
                1.0, 0.5, 1.0,
            ],
        );
        let nm = names(3);
        let scaler = ColumnScaler::fit(&x, &nm).unwrap();
        let err = check_rank(&scaler.transform(&x), &nm).unwrap_err();
        assert!(matches!(err, EconError::RankDeficient { column } if column == "x2"));
    }

    #[test]
    fn rank_check_passes_near_collinear() {
        // x2 = 2 * x1 + noise(1e-6): not exactly collinear.
        let x = DMatrix::from_row_slice(
            4,
            3,
            &[
                1.0, 2.0, 4.000001, //
                1.0, 3.0, 5.999998, //
                1.0, -1.0, -2.000003, //
                1.0, 0.5, 1.000002,
            ],
        );
        let nm = names(3);
        let scaler = ColumnScaler::fit(&x, &nm).unwrap();
        assert!(check_rank(&scaler.transform(&x), &nm).is_ok());
    }

    #[test]
    fn canonical_order_is_permutation_invariant() {
        let y = DVector::from_vec(vec![3.0, 1.0, 2.0, 1.0]);
        let x = DMatrix::from_row_slice(4, 2, &[9.0, 1.0, 5.0, 2.0, 7.0, 3.0, 4.0, 0.0]);
        let order = canonical_order(&y, &x);
        let (ys, xs) = permute_rows(&y, &x, &order);

        // Shuffle rows and re-sort: identical result.
        let shuffle = [2usize, 0, 3, 1];
        let (yp, xp) = permute_rows(&y, &x, &shuffle);
        let order2 = canonical_order(&yp, &xp);
        let (ys2, xs2) = permute_rows(&yp, &xp, &order2);
        assert_eq!(ys, ys2);
        assert_eq!(xs, xs2);
    }
}
