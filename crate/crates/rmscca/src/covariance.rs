//! Classical and rank-based covariance estimation, and assembly of the
//! scaled cross-covariance matrix that drives the canonical-pair search.
//!
//! The resistant variant replaces every observation by its column midrank
//! before the usual covariance formula is applied, so heavy tails and
//! leverage points cannot dominate the estimate.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which covariance estimator backs the analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorMode {
    /// Sample covariance on raw values (maximum-likelihood style, divisor n-1).
    Pearson,
    /// Sample covariance on column midranks (resistant).
    Spearman,
}

impl std::fmt::Display for EstimatorMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EstimatorMode::Pearson => write!(f, "pearson"),
            EstimatorMode::Spearman => write!(f, "spearman"),
        }
    }
}

/// Two sample-aligned numeric matrices: `x` is n x p, `y` is n x q.
///
/// Rows are observations, columns are variables. Construction validates the
/// invariants every downstream routine relies on: matching row counts,
/// n >= 3, finite entries, and no constant columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DataPair {
    x: Array2<f64>,
    y: Array2<f64>,
    x_names: Option<Vec<String>>,
    y_names: Option<Vec<String>>,
}

impl DataPair {
    pub fn new(x: Array2<f64>, y: Array2<f64>) -> Result<Self> {
        Self::with_names(x, y, None, None)
    }

    pub fn with_names(
        x: Array2<f64>,
        y: Array2<f64>,
        x_names: Option<Vec<String>>,
        y_names: Option<Vec<String>>,
    ) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "x has {} rows but y has {}",
                x.nrows(),
                y.nrows()
            )));
        }
        if x.nrows() < 3 {
            return Err(Error::InvalidInput(format!(
                "need at least 3 observations, got {}",
                x.nrows()
            )));
        }
        if x.ncols() == 0 || y.ncols() == 0 {
            return Err(Error::InvalidInput("x and y must each have at least one column".into()));
        }
        if let Some(names) = &x_names {
            if names.len() != x.ncols() {
                return Err(Error::InvalidInput("x column-name count does not match x".into()));
            }
        }
        if let Some(names) = &y_names {
            if names.len() != y.ncols() {
                return Err(Error::InvalidInput("y column-name count does not match y".into()));
            }
        }
        let pair = Self { x, y, x_names, y_names };
        pair.validate_columns()?;
        Ok(pair)
    }

    fn validate_columns(&self) -> Result<()> {
        for (matrix, side) in [(&self.x, Side::X), (&self.y, Side::Y)] {
            for (j, col) in matrix.columns().into_iter().enumerate() {
                let mut min = f64::INFINITY;
                let mut max = f64::NEG_INFINITY;
                for &v in col.iter() {
                    if !v.is_finite() {
                        return Err(Error::InvalidInput(format!(
                            "non-finite value in column '{}'",
                            self.column_name(side, j)
                        )));
                    }
                    min = min.min(v);
                    max = max.max(v);
                }
                if min == max {
                    return Err(Error::DegenerateColumn {
                        name: self.column_name(side, j),
                        mode: EstimatorMode::Pearson,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn y(&self) -> &Array2<f64> {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn q(&self) -> usize {
        self.y.ncols()
    }

    pub fn x_names(&self) -> Option<&[String]> {
        self.x_names.as_deref()
    }

    pub fn y_names(&self) -> Option<&[String]> {
        self.y_names.as_deref()
    }

    pub(crate) fn column_name(&self, side: Side, j: usize) -> String {
        let names = match side {
            Side::X => &self.x_names,
            Side::Y => &self.y_names,
        };
        match names {
            Some(names) => names[j].clone(),
            None => match side {
                Side::X => format!("x{}", j + 1),
                Side::Y => format!("y{}", j + 1),
            },
        }
    }

    /// Restrict to a subset of rows (used for cross-validation splits).
    /// Skips re-validation: a split may legitimately contain columns that
    /// degenerate under the estimator; `build_k` reports those.
    pub(crate) fn subset_rows(&self, rows: &[usize]) -> DataPair {
        let take = |m: &Array2<f64>| {
            let mut out = Array2::zeros((rows.len(), m.ncols()));
            for (i, &r) in rows.iter().enumerate() {
                out.row_mut(i).assign(&m.row(r));
            }
            out
        };
        DataPair {
            x: take(&self.x),
            y: take(&self.y),
            x_names: self.x_names.clone(),
            y_names: self.y_names.clone(),
        }
    }

    /// Same x, y rows reordered by `perm` (row i of the result is row
    /// `perm[i]` of the original y).
    pub(crate) fn with_permuted_y(&self, perm: &[usize]) -> DataPair {
        assert_eq!(perm.len(), self.n());
        let mut y = Array2::zeros(self.y.raw_dim());
        for (i, &r) in perm.iter().enumerate() {
            y.row_mut(i).assign(&self.y.row(r));
        }
        DataPair {
            x: self.x.clone(),
            y,
            x_names: self.x_names.clone(),
            y_names: self.y_names.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Side {
    X,
    Y,
}

/// The scaled cross-covariance matrix K = Dxx^{-1/2} Cov(x, y) Dyy^{-1/2},
/// with Dxx, Dyy the diagonals of the within-set covariance matrices under
/// the chosen estimator. The scaling vectors are kept so canonical vectors
/// can be recovered from singular vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct KMatrix {
    pub k: Array2<f64>,
    pub dxx_inv_sqrt: Array1<f64>,
    pub dyy_inv_sqrt: Array1<f64>,
    pub mode: EstimatorMode,
}

impl KMatrix {
    pub fn p(&self) -> usize {
        self.k.nrows()
    }

    pub fn q(&self) -> usize {
        self.k.ncols()
    }
}

/// Replace each column by its midranks: value j gets the average of the
/// rank positions its tie group spans, so ties share a fractional rank and
/// column sums are always n(n+1)/2.
pub fn rank_transform(m: &Array2<f64>) -> Result<Array2<f64>> {
    if m.nrows() < 2 || m.ncols() == 0 {
        return Err(Error::InvalidInput(format!(
            "rank transform needs >= 2 rows and >= 1 column, got {} x {}",
            m.nrows(),
            m.ncols()
        )));
    }
    let mut out = Array2::zeros(m.raw_dim());
    for (j, col) in m.columns().into_iter().enumerate() {
        let ranks = midranks(col.as_standard_layout().as_slice().unwrap());
        for (i, r) in ranks.into_iter().enumerate() {
            out[[i, j]] = r;
        }
    }
    Ok(out)
}

/// Midranks of one column; ties receive the average of the positions they span.
pub(crate) fn midranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end (1-based); midrank is their mean
        let midrank = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = midrank;
        }
        start = end;
    }
    ranks
}

/// Sample covariance of the columns of `m` (divisor n-1). Spearman mode
/// ranks each column first. The output is exactly symmetric: only the upper
/// triangle is computed and then mirrored.
pub fn covariance(m: &Array2<f64>, mode: EstimatorMode) -> Result<Array2<f64>> {
    if m.nrows() < 2 {
        return Err(Error::InvalidInput(format!(
            "covariance needs >= 2 rows, got {}",
            m.nrows()
        )));
    }
    let working = match mode {
        EstimatorMode::Pearson => m.clone(),
        EstimatorMode::Spearman => rank_transform(m)?,
    };
    let centered = center_columns(&working);
    let d = centered.ncols();
    let denom = (centered.nrows() - 1) as f64;
    let mut cov = Array2::zeros((d, d));
    for i in 0..d {
        let ci = centered.column(i);
        for j in i..d {
            let v = ci.dot(&centered.column(j)) / denom;
            cov[[i, j]] = v;
            cov[[j, i]] = v;
        }
    }
    Ok(cov)
}

fn center_columns(m: &Array2<f64>) -> Array2<f64> {
    let n = m.nrows() as f64;
    let mut out = m.clone();
    for mut col in out.columns_mut() {
        let mean = col.sum() / n;
        col.mapv_inplace(|v| v - mean);
    }
    out
}

/// Build the scaled cross-covariance matrix for a data pair:
/// `k[i][j] = Cov(x_i, y_j) / (sd(x_i) * sd(y_j))` under the chosen estimator,
/// where the standard deviations come from the diagonal of the within-set
/// covariance. A zero diagonal entry aborts with the offending column named.
pub fn build_k(data: &DataPair, mode: EstimatorMode) -> Result<KMatrix> {
    let (x, y) = match mode {
        EstimatorMode::Pearson => (data.x().clone(), data.y().clone()),
        EstimatorMode::Spearman => (rank_transform(data.x())?, rank_transform(data.y())?),
    };
    let xc = center_columns(&x);
    let yc = center_columns(&y);
    let denom = (data.n() - 1) as f64;

    let dxx_inv_sqrt = inv_sqrt_column_variances(&xc, denom, data, Side::X, mode)?;
    let dyy_inv_sqrt = inv_sqrt_column_variances(&yc, denom, data, Side::Y, mode)?;

    let mut k = xc.t().dot(&yc);
    k.mapv_inplace(|v| v / denom);
    for (i, mut row) in k.rows_mut().into_iter().enumerate() {
        for (j, entry) in row.iter_mut().enumerate() {
            *entry *= dxx_inv_sqrt[i] * dyy_inv_sqrt[j];
        }
    }
    Ok(KMatrix { k, dxx_inv_sqrt, dyy_inv_sqrt, mode })
}

fn inv_sqrt_column_variances(
    centered: &Array2<f64>,
    denom: f64,
    data: &DataPair,
    side: Side,
    mode: EstimatorMode,
) -> Result<Array1<f64>> {
    let mut out = Array1::zeros(centered.ncols());
    for (j, col) in centered.columns().into_iter().enumerate() {
        let var = col.dot(&col) / denom;
        if !var.is_finite() || var <= 0.0 {
            return Err(Error::DegenerateColumn { name: data.column_name(side, j), mode });
        }
        out[j] = 1.0 / var.sqrt();
    }
    Ok(out)
}
