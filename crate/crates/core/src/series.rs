//! Observed counts paired with their design matrix.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const INTERCEPT: &str = "intercept";

/// A time series of counts `y_t` with covariate rows `X_t`.
///
/// The first column of `X` is always the intercept column of ones, so the
/// first regression coefficient is the intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct CountSeries {
    y: Vec<u64>,
    x: DMatrix<f64>,
    labels: Vec<String>,
}

impl CountSeries {
    pub fn new(y: Vec<u64>, x: DMatrix<f64>, labels: Vec<String>) -> Result<Self> {
        let n = y.len();
        let d = x.ncols();
        if x.nrows() != n {
            return Err(Error::InvalidSeries(format!("design has {} rows but there are {n} counts", x.nrows())));
        }
        if d == 0 {
            return Err(Error::InvalidSeries("design has no columns".into()));
        }
        if n < d {
            return Err(Error::InvalidSeries(format!("n = {n} is smaller than d = {d}")));
        }
        if labels.len() != d {
            return Err(Error::InvalidSeries(format!("{} labels for {d} design columns", labels.len())));
        }
        if let Some(t) = x.column(0).iter().position(|&v| v != 1.0) {
            return Err(Error::InvalidSeries(format!(
                "first design column must be all ones (row {t} is {})",
                x[(t, 0)]
            )));
        }
        if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries(format!(
                "non-finite design entry at row {}, column {}",
                pos % n,
                pos / n
            )));
        }
        Ok(Self { y, x, labels })
    }

    /// Builds a series from named covariate columns; the intercept is prepended.
    pub fn with_covariates(y: Vec<u64>, covariates: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let n = y.len();
        let d = covariates.len() + 1;
        for (name, col) in &covariates {
            if col.len() != n {
                return Err(Error::InvalidSeries(format!(
                    "covariate `{name}` has {} values for {n} counts",
                    col.len()
                )));
            }
        }
        let x = DMatrix::from_fn(n, d, |t, j| if j == 0 { 1.0 } else { covariates[j - 1].1[t] });
        let mut labels = Vec::with_capacity(d);
        labels.push(INTERCEPT.to_string());
        labels.extend(covariates.into_iter().map(|(name, _)| name));
        Self::new(y, x, labels)
    }

    pub fn intercept_only(y: Vec<u64>) -> Result<Self> {
        Self::with_covariates(y, Vec::new())
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn y(&self) -> &[u64] {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn total(&self) -> u64 {
        self.y.iter().sum()
    }

    /// Linear predictor `X beta`.
    pub fn linear_predictor(&self, beta: &DVector<f64>) -> DVector<f64> {
        &self.x * beta
    }

    /// Numerical rank of `X` from its singular values.
    pub fn rank(&self) -> usize {
        let sv = self.x.clone().svd(false, false).singular_values;
        let max = sv.iter().cloned().fold(0.0_f64, f64::max);
        let tol = max * (self.n().max(self.d()) as f64) * f64::EPSILON * 16.0;
        sv.iter().filter(|&&s| s > tol).count()
    }

    pub fn check_full_rank(&self) -> Result<()> {
        let rank = self.rank();
        if rank < self.d() {
            return Err(Error::RankDeficient { rank, columns: self.d() });
        }
        Ok(())
    }

    /// Returns the sub-series of rows `range`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        let rows = range.len();
        let x = self.x.rows(range.start, rows).into_owned();
        Self::new(self.y[range].to_vec(), x, self.labels.clone())
    }

    /// Two copies of the series back to back.
    pub fn doubled(&self) -> Self {
        let n = self.n();
        let x = DMatrix::from_fn(2 * n, self.d(), |t, j| self.x[(t % n, j)]);
        let mut y = self.y.clone();
        y.extend_from_slice(&self.y);
        Self { y, x, labels: self.labels.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intercept_only_has_one_column() {
        let s = CountSeries::intercept_only(vec![1, 2, 3]).unwrap();
        assert_eq!(s.n(), 3);
        assert_eq!(s.d(), 1);
        assert_eq!(s.labels(), &["intercept".to_string()]);
    }

    #[test]
    fn rejects_missing_intercept() {
        let x = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        let err = CountSeries::new(vec![0, 1], x, vec!["a".into()]).unwrap_err();
        assert!(matches!(err, Error::InvalidSeries(_)));
    }

    #[test]
    fn rejects_more_columns_than_rows() {
        let x = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        assert!(CountSeries::new(vec![3], x, vec!["a".into(), "b".into()]).is_err());
    }

    #[test]
    fn detects_rank_deficiency() {
        let s = CountSeries::with_covariates(
            vec![1, 2, 3, 4],
            vec![("a".into(), vec![1.0, 2.0, 3.0, 4.0]), ("b".into(), vec![2.0, 4.0, 6.0, 8.0])],
        )
        .unwrap();
        assert!(matches!(s.check_full_rank(), Err(Error::RankDeficient { rank: 2, columns: 3 })));
    }

    #[test]
    fn doubling_repeats_rows() {
        let s = CountSeries::with_covariates(vec![1, 5], vec![("a".into(), vec![0.5, 1.5])]).unwrap();
        let d = s.doubled();
        assert_eq!(d.y(), &[1, 5, 1, 5]);
        assert_eq!(d.x()[(3, 1)], 1.5);
    }
}
