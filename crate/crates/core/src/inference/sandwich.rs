use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::estimators::FittedModel;
use crate::inference::{scores_for, SandwichCovariance, SeMethod};
use crate::series::CountSeries;

pub const DEFAULT_ELL: usize = 1;

/// Score sums above this sup-norm mean the estimate is not a stationary point.
const SCORE_SUM_TOL: f64 = 1e-5;

/// `ell < n^(1/3)`, checked in integers.
pub fn ell_is_valid(ell: usize, n: usize) -> bool {
    (ell as u128).pow(3) < n as u128
}

/// Inverse of a symmetric matrix through its eigendecomposition; fails on a
/// (numerically) zero eigenvalue.
pub(crate) fn symmetric_inverse(h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = h.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let min = eig.eigenvalues.iter().copied().min_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap_or(0.0);
    if !(min.abs() > 1e-12 * max) || !max.is_finite() {
        return Err(Error::SingularHessian { eigenvalue: min });
    }
    let inv_vals = eig.eigenvalues.map(|v| 1.0 / v);
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&inv_vals) * eig.eigenvectors.transpose())
}

/// Symmetrizes `cov`, rejects negative variances and extracts standard errors.
pub(crate) fn finalize(cov: DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let cov = (&cov + cov.transpose()) * 0.5;
    let scale = cov.diagonal().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut se = Vec::with_capacity(cov.nrows());
    for i in 0..cov.nrows() {
        let v = cov[(i, i)];
        if !v.is_finite() || v < -1e-12 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::NegativeVariance { index: i, value: v });
        }
        se.push(v.max(0.0).sqrt());
    }
    Ok((cov, se))
}

/// White sandwich from conditional scores `s_t` (rows) and the mean
/// second-derivative matrix, with lag-`ell` cross products in `I`.
pub fn sandwich(scores: &DMatrix<f64>, h_hat: &DMatrix<f64>, ell: usize) -> Result<SandwichCovariance> {
    let n = scores.nrows();
    let p = scores.ncols();
    if h_hat.nrows() != p || h_hat.ncols() != p {
        return Err(Error::Domain(format!("H is {}x{} for {p} parameters", h_hat.nrows(), h_hat.ncols())));
    }
    if !ell_is_valid(ell, n) {
        return Err(Error::InvalidLag { ell, n });
    }
    let mut i_hat = scores.transpose() * scores;
    for tau in 1..=ell {
        let late = scores.rows(tau, n - tau);
        let early = scores.rows(0, n - tau);
        let cross = late.transpose() * early;
        i_hat += &cross + cross.transpose();
    }
    i_hat /= n as f64;
    let h_inv = symmetric_inverse(h_hat)?;
    let cov = &h_inv * &i_hat * &h_inv / n as f64;
    let (cov, se) = finalize(cov)?;
    Ok(SandwichCovariance { method: SeMethod::White, h_hat: h_hat.clone(), i_hat, cov, se, ell, warnings: Vec::new() })
}

/// White standard errors for any fitted working model.
pub fn white_se(fit: &FittedModel, data: &CountSeries, ell: usize) -> Result<SandwichCovariance> {
    let cs = scores_for(fit, data)?;
    let norm = cs.total_gradient().iter().fold(0.0_f64, |m, g| m.max(g.abs()));
    if !(norm < SCORE_SUM_TOL) {
        return Err(Error::NotAtOptimum { norm });
    }
    sandwich(&cs.scores, &cs.h_hat, ell)
}
