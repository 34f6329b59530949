//! Misspecification-robust standard errors.
//!
//! The White sandwich `H^-1 I H^-1 / n` is built from per-step conditional
//! scores `d log g(Y_t | Y_1..Y_{t-1}) / d theta`; for the mixture models
//! these come from the recursive forward derivatives. A moment-based
//! covariance for the GLM estimator is available as an alternative.

mod ddw;
mod sandwich;
mod scores;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use ddw::{ddw_from_moments, ddw_moment_se, default_max_lag, estimate_latent_moments, MomentEstimates};
pub use sandwich::{ell_is_valid, sandwich, white_se, DEFAULT_ELL};
pub use scores::{glm_scores, hmm_scores_lystig_hughes, scores_for};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeMethod {
    White,
    Ddw,
}

impl SeMethod {
    pub fn name(self) -> &'static str {
        match self {
            SeMethod::White => "white",
            SeMethod::Ddw => "ddw",
        }
    }
}

/// Per-step conditional scores (rows) and the mean second-derivative matrix.
#[derive(Debug, Clone)]
pub struct ConditionalScores {
    pub scores: DMatrix<f64>,
    /// `n^-1 sum_t d^2 log g_t / d theta^2` at the estimate.
    pub h_hat: DMatrix<f64>,
}

impl ConditionalScores {
    pub fn n(&self) -> usize {
        self.scores.nrows()
    }

    /// Column sums: the total log-likelihood gradient.
    pub fn total_gradient(&self) -> Vec<f64> {
        (0..self.scores.ncols()).map(|q| self.scores.column(q).sum()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichCovariance {
    pub method: SeMethod,
    #[serde(with = "matrix_rows")]
    pub h_hat: DMatrix<f64>,
    #[serde(with = "matrix_rows")]
    pub i_hat: DMatrix<f64>,
    #[serde(with = "matrix_rows")]
    pub cov: DMatrix<f64>,
    pub se: Vec<f64>,
    /// Lag truncation (White) or moment lag cap (DDW).
    pub ell: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

pub(crate) mod matrix_rows {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(serde::de::Error::custom("ragged matrix"));
        }
        Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
    }
}
