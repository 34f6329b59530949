use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{FittedModel, ModelKind};
use crate::inference::sandwich::{finalize, symmetric_inverse};
use crate::inference::{SandwichCovariance, SeMethod};
use crate::moments::marginal_mean;
use crate::series::CountSeries;

/// Method-of-moments estimates of the latent variance and autocovariances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimates {
    pub sigma_alpha_sq: f64,
    /// `gamma[tau - 1]` for `tau = 1..=max_lag`.
    pub gamma: Vec<f64>,
    /// The raw variance estimate was negative and has been set to zero.
    pub truncated: bool,
}

/// `floor(n^(1/3))`, computed exactly.
pub fn default_max_lag(n: usize) -> usize {
    let mut l = (n as f64).cbrt().round() as usize;
    while (l as u128).pow(3) > n as u128 {
        l -= 1;
    }
    while ((l + 1) as u128).pow(3) <= n as u128 {
        l += 1;
    }
    l
}

fn glm_means(fit: &FittedModel, data: &CountSeries) -> Result<Vec<f64>> {
    if fit.kind != ModelKind::Glm {
        return Err(Error::WrongModel { expected: "glm", found: fit.kind.to_string() });
    }
    marginal_mean(&DVector::from_column_slice(&fit.beta), data.x())
}

pub fn estimate_latent_moments(fit: &FittedModel, data: &CountSeries, max_lag: usize) -> Result<MomentEstimates> {
    let mu = glm_means(fit, data)?;
    let n = data.n();
    if max_lag >= n {
        return Err(Error::InvalidLag { ell: max_lag, n });
    }
    let r: Vec<f64> = data.y().iter().zip(&mu).map(|(&y, m)| y as f64 - m).collect();
    let num: f64 = r.iter().zip(&mu).map(|(ri, m)| ri * ri - m).sum();
    let den: f64 = mu.iter().map(|m| m * m).sum();
    let raw = num / den;
    let gamma = (1..=max_lag)
        .map(|tau| {
            let num: f64 = (0..n - tau).map(|t| r[t] * r[t + tau]).sum();
            let den: f64 = (0..n - tau).map(|t| mu[t] * mu[t + tau]).sum();
            num / den
        })
        .collect();
    Ok(MomentEstimates { sigma_alpha_sq: raw.max(0.0), gamma, truncated: raw < 0.0 })
}

/// GLM covariance `W^-1 + W^-1 V W^-1` under the given latent moments.
pub fn ddw_from_moments(
    fit: &FittedModel,
    data: &CountSeries,
    moments: &MomentEstimates,
) -> Result<SandwichCovariance> {
    let mu = glm_means(fit, data)?;
    let (n, d) = (data.n(), data.d());
    let x = data.x();
    let rows: Vec<DVector<f64>> = (0..n).map(|t| x.row(t).transpose()).collect();
    let mut w = DMatrix::zeros(d, d);
    let mut v = DMatrix::zeros(d, d);
    for t in 0..n {
        let outer = &rows[t] * rows[t].transpose();
        w += mu[t] * &outer;
        v += mu[t] * mu[t] * moments.sigma_alpha_sq * outer;
    }
    for (k, &g) in moments.gamma.iter().enumerate() {
        let tau = k + 1;
        if tau >= n || g == 0.0 {
            continue;
        }
        let mut lag = DMatrix::zeros(d, d);
        for t in 0..n - tau {
            lag += mu[t] * mu[t + tau] * &rows[t] * rows[t + tau].transpose();
        }
        v += g * (&lag + lag.transpose());
    }
    let w_inv = symmetric_inverse(&w)?;
    let cov = &w_inv + &w_inv * &v * &w_inv;
    let (cov, se) = finalize(cov)?;
    let mut warnings = Vec::new();
    if moments.truncated {
        warnings.push("negative latent variance estimate truncated to zero".to_string());
    }
    Ok(SandwichCovariance {
        method: SeMethod::Ddw,
        h_hat: -&w / n as f64,
        i_hat: (&w + &v) / n as f64,
        cov,
        se,
        ell: moments.gamma.len(),
        warnings,
    })
}

/// Moment-based GLM standard errors; `max_lag` defaults to `floor(n^(1/3))`.
pub fn ddw_moment_se(fit: &FittedModel, data: &CountSeries, max_lag: Option<usize>) -> Result<SandwichCovariance> {
    let lag = max_lag.unwrap_or_else(|| default_max_lag(data.n()));
    let moments = estimate_latent_moments(fit, data, lag)?;
    ddw_from_moments(fit, data, &moments)
}
