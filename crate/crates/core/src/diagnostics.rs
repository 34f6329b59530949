//! Residual diagnostics: estimate OD, AC1 and SP from a fitted Poisson GLM
//! and pick the estimator that is expected to be most efficient.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{fmm_fit_with, glm_fit, FittedModel, MixtureOptions, ModelKind};
use crate::moments::{marginal_mean, mean_separation, FactorProfile, Level};
use crate::series::CountSeries;

/// AC1 needs a handful of adjacent pairs to mean anything.
pub const MIN_N: usize = 10;

/// Regression dimension (intercept included) from which the GLM is always preferred.
pub const MAX_HMM_D: usize = 4;

/// Pearson residuals `(y - mu) / sqrt(mu)` of a GLM fit.
pub fn standardized_residuals(fit: &FittedModel, data: &CountSeries) -> Result<Vec<f64>> {
    if fit.kind != ModelKind::Glm {
        return Err(Error::WrongModel { expected: "glm", found: fit.kind.to_string() });
    }
    let mu = fitted_means(&fit.beta, data)?;
    Ok(data.y().iter().zip(&mu).map(|(&y, &m)| (y as f64 - m) / m.sqrt()).collect())
}

fn fitted_means(beta: &[f64], data: &CountSeries) -> Result<Vec<f64>> {
    marginal_mean(&nalgebra::DVector::from_column_slice(beta), data.x())
}

fn sample_variance(r: &[f64]) -> f64 {
    let m = r.iter().sum::<f64>() / r.len() as f64;
    r.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (r.len() - 1) as f64
}

fn lag1_autocorrelation(r: &[f64]) -> f64 {
    let m = r.iter().sum::<f64>() / r.len() as f64;
    let den: f64 = r.iter().map(|x| (x - m).powi(2)).sum();
    if den == 0.0 {
        return 0.0;
    }
    r.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum::<f64>() / den
}

/// SP of a 2-state mixture fitted to the data, evaluated on its own mean
/// curve. A mixture that collapses onto the GLM has no separation.
pub fn estimate_separation(data: &CountSeries, glm: &FittedModel) -> f64 {
    let Ok(fmm) = fmm_fit_with(data, glm, &MixtureOptions::default()) else {
        return 0.0;
    };
    let (Some(states), Ok(mu)) = (fmm.latent.as_ref().and_then(|l| l.states()), fitted_means(&fmm.beta, data)) else {
        return 0.0;
    };
    if fmm.is_degenerate() {
        return 0.0;
    }
    mean_separation(&mu, states[0], states[1])
}

/// Factor estimates from GLM residuals: OD as the residual variance, AC1 as
/// their lag-1 autocorrelation, SP from a fitted 2-state mixture.
pub fn estimate_factors(residuals: &[f64], fit: &FittedModel, data: &CountSeries) -> Result<FactorProfile> {
    let n = residuals.len();
    if n < MIN_N {
        return Err(Error::InsufficientData { n, required: MIN_N });
    }
    if n != data.n() {
        return Err(Error::InvalidSeries(format!("{n} residuals for {} observations", data.n())));
    }
    let od = sample_variance(residuals);
    let ac1 = lag1_autocorrelation(residuals);
    let sp = estimate_separation(data, fit);
    Ok(FactorProfile::new(od, ac1, vec![sp]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub chosen: ModelKind,
    pub profile: FactorProfile,
    pub rule: String,
    /// Number of regression coefficients, intercept included.
    pub d: usize,
}

/// The decision rule. The mixture estimator is never chosen: where it helps,
/// the hidden Markov estimator helps more.
pub fn recommend(profile: &FactorProfile, d: usize) -> Recommendation {
    let (sp, ac1) = (profile.levels.sp, profile.levels.ac1);
    let (chosen, rule) = if d >= MAX_HMM_D {
        (ModelKind::Glm, format!("d = {d} >= {MAX_HMM_D}: too many covariates for the HMM2 SE to be reliable, use GLM"))
    } else if sp == Level::High {
        (ModelKind::Hmm2, format!("d = {d} < {MAX_HMM_D} and SP high: use HMM2"))
    } else if sp >= Level::Medium && ac1 >= Level::Medium {
        (ModelKind::Hmm2, format!("d = {d} < {MAX_HMM_D}, SP {sp} and AC1 {ac1} (both at least medium): use HMM2"))
    } else {
        (ModelKind::Glm, format!("SP {sp}, AC1 {ac1}: latent structure too weak to exploit, use GLM"))
    };
    Recommendation { chosen, profile: profile.clone(), rule, d }
}

/// Full pipeline: GLM fit, residuals, factor estimates, recommendation.
pub fn diagnose(data: &CountSeries) -> Result<Recommendation> {
    let fit = glm_fit(data)?;
    let r = standardized_residuals(&fit, data)?;
    let profile = estimate_factors(&r, &fit, data)?;
    Ok(recommend(&profile, data.d()))
}
