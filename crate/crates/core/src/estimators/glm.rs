//! Poisson log-linear regression by Newton-Raphson (IRLS for the canonical
//! link) with step halving.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::estimators::forward::ln_factorials;
use crate::estimators::optim::sup_norm;
use crate::estimators::{FittedModel, ModelKind};
use crate::series::CountSeries;

/// Fitted means below `exp(-20)` are treated as a diverging fit: the score
/// tolerance is met long before separated coefficients stop growing.
const MIN_ETA: f64 = -20.0;
const MAX_ETA: f64 = 700.0;

#[derive(Debug, Clone, Copy)]
pub struct GlmOptions {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for GlmOptions {
    fn default() -> Self {
        Self { max_iter: 100, tol: 1e-8 }
    }
}

fn means(data: &CountSeries, beta: &DVector<f64>) -> Option<DVector<f64>> {
    let eta = data.linear_predictor(beta);
    if eta.iter().any(|e| !e.is_finite() || *e > MAX_ETA) {
        return None;
    }
    Some(eta.map(f64::exp))
}

fn loglik_at(y: &[u64], lnfact: &[f64], eta_mu: &DVector<f64>) -> f64 {
    y.iter()
        .zip(lnfact)
        .zip(eta_mu.iter())
        .map(|((&yt, lf), &mu)| if yt == 0 { -mu } else { yt as f64 * mu.ln() - mu - lf })
        .sum()
}

/// Poisson GLM log-likelihood, including the `-log y!` terms.
pub fn poisson_loglik(data: &CountSeries, beta: &DVector<f64>) -> Result<f64> {
    let mu = means(data, beta).ok_or_else(|| Error::Domain("linear predictor overflows".into()))?;
    Ok(loglik_at(data.y(), &ln_factorials(data.y()), &mu))
}

fn deviance(y: &[u64], mu: &DVector<f64>) -> f64 {
    2.0 * y
        .iter()
        .zip(mu.iter())
        .map(|(&yt, &m)| {
            let yt = yt as f64;
            let term = if yt > 0.0 { yt * (yt / m).ln() } else { 0.0 };
            term - (yt - m)
        })
        .sum::<f64>()
}

fn score_and_info(data: &CountSeries, mu: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let x = data.x();
    let d = data.d();
    let mut score = DVector::zeros(d);
    let mut info = DMatrix::zeros(d, d);
    for t in 0..data.n() {
        let r = data.y()[t] as f64 - mu[t];
        for a in 0..d {
            score[a] += r * x[(t, a)];
            for b in 0..=a {
                info[(a, b)] += mu[t] * x[(t, a)] * x[(t, b)];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            info[(b, a)] = info[(a, b)];
        }
    }
    (score, info)
}

pub fn glm_fit(data: &CountSeries) -> Result<FittedModel> {
    glm_fit_with(data, &GlmOptions::default())
}

pub fn glm_fit_with(data: &CountSeries, opts: &GlmOptions) -> Result<FittedModel> {
    glm_fit_traced(data, opts).map(|(fit, _)| fit)
}

/// Fits the GLM and also returns the deviance after every iteration.
pub fn glm_fit_traced(data: &CountSeries, opts: &GlmOptions) -> Result<(FittedModel, Vec<f64>)> {
    data.check_full_rank()?;
    let total = data.total();
    if total == 0 {
        return Err(Error::NoPositiveCounts);
    }
    let d = data.d();
    let lnfact = ln_factorials(data.y());
    let mut beta = DVector::zeros(d);
    beta[0] = (total as f64 / data.n() as f64).ln();
    let mut mu = means(data, &beta).expect("intercept start is finite");
    let mut ll = loglik_at(data.y(), &lnfact, &mu);
    let mut trace = vec![deviance(data.y(), &mu)];
    let (mut score, mut info) = score_and_info(data, &mu);
    let mut iterations = 0;

    while sup_norm(&score) >= opts.tol && iterations < opts.max_iter {
        iterations += 1;
        let step = info
            .clone()
            .cholesky()
            .map(|c| c.solve(&score))
            .ok_or_else(|| Error::RankDeficient { rank: data.rank(), columns: d })?;
        let mut scale = 1.0;
        let mut moved = false;
        for _ in 0..40 {
            let trial = &beta + scale * &step;
            if let Some(mu_t) = means(data, &trial) {
                let ll_t = loglik_at(data.y(), &lnfact, &mu_t);
                // Rounding slack so the final Newton steps are never rejected.
                if ll_t >= ll - 1e-12 * ll.abs().max(1.0) {
                    beta = trial;
                    mu = mu_t;
                    ll = ll_t;
                    moved = true;
                    break;
                }
            }
            scale *= 0.5;
        }
        if !moved {
            break;
        }
        trace.push(deviance(data.y(), &mu));
        if data.linear_predictor(&beta).iter().any(|&e| e < MIN_ETA) {
            return Err(Error::Divergence(format!(
                "fitted means approach zero (beta = {:?}); the counts separate on a covariate",
                beta.as_slice()
            )));
        }
        (score, info) = score_and_info(data, &mu);
    }
    let gradient_norm = sup_norm(&score);
    if data.linear_predictor(&beta).iter().any(|&e| e < MIN_ETA) {
        return Err(Error::Divergence(format!(
            "fitted means approach zero (beta = {:?}); the counts separate on a covariate",
            beta.as_slice()
        )));
    }
    if gradient_norm >= opts.tol {
        return Err(Error::NotConverged { iterations, gradient_norm });
    }
    let fit = FittedModel {
        kind: ModelKind::Glm,
        beta: beta.iter().copied().collect(),
        latent: None,
        theta: beta.iter().copied().collect(),
        loglik: ll,
        n_iter: iterations,
        converged: true,
        gradient_norm,
        flags: Vec::new(),
    };
    Ok((fit, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn intercept_only_mle_is_log_mean() {
        let data = CountSeries::intercept_only(vec![1, 2, 3]).unwrap();
        let fit = glm_fit(&data).unwrap();
        assert_abs_diff_eq!(fit.beta[0], 2f64.ln(), epsilon = 1e-10);
        assert!(fit.converged && fit.gradient_norm < 1e-8);
    }

    #[test]
    fn binary_covariate_has_closed_form() {
        let y = vec![1, 0, 2, 4, 3, 1, 5, 6, 2, 7];
        let x = vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0];
        let data = CountSeries::with_covariates(y.clone(), vec![("x".into(), x.clone())]).unwrap();
        let fit = glm_fit(&data).unwrap();
        let mean = |g: f64| {
            let v: Vec<f64> = y.iter().zip(&x).filter(|(_, &xi)| xi == g).map(|(&yi, _)| yi as f64).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        assert_abs_diff_eq!(fit.beta[0], mean(0.0).ln(), epsilon = 1e-9);
        assert_abs_diff_eq!(fit.beta[1], (mean(1.0) / mean(0.0)).ln(), epsilon = 1e-9);
    }

    #[test]
    fn deviance_never_increases() {
        let y: Vec<u64> = (0..40).map(|t| ((t * 7) % 11) as u64).collect();
        let x: Vec<f64> = (0..40).map(|t| t as f64 / 40.0).collect();
        let data = CountSeries::with_covariates(y, vec![("trend".into(), x)]).unwrap();
        let (_, trace) = glm_fit_traced(&data, &GlmOptions::default()).unwrap();
        assert!(trace.len() > 2);
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{trace:?}");
        }
    }

    #[test]
    fn all_zero_counts_are_rejected() {
        let data = CountSeries::intercept_only(vec![0, 0, 0]).unwrap();
        assert!(matches!(glm_fit(&data), Err(Error::NoPositiveCounts)));
    }

    #[test]
    fn separated_group_diverges() {
        let data = CountSeries::with_covariates(
            vec![0, 0, 0, 3, 4, 5],
            vec![("x".into(), vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0])],
        )
        .unwrap();
        assert!(matches!(glm_fit(&data), Err(Error::Divergence(_) | Error::NotConverged { .. })));
    }
}
