//! Scaled forward recursion for Poisson hidden Markov likelihoods, with the
//! recursive first derivatives of the one-step predictive probabilities
//! `Lambda_t = P(Y_t | Y_1..Y_{t-1})` (Lystig and Hughes).
//!
//! The filtered state probabilities are renormalized at every step, so the
//! log-likelihood is accumulated as `sum_t log Lambda_t` and never underflows.

use nalgebra::{DMatrix, DVector};
use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};
use crate::estimators::params::{sigmoid, ModelKind, WorkingParams};
use crate::latent::LatentSpec;
use crate::series::CountSeries;

/// Latent chain quantities and their derivatives in `m` latent coordinates.
///
/// Flat layouts: `dpi[j*m + l]`, `trans[i*k + j]`, `dtrans[(i*k + j)*m + l]`,
/// `dstates[j*m + l]`.
#[derive(Debug, Clone)]
pub(crate) struct LatentJacobian {
    pub k: usize,
    pub m: usize,
    pub pi: Vec<f64>,
    pub dpi: Vec<f64>,
    pub trans: Vec<f64>,
    pub dtrans: Vec<f64>,
    pub states: Vec<f64>,
    pub dstates: Vec<f64>,
}

impl LatentJacobian {
    /// Chain quantities of an arbitrary finite-state spec, without derivatives.
    pub fn from_spec(spec: &LatentSpec) -> Result<Self> {
        let pi = spec
            .stationary()?
            .ok_or_else(|| Error::InvalidSpec("forward recursion needs a finite-state latent".into()))?;
        let p = spec.transition_matrix().expect("finite-state");
        let k = pi.len();
        Ok(Self {
            k,
            m: 0,
            pi: pi.iter().copied().collect(),
            dpi: Vec::new(),
            trans: (0..k * k).map(|ij| p[(ij / k, ij % k)]).collect(),
            dtrans: Vec::new(),
            states: spec.states().expect("finite-state").to_vec(),
            dstates: Vec::new(),
        })
    }

    /// Two-state chain of the working parameters with exact derivatives.
    pub fn from_working(params: &WorkingParams) -> Result<Option<Self>> {
        let Some(raw) = params.raw_latent()? else {
            return Ok(None);
        };
        let l = params.latent();
        let kind = params.kind();
        let m = kind.latent_len();
        let mut dpi = vec![0.0; 2 * m];
        let mut dtrans = vec![0.0; 4 * m];
        let s1 = l[m - 1];
        let pi1 = raw.pi[0];
        match kind {
            ModelKind::Fmm2 => {
                let dp1 = sigmoid(l[0]) * sigmoid(-l[0]);
                dpi[0] = dp1;
                dpi[m] = -dp1;
                for i in 0..2 {
                    dtrans[(i * 2) * m] = dp1;
                    dtrans[(i * 2 + 1) * m] = -dp1;
                }
            }
            ModelKind::Hmm2 => {
                let (p11, q1) = (sigmoid(l[0]), sigmoid(-l[0]));
                let (p22, q2) = (sigmoid(l[1]), sigmoid(-l[1]));
                let da = p11 * q1;
                let db = p22 * q2;
                // p11 = sigma(a), p12 = 1 - p11; p22 = sigma(b), p21 = 1 - p22.
                dtrans[0] = da;
                dtrans[m] = -da;
                dtrans[(2 + 1) * m + 1] = db;
                dtrans[2 * m + 1] = -db;
                // pi_1 = q2 / (q1 + q2), dq1/da = -da, dq2/db = -db.
                let s = (q1 + q2) * (q1 + q2);
                let dpi1_da = (q2 / s) * da;
                let dpi1_db = -(q1 / s) * db;
                dpi[0] = dpi1_da;
                dpi[1] = dpi1_db;
                dpi[m] = -dpi1_da;
                dpi[m + 1] = -dpi1_db;
            }
            ModelKind::Glm => unreachable!(),
        }
        // S_2 = log(1 - pi_1 e^{S_1}) - log(1 - pi_1).
        let e1 = s1.exp();
        let u = pi1 * e1;
        let ds2_dpi1 = -e1 / (1.0 - u) + 1.0 / (1.0 - pi1);
        let ds2_ds1 = -u / (1.0 - u);
        let mut dstates = vec![0.0; 2 * m];
        dstates[m - 1] = 1.0;
        for c in 0..m {
            dstates[m + c] = ds2_dpi1 * dpi[c];
        }
        dstates[m + m - 1] += ds2_ds1;
        Ok(Some(Self {
            k: 2,
            m,
            pi: raw.pi.to_vec(),
            dpi,
            trans: raw.trans.iter().flatten().copied().collect(),
            dtrans,
            states: raw.states.to_vec(),
            dstates,
        }))
    }
}

pub(crate) struct ForwardOutput {
    pub loglik: f64,
    /// Row `t` is the gradient of `log Lambda_t` in all working coordinates.
    pub scores: Option<DMatrix<f64>>,
}

pub(crate) fn ln_factorials(y: &[u64]) -> Vec<f64> {
    y.iter().map(|&v| ln_factorial(v)).collect()
}

fn linear_predictor(data: &CountSeries, beta: &DVector<f64>) -> Result<DVector<f64>> {
    let eta = data.linear_predictor(beta);
    if let Some(t) = eta.iter().position(|e| !e.is_finite() || *e > 700.0) {
        return Err(Error::Domain(format!("linear predictor overflows at t = {t}")));
    }
    Ok(eta)
}

/// Forward pass; `with_scores` also propagates the derivatives of the filter.
pub(crate) fn forward(
    lat: &LatentJacobian,
    data: &CountSeries,
    beta: &DVector<f64>,
    with_scores: bool,
) -> Result<ForwardOutput> {
    let n = data.n();
    let d = data.d();
    let k = lat.k;
    let m = if with_scores { lat.m } else { 0 };
    let p = d + m;
    let eta = linear_predictor(data, beta)?;
    let x = data.x();
    let y = data.y();

    let mut phi = vec![0.0; k];
    let mut dphi = vec![0.0; k * p];
    let mut c = vec![0.0; k];
    let mut dc = vec![0.0; k * p];
    let mut lf = vec![0.0; k];
    let mut lam = vec![0.0; k];
    let mut a = vec![0.0; k];
    let mut da = vec![0.0; k * p];
    let mut scores = with_scores.then(|| DMatrix::zeros(n, p));
    let mut loglik = 0.0;

    for t in 0..n {
        let yt = y[t] as f64;
        let lnfact = ln_factorial(y[t]);
        // Predicted state probabilities and their derivatives.
        if t == 0 {
            c.copy_from_slice(&lat.pi);
            if with_scores {
                dc.iter_mut().for_each(|v| *v = 0.0);
                for j in 0..k {
                    for l in 0..m {
                        dc[j * p + d + l] = lat.dpi[j * m + l];
                    }
                }
            }
        } else {
            for j in 0..k {
                c[j] = (0..k).map(|i| phi[i] * lat.trans[i * k + j]).sum();
            }
            if with_scores {
                for j in 0..k {
                    for q in 0..p {
                        let mut v = 0.0;
                        for i in 0..k {
                            v += dphi[i * p + q] * lat.trans[i * k + j];
                        }
                        if q >= d {
                            let l = q - d;
                            for i in 0..k {
                                v += phi[i] * lat.dtrans[(i * k + j) * m + l];
                            }
                        }
                        dc[j * p + q] = v;
                    }
                }
            }
        }
        // Emission log-densities, shifted by their maximum.
        let mut shift = f64::NEG_INFINITY;
        for j in 0..k {
            let ln_lambda = eta[t] + lat.states[j];
            lam[j] = ln_lambda.exp();
            lf[j] = yt * ln_lambda - lam[j] - lnfact;
            shift = shift.max(lf[j]);
        }
        let mut total = 0.0;
        for j in 0..k {
            a[j] = c[j] * (lf[j] - shift).exp();
            total += a[j];
        }
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Domain(format!("predictive probability vanished at t = {t}")));
        }
        loglik += total.ln() + shift;
        for j in 0..k {
            phi[j] = a[j] / total;
        }
        if let Some(scores) = scores.as_mut() {
            for j in 0..k {
                let ftilde = (lf[j] - shift).exp();
                let resid = yt - lam[j];
                for q in 0..p {
                    let dlogf = if q < d { resid * x[(t, q)] } else { resid * lat.dstates[j * m + (q - d)] };
                    da[j * p + q] = dc[j * p + q] * ftilde + a[j] * dlogf;
                }
            }
            for q in 0..p {
                let g: f64 = (0..k).map(|j| da[j * p + q]).sum::<f64>() / total;
                scores[(t, q)] = g;
                for j in 0..k {
                    dphi[j * p + q] = da[j * p + q] / total - phi[j] * g;
                }
            }
        }
    }
    if !loglik.is_finite() {
        return Err(Error::Domain("log-likelihood is not finite".into()));
    }
    Ok(ForwardOutput { loglik, scores })
}

/// Log-likelihood of a finite-state latent model at coefficients `beta`.
pub fn loglik_spec(spec: &LatentSpec, beta: &DVector<f64>, data: &CountSeries) -> Result<f64> {
    let lat = LatentJacobian::from_spec(spec)?;
    Ok(forward(&lat, data, beta, false)?.loglik)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::params::logit;
    use approx::assert_abs_diff_eq;

    fn toy() -> CountSeries {
        CountSeries::with_covariates(
            vec![0, 3, 1, 7, 2, 0, 5, 4],
            vec![("x".into(), vec![0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0])],
        )
        .unwrap()
    }

    #[test]
    fn single_step_is_the_stationary_mixture() {
        let data = CountSeries::intercept_only(vec![4]).unwrap();
        let w = WorkingParams::from_parts(ModelKind::Hmm2, &[0.7], &[logit(0.8), logit(0.6), -0.4]).unwrap();
        let lat = LatentJacobian::from_working(&w).unwrap().unwrap();
        let ll = forward(&lat, &data, &w.beta(), false).unwrap().loglik;
        let direct: f64 = (0..2)
            .map(|j| {
                let lam = (0.7 + lat.states[j]).exp();
                lat.pi[j] * (4.0 * lam.ln() - lam - 24f64.ln()).exp()
            })
            .sum::<f64>()
            .ln();
        assert_abs_diff_eq!(ll, direct, epsilon = 1e-13);
    }

    #[test]
    fn scores_sum_to_total_gradient() {
        let data = toy();
        let w = WorkingParams::from_parts(ModelKind::Hmm2, &[0.3, 0.5], &[1.2, 0.4, -0.6]).unwrap();
        let lat = LatentJacobian::from_working(&w).unwrap().unwrap();
        let out = forward(&lat, &data, &w.beta(), true).unwrap();
        let scores = out.scores.unwrap();
        let h = 1e-6;
        for q in 0..w.len() {
            let mut plus = w.theta().clone();
            plus[q] += h;
            let mut minus = w.theta().clone();
            minus[q] -= h;
            let f = |th: DVector<f64>| {
                let w2 = w.with_theta(th).unwrap();
                let l2 = LatentJacobian::from_working(&w2).unwrap().unwrap();
                forward(&l2, &data, &w2.beta(), false).unwrap().loglik
            };
            let fd = (f(plus) - f(minus)) / (2.0 * h);
            let g: f64 = scores.column(q).sum();
            assert_abs_diff_eq!(g, fd, epsilon = 1e-6);
        }
    }
}
