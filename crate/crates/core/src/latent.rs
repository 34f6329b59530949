//! Latent processes `alpha_t` with `E[exp(alpha_t)] = 1` and their moments.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ROW_TOL: f64 = 1e-9;
const MEAN_ONE_TOL: f64 = 1e-8;

/// Generative description of the latent process.
///
/// States are on the log scale. Transition matrices are stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
pub enum LatentSpec {
    Hmm { states: Vec<f64>, transition: Vec<Vec<f64>> },
    Fmm { states: Vec<f64>, probs: Vec<f64> },
    Ar1 { phi: f64, sigma2: f64 },
}

impl LatentSpec {
    pub fn hmm(states: Vec<f64>, transition: Vec<Vec<f64>>) -> Result<Self> {
        let spec = LatentSpec::Hmm { states, transition };
        spec.validate()?;
        Ok(spec)
    }

    pub fn fmm(states: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        let spec = LatentSpec::Fmm { states, probs };
        spec.validate()?;
        Ok(spec)
    }

    pub fn ar1(phi: f64, sigma2: f64) -> Result<Self> {
        let spec = LatentSpec::Ar1 { phi, sigma2 };
        spec.validate()?;
        Ok(spec)
    }

    /// The degenerate latent process `alpha_t = 0`.
    pub fn null() -> Self {
        LatentSpec::Ar1 { phi: 0.0, sigma2: 0.0 }
    }

    /// K-state chain with `p_ii = stay` and `p_ij = (1 - stay)/(K - 1)`.
    pub fn uniform_switching(k: usize, stay: f64) -> Vec<Vec<f64>> {
        let off = if k > 1 { (1.0 - stay) / (k - 1) as f64 } else { 0.0 };
        (0..k)
            .map(|i| {
                (0..k)
                    .map(|j| {
                        if i == j {
                            if k > 1 {
                                stay
                            } else {
                                1.0
                            }
                        } else {
                            off
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Parses and validates a JSON description.
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: LatentSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LatentSpec::Hmm { states, transition } => {
                check_states(states)?;
                let k = states.len();
                if transition.len() != k || transition.iter().any(|r| r.len() != k) {
                    return Err(Error::InvalidSpec(format!("transition matrix must be {k}x{k}")));
                }
                for (i, row) in transition.iter().enumerate() {
                    check_probabilities(row, &format!("transition row {i}"))?;
                }
                let pi = stationary_distribution(&self.transition_matrix().expect("hmm"))?;
                check_mean_one(states, pi.as_slice())
            }
            LatentSpec::Fmm { states, probs } => {
                check_states(states)?;
                if probs.len() != states.len() {
                    return Err(Error::InvalidSpec("one probability per state is required".into()));
                }
                check_probabilities(probs, "mixing probabilities")?;
                check_mean_one(states, probs)
            }
            LatentSpec::Ar1 { phi, sigma2 } => {
                if !(phi.is_finite() && phi.abs() < 1.0) {
                    return Err(Error::InvalidSpec(format!("AR(1) coefficient {phi} is outside (-1, 1)")));
                }
                if !(sigma2.is_finite() && *sigma2 >= 0.0) {
                    return Err(Error::InvalidSpec(format!("innovation variance {sigma2} must be >= 0")));
                }
                Ok(())
            }
        }
    }

    pub fn num_states(&self) -> Option<usize> {
        match self {
            LatentSpec::Hmm { states, .. } | LatentSpec::Fmm { states, .. } => Some(states.len()),
            LatentSpec::Ar1 { .. } => None,
        }
    }

    pub fn states(&self) -> Option<&[f64]> {
        match self {
            LatentSpec::Hmm { states, .. } | LatentSpec::Fmm { states, .. } => Some(states),
            LatentSpec::Ar1 { .. } => None,
        }
    }

    /// Transition matrix; for a mixture every row equals the mixing probabilities.
    pub fn transition_matrix(&self) -> Option<DMatrix<f64>> {
        match self {
            LatentSpec::Hmm { transition, .. } => {
                let k = transition.len();
                Some(DMatrix::from_fn(k, k, |i, j| transition[i][j]))
            }
            LatentSpec::Fmm { probs, .. } => {
                let k = probs.len();
                Some(DMatrix::from_fn(k, k, |_, j| probs[j]))
            }
            LatentSpec::Ar1 { .. } => None,
        }
    }

    /// Stationary state distribution (the initial law of the chain).
    pub fn stationary(&self) -> Result<Option<DVector<f64>>> {
        match self {
            LatentSpec::Hmm { .. } => Ok(Some(stationary_distribution(&self.transition_matrix().expect("hmm"))?)),
            LatentSpec::Fmm { probs, .. } => Ok(Some(DVector::from_column_slice(probs))),
            LatentSpec::Ar1 { .. } => Ok(None),
        }
    }

    /// The same mixture written as a chain with identical rows.
    pub fn fmm_as_hmm(&self) -> Option<LatentSpec> {
        match self {
            LatentSpec::Fmm { states, probs } => {
                Some(LatentSpec::Hmm { states: states.clone(), transition: vec![probs.clone(); probs.len()] })
            }
            _ => None,
        }
    }

    /// Intercept of the AR(1) recursion that keeps `E[exp(alpha_t)] = 1`.
    pub fn ar1_intercept(phi: f64, sigma2: f64) -> f64 {
        -sigma2 / (2.0 * (1.0 + phi))
    }

    /// Mean and variance of the stationary normal law of an AR(1) latent.
    pub fn ar1_stationary_normal(phi: f64, sigma2: f64) -> (f64, f64) {
        let v = sigma2 / (1.0 - phi * phi);
        (-v / 2.0, v)
    }
}

fn check_states(states: &[f64]) -> Result<()> {
    if states.is_empty() {
        return Err(Error::InvalidSpec("at least one state is required".into()));
    }
    if states.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidSpec("states must be finite".into()));
    }
    // Equal adjacent states are allowed: they are the collapsed (GLM) boundary of a fit.
    if states.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidSpec(format!("states must be increasing: {states:?}")));
    }
    Ok(())
}

fn check_probabilities(p: &[f64], what: &str) -> Result<()> {
    if p.iter().any(|v| !(v.is_finite() && (0.0..=1.0).contains(v))) {
        return Err(Error::InvalidSpec(format!("{what} has entries outside [0, 1]: {p:?}")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > ROW_TOL {
        return Err(Error::InvalidSpec(format!("{what} sums to {sum}, not 1")));
    }
    Ok(())
}

fn check_mean_one(states: &[f64], weights: &[f64]) -> Result<()> {
    let m: f64 = states.iter().zip(weights).map(|(s, w)| w * s.exp()).sum();
    if (m - 1.0).abs() > MEAN_ONE_TOL {
        return Err(Error::InvalidSpec(format!("E[exp(alpha)] = {m}, not 1")));
    }
    Ok(())
}

/// Shifts `states` so that `sum_j w_j exp(S_j) = 1`.
pub fn normalize_mean_one(states: &[f64], weights: &[f64]) -> Vec<f64> {
    let m: f64 = states.iter().zip(weights).map(|(s, w)| w * s.exp()).sum();
    let shift = m.ln();
    states.iter().map(|s| s - shift).collect()
}

/// Unique stationary distribution of an irreducible aperiodic chain.
pub fn stationary_distribution(p: &DMatrix<f64>) -> Result<DVector<f64>> {
    let k = p.nrows();
    if k == 0 || p.ncols() != k {
        return Err(Error::InvalidSpec("transition matrix must be square and non-empty".into()));
    }
    for i in 0..k {
        let row = p.row(i);
        if row.iter().any(|v| !(v.is_finite() && (0.0..=1.0).contains(v))) {
            return Err(Error::InvalidSpec(format!("transition row {i} has entries outside [0, 1]")));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_TOL {
            return Err(Error::InvalidSpec(format!("transition row {i} sums to {sum}")));
        }
    }
    // A stochastic matrix is primitive iff P^((k-1)^2 + 1) is entrywise positive.
    let mut reach = p.map(|v| if v > 0.0 { 1.0 } else { 0.0 });
    let step = reach.clone();
    for _ in 0..(k - 1) * (k - 1) {
        reach = (&reach * &step).map(|v| if v > 0.0 { 1.0 } else { 0.0 });
    }
    if reach.iter().any(|&v| v == 0.0) {
        return Err(Error::NonStationary("chain is reducible or periodic".into()));
    }
    // Solve pi (P - I) = 0 with the last equation replaced by sum(pi) = 1.
    let mut a = p.transpose() - DMatrix::identity(k, k);
    for j in 0..k {
        a[(k - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(k);
    b[k - 1] = 1.0;
    let pi = a.lu().solve(&b).ok_or_else(|| Error::NonStationary("singular stationary system".into()))?;
    if pi.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::NonStationary(format!("non-positive stationary mass {pi:?}")));
    }
    let total = pi.sum();
    Ok(pi / total)
}

/// Variance and autocovariances of `exp(alpha_t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentMoments {
    pub sigma_alpha_sq: f64,
    /// `gamma[tau]` for `tau = 0..=tau_max`; `gamma[0] = sigma_alpha_sq`.
    pub gamma: Vec<f64>,
    /// `rho[tau] = gamma[tau] / sigma_alpha_sq`, with `rho[0] = 1`.
    pub rho: Vec<f64>,
}

impl LatentMoments {
    pub fn gamma_at(&self, tau: usize) -> f64 {
        self.gamma[tau]
    }
}

pub fn latent_moments(spec: &LatentSpec, tau_max: usize) -> Result<LatentMoments> {
    spec.validate()?;
    let gamma: Vec<f64> = match spec {
        LatentSpec::Hmm { states, .. } => {
            let p = spec.transition_matrix().expect("hmm");
            let pi = stationary_distribution(&p)?;
            let e = DVector::from_iterator(states.len(), states.iter().map(|s| s.exp()));
            let mut v = e.clone();
            let mut out = Vec::with_capacity(tau_max + 1);
            for _ in 0..=tau_max {
                let cross: f64 = (0..states.len()).map(|i| pi[i] * e[i] * v[i]).sum();
                out.push(cross - 1.0);
                v = &p * v;
            }
            out
        }
        LatentSpec::Fmm { states, probs } => {
            let second: f64 = states.iter().zip(probs).map(|(s, w)| w * (2.0 * s).exp()).sum();
            let mut out = vec![0.0; tau_max + 1];
            out[0] = second - 1.0;
            out
        }
        LatentSpec::Ar1 { phi, sigma2 } => {
            let (_, v) = LatentSpec::ar1_stationary_normal(*phi, *sigma2);
            (0..=tau_max).map(|tau| (v * phi.powi(tau as i32)).exp_m1()).collect()
        }
    };
    let s2 = gamma[0].max(0.0);
    let rho = gamma
        .iter()
        .enumerate()
        .map(|(tau, g)| {
            if tau == 0 {
                1.0
            } else if s2 > 0.0 {
                (g / s2).clamp(-1.0, 1.0)
            } else {
                0.0
            }
        })
        .collect();
    let mut gamma = gamma;
    gamma[0] = s2;
    Ok(LatentMoments { sigma_alpha_sq: s2, gamma, rho })
}
