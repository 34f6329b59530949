//! Unconstrained working parameters and their map to `(beta, LatentSpec)`.
//!
//! Layout: `beta` first, then the latent coordinates
//! * FMM2: `logit p_1`, `S_1`
//! * HMM2: `logit p_11`, `logit p_22`, `S_1`
//!
//! `S_2` is always derived from the mean-one constraint.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latent::{stationary_distribution, LatentSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Glm,
    Fmm2,
    Hmm2,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Glm, ModelKind::Fmm2, ModelKind::Hmm2];

    pub fn latent_len(self) -> usize {
        match self {
            ModelKind::Glm => 0,
            ModelKind::Fmm2 => 2,
            ModelKind::Hmm2 => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Glm => "glm",
            ModelKind::Fmm2 => "fmm2",
            ModelKind::Hmm2 => "hmm2",
        }
    }

    /// Names of the latent working coordinates.
    pub fn latent_labels(self) -> &'static [&'static str] {
        match self {
            ModelKind::Glm => &[],
            ModelKind::Fmm2 => &["logit_p1", "s1"],
            ModelKind::Hmm2 => &["logit_p11", "logit_p22", "s1"],
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "glm" => Ok(ModelKind::Glm),
            "fmm" | "fmm2" => Ok(ModelKind::Fmm2),
            "hmm" | "hmm2" => Ok(ModelKind::Hmm2),
            other => Err(Error::InvalidDesign(format!("unknown estimator `{other}`"))),
        }
    }
}

pub(crate) fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// `S_2 = log((1 - pi_1 e^{S_1}) / pi_2)`; fails when `pi_1 e^{S_1} >= 1`.
pub fn derive_s2(pi1: f64, s1: f64) -> Result<f64> {
    let u = pi1 * s1.exp();
    if !(u < 1.0) || !(pi1 < 1.0) {
        return Err(Error::Domain(format!("infeasible S_1 = {s1}: pi_1 exp(S_1) = {u} >= 1")));
    }
    Ok(((1.0 - u) / (1.0 - pi1)).ln())
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkingParams {
    kind: ModelKind,
    d: usize,
    theta: DVector<f64>,
}

impl WorkingParams {
    pub fn new(kind: ModelKind, d: usize, theta: DVector<f64>) -> Result<Self> {
        if theta.len() != d + kind.latent_len() {
            return Err(Error::Domain(format!(
                "{kind} with d = {d} needs {} parameters, got {}",
                d + kind.latent_len(),
                theta.len()
            )));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("working parameters must be finite".into()));
        }
        Ok(Self { kind, d, theta })
    }

    pub fn from_parts(kind: ModelKind, beta: &[f64], latent: &[f64]) -> Result<Self> {
        let mut v = beta.to_vec();
        v.extend_from_slice(latent);
        Self::new(kind, beta.len(), DVector::from_vec(v))
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    pub fn beta(&self) -> DVector<f64> {
        self.theta.rows(0, self.d).into_owned()
    }

    pub fn latent(&self) -> &[f64] {
        &self.theta.as_slice()[self.d..]
    }

    pub fn with_theta(&self, theta: DVector<f64>) -> Result<Self> {
        Self::new(self.kind, self.d, theta)
    }

    /// Stationary weights, transition rows and states in the working labelling
    /// (not reordered).
    pub(crate) fn raw_latent(&self) -> Result<Option<RawTwoState>> {
        let l = self.latent();
        match self.kind {
            ModelKind::Glm => Ok(None),
            ModelKind::Fmm2 => {
                let p1 = sigmoid(l[0]);
                let p2 = sigmoid(-l[0]);
                let s2 = derive_s2(p1, l[1])?;
                Ok(Some(RawTwoState { pi: [p1, p2], trans: [[p1, p2], [p1, p2]], states: [l[1], s2] }))
            }
            ModelKind::Hmm2 => {
                let (p11, q1) = (sigmoid(l[0]), sigmoid(-l[0]));
                let (p22, q2) = (sigmoid(l[1]), sigmoid(-l[1]));
                if q1 + q2 <= 0.0 {
                    return Err(Error::Domain("both states absorbing".into()));
                }
                let pi1 = q2 / (q1 + q2);
                let pi2 = q1 / (q1 + q2);
                let s2 = derive_s2(pi1, l[2])?;
                Ok(Some(RawTwoState { pi: [pi1, pi2], trans: [[p11, q1], [q2, p22]], states: [l[2], s2] }))
            }
        }
    }

    /// Maps to `(beta, latent)` with states in canonical order `S_1 <= S_2`.
    pub fn constrain(&self) -> Result<(DVector<f64>, Option<LatentSpec>)> {
        let beta = self.beta();
        let Some(raw) = self.raw_latent()? else {
            return Ok((beta, None));
        };
        let raw = if raw.states[0] > raw.states[1] { raw.swapped() } else { raw };
        let spec = match self.kind {
            ModelKind::Fmm2 => LatentSpec::Fmm { states: raw.states.to_vec(), probs: raw.pi.to_vec() },
            _ => LatentSpec::Hmm {
                states: raw.states.to_vec(),
                transition: raw.trans.iter().map(|r| r.to_vec()).collect(),
            },
        };
        Ok((beta, Some(spec)))
    }

    /// Inverse of [`constrain`](Self::constrain).
    pub fn unconstrain(kind: ModelKind, beta: &[f64], latent: Option<&LatentSpec>) -> Result<Self> {
        let coords = match (kind, latent) {
            (ModelKind::Glm, None) => vec![],
            (ModelKind::Fmm2, Some(LatentSpec::Fmm { states, probs })) if states.len() == 2 => {
                vec![logit(probs[0]), states[0]]
            }
            (ModelKind::Hmm2, Some(spec @ LatentSpec::Hmm { states, transition })) if states.len() == 2 => {
                let _ = stationary_distribution(&spec.transition_matrix().expect("hmm"))?;
                vec![logit(transition[0][0]), logit(transition[1][1]), states[0]]
            }
            _ => {
                return Err(Error::Domain(format!("latent specification does not match model {kind}")));
            }
        };
        Self::from_parts(kind, beta, &coords)
    }

    /// Same model with the two state labels exchanged.
    pub fn relabeled(&self) -> Result<Self> {
        let mut theta = self.theta.clone();
        let d = self.d;
        match self.kind {
            ModelKind::Glm => {}
            ModelKind::Fmm2 => {
                let raw = self.raw_latent()?.expect("fmm");
                theta[d] = -theta[d];
                theta[d + 1] = raw.states[1];
            }
            ModelKind::Hmm2 => {
                let raw = self.raw_latent()?.expect("hmm");
                theta.swap_rows(d, d + 1);
                theta[d + 2] = raw.states[1];
            }
        }
        self.with_theta(theta)
    }

    /// Relabels when needed so that `S_1 <= S_2`.
    pub fn canonical(&self) -> Result<Self> {
        match self.raw_latent()? {
            Some(raw) if raw.states[0] > raw.states[1] => self.relabeled(),
            _ => Ok(self.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct RawTwoState {
    pub pi: [f64; 2],
    pub trans: [[f64; 2]; 2],
    pub states: [f64; 2],
}

impl RawTwoState {
    fn swapped(self) -> Self {
        Self {
            pi: [self.pi[1], self.pi[0]],
            trans: [[self.trans[1][1], self.trans[1][0]], [self.trans[0][1], self.trans[0][0]]],
            states: [self.states[1], self.states[0]],
        }
    }
}
