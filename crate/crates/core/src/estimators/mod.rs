//! Maximum-likelihood fitting of the three working models: the Poisson GLM,
//! the 2-state Poisson mixture (FMM2) and the 2-state stationary Poisson
//! hidden Markov model (HMM2).

pub mod forward;
pub mod glm;
pub mod mixture;
pub mod optim;
pub mod params;

use serde::{Deserialize, Serialize};

use crate::latent::LatentSpec;

pub use forward::loglik_spec;
pub use glm::{glm_fit, glm_fit_traced, glm_fit_with, poisson_loglik, GlmOptions};
pub use mixture::{
    fit_all, fmm_fit, fmm_fit_with, fmm_loglik, hmm_fit, hmm_fit_with, hmm_loglik, mixture_gradient, mixture_hessian,
    mixture_scores, FittedSet, MixtureOptions,
};
pub use params::{derive_s2, ModelKind, WorkingParams};

/// Conditions worth reporting about an optimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitFlag {
    /// A mixing probability is within 1e-6 of 0 or 1.
    DegenerateMixture,
    /// The two states coincide: the fit is the GLM boundary.
    CollapsedStates,
    /// A self-transition probability exceeds 1 - 1e-6.
    NearAbsorbing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub kind: ModelKind,
    pub beta: Vec<f64>,
    pub latent: Option<LatentSpec>,
    /// Working (unconstrained) parameters at the optimum.
    pub theta: Vec<f64>,
    pub loglik: f64,
    pub n_iter: usize,
    pub converged: bool,
    /// Sup-norm of the log-likelihood gradient at `theta`.
    pub gradient_norm: f64,
    pub flags: Vec<FitFlag>,
}

impl FittedModel {
    pub fn working(&self) -> WorkingParams {
        let d = self.beta.len();
        WorkingParams::new(self.kind, d, nalgebra::DVector::from_column_slice(&self.theta))
            .expect("fitted parameters are consistent")
    }

    pub fn is_degenerate(&self) -> bool {
        !self.flags.is_empty()
    }

    /// Number of free parameters.
    pub fn num_params(&self) -> usize {
        self.theta.len()
    }
}
