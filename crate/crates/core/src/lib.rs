//! Regression for time series of counts under parameter-driven Poisson
//! models, `log E[Y_t | alpha_t] = X_t' beta + alpha_t` with a stationary
//! latent process satisfying `E[exp(alpha_t)] = 1`.
//!
//! The crate fits three working estimators (Poisson GLM, 2-state mixture,
//! 2-state hidden Markov model), computes misspecification-robust sandwich
//! standard errors, simulates from calibrated latent processes, runs Monte
//! Carlo efficiency studies and recommends an estimator from residual
//! diagnostics.

// Negated float comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod applications;
pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod inference;
pub mod io;
pub mod latent;
pub mod moments;
pub mod series;
pub mod simulation;
pub mod study;

pub use error::{Error, Result};
pub use estimators::{FitFlag, FittedModel, ModelKind, WorkingParams};
pub use latent::{LatentMoments, LatentSpec};
pub use moments::{Factor, FactorProfile, Level};
pub use series::CountSeries;
