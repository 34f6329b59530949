//! Two-state Poisson mixture (FMM2) and hidden Markov (HMM2) estimators.
//!
//! Both likelihoods run through the same scaled forward recursion: a mixture
//! is a chain whose transition rows all equal the mixing probabilities.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::estimators::forward::{forward, LatentJacobian};
use crate::estimators::glm::glm_fit;
use crate::estimators::optim::{minimize, sup_norm, BfgsOptions};
use crate::estimators::params::{logit, ModelKind, WorkingParams};
use crate::estimators::{FitFlag, FittedModel};
use crate::latent::LatentSpec;
use crate::series::CountSeries;

const START_S1: [f64; 3] = [-0.25, -0.75, -1.5];
const START_STAY: [f64; 2] = [0.7, 0.9];
const START_P1: [f64; 3] = [0.3, 0.5, 0.7];
const BOUNDARY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy)]
pub struct MixtureOptions {
    /// Number of multistart runs (grid first, then seeded random starts).
    pub starts: usize,
    /// Seed of the random-start generator.
    pub seed: u64,
    pub max_iter: usize,
    /// Sup-norm tolerance on the total log-likelihood gradient.
    pub gtol: f64,
}

impl Default for MixtureOptions {
    fn default() -> Self {
        Self { starts: 10, seed: 0, max_iter: 500, gtol: 1e-8 }
    }
}

fn evaluate(params: &WorkingParams, data: &CountSeries, with_scores: bool) -> Result<(f64, Option<DMatrix<f64>>)> {
    let lat = LatentJacobian::from_working(params)?
        .ok_or(Error::WrongModel { expected: "fmm2 or hmm2", found: params.kind().to_string() })?;
    let out = forward(&lat, data, &params.beta(), with_scores)?;
    Ok((out.loglik, out.scores))
}

fn expect_kind(params: &WorkingParams, kind: ModelKind) -> Result<()> {
    if params.kind() != kind {
        return Err(Error::WrongModel { expected: kind.name(), found: params.kind().to_string() });
    }
    Ok(())
}

/// FMM2 log-likelihood at working parameters.
pub fn fmm_loglik(params: &WorkingParams, data: &CountSeries) -> Result<f64> {
    expect_kind(params, ModelKind::Fmm2)?;
    Ok(evaluate(params, data, false)?.0)
}

/// HMM2 log-likelihood `sum_t log Lambda_t` at working parameters.
pub fn hmm_loglik(params: &WorkingParams, data: &CountSeries) -> Result<f64> {
    expect_kind(params, ModelKind::Hmm2)?;
    Ok(evaluate(params, data, false)?.0)
}

/// Per-step conditional scores `d log Lambda_t / d theta` (rows) for a mixture model.
pub fn mixture_scores(params: &WorkingParams, data: &CountSeries) -> Result<(f64, DMatrix<f64>)> {
    let (ll, scores) = evaluate(params, data, true)?;
    Ok((ll, scores.expect("requested")))
}

/// Log-likelihood and its total gradient.
pub fn mixture_gradient(params: &WorkingParams, data: &CountSeries) -> Result<(f64, DVector<f64>)> {
    let (ll, scores) = mixture_scores(params, data)?;
    let p = scores.ncols();
    let g = DVector::from_fn(p, |q, _| scores.column(q).sum());
    Ok((ll, g))
}

/// Total log-likelihood Hessian by central differences of the analytic
/// gradient, step `1e-5 (1 + |theta_i|)`, symmetrized.
pub fn mixture_hessian(params: &WorkingParams, data: &CountSeries) -> Result<DMatrix<f64>> {
    let p = params.len();
    let mut h = DMatrix::zeros(p, p);
    for i in 0..p {
        let step = 1e-5 * (1.0 + params.theta()[i].abs());
        let mut plus = params.theta().clone();
        plus[i] += step;
        let mut minus = params.theta().clone();
        minus[i] -= step;
        let (_, gp) = mixture_gradient(&params.with_theta(plus)?, data)?;
        let (_, gm) = mixture_gradient(&params.with_theta(minus)?, data)?;
        let col = (gp - gm) / (2.0 * step);
        h.set_column(i, &col);
    }
    Ok((&h + h.transpose()) * 0.5)
}

struct Candidate {
    params: WorkingParams,
    loglik: f64,
    iterations: usize,
}

fn run_bfgs(start: &WorkingParams, data: &CountSeries, opts: &MixtureOptions) -> Option<Candidate> {
    let n = data.n() as f64;
    let objective = |theta: &DVector<f64>| {
        let w = start.with_theta(theta.clone()).ok()?;
        let (ll, g) = mixture_gradient(&w, data).ok()?;
        Some((-ll / n, -g / n))
    };
    let bfgs = BfgsOptions { max_iter: opts.max_iter, gtol: opts.gtol / n, ..Default::default() };
    let r = minimize(objective, start.theta().clone(), &bfgs)?;
    Some(Candidate { params: start.with_theta(r.x).ok()?, loglik: -r.f * n, iterations: r.iterations })
}

/// Newton steps on the finite-difference Hessian until the total gradient
/// meets the tolerance. Steps are accepted only if they reduce the gradient
/// without lowering the likelihood beyond rounding.
fn polish(cand: Candidate, data: &CountSeries, gtol: f64) -> (Candidate, f64) {
    let Ok((mut ll, mut g)) = mixture_gradient(&cand.params, data) else {
        return (cand, f64::INFINITY);
    };
    let mut params = cand.params;
    let mut iterations = cand.iterations;
    for _ in 0..20 {
        if sup_norm(&g) < gtol {
            break;
        }
        let Ok(h) = mixture_hessian(&params, data) else { break };
        let Some(chol) = (-h).cholesky() else { break };
        let step = chol.solve(&g);
        if !(sup_norm(&step) < 1.0) {
            break;
        }
        let Ok(trial) = params.with_theta(params.theta() + step) else { break };
        let Ok((ll_t, g_t)) = mixture_gradient(&trial, data) else { break };
        if ll_t < ll - 1e-9 * ll.abs().max(1.0) || sup_norm(&g_t) >= sup_norm(&g) {
            break;
        }
        params = trial;
        ll = ll_t;
        g = g_t;
        iterations += 1;
    }
    (Candidate { params, loglik: ll, iterations }, sup_norm(&g))
}

fn flags_for(kind: ModelKind, spec: &LatentSpec) -> Vec<FitFlag> {
    let mut flags = Vec::new();
    let states = spec.states().expect("two-state");
    if (states[1] - states[0]).abs() < BOUNDARY_TOL {
        flags.push(FitFlag::CollapsedStates);
    }
    let weights = match spec {
        LatentSpec::Fmm { probs, .. } => probs.clone(),
        _ => spec.stationary().ok().flatten().map(|v| v.iter().copied().collect()).unwrap_or_default(),
    };
    if weights.iter().any(|&w| !(BOUNDARY_TOL..=1.0 - BOUNDARY_TOL).contains(&w)) {
        flags.push(FitFlag::DegenerateMixture);
    }
    if kind == ModelKind::Hmm2 {
        if let LatentSpec::Hmm { transition, .. } = spec {
            if transition.iter().enumerate().any(|(i, r)| r[i] > 1.0 - BOUNDARY_TOL) {
                flags.push(FitFlag::NearAbsorbing);
            }
        }
    }
    flags
}

fn finish(cand: Candidate, data: &CountSeries, gtol: f64) -> Result<FittedModel> {
    let kind = cand.params.kind();
    let (cand, gradient_norm) = polish(cand, data, gtol);
    let params = cand.params.canonical()?;
    let (beta, latent) = params.constrain()?;
    let latent = latent.expect("mixture");
    let flags = flags_for(kind, &latent);
    let converged = gradient_norm < gtol;
    if !converged && flags.is_empty() {
        return Err(Error::NotConverged { iterations: cand.iterations, gradient_norm });
    }
    Ok(FittedModel {
        kind,
        beta: beta.iter().copied().collect(),
        latent: Some(latent),
        theta: params.theta().iter().copied().collect(),
        loglik: cand.loglik,
        n_iter: cand.iterations,
        converged,
        gradient_norm,
        flags,
    })
}

fn best_of(
    starts: Vec<WorkingParams>,
    fallback: Option<WorkingParams>,
    data: &CountSeries,
    opts: &MixtureOptions,
) -> Result<FittedModel> {
    let total = starts.len();
    let mut best: Option<Candidate> = None;
    let mut last_err = String::from("no start produced a finite likelihood");
    for start in &starts {
        match run_bfgs(start, data, opts) {
            Some(c) if c.loglik.is_finite() => {
                if best.as_ref().map_or(true, |b| c.loglik > b.loglik) {
                    best = Some(c);
                }
            }
            _ => last_err = format!("start {:?} failed", start.latent()),
        }
    }
    if let Some(fb) = fallback {
        if let Ok((ll, _)) = evaluate(&fb, data, false) {
            if best.as_ref().map_or(true, |b| ll > b.loglik) {
                best = Some(Candidate { params: fb, loglik: ll, iterations: 0 });
            }
        }
    }
    let best = best.ok_or(Error::AllStartsFailed { starts: total, last: last_err })?;
    finish(best, data, opts.gtol)
}

fn random_starts(kind: ModelKind, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let s1 = rng.random_range(-2.0..-0.1);
            match kind {
                ModelKind::Fmm2 => vec![logit(rng.random_range(0.1..0.9)), s1],
                _ => vec![logit(rng.random_range(0.5..0.95)), logit(rng.random_range(0.5..0.95)), s1],
            }
        })
        .collect()
}

fn start_grid(kind: ModelKind, beta: &[f64], opts: &MixtureOptions) -> Result<Vec<WorkingParams>> {
    let mut latent: Vec<Vec<f64>> = Vec::new();
    for s1 in START_S1 {
        match kind {
            ModelKind::Fmm2 => latent.extend(START_P1.iter().map(|&p| vec![logit(p), s1])),
            _ => latent.extend(START_STAY.iter().map(|&p| vec![logit(p), logit(p), s1])),
        }
    }
    latent.truncate(opts.starts);
    let extra = opts.starts.saturating_sub(latent.len());
    latent.extend(random_starts(kind, extra, opts.seed));
    latent.into_iter().map(|l| WorkingParams::from_parts(kind, beta, &l)).collect()
}

fn expect_glm(glm: &FittedModel) -> Result<()> {
    if glm.kind != ModelKind::Glm {
        return Err(Error::WrongModel { expected: "glm", found: glm.kind.to_string() });
    }
    Ok(())
}

/// FMM2 estimator with the default options; fits the GLM for starting values.
pub fn fmm_fit(data: &CountSeries, starts: usize) -> Result<FittedModel> {
    let glm = glm_fit(data)?;
    fmm_fit_with(data, &glm, &MixtureOptions { starts, ..Default::default() })
}

pub fn fmm_fit_with(data: &CountSeries, glm: &FittedModel, opts: &MixtureOptions) -> Result<FittedModel> {
    expect_glm(glm)?;
    let starts = start_grid(ModelKind::Fmm2, &glm.beta, opts)?;
    // The collapsed mixture reproduces the GLM likelihood exactly.
    let boundary = WorkingParams::from_parts(ModelKind::Fmm2, &glm.beta, &[0.0, 0.0])?;
    best_of(starts, Some(boundary), data, opts)
}

/// HMM2 estimator with the default options; fits the GLM and FMM2 first.
pub fn hmm_fit(data: &CountSeries, starts: usize) -> Result<FittedModel> {
    let glm = glm_fit(data)?;
    let opts = MixtureOptions { starts, ..Default::default() };
    let fmm = fmm_fit_with(data, &glm, &opts).ok();
    hmm_fit_with(data, &glm, fmm.as_ref(), &opts)
}

pub fn hmm_fit_with(
    data: &CountSeries,
    glm: &FittedModel,
    fmm: Option<&FittedModel>,
    opts: &MixtureOptions,
) -> Result<FittedModel> {
    expect_glm(glm)?;
    let mut starts = start_grid(ModelKind::Hmm2, &glm.beta, opts)?;
    let boundary = WorkingParams::from_parts(ModelKind::Hmm2, &glm.beta, &[0.0, 0.0, 0.0])?;
    let mut fallback = boundary;
    if let Some(fmm) = fmm {
        // A mixture is a chain with identical rows: p11 = p1, p22 = 1 - p1.
        let a = fmm.theta[fmm.beta.len()];
        let s1 = fmm.theta[fmm.beta.len() + 1];
        let nested = WorkingParams::from_parts(ModelKind::Hmm2, &fmm.beta, &[a, -a, s1])?;
        if evaluate(&nested, data, false).is_ok() {
            starts.push(nested.clone());
            fallback = nested;
        }
    }
    best_of(starts, Some(fallback), data, opts)
}

/// The three estimators fitted on one series, each nested in the next.
#[derive(Debug)]
pub struct FittedSet {
    pub glm: FittedModel,
    pub fmm: Option<Result<FittedModel>>,
    pub hmm: Option<Result<FittedModel>>,
}

pub fn fit_all(data: &CountSeries, kinds: &[ModelKind], opts: &MixtureOptions) -> Result<FittedSet> {
    let glm = glm_fit(data)?;
    let need_fmm = kinds.contains(&ModelKind::Fmm2) || kinds.contains(&ModelKind::Hmm2);
    let fmm = need_fmm.then(|| fmm_fit_with(data, &glm, opts));
    let hmm = kinds.contains(&ModelKind::Hmm2).then(|| {
        let seed = fmm.as_ref().and_then(|r| r.as_ref().ok());
        hmm_fit_with(data, &glm, seed, opts)
    });
    let fmm = if kinds.contains(&ModelKind::Fmm2) { fmm } else { None };
    Ok(FittedSet { glm, fmm, hmm })
}
