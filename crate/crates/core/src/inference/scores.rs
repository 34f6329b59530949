use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::estimators::mixture::mixture_scores;
use crate::estimators::{mixture_hessian, FittedModel, ModelKind};
use crate::inference::ConditionalScores;
use crate::moments::marginal_mean;
use crate::series::CountSeries;

/// GLM conditional scores `(y_t - mu_t) X_t` and `H = -n^-1 sum mu_t X_t X_t'`.
pub fn glm_scores(fit: &FittedModel, data: &CountSeries) -> Result<ConditionalScores> {
    if fit.kind != ModelKind::Glm {
        return Err(Error::WrongModel { expected: "glm", found: fit.kind.to_string() });
    }
    let beta = DVector::from_column_slice(&fit.beta);
    let mu = marginal_mean(&beta, data.x())?;
    let (n, d) = (data.n(), data.d());
    let x = data.x();
    let scores = DMatrix::from_fn(n, d, |t, j| (data.y()[t] as f64 - mu[t]) * x[(t, j)]);
    let mut h = DMatrix::zeros(d, d);
    for t in 0..n {
        let row = x.row(t).transpose();
        h -= mu[t] * &row * row.transpose();
    }
    h /= n as f64;
    Ok(ConditionalScores { scores, h_hat: h })
}

/// Mixture-model conditional scores from the recursive forward derivatives;
/// `H` is the finite-difference Jacobian of the analytic total gradient.
pub fn hmm_scores_lystig_hughes(fit: &FittedModel, data: &CountSeries) -> Result<ConditionalScores> {
    if !matches!(fit.kind, ModelKind::Fmm2 | ModelKind::Hmm2) {
        return Err(Error::WrongModel { expected: "fmm2 or hmm2", found: fit.kind.to_string() });
    }
    let params = fit.working();
    let (_, scores) = mixture_scores(&params, data)?;
    let h_hat = mixture_hessian(&params, data)? / data.n() as f64;
    Ok(ConditionalScores { scores, h_hat })
}

pub fn scores_for(fit: &FittedModel, data: &CountSeries) -> Result<ConditionalScores> {
    match fit.kind {
        ModelKind::Glm => glm_scores(fit, data),
        _ => hmm_scores_lystig_hughes(fit, data),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::glm_fit;
    use approx::assert_abs_diff_eq;

    #[test]
    fn intercept_only_scores_are_residuals() {
        let data = CountSeries::intercept_only(vec![1, 2, 3]).unwrap();
        let fit = glm_fit(&data).unwrap();
        let s = glm_scores(&fit, &data).unwrap();
        for (t, expected) in [-1.0, 0.0, 1.0].iter().enumerate() {
            assert_abs_diff_eq!(s.scores[(t, 0)], *expected, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(s.h_hat[(0, 0)], -2.0, epsilon = 1e-9);
    }

    #[test]
    fn glm_scores_vanish_at_the_mle() {
        let data = CountSeries::with_covariates(
            vec![2, 5, 1, 0, 7, 3, 4, 2],
            vec![("x".into(), vec![0.1, 0.9, -0.3, -1.0, 1.2, 0.4, 0.5, 0.0])],
        )
        .unwrap();
        let fit = glm_fit(&data).unwrap();
        let s = glm_scores(&fit, &data).unwrap();
        assert!(s.total_gradient().iter().all(|g| g.abs() < 1e-6));
    }

    #[test]
    fn wrong_model_is_rejected() {
        let data = CountSeries::intercept_only(vec![1, 2, 3]).unwrap();
        let fit = glm_fit(&data).unwrap();
        assert!(hmm_scores_lystig_hughes(&fit, &data).is_err());
    }
}
