//! Marginal moments of the observed counts and the three data-property
//! factors: overdispersion (OD), lag-1 autocorrelation (AC1) and separation
//! probability (SP).

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};
use crate::latent::{latent_moments, LatentSpec};

/// Largest linear predictor whose exponential is finite.
const MAX_ETA: f64 = 709.0;
const SP_TAIL: f64 = 1e-12;

pub fn marginal_mean(beta: &DVector<f64>, x: &DMatrix<f64>) -> Result<Vec<f64>> {
    if beta.len() != x.ncols() {
        return Err(Error::Domain(format!("beta has {} entries for {} design columns", beta.len(), x.ncols())));
    }
    let eta = x * beta;
    eta.iter()
        .enumerate()
        .map(|(t, &e)| {
            if !e.is_finite() || e > MAX_ETA {
                Err(Error::Domain(format!("linear predictor {e} at t = {t} overflows exp")))
            } else {
                Ok(e.exp())
            }
        })
        .collect()
}

pub fn marginal_variance(mu: f64, sigma_alpha_sq: f64) -> f64 {
    mu + mu * mu * sigma_alpha_sq
}

pub fn marginal_covariance(mu_s: f64, mu_t: f64, gamma_lag: f64) -> f64 {
    mu_s * mu_t * gamma_lag
}

pub fn marginal_correlation(mu_s: f64, mu_t: f64, gamma_lag: f64, sigma_alpha_sq: f64) -> f64 {
    marginal_covariance(mu_s, mu_t, gamma_lag)
        / (marginal_variance(mu_s, sigma_alpha_sq) * marginal_variance(mu_t, sigma_alpha_sq)).sqrt()
}

/// Mean over t of `1 + sigma_alpha^2 mu_t`.
pub fn overdispersion_factor(mu: &[f64], sigma_alpha_sq: f64) -> f64 {
    if mu.is_empty() {
        return 1.0;
    }
    mu.iter().map(|m| 1.0 + sigma_alpha_sq * m).sum::<f64>() / mu.len() as f64
}

/// Mean over adjacent pairs of the marginal correlation at lag 1.
pub fn lag1_autocorrelation(mu: &[f64], gamma1: f64, sigma_alpha_sq: f64) -> f64 {
    if mu.len() < 2 || sigma_alpha_sq == 0.0 {
        return 0.0;
    }
    let total: f64 = mu.windows(2).map(|w| marginal_correlation(w[0], w[1], gamma1, sigma_alpha_sq)).sum();
    total / (mu.len() - 1) as f64
}

pub(crate) fn ln_poisson_pmf(k: u64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    k as f64 * lambda.ln() - lambda - ln_factorial(k)
}

/// One minus the overlap mass of `Pois(mu e^{s_lo})` and `Pois(mu e^{s_hi})`.
///
/// The sum stops at the first index where both upper tails are below 1e-12.
pub fn separation_probability(mu: f64, s_lo: f64, s_hi: f64) -> f64 {
    let la = mu * s_lo.exp();
    let lb = mu * s_hi.exp();
    if la == lb {
        return 0.0;
    }
    let hi = la.max(lb);
    let cap = (hi + 40.0 * hi.sqrt() + 100.0).ceil() as u64;
    let (mut cdf_a, mut cdf_b, mut overlap) = (0.0, 0.0, 0.0);
    let mut i = 0u64;
    loop {
        let pa = ln_poisson_pmf(i, la).exp();
        let pb = ln_poisson_pmf(i, lb).exp();
        overlap += pa.min(pb);
        cdf_a += pa;
        cdf_b += pb;
        if (1.0 - cdf_a < SP_TAIL && 1.0 - cdf_b < SP_TAIL) || i >= cap {
            break;
        }
        i += 1;
    }
    (1.0 - overlap).clamp(0.0, 1.0)
}

/// Mean separation probability of one adjacent state pair over a mean curve.
pub fn mean_separation(mu: &[f64], s_lo: f64, s_hi: f64) -> f64 {
    if mu.is_empty() {
        return 0.0;
    }
    mu.iter().map(|&m| separation_probability(m, s_lo, s_hi)).sum::<f64>() / mu.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Low,
    Medium,
    High,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Low, Level::Medium, Level::High];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn short(self) -> &'static str {
        match self {
            Level::Low => "low",
            Level::Medium => "med",
            Level::High => "high",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Low => "low",
            Level::Medium => "medium",
            Level::High => "high",
        })
    }
}

impl std::str::FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "low" => Ok(Level::Low),
            "med" | "medium" => Ok(Level::Medium),
            "high" => Ok(Level::High),
            other => Err(Error::InvalidDesign(format!("unknown factor level `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Factor {
    Od,
    Ac1,
    Sp,
}

impl Factor {
    /// Low/medium/high anchor values.
    pub fn anchors(self) -> [f64; 3] {
        match self {
            Factor::Od => [1.5, 3.0, 5.0],
            Factor::Ac1 => [0.15, 0.25, 0.5],
            Factor::Sp => [0.25, 0.45, 0.7],
        }
    }

    pub fn anchor(self, level: Level) -> f64 {
        self.anchors()[level.index()]
    }

    /// Nearest anchor; values outside the anchor range map to the end levels.
    pub fn classify(self, value: f64) -> Level {
        let a = self.anchors();
        let mut best = Level::Low;
        let mut dist = f64::INFINITY;
        for level in Level::ALL {
            let d = (value - a[level.index()]).abs();
            if d < dist {
                dist = d;
                best = level;
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorLevels {
    pub od: Level,
    pub ac1: Level,
    pub sp: Level,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorProfile {
    pub od: f64,
    pub ac1: f64,
    /// One entry per adjacent state pair; empty for a continuous latent.
    pub sp: Vec<f64>,
    pub levels: FactorLevels,
}

impl FactorProfile {
    pub fn new(od: f64, ac1: f64, sp: Vec<f64>) -> Self {
        let sp_value = if sp.is_empty() { 0.0 } else { sp.iter().sum::<f64>() / sp.len() as f64 };
        let levels = FactorLevels {
            od: Factor::Od.classify(od),
            ac1: Factor::Ac1.classify(ac1),
            sp: Factor::Sp.classify(sp_value),
        };
        Self { od, ac1, sp, levels }
    }

    /// Series-level SP: mean over adjacent pairs, 0 for a continuous latent.
    pub fn sp_value(&self) -> f64 {
        if self.sp.is_empty() {
            0.0
        } else {
            self.sp.iter().sum::<f64>() / self.sp.len() as f64
        }
    }

    pub fn value(&self, factor: Factor) -> f64 {
        match factor {
            Factor::Od => self.od,
            Factor::Ac1 => self.ac1,
            Factor::Sp => self.sp_value(),
        }
    }

    pub fn level(&self, factor: Factor) -> Level {
        match factor {
            Factor::Od => self.levels.od,
            Factor::Ac1 => self.levels.ac1,
            Factor::Sp => self.levels.sp,
        }
    }
}

/// Analytic factor profile of a latent process over a mean curve `mu`.
pub fn factor_profile(spec: &LatentSpec, mu: &[f64]) -> Result<FactorProfile> {
    let m = latent_moments(spec, 1)?;
    let od = overdispersion_factor(mu, m.sigma_alpha_sq);
    let ac1 = lag1_autocorrelation(mu, m.gamma[1], m.sigma_alpha_sq);
    let sp = match spec.states() {
        Some(states) => states.windows(2).map(|w| mean_separation(mu, w[0], w[1])).collect(),
        None => Vec::new(),
    };
    Ok(FactorProfile::new(od, ac1, sp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_predictor_gives_unit_mean() {
        let x = DMatrix::from_element(4, 1, 1.0);
        let mu = marginal_mean(&DVector::from_vec(vec![0.0]), &x).unwrap();
        assert_eq!(mu, vec![1.0; 4]);
    }

    #[test]
    fn mean_is_exponentiated_predictor() {
        let x = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let mu = marginal_mean(&DVector::from_vec(vec![1.0, 0.5]), &x).unwrap();
        assert_abs_diff_eq!(mu[0], 7.389_056_098_930_65, epsilon = 1e-12);
    }

    #[test]
    fn overflow_is_a_domain_error() {
        let x = DMatrix::from_row_slice(1, 1, &[1.0]);
        assert!(matches!(marginal_mean(&DVector::from_vec(vec![800.0]), &x), Err(Error::Domain(_))));
    }

    #[test]
    fn variance_formula() {
        assert_eq!(marginal_variance(4.0, 0.0), 4.0);
        assert_eq!(marginal_variance(4.0, 0.5), 12.0);
    }

    #[test]
    fn covariance_at_lag_zero_is_extra_variance() {
        assert_eq!(marginal_covariance(2.0, 3.0, 0.0), 0.0);
        let (mu, s2) = (3.0, 0.4);
        assert_abs_diff_eq!(marginal_covariance(mu, mu, s2), marginal_variance(mu, s2) - mu, epsilon = 1e-14);
    }

    #[test]
    fn overdispersion_examples() {
        assert_eq!(overdispersion_factor(&[1.0, 7.0], 0.0), 1.0);
        assert_eq!(overdispersion_factor(&[4.0, 4.0], 0.5), 3.0);
        assert_eq!(Factor::Od.classify(3.0), Level::Medium);
        assert_eq!(overdispersion_factor(&[1.0, 3.0], 1.0), 3.0);
    }

    /// Direct summation to i = 60, independent of the truncation rule.
    fn sp_direct(la: f64, lb: f64) -> f64 {
        let mut overlap = 0.0;
        let (mut pa, mut pb) = ((-la).exp(), (-lb).exp());
        for i in 0..=60u32 {
            if i > 0 {
                pa *= la / i as f64;
                pb *= lb / i as f64;
            }
            overlap += pa.min(pb);
        }
        1.0 - overlap
    }

    #[test]
    fn separation_matches_direct_sum() {
        let sp = separation_probability(1.0, 0.0, 5f64.ln());
        assert_abs_diff_eq!(sp, sp_direct(1.0, 5.0), epsilon = 1e-12);
        let sp = separation_probability(2.0, -0.3, 0.9);
        assert_abs_diff_eq!(sp, sp_direct(2.0 * (-0.3f64).exp(), 2.0 * 0.9f64.exp()), epsilon = 1e-12);
    }

    #[test]
    fn equal_states_do_not_separate() {
        assert_eq!(separation_probability(3.0, 0.2, 0.2), 0.0);
    }

    #[test]
    fn separation_survives_large_means() {
        let sp = separation_probability(5000.0, -0.1, 0.1);
        assert!(sp > 0.999 && sp <= 1.0);
    }

    #[test]
    fn classification_uses_nearest_anchor() {
        assert_eq!(Factor::Ac1.classify(0.17), Level::Low);
        assert_eq!(Factor::Od.classify(2.40), Level::Medium);
        assert_eq!(Factor::Od.classify(0.2), Level::Low);
        assert_eq!(Factor::Sp.classify(0.99), Level::High);
        assert_eq!(Factor::Sp.classify(0.0), Level::Low);
    }

    #[test]
    fn profile_of_continuous_latent_has_no_sp() {
        let spec = LatentSpec::ar1(0.5, 0.2).unwrap();
        let p = factor_profile(&spec, &[2.0; 10]).unwrap();
        assert!(p.sp.is_empty());
        assert_eq!(p.sp_value(), 0.0);
        assert_eq!(p.levels.sp, Level::Low);
    }
}
