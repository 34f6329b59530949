//! Simulation from the parameter-driven Poisson model and calibration of
//! latent parameters to target factor levels.

mod calibrate;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latent::LatentSpec;
use crate::moments::{factor_profile, marginal_mean, FactorProfile};
use crate::series::CountSeries;

pub use calibrate::{calibrate, CalibrationTarget, Family};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Harmonic {
    Cos,
    Sin,
}

/// Covariate generators; time runs over `t = 1..=n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Covariate {
    /// I.i.d. Bernoulli(p).
    Binary {
        #[serde(default = "half")]
        p: f64,
    },
    /// I.i.d. standard normal.
    Normal,
    /// `t / scale`; the scale defaults to `n`.
    Trend {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scale: Option<f64>,
    },
    /// `cos` or `sin` of `2 pi k t / period`.
    Seasonal {
        harmonic: Harmonic,
        #[serde(default = "one")]
        k: u32,
        #[serde(default = "twelve")]
        period: f64,
    },
}

fn half() -> f64 {
    0.5
}
fn one() -> u32 {
    1
}
fn twelve() -> f64 {
    12.0
}

impl Covariate {
    pub fn label(&self) -> String {
        match self {
            Covariate::Binary { .. } => "binary".into(),
            Covariate::Normal => "normal".into(),
            Covariate::Trend { .. } => "trend".into(),
            Covariate::Seasonal { harmonic, k, period } => {
                let name = match harmonic {
                    Harmonic::Cos => "cos",
                    Harmonic::Sin => "sin",
                };
                format!("{name}{}", fmt_period(period / *k as f64))
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Covariate::Binary { p } if !(*p > 0.0 && *p < 1.0) => {
                Err(Error::InvalidSpec(format!("binary covariate needs 0 < p < 1, got {p}")))
            }
            Covariate::Trend { scale: Some(s) } if !(s.is_finite() && *s > 0.0) => {
                Err(Error::InvalidSpec(format!("trend scale must be positive, got {s}")))
            }
            Covariate::Seasonal { k, period, .. } if *k == 0 || !(period.is_finite() && *period > 0.0) => {
                Err(Error::InvalidSpec("seasonal harmonic needs k >= 1 and a positive period".into()))
            }
            _ => Ok(()),
        }
    }

    fn generate<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        match self {
            Covariate::Binary { p } => (0..n).map(|_| if rng.random::<f64>() < *p { 1.0 } else { 0.0 }).collect(),
            Covariate::Normal => (0..n).map(|_| StandardNormal.sample(rng)).collect(),
            Covariate::Trend { scale } => {
                let s = scale.unwrap_or(n as f64);
                (1..=n).map(|t| t as f64 / s).collect()
            }
            Covariate::Seasonal { harmonic, k, period } => (1..=n)
                .map(|t| {
                    let angle = 2.0 * std::f64::consts::PI * *k as f64 * t as f64 / period;
                    match harmonic {
                        Harmonic::Cos => angle.cos(),
                        Harmonic::Sin => angle.sin(),
                    }
                })
                .collect(),
        }
    }

    fn is_random(&self) -> bool {
        matches!(self, Covariate::Binary { .. } | Covariate::Normal)
    }
}

fn fmt_period(p: f64) -> String {
    if (p - p.round()).abs() < 1e-9 {
        format!("{}", p.round() as i64)
    } else {
        format!("{p}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    /// Intercept first, then one coefficient per covariate.
    pub beta: Vec<f64>,
    #[serde(default)]
    pub covariates: Vec<Covariate>,
    pub latent: LatentSpec,
    #[serde(default)]
    pub seed: u64,
}

/// One simulated series with the latent path that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulated {
    pub series: CountSeries,
    pub alpha: Vec<f64>,
    /// Visited state indices for discrete latents.
    pub states: Option<Vec<usize>>,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidSpec(format!("series length {} is below 2", self.n)));
        }
        if self.beta.len() != self.covariates.len() + 1 {
            return Err(Error::InvalidSpec(format!(
                "{} coefficients for {} covariates plus intercept",
                self.beta.len(),
                self.covariates.len()
            )));
        }
        if self.beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidSpec("coefficients must be finite".into()));
        }
        for c in &self.covariates {
            c.validate()?;
        }
        self.latent.validate()
    }

    /// Generator for replicate `stream` of this configuration.
    pub fn rng(&self, stream: u64) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    /// Covariate columns for one replicate (drawn first from its stream).
    fn design<R: Rng>(&self, rng: &mut R) -> Vec<(String, Vec<f64>)> {
        self.covariates.iter().map(|c| (c.label(), c.generate(self.n, rng))).collect()
    }

    /// The mean curve `mu_t` of a design drawn from stream 0; deterministic
    /// covariates do not depend on the stream.
    pub fn mean_curve(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let mut rng = self.rng(0);
        let series = CountSeries::with_covariates(vec![0; self.n], self.design(&mut rng))?;
        marginal_mean(&nalgebra::DVector::from_column_slice(&self.beta), series.x())
    }

    /// Analytic factor profile over the stream-0 design.
    pub fn profile(&self) -> Result<FactorProfile> {
        factor_profile(&self.latent, &self.mean_curve()?)
    }

    pub fn has_random_design(&self) -> bool {
        self.covariates.iter().any(Covariate::is_random)
    }
}

pub fn simulate(config: &SimConfig) -> Result<Simulated> {
    simulate_stream(config, 0)
}

/// Simulates replicate `stream`: covariates, then the latent path, then counts.
pub fn simulate_stream(config: &SimConfig, stream: u64) -> Result<Simulated> {
    config.validate()?;
    let mut rng = config.rng(stream);
    let covariates = config.design(&mut rng);
    let skeleton = CountSeries::with_covariates(vec![0; config.n], covariates.clone())?;
    let mu = marginal_mean(&nalgebra::DVector::from_column_slice(&config.beta), skeleton.x())?;
    let (alpha, states) = latent_path(&config.latent, config.n, &mut rng)?;
    let y = mu.iter().zip(&alpha).map(|(m, a)| poisson_draw(m * a.exp(), &mut rng)).collect::<Result<Vec<u64>>>()?;
    let series = CountSeries::with_covariates(y, covariates)?;
    Ok(Simulated { series, alpha, states })
}

fn poisson_draw<R: Rng>(lambda: f64, rng: &mut R) -> Result<u64> {
    if lambda <= 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(lambda).map_err(|e| Error::Domain(format!("Poisson rate {lambda}: {e}")))?;
    Ok(dist.sample(rng) as u64)
}

fn categorical<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// Draws `alpha_1..alpha_n` (and the state path for discrete latents).
pub fn latent_path<R: Rng>(spec: &LatentSpec, n: usize, rng: &mut R) -> Result<(Vec<f64>, Option<Vec<usize>>)> {
    match spec {
        LatentSpec::Hmm { states, transition } => {
            let pi = spec.stationary()?.expect("hmm");
            let mut path = Vec::with_capacity(n);
            let mut s = categorical(pi.as_slice(), rng);
            for t in 0..n {
                if t > 0 {
                    s = categorical(&transition[s], rng);
                }
                path.push(s);
            }
            Ok((path.iter().map(|&i| states[i]).collect(), Some(path)))
        }
        LatentSpec::Fmm { states, probs } => {
            let path: Vec<usize> = (0..n).map(|_| categorical(probs, rng)).collect();
            Ok((path.iter().map(|&i| states[i]).collect(), Some(path)))
        }
        &LatentSpec::Ar1 { phi, sigma2 } => {
            if sigma2 == 0.0 {
                return Ok((vec![0.0; n], None));
            }
            let (m0, v0) = LatentSpec::ar1_stationary_normal(phi, sigma2);
            let c = LatentSpec::ar1_intercept(phi, sigma2);
            let innov = Normal::new(0.0, sigma2.sqrt()).map_err(|e| Error::Domain(e.to_string()))?;
            let init = Normal::new(m0, v0.sqrt()).map_err(|e| Error::Domain(e.to_string()))?;
            let mut a = init.sample(rng);
            let mut out = Vec::with_capacity(n);
            for t in 0..n {
                if t > 0 {
                    a = c + phi * a + innov.sample(rng);
                }
                out.push(a);
            }
            Ok((out, None))
        }
    }
}

/// JSON sidecar written next to an exported series.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimSidecar {
    pub config: SimConfig,
    pub stream: u64,
    pub profile: FactorProfile,
}

impl SimSidecar {
    pub fn new(config: &SimConfig, stream: u64) -> Result<Self> {
        Ok(Self { config: config.clone(), stream, profile: config.profile()? })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(latent: LatentSpec, n: usize) -> SimConfig {
        SimConfig { n, beta: vec![2f64.ln()], covariates: vec![], latent, seed: 7 }
    }

    #[test]
    fn pure_poisson_mean() {
        let sim = simulate(&config(LatentSpec::null(), 1_000_000)).unwrap();
        let mean = sim.series.total() as f64 / 1e6;
        // 3 MC standard errors of sqrt(2 / 1e6).
        assert!((mean - 2.0).abs() < 3.0 * (2.0f64 / 1e6).sqrt(), "{mean}");
    }

    #[test]
    fn two_state_chain_occupancy_and_persistence() {
        let s = crate::latent::normalize_mean_one(&[-0.5, 0.5], &[0.5, 0.5]);
        let spec = LatentSpec::hmm(s, LatentSpec::uniform_switching(2, 0.9)).unwrap();
        let mut rng = config(spec.clone(), 2).rng(3);
        let n = 1_000_000;
        let (_, path) = latent_path(&spec, n, &mut rng).unwrap();
        let z: Vec<f64> = path.unwrap().iter().map(|&i| i as f64).collect();
        let m = z.iter().sum::<f64>() / n as f64;
        assert!((m - 0.5).abs() < 0.01, "{m}");
        let v = z.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n as f64;
        let c = z.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum::<f64>() / (n - 1) as f64;
        assert!((c / v - 0.8).abs() < 0.01, "{}", c / v);
    }

    #[test]
    fn ar1_latent_has_mean_one() {
        let spec = LatentSpec::ar1(0.6, 0.2).unwrap();
        let mut rng = config(spec.clone(), 2).rng(1);
        let n = 1_000_000;
        let (alpha, _) = latent_path(&spec, n, &mut rng).unwrap();
        let e: Vec<f64> = alpha.iter().map(|a| a.exp()).collect();
        let m = e.iter().sum::<f64>() / n as f64;
        // Effective sample size shrinks by (1 - rho)/(1 + rho) for a persistent series.
        let var = e.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n as f64;
        let rho1 = (0.2f64 / 0.64 * 0.6).exp_m1() / (0.2f64 / 0.64).exp_m1();
        let se = (var / n as f64 * (1.0 + rho1) / (1.0 - rho1)).sqrt();
        assert!((m - 1.0).abs() < 4.0 * se, "{m} {se}");
    }

    #[test]
    fn identical_seed_identical_output() {
        let cfg = SimConfig {
            n: 200,
            beta: vec![0.5, 1.0, -0.3],
            covariates: vec![Covariate::Binary { p: 0.5 }, Covariate::Normal],
            latent: LatentSpec::ar1(0.5, 0.3).unwrap(),
            seed: 99,
        };
        assert_eq!(simulate_stream(&cfg, 4).unwrap(), simulate_stream(&cfg, 4).unwrap());
        assert_ne!(simulate_stream(&cfg, 4).unwrap().series, simulate_stream(&cfg, 5).unwrap().series);
    }

    #[test]
    fn labels_and_deterministic_columns() {
        let cfg = SimConfig {
            n: 24,
            beta: vec![0.0, 0.0, 0.0, 0.0],
            covariates: vec![
                Covariate::Trend { scale: None },
                Covariate::Seasonal { harmonic: Harmonic::Cos, k: 1, period: 12.0 },
                Covariate::Seasonal { harmonic: Harmonic::Sin, k: 2, period: 12.0 },
            ],
            latent: LatentSpec::null(),
            seed: 0,
        };
        let sim = simulate(&cfg).unwrap();
        assert_eq!(sim.series.labels(), ["intercept", "trend", "cos12", "sin6"]);
        assert_eq!(sim.series.x()[(23, 1)], 1.0);
        assert!((sim.series.x()[(11, 2)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = SimConfig {
            n: 10,
            beta: vec![0.5, 1.0],
            covariates: vec![Covariate::Binary { p: 0.3 }],
            latent: LatentSpec::ar1(0.5, 0.3).unwrap(),
            seed: 3,
        };
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<SimConfig>(&text).unwrap(), cfg);
    }
}
