use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::derive_s2;
use crate::latent::{normalize_mean_one, LatentSpec};
use crate::moments::{factor_profile, lag1_autocorrelation, overdispersion_factor, Factor, FactorProfile, Level};

/// Target factor levels; `None` leaves a factor free.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTarget {
    #[serde(default)]
    pub od: Option<Level>,
    #[serde(default)]
    pub ac1: Option<Level>,
    #[serde(default)]
    pub sp: Option<Level>,
    /// Relative tolerance per factor.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_tolerance() -> f64 {
    0.05
}

impl CalibrationTarget {
    pub fn new(od: Level, ac1: Level, sp: Level) -> Self {
        Self { od: Some(od), ac1: Some(ac1), sp: Some(sp), tolerance: default_tolerance() }
    }

    pub fn only(factor: Factor, level: Level) -> Self {
        let mut t = Self { od: None, ac1: None, sp: None, tolerance: default_tolerance() };
        match factor {
            Factor::Od => t.od = Some(level),
            Factor::Ac1 => t.ac1 = Some(level),
            Factor::Sp => t.sp = Some(level),
        }
        t
    }

    fn get(&self, factor: Factor) -> Option<f64> {
        let level = match factor {
            Factor::Od => self.od,
            Factor::Ac1 => self.ac1,
            Factor::Sp => self.sp,
        };
        level.map(|l| factor.anchor(l))
    }

    fn targets(&self) -> Vec<(Factor, f64)> {
        [Factor::Od, Factor::Ac1, Factor::Sp].into_iter().filter_map(|f| self.get(f).map(|v| (f, v))).collect()
    }

    /// Largest relative miss over the targeted factors.
    fn miss(&self, profile: &FactorProfile) -> f64 {
        self.targets().iter().map(|&(f, a)| ((profile.value(f) - a) / a).abs()).fold(0.0, f64::max)
    }

    fn accept(&self, spec: LatentSpec, mu: &[f64], family: &str) -> Result<LatentSpec> {
        let profile = factor_profile(&spec, mu)?;
        let miss = self.miss(&profile);
        if miss <= self.tolerance {
            Ok(spec)
        } else {
            Err(Error::Infeasible {
                reason: format!("{family}: closest profile misses a target by {:.1}%", 100.0 * miss),
                closest: Box::new(profile),
            })
        }
    }
}

/// Parametric families searched by the calibrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// Two states with a fixed transition matrix; only the state gap moves.
    Hmm2 {
        p11: f64,
        p22: f64,
    },
    /// Two states with free occupancy, gap and persistence.
    Hmm2Free,
    /// K equally spaced log-states with `p_ii = stay`; only the spacing moves.
    HmmK {
        k: usize,
        stay: f64,
    },
    Ar1,
}

impl Family {
    fn name(&self) -> String {
        match self {
            Family::Hmm2 { p11, p22 } => format!("2-state chain (p11={p11}, p22={p22})"),
            Family::Hmm2Free => "2-state chain".into(),
            Family::HmmK { k, stay } => format!("{k}-state chain (p_ii={stay})"),
            Family::Ar1 => "AR(1) latent".into(),
        }
    }
}

/// Finds latent parameters whose analytic factors over the mean curve `mu`
/// hit the target anchors within tolerance.
pub fn calibrate(target: &CalibrationTarget, family: &Family, mu: &[f64]) -> Result<LatentSpec> {
    if mu.is_empty() || mu.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
        return Err(Error::InvalidSpec("mean curve must be non-empty and positive".into()));
    }
    if target.targets().is_empty() {
        return Err(Error::InvalidSpec("calibration target names no factor".into()));
    }
    let name = family.name();
    match *family {
        Family::Hmm2 { p11, p22 } => {
            let transition = vec![vec![p11, 1.0 - p11], vec![1.0 - p22, p22]];
            let probe = LatentSpec::hmm(vec![0.0, 0.0], transition.clone())?;
            let pi1 = probe.stationary()?.expect("hmm")[0];
            let build =
                |x: f64| -> Result<LatentSpec> { LatentSpec::hmm(vec![-x, derive_s2(pi1, -x)?], transition.clone()) };
            let spec = one_dimensional(target, mu, build, 40.0)?;
            target.accept(spec, mu, &name)
        }
        Family::HmmK { k, stay } => {
            if k < 2 {
                return Err(Error::InvalidSpec("at least two states are required".into()));
            }
            let transition = LatentSpec::uniform_switching(k, stay);
            let probe = LatentSpec::hmm(vec![0.0; k], transition.clone())?;
            let pi = probe.stationary()?.expect("hmm");
            let build = |delta: f64| -> Result<LatentSpec> {
                let raw: Vec<f64> = (0..k).map(|j| delta * (j as f64 - (k - 1) as f64 / 2.0)).collect();
                LatentSpec::hmm(normalize_mean_one(&raw, pi.as_slice()), transition.clone())
            };
            let spec = one_dimensional(target, mu, build, 20.0)?;
            target.accept(spec, mu, &name)
        }
        Family::Hmm2Free => hmm2_free(target, mu, &name),
        Family::Ar1 => ar1(target, mu, &name),
    }
}

fn bisect(mut lo: f64, mut hi: f64, mut f: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    let f_lo = f(lo)?;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let v = f(mid)?;
        if (v < 0.0) == (f_lo < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 * (1.0 + hi.abs()) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Root-finds a single scale parameter on the primary factor (SP, else OD,
/// else AC1): the first upward crossing on a grid, refined by bisection.
/// SP need not be monotone in the scale when more than two states share it.
fn one_dimensional(
    target: &CalibrationTarget,
    mu: &[f64],
    build: impl Fn(f64) -> Result<LatentSpec>,
    x_max: f64,
) -> Result<LatentSpec> {
    let (factor, anchor) = [Factor::Sp, Factor::Od, Factor::Ac1]
        .into_iter()
        .find_map(|f| target.get(f).map(|a| (f, a)))
        .expect("non-empty target");
    let value = |x: f64| -> Result<f64> { Ok(factor_profile(&build(x)?, mu)?.value(factor) - anchor) };
    const STEPS: usize = 400;
    let grid: Vec<f64> = (1..=STEPS).map(|i| x_max * i as f64 / STEPS as f64).collect();
    let mut prev = (1e-9, value(1e-9)?);
    if prev.1 >= 0.0 {
        return build(prev.0);
    }
    let mut best = prev;
    for &x in &grid {
        let v = value(x)?;
        if v >= 0.0 {
            return build(bisect(prev.0, x, value)?);
        }
        if v > best.1 {
            best = (x, v);
        }
        prev = (x, v);
    }
    Err(Error::Infeasible {
        reason: format!("{factor:?} cannot reach {anchor} in this family"),
        closest: Box::new(factor_profile(&build(best.0)?, mu)?),
    })
}

fn hmm2_states(pi1: f64, x: f64) -> Result<[f64; 2]> {
    Ok([-x, derive_s2(pi1, -x)?])
}

fn sigma_sq_two_state(pi1: f64, s: [f64; 2]) -> f64 {
    pi1 * (2.0 * s[0]).exp() + (1.0 - pi1) * (2.0 * s[1]).exp() - 1.0
}

/// Gap `x` at which a two-state mixture with occupancy `pi1` hits `od`.
fn gap_for_od(pi1: f64, od: f64, mu: &[f64]) -> Result<Option<f64>> {
    let f =
        |x: f64| -> Result<f64> { Ok(overdispersion_factor(mu, sigma_sq_two_state(pi1, hmm2_states(pi1, x)?)) - od) };
    if f(40.0)? < 0.0 {
        return Ok(None);
    }
    Ok(Some(bisect(1e-9, 40.0, f)?))
}

fn hmm2_free(target: &CalibrationTarget, mu: &[f64], name: &str) -> Result<LatentSpec> {
    let (Some(od), Some(sp)) = (target.get(Factor::Od), target.get(Factor::Sp)) else {
        return Err(Error::InvalidSpec("the free 2-state family needs OD and SP targets".into()));
    };
    let sp_at = |u: f64| -> Result<Option<(f64, [f64; 2])>> {
        let pi1 = 1.0 / (1.0 + (-u).exp());
        Ok(match gap_for_od(pi1, od, mu)? {
            Some(x) => {
                let s = hmm2_states(pi1, x)?;
                Some((crate::moments::mean_separation(mu, s[0], s[1]) - sp, s))
            }
            None => None,
        })
    };
    // Scan the occupancy (logit scale) for sign changes of SP - target on the OD curve.
    let grid: Vec<f64> = (-50..=50).map(|i| i as f64 * 0.1).collect();
    let values: Vec<Option<(f64, [f64; 2])>> = grid.iter().map(|&u| sp_at(u)).collect::<Result<_>>()?;
    let mut roots = Vec::new();
    for i in 0..grid.len() - 1 {
        if let (Some((a, _)), Some((b, _))) = (values[i], values[i + 1]) {
            if a == 0.0 || (a < 0.0) != (b < 0.0) {
                let u = bisect(grid[i], grid[i + 1], |u| Ok(sp_at(u)?.map_or(f64::NAN, |v| v.0)))?;
                roots.push(u);
            }
        }
    }
    let build = |u: f64, lambda: f64| -> Result<LatentSpec> {
        let pi1 = 1.0 / (1.0 + (-u).exp());
        let x = gap_for_od(pi1, od, mu)?.ok_or_else(|| Error::Domain("OD target out of reach".into()))?;
        let s = hmm2_states(pi1, x)?;
        let (p11, p22) = (pi1 + lambda * (1.0 - pi1), 1.0 - pi1 + lambda * pi1);
        LatentSpec::hmm(s.to_vec(), vec![vec![p11, 1.0 - p11], vec![1.0 - p22, p22]])
    };
    let Some(&u) = roots.iter().min_by(|a, b| a.abs().total_cmp(&b.abs())) else {
        // Report the closest point on the grid.
        let best = grid
            .iter()
            .zip(&values)
            .filter_map(|(&u, v)| v.map(|(d, _)| (u, d.abs())))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        let closest = match best {
            Some((u, _)) => factor_profile(&build(u, 0.8)?, mu)?,
            None => FactorProfile::new(f64::NAN, f64::NAN, vec![]),
        };
        return Err(Error::Infeasible {
            reason: format!("{name}: OD and SP targets cannot hold together"),
            closest: Box::new(closest),
        });
    };
    const LAMBDA_MAX: f64 = 0.999;
    let lambda = match target.get(Factor::Ac1) {
        None => 0.8,
        Some(ac1) => {
            // AC1 is linear in the chain's second eigenvalue.
            let full = factor_profile(&build(u, LAMBDA_MAX)?, mu)?.ac1 / LAMBDA_MAX;
            let lambda = ac1 / full;
            if lambda > LAMBDA_MAX {
                let closest = factor_profile(&build(u, LAMBDA_MAX)?, mu)?;
                return Err(Error::Infeasible {
                    reason: format!("{name}: AC1 {ac1} exceeds the attainable {:.3}", closest.ac1),
                    closest: Box::new(closest),
                });
            }
            lambda
        }
    };
    target.accept(build(u, lambda)?, mu, name)
}

fn ar1(target: &CalibrationTarget, mu: &[f64], name: &str) -> Result<LatentSpec> {
    let Some(od) = target.get(Factor::Od) else {
        return Err(Error::InvalidSpec("the AR(1) family needs an OD target".into()));
    };
    let mean_mu = mu.iter().sum::<f64>() / mu.len() as f64;
    let s2 = (od - 1.0) / mean_mu;
    let v = s2.ln_1p();
    let spec_at = |phi: f64| LatentSpec::ar1(phi, v * (1.0 - phi * phi));
    let phi = match target.get(Factor::Ac1) {
        None => 0.0,
        Some(ac1) => {
            let f = |phi: f64| -> Result<f64> { Ok(lag1_autocorrelation(mu, (v * phi).exp_m1(), s2) - ac1) };
            const PHI_MAX: f64 = 0.9999;
            if f(PHI_MAX)? < 0.0 {
                let closest = factor_profile(&spec_at(PHI_MAX)?, mu)?;
                return Err(Error::Infeasible {
                    reason: format!("{name}: AC1 {ac1} exceeds the attainable {:.3}", closest.ac1),
                    closest: Box::new(closest),
                });
            }
            if f(0.0)? > 0.0 {
                0.0
            } else {
                bisect(0.0, PHI_MAX, f)?
            }
        }
    };
    target.accept(spec_at(phi)?, mu, name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latent::latent_moments;
    use crate::moments::mean_separation;
    use approx::assert_abs_diff_eq;

    #[test]
    fn od_inversion_at_constant_mean() {
        let t = CalibrationTarget::only(Factor::Od, Level::Medium);
        let spec = calibrate(&t, &Family::Ar1, &[2.0; 50]).unwrap();
        let m = latent_moments(&spec, 1).unwrap();
        assert_abs_diff_eq!(1.0 + m.sigma_alpha_sq * 2.0, 3.0, epsilon = 1e-10);
    }

    #[test]
    fn fixed_chain_hits_high_separation() {
        let t = CalibrationTarget::only(Factor::Sp, Level::High);
        let spec = calibrate(&t, &Family::Hmm2 { p11: 0.9, p22: 0.9 }, &[2.0]).unwrap();
        let s = spec.states().unwrap();
        assert!((mean_separation(&[2.0], s[0], s[1]) - 0.7).abs() < 0.005);
    }

    #[test]
    fn ar1_moment_round_trip() {
        let t = CalibrationTarget { od: Some(Level::Medium), ac1: Some(Level::High), sp: None, tolerance: 0.05 };
        let mu = [3.0; 100];
        let spec = calibrate(&t, &Family::Ar1, &mu).unwrap();
        let m = latent_moments(&spec, 1).unwrap();
        let od = 1.0 + 3.0 * m.sigma_alpha_sq;
        let ac1 = 3.0 * m.gamma[1] / (1.0 + 3.0 * m.sigma_alpha_sq);
        assert!((od / 3.0 - 1.0).abs() < 0.05 && (ac1 / 0.5 - 1.0).abs() < 0.05, "{od} {ac1}");
    }

    #[test]
    fn low_od_high_ac1_high_sp_is_infeasible_for_two_states() {
        let t = CalibrationTarget::new(Level::Low, Level::High, Level::High);
        let err = calibrate(&t, &Family::Hmm2Free, &[2.0; 20]).unwrap_err();
        assert!(matches!(err, Error::Infeasible { .. }), "{err:?}");
    }

    #[test]
    fn free_two_state_round_trip() {
        let levels = [Level::Low, Level::Medium, Level::High];
        for mu in [[1.0; 4], [4.0; 4]] {
            let mut accepted = 0;
            for od in levels {
                for ac1 in levels {
                    for sp in levels {
                        let t = CalibrationTarget::new(od, ac1, sp);
                        match calibrate(&t, &Family::Hmm2Free, &mu) {
                            Ok(spec) => {
                                let p = factor_profile(&spec, &mu).unwrap();
                                assert_eq!((p.levels.od, p.levels.ac1, p.levels.sp), (od, ac1, sp));
                                assert!(t.miss(&p) <= 0.05);
                                accepted += 1;
                            }
                            Err(e) => assert!(matches!(e, Error::Infeasible { .. }), "{e:?}"),
                        }
                    }
                }
            }
            // Two states at a constant mean only separate well once OD is small.
            assert!(accepted >= 2, "{accepted}");
        }
    }

    #[test]
    fn missing_factor_targets_are_rejected() {
        let t = CalibrationTarget::only(Factor::Ac1, Level::High);
        assert!(matches!(calibrate(&t, &Family::Ar1, &[2.0]), Err(Error::InvalidSpec(_))));
    }
}
