mod common;

use common::mean_and_se;
use pdmcount::diagnostics::{estimate_factors, standardized_residuals};
use pdmcount::estimators::glm_fit;
use pdmcount::simulation::{simulate, simulate_stream, Covariate, SimConfig};
use pdmcount::study::preset;
use pdmcount::{FactorProfile, LatentSpec};

const REPS: u64 = 200;

fn estimated(sim: &SimConfig, stream: u64) -> FactorProfile {
    let data = simulate_stream(sim, stream).unwrap().series;
    let fit = glm_fit(&data).unwrap();
    let r = standardized_residuals(&fit, &data).unwrap();
    estimate_factors(&r, &fit, &data).unwrap()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 0 {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}

#[test]
fn pearson_variance_is_one_under_the_null() {
    let sim = SimConfig {
        n: 100_000,
        beta: vec![0.8, 0.6],
        covariates: vec![Covariate::Binary { p: 0.5 }],
        latent: LatentSpec::null(),
        seed: 41,
    };
    let data = simulate(&sim).unwrap().series;
    let fit = glm_fit(&data).unwrap();
    let r = standardized_residuals(&fit, &data).unwrap();
    let squares: Vec<f64> = r.iter().map(|x| x * x).collect();
    let (m, se) = mean_and_se(&squares);
    assert!((m - 1.0).abs() < 3.0 * se, "E r^2 = {m}, MC SE {se}");
}

/// Every factor high: the estimated levels should agree in almost every
/// replicate.
#[test]
fn high_factor_levels_are_recovered() {
    let sim = preset("se-table2-hmm-binary").unwrap().sim;
    let truth = sim.profile().unwrap().levels;
    let hits = (0..REPS).filter(|&r| estimated(&sim, r).levels == truth).count();
    assert!(hits as f64 >= 0.9 * REPS as f64, "{hits}/{REPS} replicates at {truth:?}");
}

#[test]
fn factors_are_recovered_at_an_anchor() {
    let sim = preset("study1-med").unwrap().sim;
    let truth = sim.profile().unwrap();
    let est: Vec<FactorProfile> = (0..REPS).map(|r| estimated(&sim, r)).collect();
    let checks = [
        ("OD", median(est.iter().map(|p| p.od).collect()), truth.od),
        ("AC1", median(est.iter().map(|p| p.ac1).collect()), truth.ac1),
        ("SP", median(est.iter().map(|p| p.sp_value()).collect()), truth.sp_value()),
    ];
    for (name, got, want) in checks {
        assert!(((got - want) / want).abs() <= 0.15, "{name}: median {got:.3} vs {want:.3}");
    }
}
