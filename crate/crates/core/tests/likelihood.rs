mod common;

use common::*;
use nalgebra::DVector;
use pdmcount::estimators::{fmm_loglik, hmm_loglik, loglik_spec, mixture_gradient, mixture_scores};
use pdmcount::{LatentSpec, ModelKind, WorkingParams};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn two_state_matches_path_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let n = rng.random_range(2..=10);
        let data = random_data(&mut rng, n);
        let beta = [rng.random_range(-0.5..1.0), rng.random_range(-1.0..1.0)];
        let (coords, pi, p, states) = random_hmm2(&mut rng);
        let params = WorkingParams::from_parts(ModelKind::Hmm2, &beta, &coords).unwrap();
        let want = brute_force_loglik(&pi, &p, &states, &means(&data, &beta), data.y());
        let got = hmm_loglik(&params, &data).unwrap();
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
    }
}

#[test]
fn three_state_matches_path_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        let n = rng.random_range(2..=7);
        let data = random_data(&mut rng, n);
        let beta = [rng.random_range(-0.5..1.0), rng.random_range(-1.0..1.0)];
        let p = random_chain(&mut rng, 3);
        let pi = stationary(&p);
        let mut raw: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        raw.sort_by(f64::total_cmp);
        let states = mean_one(&raw, &pi);
        let spec = LatentSpec::hmm(states.clone(), p.clone()).unwrap();
        let want = brute_force_loglik(&pi, &p, &states, &means(&data, &beta), data.y());
        let got = loglik_spec(&spec, &DVector::from_column_slice(&beta), &data).unwrap();
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
    }
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let data = random_data(&mut rng, 60);
        let beta = [rng.random_range(0.0..1.0), rng.random_range(-1.0..1.0)];
        let (coords, ..) = random_hmm2(&mut rng);
        let theta: Vec<f64> = beta.iter().chain(&coords).copied().collect();
        let ll = |t: &[f64]| {
            hmm_loglik(&WorkingParams::from_parts(ModelKind::Hmm2, &t[..2], &t[2..]).unwrap(), &data).unwrap()
        };
        let fd = central_difference(ll, &theta, 1e-5);
        let params = WorkingParams::from_parts(ModelKind::Hmm2, &beta, &coords).unwrap();
        let (_, g) = mixture_gradient(&params, &data).unwrap();
        let scale = g.amax().max(1.0);
        for (a, b) in g.iter().zip(&fd) {
            assert!((a - b).abs() / scale < 1e-6, "{g:?} vs {fd:?}");
        }
    }
}

/// Row t of the score matrix is the gradient of log P(y_t | y_1..y_{t-1}),
/// i.e. the difference of the prefix log-likelihood gradients.
#[test]
fn per_step_scores_are_prefix_increments() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let data = random_data(&mut rng, 12);
    let beta = [0.4, -0.3];
    let (coords, ..) = random_hmm2(&mut rng);
    let params = WorkingParams::from_parts(ModelKind::Hmm2, &beta, &coords).unwrap();
    let (_, scores) = mixture_scores(&params, &data).unwrap();
    let theta: Vec<f64> = beta.iter().chain(&coords).copied().collect();
    let prefix_grad = |len: usize| {
        let sub = data.slice(0..len).unwrap();
        central_difference(
            |t| hmm_loglik(&WorkingParams::from_parts(ModelKind::Hmm2, &t[..2], &t[2..]).unwrap(), &sub).unwrap(),
            &theta,
            1e-5,
        )
    };
    for t in [4, 7, 11] {
        let (a, b) = (prefix_grad(t), prefix_grad(t + 1));
        for q in 0..theta.len() {
            assert!((scores[(t, q)] - (b[q] - a[q])).abs() < 1e-6, "t = {t}, q = {q}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// A chain whose rows coincide forgets its past: it is the mixture.
    #[test]
    fn memoryless_chain_is_the_mixture(p1 in 0.05f64..0.95, s1 in -1.5f64..0.0, seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = random_data(&mut rng, 25);
        let beta = [0.3, 0.5];
        let logit = (p1 / (1.0 - p1)).ln();
        let hmm = WorkingParams::from_parts(ModelKind::Hmm2, &beta, &[logit, -logit, s1]).unwrap();
        let fmm = WorkingParams::from_parts(ModelKind::Fmm2, &beta, &[logit, s1]).unwrap();
        let (a, b) = (hmm_loglik(&hmm, &data).unwrap(), fmm_loglik(&fmm, &data).unwrap());
        prop_assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()));
    }

    /// Exchanging the state labels describes the same model.
    #[test]
    fn relabeling_keeps_the_likelihood(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = random_data(&mut rng, 20);
        let (coords, ..) = random_hmm2(&mut rng);
        let params = WorkingParams::from_parts(ModelKind::Hmm2, &[0.2, 0.7], &coords).unwrap();
        let a = hmm_loglik(&params, &data).unwrap();
        let b = hmm_loglik(&params.relabeled().unwrap(), &data).unwrap();
        prop_assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()));
    }
}
