//! Independent reference computations shared by the integration tests.
//! Nothing here calls the library's numerical code.

#![allow(dead_code)]

use pdmcount::CountSeries;
use rand::Rng;

pub fn ln_factorial(y: u64) -> f64 {
    (2..=y).map(|k| (k as f64).ln()).sum()
}

pub fn poisson_ln_pmf(y: u64, lambda: f64) -> f64 {
    y as f64 * lambda.ln() - lambda - ln_factorial(y)
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Stationary distribution by power iteration.
pub fn stationary(p: &[Vec<f64>]) -> Vec<f64> {
    let k = p.len();
    let mut pi = vec![1.0 / k as f64; k];
    for _ in 0..100_000 {
        let next: Vec<f64> = (0..k).map(|j| (0..k).map(|i| pi[i] * p[i][j]).sum()).collect();
        let diff: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        pi = next;
        if diff < 1e-16 {
            break;
        }
    }
    let s: f64 = pi.iter().sum();
    pi.iter().map(|x| x / s).collect()
}

/// Log-likelihood by summing over every latent path.
pub fn brute_force_loglik(pi: &[f64], p: &[Vec<f64>], states: &[f64], mu: &[f64], y: &[u64]) -> f64 {
    let k = pi.len();
    let n = y.len();
    let total = k.pow(n as u32);
    let mut terms = Vec::with_capacity(total);
    let mut path = vec![0usize; n];
    for code in 0..total {
        let mut c = code;
        for s in path.iter_mut() {
            *s = c % k;
            c /= k;
        }
        let mut lp = pi[path[0]].ln();
        for t in 0..n {
            if t > 0 {
                lp += p[path[t - 1]][path[t]].ln();
            }
            lp += poisson_ln_pmf(y[t], mu[t] * states[path[t]].exp());
        }
        terms.push(lp);
    }
    log_sum_exp(&terms)
}

/// A random chain with every transition probability at least 0.05 / k.
pub fn random_chain<R: Rng>(rng: &mut R, k: usize) -> Vec<Vec<f64>> {
    (0..k)
        .map(|_| {
            let row: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
            let s: f64 = row.iter().sum();
            row.iter().map(|x| x / s).collect()
        })
        .collect()
}

/// States shifted so that `sum_j pi_j exp(S_j) = 1`.
pub fn mean_one(raw: &[f64], pi: &[f64]) -> Vec<f64> {
    let c = raw.iter().zip(pi).map(|(s, w)| w * s.exp()).sum::<f64>().ln();
    raw.iter().map(|s| s - c).collect()
}

pub fn central_difference<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut a = x.to_vec();
            let mut b = x.to_vec();
            a[i] += h;
            b[i] -= h;
            (f(&a) - f(&b)) / (2.0 * h)
        })
        .collect()
}

/// Separation probability by direct summation of the Poisson overlap.
pub fn separation(mu: f64, s_lo: f64, s_hi: f64) -> f64 {
    let (a, b) = (mu * s_lo.exp(), mu * s_hi.exp());
    let upper = (b + 40.0 * b.sqrt() + 60.0) as u64;
    let overlap: f64 = (0..=upper).map(|i| poisson_ln_pmf(i, a).exp().min(poisson_ln_pmf(i, b).exp())).sum();
    1.0 - overlap
}

/// Latent variance and lag-1 autocovariance of `exp(alpha)` for a chain.
pub fn chain_moments(pi: &[f64], p: &[Vec<f64>], states: &[f64]) -> (f64, f64) {
    let k = pi.len();
    let var = (0..k).map(|j| pi[j] * (2.0 * states[j]).exp()).sum::<f64>() - 1.0;
    let mut cross = 0.0;
    for i in 0..k {
        for j in 0..k {
            cross += pi[i] * p[i][j] * (states[i] + states[j]).exp();
        }
    }
    (var, cross - 1.0)
}

/// OD, AC1 and SP (mean over adjacent pairs) over a mean curve.
pub fn chain_factors(pi: &[f64], p: &[Vec<f64>], states: &[f64], mu: &[f64]) -> (f64, f64, f64) {
    let (var, g1) = chain_moments(pi, p, states);
    let (od, ac1) = od_ac1(var, g1, mu);
    let mut sorted = states.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pairs = sorted.len() - 1;
    let sp = sorted
        .windows(2)
        .map(|w| mu.iter().map(|&m| separation(m, w[0], w[1])).sum::<f64>() / mu.len() as f64)
        .sum::<f64>()
        / pairs as f64;
    (od, ac1, sp)
}

pub fn od_ac1(var: f64, g1: f64, mu: &[f64]) -> (f64, f64) {
    let od = mu.iter().map(|m| 1.0 + var * m).sum::<f64>() / mu.len() as f64;
    let ac1 = mu
        .windows(2)
        .map(|w| w[0] * w[1] * g1 / ((w[0] + w[0] * w[0] * var) * (w[1] + w[1] * w[1] * var)).sqrt())
        .sum::<f64>()
        / (mu.len() - 1) as f64;
    (od, ac1)
}

/// Sample mean and its Monte Carlo standard error.
pub fn mean_and_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn random_data<R: Rng>(rng: &mut R, n: usize) -> CountSeries {
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let y: Vec<u64> = (0..n).map(|_| rng.random_range(0..7)).collect();
    CountSeries::with_covariates(y, vec![("x".into(), x)]).unwrap()
}

pub fn means(data: &CountSeries, beta: &[f64]) -> Vec<f64> {
    (0..data.n()).map(|t| (beta[0] + beta[1] * data.x()[(t, 1)]).exp()).collect()
}

/// Working HMM2 coordinates and the chain they describe, derived by hand.
pub fn random_hmm2<R: Rng>(rng: &mut R) -> ([f64; 3], Vec<f64>, Vec<Vec<f64>>, Vec<f64>) {
    loop {
        let (a, b) = (rng.random_range(-2.5..2.5), rng.random_range(-2.5..2.5));
        let (p11, p22) = (sigmoid(a), sigmoid(b));
        let pi1 = (1.0 - p22) / (2.0 - p11 - p22);
        let s1: f64 = rng.random_range(-1.5..0.8);
        if pi1 * s1.exp() > 0.97 {
            continue;
        }
        let s2 = ((1.0 - pi1 * s1.exp()) / (1.0 - pi1)).ln();
        let p = vec![vec![p11, 1.0 - p11], vec![1.0 - p22, p22]];
        return ([a, b, s1], vec![pi1, 1.0 - pi1], p, vec![s1, s2]);
    }
}
