//! BFGS minimization with a backtracking line search.
//!
//! The objective may refuse a point (returns `None`), which the line search
//! treats as an infinitely bad value; this is how the `S_1` feasibility
//! boundary is handled without constrained machinery.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Sup-norm gradient tolerance on the objective being minimized.
    pub gtol: f64,
    /// Largest sup-norm of a single search direction.
    pub max_step: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self { max_iter: 500, gtol: 1e-10, max_step: 2.0 }
    }
}

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub x: DVector<f64>,
    pub f: f64,
    pub grad: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) fn sup_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn minimize<F>(mut objective: F, x0: DVector<f64>, opts: &BfgsOptions) -> Option<OptimResult>
where
    F: FnMut(&DVector<f64>) -> Option<(f64, DVector<f64>)>,
{
    let n = x0.len();
    let (mut f, mut g) = objective(&x0)?;
    if !f.is_finite() {
        return None;
    }
    let mut x = x0;
    let mut hinv = DMatrix::<f64>::identity(n, n);
    let mut scaled = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        if sup_norm(&g) < opts.gtol {
            break;
        }
        iterations += 1;
        let mut dir = -(&hinv * &g);
        let mut slope = g.dot(&dir);
        if !(slope < 0.0) {
            hinv = DMatrix::identity(n, n);
            dir = -g.clone();
            slope = g.dot(&dir);
        }
        let len = sup_norm(&dir);
        if len > opts.max_step {
            dir *= opts.max_step / len;
            slope *= opts.max_step / len;
        }

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = &x + alpha * &dir;
            if let Some((ft, gt)) = objective(&trial) {
                if ft.is_finite() && ft <= f + 1e-4 * alpha * slope {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else {
            break;
        };

        let s = &xn - &x;
        let yv = &gn - &g;
        let sy = s.dot(&yv);
        if sy > 1e-14 * s.norm() * yv.norm() && sy > 0.0 {
            if !scaled {
                hinv *= sy / yv.dot(&yv);
                scaled = true;
            }
            let rho = 1.0 / sy;
            let hy = &hinv * &yv;
            let yhy = yv.dot(&hy);
            // H+ = H - rho (H y s' + s y' H) + (rho^2 y'Hy + rho) s s'
            hinv += (rho * rho * yhy + rho) * (&s * s.transpose()) - rho * (&hy * s.transpose() + &s * hy.transpose());
        }
        let stalled = (f - fn_).abs() <= 1e-15 * f.abs().max(1.0) && sup_norm(&s) < 1e-12;
        x = xn;
        f = fn_;
        g = gn;
        if stalled {
            break;
        }
    }
    let converged = sup_norm(&g) < opts.gtol;
    Some(OptimResult { x, f, grad: g, iterations, converged })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_rosenbrock() {
        let f = |x: &DVector<f64>| {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = DVector::from_vec(vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)]);
            Some((v, g))
        };
        let r =
            minimize(f, DVector::from_vec(vec![-1.2, 1.0]), &BfgsOptions { gtol: 1e-8, ..Default::default() }).unwrap();
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn respects_infeasible_region() {
        // Minimum of (x - 2)^2 restricted to x < 1 lies on the boundary.
        let f = |x: &DVector<f64>| {
            if x[0] >= 1.0 {
                None
            } else {
                Some(((x[0] - 2.0).powi(2), DVector::from_vec(vec![2.0 * (x[0] - 2.0)])))
            }
        };
        let r = minimize(f, DVector::from_vec(vec![0.0]), &BfgsOptions::default()).unwrap();
        assert!(r.x[0] < 1.0 && r.x[0] > 0.99);
        assert!(!r.converged);
    }
}
