//! Levenberg–Marquardt for small dense least-squares problems.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Stop when the relative cost decrease falls below this.
    pub ftol: f64,
    /// Stop when the relative parameter step falls below this.
    pub xtol: f64,
    pub lambda0: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self { max_iter: 200, ftol: 1e-14, xtol: 1e-12, lambda0: 1e-3 }
    }
}

#[derive(Debug, Clone)]
pub struct LmReport {
    pub params: DVector<f64>,
    /// Sum of squared residuals.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `(J^T J)^{-1}` at the solution, if invertible.
    pub jtj_inv: Option<DMatrix<f64>>,
}

/// Minimises `|r(p)|^2`. `eval` returns residuals and Jacobian `dr/dp`.
/// Marquardt's diagonal scaling makes the damping scale-invariant.
pub fn levenberg_marquardt<F>(mut eval: F, p0: DVector<f64>, opts: LmOptions) -> LmReport
where
    F: FnMut(&DVector<f64>) -> (DVector<f64>, DMatrix<f64>),
{
    let mut p = p0;
    let (mut r, mut j) = eval(&p);
    let mut cost = r.norm_squared();
    let mut lambda = opts.lambda0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        let mut accepted = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for k in 0..a.nrows() {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&g))) else {
                lambda *= 10.0;
                continue;
            };
            let trial = &p + &step;
            let (tr, tj) = eval(&trial);
            let tcost = tr.norm_squared();
            if tcost.is_finite() && tcost <= cost {
                let rel_df = (cost - tcost) / cost.max(1e-300);
                let rel_dx = step.norm() / (p.norm() + 1e-300);
                p = trial;
                r = tr;
                j = tj;
                cost = tcost;
                lambda = (lambda * 0.1).max(1e-12);
                accepted = true;
                if rel_df <= opts.ftol || rel_dx <= opts.xtol {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no downhill step at any damping: already at a minimum to precision
            converged = g.norm() <= 1e-8 * (cost.sqrt() + 1e-300) * j.norm().max(1e-300) || cost == 0.0;
            break;
        }
        if converged {
            break;
        }
    }
    let jtj = j.transpose() * &j;
    let jtj_inv = jtj.clone().try_inverse();
    LmReport { params: p, cost, iterations, converged, jtj_inv }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits_exponential() {
        let t: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = t.iter().map(|t| 2.0 * (-0.7 * t).exp()).collect();
        let rep = levenberg_marquardt(
            |p| {
                let r = DVector::from_iterator(t.len(), t.iter().zip(&y).map(|(t, y)| p[0] * (-p[1] * t).exp() - y));
                let j = DMatrix::from_fn(t.len(), 2, |i, k| {
                    let e = (-p[1] * t[i]).exp();
                    if k == 0 { e } else { -p[0] * t[i] * e }
                });
                (r, j)
            },
            DVector::from_vec(vec![1.0, 0.2]),
            LmOptions::default(),
        );
        assert!(rep.converged);
        assert!((rep.params[0] - 2.0).abs() < 1e-8);
        assert!((rep.params[1] - 0.7).abs() < 1e-8);
    }
}
