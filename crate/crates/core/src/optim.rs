//! Quasi-Newton minimization of hyperparameter energies in log space.
//!
//! BFGS with Armijo backtracking. Box bounds are soft: a quadratic penalty is
//! added outside `[lower, upper]`, so degenerate data can push a parameter a
//! little past its bound without the optimizer failing.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizeOptions {
    pub max_iters: usize,
    /// Stop when the largest gradient component falls below this.
    pub grad_tol: f64,
    /// Stop when the relative decrease of the objective falls below this.
    pub value_tol: f64,
    /// Largest allowed step in any coordinate per iteration.
    pub max_step: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            max_iters: 200,
            grad_tol: 1e-5,
            value_tol: 1e-10,
            max_step: 2.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SoftBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub weight: f64,
}

impl SoftBounds {
    pub fn penalty(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let mut p = 0.0;
        for i in 0..x.len() {
            let below = self.lower[i] - x[i];
            let above = x[i] - self.upper[i];
            if below > 0.0 {
                p += self.weight * below * below;
                grad[i] -= 2.0 * self.weight * below;
            } else if above > 0.0 {
                p += self.weight * above * above;
                grad[i] += 2.0 * self.weight * above;
            }
        }
        p
    }

    /// Clamp into the box (used for random restarts).
    pub fn clamp(&self, x: &mut [f64]) {
        for i in 0..x.len() {
            x[i] = x[i].clamp(self.lower[i], self.upper[i]);
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    /// Objective value without the bound penalty.
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Minimize `f`, which returns the value and gradient at a point.
///
/// Points where `f` errors or returns a non-finite value are rejected by the
/// line search. Fails only if the starting point cannot be evaluated.
pub fn minimize<F>(mut f: F, x0: &[f64], bounds: &SoftBounds, opts: &MinimizeOptions) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64]| -> Option<(f64, f64, DVector<f64>)> {
        evaluations += 1;
        let (v, mut g) = f(x).ok()?;
        if !v.is_finite() || g.iter().any(|gi| !gi.is_finite()) || g.len() != n {
            return None;
        }
        let pen = bounds.penalty(x, &mut g);
        Some((v + pen, v, DVector::from_vec(g)))
    };

    let mut x = DVector::from_column_slice(x0);
    let (mut fx, mut raw, mut g) = eval(x.as_slice()).ok_or_else(|| {
        Error::OptimizationFailure("objective could not be evaluated at the starting point".into())
    })?;
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut fresh = true;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iters {
        if g.amax() < opts.grad_tol {
            converged = true;
            break;
        }
        iterations += 1;
        let mut p = -(&h * &g);
        let mut slope = g.dot(&p);
        if slope >= 0.0 {
            h.fill_with_identity();
            fresh = true;
            p = -g.clone();
            slope = g.dot(&p);
        }
        let pmax = p.amax();
        if pmax > opts.max_step {
            p *= opts.max_step / pmax;
            slope = g.dot(&p);
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let xn = &x + &p * step;
            if let Some((fnew, rnew, gnew)) = eval(xn.as_slice()) {
                if fnew <= fx + 1e-4 * step * slope {
                    accepted = Some((xn, fnew, rnew, gnew));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, fnew, rnew, gnew)) = accepted else {
            if fresh {
                // steepest descent cannot make progress either
                converged = g.amax() < opts.grad_tol.sqrt();
                break;
            }
            h.fill_with_identity();
            fresh = true;
            continue;
        };

        let s = &xn - &x;
        let yv = &gnew - &g;
        let sy = s.dot(&yv);
        if sy > 1e-12 {
            if fresh {
                h *= sy / yv.dot(&yv);
            }
            let rho = 1.0 / sy;
            let hy = &h * &yv;
            let yhy = yv.dot(&hy);
            // H ← H - ρ(s yᵀH + H y sᵀ) + (ρ² yᵀHy + ρ) s sᵀ
            h -= (&s * hy.transpose() + &hy * s.transpose()) * rho;
            h += (&s * s.transpose()) * (rho * rho * yhy + rho);
            fresh = false;
        }
        let decrease = fx - fnew;
        x = xn;
        fx = fnew;
        raw = rnew;
        g = gnew;
        if decrease.abs() <= opts.value_tol * (1.0 + fx.abs()) {
            converged = true;
            break;
        }
    }

    Ok(Minimum {
        x: x.as_slice().to_vec(),
        value: raw,
        iterations,
        evaluations,
        converged,
    })
}
