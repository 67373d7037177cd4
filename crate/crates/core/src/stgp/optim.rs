//! Quasi-Newton (BFGS) minimisation with a backtracking Armijo line search.

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsSettings {
    pub max_iter: usize,
    /// Convergence when the gradient infinity norm drops below this.
    pub grad_tol: f64,
    /// Largest change of any coordinate in one step.
    pub max_step: f64,
}

impl Default for BfgsSettings {
    fn default() -> Self {
        Self {
            max_iter: 200,
            grad_tol: 1e-5,
            max_step: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

impl OptimResult {
    pub fn grad_norm(&self) -> f64 {
        inf_norm(&self.grad)
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimises `f`, which returns the value and gradient. An error at the
/// starting point is returned; errors at trial points count as `+∞`.
pub fn minimize<F>(mut f: F, x0: &[f64], settings: &BfgsSettings) -> Result<OptimResult>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut fx, mut g) = f(&x)?;
    let mut evaluations = 1;
    // Inverse Hessian approximation, row-major.
    let mut h = identity(n);
    let mut fresh = true;
    let mut iterations = 0;

    while iterations < settings.max_iter {
        if inf_norm(&g) < settings.grad_tol {
            break;
        }
        iterations += 1;
        let mut p: Vec<f64> = (0..n).map(|i| -dot(&h[i * n..(i + 1) * n], &g)).collect();
        let mut slope = dot(&p, &g);
        if !(slope < 0.0) {
            h = identity(n);
            fresh = true;
            p = g.iter().map(|v| -v).collect();
            slope = dot(&p, &g);
        }
        let mut alpha = 1.0f64.min(settings.max_step / inf_norm(&p).max(1e-300));
        if fresh {
            alpha = alpha.min(settings.max_step.min(1.0) / inf_norm(&p).max(1e-300));
        }

        let mut accepted = None;
        for _ in 0..60 {
            let xn: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + alpha * b).collect();
            evaluations += 1;
            match f(&xn) {
                Ok((fnew, gnew)) if fnew.is_finite() && gnew.iter().all(|v| v.is_finite()) => {
                    if fnew <= fx + 1e-4 * alpha * slope {
                        accepted = Some((xn, fnew, gnew));
                        break;
                    }
                    let denom = 2.0 * (fnew - fx - slope * alpha);
                    let trial = if denom > 0.0 { -slope * alpha * alpha / denom } else { 0.5 * alpha };
                    alpha = trial.clamp(0.1 * alpha, 0.5 * alpha);
                }
                _ => alpha *= 0.25,
            }
            if alpha * inf_norm(&p) < 1e-14 {
                break;
            }
        }

        let Some((xn, fnew, gnew)) = accepted else {
            if fresh {
                break;
            }
            h = identity(n);
            fresh = true;
            continue;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gnew.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if fresh {
                let scale = sy / dot(&y, &y);
                h = identity(n);
                h.iter_mut().for_each(|v| *v *= scale);
                fresh = false;
            }
            bfgs_update(&mut h, &s, &y, sy);
        }
        x = xn;
        fx = fnew;
        g = gnew;
    }
    Ok(OptimResult {
        converged: inf_norm(&g) < settings.grad_tol,
        x,
        f: fx,
        grad: g,
        iterations,
        evaluations,
    })
}

fn identity(n: usize) -> Vec<f64> {
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        h[i * n + i] = 1.0;
    }
    h
}

/// `H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ`.
fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| dot(&h[i * n..(i + 1) * n], y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}
