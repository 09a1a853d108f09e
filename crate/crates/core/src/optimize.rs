//! Limited-memory BFGS with a backtracking line search and an optional projection.

use std::collections::VecDeque;

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsParams {
    pub memory: usize,
    pub tol_grad: f64,
    pub max_iter: usize,
}

impl Default for LbfgsParams {
    fn default() -> Self {
        LbfgsParams { memory: 12, tol_grad: 1e-8, max_iter: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    /// Sup norm of the (projected) gradient at `x`.
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Line search could not decrease the objective any further.
    pub stalled: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sup(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Objective returning `f(x)` and writing `∇f(x)`; errors count as `+∞`.
pub trait Objective {
    fn eval(&mut self, x: &[f64], grad: &mut [f64]) -> Result<f64>;

    /// Maps `x` onto the feasible set; identity by default.
    fn project(&self, _x: &mut [f64]) {}

    /// Gradient with components that push against an active constraint removed.
    fn projected_grad(&self, _x: &[f64], grad: &[f64]) -> Vec<f64> {
        grad.to_vec()
    }
}

impl<F: FnMut(&[f64], &mut [f64]) -> Result<f64>> Objective for F {
    fn eval(&mut self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        self(x, grad)
    }
}

pub fn lbfgs<O: Objective>(obj: &mut O, x0: &[f64], params: &LbfgsParams) -> Result<LbfgsOutcome> {
    let n = x0.len();
    let mut x = x0.to_vec();
    obj.project(&mut x);
    let mut g = vec![0.0; n];
    let mut f = obj.eval(&x, &mut g)?;
    let mut pg = obj.projected_grad(&x, &g);
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut iter = 0;
    let mut stalled = false;
    let mut xn = vec![0.0; n];
    let mut gn = vec![0.0; n];
    while sup(&pg) > params.tol_grad && iter < params.max_iter {
        iter += 1;
        // two-loop recursion
        let mut q = pg.clone();
        let mut alpha = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alpha.push(a);
        }
        let gamma = match hist.back() {
            Some((s, y, _)) => dot(s, y) / dot(y, y),
            None => 1.0 / sup(&pg).max(1e-300).max(1.0),
        };
        q.iter_mut().for_each(|v| *v *= gamma);
        for ((s, y, rho), a) in hist.iter().zip(alpha.iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut d: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            hist.clear();
            d = pg.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
        }
        let noise = 1e-13 * (1.0 + f.abs());
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            for k in 0..n {
                xn[k] = x[k] + step * d[k];
            }
            obj.project(&mut xn);
            if let Ok(fv) = obj.eval(&xn, &mut gn) {
                if fv.is_finite() {
                    let armijo = fv <= f + 1e-4 * step * slope;
                    // in the round-off regime accept steps that reduce the directional derivative
                    let flat = fv <= f + noise && dot(&gn, &d).abs() <= 0.9 * slope.abs();
                    if armijo || flat {
                        accepted = Some(fv);
                        break;
                    }
                }
            }
            step *= 0.5;
        }
        let Some(fv) = accepted else {
            if hist.is_empty() {
                stalled = true;
                break;
            }
            hist.clear();
            continue;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-16 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() && sy > 0.0 {
            if hist.len() == params.memory {
                hist.pop_front();
            }
            hist.push_back((s, y, 1.0 / sy));
        }
        std::mem::swap(&mut x, &mut xn);
        std::mem::swap(&mut g, &mut gn);
        f = fv;
        pg = obj.projected_grad(&x, &g);
    }
    let grad_norm = sup(&pg);
    Ok(LbfgsOutcome { x, value: f, grad_norm, iterations: iter, converged: grad_norm <= params.tol_grad, stalled })
}
