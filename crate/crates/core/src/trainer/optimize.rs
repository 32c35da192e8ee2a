//! Minimizers for `F(x) = f(x) + Σ_k w_k |x_k|` with smooth `f`.
//!
//! [`owlqn`] is an orthant-wise limited-memory quasi-Newton method: it
//! builds an L-BFGS direction from the pseudo-gradient, keeps the step
//! inside the current orthant and projects crossings to exactly zero.
//! [`proximal_gradient`] is plain ISTA with backtracking.

use std::collections::VecDeque;

use super::objective::Objective;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimOptions {
    pub max_iterations: usize,
    /// Relative change of `F` counted as stalled.
    pub tolerance: f64,
    /// History length of the quasi-Newton approximation.
    pub memory: usize,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self { max_iterations: 500, tolerance: 1e-6, memory: 10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimOutcome {
    pub x: Vec<f64>,
    /// Regularized objective `F(x)`.
    pub value: f64,
    pub smooth_value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `F` after every accepted step, starting with the initial point.
    pub history: Vec<f64>,
}

fn l1(x: &[f64], w: &[f64]) -> f64 {
    x.iter().zip(w).map(|(a, b)| a.abs() * b).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn pseudo_gradient(x: &[f64], g: &[f64], w: &[f64], pg: &mut [f64]) {
    for k in 0..x.len() {
        pg[k] = if w[k] == 0.0 {
            g[k]
        } else if x[k] > 0.0 {
            g[k] + w[k]
        } else if x[k] < 0.0 {
            g[k] - w[k]
        } else if g[k] + w[k] < 0.0 {
            g[k] + w[k]
        } else if g[k] - w[k] > 0.0 {
            g[k] - w[k]
        } else {
            0.0
        };
    }
}

/// Stops after two consecutive small relative changes; flags a run of
/// increases as divergence.
struct Monitor {
    tolerance: f64,
    small: usize,
    increases: usize,
}

impl Monitor {
    fn new(tolerance: f64) -> Self {
        Self { tolerance, small: 0, increases: 0 }
    }

    fn accept(&mut self, old: f64, new: f64) -> Result<bool> {
        if new > old {
            self.increases += 1;
            if self.increases >= 10 {
                return Err(Error::Divergence(self.increases));
            }
        } else {
            self.increases = 0;
        }
        let rel = (old - new).abs() / old.abs().max(new.abs()).max(1e-12);
        if rel <= self.tolerance {
            self.small += 1;
        } else {
            self.small = 0;
        }
        Ok(self.small >= 2)
    }
}

pub fn owlqn(obj: &dyn Objective, x0: Vec<f64>, weights: &[f64], opts: OptimOptions) -> Result<OptimOutcome> {
    let dim = obj.dim();
    assert_eq!(x0.len(), dim);
    assert_eq!(weights.len(), dim);
    let mut x = x0;
    let mut g = vec![0.0; dim];
    let mut f = obj.value_and_gradient(&x, &mut g);
    let mut big_f = f + l1(&x, weights);
    let mut pg = vec![0.0; dim];
    pseudo_gradient(&x, &g, weights, &mut pg);

    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut history = vec![big_f];
    let mut monitor = Monitor::new(opts.tolerance);
    let mut converged = false;
    let mut iterations = 0;
    let (mut xn, mut gn) = (vec![0.0; dim], vec![0.0; dim]);
    let mut d = vec![0.0; dim];
    let mut alpha = vec![0.0; opts.memory];

    while iterations < opts.max_iterations {
        if pg.iter().all(|v| v.abs() < 1e-14) {
            converged = true;
            break;
        }
        // two-loop recursion on the pseudo-gradient
        d.copy_from_slice(&pg);
        for (m, (s, y, rho)) in hist.iter().enumerate().rev() {
            alpha[m] = rho * dot(s, &d);
            d.iter_mut().zip(y).for_each(|(q, yv)| *q -= alpha[m] * yv);
        }
        if let Some((s, y, _)) = hist.back() {
            let gamma = dot(s, y) / dot(y, y);
            d.iter_mut().for_each(|q| *q *= gamma);
        }
        for (m, (s, y, rho)) in hist.iter().enumerate() {
            let beta = rho * dot(y, &d);
            d.iter_mut().zip(s).for_each(|(r, sv)| *r += sv * (alpha[m] - beta));
        }
        d.iter_mut().for_each(|v| *v = -*v);
        // keep only components that descend along the pseudo-gradient
        for k in 0..dim {
            if d[k] * pg[k] >= 0.0 {
                d[k] = 0.0;
            }
        }
        if d.iter().all(|&v| v == 0.0) {
            d.iter_mut().zip(&pg).for_each(|(a, b)| *a = -b);
            hist.clear();
        }
        let orthant: Vec<f64> = (0..dim)
            .map(|k| if x[k] != 0.0 { x[k].signum() } else { -pg[k].signum() })
            .collect();

        let mut step = if hist.is_empty() { 1.0 / dot(&pg, &pg).sqrt().max(1.0) } else { 1.0 };
        let mut accepted = None;
        for _ in 0..60 {
            for k in 0..dim {
                let v = x[k] + step * d[k];
                xn[k] = if weights[k] > 0.0 && v * orthant[k] <= 0.0 { 0.0 } else { v };
            }
            let fv = obj.value_and_gradient(&xn, &mut gn);
            let big = fv + l1(&xn, weights);
            let decrease: f64 = (0..dim).map(|k| pg[k] * (xn[k] - x[k])).sum();
            if big <= big_f + 1e-4 * decrease {
                accepted = Some((fv, big));
                break;
            }
            step *= 0.5;
        }
        let Some((fv, big)) = accepted else {
            if hist.is_empty() {
                // no descent possible along the steepest pseudo-direction
                converged = true;
                break;
            }
            hist.clear();
            continue;
        };
        iterations += 1;

        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-16 {
            if hist.len() == opts.memory {
                hist.pop_front();
            }
            hist.push_back((s, y, 1.0 / sy));
        }
        std::mem::swap(&mut x, &mut xn);
        std::mem::swap(&mut g, &mut gn);
        let old = big_f;
        f = fv;
        big_f = big;
        history.push(big_f);
        pseudo_gradient(&x, &g, weights, &mut pg);
        if monitor.accept(old, big_f)? {
            converged = true;
            break;
        }
    }
    Ok(OptimOutcome { x, value: big_f, smooth_value: f, iterations, converged, history })
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

pub fn proximal_gradient(obj: &dyn Objective, x0: Vec<f64>, weights: &[f64], opts: OptimOptions) -> Result<OptimOutcome> {
    let dim = obj.dim();
    assert_eq!(x0.len(), dim);
    let mut x = x0;
    let mut g = vec![0.0; dim];
    let mut f = obj.value_and_gradient(&x, &mut g);
    let mut big_f = f + l1(&x, weights);
    let mut history = vec![big_f];
    let mut monitor = Monitor::new(opts.tolerance);
    let mut lipschitz = 1.0;
    let mut converged = false;
    let mut iterations = 0;
    let (mut xn, mut gn) = (vec![0.0; dim], vec![0.0; dim]);
    while iterations < opts.max_iterations {
        let mut accepted = None;
        for _ in 0..60 {
            for k in 0..dim {
                xn[k] = soft_threshold(x[k] - g[k] / lipschitz, weights[k] / lipschitz);
            }
            let fv = obj.value_and_gradient(&xn, &mut gn);
            let diff: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
            let bound = f + dot(&g, &diff) + 0.5 * lipschitz * dot(&diff, &diff);
            if fv <= bound + 1e-12 * f.abs() {
                accepted = Some(fv);
                break;
            }
            lipschitz *= 2.0;
        }
        let Some(fv) = accepted else {
            converged = true;
            break;
        };
        iterations += 1;
        std::mem::swap(&mut x, &mut xn);
        std::mem::swap(&mut g, &mut gn);
        let old = big_f;
        f = fv;
        big_f = f + l1(&x, weights);
        history.push(big_f);
        lipschitz = (lipschitz / 1.5).max(1e-8);
        if monitor.accept(old, big_f)? {
            converged = true;
            break;
        }
    }
    Ok(OptimOutcome { x, value: big_f, smooth_value: f, iterations, converged, history })
}
