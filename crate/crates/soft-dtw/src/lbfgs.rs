//! Bounded-history quasi-Newton minimizer with backtracking line search.
//!
//! The search direction comes from the classic two-loop recursion over the
//! last `history` curvature pairs `(s, y)`, with the initial Hessian guess
//! scaled by `(s . y) / (y . y)`. Steps are accepted under the Armijo
//! sufficient-decrease rule starting from a unit step and halving. The
//! minimizer stops when the gradient's max norm falls under
//! `gradient_tolerance`, when the relative objective decrease falls under
//! [`RELATIVE_DECREASE_TOLERANCE`], when the line search stalls, or after
//! `max_iterations` rounds, and it always returns the best iterate seen.

use std::collections::VecDeque;

use ndarray::Array1;

use crate::error::{Error, Result};

/// Armijo sufficient-decrease constant.
const ARMIJO_C: f64 = 1e-4;

/// Maximum number of step halvings per line search.
const MAX_HALVINGS: u32 = 40;

/// Stop when an accepted step decreases the objective by less than this,
/// relative to `1 + |f|`.
pub const RELATIVE_DECREASE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub history_size: usize,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_iterations: 100,
            gradient_tolerance: 1e-6,
            history_size: 10,
            seed: 0,
        }
    }
}

#[derive(Debug)]
pub struct MinimizeOutcome {
    /// Iterate with the lowest accepted objective value.
    pub best_point: Array1<f64>,
    /// Objective values of the initial point and every accepted step, in
    /// order. Non-increasing by construction of the line search.
    pub trace: Vec<f64>,
}

/// Minimizes `f`, which must return the objective and its gradient.
/// The objective must be finite at `x0`.
pub fn minimize<F>(mut f: F, x0: Array1<f64>, config: &OptimizerConfig) -> Result<MinimizeOutcome>
where
    F: FnMut(&Array1<f64>) -> Result<(f64, Array1<f64>)>,
{
    let mut x = x0;
    let (mut fx, mut gx) = f(&x)?;
    if !fx.is_finite() {
        return Err(Error::NonFinite("objective at the initial point"));
    }
    let mut trace = vec![fx];
    let mut best = (fx, x.clone());
    let mut pairs: VecDeque<(Array1<f64>, Array1<f64>, f64)> = VecDeque::new();

    for _ in 0..config.max_iterations {
        let grad_norm = gx.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if grad_norm < config.gradient_tolerance {
            break;
        }

        let mut direction = two_loop_direction(&gx, &pairs);
        let mut slope = direction.dot(&gx);
        if slope >= 0.0 {
            direction = -gx.clone();
            slope = direction.dot(&gx);
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let candidate = &x + &(step * &direction);
            let (fc, gc) = f(&candidate)?;
            if fc.is_finite() && fc <= fx + ARMIJO_C * step * slope {
                accepted = Some((candidate, fc, gc));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new, g_new)) = accepted else {
            break;
        };

        let s = &x_new - &x;
        let y = &g_new - &gx;
        let sy = s.dot(&y);
        let curvature_scale = s.dot(&s).sqrt() * y.dot(&y).sqrt();
        if sy > 1e-12 * curvature_scale.max(f64::MIN_POSITIVE) {
            if pairs.len() == config.history_size {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        } else {
            // The backtracking search does not enforce a curvature
            // condition, so a step may land where s . y <= 0. Keeping the
            // now-inconsistent history produces vanishing directions;
            // restarting from a fresh steepest-descent step does not.
            pairs.clear();
        }

        let previous = fx;
        x = x_new;
        fx = f_new;
        gx = g_new;
        trace.push(fx);
        if fx < best.0 {
            best = (fx, x.clone());
        }
        if previous - fx <= RELATIVE_DECREASE_TOLERANCE * (1.0 + previous.abs()) {
            break;
        }
    }

    Ok(MinimizeOutcome {
        best_point: best.1,
        trace,
    })
}

fn two_loop_direction(
    gradient: &Array1<f64>,
    pairs: &VecDeque<(Array1<f64>, Array1<f64>, f64)>,
) -> Array1<f64> {
    let mut q = gradient.clone();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let alpha = rho * s.dot(&q);
        q.scaled_add(-alpha, y);
        alphas.push(alpha);
    }
    if let Some((s, y, _)) = pairs.back() {
        let scale = s.dot(y) / y.dot(y);
        q *= scale;
    }
    for ((s, y, rho), alpha) in pairs.iter().zip(alphas.iter().rev()) {
        let beta = rho * y.dot(&q);
        q.scaled_add(alpha - beta, s);
    }
    -q
}
