//! Averaging a set of series under the soft alignment discrepancy.
//!
//! A barycenter of series `y_1 .. y_N` with weights `lambda_i` (normalized
//! to sum to one) is a minimizer over `x` of
//!
//! ```text
//! sum_i ( lambda_i / m_i ) * sdtw_gamma(x, y_i)
//! ```
//!
//! where `m_i` is the length of `y_i`. For positive `gamma` the objective is
//! differentiable and is minimized by the quasi-Newton routine in
//! [`crate::lbfgs`]. Two hard-minimum baselines operate at `gamma = 0`: an
//! alternating scheme that repeatedly re-aligns and averages aligned
//! columns, and plain subgradient descent with a decaying step.

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use crate::dp::{
    cost_matrix, optimal_path_backtrack, sdtw_batch, sdtw_batch_value_and_grad, sdtw_forward,
};
use crate::error::{Error, Result};
use crate::lbfgs::{minimize, MinimizeOutcome, OptimizerConfig};
use crate::seeding::stream_rng;
use crate::series::{Gamma, TimeSeries};

use rand::Rng;

/// The inputs of one averaging problem: the series, their normalized
/// weights, and the length the barycenter should have.
#[derive(Debug, Clone)]
pub struct BarycenterProblem {
    series: Vec<TimeSeries>,
    weights: Vec<f64>,
    target_length: usize,
}

impl BarycenterProblem {
    /// Validates the inputs and normalizes the weights to sum to one.
    /// Weights must be finite, nonnegative, and not all zero; all series
    /// must share one feature count.
    pub fn new(series: Vec<TimeSeries>, weights: Vec<f64>, target_length: usize) -> Result<Self> {
        if series.is_empty() {
            return Err(Error::EmptyInput("barycenter series"));
        }
        if target_length == 0 {
            return Err(Error::EmptyInput("barycenter target length"));
        }
        if weights.len() != series.len() {
            return Err(Error::InvalidConfig(format!(
                "{} weights for {} series",
                weights.len(),
                series.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidConfig(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidConfig("weights sum to zero".into()));
        }
        let p = series[0].num_features();
        if let Some(other) = series.iter().find(|s| s.num_features() != p) {
            return Err(Error::FeatureDimMismatch {
                x: p,
                y: other.num_features(),
            });
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(BarycenterProblem {
            series,
            weights,
            target_length,
        })
    }

    /// Equal weights on every series.
    pub fn uniform(series: Vec<TimeSeries>, target_length: usize) -> Result<Self> {
        let weights = vec![1.0; series.len()];
        BarycenterProblem::new(series, weights, target_length)
    }

    pub fn series(&self) -> &[TimeSeries] {
        &self.series
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn target_length(&self) -> usize {
        self.target_length
    }

    pub fn num_features(&self) -> usize {
        self.series[0].num_features()
    }

    fn check_candidate(&self, x: &TimeSeries) -> Result<()> {
        if x.num_features() != self.num_features() {
            return Err(Error::FeatureDimMismatch {
                x: x.num_features(),
                y: self.num_features(),
            });
        }
        Ok(())
    }

    /// Per-series coefficients `lambda_i / m_i`.
    fn coefficients(&self) -> Vec<f64> {
        self.series
            .iter()
            .zip(&self.weights)
            .map(|(s, w)| w / s.len() as f64)
            .collect()
    }
}

/// Outcome of one averaging run.
#[derive(Debug, Clone)]
pub struct BarycenterResult {
    pub barycenter: TimeSeries,
    /// Objective value of the initial point and of the incumbent after each
    /// accepted step; non-increasing for every method.
    pub trace: Vec<f64>,
    /// Set when the objective stopped being finite (subgradient descent
    /// with too large a step); the incumbent is still the best iterate seen.
    pub diverged: bool,
}

/// The weighted averaging objective at a candidate `x`.
pub fn barycenter_objective(
    x: &TimeSeries,
    problem: &BarycenterProblem,
    gamma: Gamma,
) -> Result<f64> {
    problem.check_candidate(x)?;
    let pairs: Vec<(&TimeSeries, &TimeSeries)> =
        problem.series.iter().map(|y| (x, y)).collect();
    let values = sdtw_batch(&pairs, gamma)?;
    Ok(weighted_total(&values, &problem.coefficients()))
}

/// Gradient of the averaging objective with respect to `x`. At `gamma = 0`
/// this is the subgradient induced by each pair's tie-broken optimal path.
pub fn barycenter_gradient(
    x: &TimeSeries,
    problem: &BarycenterProblem,
    gamma: Gamma,
) -> Result<Array2<f64>> {
    Ok(barycenter_value_and_grad(x, problem, gamma)?.1)
}

/// Objective and gradient in one pass over the series.
pub fn barycenter_value_and_grad(
    x: &TimeSeries,
    problem: &BarycenterProblem,
    gamma: Gamma,
) -> Result<(f64, Array2<f64>)> {
    problem.check_candidate(x)?;
    let pairs: Vec<(&TimeSeries, &TimeSeries)> =
        problem.series.iter().map(|y| (x, y)).collect();
    let per_series = sdtw_batch_value_and_grad(&pairs, gamma)?;
    let coefficients = problem.coefficients();
    let values: Vec<f64> = per_series.iter().map(|(v, _)| *v).collect();
    let value = weighted_total(&values, &coefficients);
    let mut grad = Array2::zeros((x.num_features(), x.len()));
    for ((_, g), c) in per_series.iter().zip(&coefficients) {
        grad.scaled_add(*c, g);
    }
    Ok((value, grad))
}

fn weighted_total(values: &[f64], coefficients: &[f64]) -> f64 {
    values
        .iter()
        .zip(coefficients)
        .map(|(v, c)| c * v)
        .sum()
}

/// Smoothed averaging: minimizes the objective at a fixed positive `gamma`
/// with the quasi-Newton routine, starting from `init`. Returns the best
/// iterate and the non-increasing trace of accepted objective values.
pub fn soft_barycenter(
    problem: &BarycenterProblem,
    gamma: Gamma,
    init: &TimeSeries,
    config: &OptimizerConfig,
) -> Result<BarycenterResult> {
    if gamma.is_zero() {
        return Err(Error::GammaContract {
            operation: "smoothed averaging",
            requirement: "> 0",
            got: 0.0,
        });
    }
    check_init(problem, init)?;
    let p = problem.num_features();
    let n = problem.target_length();
    let objective = |flat: &Array1<f64>| {
        let candidate = TimeSeries::new(unflatten(flat, p, n))?;
        let (value, grad) = barycenter_value_and_grad(&candidate, problem, gamma)?;
        Ok((value, flatten(&grad)))
    };
    let MinimizeOutcome { best_point, trace } =
        minimize(objective, flatten(init.values()), config)?;
    Ok(BarycenterResult {
        barycenter: TimeSeries::new(unflatten(&best_point, p, n))?,
        trace,
        diverged: false,
    })
}

/// Alternating hard-minimum averaging: aligns every series to the current
/// barycenter along its optimal path, replaces each barycenter column by
/// the weighted mean of the observations aligned to it, and repeats while
/// the hard objective keeps strictly decreasing.
pub fn dba_barycenter(
    problem: &BarycenterProblem,
    init: &TimeSeries,
    config: &OptimizerConfig,
) -> Result<BarycenterResult> {
    check_init(problem, init)?;
    let gamma = Gamma::zero();
    let p = problem.num_features();
    let n = problem.target_length();
    let coefficients = problem.coefficients();

    let mut x = init.clone();
    let mut objective = barycenter_objective(&x, problem, gamma)?;
    let mut trace = vec![objective];

    for _ in 0..config.max_iterations {
        let paths: Vec<_> = problem
            .series
            .par_iter()
            .map(|y| -> Result<_> {
                let delta = cost_matrix(&x, y)?;
                let table = sdtw_forward(&x, y, gamma)?;
                optimal_path_backtrack(&table, &delta)
            })
            .collect::<Result<_>>()?;

        let mut numerator = Array2::<f64>::zeros((p, n));
        let mut denominator = Array1::<f64>::zeros(n);
        for ((path, y), c) in paths.iter().zip(&problem.series).zip(&coefficients) {
            for &(i, j) in path.cells() {
                for f in 0..p {
                    numerator[[f, i]] += c * y.values()[[f, j]];
                }
                denominator[i] += c;
            }
        }
        // Every alignment path covers every barycenter column, so each
        // column receives some positively weighted mass.
        assert!(denominator.iter().all(|d| *d > 0.0));
        let mut updated = numerator;
        for t in 0..n {
            for f in 0..p {
                updated[[f, t]] /= denominator[t];
            }
        }
        let candidate = TimeSeries::new(updated)?;
        let candidate_objective = barycenter_objective(&candidate, problem, gamma)?;
        if candidate_objective < objective {
            x = candidate;
            objective = candidate_objective;
            trace.push(objective);
        } else {
            break;
        }
    }

    Ok(BarycenterResult {
        barycenter: x,
        trace,
        diverged: false,
    })
}

/// Subgradient descent on the hard objective with step `eta_0 / sqrt(t)`,
/// where `eta_0` is a tenth of the mean Frobenius norm of the inputs. The
/// trace records the incumbent (best-so-far) objective after every step;
/// a non-finite objective sets the divergence flag and stops the run.
pub fn subgradient_barycenter(
    problem: &BarycenterProblem,
    init: &TimeSeries,
    config: &OptimizerConfig,
) -> Result<BarycenterResult> {
    check_init(problem, init)?;
    let gamma = Gamma::zero();
    let eta0 = 0.1
        * problem
            .series
            .iter()
            .map(TimeSeries::frobenius_norm)
            .sum::<f64>()
        / problem.series.len() as f64;

    let mut x = init.values().clone();
    let initial = barycenter_objective(init, problem, gamma)?;
    let mut best_value = initial;
    let mut best = x.clone();
    let mut trace = vec![initial];
    let mut diverged = false;

    for t in 1..=config.max_iterations {
        let current = TimeSeries::new(x.clone())?;
        let grad = barycenter_gradient(&current, problem, gamma)?;
        x.scaled_add(-eta0 / (t as f64).sqrt(), &grad);
        if x.iter().any(|v| !v.is_finite()) {
            diverged = true;
            break;
        }
        let value = barycenter_objective(&TimeSeries::new(x.clone())?, problem, gamma)?;
        if !value.is_finite() {
            diverged = true;
            break;
        }
        if value < best_value {
            best_value = value;
            best = x.clone();
        }
        trace.push(best_value);
    }

    Ok(BarycenterResult {
        barycenter: TimeSeries::new(best)?,
        trace,
        diverged,
    })
}

/// Weighted columnwise mean of the inputs. Only defined when every series
/// already has the target length.
pub fn init_euclidean_mean(problem: &BarycenterProblem) -> Result<TimeSeries> {
    let n = problem.target_length();
    if problem.series.iter().any(|s| s.len() != n) {
        return Err(Error::UnequalLengths("the columnwise-mean initializer"));
    }
    let mut mean = Array2::zeros((problem.num_features(), n));
    for (y, w) in problem.series.iter().zip(&problem.weights) {
        mean.scaled_add(*w, y.values());
    }
    TimeSeries::new(mean)
}

/// One input series chosen uniformly at random, resampled to the target
/// length. When lengths already match, the chosen member is returned
/// exactly.
pub fn init_random(problem: &BarycenterProblem, seed: u64) -> Result<TimeSeries> {
    let mut rng = stream_rng(seed, "barycenter-init");
    let index = rng.gen_range(0..problem.series.len());
    problem.series[index].resampled(problem.target_length())
}

fn check_init(problem: &BarycenterProblem, init: &TimeSeries) -> Result<()> {
    problem.check_candidate(init)?;
    if init.len() != problem.target_length() {
        return Err(Error::InvalidConfig(format!(
            "initial barycenter has length {}, expected {}",
            init.len(),
            problem.target_length()
        )));
    }
    Ok(())
}

fn flatten(a: &Array2<f64>) -> Array1<f64> {
    Array1::from_iter(a.iter().copied())
}

fn unflatten(v: &Array1<f64>, p: usize, n: usize) -> Array2<f64> {
    Array2::from_shape_vec((p, n), v.to_vec()).expect("flat length is p * n")
}
