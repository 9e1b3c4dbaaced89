//! Soft dynamic time warping: the smoothed discrepancy, its exact gradient,
//! and the hard-minimum special case.
//!
//! For series `x` (length `n`) and `y` (length `m`) with pairwise squared
//! Euclidean costs `delta[i][j]`, the discrepancy is a soft minimum over all
//! monotone alignments of the total aligned cost,
//!
//! ```text
//! softmin_gamma { a_1, .., a_k } = -gamma * log( sum_i exp(-a_i / gamma) )
//! ```
//!
//! computed in quadratic time by the recursion
//!
//! ```text
//! r[i][j] = delta[i][j] + softmin_gamma { r[i-1][j-1], r[i-1][j], r[i][j-1] }
//! ```
//!
//! with `r[0][0] = 0` and infinite borders. At `gamma = 0` the soft minimum
//! collapses to the hard minimum and `r[n][m]` is the classic alignment
//! distance. The gradient with respect to the costs is the matrix `E` of
//! expected alignments under the Gibbs distribution over paths, obtained by
//! a single backward sweep over the stored forward table; chaining it
//! through the cost Jacobian gives the gradient with respect to `x` itself.
//!
//! Every soft minimum is evaluated through one max-shifted log-sum-exp, so
//! values stay finite for any positive `gamma` and any finite costs. The
//! backward sweep evaluates `exp` of quantities that are nonpositive up to
//! rounding; arguments below `-745` underflow to zero and are clamped there
//! deliberately.

use ndarray::{s, Array2, ArrayView1, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::series::{Gamma, TimeSeries};

/// Below this, `exp` underflows to zero in `f64`; the backward sweep treats
/// such transition weights as exactly zero.
const EXP_UNDERFLOW_CUTOFF: f64 = -745.0;

/// Soft minimum of a list of values, each finite or `+inf`.
///
/// At `gamma = 0` this is the hard minimum. For positive `gamma` the result
/// is computed by a max-shifted log-sum-exp and lies within
/// `gamma * ln(k)` below the hard minimum of `k` values. All entries `+inf`
/// yields `+inf`; an empty list is a domain error.
pub fn soft_min(values: &[f64], gamma: Gamma) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("soft minimum"));
    }
    if gamma.is_zero() {
        return Ok(values.iter().copied().fold(f64::INFINITY, f64::min));
    }
    let g = gamma.value();
    let max_z = values
        .iter()
        .map(|&v| -v / g)
        .fold(f64::NEG_INFINITY, f64::max);
    if max_z == f64::NEG_INFINITY {
        return Ok(f64::INFINITY);
    }
    let sum: f64 = values.iter().map(|&v| (-v / g - max_z).exp()).sum();
    Ok(-g * (max_z + sum.ln()))
}

/// Three-way soft minimum used in the inner loop, with the same shift-based
/// stabilization as [`soft_min`] and a fixed argument order so that every
/// code path producing forward values sums in the same order.
fn softmin3(gamma: f64, diag: f64, up: f64, left: f64) -> f64 {
    if gamma == 0.0 {
        return diag.min(up).min(left);
    }
    let (zd, zu, zl) = (-diag / gamma, -up / gamma, -left / gamma);
    let max_z = zd.max(zu).max(zl);
    if max_z == f64::NEG_INFINITY {
        return f64::INFINITY;
    }
    let sum = (zd - max_z).exp() + (zu - max_z).exp() + (zl - max_z).exp();
    -gamma * (max_z + sum.ln())
}

/// Squared Euclidean distance between two observation vectors.
pub fn squared_euclidean_cost(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::FeatureDimMismatch {
            x: a.len(),
            y: b.len(),
        });
    }
    Ok(a.iter().zip(b.iter()).map(|(u, v)| (u - v) * (u - v)).sum())
}

/// Pairwise cost matrix between two series: `delta[i][j]` is the squared
/// Euclidean distance between observation `i` of `x` and observation `j`
/// of `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    delta: Array2<f64>,
}

impl CostMatrix {
    pub fn values(&self) -> &Array2<f64> {
        &self.delta
    }

    pub fn dim(&self) -> (usize, usize) {
        self.delta.dim()
    }
}

pub fn cost_matrix(x: &TimeSeries, y: &TimeSeries) -> Result<CostMatrix> {
    if x.num_features() != y.num_features() {
        return Err(Error::FeatureDimMismatch {
            x: x.num_features(),
            y: y.num_features(),
        });
    }
    let (n, m) = (x.len(), y.len());
    let mut delta = Array2::zeros((n, m));
    for i in 0..n {
        for j in 0..m {
            let mut acc = 0.0;
            for f in 0..x.num_features() {
                let d = x.values()[[f, i]] - y.values()[[f, j]];
                acc += d * d;
            }
            delta[[i, j]] = acc;
        }
    }
    Ok(CostMatrix { delta })
}

/// The full `(n+1) x (m+1)` table of intermediate forward values. Row and
/// column zero hold the infinite border (except `r[0][0] = 0`); the
/// discrepancy itself sits in the bottom-right corner. The table is retained
/// because the backward sweep re-reads all of it.
#[derive(Debug, Clone)]
pub struct ForwardTable {
    r: Array2<f64>,
    gamma: Gamma,
}

impl ForwardTable {
    /// The discrepancy `r[n][m]`.
    pub fn value(&self) -> f64 {
        let (rows, cols) = self.r.dim();
        self.r[[rows - 1, cols - 1]]
    }

    pub fn gamma(&self) -> Gamma {
        self.gamma
    }

    /// Lengths `(n, m)` of the aligned pair.
    pub fn seq_lengths(&self) -> (usize, usize) {
        let (rows, cols) = self.r.dim();
        (rows - 1, cols - 1)
    }

    pub fn table(&self) -> &Array2<f64> {
        &self.r
    }
}

fn forward_from_costs(delta: &CostMatrix, gamma: Gamma) -> ForwardTable {
    let (n, m) = delta.dim();
    let g = gamma.value();
    let mut r = Array2::from_elem((n + 1, m + 1), f64::INFINITY);
    r[[0, 0]] = 0.0;
    for i in 1..=n {
        for j in 1..=m {
            r[[i, j]] = delta.values()[[i - 1, j - 1]]
                + softmin3(g, r[[i - 1, j - 1]], r[[i - 1, j]], r[[i, j - 1]]);
        }
    }
    ForwardTable { r, gamma }
}

/// Forward recursion: computes the discrepancy and keeps the whole table of
/// intermediate values for use by [`sdtw_backward`] or
/// [`optimal_path_backtrack`]. Works for any `gamma >= 0`.
pub fn sdtw_forward(x: &TimeSeries, y: &TimeSeries, gamma: Gamma) -> Result<ForwardTable> {
    let delta = cost_matrix(x, y)?;
    Ok(forward_from_costs(&delta, gamma))
}

/// Discrepancy value only, without materializing the table. Keeps two
/// columns of state, so memory is linear in `n` instead of quadratic.
/// Returns exactly the same floating-point value as
/// [`sdtw_forward`]`(..).value()`: both run the identical soft-minimum with
/// identically ordered arguments.
pub fn sdtw_value(x: &TimeSeries, y: &TimeSeries, gamma: Gamma) -> Result<f64> {
    if x.num_features() != y.num_features() {
        return Err(Error::FeatureDimMismatch {
            x: x.num_features(),
            y: y.num_features(),
        });
    }
    let (n, m) = (x.len(), y.len());
    let p = x.num_features();
    let g = gamma.value();
    let mut prev = vec![f64::INFINITY; n + 1];
    let mut cur = vec![f64::INFINITY; n + 1];
    prev[0] = 0.0;
    for j in 1..=m {
        cur[0] = f64::INFINITY;
        for i in 1..=n {
            let mut delta = 0.0;
            for f in 0..p {
                let d = x.values()[[f, i - 1]] - y.values()[[f, j - 1]];
                delta += d * d;
            }
            cur[i] = delta + softmin3(g, prev[i - 1], cur[i - 1], prev[i]);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[n])
}

/// Gradient of the discrepancy with respect to the cost matrix: the average
/// alignment matrix `E`, whose entry `(i, j)` is the Gibbs probability that
/// an alignment passes through cell `(i, j)`. Corners are exactly one, all
/// entries lie in `(0, 1]`, and the total sits between `max(n, m)` and
/// `n + m - 1`.
#[derive(Debug, Clone)]
pub struct AlignmentGradient {
    e: Array2<f64>,
}

impl AlignmentGradient {
    pub fn matrix(&self) -> &Array2<f64> {
        &self.e
    }

    pub fn into_matrix(self) -> Array2<f64> {
        self.e
    }
}

fn transition_weight(arg: f64) -> f64 {
    if arg < EXP_UNDERFLOW_CUTOFF {
        0.0
    } else {
        arg.exp()
    }
}

/// Backward sweep over a stored forward table. Requires positive `gamma`
/// matching the table's, and the cost matrix of the same pair the table was
/// built from.
pub fn sdtw_backward(
    table: &ForwardTable,
    delta: &CostMatrix,
    gamma: Gamma,
) -> Result<AlignmentGradient> {
    if gamma.is_zero() {
        return Err(Error::GammaContract {
            operation: "backward sweep",
            requirement: "> 0",
            got: 0.0,
        });
    }
    if table.gamma() != gamma {
        return Err(Error::GammaContract {
            operation: "backward sweep",
            requirement: "matching the forward table",
            got: gamma.value(),
        });
    }
    let (n, m) = table.seq_lengths();
    if delta.dim() != (n, m) {
        return Err(Error::ShapeMismatch {
            what: "cost matrix for backward sweep",
            expected: (n, m),
            got: delta.dim(),
        });
    }
    let g = gamma.value();
    let r = table.table();

    // One ring of padding on each side: a phantom final cell (n+1, m+1)
    // carries the output weight 1, zero-cost edges let mass flow into it,
    // and -inf forward values seal the rest of the border.
    let mut r_pad = Array2::from_elem((n + 2, m + 2), f64::NEG_INFINITY);
    r_pad.slice_mut(s![1..=n, 1..=m]).assign(&r.slice(s![1.., 1..]));
    r_pad[[n + 1, m + 1]] = r[[n, m]];
    let mut d_pad = Array2::zeros((n + 2, m + 2));
    d_pad
        .slice_mut(s![1..=n, 1..=m])
        .assign(delta.values());
    let mut e = Array2::zeros((n + 2, m + 2));
    e[[n + 1, m + 1]] = 1.0;

    for j in (1..=m).rev() {
        for i in (1..=n).rev() {
            let base = r_pad[[i, j]];
            let down = transition_weight((r_pad[[i + 1, j]] - base - d_pad[[i + 1, j]]) / g);
            let right = transition_weight((r_pad[[i, j + 1]] - base - d_pad[[i, j + 1]]) / g);
            let diag = transition_weight((r_pad[[i + 1, j + 1]] - base - d_pad[[i + 1, j + 1]]) / g);
            e[[i, j]] = e[[i + 1, j]] * down + e[[i, j + 1]] * right + e[[i + 1, j + 1]] * diag;
        }
    }
    Ok(AlignmentGradient {
        e: e.slice(s![1..=n, 1..=m]).to_owned(),
    })
}

/// A single monotone alignment path through an `n x m` grid, stored as the
/// visited cells in order from `(0, 0)` to `(n - 1, m - 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentPath {
    cells: Vec<(usize, usize)>,
    n: usize,
    m: usize,
}

impl AlignmentPath {
    pub fn cells(&self) -> &[(usize, usize)] {
        &self.cells
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n, self.m)
    }

    /// Dense 0/1 matrix with ones on the path.
    pub fn to_matrix(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.n, self.m));
        for &(i, j) in &self.cells {
            a[[i, j]] = 1.0;
        }
        a
    }
}

/// Recovers an optimal alignment from a hard-minimum (`gamma = 0`) forward
/// table. At each cell the predecessor with the smallest stored value wins;
/// ties prefer the diagonal, then the step from above, then the step from
/// the left. Only stored table values are compared, never re-derived
/// arithmetic, so the selection is exact. Summing the pair's costs along the
/// returned path in order reproduces the table's value bit for bit.
pub fn optimal_path_backtrack(table: &ForwardTable, delta: &CostMatrix) -> Result<AlignmentPath> {
    if !table.gamma().is_zero() {
        return Err(Error::GammaContract {
            operation: "path backtracking",
            requirement: "= 0",
            got: table.gamma().value(),
        });
    }
    let (n, m) = table.seq_lengths();
    if delta.dim() != (n, m) {
        return Err(Error::ShapeMismatch {
            what: "cost matrix for path backtracking",
            expected: (n, m),
            got: delta.dim(),
        });
    }
    let r = table.table();
    let mut cells = vec![(n - 1, m - 1)];
    let (mut i, mut j) = (n, m);
    while (i, j) != (1, 1) {
        let diag = r[[i - 1, j - 1]];
        let up = r[[i - 1, j]];
        let left = r[[i, j - 1]];
        let best = diag.min(up).min(left);
        if diag == best {
            i -= 1;
            j -= 1;
        } else if up == best {
            i -= 1;
        } else {
            j -= 1;
        }
        cells.push((i - 1, j - 1));
    }
    cells.reverse();
    Ok(AlignmentPath { cells, n, m })
}

/// Applies the transpose of the cost-matrix Jacobian to a weight matrix
/// `b` (shape `n x m`): the result is the `p x n` matrix
///
/// ```text
/// 2 * ( x .* rowsums(b)  -  y b^T )
/// ```
///
/// where `rowsums(b)` broadcasts over features. With `b = E` this is the
/// gradient of the discrepancy with respect to `x`; with `b` a single
/// alignment matrix it is the corresponding subgradient.
pub fn jacobian_apply(x: &TimeSeries, y: &TimeSeries, b: &Array2<f64>) -> Result<Array2<f64>> {
    if x.num_features() != y.num_features() {
        return Err(Error::FeatureDimMismatch {
            x: x.num_features(),
            y: y.num_features(),
        });
    }
    if b.dim() != (x.len(), y.len()) {
        return Err(Error::ShapeMismatch {
            what: "weight matrix for the cost Jacobian",
            expected: (x.len(), y.len()),
            got: b.dim(),
        });
    }
    let row_sums = b.sum_axis(Axis(1));
    let weighted = x.values() * &row_sums;
    let cross = y.values().dot(&b.t());
    Ok(2.0 * (weighted - cross))
}

/// Discrepancy and its gradient with respect to `x`, as one call.
///
/// For positive `gamma` the gradient is exact: a forward pass, a backward
/// sweep, and one Jacobian product. At `gamma = 0` the value is the hard
/// alignment distance and the returned matrix is the subgradient induced by
/// the tie-broken optimal path from [`optimal_path_backtrack`].
pub fn sdtw_value_and_grad(
    x: &TimeSeries,
    y: &TimeSeries,
    gamma: Gamma,
) -> Result<(f64, Array2<f64>)> {
    let delta = cost_matrix(x, y)?;
    let table = forward_from_costs(&delta, gamma);
    let weights = if gamma.is_zero() {
        optimal_path_backtrack(&table, &delta)?.to_matrix()
    } else {
        sdtw_backward(&table, &delta, gamma)?.into_matrix()
    };
    let grad = jacobian_apply(x, y, &weights)?;
    Ok((table.value(), grad))
}

/// Discrepancies for many pairs at once, computed in parallel. Results are
/// in input order and identical to calling [`sdtw_value`] sequentially.
pub fn sdtw_batch(pairs: &[(&TimeSeries, &TimeSeries)], gamma: Gamma) -> Result<Vec<f64>> {
    pairs
        .par_iter()
        .map(|(x, y)| sdtw_value(x, y, gamma))
        .collect()
}

/// Values and gradients for many pairs at once, in parallel, in input order.
pub fn sdtw_batch_value_and_grad(
    pairs: &[(&TimeSeries, &TimeSeries)],
    gamma: Gamma,
) -> Result<Vec<(f64, Array2<f64>)>> {
    pairs
        .par_iter()
        .map(|(x, y)| sdtw_value_and_grad(x, y, gamma))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uni(values: &[f64]) -> TimeSeries {
        TimeSeries::univariate(values.to_vec()).unwrap()
    }

    fn gamma(g: f64) -> Gamma {
        Gamma::new(g).unwrap()
    }

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!(
            (a - b).abs() <= tol,
            "expected {a} and {b} to differ by at most {tol}"
        );
    }

    fn random_series(rng: &mut ChaCha8Rng, p: usize, n: usize, scale: f64) -> TimeSeries {
        let data: Vec<f64> = (0..p * n).map(|_| rng.gen_range(-scale..scale)).collect();
        TimeSeries::new(Array2::from_shape_vec((p, n), data).unwrap()).unwrap()
    }

    #[test]
    fn soft_min_examples() {
        assert_eq!(soft_min(&[3.0, 1.0, 2.0], Gamma::zero()).unwrap(), 1.0);
        assert_close(
            soft_min(&[0.0, 0.0], gamma(1.0)).unwrap(),
            -std::f64::consts::LN_2,
            1e-15,
        );
        assert_eq!(soft_min(&[5.0], gamma(1.0)).unwrap(), 5.0);
    }

    #[test]
    fn soft_min_edge_cases() {
        assert!(matches!(
            soft_min(&[], gamma(1.0)),
            Err(Error::EmptyInput(_))
        ));
        assert_eq!(
            soft_min(&[f64::INFINITY, f64::INFINITY], gamma(1.0)).unwrap(),
            f64::INFINITY
        );
        assert_eq!(
            soft_min(&[f64::INFINITY], Gamma::zero()).unwrap(),
            f64::INFINITY
        );
        let huge = soft_min(&[1e300, 1e300], gamma(0.001)).unwrap();
        assert!(huge.is_finite());
    }

    #[test]
    fn squared_euclidean_cost_examples() {
        let a = array![1.0, 2.0];
        let b = array![3.0, 5.0];
        assert_eq!(squared_euclidean_cost(a.view(), b.view()).unwrap(), 13.0);
        let c = array![1.0];
        assert!(matches!(
            squared_euclidean_cost(a.view(), c.view()),
            Err(Error::FeatureDimMismatch { .. })
        ));
    }

    #[test]
    fn cost_matrix_contents() {
        let x = uni(&[0.0, 1.0]);
        let y = uni(&[2.0, 0.0, -1.0]);
        let delta = cost_matrix(&x, &y).unwrap();
        assert_eq!(delta.values(), &array![[4.0, 0.0, 1.0], [1.0, 1.0, 4.0]]);
    }

    #[test]
    fn forward_on_the_zero_pair_hits_the_closed_form() {
        let x = uni(&[0.0, 0.0]);
        let y = uni(&[0.0, 0.0]);
        let table = sdtw_forward(&x, &y, gamma(1.0)).unwrap();
        assert_close(table.value(), -(3.0f64.ln()), 1e-12);
    }

    #[test]
    fn forward_single_cell_is_just_the_cost() {
        let x = uni(&[0.0]);
        let y = uni(&[1.0]);
        for g in [0.0, 0.5, 1.0, 10.0] {
            let table = sdtw_forward(&x, &y, gamma(g)).unwrap();
            assert_eq!(table.value(), 1.0);
        }
    }

    #[test]
    fn forward_agrees_with_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..40 {
            let p = if rng.gen_bool(0.5) { 1 } else { 3 };
            let n = rng.gen_range(1..=5);
            let m = rng.gen_range(1..=5);
            let x = random_series(&mut rng, p, n, 2.0);
            let y = random_series(&mut rng, p, m, 2.0);
            for g in [0.0, 0.1, 1.0, 10.0] {
                let fast = sdtw_forward(&x, &y, gamma(g)).unwrap().value();
                let slow = oracle::brute_force_sdtw(&x, &y, gamma(g)).unwrap();
                let tol = 1e-10 * fast.abs().max(slow.abs()).max(1.0);
                assert_close(fast, slow, tol);
            }
        }
    }

    #[test]
    fn value_only_path_is_bit_identical_to_the_full_table() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..30 {
            let p = rng.gen_range(1..=3);
            let n = rng.gen_range(1..=12);
            let m = rng.gen_range(1..=12);
            let x = random_series(&mut rng, p, n, 3.0);
            let y = random_series(&mut rng, p, m, 3.0);
            for g in [0.0, 0.01, 1.0, 100.0] {
                let full = sdtw_forward(&x, &y, gamma(g)).unwrap().value();
                let streamed = sdtw_value(&x, &y, gamma(g)).unwrap();
                assert_eq!(full.to_bits(), streamed.to_bits());
            }
        }
    }

    #[test]
    fn backward_on_the_zero_pair_matches_the_closed_form() {
        let x = uni(&[0.0, 0.0]);
        let y = uni(&[0.0, 0.0]);
        let g = gamma(1.0);
        let delta = cost_matrix(&x, &y).unwrap();
        let table = sdtw_forward(&x, &y, g).unwrap();
        let e = sdtw_backward(&table, &delta, g).unwrap();
        let third = 1.0 / 3.0;
        assert_close(e.matrix()[[0, 0]], 1.0, 1e-14);
        assert_close(e.matrix()[[0, 1]], third, 1e-14);
        assert_close(e.matrix()[[1, 0]], third, 1e-14);
        assert_close(e.matrix()[[1, 1]], 1.0, 1e-14);
    }

    #[test]
    fn backward_requires_positive_matching_gamma() {
        let x = uni(&[0.0, 1.0]);
        let y = uni(&[1.0, 2.0]);
        let delta = cost_matrix(&x, &y).unwrap();
        let table = sdtw_forward(&x, &y, Gamma::zero()).unwrap();
        assert!(matches!(
            sdtw_backward(&table, &delta, Gamma::zero()),
            Err(Error::GammaContract { .. })
        ));
        let table = sdtw_forward(&x, &y, gamma(1.0)).unwrap();
        assert!(matches!(
            sdtw_backward(&table, &delta, gamma(2.0)),
            Err(Error::GammaContract { .. })
        ));
    }

    #[test]
    fn three_routes_to_the_average_alignment_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..25 {
            let p = rng.gen_range(1..=2);
            let n = rng.gen_range(1..=5);
            let m = rng.gen_range(1..=5);
            let x = random_series(&mut rng, p, n, 1.5);
            let y = random_series(&mut rng, p, m, 1.5);
            for g in [0.1, 1.0, 10.0] {
                let gm = gamma(g);
                let delta = cost_matrix(&x, &y).unwrap();
                let table = sdtw_forward(&x, &y, gm).unwrap();
                let backward = sdtw_backward(&table, &delta, gm).unwrap();
                let enumerated = oracle::brute_force_expected_alignment(&x, &y, gm).unwrap();
                let quartic = oracle::average_alignment_forward(&x, &y, gm).unwrap();
                for i in 0..n {
                    for j in 0..m {
                        assert_close(backward.matrix()[[i, j]], enumerated[[i, j]], 1e-12);
                        assert_close(backward.matrix()[[i, j]], quartic[[i, j]], 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn backtrack_recovers_the_textbook_path() {
        let x = uni(&[1.0, 2.0, 3.0]);
        let y = uni(&[1.0, 2.0, 2.0, 3.0]);
        let delta = cost_matrix(&x, &y).unwrap();
        let table = sdtw_forward(&x, &y, Gamma::zero()).unwrap();
        assert_eq!(table.value(), 0.0);
        let path = optimal_path_backtrack(&table, &delta).unwrap();
        assert_eq!(path.cells(), &[(0, 0), (1, 1), (1, 2), (2, 3)]);
    }

    #[test]
    fn backtrack_rejects_smoothed_tables() {
        let x = uni(&[1.0, 2.0]);
        let y = uni(&[1.0, 2.0]);
        let delta = cost_matrix(&x, &y).unwrap();
        let table = sdtw_forward(&x, &y, gamma(1.0)).unwrap();
        assert!(matches!(
            optimal_path_backtrack(&table, &delta),
            Err(Error::GammaContract { .. })
        ));
    }

    #[test]
    fn path_cost_replays_the_forward_value_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..50 {
            let p = rng.gen_range(1..=3);
            let n = rng.gen_range(1..=10);
            let m = rng.gen_range(1..=10);
            let x = random_series(&mut rng, p, n, 4.0);
            let y = random_series(&mut rng, p, m, 4.0);
            let delta = cost_matrix(&x, &y).unwrap();
            let table = sdtw_forward(&x, &y, Gamma::zero()).unwrap();
            let path = optimal_path_backtrack(&table, &delta).unwrap();
            let mut replayed = 0.0;
            for &(i, j) in path.cells() {
                replayed += delta.values()[[i, j]];
            }
            assert_eq!(replayed.to_bits(), table.value().to_bits());
        }
    }

    #[test]
    fn jacobian_on_the_single_cell_example() {
        let x = uni(&[0.0]);
        let y = uni(&[1.0]);
        let b = array![[1.0]];
        let grad = jacobian_apply(&x, &y, &b).unwrap();
        assert_eq!(grad, array![[-2.0]]);
    }

    #[test]
    fn jacobian_rejects_bad_shapes() {
        let x = uni(&[0.0, 1.0]);
        let y = uni(&[1.0]);
        assert!(matches!(
            jacobian_apply(&x, &y, &Array2::zeros((1, 2))),
            Err(Error::ShapeMismatch { .. })
        ));
        let z = TimeSeries::new(Array2::zeros((2, 3))).unwrap();
        assert!(matches!(
            jacobian_apply(&x, &z, &Array2::zeros((2, 3))),
            Err(Error::FeatureDimMismatch { .. })
        ));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..10 {
            let p = rng.gen_range(1..=2);
            let n = rng.gen_range(2..=6);
            let m = rng.gen_range(2..=6);
            let x = random_series(&mut rng, p, n, 1.5);
            let y = random_series(&mut rng, p, m, 1.5);
            for g in [0.1, 1.0] {
                let gm = gamma(g);
                let (_, grad) = sdtw_value_and_grad(&x, &y, gm).unwrap();
                let step = 1e-5;
                let mut max_err: f64 = 0.0;
                let mut max_mag: f64 = 0.0;
                for f in 0..p {
                    for t in 0..n {
                        let mut plus = x.values().clone();
                        plus[[f, t]] += step;
                        let mut minus = x.values().clone();
                        minus[[f, t]] -= step;
                        let vp = sdtw_value(&TimeSeries::new(plus).unwrap(), &y, gm).unwrap();
                        let vm = sdtw_value(&TimeSeries::new(minus).unwrap(), &y, gm).unwrap();
                        let fd = (vp - vm) / (2.0 * step);
                        max_err = max_err.max((fd - grad[[f, t]]).abs());
                        max_mag = max_mag.max(grad[[f, t]].abs());
                    }
                }
                assert!(
                    max_err <= 1e-6 * max_mag.max(1.0),
                    "finite differences disagree: err {max_err}, scale {max_mag}"
                );
            }
        }
    }

    #[test]
    fn hard_minimum_gradient_is_the_path_subgradient() {
        let x = uni(&[1.0, 2.0, 3.0]);
        let y = uni(&[1.0, 2.0, 2.0, 3.0]);
        let (value, grad) = sdtw_value_and_grad(&x, &y, Gamma::zero()).unwrap();
        assert_eq!(value, 0.0);
        let delta = cost_matrix(&x, &y).unwrap();
        let table = sdtw_forward(&x, &y, Gamma::zero()).unwrap();
        let path = optimal_path_backtrack(&table, &delta).unwrap();
        let expected = jacobian_apply(&x, &y, &path.to_matrix()).unwrap();
        assert_eq!(grad, expected);
    }

    #[test]
    fn batch_matches_sequential_results_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let series: Vec<TimeSeries> = (0..12)
            .map(|_| {
                let n = rng.gen_range(2..=9);
                random_series(&mut rng, 2, n, 2.0)
            })
            .collect();
        let pairs: Vec<(&TimeSeries, &TimeSeries)> =
            series.iter().zip(series.iter().rev()).collect();
        let g = gamma(0.7);
        let batched = sdtw_batch(&pairs, g).unwrap();
        for (k, (x, y)) in pairs.iter().enumerate() {
            assert_eq!(batched[k].to_bits(), sdtw_value(x, y, g).unwrap().to_bits());
        }
        let with_grads = sdtw_batch_value_and_grad(&pairs, g).unwrap();
        for (k, (x, y)) in pairs.iter().enumerate() {
            let (v, grad) = sdtw_value_and_grad(x, y, g).unwrap();
            assert_eq!(with_grads[k].0.to_bits(), v.to_bits());
            assert_eq!(with_grads[k].1, grad);
        }
    }

    // Sampled, not exhaustive: the 2/gamma modulus is a small-amplitude
    // statement, so the draws stay within [-0.5, 0.5]. Wider data ranges
    // inflate the cost Jacobian and genuinely break the constant.
    #[test]
    fn gradient_differences_stay_within_the_smoothness_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut worst: f64 = 0.0;
        for g in [0.05, 0.1] {
            let gm = gamma(g);
            for _ in 0..200 {
                let n = rng.gen_range(3..=6);
                let x1 = random_series(&mut rng, 1, n, 0.5);
                let y = random_series(&mut rng, 1, n, 0.5);
                let mut shifted = x1.values().clone();
                for v in shifted.iter_mut() {
                    *v += rng.gen_range(-1e-3..1e-3);
                }
                let x2 = TimeSeries::new(shifted).unwrap();
                let (_, g1) = sdtw_value_and_grad(&x1, &y, gm).unwrap();
                let (_, g2) = sdtw_value_and_grad(&x2, &y, gm).unwrap();
                let grad_diff = (&g1 - &g2).iter().map(|v| v * v).sum::<f64>().sqrt();
                let x_diff = (x1.values() - x2.values())
                    .iter()
                    .map(|v| v * v)
                    .sum::<f64>()
                    .sqrt();
                assert!(
                    grad_diff <= (2.0 / g) * x_diff + 1e-12,
                    "gradient moved {grad_diff} for an input move of {x_diff} at gamma {g}"
                );
                worst = worst.max(grad_diff / ((2.0 / g) * x_diff));
            }
        }
        assert!(worst > 0.0);
    }

    proptest! {
        #[test]
        fn discrepancy_is_symmetric(
            xs in proptest::collection::vec(-5.0f64..5.0, 1..8),
            ys in proptest::collection::vec(-5.0f64..5.0, 1..8),
            g in 0.0f64..5.0,
        ) {
            let x = uni(&xs);
            let y = uni(&ys);
            let forward = sdtw_value(&x, &y, gamma(g)).unwrap();
            let reverse = sdtw_value(&y, &x, gamma(g)).unwrap();
            prop_assert!((forward - reverse).abs() <= 1e-9 * forward.abs().max(1.0));
        }

        #[test]
        fn discrepancy_decreases_as_gamma_grows(
            xs in proptest::collection::vec(-5.0f64..5.0, 1..8),
            ys in proptest::collection::vec(-5.0f64..5.0, 1..8),
        ) {
            let x = uni(&xs);
            let y = uni(&ys);
            let gammas = [0.0, 0.01, 0.1, 1.0, 10.0];
            let values: Vec<f64> = gammas
                .iter()
                .map(|&g| sdtw_value(&x, &y, gamma(g)).unwrap())
                .collect();
            for w in values.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12);
            }
        }

        #[test]
        fn discrepancy_sits_in_the_soft_minimum_sandwich(
            xs in proptest::collection::vec(-5.0f64..5.0, 1..7),
            ys in proptest::collection::vec(-5.0f64..5.0, 1..7),
            g in 0.001f64..10.0,
        ) {
            let x = uni(&xs);
            let y = uni(&ys);
            let hard = sdtw_value(&x, &y, Gamma::zero()).unwrap();
            let soft = sdtw_value(&x, &y, gamma(g)).unwrap();
            let count = oracle::delannoy(x.len() - 1, y.len() - 1) as f64;
            prop_assert!(soft <= hard + 1e-12);
            prop_assert!(soft >= hard - g * count.ln() - 1e-9);
        }

        #[test]
        fn soft_min_lies_below_the_minimum_by_at_most_gamma_log_k(
            values in proptest::collection::vec(-100.0f64..100.0, 1..12),
            g in 0.001f64..20.0,
        ) {
            let hard = values.iter().copied().fold(f64::INFINITY, f64::min);
            let soft = soft_min(&values, gamma(g)).unwrap();
            let k = values.len() as f64;
            prop_assert!(soft <= hard + 1e-12);
            prop_assert!(soft >= hard - g * k.ln() - 1e-9);
        }

        #[test]
        fn average_alignment_structure(
            xs in proptest::collection::vec(-3.0f64..3.0, 1..7),
            ys in proptest::collection::vec(-3.0f64..3.0, 1..7),
            g in 0.05f64..10.0,
        ) {
            let x = uni(&xs);
            let y = uni(&ys);
            let gm = gamma(g);
            let delta = cost_matrix(&x, &y).unwrap();
            let table = sdtw_forward(&x, &y, gm).unwrap();
            let e = sdtw_backward(&table, &delta, gm).unwrap();
            let matrix = e.matrix();
            let (n, m) = matrix.dim();
            prop_assert!((matrix[[0, 0]] - 1.0).abs() <= 1e-9);
            prop_assert!((matrix[[n - 1, m - 1]] - 1.0).abs() <= 1e-9);
            for v in matrix.iter() {
                prop_assert!(*v >= 0.0 && *v <= 1.0 + 1e-9);
            }
            let total: f64 = matrix.iter().sum();
            let lower = n.max(m) as f64;
            let upper = (n + m - 1) as f64;
            prop_assert!(total >= lower - 1e-6);
            prop_assert!(total <= upper + 1e-6);
        }
    }
}
