//! Slow reference implementations used to verify the fast ones.
//!
//! Everything here is deliberately independent of the dynamic-programming
//! module: costs, log-sum-exp reductions, and the forward table are all
//! recomputed from scratch with their own small routines. The brute-force
//! functions enumerate every monotone alignment explicitly, so they are
//! only usable for small inputs; an explicit guard refuses pairs whose
//! alignment count exceeds [`ENUMERATION_LIMIT`].
//!
//! The quartic-time `average_alignment_forward` offers a third, structurally
//! different route to the average alignment matrix: a forward accumulation
//! of exponentially weighted alignment prefixes, normalized at the end by
//! the total weight `exp(-r[n][m] / gamma)`.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::series::{Gamma, TimeSeries};

/// Refuse to enumerate more alignment matrices than this.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

/// Cell budget for the quartic-time average alignment recursion.
pub const QUARTIC_CELL_LIMIT: usize = 400;

/// A binary alignment matrix: entry `(i, j)` is one exactly when the path
/// visits that cell. Paths start at `(0, 0)`, end at `(n - 1, m - 1)`, and
/// move only right, down, or diagonally down-right.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentMatrix {
    cells: Vec<(usize, usize)>,
    n: usize,
    m: usize,
}

impl AlignmentMatrix {
    pub fn from_path(cells: Vec<(usize, usize)>, n: usize, m: usize) -> Self {
        AlignmentMatrix { cells, n, m }
    }

    pub fn cells(&self) -> &[(usize, usize)] {
        &self.cells
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n, self.m)
    }

    /// Dense 0/1 matrix form.
    pub fn to_matrix(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.n, self.m));
        for &(i, j) in &self.cells {
            a[[i, j]] = 1.0;
        }
        a
    }

    /// Inner product with a cost matrix: the total cost of this alignment.
    pub fn score(&self, costs: &Array2<f64>) -> f64 {
        self.cells.iter().map(|&(i, j)| costs[[i, j]]).sum()
    }

    /// Checks the path structure: correct endpoints, steps limited to right,
    /// down, and diagonal, and no revisited cells.
    pub fn is_valid_path(&self) -> bool {
        if self.cells.is_empty() {
            return false;
        }
        if self.cells[0] != (0, 0) || *self.cells.last().unwrap() != (self.n - 1, self.m - 1) {
            return false;
        }
        self.cells.windows(2).all(|w| {
            let (i0, j0) = w[0];
            let (i1, j1) = w[1];
            let di = i1 as i64 - i0 as i64;
            let dj = j1 as i64 - j0 as i64;
            (di == 0 || di == 1) && (dj == 0 || dj == 1) && (di, dj) != (0, 0)
        })
    }
}

/// Delannoy number `D(a, b)`: the number of monotone lattice paths from
/// `(0, 0)` to `(a, b)` using unit right, up, and diagonal steps. The count
/// of alignments between series of lengths `n` and `m` is `D(n-1, m-1)`.
/// Saturates at `u128::MAX` instead of overflowing.
pub fn delannoy(a: usize, b: usize) -> u128 {
    let mut row: Vec<u128> = vec![1; b + 1];
    for _ in 1..=a {
        let mut prev_diag = row[0];
        for j in 1..=b {
            let value = row[j]
                .saturating_add(row[j - 1])
                .saturating_add(prev_diag);
            prev_diag = row[j];
            row[j] = value;
        }
    }
    row[b]
}

/// Enumerates every alignment matrix for an `n x m` pair in depth-first
/// order with steps tried diagonally, then down, then right. The order is
/// deterministic. Errors when the count exceeds [`ENUMERATION_LIMIT`].
pub fn enumerate_alignments(n: usize, m: usize) -> Result<Vec<AlignmentMatrix>> {
    if n == 0 || m == 0 {
        return Err(Error::EmptyInput("alignment enumeration"));
    }
    let count = delannoy(n - 1, m - 1);
    if count > ENUMERATION_LIMIT {
        return Err(Error::EnumerationTooLarge {
            n,
            m,
            count,
            limit: ENUMERATION_LIMIT,
        });
    }
    let mut all = Vec::with_capacity(count as usize);
    let mut path = vec![(0usize, 0usize)];
    extend_paths(&mut path, n, m, &mut all);
    debug_assert_eq!(all.len() as u128, count);
    Ok(all)
}

fn extend_paths(
    path: &mut Vec<(usize, usize)>,
    n: usize,
    m: usize,
    out: &mut Vec<AlignmentMatrix>,
) {
    let (i, j) = *path.last().unwrap();
    if (i, j) == (n - 1, m - 1) {
        out.push(AlignmentMatrix::from_path(path.clone(), n, m));
        return;
    }
    let steps = [(1, 1), (1, 0), (0, 1)];
    for (di, dj) in steps {
        let (ni, nj) = (i + di, j + dj);
        if ni < n && nj < m {
            path.push((ni, nj));
            extend_paths(path, n, m, out);
            path.pop();
        }
    }
}

fn pairwise_costs(x: &TimeSeries, y: &TimeSeries) -> Result<Array2<f64>> {
    if x.num_features() != y.num_features() {
        return Err(Error::FeatureDimMismatch {
            x: x.num_features(),
            y: y.num_features(),
        });
    }
    let (n, m) = (x.len(), y.len());
    let mut costs = Array2::zeros((n, m));
    for i in 0..n {
        for j in 0..m {
            let mut acc = 0.0;
            for f in 0..x.num_features() {
                let d = x.values()[[f, i]] - y.values()[[f, j]];
                acc += d * d;
            }
            costs[[i, j]] = acc;
        }
    }
    Ok(costs)
}

/// Stabilized `-gamma * log(sum_i exp(-s_i / gamma))` over alignment scores.
fn soft_min_scores(scores: &[f64], gamma: f64) -> f64 {
    let max_z = scores
        .iter()
        .map(|&s| -s / gamma)
        .fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = scores.iter().map(|&s| (-s / gamma - max_z).exp()).sum();
    -gamma * (max_z + sum.ln())
}

/// Soft alignment discrepancy by direct enumeration: each alignment's total
/// cost enters a soft minimum (for positive `gamma`) or a hard minimum (for
/// `gamma` zero).
pub fn brute_force_sdtw(x: &TimeSeries, y: &TimeSeries, gamma: Gamma) -> Result<f64> {
    let costs = pairwise_costs(x, y)?;
    let alignments = enumerate_alignments(x.len(), y.len())?;
    let scores: Vec<f64> = alignments.iter().map(|a| a.score(&costs)).collect();
    if gamma.is_zero() {
        Ok(scores.iter().copied().fold(f64::INFINITY, f64::min))
    } else {
        Ok(soft_min_scores(&scores, gamma.value()))
    }
}

/// Average alignment matrix under the Gibbs distribution that weights each
/// alignment by `exp(-cost / gamma)`, computed by direct enumeration.
/// Requires positive `gamma`.
pub fn brute_force_expected_alignment(
    x: &TimeSeries,
    y: &TimeSeries,
    gamma: Gamma,
) -> Result<Array2<f64>> {
    if gamma.is_zero() {
        return Err(Error::GammaContract {
            operation: "expected alignment",
            requirement: "> 0",
            got: 0.0,
        });
    }
    let g = gamma.value();
    let costs = pairwise_costs(x, y)?;
    let alignments = enumerate_alignments(x.len(), y.len())?;
    let scores: Vec<f64> = alignments.iter().map(|a| a.score(&costs)).collect();
    let min_score = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let mut total_weight = 0.0;
    let mut expected = Array2::zeros((x.len(), y.len()));
    for (alignment, &score) in alignments.iter().zip(&scores) {
        let weight = (-(score - min_score) / g).exp();
        total_weight += weight;
        for &(i, j) in alignment.cells() {
            expected[[i, j]] += weight;
        }
    }
    expected.mapv_inplace(|v| v / total_weight);
    Ok(expected)
}

/// Forward recursion of the discrepancy, kept private to this module so the
/// quartic route below does not share code with the fast implementation.
fn forward_table(costs: &Array2<f64>, gamma: f64) -> Array2<f64> {
    let (n, m) = costs.dim();
    let mut r = Array2::from_elem((n + 1, m + 1), f64::INFINITY);
    r[[0, 0]] = 0.0;
    for i in 1..=n {
        for j in 1..=m {
            let candidates = [r[[i - 1, j - 1]], r[[i - 1, j]], r[[i, j - 1]]];
            let max_z = candidates
                .iter()
                .map(|&v| -v / gamma)
                .fold(f64::NEG_INFINITY, f64::max);
            let soft = if max_z == f64::NEG_INFINITY {
                f64::INFINITY
            } else {
                let sum: f64 = candidates.iter().map(|&v| (-v / gamma - max_z).exp()).sum();
                -gamma * (max_z + sum.ln())
            };
            r[[i, j]] = costs[[i - 1, j - 1]] + soft;
        }
    }
    r
}

/// Average alignment matrix by a forward accumulation instead of either the
/// backward recursion or enumeration.
///
/// `U[i][j]` is an `(i+1) x (j+1)` matrix whose entry `(k, l)` accumulates
/// `sum over paths P ending at (i, j) of exp(-cost(P) / gamma) * [(k, l) in P]`.
/// Each cell combines its three predecessors scaled by `exp(-cost(i, j) / gamma)`
/// and adds its own visit weighted by `exp(-r[i][j] / gamma)`, the total
/// weight of paths through `(i, j)`. Normalizing the final block by
/// `exp(-r[n][m] / gamma)` yields the Gibbs average. Quartic time and space,
/// so the pair must satisfy `n * m <= QUARTIC_CELL_LIMIT`.
pub fn average_alignment_forward(
    x: &TimeSeries,
    y: &TimeSeries,
    gamma: Gamma,
) -> Result<Array2<f64>> {
    if gamma.is_zero() {
        return Err(Error::GammaContract {
            operation: "average alignment",
            requirement: "> 0",
            got: 0.0,
        });
    }
    let (n, m) = (x.len(), y.len());
    if n * m > QUARTIC_CELL_LIMIT {
        return Err(Error::EnumerationTooLarge {
            n,
            m,
            count: (n * m) as u128,
            limit: QUARTIC_CELL_LIMIT as u128,
        });
    }
    let g = gamma.value();
    let costs = pairwise_costs(x, y)?;
    let r = forward_table(&costs, g);

    let mut blocks: Vec<Vec<Array2<f64>>> = (0..n)
        .map(|i| (0..m).map(|j| Array2::zeros((i + 1, j + 1))).collect())
        .collect();
    for i in 0..n {
        for j in 0..m {
            let step = (-costs[[i, j]] / g).exp();
            let mut block = Array2::zeros((i + 1, j + 1));
            if i > 0 && j > 0 {
                let prev = &blocks[i - 1][j - 1];
                block
                    .slice_mut(ndarray::s![..i, ..j])
                    .scaled_add(step, prev);
            }
            if i > 0 {
                let prev = &blocks[i - 1][j];
                block
                    .slice_mut(ndarray::s![..i, ..j + 1])
                    .scaled_add(step, prev);
            }
            if j > 0 {
                let prev = &blocks[i][j - 1];
                block
                    .slice_mut(ndarray::s![..i + 1, ..j])
                    .scaled_add(step, prev);
            }
            block[[i, j]] += (-r[[i + 1, j + 1]] / g).exp();
            blocks[i][j] = block;
        }
    }
    let total_weight = (-r[[n, m]] / g).exp();
    let mut expected = blocks[n - 1][m - 1].clone();
    expected.mapv_inplace(|v| v / total_weight);
    Ok(expected)
}
