//! Clustering and nearest-centroid classification under the smoothed
//! alignment discrepancy.
//!
//! The clustering objective generalizes k-means: each series pays its
//! discrepancy to the nearest centroid, scaled by one over its own length,
//!
//! ```text
//! sum_i ( 1 / m_i ) * min_j sdtw_gamma(x_j, y_i)
//! ```
//!
//! and Lloyd-style alternation minimizes it: assign every series to its
//! closest centroid, then re-center every cluster by running one of the
//! barycenter methods seeded with the previous centroid. A re-centered
//! candidate is only accepted when it does not increase its cluster's share
//! of the objective, so the per-iteration trace never increases.
//!
//! The classifier fits one smoothed barycenter per class and predicts the
//! class whose centroid is closest, with distances normalized by centroid
//! length; the smoothing parameter is picked on a validation split.

use ndarray::Array2;
use rayon::prelude::*;

use crate::barycenter::{
    dba_barycenter, init_euclidean_mean, init_random, soft_barycenter, subgradient_barycenter,
    BarycenterProblem,
};
use crate::dp::sdtw_value;
use crate::error::{Error, Result};
use crate::lbfgs::OptimizerConfig;
use crate::seeding::{derive_seed, stream_rng};
use crate::series::{Gamma, TimeSeries};

use rand::seq::SliceRandom;
use rand::Rng;

/// How initial centroids are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CentroidInit {
    /// Distinct training series sampled without replacement.
    Random,
    /// Per-cluster means after a squared-Euclidean k-means++ seeding and one
    /// Euclidean assignment. Only defined when all series share one length.
    EuclideanMean,
}

/// Which averaging method re-centers a cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CenterMethod {
    /// Smoothed averaging by quasi-Newton descent; needs positive gamma.
    Soft,
    /// Alternating hard-minimum averaging.
    Dba,
    /// Subgradient descent on the hard objective.
    Subgradient,
}

#[derive(Debug, Clone)]
pub struct KMeansConfig {
    pub num_clusters: usize,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub init: CentroidInit,
    pub method: CenterMethod,
    pub seed: u64,
}

impl KMeansConfig {
    pub fn new(num_clusters: usize) -> Self {
        KMeansConfig {
            num_clusters,
            outer_iterations: 30,
            inner_iterations: 100,
            init: CentroidInit::Random,
            method: CenterMethod::Soft,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClusteringResult {
    pub centroids: Vec<TimeSeries>,
    /// Cluster index of every input series, in input order.
    pub assignments: Vec<usize>,
    /// Objective after initialization and after every outer iteration;
    /// non-increasing.
    pub objective_trace: Vec<f64>,
}

/// One fitted centroid per class, sorted by class label.
#[derive(Debug, Clone)]
pub struct CentroidModel {
    classes: Vec<(i64, TimeSeries)>,
    gamma: Gamma,
}

impl CentroidModel {
    pub fn classes(&self) -> &[(i64, TimeSeries)] {
        &self.classes
    }

    pub fn gamma(&self) -> Gamma {
        self.gamma
    }
}

fn check_series_set(series: &[TimeSeries], what: &'static str) -> Result<usize> {
    if series.is_empty() {
        return Err(Error::EmptyInput(what));
    }
    let p = series[0].num_features();
    if let Some(other) = series.iter().find(|s| s.num_features() != p) {
        return Err(Error::FeatureDimMismatch {
            x: p,
            y: other.num_features(),
        });
    }
    Ok(p)
}

/// The clustering objective: every series pays its length-normalized
/// discrepancy to the closest centroid.
pub fn kmeans_objective(
    centroids: &[TimeSeries],
    dataset: &[TimeSeries],
    gamma: Gamma,
) -> Result<f64> {
    check_series_set(centroids, "centroids")?;
    check_series_set(dataset, "clustering dataset")?;
    let terms: Vec<f64> = dataset
        .par_iter()
        .map(|series| -> Result<f64> {
            let mut best = f64::INFINITY;
            for centroid in centroids {
                let d = sdtw_value(centroid, series, gamma)?;
                if d < best {
                    best = d;
                }
            }
            Ok(best / series.len() as f64)
        })
        .collect::<Result<_>>()?;
    Ok(terms.iter().sum())
}

/// Index of the closest centroid for every series; ties go to the lowest
/// centroid index.
pub fn assign_step(
    centroids: &[TimeSeries],
    dataset: &[TimeSeries],
    gamma: Gamma,
) -> Result<Vec<usize>> {
    check_series_set(centroids, "centroids")?;
    check_series_set(dataset, "clustering dataset")?;
    dataset
        .par_iter()
        .map(|series| -> Result<usize> {
            let mut best = f64::INFINITY;
            let mut winner = 0;
            for (j, centroid) in centroids.iter().enumerate() {
                let d = sdtw_value(centroid, series, gamma)?;
                if d < best {
                    best = d;
                    winner = j;
                }
            }
            Ok(winner)
        })
        .collect()
}

fn cluster_contribution(
    centroid: &TimeSeries,
    members: &[&TimeSeries],
    gamma: Gamma,
) -> Result<f64> {
    let mut total = 0.0;
    for member in members {
        total += sdtw_value(centroid, member, gamma)? / member.len() as f64;
    }
    Ok(total)
}

/// Re-centers every cluster with the requested averaging method, seeded
/// with the previous centroid. A new centroid is kept only when it does not
/// increase that cluster's share of the objective; clusters without members
/// keep their centroid untouched.
pub fn center_step(
    centroids: &[TimeSeries],
    dataset: &[TimeSeries],
    assignments: &[usize],
    gamma: Gamma,
    method: CenterMethod,
    inner: &OptimizerConfig,
) -> Result<Vec<TimeSeries>> {
    if assignments.len() != dataset.len() {
        return Err(Error::InvalidConfig(format!(
            "{} assignments for {} series",
            assignments.len(),
            dataset.len()
        )));
    }
    let mut updated = centroids.to_vec();
    for (j, centroid) in centroids.iter().enumerate() {
        let members: Vec<&TimeSeries> = dataset
            .iter()
            .zip(assignments)
            .filter(|(_, a)| **a == j)
            .map(|(s, _)| s)
            .collect();
        if members.is_empty() {
            continue;
        }
        let problem = BarycenterProblem::uniform(
            members.iter().map(|s| (*s).clone()).collect(),
            centroid.len(),
        )?;
        let result = match method {
            CenterMethod::Soft => soft_barycenter(&problem, gamma, centroid, inner)?,
            CenterMethod::Dba => dba_barycenter(&problem, centroid, inner)?,
            CenterMethod::Subgradient => subgradient_barycenter(&problem, centroid, inner)?,
        };
        let before = cluster_contribution(centroid, &members, gamma)?;
        let after = cluster_contribution(&result.barycenter, &members, gamma)?;
        if after <= before {
            updated[j] = result.barycenter;
        }
    }
    Ok(updated)
}

fn median_length(dataset: &[TimeSeries]) -> usize {
    let mut lengths: Vec<usize> = dataset.iter().map(TimeSeries::len).collect();
    lengths.sort_unstable();
    lengths[(lengths.len() - 1) / 2]
}

fn initial_centroids(
    dataset: &[TimeSeries],
    length: usize,
    config: &KMeansConfig,
) -> Result<Vec<TimeSeries>> {
    let k = config.num_clusters;
    match config.init {
        CentroidInit::Random => {
            let mut rng = stream_rng(config.seed, "kmeans-init");
            let mut indices: Vec<usize> = (0..dataset.len()).collect();
            indices.shuffle(&mut rng);
            indices[..k]
                .iter()
                .map(|&i| dataset[i].resampled(length))
                .collect()
        }
        CentroidInit::EuclideanMean => {
            if dataset.iter().any(|s| s.len() != length) {
                return Err(Error::UnequalLengths("Euclidean centroid initialization"));
            }
            euclidean_mean_centroids(dataset, k, config.seed)
        }
    }
}

fn flat_squared_distance(a: &TimeSeries, b: &TimeSeries) -> f64 {
    a.values()
        .iter()
        .zip(b.values().iter())
        .map(|(u, v)| (u - v) * (u - v))
        .sum()
}

/// Squared-Euclidean k-means++ seeding, one assignment pass, and per-cluster
/// means. A seed that attracts no members stands in for its cluster's mean.
fn euclidean_mean_centroids(
    dataset: &[TimeSeries],
    k: usize,
    seed: u64,
) -> Result<Vec<TimeSeries>> {
    let mut rng = stream_rng(seed, "kmeans-init");
    let mut seeds: Vec<usize> = vec![rng.gen_range(0..dataset.len())];
    while seeds.len() < k {
        let distances: Vec<f64> = dataset
            .iter()
            .map(|s| {
                seeds
                    .iter()
                    .map(|&c| flat_squared_distance(s, &dataset[c]))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = distances.iter().sum();
        let next = if total > 0.0 {
            let mut draw = rng.gen_range(0.0..total);
            let mut chosen = 0;
            for (i, d) in distances.iter().enumerate() {
                draw -= d;
                if draw <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.gen_range(0..dataset.len())
        };
        seeds.push(next);
    }

    let assignment: Vec<usize> = dataset
        .iter()
        .map(|s| {
            let mut best = f64::INFINITY;
            let mut winner = 0;
            for (j, &c) in seeds.iter().enumerate() {
                let d = flat_squared_distance(s, &dataset[c]);
                if d < best {
                    best = d;
                    winner = j;
                }
            }
            winner
        })
        .collect();

    let p = dataset[0].num_features();
    let n = dataset[0].len();
    (0..k)
        .map(|j| {
            let members: Vec<&TimeSeries> = dataset
                .iter()
                .zip(&assignment)
                .filter(|(_, a)| **a == j)
                .map(|(s, _)| s)
                .collect();
            if members.is_empty() {
                return Ok(dataset[seeds[j]].clone());
            }
            let mut mean = Array2::<f64>::zeros((p, n));
            for member in &members {
                mean.scaled_add(1.0 / members.len() as f64, member.values());
            }
            TimeSeries::new(mean)
        })
        .collect()
}

/// Replaces the centroid of every empty cluster with the series currently
/// farthest from its own centroid, then reassigns. Improves or preserves
/// the objective: the replaced centroid served no series, and each series
/// still picks its closest centroid afterwards.
fn repair_empty_clusters(
    centroids: &mut [TimeSeries],
    assignments: &mut Vec<usize>,
    dataset: &[TimeSeries],
    gamma: Gamma,
    length: usize,
) -> Result<()> {
    let k = centroids.len();
    let mut reseeded: Vec<usize> = Vec::new();
    for _ in 0..k {
        let mut counts = vec![0usize; k];
        for &a in assignments.iter() {
            counts[a] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return Ok(());
        };
        let distances: Vec<f64> = dataset
            .par_iter()
            .zip(assignments.par_iter())
            .map(|(s, &a)| Ok(sdtw_value(&centroids[a], s, gamma)? / s.len() as f64))
            .collect::<Result<_>>()?;
        let farthest = distances
            .iter()
            .enumerate()
            .filter(|(i, _)| !reseeded.contains(i))
            .max_by(|(_, a), (_, b)| a.total_cmp(b))
            .map(|(i, _)| i)
            .ok_or_else(|| Error::InvalidConfig("no series left to reseed with".into()))?;
        centroids[empty] = dataset[farthest].resampled(length)?;
        reseeded.push(farthest);
        *assignments = assign_step(centroids, dataset, gamma)?;
    }
    Ok(())
}

/// Lloyd alternation on the clustering objective. Stops at an assignment
/// fixpoint or after `outer_iterations` rounds.
pub fn lloyd_kmeans(
    dataset: &[TimeSeries],
    gamma: Gamma,
    config: &KMeansConfig,
) -> Result<ClusteringResult> {
    check_series_set(dataset, "clustering dataset")?;
    let k = config.num_clusters;
    if k == 0 || k > dataset.len() {
        return Err(Error::InvalidConfig(format!(
            "cannot form {k} clusters from {} series",
            dataset.len()
        )));
    }
    if config.method == CenterMethod::Soft && gamma.is_zero() {
        return Err(Error::GammaContract {
            operation: "smoothed re-centering",
            requirement: "> 0",
            got: 0.0,
        });
    }
    let length = median_length(dataset);
    let inner = OptimizerConfig {
        max_iterations: config.inner_iterations,
        seed: config.seed,
        ..OptimizerConfig::default()
    };

    let mut centroids = initial_centroids(dataset, length, config)?;
    let mut assignments = assign_step(&centroids, dataset, gamma)?;
    repair_empty_clusters(&mut centroids, &mut assignments, dataset, gamma, length)?;
    let mut trace = vec![kmeans_objective(&centroids, dataset, gamma)?];

    for _ in 0..config.outer_iterations {
        let updated = center_step(
            &centroids,
            dataset,
            &assignments,
            gamma,
            config.method,
            &inner,
        )?;
        let mut new_assignments = assign_step(&updated, dataset, gamma)?;
        let mut updated = updated;
        repair_empty_clusters(&mut updated, &mut new_assignments, dataset, gamma, length)?;
        trace.push(kmeans_objective(&updated, dataset, gamma)?);
        let settled = new_assignments == assignments;
        centroids = updated;
        assignments = new_assignments;
        if settled {
            break;
        }
    }

    Ok(ClusteringResult {
        centroids,
        assignments,
        objective_trace: trace,
    })
}

/// Fits one smoothed barycenter per class. Classes are taken from the
/// labels; each class centroid has the median length of its members and
/// starts from their columnwise mean when lengths agree, otherwise from a
/// random member.
pub fn nearest_centroid_fit(
    series: &[TimeSeries],
    labels: &[i64],
    gamma: Gamma,
    config: &OptimizerConfig,
) -> Result<CentroidModel> {
    check_series_set(series, "training set")?;
    if labels.len() != series.len() {
        return Err(Error::InvalidConfig(format!(
            "{} labels for {} series",
            labels.len(),
            series.len()
        )));
    }
    let mut classes: Vec<i64> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();

    let fitted: Vec<(i64, TimeSeries)> = classes
        .iter()
        .map(|&label| -> Result<(i64, TimeSeries)> {
            let members: Vec<TimeSeries> = series
                .iter()
                .zip(labels)
                .filter(|(_, l)| **l == label)
                .map(|(s, _)| s.clone())
                .collect();
            if members.is_empty() {
                return Err(Error::EmptyClass { label });
            }
            let length = median_length(&members);
            let problem = BarycenterProblem::uniform(members, length)?;
            let init = if problem.series().iter().all(|s| s.len() == length) {
                init_euclidean_mean(&problem)?
            } else {
                init_random(&problem, derive_seed(config.seed, &format!("class-{label}")))?
            };
            let result = soft_barycenter(&problem, gamma, &init, config)?;
            Ok((label, result.barycenter))
        })
        .collect::<Result<_>>()?;

    Ok(CentroidModel {
        classes: fitted,
        gamma,
    })
}

/// Predicts the class whose centroid is closest under the model's gamma,
/// with each distance divided by that centroid's length. Ties go to the
/// lowest class label.
pub fn nearest_centroid_predict(model: &CentroidModel, x: &TimeSeries) -> Result<i64> {
    let mut best = f64::INFINITY;
    let mut winner = model.classes[0].0;
    for (label, centroid) in &model.classes {
        let d = sdtw_value(centroid, x, model.gamma)? / centroid.len() as f64;
        if d < best {
            best = d;
            winner = *label;
        }
    }
    Ok(winner)
}

/// Fraction of series whose predicted class matches the given label.
pub fn nearest_centroid_accuracy(
    model: &CentroidModel,
    series: &[TimeSeries],
    labels: &[i64],
) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::EmptyInput("evaluation set"));
    }
    if labels.len() != series.len() {
        return Err(Error::InvalidConfig(format!(
            "{} labels for {} series",
            labels.len(),
            series.len()
        )));
    }
    let hits: Vec<bool> = series
        .par_iter()
        .zip(labels.par_iter())
        .map(|(s, l)| Ok(nearest_centroid_predict(model, s)? == *l))
        .collect::<Result<_>>()?;
    Ok(hits.iter().filter(|h| **h).count() as f64 / series.len() as f64)
}

/// Outcome of the smoothing-parameter search.
#[derive(Debug, Clone)]
pub struct GammaSelection {
    pub best_gamma: Gamma,
    /// Model fitted on the training set at the chosen gamma.
    pub best_model: CentroidModel,
    /// `(gamma, validation accuracy)` for every candidate, ascending in
    /// gamma.
    pub accuracies: Vec<(f64, f64)>,
}

/// The usual candidate grid: fifteen log-spaced values from 1e-3 to 10.
pub fn default_gamma_grid() -> Vec<f64> {
    let (low, high, count) = (1e-3f64, 10.0f64, 15);
    let step = (high.ln() - low.ln()) / (count - 1) as f64;
    let mut grid: Vec<f64> = (0..count).map(|i| (low.ln() + i as f64 * step).exp()).collect();
    grid[0] = low;
    grid[count - 1] = high;
    grid
}

/// Fits a model per candidate gamma and keeps the one with the best
/// validation accuracy; ties go to the smallest gamma.
pub fn select_gamma(
    train_series: &[TimeSeries],
    train_labels: &[i64],
    validation_series: &[TimeSeries],
    validation_labels: &[i64],
    candidates: &[f64],
    config: &OptimizerConfig,
) -> Result<GammaSelection> {
    if candidates.is_empty() {
        return Err(Error::EmptyInput("gamma candidates"));
    }
    let mut grid = candidates.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let mut best: Option<(f64, Gamma, CentroidModel)> = None;
    let mut accuracies = Vec::with_capacity(grid.len());
    for &g in &grid {
        let gamma = Gamma::new(g)?;
        let model = nearest_centroid_fit(train_series, train_labels, gamma, config)?;
        let accuracy =
            nearest_centroid_accuracy(&model, validation_series, validation_labels)?;
        accuracies.push((g, accuracy));
        let improves = match &best {
            Some((incumbent, _, _)) => accuracy > *incumbent,
            None => true,
        };
        if improves {
            best = Some((accuracy, gamma, model));
        }
    }
    let (_, best_gamma, best_model) = best.expect("grid is nonempty");
    Ok(GammaSelection {
        best_gamma,
        best_model,
        accuracies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uni(values: &[f64]) -> TimeSeries {
        TimeSeries::univariate(values.to_vec()).unwrap()
    }

    fn constant(value: f64, len: usize) -> TimeSeries {
        uni(&vec![value; len])
    }

    fn gamma(g: f64) -> Gamma {
        Gamma::new(g).unwrap()
    }

    #[test]
    fn objective_is_the_sum_of_normalized_minima() {
        let centroids = vec![constant(0.0, 2), constant(10.0, 2)];
        let dataset = vec![uni(&[0.0, 0.0]), uni(&[10.0, 10.0, 10.0])];
        let g = gamma(1.0);
        let value = kmeans_objective(&centroids, &dataset, g).unwrap();
        let first = sdtw_value(&centroids[0], &dataset[0], g).unwrap() / 2.0;
        let second = sdtw_value(&centroids[1], &dataset[1], g).unwrap() / 3.0;
        assert!((value - (first + second)).abs() <= 1e-12);
    }

    #[test]
    fn assignment_ties_prefer_the_lowest_index() {
        let centroids = vec![constant(1.0, 3), constant(1.0, 3)];
        let dataset = vec![uni(&[0.5, 1.5, 1.0]), uni(&[1.0, 1.0, 1.0])];
        let assignments = assign_step(&centroids, &dataset, gamma(0.5)).unwrap();
        assert_eq!(assignments, vec![0, 0]);
    }

    #[test]
    fn cluster_counts_are_validated() {
        let dataset = vec![constant(0.0, 3), constant(1.0, 3)];
        for k in [0, 3] {
            let config = KMeansConfig::new(k);
            assert!(matches!(
                lloyd_kmeans(&dataset, gamma(1.0), &config),
                Err(Error::InvalidConfig(_))
            ));
        }
    }

    #[test]
    fn smoothed_centering_rejects_gamma_zero() {
        let dataset = vec![constant(0.0, 3), constant(1.0, 3)];
        let config = KMeansConfig::new(2);
        assert!(matches!(
            lloyd_kmeans(&dataset, Gamma::zero(), &config),
            Err(Error::GammaContract { .. })
        ));
    }

    #[test]
    fn separated_groups_are_recovered() {
        let mut dataset = Vec::new();
        for i in 0..4 {
            dataset.push(uni(&[0.0, 0.1 * i as f64, 0.0, -0.1]));
        }
        for i in 0..4 {
            dataset.push(uni(&[5.0, 5.0 + 0.1 * i as f64, 5.0, 4.9]));
        }
        let config = KMeansConfig {
            seed: 3,
            ..KMeansConfig::new(2)
        };
        let result = lloyd_kmeans(&dataset, gamma(1.0), &config).unwrap();
        let low = result.assignments[0];
        assert!(result.assignments[..4].iter().all(|&a| a == low));
        assert!(result.assignments[4..].iter().all(|&a| a != low));
        for w in result.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn duplicate_heavy_data_still_fills_every_cluster() {
        let dataset = vec![
            constant(0.0, 3),
            constant(0.0, 3),
            constant(0.0, 3),
            constant(8.0, 3),
        ];
        for seed in 0..4 {
            let config = KMeansConfig {
                seed,
                ..KMeansConfig::new(2)
            };
            let result = lloyd_kmeans(&dataset, gamma(0.5), &config).unwrap();
            let mut counts = vec![0usize; 2];
            for &a in &result.assignments {
                counts[a] += 1;
            }
            assert!(counts.iter().all(|&c| c > 0), "seed {seed}: {counts:?}");
            assert_ne!(result.assignments[3], result.assignments[0]);
        }
    }

    #[test]
    fn variable_lengths_use_the_lower_median_for_centroids() {
        let dataset = vec![
            constant(0.0, 2),
            constant(0.1, 8),
            constant(5.0, 3),
            constant(5.1, 3),
        ];
        let config = KMeansConfig {
            seed: 0,
            ..KMeansConfig::new(2)
        };
        let result = lloyd_kmeans(&dataset, gamma(1.0), &config).unwrap();
        for centroid in &result.centroids {
            assert_eq!(centroid.len(), 3);
        }
    }

    #[test]
    fn euclidean_init_needs_equal_lengths() {
        let dataset = vec![constant(0.0, 3), constant(1.0, 4)];
        let config = KMeansConfig {
            init: CentroidInit::EuclideanMean,
            ..KMeansConfig::new(2)
        };
        assert!(matches!(
            lloyd_kmeans(&dataset, gamma(1.0), &config),
            Err(Error::UnequalLengths(_))
        ));
    }

    #[test]
    fn euclidean_init_separates_obvious_groups() {
        let dataset = vec![
            uni(&[0.0, 0.2, 0.1]),
            uni(&[0.1, 0.0, 0.0]),
            uni(&[6.0, 6.1, 6.0]),
            uni(&[6.2, 6.0, 5.9]),
        ];
        let config = KMeansConfig {
            init: CentroidInit::EuclideanMean,
            seed: 1,
            ..KMeansConfig::new(2)
        };
        let result = lloyd_kmeans(&dataset, gamma(1.0), &config).unwrap();
        assert_eq!(result.assignments[0], result.assignments[1]);
        assert_eq!(result.assignments[2], result.assignments[3]);
        assert_ne!(result.assignments[0], result.assignments[2]);
    }

    #[test]
    fn hard_minimum_baselines_run_at_gamma_zero() {
        let dataset = vec![
            uni(&[0.0, 0.1, 0.0]),
            uni(&[0.1, 0.0, 0.1]),
            uni(&[4.0, 4.1, 4.0]),
            uni(&[4.1, 4.0, 4.1]),
        ];
        for method in [CenterMethod::Dba, CenterMethod::Subgradient] {
            let config = KMeansConfig {
                method,
                seed: 5,
                ..KMeansConfig::new(2)
            };
            let result = lloyd_kmeans(&dataset, Gamma::zero(), &config).unwrap();
            assert_eq!(result.assignments[0], result.assignments[1]);
            assert_ne!(result.assignments[0], result.assignments[2]);
            for w in result.objective_trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-12);
            }
        }
    }

    #[test]
    fn classifier_recovers_planted_classes() {
        let series = vec![
            uni(&[0.0, 0.1, 0.0, 0.1]),
            uni(&[0.1, 0.0, 0.1, 0.0]),
            uni(&[3.0, 3.1, 3.0, 3.1]),
            uni(&[3.1, 3.0, 3.1, 3.0]),
        ];
        let labels = vec![7, 7, 3, 3];
        let model =
            nearest_centroid_fit(&series, &labels, gamma(0.1), &OptimizerConfig::default())
                .unwrap();
        assert_eq!(
            model.classes().iter().map(|(l, _)| *l).collect::<Vec<_>>(),
            vec![3, 7]
        );
        assert_eq!(
            nearest_centroid_predict(&model, &uni(&[2.9, 3.0, 3.2, 3.0])).unwrap(),
            3
        );
        assert_eq!(
            nearest_centroid_predict(&model, &uni(&[0.05, 0.0, 0.1, 0.05])).unwrap(),
            7
        );
        let accuracy = nearest_centroid_accuracy(&model, &series, &labels).unwrap();
        assert_eq!(accuracy, 1.0);
    }

    #[test]
    fn prediction_ties_take_the_lowest_label() {
        let series = vec![constant(1.0, 2), constant(1.0, 2)];
        let labels = vec![9, 4];
        let model =
            nearest_centroid_fit(&series, &labels, gamma(1.0), &OptimizerConfig::default())
                .unwrap();
        assert_eq!(nearest_centroid_predict(&model, &constant(1.0, 2)).unwrap(), 4);
    }

    #[test]
    fn class_centroids_use_member_lengths() {
        let series = vec![
            constant(0.0, 2),
            constant(0.0, 6),
            constant(0.0, 7),
            constant(5.0, 4),
        ];
        let labels = vec![1, 1, 1, 2];
        let model =
            nearest_centroid_fit(&series, &labels, gamma(1.0), &OptimizerConfig::default())
                .unwrap();
        assert_eq!(model.classes()[0].1.len(), 6);
        assert_eq!(model.classes()[1].1.len(), 4);
    }

    #[test]
    fn gamma_grid_has_fifteen_log_spaced_points() {
        let grid = default_gamma_grid();
        assert_eq!(grid.len(), 15);
        assert_eq!(grid[0], 1e-3);
        assert_eq!(grid[14], 10.0);
        for w in grid.windows(2) {
            assert!(w[1] > w[0]);
        }
        let ratio = grid[1] / grid[0];
        for w in grid.windows(2) {
            assert!((w[1] / w[0] - ratio).abs() < 1e-9);
        }
    }

    #[test]
    fn gamma_ties_resolve_to_the_smallest_candidate() {
        let train = vec![
            uni(&[0.0, 0.0, 0.1]),
            uni(&[0.1, 0.0, 0.0]),
            uni(&[4.0, 4.0, 4.1]),
            uni(&[4.1, 4.0, 4.0]),
        ];
        let train_labels = vec![1, 1, 2, 2];
        let validation = vec![uni(&[0.0, 0.1, 0.0]), uni(&[4.0, 4.1, 4.0])];
        let validation_labels = vec![1, 2];
        let selection = select_gamma(
            &train,
            &train_labels,
            &validation,
            &validation_labels,
            &[1.0, 0.01, 0.1],
            &OptimizerConfig::default(),
        )
        .unwrap();
        assert_eq!(selection.best_gamma.value(), 0.01);
        assert_eq!(selection.accuracies.len(), 3);
        assert!(selection.accuracies.iter().all(|(_, a)| *a == 1.0));
        assert_eq!(
            nearest_centroid_accuracy(&selection.best_model, &validation, &validation_labels)
                .unwrap(),
            1.0
        );
    }
}
