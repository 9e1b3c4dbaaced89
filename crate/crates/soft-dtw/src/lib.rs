//! Differentiable dynamic time warping for time-series learning.
//!
//! The core of the crate is a smoothed alignment discrepancy between two
//! series together with its exact gradient. On top of it sit three
//! applications: averaging a set of series into a barycenter, clustering
//! and nearest-centroid classification, and training a small network to
//! forecast the tail of a series under the alignment loss.

pub mod barycenter;
pub mod clustering;
pub mod dataset;
pub mod dp;
pub mod error;
pub mod lbfgs;
pub mod oracle;
pub mod prediction;
pub mod report;
pub mod seeding;
pub mod series;

pub use clustering::{
    assign_step, center_step, default_gamma_grid, kmeans_objective, lloyd_kmeans,
    nearest_centroid_accuracy, nearest_centroid_fit, nearest_centroid_predict, select_gamma,
    CenterMethod, CentroidInit, CentroidModel, ClusteringResult, GammaSelection, KMeansConfig,
};
pub use dataset::{load_ucr, parse_ucr, split_dataset, write_ucr, Dataset};
pub use dp::{
    cost_matrix, jacobian_apply, optimal_path_backtrack, sdtw_backward, sdtw_batch,
    sdtw_batch_value_and_grad, sdtw_forward, sdtw_value, sdtw_value_and_grad, soft_min,
    squared_euclidean_cost, AlignmentGradient, AlignmentPath, CostMatrix, ForwardTable,
};
pub use error::{Error, Result};
pub use prediction::{
    adam_step, evaluate_predictor, flatten_series, load_model, predict_series, save_model,
    train_predictor, training_grad, training_loss, unflatten_series, AdamConfig, AdamState,
    MlpParams, PredictionMetrics, PredictionTask, TrainConfig, TrainInit, TrainOutcome,
    TrainingLoss,
};
pub use report::{strip_volatile, ExperimentReport, Table};
pub use series::{Gamma, TimeSeries};
