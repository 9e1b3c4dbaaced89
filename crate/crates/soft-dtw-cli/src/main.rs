//! Command-line front end for the smoothed alignment toolkit.
//!
//! Every subcommand reads series from the one-line-per-series text format,
//! prints a structured report to stdout, and optionally writes the same
//! report to a file. All randomness flows from a single `--seed` through
//! named substreams, so rerunning a command with the same arguments
//! reproduces the same report except for its timestamp lines.
//!
//! Exit codes: 0 on success, 1 on usage or runtime errors, 2 when `verify`
//! finds a failing check.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;

use soft_dtw::barycenter::{
    dba_barycenter, init_euclidean_mean, init_random, soft_barycenter, subgradient_barycenter,
    BarycenterProblem, BarycenterResult,
};
use soft_dtw::clustering::{
    default_gamma_grid, lloyd_kmeans, nearest_centroid_accuracy, select_gamma, CenterMethod,
    CentroidInit, KMeansConfig,
};
use soft_dtw::dataset::{load_ucr, split_dataset, write_ucr, Dataset};
use soft_dtw::dp::{
    cost_matrix, optimal_path_backtrack, sdtw_backward, sdtw_forward, sdtw_value,
    sdtw_value_and_grad,
};
use soft_dtw::lbfgs::OptimizerConfig;
use soft_dtw::oracle::{average_alignment_forward, brute_force_expected_alignment,
    brute_force_sdtw, delannoy};
use soft_dtw::prediction::{
    evaluate_predictor, save_model, train_predictor, PredictionTask, TrainConfig, TrainInit,
    TrainingLoss,
};
use soft_dtw::report::{ExperimentReport, Table};
use soft_dtw::seeding::{derive_seed, stream_rng};
use soft_dtw::series::{Gamma, TimeSeries};
use soft_dtw::{Error, Result};

#[derive(Parser)]
#[command(name = "soft-dtw", version, about = "Smoothed dynamic time warping toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Alignment discrepancy between two series of a dataset.
    Dist(DistArgs),
    /// Gradient of the discrepancy with respect to the first series.
    Grad(GradArgs),
    /// Average repeated samples of one class into a barycenter.
    Barycenter(BarycenterArgs),
    /// Cluster a dataset with alignment-aware k-means.
    Kmeans(KmeansArgs),
    /// Nearest-centroid classification with a validated smoothing value.
    Classify(ClassifyArgs),
    /// Train a network to forecast the tail of each series.
    Predict(PredictArgs),
    /// Self-checks of the fast routines against reference computations.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Soft,
    Dba,
    Subgradient,
}

impl MethodArg {
    fn name(self) -> &'static str {
        match self {
            MethodArg::Soft => "soft",
            MethodArg::Dba => "dba",
            MethodArg::Subgradient => "subgradient",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Random,
    EuclideanMean,
}

impl InitArg {
    fn name(self) -> &'static str {
        match self {
            InitArg::Random => "random",
            InitArg::EuclideanMean => "euclidean-mean",
        }
    }
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum LossArg {
    Euclidean,
    SoftDtw,
}

impl LossArg {
    fn name(self) -> &'static str {
        match self {
            LossArg::Euclidean => "euclidean",
            LossArg::SoftDtw => "soft-dtw",
        }
    }
}

#[derive(clap::Args)]
struct DistArgs {
    /// Dataset file in the one-line-per-series format.
    #[arg(long)]
    data: PathBuf,
    /// Index of the first series.
    #[arg(long, default_value_t = 0)]
    first: usize,
    /// Index of the second series.
    #[arg(long, default_value_t = 1)]
    second: usize,
    /// Smoothing parameter; 0 gives the hard alignment cost.
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Also write the report to this file.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(clap::Args)]
struct GradArgs {
    /// Dataset file in the one-line-per-series format.
    #[arg(long)]
    data: PathBuf,
    /// Index of the series the gradient is taken with respect to.
    #[arg(long, default_value_t = 0)]
    first: usize,
    /// Index of the series aligned against.
    #[arg(long, default_value_t = 1)]
    second: usize,
    /// Smoothing parameter; must be positive for a gradient.
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Also write the report to this file.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(clap::Args)]
struct BarycenterArgs {
    /// Dataset file in the one-line-per-series format.
    #[arg(long)]
    data: PathBuf,
    /// Class to average; defaults to the lowest label.
    #[arg(long)]
    class: Option<i64>,
    /// Smoothing parameter; 0 selects hard alignments.
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Averaging algorithm.
    #[arg(long, value_enum, default_value = "soft")]
    method: MethodArg,
    /// Starting point for each run.
    #[arg(long, value_enum, default_value = "random")]
    init: InitArg,
    /// Iteration budget of each averaging run.
    #[arg(long, default_value_t = 100)]
    iterations: usize,
    /// Number of independently sampled runs.
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    /// Series drawn per run (capped at the class size).
    #[arg(long, default_value_t = 10)]
    sample_size: usize,
    /// Seed for sampling, initialization, and optimization.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the best barycenter as a one-line dataset.
    #[arg(long)]
    save_series: Option<PathBuf>,
    /// Also write the report to this file.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(clap::Args)]
struct KmeansArgs {
    /// Dataset file in the one-line-per-series format.
    #[arg(long)]
    data: PathBuf,
    /// Number of clusters.
    #[arg(long)]
    clusters: usize,
    /// Smoothing parameter; 0 selects hard alignments.
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Centroid refinement algorithm.
    #[arg(long, value_enum, default_value = "soft")]
    method: MethodArg,
    /// Centroid initialization scheme.
    #[arg(long, value_enum, default_value = "random")]
    init: InitArg,
    /// Assignment and refinement rounds.
    #[arg(long, default_value_t = 30)]
    outer_iterations: usize,
    /// Iteration budget inside each centroid refinement.
    #[arg(long, default_value_t = 100)]
    inner_iterations: usize,
    /// Seed for initialization and optimization.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the centroids as a dataset labeled by cluster index.
    #[arg(long)]
    save_centroids: Option<PathBuf>,
    /// Also write the report to this file.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(clap::Args)]
struct ClassifyArgs {
    /// Labeled dataset file in the one-line-per-series format.
    #[arg(long)]
    data: PathBuf,
    /// Candidate smoothing values; defaults to a fifteen-point log grid.
    #[arg(long, value_delimiter = ',')]
    gammas: Option<Vec<f64>>,
    /// Iteration budget for fitting each class centroid.
    #[arg(long, default_value_t = 100)]
    iterations: usize,
    /// Seed for the train/validation/test split and centroid fitting.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the report to this file.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(clap::Args)]
struct PredictArgs {
    /// Dataset file in the one-line-per-series format.
    #[arg(long)]
    data: PathBuf,
    /// Training loss for the forecaster.
    #[arg(long, value_enum, default_value = "soft-dtw")]
    loss: LossArg,
    /// Smoothing parameter of the training loss.
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Where each series is cut into observed prefix and forecast suffix.
    #[arg(long, default_value_t = 0.6)]
    split_fraction: f64,
    /// Share of series held out for evaluation.
    #[arg(long, default_value_t = 0.25)]
    test_fraction: f64,
    /// Width of the hidden layer.
    #[arg(long, default_value_t = 64)]
    hidden_units: usize,
    /// Passes over the training set (per phase when warm-starting).
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    /// Examples per optimizer step.
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
    /// Train under the Euclidean loss first, then refine under the
    /// requested loss.
    #[arg(long)]
    warm_start: bool,
    /// Seed for the split, weight initialization, and batch order.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the trained weights (a `.meta` sidecar records the settings).
    #[arg(long)]
    save_model: Option<PathBuf>,
    /// Also write the report to this file.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(clap::Args)]
struct VerifyArgs {
    /// Random instances per check.
    #[arg(long, default_value_t = 40)]
    cases: usize,
    /// Seed for the generated instances.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the report to this file.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(error) => {
            let _ = error.print();
            std::process::exit(1);
        }
    };
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(error) => {
            eprintln!("error: {error}");
            std::process::exit(1);
        }
    }
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Dist(args) => run_dist(args).map(|()| 0),
        Command::Grad(args) => run_grad(args).map(|()| 0),
        Command::Barycenter(args) => run_barycenter(args).map(|()| 0),
        Command::Kmeans(args) => run_kmeans(args).map(|()| 0),
        Command::Classify(args) => run_classify(args).map(|()| 0),
        Command::Predict(args) => run_predict(args).map(|()| 0),
        Command::Verify(args) => run_verify(args),
    }
}

fn finish(mut report: ExperimentReport, started: Instant, output: Option<&PathBuf>) -> Result<()> {
    report.set_elapsed(started.elapsed().as_secs_f64());
    print!("{}", report.render());
    if let Some(path) = output {
        report.write_to(path)?;
    }
    Ok(())
}

fn fetch_pair(data: &Dataset, first: usize, second: usize) -> Result<(&TimeSeries, &TimeSeries)> {
    for index in [first, second] {
        if index >= data.len() {
            return Err(Error::InvalidConfig(format!(
                "series index {index} out of range for {} series",
                data.len()
            )));
        }
    }
    Ok((&data.series()[first], &data.series()[second]))
}

fn median_length(series: &[TimeSeries]) -> usize {
    let mut lengths: Vec<usize> = series.iter().map(TimeSeries::len).collect();
    lengths.sort_unstable();
    lengths[(lengths.len() - 1) / 2]
}

fn run_dist(args: DistArgs) -> Result<()> {
    let started = Instant::now();
    let data = load_ucr(&args.data)?;
    let gamma = Gamma::new(args.gamma)?;
    let (x, y) = fetch_pair(&data, args.first, args.second)?;
    let value = sdtw_value(x, y, gamma)?;

    let mut report = ExperimentReport::new("dist");
    report.push_config("data", data.name());
    report.push_config("first", args.first);
    report.push_config("second", args.second);
    report.push_config("gamma", args.gamma);
    report.push_metric("first_length", x.len());
    report.push_metric("second_length", y.len());
    report.push_metric("discrepancy", value);
    finish(report, started, args.output.as_ref())
}

fn run_grad(args: GradArgs) -> Result<()> {
    let started = Instant::now();
    let data = load_ucr(&args.data)?;
    let gamma = Gamma::new(args.gamma)?;
    let (x, y) = fetch_pair(&data, args.first, args.second)?;
    let (value, gradient) = sdtw_value_and_grad(x, y, gamma)?;
    let norm = gradient.iter().map(|v| v * v).sum::<f64>().sqrt();

    let mut report = ExperimentReport::new("grad");
    report.push_config("data", data.name());
    report.push_config("first", args.first);
    report.push_config("second", args.second);
    report.push_config("gamma", args.gamma);
    report.push_metric("discrepancy", value);
    report.push_metric("gradient_norm", norm);
    let mut table = Table::new("gradient", &["feature", "step", "value"]);
    for ((feature, step), value) in gradient.indexed_iter() {
        table.push_row(&[feature.to_string(), step.to_string(), value.to_string()]);
    }
    report.push_table(table);
    finish(report, started, args.output.as_ref())
}

fn average_once(
    problem: &BarycenterProblem,
    gamma: Gamma,
    method: MethodArg,
    init: &TimeSeries,
    config: &OptimizerConfig,
) -> Result<BarycenterResult> {
    match method {
        MethodArg::Soft => soft_barycenter(problem, gamma, init, config),
        MethodArg::Dba => dba_barycenter(problem, init, config),
        MethodArg::Subgradient => subgradient_barycenter(problem, init, config),
    }
}

fn run_barycenter(args: BarycenterArgs) -> Result<()> {
    let started = Instant::now();
    let data = load_ucr(&args.data)?;
    let gamma = Gamma::new(args.gamma)?;
    if args.repeats == 0 || args.sample_size == 0 {
        return Err(Error::InvalidConfig(
            "repeats and sample-size must be positive".into(),
        ));
    }

    let (class_name, members): (String, Vec<TimeSeries>) = match data.labels() {
        Some(labels) => {
            let class = args.class.unwrap_or_else(|| data.classes()[0]);
            let members: Vec<TimeSeries> = data
                .series()
                .iter()
                .zip(labels)
                .filter(|(_, l)| **l == class)
                .map(|(s, _)| s.clone())
                .collect();
            if members.is_empty() {
                return Err(Error::EmptyClass { label: class });
            }
            (data.label_name(class), members)
        }
        None => ("all".to_string(), data.series().to_vec()),
    };

    let mut table = Table::new(
        "repeats",
        &["repeat", "sampled", "length", "objective", "iterations", "diverged"],
    );
    let mut best: Option<(usize, f64, TimeSeries)> = None;
    let mut objectives = Vec::with_capacity(args.repeats);
    for repeat in 0..args.repeats {
        let mut indices: Vec<usize> = (0..members.len()).collect();
        let mut rng = stream_rng(args.seed, &format!("sampling-{repeat}"));
        indices.shuffle(&mut rng);
        indices.truncate(args.sample_size.min(members.len()));
        indices.sort_unstable();
        let sampled: Vec<TimeSeries> = indices.iter().map(|&i| members[i].clone()).collect();
        let length = median_length(&sampled);
        let problem = BarycenterProblem::uniform(sampled, length)?;
        let init = match args.init {
            InitArg::Random => {
                init_random(&problem, derive_seed(args.seed, &format!("init-{repeat}")))?
            }
            InitArg::EuclideanMean => init_euclidean_mean(&problem)?,
        };
        let config = OptimizerConfig {
            max_iterations: args.iterations,
            seed: derive_seed(args.seed, &format!("optimizer-{repeat}")),
            ..OptimizerConfig::default()
        };
        let result = average_once(&problem, gamma, args.method, &init, &config)?;
        let objective = *result.trace.last().expect("trace is never empty");
        objectives.push(objective);
        table.push_row(&[
            repeat.to_string(),
            indices.len().to_string(),
            length.to_string(),
            objective.to_string(),
            (result.trace.len() - 1).to_string(),
            result.diverged.to_string(),
        ]);
        let improves = match &best {
            Some((_, incumbent, _)) => objective < *incumbent,
            None => true,
        };
        if improves {
            best = Some((repeat, objective, result.barycenter));
        }
    }
    let (best_repeat, best_objective, best_series) = best.expect("repeats is positive");

    let mut report = ExperimentReport::new("barycenter");
    report.push_config("data", data.name());
    report.push_config("class", &class_name);
    report.push_config("gamma", args.gamma);
    report.push_config("method", args.method.name());
    report.push_config("init", args.init.name());
    report.push_config("iterations", args.iterations);
    report.push_config("repeats", args.repeats);
    report.push_config("sample_size", args.sample_size);
    report.push_config("seed", args.seed);
    report.push_metric("class_size", members.len());
    report.push_metric("best_repeat", best_repeat);
    report.push_metric("best_objective", best_objective);
    report.push_metric(
        "mean_objective",
        objectives.iter().sum::<f64>() / objectives.len() as f64,
    );
    report.push_table(table);

    if let Some(path) = &args.save_series {
        write_ucr(&Dataset::unlabeled("barycenter", vec![best_series])?, path)?;
    }
    finish(report, started, args.output.as_ref())
}

fn run_kmeans(args: KmeansArgs) -> Result<()> {
    let started = Instant::now();
    let data = load_ucr(&args.data)?;
    let gamma = Gamma::new(args.gamma)?;
    let config = KMeansConfig {
        num_clusters: args.clusters,
        outer_iterations: args.outer_iterations,
        inner_iterations: args.inner_iterations,
        init: match args.init {
            InitArg::Random => CentroidInit::Random,
            InitArg::EuclideanMean => CentroidInit::EuclideanMean,
        },
        method: match args.method {
            MethodArg::Soft => CenterMethod::Soft,
            MethodArg::Dba => CenterMethod::Dba,
            MethodArg::Subgradient => CenterMethod::Subgradient,
        },
        seed: args.seed,
    };
    let result = lloyd_kmeans(data.series(), gamma, &config)?;

    let mut report = ExperimentReport::new("kmeans");
    report.push_config("data", data.name());
    report.push_config("clusters", args.clusters);
    report.push_config("gamma", args.gamma);
    report.push_config("method", args.method.name());
    report.push_config("init", args.init.name());
    report.push_config("outer_iterations", args.outer_iterations);
    report.push_config("inner_iterations", args.inner_iterations);
    report.push_config("seed", args.seed);
    report.push_metric("num_series", data.len());
    report.push_metric(
        "objective",
        result.objective_trace.last().expect("trace is never empty"),
    );
    report.push_metric("outer_iterations_run", result.objective_trace.len() - 1);

    let mut trace = Table::new("objective_trace", &["iteration", "objective"]);
    for (i, value) in result.objective_trace.iter().enumerate() {
        trace.push_row(&[i.to_string(), value.to_string()]);
    }
    report.push_table(trace);

    let mut sizes = vec![0usize; args.clusters];
    for &a in &result.assignments {
        sizes[a] += 1;
    }
    let mut size_table = Table::new("cluster_sizes", &["cluster", "size"]);
    for (cluster, size) in sizes.iter().enumerate() {
        size_table.push_row(&[cluster.to_string(), size.to_string()]);
    }
    report.push_table(size_table);

    let mut assignment_table = Table::new("assignments", &["series", "cluster"]);
    for (series, cluster) in result.assignments.iter().enumerate() {
        assignment_table.push_row(&[series.to_string(), cluster.to_string()]);
    }
    report.push_table(assignment_table);

    if let Some(path) = &args.save_centroids {
        let labels: Vec<i64> = (0..result.centroids.len() as i64).collect();
        write_ucr(
            &Dataset::labeled("centroids", result.centroids.clone(), labels)?,
            path,
        )?;
    }
    finish(report, started, args.output.as_ref())
}

fn run_classify(args: ClassifyArgs) -> Result<()> {
    let started = Instant::now();
    let data = load_ucr(&args.data)?;
    if !data.is_labeled() {
        return Err(Error::InvalidConfig("classification needs labels".into()));
    }
    let parts = split_dataset(&data, &[0.5, 0.25, 0.25], derive_seed(args.seed, "split"))?;
    let (train, validation, test) = (&parts[0], &parts[1], &parts[2]);
    let grid = args.gammas.clone().unwrap_or_else(default_gamma_grid);
    let config = OptimizerConfig {
        max_iterations: args.iterations,
        seed: derive_seed(args.seed, "init"),
        ..OptimizerConfig::default()
    };
    let selection = select_gamma(
        train.series(),
        train.labels().expect("split keeps labels"),
        validation.series(),
        validation.labels().expect("split keeps labels"),
        &grid,
        &config,
    )?;
    let best_validation = selection
        .accuracies
        .iter()
        .map(|(_, a)| *a)
        .fold(f64::NEG_INFINITY, f64::max);
    let test_accuracy = nearest_centroid_accuracy(
        &selection.best_model,
        test.series(),
        test.labels().expect("split keeps labels"),
    )?;

    let mut report = ExperimentReport::new("classify");
    report.push_config("data", data.name());
    report.push_config("candidates", grid.len());
    report.push_config("iterations", args.iterations);
    report.push_config("seed", args.seed);
    report.push_config("train_size", train.len());
    report.push_config("validation_size", validation.len());
    report.push_config("test_size", test.len());
    report.push_metric("best_gamma", selection.best_gamma.value());
    report.push_metric("validation_accuracy", best_validation);
    report.push_metric("test_accuracy", test_accuracy);
    let mut table = Table::new("gamma_search", &["gamma", "validation_accuracy"]);
    for (gamma, accuracy) in &selection.accuracies {
        table.push_row(&[gamma.to_string(), accuracy.to_string()]);
    }
    report.push_table(table);
    finish(report, started, args.output.as_ref())
}

fn run_predict(args: PredictArgs) -> Result<()> {
    let started = Instant::now();
    let data = load_ucr(&args.data)?;
    if !(0.0..1.0).contains(&args.test_fraction) || args.test_fraction <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "test fraction must lie strictly between 0 and 1, got {}",
            args.test_fraction
        )));
    }
    let parts = split_dataset(
        &data,
        &[1.0 - args.test_fraction, args.test_fraction],
        derive_seed(args.seed, "split"),
    )?;
    let train_task = PredictionTask::from_series(parts[0].series(), args.split_fraction)?;
    let test_task = PredictionTask::from_series(parts[1].series(), args.split_fraction)?;
    let loss = match args.loss {
        LossArg::Euclidean => TrainingLoss::Euclidean,
        LossArg::SoftDtw => TrainingLoss::SoftDtw(Gamma::new(args.gamma)?),
    };
    let config = TrainConfig {
        hidden_units: args.hidden_units,
        epochs: args.epochs,
        batch_size: args.batch_size,
        init: if args.warm_start {
            TrainInit::EuclideanWarmStart
        } else {
            TrainInit::Random
        },
        seed: derive_seed(args.seed, "training"),
        ..TrainConfig::default()
    };
    let outcome = train_predictor(&train_task, loss, &config)?;
    let metrics = evaluate_predictor(&outcome.params, &test_task)?;

    let mut report = ExperimentReport::new("predict");
    report.push_config("data", data.name());
    report.push_config("loss", args.loss.name());
    if args.loss == LossArg::SoftDtw {
        report.push_config("gamma", args.gamma);
    }
    report.push_config("split_fraction", args.split_fraction);
    report.push_config("test_fraction", args.test_fraction);
    report.push_config("hidden_units", args.hidden_units);
    report.push_config("epochs", args.epochs);
    report.push_config("batch_size", args.batch_size);
    report.push_config("warm_start", args.warm_start);
    report.push_config("seed", args.seed);
    report.push_metric("train_series", train_task.len());
    report.push_metric("test_series", test_task.len());
    report.push_metric("prefix_length", train_task.input_length());
    report.push_metric("suffix_length", train_task.output_length());
    report.push_metric(
        "final_train_loss",
        outcome.loss_history.last().expect("at least one epoch"),
    );
    report.push_metric("diverged", outcome.diverged);
    report.push_metric("test_mean_dtw", metrics.mean_dtw);
    report.push_metric("test_mean_squared_error", metrics.mean_squared_error);
    let mut table = Table::new("loss_history", &["epoch", "loss"]);
    for (epoch, value) in outcome.loss_history.iter().enumerate() {
        table.push_row(&[epoch.to_string(), value.to_string()]);
    }
    report.push_table(table);

    if let Some(path) = &args.save_model {
        let mut metadata = std::collections::BTreeMap::new();
        metadata.insert("loss".to_string(), args.loss.name().to_string());
        if args.loss == LossArg::SoftDtw {
            metadata.insert("gamma".to_string(), args.gamma.to_string());
        }
        metadata.insert("split_fraction".to_string(), args.split_fraction.to_string());
        metadata.insert("hidden_units".to_string(), args.hidden_units.to_string());
        metadata.insert("epochs".to_string(), args.epochs.to_string());
        metadata.insert("seed".to_string(), args.seed.to_string());
        save_model(&outcome.params, path, &metadata)?;
    }
    finish(report, started, args.output.as_ref())
}

fn random_series(rng: &mut impl Rng, num_features: usize, len: usize, amplitude: f64) -> TimeSeries {
    TimeSeries::new(Array2::from_shape_fn((num_features, len), |_| {
        rng.gen_range(-amplitude..amplitude)
    }))
    .expect("random values are finite")
}

struct CheckOutcome {
    name: &'static str,
    passed: bool,
    detail: String,
    measured: f64,
}

impl CheckOutcome {
    fn print(&self) {
        let status = if self.passed { "PASS" } else { "FAIL" };
        println!("{status} {}: {}", self.name, self.detail);
    }
}

fn check_value_vs_enumeration(cases: usize, seed: u64) -> Result<CheckOutcome> {
    let mut rng = stream_rng(seed, "verify-value");
    let mut max_rel = 0.0f64;
    let mut checks = 0;
    for _ in 0..cases {
        let p = if rng.gen_bool(0.5) { 1 } else { 2 };
        let n = rng.gen_range(1..=5);
        let m = rng.gen_range(1..=5);
        let x = random_series(&mut rng, p, n, 2.0);
        let y = random_series(&mut rng, p, m, 2.0);
        for g in [0.0, 0.1, 1.0, 10.0] {
            let gamma = Gamma::new(g)?;
            let fast = sdtw_value(&x, &y, gamma)?;
            let slow = brute_force_sdtw(&x, &y, gamma)?;
            max_rel = max_rel.max((fast - slow).abs() / slow.abs().max(1.0));
            checks += 1;
        }
    }
    let tolerance = 1e-10;
    Ok(CheckOutcome {
        name: "value-vs-enumeration",
        passed: max_rel <= tolerance,
        detail: format!("max relative error {max_rel:e} over {checks} checks (tolerance {tolerance:e})"),
        measured: max_rel,
    })
}

fn check_gradient_vs_enumeration(cases: usize, seed: u64) -> Result<CheckOutcome> {
    let mut rng = stream_rng(seed, "verify-gradient");
    let mut max_abs = 0.0f64;
    let mut checks = 0;
    for _ in 0..cases {
        let n = rng.gen_range(2..=5);
        let m = rng.gen_range(2..=5);
        let x = random_series(&mut rng, 1, n, 2.0);
        let y = random_series(&mut rng, 1, m, 2.0);
        for g in [0.1, 1.0] {
            let gamma = Gamma::new(g)?;
            let table = sdtw_forward(&x, &y, gamma)?;
            let delta = cost_matrix(&x, &y)?;
            let fast = sdtw_backward(&table, &delta, gamma)?.into_matrix();
            let brute = brute_force_expected_alignment(&x, &y, gamma)?;
            let forward = average_alignment_forward(&x, &y, gamma)?;
            for (a, b) in fast.iter().zip(brute.iter()) {
                max_abs = max_abs.max((a - b).abs());
            }
            for (a, b) in fast.iter().zip(forward.iter()) {
                max_abs = max_abs.max((a - b).abs());
            }
            checks += 1;
        }
    }
    let tolerance = 1e-8;
    Ok(CheckOutcome {
        name: "gradient-vs-enumeration",
        passed: max_abs <= tolerance,
        detail: format!("max absolute error {max_abs:e} over {checks} checks (tolerance {tolerance:e})"),
        measured: max_abs,
    })
}

fn check_gradient_vs_finite_differences(cases: usize, seed: u64) -> Result<CheckOutcome> {
    let mut rng = stream_rng(seed, "verify-fd");
    let mut max_rel = 0.0f64;
    let mut checks = 0;
    let h = 1e-5;
    for _ in 0..cases {
        let n = rng.gen_range(3..=6);
        let m = rng.gen_range(3..=6);
        let x = random_series(&mut rng, 1, n, 1.0);
        let y = random_series(&mut rng, 1, m, 1.0);
        for g in [0.1, 1.0] {
            let gamma = Gamma::new(g)?;
            let (_, gradient) = sdtw_value_and_grad(&x, &y, gamma)?;
            for _ in 0..3 {
                let j = rng.gen_range(0..n);
                let shifted = |delta: f64| -> Result<f64> {
                    let mut values = x.values().clone();
                    values[(0, j)] += delta;
                    sdtw_value(&TimeSeries::new(values)?, &y, gamma)
                };
                let numeric = (shifted(h)? - shifted(-h)?) / (2.0 * h);
                let analytic = gradient[(0, j)];
                max_rel = max_rel.max((analytic - numeric).abs() / (1.0 + numeric.abs()));
                checks += 1;
            }
        }
    }
    let tolerance = 1e-4;
    Ok(CheckOutcome {
        name: "gradient-vs-finite-differences",
        passed: max_rel <= tolerance,
        detail: format!("max relative error {max_rel:e} over {checks} checks (tolerance {tolerance:e})"),
        measured: max_rel,
    })
}

fn check_hard_path_identity(cases: usize, seed: u64) -> Result<CheckOutcome> {
    let mut rng = stream_rng(seed, "verify-path");
    let mut mismatches = 0;
    for _ in 0..cases {
        let n = rng.gen_range(1..=7);
        let m = rng.gen_range(1..=7);
        let x = random_series(&mut rng, 1, n, 2.0);
        let y = random_series(&mut rng, 1, m, 2.0);
        let table = sdtw_forward(&x, &y, Gamma::zero())?;
        let delta = cost_matrix(&x, &y)?;
        let path = optimal_path_backtrack(&table, &delta)?;
        let cost: f64 = path.cells().iter().map(|&(i, j)| delta.values()[(i, j)]).sum();
        if cost.to_bits() != table.value().to_bits() {
            mismatches += 1;
        }
    }
    Ok(CheckOutcome {
        name: "hard-path-cost-identity",
        passed: mismatches == 0,
        detail: format!("{mismatches} of {cases} paths disagree with the table value (bit comparison)"),
        measured: mismatches as f64,
    })
}

fn check_smoothing_bounds(cases: usize, seed: u64) -> Result<CheckOutcome> {
    let mut rng = stream_rng(seed, "verify-bounds");
    let mut worst_slack = f64::INFINITY;
    let mut violations = 0;
    let mut checks = 0;
    for _ in 0..cases {
        let n = rng.gen_range(2..=6);
        let m = rng.gen_range(2..=6);
        let x = random_series(&mut rng, 1, n, 2.0);
        let y = random_series(&mut rng, 1, m, 2.0);
        let hard = sdtw_value(&x, &y, Gamma::zero())?;
        let paths = delannoy(n - 1, m - 1) as f64;
        for g in [0.1, 1.0, 10.0] {
            let gamma = Gamma::new(g)?;
            let soft = sdtw_value(&x, &y, gamma)?;
            let lower = hard - soft;
            let upper = soft + g * paths.ln() - hard;
            worst_slack = worst_slack.min(lower).min(upper);
            if lower < -1e-12 || upper < -1e-12 {
                violations += 1;
            }
            checks += 1;
        }
    }
    Ok(CheckOutcome {
        name: "smoothing-bounds",
        passed: violations == 0,
        detail: format!("{violations} of {checks} checks violate the bounds (worst slack {worst_slack:e})"),
        measured: worst_slack,
    })
}

fn run_verify(args: VerifyArgs) -> Result<i32> {
    let started = Instant::now();
    if args.cases == 0 {
        return Err(Error::InvalidConfig("cases must be positive".into()));
    }
    let outcomes = [
        check_value_vs_enumeration(args.cases, args.seed)?,
        check_gradient_vs_enumeration(args.cases, args.seed)?,
        check_gradient_vs_finite_differences(args.cases, args.seed)?,
        check_hard_path_identity(args.cases, args.seed)?,
        check_smoothing_bounds(args.cases, args.seed)?,
    ];
    let mut report = ExperimentReport::new("verify");
    report.push_config("cases", args.cases);
    report.push_config("seed", args.seed);
    let mut failures = 0;
    for outcome in &outcomes {
        outcome.print();
        let key = outcome.name.replace('-', "_");
        report.push_metric(
            &format!("{key}_status"),
            if outcome.passed { "PASS" } else { "FAIL" },
        );
        report.push_metric(&format!("{key}_measured"), outcome.measured);
        if !outcome.passed {
            failures += 1;
        }
    }
    report.push_metric("failures", failures);
    println!();
    finish(report, started, args.output.as_ref())?;
    Ok(if failures == 0 { 0 } else { 2 })
}
