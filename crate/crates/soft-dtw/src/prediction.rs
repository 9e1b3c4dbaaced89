//! Multistep-ahead forecasting trained under the smoothed alignment loss.
//!
//! Every series of length `n` is split at step `t = floor(fraction * n)`
//! into an observed prefix and a future suffix. A one-hidden-layer network
//! maps the flattened prefix to the flattened suffix and is trained with
//! Adam, either on the squared Euclidean error or on the smoothed alignment
//! discrepancy between the predicted and true suffixes, whose exact
//! gradient feeds the backward pass.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use ndarray::{Array, Array1, Array2, Dimension, Zip};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::dp::{sdtw_value, sdtw_value_and_grad};
use crate::error::{Error, Result};
use crate::seeding::stream_rng;
use crate::series::{Gamma, TimeSeries};

/// A supervised forecasting problem: observed prefixes paired with the
/// future suffixes the model must produce.
#[derive(Debug, Clone)]
pub struct PredictionTask {
    inputs: Vec<TimeSeries>,
    targets: Vec<TimeSeries>,
    split_step: usize,
}

impl PredictionTask {
    /// Splits every series at `t = floor(fraction * n)`. All series must
    /// share one length so the network dimensions are well defined.
    pub fn from_series(series: &[TimeSeries], fraction: f64) -> Result<PredictionTask> {
        if series.is_empty() {
            return Err(Error::EmptyInput("prediction series"));
        }
        if !fraction.is_finite() || fraction <= 0.0 || fraction >= 1.0 {
            return Err(Error::InvalidConfig(format!(
                "split fraction must lie strictly between 0 and 1, got {fraction}"
            )));
        }
        let n = series[0].len();
        let p = series[0].num_features();
        if series.iter().any(|s| s.len() != n) {
            return Err(Error::UnequalLengths("prediction task"));
        }
        if let Some(other) = series.iter().find(|s| s.num_features() != p) {
            return Err(Error::FeatureDimMismatch {
                x: p,
                y: other.num_features(),
            });
        }
        let t = (fraction * n as f64).floor() as usize;
        if t == 0 || t >= n {
            return Err(Error::DegenerateSplit {
                fraction,
                length: n,
            });
        }
        let mut inputs = Vec::with_capacity(series.len());
        let mut targets = Vec::with_capacity(series.len());
        for s in series {
            let (prefix, suffix) = s.split_at_step(t)?;
            inputs.push(prefix);
            targets.push(suffix);
        }
        Ok(PredictionTask {
            inputs,
            targets,
            split_step: t,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[TimeSeries] {
        &self.inputs
    }

    pub fn targets(&self) -> &[TimeSeries] {
        &self.targets
    }

    pub fn split_step(&self) -> usize {
        self.split_step
    }

    pub fn num_features(&self) -> usize {
        self.inputs[0].num_features()
    }

    pub fn input_length(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn output_length(&self) -> usize {
        self.targets[0].len()
    }
}

/// Weights of the one-hidden-layer network: a sigmoid layer followed by a
/// linear readout.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl MlpParams {
    /// Uniform init scaled by each layer's fan-in and fan-out; biases start
    /// at zero.
    pub fn random(input_dim: usize, hidden_dim: usize, output_dim: usize, seed: u64) -> Self {
        let mut rng = stream_rng(seed, "mlp-init");
        let mut layer = |rows: usize, cols: usize| {
            let bound = (6.0 / (rows + cols) as f64).sqrt();
            Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-bound..bound))
        };
        let w1 = layer(hidden_dim, input_dim);
        let w2 = layer(output_dim, hidden_dim);
        MlpParams {
            w1,
            b1: Array1::zeros(hidden_dim),
            w2,
            b2: Array1::zeros(output_dim),
        }
    }

    fn zeros_like(&self) -> Self {
        MlpParams {
            w1: Array2::zeros(self.w1.raw_dim()),
            b1: Array1::zeros(self.b1.raw_dim()),
            w2: Array2::zeros(self.w2.raw_dim()),
            b2: Array1::zeros(self.b2.raw_dim()),
        }
    }

    /// `(input, hidden, output)` dimensions.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.w1.ncols(), self.w1.nrows(), self.w2.nrows())
    }

    pub fn is_finite(&self) -> bool {
        self.w1.iter().all(|v| v.is_finite())
            && self.b1.iter().all(|v| v.is_finite())
            && self.w2.iter().all(|v| v.is_finite())
            && self.b2.iter().all(|v| v.is_finite())
    }
}

/// Flattens a series time-major: all features of step 0, then of step 1,
/// and so on.
pub fn flatten_series(x: &TimeSeries) -> Array1<f64> {
    Array1::from_iter(x.values().t().iter().copied())
}

/// Inverse of [`flatten_series`] for a known feature count.
pub fn unflatten_series(flat: &Array1<f64>, num_features: usize) -> Result<TimeSeries> {
    if num_features == 0 || !flat.len().is_multiple_of(num_features) {
        return Err(Error::ShapeMismatch {
            what: "flattened series",
            expected: (num_features.max(1), flat.len() / num_features.max(1)),
            got: (1, flat.len()),
        });
    }
    let n = flat.len() / num_features;
    let values = Array2::from_shape_fn((num_features, n), |(i, j)| flat[j * num_features + i]);
    TimeSeries::new(values)
}

fn sigmoid(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

fn forward_pass(params: &MlpParams, input: &Array1<f64>) -> (Array1<f64>, Array1<f64>) {
    let hidden = (params.w1.dot(input) + &params.b1).mapv(sigmoid);
    let output = params.w2.dot(&hidden) + &params.b2;
    (hidden, output)
}

/// Runs the network on an observed prefix and reshapes the output into a
/// series with the same feature count.
pub fn predict_series(params: &MlpParams, input: &TimeSeries) -> Result<TimeSeries> {
    let flat = flatten_series(input);
    if flat.len() != params.w1.ncols() {
        return Err(Error::ShapeMismatch {
            what: "network input",
            expected: (1, params.w1.ncols()),
            got: (1, flat.len()),
        });
    }
    let (_, output) = forward_pass(params, &flat);
    unflatten_series(&output, input.num_features())
}

/// Which per-example loss drives training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrainingLoss {
    /// Sum of squared errors over the predicted suffix.
    Euclidean,
    /// Smoothed alignment discrepancy between prediction and truth; the
    /// gamma must be positive so the loss stays differentiable.
    SoftDtw(Gamma),
}

fn check_loss(loss: TrainingLoss) -> Result<()> {
    if let TrainingLoss::SoftDtw(gamma) = loss {
        if gamma.is_zero() {
            return Err(Error::GammaContract {
                operation: "training loss",
                requirement: "> 0",
                got: 0.0,
            });
        }
    }
    Ok(())
}

fn check_prediction_shape(prediction: &TimeSeries, target: &TimeSeries) -> Result<()> {
    if prediction.values().dim() != target.values().dim() {
        return Err(Error::ShapeMismatch {
            what: "predicted suffix",
            expected: target.values().dim(),
            got: prediction.values().dim(),
        });
    }
    Ok(())
}

fn example_loss(
    params: &MlpParams,
    input: &TimeSeries,
    target: &TimeSeries,
    loss: TrainingLoss,
) -> Result<f64> {
    let prediction = predict_series(params, input)?;
    match loss {
        TrainingLoss::Euclidean => {
            check_prediction_shape(&prediction, target)?;
            Ok((prediction.values() - target.values())
                .iter()
                .map(|d| d * d)
                .sum())
        }
        TrainingLoss::SoftDtw(gamma) => sdtw_value(&prediction, target, gamma),
    }
}

/// Mean per-example loss over the whole task.
pub fn training_loss(params: &MlpParams, task: &PredictionTask, loss: TrainingLoss) -> Result<f64> {
    check_loss(loss)?;
    let losses: Vec<f64> = task
        .inputs
        .par_iter()
        .zip(task.targets.par_iter())
        .map(|(input, target)| example_loss(params, input, target, loss))
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

fn example_grad(
    params: &MlpParams,
    input: &TimeSeries,
    target: &TimeSeries,
    loss: TrainingLoss,
) -> Result<(f64, MlpParams)> {
    let flat_input = flatten_series(input);
    let (hidden, output) = forward_pass(params, &flat_input);
    let prediction = unflatten_series(&output, input.num_features())?;

    let (value, output_grad) = match loss {
        TrainingLoss::Euclidean => {
            check_prediction_shape(&prediction, target)?;
            let diff = prediction.values() - target.values();
            let value = diff.iter().map(|d| d * d).sum();
            (value, 2.0 * diff)
        }
        TrainingLoss::SoftDtw(gamma) => sdtw_value_and_grad(&prediction, target, gamma)?,
    };
    let flat_output_grad = Array1::from_iter(output_grad.t().iter().copied());

    let hidden_grad = params.w2.t().dot(&flat_output_grad);
    let pre_activation_grad = &hidden_grad * &hidden * &(1.0 - &hidden);
    let grads = MlpParams {
        w1: outer(&pre_activation_grad, &flat_input),
        b1: pre_activation_grad,
        w2: outer(&flat_output_grad, &hidden),
        b2: flat_output_grad,
    };
    Ok((value, grads))
}

fn outer(column: &Array1<f64>, row: &Array1<f64>) -> Array2<f64> {
    let mut result = Array2::zeros((column.len(), row.len()));
    for (i, c) in column.iter().enumerate() {
        for (j, r) in row.iter().enumerate() {
            result[(i, j)] = c * r;
        }
    }
    result
}

fn accumulate(total: &mut MlpParams, grads: &MlpParams, scale: f64) {
    total.w1.scaled_add(scale, &grads.w1);
    total.b1.scaled_add(scale, &grads.b1);
    total.w2.scaled_add(scale, &grads.w2);
    total.b2.scaled_add(scale, &grads.b2);
}

fn batch_grad(
    params: &MlpParams,
    task: &PredictionTask,
    indices: &[usize],
    loss: TrainingLoss,
) -> Result<(f64, MlpParams)> {
    let per_example: Vec<(f64, MlpParams)> = indices
        .par_iter()
        .map(|&i| example_grad(params, &task.inputs[i], &task.targets[i], loss))
        .collect::<Result<_>>()?;
    let scale = 1.0 / indices.len() as f64;
    let mut value = 0.0;
    let mut total = params.zeros_like();
    for (v, grads) in &per_example {
        value += v * scale;
        accumulate(&mut total, grads, scale);
    }
    Ok((value, total))
}

/// Mean loss and its gradient with respect to every network parameter.
pub fn training_grad(
    params: &MlpParams,
    task: &PredictionTask,
    loss: TrainingLoss,
) -> Result<(f64, MlpParams)> {
    check_loss(loss)?;
    if task.is_empty() {
        return Err(Error::EmptyInput("prediction task"));
    }
    let indices: Vec<usize> = (0..task.len()).collect();
    batch_grad(params, task, &indices, loss)
}

#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates, one slot per parameter array.
#[derive(Debug, Clone)]
pub struct AdamState {
    first: MlpParams,
    second: MlpParams,
    step: u64,
}

impl AdamState {
    pub fn new(params: &MlpParams) -> Self {
        AdamState {
            first: params.zeros_like(),
            second: params.zeros_like(),
            step: 0,
        }
    }
}

fn adam_update<D: Dimension>(
    theta: &mut Array<f64, D>,
    grad: &Array<f64, D>,
    first: &mut Array<f64, D>,
    second: &mut Array<f64, D>,
    config: &AdamConfig,
    first_correction: f64,
    second_correction: f64,
) {
    Zip::from(theta)
        .and(grad)
        .and(first)
        .and(second)
        .for_each(|t, &g, m, v| {
            *m = config.beta1 * *m + (1.0 - config.beta1) * g;
            *v = config.beta2 * *v + (1.0 - config.beta2) * g * g;
            let m_hat = *m / first_correction;
            let v_hat = *v / second_correction;
            *t -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
        });
}

/// One bias-corrected Adam update of every parameter array in place.
pub fn adam_step(
    params: &mut MlpParams,
    grads: &MlpParams,
    state: &mut AdamState,
    config: &AdamConfig,
) {
    state.step += 1;
    let first_correction = 1.0 - config.beta1.powi(state.step as i32);
    let second_correction = 1.0 - config.beta2.powi(state.step as i32);
    adam_update(
        &mut params.w1,
        &grads.w1,
        &mut state.first.w1,
        &mut state.second.w1,
        config,
        first_correction,
        second_correction,
    );
    adam_update(
        &mut params.b1,
        &grads.b1,
        &mut state.first.b1,
        &mut state.second.b1,
        config,
        first_correction,
        second_correction,
    );
    adam_update(
        &mut params.w2,
        &grads.w2,
        &mut state.first.w2,
        &mut state.second.w2,
        config,
        first_correction,
        second_correction,
    );
    adam_update(
        &mut params.b2,
        &grads.b2,
        &mut state.first.b2,
        &mut state.second.b2,
        config,
        first_correction,
        second_correction,
    );
}

/// How the network weights start out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainInit {
    /// Seeded random weights.
    Random,
    /// First train the same number of epochs under the squared Euclidean
    /// loss, then continue under the requested loss from those weights.
    /// Identical to `Random` when the requested loss is already Euclidean.
    EuclideanWarmStart,
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub hidden_units: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub init: TrainInit,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden_units: 64,
            epochs: 200,
            batch_size: 16,
            adam: AdamConfig::default(),
            init: TrainInit::Random,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: MlpParams,
    /// Full-task loss after every epoch; with a warm start the first
    /// `epochs` entries come from the Euclidean phase.
    pub loss_history: Vec<f64>,
    /// Set when a non-finite loss aborted training early.
    pub diverged: bool,
}

fn train_phase(
    params: &mut MlpParams,
    task: &PredictionTask,
    loss: TrainingLoss,
    config: &TrainConfig,
    rng: &mut impl Rng,
    history: &mut Vec<f64>,
) -> Result<bool> {
    let mut state = AdamState::new(params);
    let mut indices: Vec<usize> = (0..task.len()).collect();
    for _ in 0..config.epochs {
        indices.shuffle(rng);
        for batch in indices.chunks(config.batch_size.max(1)) {
            let (_, grads) = batch_grad(params, task, batch, loss)?;
            adam_step(params, &grads, &mut state, &config.adam);
        }
        let epoch_loss = training_loss(params, task, loss)?;
        history.push(epoch_loss);
        if !epoch_loss.is_finite() {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Trains the network with shuffled mini-batches of Adam steps. Training
/// aborts with `diverged` set as soon as an epoch loss turns non-finite.
pub fn train_predictor(
    task: &PredictionTask,
    loss: TrainingLoss,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    check_loss(loss)?;
    if task.is_empty() {
        return Err(Error::EmptyInput("prediction task"));
    }
    if config.hidden_units == 0 || config.epochs == 0 {
        return Err(Error::InvalidConfig(
            "hidden_units and epochs must be positive".into(),
        ));
    }
    let input_dim = task.num_features() * task.input_length();
    let output_dim = task.num_features() * task.output_length();
    let mut params = MlpParams::random(input_dim, config.hidden_units, output_dim, config.seed);
    let mut rng = stream_rng(config.seed, "training-batches");
    let mut history = Vec::new();

    let warm_start =
        config.init == TrainInit::EuclideanWarmStart && loss != TrainingLoss::Euclidean;
    if warm_start {
        let diverged = train_phase(
            &mut params,
            task,
            TrainingLoss::Euclidean,
            config,
            &mut rng,
            &mut history,
        )?;
        if diverged {
            return Ok(TrainOutcome {
                params,
                loss_history: history,
                diverged: true,
            });
        }
    }
    let diverged = train_phase(&mut params, task, loss, config, &mut rng, &mut history)?;
    Ok(TrainOutcome {
        params,
        loss_history: history,
        diverged,
    })
}

/// Test-set quality of a trained predictor.
#[derive(Debug, Clone, Copy)]
pub struct PredictionMetrics {
    /// Mean hard alignment cost between predicted and true suffixes.
    pub mean_dtw: f64,
    /// Mean squared Euclidean error between predicted and true suffixes.
    pub mean_squared_error: f64,
}

pub fn evaluate_predictor(
    params: &MlpParams,
    task: &PredictionTask,
) -> Result<PredictionMetrics> {
    if task.is_empty() {
        return Err(Error::EmptyInput("prediction task"));
    }
    let scores: Vec<(f64, f64)> = task
        .inputs
        .par_iter()
        .zip(task.targets.par_iter())
        .map(|(input, target)| -> Result<(f64, f64)> {
            let prediction = predict_series(params, input)?;
            let dtw = sdtw_value(&prediction, target, Gamma::zero())?;
            let squared: f64 = prediction
                .values()
                .iter()
                .zip(target.values().iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            Ok((dtw, squared))
        })
        .collect::<Result<_>>()?;
    let count = scores.len() as f64;
    Ok(PredictionMetrics {
        mean_dtw: scores.iter().map(|(d, _)| d).sum::<f64>() / count,
        mean_squared_error: scores.iter().map(|(_, s)| s).sum::<f64>() / count,
    })
}

const MODEL_MAGIC: &[u8; 8] = b"SDTWMLP1";

/// Writes the weights as little-endian binary next to a `.meta` text
/// sidecar holding the given key-value pairs, sorted by key.
pub fn save_model(
    params: &MlpParams,
    path: &Path,
    metadata: &BTreeMap<String, String>,
) -> Result<()> {
    let (input_dim, hidden_dim, output_dim) = params.dims();
    let mut bytes = Vec::with_capacity(
        8 + 12 + 8 * (params.w1.len() + params.b1.len() + params.w2.len() + params.b2.len()),
    );
    bytes.extend_from_slice(MODEL_MAGIC);
    for dim in [input_dim, hidden_dim, output_dim] {
        bytes.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    for array in [&params.w1, &params.w2] {
        for v in array.iter() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    for array in [&params.b1, &params.b2] {
        for v in array.iter() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, bytes)?;

    let mut sidecar = fs::File::create(path.with_extension(format!(
        "{}meta",
        path.extension()
            .map(|e| format!("{}.", e.to_string_lossy()))
            .unwrap_or_default()
    )))?;
    for (key, value) in metadata {
        writeln!(sidecar, "{key}: {value}")?;
    }
    Ok(())
}

fn read_f64s(bytes: &[u8], offset: &mut usize, count: usize) -> Result<Vec<f64>> {
    let end = *offset + 8 * count;
    if bytes.len() < end {
        return Err(Error::ModelFormat("file truncated".into()));
    }
    let values = bytes[*offset..end]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of eight bytes")))
        .collect();
    *offset = end;
    Ok(values)
}

/// Reads a model written by [`save_model`]; the sidecar is optional and an
/// absent one yields empty metadata.
pub fn load_model(path: &Path) -> Result<(MlpParams, BTreeMap<String, String>)> {
    let bytes = fs::read(path)?;
    if bytes.len() < 20 || &bytes[..8] != MODEL_MAGIC {
        return Err(Error::ModelFormat("missing model header".into()));
    }
    let mut dims = [0usize; 3];
    for (i, dim) in dims.iter_mut().enumerate() {
        let start = 8 + 4 * i;
        *dim = u32::from_le_bytes(bytes[start..start + 4].try_into().expect("four bytes"))
            as usize;
    }
    let [input_dim, hidden_dim, output_dim] = dims;
    if input_dim == 0 || hidden_dim == 0 || output_dim == 0 {
        return Err(Error::ModelFormat("zero dimension in header".into()));
    }
    let mut offset = 20;
    let w1 = read_f64s(&bytes, &mut offset, hidden_dim * input_dim)?;
    let w2 = read_f64s(&bytes, &mut offset, output_dim * hidden_dim)?;
    let b1 = read_f64s(&bytes, &mut offset, hidden_dim)?;
    let b2 = read_f64s(&bytes, &mut offset, output_dim)?;
    if offset != bytes.len() {
        return Err(Error::ModelFormat(format!(
            "{} unexpected trailing bytes",
            bytes.len() - offset
        )));
    }
    let params = MlpParams {
        w1: Array2::from_shape_vec((hidden_dim, input_dim), w1)
            .map_err(|e| Error::ModelFormat(e.to_string()))?,
        b1: Array1::from_vec(b1),
        w2: Array2::from_shape_vec((output_dim, hidden_dim), w2)
            .map_err(|e| Error::ModelFormat(e.to_string()))?,
        b2: Array1::from_vec(b2),
    };
    if !params.is_finite() {
        return Err(Error::ModelFormat("non-finite parameter value".into()));
    }

    let sidecar_path = path.with_extension(format!(
        "{}meta",
        path.extension()
            .map(|e| format!("{}.", e.to_string_lossy()))
            .unwrap_or_default()
    ));
    let mut metadata = BTreeMap::new();
    if sidecar_path.exists() {
        for line in fs::read_to_string(&sidecar_path)?.lines() {
            if let Some((key, value)) = line.split_once(": ") {
                metadata.insert(key.to_string(), value.to_string());
            }
        }
    }
    Ok((params, metadata))
}
