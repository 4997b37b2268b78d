//! Logistic regression and ReLU multilayer perceptrons trained with
//! mini-batch gradient descent or Adam, plus a plain-text model format.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adversary::{DifferentiableScore, FlatParameterVector};
use crate::error::{RecourseError, Result};
use crate::model::{sigmoid, softplus, FeatureVector, LinearModel, LossKind};
use crate::seed;
use crate::surrogate::Predictor;

pub const DEFAULT_HIDDEN: [usize; 3] = [50, 100, 200];
const MODEL_HEADER: &str = "robust-recourse-model v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    GradientDescent,
    #[default]
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    /// L2 penalty on weights (biases excluded), added to the mean loss.
    pub l2: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 32,
            learning_rate: 1e-3,
            optimizer: Optimizer::Adam,
            l2: 0.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(RecourseError::invalid("batch size must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(RecourseError::invalid("learning rate must be positive"));
        }
        if !(self.l2 >= 0.0) {
            return Err(RecourseError::invalid("l2 penalty must be >= 0"));
        }
        Ok(())
    }
}

/// Fully connected network with ReLU hidden layers and a single linear
/// output unit whose sigmoid is the positive-class probability.
///
/// Parameters are stored flat, layer by layer: the row-major
/// `out × in` weight matrix followed by the `out` biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl MlpModel {
    /// Seeded He-uniform initialization with zero biases.
    pub fn new(sizes: Vec<usize>, seed_value: u64) -> Result<Self> {
        check_sizes(&sizes)?;
        let mut rng = seed::rng(seed_value, seed::stream::INIT, 0);
        let mut params = Vec::with_capacity(param_count(&sizes));
        for w in sizes.windows(2) {
            let bound = (6.0 / w[0] as f64).sqrt();
            for _ in 0..w[0] * w[1] {
                params.push(rng.random_range(-bound..bound));
            }
            params.extend(std::iter::repeat_n(0.0, w[1]));
        }
        Ok(Self { sizes, params })
    }

    pub fn from_parts(sizes: Vec<usize>, params: Vec<f64>) -> Result<Self> {
        check_sizes(&sizes)?;
        let expected = param_count(&sizes);
        if params.len() != expected {
            return Err(RecourseError::DimensionMismatch {
                expected,
                found: params.len(),
            });
        }
        if !params.iter().all(|v| v.is_finite()) {
            return Err(RecourseError::NonFinite("network parameters"));
        }
        Ok(Self { sizes, params })
    }

    /// Layer widths including input and the single output.
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn flatten(&self) -> FlatParameterVector {
        FlatParameterVector::new(self.params.clone()).expect("parameters are finite")
    }

    /// Same architecture with the given flattened parameters.
    pub fn unflatten(&self, flat: &FlatParameterVector) -> Result<Self> {
        Self::from_parts(self.sizes.clone(), flat.values().to_vec())
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        let mut acts = Vec::new();
        forward(&self.sizes, &self.params, x, &mut acts)
    }

    /// `∂score/∂x`.
    pub fn input_gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut acts = Vec::new();
        forward(&self.sizes, &self.params, x, &mut acts);
        let mut grad = vec![0.0; self.params.len()];
        let mut input = vec![0.0; self.input_dim()];
        backward(&self.sizes, &self.params, &acts, 1.0, &mut grad, Some(&mut input));
        input
    }

    /// A network without hidden layers as a linear model.
    pub fn to_linear(&self) -> Option<LinearModel> {
        if self.sizes.len() != 2 {
            return None;
        }
        LinearModel::from_augmented(self.params.clone()).ok()
    }
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 || sizes.contains(&0) || *sizes.last().unwrap() != 1 {
        return Err(RecourseError::invalid(
            "layer sizes need an input width, positive hidden widths, and a single output",
        ));
    }
    Ok(())
}

/// Forward pass; `acts[l]` holds the activations entering layer `l`.
fn forward(sizes: &[usize], params: &[f64], x: &[f64], acts: &mut Vec<Vec<f64>>) -> f64 {
    let layers = sizes.len() - 1;
    acts.resize_with(layers, Vec::new);
    acts[0].clear();
    acts[0].extend_from_slice(x);
    let mut offset = 0;
    let mut score = 0.0;
    for l in 0..layers {
        let (n_in, n_out) = (sizes[l], sizes[l + 1]);
        let w = &params[offset..offset + n_in * n_out];
        let b = &params[offset + n_in * n_out..offset + n_in * n_out + n_out];
        offset += n_in * n_out + n_out;
        let input = std::mem::take(&mut acts[l]);
        if l + 1 == layers {
            score = b[0] + w.iter().zip(&input).map(|(a, c)| a * c).sum::<f64>();
        } else {
            let out = &mut acts[l + 1];
            out.clear();
            for r in 0..n_out {
                let row = &w[r * n_in..(r + 1) * n_in];
                let z = b[r] + row.iter().zip(&input).map(|(a, c)| a * c).sum::<f64>();
                out.push(z.max(0.0));
            }
        }
        acts[l] = input;
    }
    score
}

/// Accumulates `dscore · ∂score/∂params` into `grad` and optionally writes
/// `dscore · ∂score/∂x` into `input_grad`.
fn backward(
    sizes: &[usize],
    params: &[f64],
    acts: &[Vec<f64>],
    dscore: f64,
    grad: &mut [f64],
    input_grad: Option<&mut [f64]>,
) {
    let layers = sizes.len() - 1;
    let mut offsets = Vec::with_capacity(layers);
    let mut offset = 0;
    for l in 0..layers {
        offsets.push(offset);
        offset += sizes[l] * sizes[l + 1] + sizes[l + 1];
    }
    let mut delta = vec![dscore];
    for l in (0..layers).rev() {
        let (n_in, n_out) = (sizes[l], sizes[l + 1]);
        let o = offsets[l];
        let input = &acts[l];
        for r in 0..n_out {
            let dr = delta[r];
            if dr == 0.0 {
                continue;
            }
            let gw = &mut grad[o + r * n_in..o + (r + 1) * n_in];
            for (g, a) in gw.iter_mut().zip(input) {
                *g += dr * a;
            }
            grad[o + n_in * n_out + r] += dr;
        }
        if l == 0 && input_grad.is_none() {
            break;
        }
        let w = &params[o..o + n_in * n_out];
        let mut prev = vec![0.0; n_in];
        for r in 0..n_out {
            let dr = delta[r];
            if dr == 0.0 {
                continue;
            }
            for (p, wv) in prev.iter_mut().zip(&w[r * n_in..(r + 1) * n_in]) {
                *p += dr * wv;
            }
        }
        if l > 0 {
            // ReLU derivative, 0 at 0
            for (p, a) in prev.iter_mut().zip(input) {
                if *a <= 0.0 {
                    *p = 0.0;
                }
            }
        }
        delta = prev;
    }
    if let Some(ig) = input_grad {
        ig.copy_from_slice(&delta);
    }
}

impl DifferentiableScore for MlpModel {
    fn num_params(&self) -> usize {
        self.params.len()
    }

    fn flat_params(&self) -> Vec<f64> {
        self.params.clone()
    }

    fn score_with(&self, params: &[f64], features: &[f64]) -> f64 {
        let mut acts = Vec::new();
        forward(&self.sizes, params, features, &mut acts)
    }

    fn score_grad_with(&self, params: &[f64], features: &[f64], grad: &mut [f64]) -> Result<f64> {
        let mut acts = Vec::new();
        let score = forward(&self.sizes, params, features, &mut acts);
        grad.iter_mut().for_each(|g| *g = 0.0);
        backward(&self.sizes, params, &acts, 1.0, grad, None);
        Ok(score)
    }
}

impl Predictor for MlpModel {
    fn predict_proba(&self, features: &[f64]) -> f64 {
        sigmoid(self.score(features))
    }
}

/// Gradient of the recourse loss `ℓ(score)` toward the positive label with
/// respect to the flattened network parameters.
pub fn mlp_param_gradient(model: &MlpModel, x: &FeatureVector, loss: LossKind) -> Result<FlatParameterVector> {
    if x.dim() != model.input_dim() {
        return Err(RecourseError::DimensionMismatch {
            expected: model.input_dim(),
            found: x.dim(),
        });
    }
    let mut acts = Vec::new();
    let score = forward(&model.sizes, &model.params, x.features(), &mut acts);
    let mut grad = vec![0.0; model.params.len()];
    backward(
        &model.sizes,
        &model.params,
        &acts,
        loss.derivative(score),
        &mut grad,
        None,
    );
    FlatParameterVector::new(grad)
}

fn check_training_data(x: &[Vec<f64>], y: &[u8]) -> Result<usize> {
    if x.is_empty() {
        return Err(RecourseError::EmptyInput("training data"));
    }
    if x.len() != y.len() {
        return Err(RecourseError::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    let d = x[0].len();
    if let Some(row) = x.iter().find(|r| r.len() != d) {
        return Err(RecourseError::DimensionMismatch {
            expected: d,
            found: row.len(),
        });
    }
    if let Some(bad) = y.iter().find(|&&v| v > 1) {
        return Err(RecourseError::invalid(format!("labels must be 0 or 1, found {bad}")));
    }
    if !y.contains(&0) || !y.contains(&1) {
        return Err(RecourseError::SingleClass);
    }
    Ok(d)
}

/// Mean binary cross-entropy of a network on labelled data, plus the L2 term.
pub fn mean_bce(model: &MlpModel, x: &[Vec<f64>], y: &[u8], l2: f64) -> f64 {
    let mut acts = Vec::new();
    let data: f64 = x
        .iter()
        .zip(y)
        .map(|(row, &label)| {
            let z = forward(&model.sizes, &model.params, row, &mut acts);
            softplus(z) - f64::from(label) * z
        })
        .sum::<f64>()
        / x.len() as f64;
    data + 0.5 * l2 * weight_norm_sq(&model.sizes, &model.params)
}

fn weight_mask(sizes: &[usize]) -> Vec<bool> {
    let mut mask = Vec::with_capacity(param_count(sizes));
    for w in sizes.windows(2) {
        mask.extend(std::iter::repeat_n(true, w[0] * w[1]));
        mask.extend(std::iter::repeat_n(false, w[1]));
    }
    mask
}

fn weight_norm_sq(sizes: &[usize], params: &[f64]) -> f64 {
    weight_mask(sizes)
        .iter()
        .zip(params)
        .filter(|(m, _)| **m)
        .map(|(_, v)| v * v)
        .sum()
}

/// Trained network with the loss before training and after every epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: MlpModel,
    pub losses: Vec<f64>,
}

/// Mini-batch training of `init` on mean BCE. Batches are drawn from a
/// seeded shuffle each epoch.
pub fn fit_network(init: MlpModel, x: &[Vec<f64>], y: &[u8], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let d = check_training_data(x, y)?;
    if d != init.input_dim() {
        return Err(RecourseError::DimensionMismatch {
            expected: init.input_dim(),
            found: d,
        });
    }
    let mut model = init;
    let n = x.len();
    let k = model.params.len();
    let mask = weight_mask(&model.sizes);
    let mut grad = vec![0.0; k];
    let mut m = vec![0.0; k];
    let mut v = vec![0.0; k];
    let (beta1, beta2, eps) = (0.9f64, 0.999f64, 1e-8);
    let mut t = 0i32;
    let mut order: Vec<usize> = (0..n).collect();
    let mut acts = Vec::new();
    let mut losses = vec![mean_bce(&model, x, y, cfg.l2)];

    for epoch in 0..cfg.epochs {
        let mut rng = seed::rng(cfg.seed, seed::stream::BATCH, epoch as u64);
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let z = forward(&model.sizes, &model.params, &x[i], &mut acts);
                let dz = (sigmoid(z) - f64::from(y[i])) * scale;
                backward(&model.sizes, &model.params, &acts, dz, &mut grad, None);
            }
            if cfg.l2 > 0.0 {
                for ((g, p), w) in grad.iter_mut().zip(&model.params).zip(&mask) {
                    if *w {
                        *g += cfg.l2 * p;
                    }
                }
            }
            match cfg.optimizer {
                Optimizer::GradientDescent => {
                    for (p, g) in model.params.iter_mut().zip(&grad) {
                        *p -= cfg.learning_rate * g;
                    }
                }
                Optimizer::Adam => {
                    t += 1;
                    let c1 = 1.0 - beta1.powi(t);
                    let c2 = 1.0 - beta2.powi(t);
                    for i in 0..k {
                        m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
                        v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
                        model.params[i] -= cfg.learning_rate * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
                    }
                }
            }
        }
        let loss = mean_bce(&model, x, y, cfg.l2);
        if !loss.is_finite() {
            return Err(RecourseError::NonFinite("training loss"));
        }
        log::debug!("epoch {epoch}: loss {loss:.6}");
        losses.push(loss);
    }
    Ok(TrainOutcome { model, losses })
}

/// Logistic regression from zero initialization.
pub fn train_logreg(x: &[Vec<f64>], y: &[u8], cfg: &TrainConfig) -> Result<LinearModel> {
    let d = check_training_data(x, y)?;
    let init = MlpModel::from_parts(vec![d, 1], vec![0.0; d + 1])?;
    let out = fit_network(init, x, y, cfg)?;
    Ok(out.model.to_linear().expect("no hidden layers"))
}

/// Network with the given hidden widths from a seeded initialization.
pub fn train_mlp(x: &[Vec<f64>], y: &[u8], hidden: &[usize], cfg: &TrainConfig) -> Result<MlpModel> {
    let d = check_training_data(x, y)?;
    let mut sizes = vec![d];
    sizes.extend_from_slice(hidden);
    sizes.push(1);
    let init = MlpModel::new(sizes, cfg.seed)?;
    Ok(fit_network(init, x, y, cfg)?.model)
}

/// A trained classifier of either family.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Linear(LinearModel),
    Mlp(MlpModel),
}

impl TrainedModel {
    pub fn input_dim(&self) -> usize {
        match self {
            TrainedModel::Linear(m) => m.dim(),
            TrainedModel::Mlp(m) => m.input_dim(),
        }
    }

    pub fn as_linear(&self) -> Option<&LinearModel> {
        match self {
            TrainedModel::Linear(m) => Some(m),
            TrainedModel::Mlp(_) => None,
        }
    }

    /// Versioned text form: header, kind, layer widths, parameter count, then
    /// one parameter per line with 17 significant digits.
    pub fn to_text(&self) -> String {
        let (kind, sizes, params): (&str, Vec<usize>, &[f64]) = match self {
            TrainedModel::Linear(m) => ("linear", vec![m.dim(), 1], m.augmented()),
            TrainedModel::Mlp(m) => ("mlp", m.sizes.clone(), &m.params),
        };
        let mut out = String::new();
        let _ = writeln!(out, "{MODEL_HEADER}");
        let _ = writeln!(out, "kind {kind}");
        let widths: Vec<String> = sizes.iter().map(|s| s.to_string()).collect();
        let _ = writeln!(out, "layers {}", widths.join(" "));
        let _ = writeln!(out, "params {}", params.len());
        for p in params {
            let _ = writeln!(out, "{p:.16e}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| RecourseError::Parse(format!("model file ends before {what}")))
        };
        if next("header")?.trim() != MODEL_HEADER {
            return Err(RecourseError::Parse(format!("expected header `{MODEL_HEADER}`")));
        }
        let kind = field(next("kind")?, "kind")?.to_string();
        let sizes = field(next("layers")?, "layers")?
            .split_whitespace()
            .map(|s| {
                s.parse::<usize>()
                    .map_err(|e| RecourseError::Parse(format!("layer width: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let count: usize = field(next("params")?, "params")?
            .parse()
            .map_err(|e| RecourseError::Parse(format!("parameter count: {e}")))?;
        let mut params = Vec::with_capacity(count);
        for i in 0..count {
            let line = next("all parameters")?;
            params.push(
                line.trim()
                    .parse::<f64>()
                    .map_err(|e| RecourseError::Parse(format!("parameter {i}: {e}")))?,
            );
        }
        match kind.as_str() {
            "linear" => {
                if sizes.len() != 2 || sizes[1] != 1 || params.len() != sizes[0] + 1 {
                    return Err(RecourseError::Parse("linear model shape mismatch".into()));
                }
                Ok(TrainedModel::Linear(LinearModel::from_augmented(params)?))
            }
            "mlp" => Ok(TrainedModel::Mlp(MlpModel::from_parts(sizes, params)?)),
            other => Err(RecourseError::Parse(format!("unknown model kind `{other}`"))),
        }
    }
}

fn field<'a>(line: &'a str, name: &str) -> Result<&'a str> {
    line.trim()
        .strip_prefix(name)
        .map(str::trim)
        .ok_or_else(|| RecourseError::Parse(format!("expected `{name}` line")))
}

impl Predictor for TrainedModel {
    fn predict_proba(&self, features: &[f64]) -> f64 {
        match self {
            TrainedModel::Linear(m) => m.predict_proba(features),
            TrainedModel::Mlp(m) => m.predict_proba(features),
        }
    }
}

/// Fraction of rows whose predicted label (probability ≥ 0.5) matches `y`.
pub fn accuracy<P: Predictor + ?Sized>(model: &P, x: &[Vec<f64>], y: &[u8]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let hits = x
        .iter()
        .zip(y)
        .filter(|(row, &label)| u8::from(model.predict_proba(row) >= 0.5) == label)
        .count();
    hits as f64 / x.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_pair_gets_positive_weight() {
        let x = vec![vec![-1.0], vec![1.0]];
        let cfg = TrainConfig {
            learning_rate: 0.1,
            ..Default::default()
        };
        let m = train_logreg(&x, &[0, 1], &cfg).unwrap();
        assert!(m.weights()[0] > 0.0);
        let flipped = train_logreg(&x, &[1, 0], &cfg).unwrap();
        assert!(flipped.weights()[0] < 0.0);
        assert!((flipped.weights()[0] + m.weights()[0]).abs() < 1e-12);
    }

    #[test]
    fn single_class_is_rejected() {
        let x = vec![vec![0.0], vec![1.0]];
        assert!(matches!(
            train_logreg(&x, &[1, 1], &TrainConfig::default()),
            Err(RecourseError::SingleClass)
        ));
    }

    #[test]
    fn output_bias_gradient_is_sigmoid_minus_one() {
        let m = MlpModel::new(vec![3, 4, 1], 9).unwrap();
        let x = FeatureVector::new(vec![0.3, -0.2, 0.8]).unwrap();
        let g = mlp_param_gradient(&m, &x, LossKind::BinaryCrossEntropy).unwrap();
        let z = m.score(x.features());
        assert!((g.values().last().unwrap() - (sigmoid(z) - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn zero_network_has_zero_hidden_gradients() {
        let sizes = vec![2, 3, 1];
        let m = MlpModel::from_parts(sizes.clone(), vec![0.0; param_count(&sizes)]).unwrap();
        let x = FeatureVector::new(vec![1.0, 2.0]).unwrap();
        let g = mlp_param_gradient(&m, &x, LossKind::BinaryCrossEntropy).unwrap();
        let first_layer = 2 * 3 + 3;
        assert!(g.values()[..first_layer].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn text_round_trip_is_exact() {
        let m = TrainedModel::Mlp(MlpModel::new(vec![3, 5, 1], 1).unwrap());
        assert_eq!(TrainedModel::from_text(&m.to_text()).unwrap(), m);
        let l = TrainedModel::Linear(LinearModel::new(vec![0.1, 1.0 / 3.0], -2.5e-7).unwrap());
        assert_eq!(TrainedModel::from_text(&l.to_text()).unwrap(), l);
        assert!(TrainedModel::from_text("nonsense").is_err());
    }

    #[test]
    fn flatten_round_trip() {
        let m = MlpModel::new(vec![4, 6, 2, 1], 3).unwrap();
        assert_eq!(m.unflatten(&m.flatten()).unwrap(), m);
    }
}
