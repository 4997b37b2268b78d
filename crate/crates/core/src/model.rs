//! Domain types: instances, linear models, the model-change neighborhood,
//! losses, and the price functional
//!
//! ```text
//! J(x, θ) = ℓ(θᵀx̃) + λ · ‖x − x0‖₁
//! ```
//!
//! where `x̃` is `x` augmented with a constant intercept coordinate equal to
//! one. The intercept coordinate is part of every model parameter vector
//! (and may be perturbed by the adversary) but never contributes to the
//! implementation cost.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{RecourseError, Result};

/// Value of the intercept slot of every augmented instance.
pub const INTERCEPT_VALUE: f64 = 1.0;

/// Logistic sigmoid, evaluated without overflow for large `|z|`.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)`.
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Inverse of [`sigmoid`].
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn check_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(RecourseError::NonFinite(what))
    }
}

/// An instance in scaled feature space together with its intercept slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    augmented: Vec<f64>,
}

impl FeatureVector {
    pub fn new(features: Vec<f64>) -> Result<Self> {
        check_finite(&features, "feature vector")?;
        let mut augmented = features;
        augmented.push(INTERCEPT_VALUE);
        Ok(Self { augmented })
    }

    /// Builds from a vector that already carries the intercept slot.
    pub fn from_augmented(augmented: Vec<f64>) -> Result<Self> {
        check_finite(&augmented, "feature vector")?;
        match augmented.last() {
            Some(&v) if v == INTERCEPT_VALUE => Ok(Self { augmented }),
            Some(_) => Err(RecourseError::invalid(
                "intercept slot of an augmented instance must equal 1",
            )),
            None => Err(RecourseError::EmptyInput("augmented instance")),
        }
    }

    /// Number of features `d` (the intercept slot is not counted).
    pub fn dim(&self) -> usize {
        self.augmented.len() - 1
    }

    pub fn features(&self) -> &[f64] {
        &self.augmented[..self.dim()]
    }

    pub fn augmented(&self) -> &[f64] {
        &self.augmented
    }

    pub fn into_features(mut self) -> Vec<f64> {
        self.augmented.pop();
        self.augmented
    }

    /// L1 distance between the feature parts of two instances.
    pub fn l1_distance(&self, other: &FeatureVector) -> f64 {
        self.features()
            .iter()
            .zip(other.features())
            .map(|(a, b)| (a - b).abs())
            .sum()
    }
}

/// A linear score `θᵀx̃`, stored as the augmented vector `[w_0 .. w_{d-1}, b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    params: Vec<f64>,
}

impl LinearModel {
    pub fn new(weights: Vec<f64>, intercept: f64) -> Result<Self> {
        let mut params = weights;
        params.push(intercept);
        check_finite(&params, "linear model")?;
        Ok(Self { params })
    }

    pub fn from_augmented(params: Vec<f64>) -> Result<Self> {
        if params.is_empty() {
            return Err(RecourseError::EmptyInput("linear model parameters"));
        }
        check_finite(&params, "linear model")?;
        Ok(Self { params })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            params: vec![0.0; dim + 1],
        }
    }

    pub fn dim(&self) -> usize {
        self.params.len() - 1
    }

    pub fn weights(&self) -> &[f64] {
        &self.params[..self.dim()]
    }

    pub fn intercept(&self) -> f64 {
        self.params[self.dim()]
    }

    pub fn augmented(&self) -> &[f64] {
        &self.params
    }

    pub fn into_augmented(self) -> Vec<f64> {
        self.params
    }

    pub fn check_dim(&self, x: &FeatureVector) -> Result<()> {
        if x.dim() == self.dim() {
            Ok(())
        } else {
            Err(RecourseError::DimensionMismatch {
                expected: self.dim(),
                found: x.dim(),
            })
        }
    }

    /// `θᵀx̃`; the caller guarantees matching dimensions.
    pub fn score(&self, x: &FeatureVector) -> f64 {
        dot(&self.params, x.augmented())
    }

    /// Score of a raw feature slice (no intercept slot).
    pub fn score_features(&self, features: &[f64]) -> f64 {
        dot(self.weights(), features) + self.intercept()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `σ(θᵀx̃)`.
pub fn predict_glm(model: &LinearModel, x: &FeatureVector) -> Result<f64> {
    model.check_dim(x)?;
    Ok(sigmoid(model.score(x)))
}

/// Norm order `p` of the model-change neighborhood. Serialized as `"1"`,
/// `"2"`, `"inf"`, …; a bare number also deserializes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NormRepr", into = "String")]
pub enum NormOrder {
    Finite(f64),
    Infinity,
}

impl NormOrder {
    pub const L1: NormOrder = NormOrder::Finite(1.0);
    pub const L2: NormOrder = NormOrder::Finite(2.0);

    pub fn finite(p: f64) -> Result<Self> {
        if p.is_finite() && p >= 1.0 {
            Ok(NormOrder::Finite(p))
        } else if p == f64::INFINITY {
            Ok(NormOrder::Infinity)
        } else {
            Err(RecourseError::invalid(format!("norm order must be >= 1, got {p}")))
        }
    }

    /// The Hölder conjugate `q` with `1/p + 1/q = 1`.
    pub fn dual(self) -> NormOrder {
        match self {
            NormOrder::Infinity => NormOrder::L1,
            NormOrder::Finite(1.0) => NormOrder::Infinity,
            NormOrder::Finite(p) => NormOrder::Finite(p / (p - 1.0)),
        }
    }

    pub fn is_l1(self) -> bool {
        self == NormOrder::L1
    }
}

impl fmt::Display for NormOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormOrder::Infinity => f.write_str("inf"),
            NormOrder::Finite(p) => write!(f, "{p}"),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum NormRepr {
    Number(f64),
    Text(String),
}

impl TryFrom<NormRepr> for NormOrder {
    type Error = RecourseError;

    fn try_from(r: NormRepr) -> Result<Self> {
        match r {
            NormRepr::Number(p) => NormOrder::finite(p),
            NormRepr::Text(s) => s.parse(),
        }
    }
}

impl From<NormOrder> for String {
    fn from(p: NormOrder) -> String {
        p.to_string()
    }
}

impl FromStr for NormOrder {
    type Err = RecourseError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => Ok(NormOrder::Infinity),
            other => {
                let p: f64 = other
                    .parse()
                    .map_err(|_| RecourseError::Parse(format!("invalid norm order `{s}`")))?;
                NormOrder::finite(p)
            }
        }
    }
}

/// The ball `{θ : ‖θ − θ0‖_p ≤ α}` of plausible model changes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Neighborhood {
    pub p: NormOrder,
    pub alpha: f64,
    /// Whether the adversary may also move the intercept weight.
    pub perturb_intercept: bool,
}

impl Neighborhood {
    /// `alpha = 0` is accepted and means a fixed model.
    pub fn new(p: NormOrder, alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(RecourseError::invalid(format!(
                "neighborhood radius must be finite and >= 0, got {alpha}"
            )));
        }
        if let NormOrder::Finite(p) = p {
            if !(p >= 1.0) {
                return Err(RecourseError::invalid("norm order must be >= 1"));
            }
        }
        Ok(Self {
            p,
            alpha,
            perturb_intercept: true,
        })
    }

    pub fn with_intercept_perturbation(mut self, on: bool) -> Self {
        self.perturb_intercept = on;
        self
    }

    /// Number of leading augmented coordinates the adversary may move.
    pub(crate) fn perturbable_len(&self, dim: usize) -> usize {
        if self.perturb_intercept {
            dim + 1
        } else {
            dim
        }
    }
}

/// Loss `ℓ(score)` penalizing distance of the prediction from label 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum LossKind {
    #[default]
    BinaryCrossEntropy,
    SquaredError,
}

impl LossKind {
    pub fn value(self, score: f64) -> f64 {
        match self {
            // -ln σ(z) = ln(1 + e^{-z})
            LossKind::BinaryCrossEntropy => softplus(-score),
            // (σ(z) - 1)² = σ(-z)²
            LossKind::SquaredError => {
                let s = sigmoid(-score);
                s * s
            }
        }
    }

    /// `dℓ/dscore`; strictly negative for both losses.
    pub fn derivative(self, score: f64) -> f64 {
        match self {
            LossKind::BinaryCrossEntropy => -sigmoid(-score),
            LossKind::SquaredError => {
                let s = sigmoid(-score);
                -2.0 * s * s * sigmoid(score)
            }
        }
    }

    /// Upper bound on `|dℓ/dscore|`.
    pub fn max_slope(self) -> f64 {
        match self {
            LossKind::BinaryCrossEntropy => 1.0,
            // max of 2 s² (1 - s) over s in (0, 1) is 8/27 at s = 2/3
            LossKind::SquaredError => 8.0 / 27.0,
        }
    }
}

impl FromStr for LossKind {
    type Err = RecourseError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bce" | "binary-cross-entropy" | "cross-entropy" => Ok(LossKind::BinaryCrossEntropy),
            "squared" | "squared-error" | "mse" => Ok(LossKind::SquaredError),
            _ => Err(RecourseError::Parse(format!("unknown loss `{s}`"))),
        }
    }
}

/// `loss_value` as a free function.
pub fn loss_value(kind: LossKind, score: f64) -> f64 {
    kind.value(score)
}

/// One robust recourse instance: find `x` minimizing `max_θ J(x, θ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecourseProblem {
    pub origin: FeatureVector,
    pub model: LinearModel,
    pub neighborhood: Neighborhood,
    pub lambda: f64,
    pub loss: LossKind,
}

impl RecourseProblem {
    pub fn new(origin: FeatureVector, model: LinearModel, neighborhood: Neighborhood, lambda: f64) -> Result<Self> {
        model.check_dim(&origin)?;
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(RecourseError::invalid(format!("lambda must be >= 0, got {lambda}")));
        }
        Ok(Self {
            origin,
            model,
            neighborhood,
            lambda,
            loss: LossKind::BinaryCrossEntropy,
        })
    }

    pub fn with_loss(mut self, loss: LossKind) -> Self {
        self.loss = loss;
        self
    }

    pub fn with_neighborhood(mut self, neighborhood: Neighborhood) -> Self {
        self.neighborhood = neighborhood;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn dim(&self) -> usize {
        self.origin.dim()
    }

    /// Implementation cost `‖x − x0‖₁` over the feature coordinates.
    pub fn cost(&self, x: &FeatureVector) -> f64 {
        x.l1_distance(&self.origin)
    }

    pub(crate) fn cost_of(&self, features: &[f64]) -> f64 {
        features
            .iter()
            .zip(self.origin.features())
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    /// Price from an already computed score; used by inner loops.
    pub fn price_from_score(&self, score: f64, cost: f64) -> f64 {
        self.loss.value(score) + self.lambda * cost
    }

    /// `J(x, θ)`.
    pub fn price(&self, x: &FeatureVector, theta: &LinearModel) -> Result<f64> {
        theta.check_dim(x)?;
        if x.dim() != self.dim() {
            return Err(RecourseError::DimensionMismatch {
                expected: self.dim(),
                found: x.dim(),
            });
        }
        Ok(self.price_from_score(theta.score(x), self.cost(x)))
    }
}

/// `price_J` as a free function.
pub fn price_j(problem: &RecourseProblem, x: &FeatureVector, theta: &LinearModel) -> Result<f64> {
    problem.price(x, theta)
}

/// Output of every recourse solver. `adversarial_model` is the worst case
/// for `recourse` and `price = J(recourse, adversarial_model)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecourseSolution {
    pub recourse: FeatureVector,
    pub adversarial_model: LinearModel,
    pub price: f64,
    pub iterations: usize,
    pub converged: bool,
}
