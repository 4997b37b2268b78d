//! LIME-style local linear surrogates for black-box classifiers.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{RecourseError, Result};
use crate::model::{logit, sigmoid, FeatureVector, LinearModel};
use crate::seed;

/// Anything that maps a feature vector to a probability of the positive class.
pub trait Predictor {
    fn predict_proba(&self, features: &[f64]) -> f64;
}

impl<F: Fn(&[f64]) -> f64> Predictor for F {
    fn predict_proba(&self, features: &[f64]) -> f64 {
        self(features)
    }
}

impl Predictor for LinearModel {
    fn predict_proba(&self, features: &[f64]) -> f64 {
        sigmoid(self.score_features(features))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateTarget {
    /// Regress the clipped logit, so the surrogate is a GLM of the predictor.
    #[default]
    Logit,
    Probability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateConfig {
    pub n_samples: usize,
    /// Standard deviation of the Gaussian perturbation.
    pub noise_scale: f64,
    /// Kernel width; `None` uses `0.75·√d`.
    pub kernel_width: Option<f64>,
    /// Ridge penalty on the weights (the intercept is not penalized).
    pub ridge_penalty: f64,
    pub target: SurrogateTarget,
    pub seed: u64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            n_samples: 1000,
            noise_scale: 0.1,
            kernel_width: None,
            ridge_penalty: 1e-6,
            target: SurrogateTarget::Logit,
            seed: 0,
        }
    }
}

const PROBA_CLIP: f64 = 1e-6;

/// Fits a weighted linear model to the predictor around `x0`.
///
/// Samples `x0 + N(0, noise²)`, weights them by `exp(−‖z − x0‖² / width²)`,
/// and solves the ridge-regularized weighted least-squares problem in
/// coordinates centered at `x0`.
pub fn fit_local_linear<P: Predictor + ?Sized>(
    predictor: &P,
    x0: &FeatureVector,
    cfg: &SurrogateConfig,
) -> Result<LinearModel> {
    let d = x0.dim();
    if cfg.n_samples < d + 2 {
        return Err(RecourseError::invalid(format!(
            "surrogate needs at least d + 2 = {} samples",
            d + 2
        )));
    }
    if !(cfg.noise_scale > 0.0) {
        return Err(RecourseError::invalid("noise scale must be > 0"));
    }
    let width = cfg.kernel_width.unwrap_or(0.75 * (d as f64).sqrt());
    if !(width > 0.0) {
        return Err(RecourseError::invalid("kernel width must be > 0"));
    }
    if !(cfg.ridge_penalty >= 0.0) {
        return Err(RecourseError::invalid("ridge penalty must be >= 0"));
    }

    let mut rng = seed::rng(cfg.seed, seed::stream::SURROGATE, 0);
    let normal = Normal::new(0.0, cfg.noise_scale).map_err(|e| RecourseError::invalid(e.to_string()))?;
    let origin = x0.features();
    let k = d + 1;
    let mut gram = DMatrix::<f64>::zeros(k, k);
    let mut rhs = DVector::<f64>::zeros(k);
    let mut point = vec![0.0; d];
    let mut row = vec![0.0; k];
    for _ in 0..cfg.n_samples {
        let mut dist_sq = 0.0;
        for j in 0..d {
            let eps = normal.sample(&mut rng);
            point[j] = origin[j] + eps;
            row[j] = eps;
            dist_sq += eps * eps;
        }
        row[d] = 1.0;
        let prob = predictor.predict_proba(&point);
        if !prob.is_finite() {
            return Err(RecourseError::NonFinite("predictor output"));
        }
        let target = match cfg.target {
            SurrogateTarget::Logit => logit(prob.clamp(PROBA_CLIP, 1.0 - PROBA_CLIP)),
            SurrogateTarget::Probability => prob,
        };
        let weight = (-dist_sq / (width * width)).exp();
        for a in 0..k {
            rhs[a] += weight * row[a] * target;
            for b in a..k {
                gram[(a, b)] += weight * row[a] * row[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }
    for j in 0..d {
        gram[(j, j)] += cfg.ridge_penalty;
    }
    let solution = gram.cholesky().map(|c| c.solve(&rhs)).ok_or_else(|| {
        RecourseError::Singular("surrogate normal equations are singular; use a positive ridge penalty".into())
    })?;
    let weights: Vec<f64> = solution.iter().take(d).copied().collect();
    // centered intercept back to the original coordinates
    let intercept = solution[d] - weights.iter().zip(origin).map(|(w, x)| w * x).sum::<f64>();
    LinearModel::new(weights, intercept)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_glm_exactly() {
        let truth = LinearModel::new(vec![1.0, -2.0], 0.3).unwrap();
        let cfg = SurrogateConfig {
            ridge_penalty: 0.0,
            seed: 4,
            ..Default::default()
        };
        let x0 = FeatureVector::new(vec![0.2, 0.6]).unwrap();
        let fit = fit_local_linear(&truth, &x0, &cfg).unwrap();
        for (a, b) in fit.augmented().iter().zip(truth.augmented()) {
            assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn constant_predictor_gives_zero_model() {
        let cfg = SurrogateConfig::default();
        let x0 = FeatureVector::new(vec![0.5, 0.5, 0.5]).unwrap();
        let fit = fit_local_linear(&|_: &[f64]| 0.5, &x0, &cfg).unwrap();
        assert!(fit.augmented().iter().all(|v| v.abs() <= 1e-8));
    }

    #[test]
    fn rejects_too_few_samples() {
        let cfg = SurrogateConfig {
            n_samples: 3,
            ..Default::default()
        };
        let x0 = FeatureVector::new(vec![0.0, 0.0]).unwrap();
        assert!(fit_local_linear(&|_: &[f64]| 0.5, &x0, &cfg).is_err());
    }
}
