//! Gradient min-max baseline in the style of ROAR: alternate an exact
//! worst-case model with one gradient step on the recourse.

use serde::{Deserialize, Serialize};

use crate::adversary::worst_case_glm;
use crate::error::{RecourseError, Result};
use crate::model::{FeatureVector, NormOrder, RecourseProblem, RecourseSolution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoarConfig {
    pub outer_steps: usize,
    pub learning_rate: f64,
    /// Norm of the adversary; overrides the problem's own norm.
    pub p: NormOrder,
    /// Stop once a step moves the recourse by less than this (Euclidean).
    pub tol: f64,
}

impl Default for RoarConfig {
    fn default() -> Self {
        Self {
            outer_steps: 1000,
            learning_rate: 0.1,
            p: NormOrder::L1,
            tol: 1e-10,
        }
    }
}

impl RoarConfig {
    pub fn with_norm(mut self, p: NormOrder) -> Self {
        self.p = p;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(RecourseError::invalid("learning rate must be positive and finite"));
        }
        if !(self.tol >= 0.0) {
            return Err(RecourseError::invalid("tolerance must be >= 0"));
        }
        Ok(())
    }
}

/// Runs the template and returns the final recourse with its certified
/// worst case under `cfg.p`. `iterations` counts outer steps taken;
/// `converged` is true when the step-size tolerance stopped the loop.
pub fn solve_roar(problem: &RecourseProblem, cfg: &RoarConfig) -> Result<RecourseSolution> {
    cfg.validate()?;
    let mut neighborhood = problem.neighborhood;
    neighborhood.p = cfg.p;
    let problem = problem.clone().with_neighborhood(neighborhood);
    let d = problem.dim();
    let x0 = problem.origin.features().to_vec();
    let mut x = problem.origin.clone();
    let mut iterations = 0;
    let mut converged = false;

    for step in 1..=cfg.outer_steps {
        iterations = step;
        let adv = worst_case_glm(&problem, &x)?.model;
        let slope = problem.loss.derivative(adv.score(&x));
        let mut next = x.features().to_vec();
        let mut moved = 0.0;
        for j in 0..d {
            let diff = next[j] - x0[j];
            let kink = if diff > 0.0 {
                1.0
            } else if diff < 0.0 {
                -1.0
            } else {
                0.0
            };
            let delta = cfg.learning_rate * (slope * adv.weights()[j] + problem.lambda * kink);
            next[j] -= delta;
            moved += delta * delta;
        }
        x = FeatureVector::new(next)?;
        if moved.sqrt() < cfg.tol {
            converged = true;
            break;
        }
    }

    let worst = worst_case_glm(&problem, &x)?;
    Ok(RecourseSolution {
        recourse: x,
        adversarial_model: worst.model,
        price: worst.objective,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LinearModel, Neighborhood};

    fn one_dim() -> RecourseProblem {
        let nb = Neighborhood::new(NormOrder::L1, 0.5)
            .unwrap()
            .with_intercept_perturbation(false);
        RecourseProblem::new(
            FeatureVector::new(vec![0.0]).unwrap(),
            LinearModel::new(vec![1.0], 0.0).unwrap(),
            nb,
            0.01,
        )
        .unwrap()
    }

    #[test]
    fn zero_steps_returns_origin() {
        let cfg = RoarConfig {
            outer_steps: 0,
            ..Default::default()
        };
        let sol = solve_roar(&one_dim(), &cfg).unwrap();
        assert_eq!(sol.recourse.features(), &[0.0]);
    }

    #[test]
    fn one_dimensional_price_close_to_optimum() {
        let cfg = RoarConfig {
            outer_steps: 5000,
            ..Default::default()
        };
        let sol = solve_roar(&one_dim(), &cfg).unwrap();
        assert!((sol.price - 0.0980).abs() <= 1e-2, "price {}", sol.price);
        let certified = one_dim().price(&sol.recourse, &sol.adversarial_model).unwrap();
        assert_eq!(certified, sol.price);
    }
}
