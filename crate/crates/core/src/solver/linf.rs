use std::collections::BTreeSet;

use crate::adversary::worst_case_glm;
use crate::error::{RecourseError, Result};
use crate::model::{logit, FeatureVector, LinearModel, LossKind, NormOrder, RecourseProblem, RecourseSolution};

/// Cap on `|Δ|` when the one-dimensional problem has no minimizer (`λ = 0`).
pub const UNBOUNDED_STEP: f64 = 1e6;

/// Minimizer of `ℓ(z + wΔ) + λ|x + Δ − x0|` over `Δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step1d {
    pub delta: f64,
    /// False when the objective decreases without bound and `delta` was
    /// capped at [`UNBOUNDED_STEP`].
    pub bounded: bool,
}

/// One-dimensional update along a single coordinate.
///
/// `score` is the current `θ'ᵀx̃`, `weight` the coordinate's effective
/// weight, and `x`, `x0` the coordinate's current and original values. The
/// cross-entropy case is solved in closed form from `σ(z*) = 1 − λ/|w|`;
/// other losses use bisection on the one-sided derivative.
pub fn solve_1d_update(loss: LossKind, lambda: f64, score: f64, weight: f64, x: f64, x0: f64) -> Step1d {
    let kink = x0 - x;
    if weight == 0.0 {
        let delta = if lambda > 0.0 { kink } else { 0.0 };
        return Step1d { delta, bounded: true };
    }
    if lambda == 0.0 {
        return Step1d {
            delta: UNBOUNDED_STEP * weight.signum(),
            bounded: false,
        };
    }
    // beyond the kink in the direction of sign(w) the derivative is
    // s·(w·ℓ'(z + wΔ)) + λ with s = sign(w); on the other side it is negative
    let s = weight.signum();
    let a = weight.abs();
    let slope_at = |delta: f64| a * loss.derivative(score + weight * delta) + lambda;
    if slope_at(kink) >= 0.0 {
        return Step1d {
            delta: kink,
            bounded: true,
        };
    }
    let delta = match loss {
        LossKind::BinaryCrossEntropy => {
            let target = logit(1.0 - lambda / a);
            (target - score) / weight
        }
        _ => {
            // walk away from the kink until the derivative turns positive
            let mut lo = 0.0f64;
            let mut hi = 1.0f64;
            while slope_at(kink + s * hi) < 0.0 {
                lo = hi;
                hi *= 2.0;
                if hi > UNBOUNDED_STEP {
                    return Step1d {
                        delta: kink + s * UNBOUNDED_STEP,
                        bounded: false,
                    };
                }
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if slope_at(kink + s * mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            kink + s * 0.5 * (lo + hi)
        }
    };
    Step1d { delta, bounded: true }
}

/// Full output of the `p = ∞` solver.
#[derive(Debug, Clone, PartialEq)]
pub struct Algorithm2Report {
    pub solution: RecourseSolution,
    /// The effective model `θ'` when the loop stopped.
    pub working_model: LinearModel,
}

/// Exact robust recourse under `‖θ − θ0‖_∞ ≤ α`.
///
/// Against an `L^∞` adversary the worst-case score is
/// `Σ_i (θ_i x_i − α|x_i|) + θ_b − α`, so each coordinate behaves like a
/// linear term whose effective weight `θ_i − α·side_i` depends on the side of
/// zero it lies on. Coordinates are moved one at a time in decreasing order
/// of effective weight magnitude; a coordinate that would cross zero stops at
/// zero and either switches side (when `|θ_i| > α`) or leaves the active set.
pub fn solve_algorithm2(problem: &RecourseProblem) -> Result<RecourseSolution> {
    solve_algorithm2_detailed(problem).map(|r| r.solution)
}

pub fn solve_algorithm2_detailed(problem: &RecourseProblem) -> Result<Algorithm2Report> {
    let nb = problem.neighborhood;
    if nb.p != NormOrder::Infinity {
        return Err(RecourseError::invalid(format!(
            "this solver needs p = inf, the problem has p = {}",
            nb.p
        )));
    }
    let d = problem.dim();
    let alpha = nb.alpha;
    let theta = problem.model.augmented();
    let x0 = problem.origin.features();

    let mut x = x0.to_vec();
    let mut working = theta.to_vec();
    let mut side = vec![0.0; d];
    let mut active = BTreeSet::new();
    for i in 0..d {
        if x0[i] != 0.0 {
            side[i] = x0[i].signum();
        } else if theta[i].abs() > alpha {
            side[i] = theta[i].signum();
        } else {
            continue;
        }
        working[i] = theta[i] - alpha * side[i];
        active.insert(i);
    }
    if nb.perturb_intercept {
        working[d] = theta[d] - alpha;
    }

    let mut score: f64 = working[..d].iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() + working[d];
    let mut iterations = 0;
    let mut bounded = true;
    let limit = 2 * d + 2;

    while !active.is_empty() {
        if iterations >= limit {
            return Err(RecourseError::NotConverged {
                iterations,
                residual: f64::NAN,
                best: x,
            });
        }
        iterations += 1;
        let mut pick = *active.iter().next().expect("active set is non-empty");
        for &i in &active {
            if working[i].abs() > working[pick].abs() {
                pick = i;
            }
        }
        let i = pick;
        let step = solve_1d_update(problem.loss, problem.lambda, score, working[i], x[i], x0[i]);
        bounded &= step.bounded;
        let delta = step.delta;
        if delta == 0.0 || (x[i] == 0.0 && delta * side[i] < 0.0) {
            break;
        }
        if (x[i] + delta) * side[i] >= 0.0 {
            x[i] += delta;
            break;
        }
        // crossing zero: stop there, then switch side or drop the coordinate
        score -= working[i] * x[i];
        x[i] = 0.0;
        if theta[i].abs() > alpha {
            side[i] = -side[i];
            working[i] = theta[i] - alpha * side[i];
        } else {
            active.remove(&i);
        }
    }

    let recourse = FeatureVector::new(x)?;
    let worst = worst_case_glm(problem, &recourse)?;
    let working_model = LinearModel::from_augmented(working)?;
    debug_assert!(
        (problem.price(&recourse, &working_model)? - worst.objective).abs() <= 1e-9 * (1.0 + worst.objective.abs()),
        "effective model should be a worst case of the returned recourse"
    );
    Ok(Algorithm2Report {
        solution: RecourseSolution {
            recourse,
            adversarial_model: worst.model,
            price: worst.objective,
            iterations,
            converged: bounded,
        },
        working_model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Neighborhood;
    use approx::assert_abs_diff_eq;

    fn brute_1d(loss: LossKind, lambda: f64, z: f64, w: f64, x: f64, x0: f64) -> f64 {
        let f = |d: f64| loss.value(z + w * d) + lambda * (x + d - x0).abs();
        let (mut lo, mut hi) = (-60.0, 60.0);
        let mut best = 0.0;
        let mut best_val = f(0.0);
        for _ in 0..6 {
            let n = 20000;
            let h = (hi - lo) / n as f64;
            for k in 0..=n {
                let d = lo + k as f64 * h;
                if f(d) < best_val {
                    best_val = f(d);
                    best = d;
                }
            }
            lo = best - 2.0 * h;
            hi = best + 2.0 * h;
        }
        best
    }

    #[test]
    fn closed_form_example() {
        let s = solve_1d_update(LossKind::BinaryCrossEntropy, 0.1, 0.0, 1.0, 0.0, 0.0);
        assert!(s.bounded);
        assert_abs_diff_eq!(s.delta, 9f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(s.delta, 2.1972245773, epsilon = 1e-9);
    }

    #[test]
    fn matches_refined_grid() {
        let cases = [
            (LossKind::BinaryCrossEntropy, 0.1, 0.0, 1.0, 0.0, 0.0),
            (LossKind::BinaryCrossEntropy, 0.3, -1.0, -2.0, 0.5, 0.2),
            (LossKind::BinaryCrossEntropy, 0.05, 2.0, 0.7, -1.0, 1.0),
            (LossKind::BinaryCrossEntropy, 0.5, -3.0, 0.4, 0.0, 0.0),
            (LossKind::SquaredError, 0.05, -1.0, 1.5, 0.0, 0.0),
            (LossKind::SquaredError, 0.02, 0.5, -1.0, 1.0, 0.3),
        ];
        for (loss, lambda, z, w, x, x0) in cases {
            let s = solve_1d_update(loss, lambda, z, w, x, x0);
            let b = brute_1d(loss, lambda, z, w, x, x0);
            assert!(
                (s.delta - b).abs() <= 1e-6,
                "{loss:?} λ={lambda} z={z} w={w}: {} vs {b}",
                s.delta
            );
        }
    }

    #[test]
    fn zero_lambda_is_unbounded() {
        let s = solve_1d_update(LossKind::BinaryCrossEntropy, 0.0, 0.0, -2.0, 0.0, 0.0);
        assert!(!s.bounded);
        assert_eq!(s.delta, -UNBOUNDED_STEP);
    }

    #[test]
    fn zero_weight_moves_to_kink() {
        assert_eq!(
            solve_1d_update(LossKind::BinaryCrossEntropy, 0.2, 0.0, 0.0, 0.7, 0.1).delta,
            0.1 - 0.7
        );
    }

    #[test]
    fn rejects_finite_norm() {
        let pr = RecourseProblem::new(
            FeatureVector::new(vec![0.0]).unwrap(),
            LinearModel::new(vec![1.0], 0.0).unwrap(),
            Neighborhood::new(NormOrder::L1, 0.1).unwrap(),
            0.1,
        )
        .unwrap();
        assert!(matches!(solve_algorithm2(&pr), Err(RecourseError::InvalidParameter(_))));
    }

    #[test]
    fn zero_origin_coordinate_moves_when_weight_dominates() {
        // θ = (2), α = 0.5, x0 = 0: effective weight 1.5, intercept frozen
        let nb = Neighborhood::new(NormOrder::Infinity, 0.5)
            .unwrap()
            .with_intercept_perturbation(false);
        let pr = RecourseProblem::new(
            FeatureVector::new(vec![0.0]).unwrap(),
            LinearModel::new(vec![2.0], 0.0).unwrap(),
            nb,
            0.1,
        )
        .unwrap();
        let sol = solve_algorithm2(&pr).unwrap();
        // σ(1.5x) = 1 − 0.1/1.5
        let expected = logit(1.0 - 0.1 / 1.5) / 1.5;
        assert_abs_diff_eq!(sol.recourse.features()[0], expected, epsilon = 1e-12);
        assert!(sol.converged);
    }
}
