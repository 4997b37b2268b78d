//! Worst-case models inside the neighborhood `‖θ − θ0‖_p ≤ α`.
//!
//! For a generalized linear model the loss is decreasing in the score, so the
//! adversary simply minimizes `θᵀx̃`; the minimizer has a closed form for
//! every `p` through the dual norm. For population objectives and non-linear
//! models the worst case is found by projected gradient ascent.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{RecourseError, Result};
use crate::geometry::{dual_norm_value, lp_norm, project_lp_ball};
use crate::model::{FeatureVector, LinearModel, LossKind, Neighborhood, NormOrder, RecourseProblem};

/// Flattened parameters of an arbitrary differentiable model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatParameterVector {
    values: Vec<f64>,
}

impl FlatParameterVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().all(|v| v.is_finite()) {
            Ok(Self { values })
        } else {
            Err(RecourseError::NonFinite("parameter vector"))
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Outcome of a worst-case search. `exact` marks closed-form results.
#[derive(Debug, Clone, PartialEq)]
pub struct AdversaryResult<M = LinearModel> {
    pub model: M,
    pub objective: f64,
    pub exact: bool,
}

/// A model whose pre-link score is differentiable in its flattened
/// parameters. Black-box predictors implement only the score methods and
/// inherit a gradient that reports [`RecourseError::GradientUnavailable`].
pub trait DifferentiableScore {
    fn num_params(&self) -> usize;

    fn flat_params(&self) -> Vec<f64>;

    /// Score of `features` under the given parameter values.
    fn score_with(&self, params: &[f64], features: &[f64]) -> f64;

    /// Writes `∂score/∂params` into `grad` and returns the score.
    fn score_grad_with(&self, _params: &[f64], _features: &[f64], _grad: &mut [f64]) -> Result<f64> {
        Err(RecourseError::GradientUnavailable(
            "model does not expose parameter gradients".into(),
        ))
    }
}

impl DifferentiableScore for LinearModel {
    fn num_params(&self) -> usize {
        self.augmented().len()
    }

    fn flat_params(&self) -> Vec<f64> {
        self.augmented().to_vec()
    }

    fn score_with(&self, params: &[f64], features: &[f64]) -> f64 {
        let d = features.len();
        params[..d].iter().zip(features).map(|(a, b)| a * b).sum::<f64>() + params[d]
    }

    fn score_grad_with(&self, params: &[f64], features: &[f64], grad: &mut [f64]) -> Result<f64> {
        let d = features.len();
        grad[..d].copy_from_slice(features);
        grad[d] = 1.0;
        Ok(self.score_with(params, features))
    }
}

/// Perturbation `δ` with `‖δ‖_p ≤ α` minimizing `δᵀv`.
///
/// * `p = 1`: all mass on the largest `|v_i|` (lowest index on ties);
/// * `p = ∞`: `δ = −α·sign(v)` with `sign(0) = 0`;
/// * otherwise `δ_i = −α·sign(v_i)·(|v_i| / ‖v‖_q)^(q−1)`.
pub fn score_minimizing_perturbation(v: &[f64], p: NormOrder, alpha: f64) -> Vec<f64> {
    let mut delta = vec![0.0; v.len()];
    if alpha == 0.0 || v.is_empty() {
        return delta;
    }
    match p {
        NormOrder::Infinity => {
            for (d, &x) in delta.iter_mut().zip(v) {
                *d = if x == 0.0 { 0.0 } else { -alpha * x.signum() };
            }
        }
        NormOrder::Finite(1.0) => {
            let mut best = 0;
            for (i, x) in v.iter().enumerate() {
                if x.abs() > v[best].abs() {
                    best = i;
                }
            }
            if v[best] != 0.0 {
                delta[best] = -alpha * v[best].signum();
            }
        }
        NormOrder::Finite(_) => {
            let q = p.dual();
            let norm_q = lp_norm(v, q);
            if norm_q == 0.0 {
                return delta;
            }
            let NormOrder::Finite(q) = q else {
                unreachable!("dual of a finite p > 1 is finite")
            };
            for (d, &x) in delta.iter_mut().zip(v) {
                if x != 0.0 {
                    *d = -alpha * x.signum() * (x.abs() / norm_q).powf(q - 1.0);
                }
            }
        }
    }
    delta
}

/// Lowest achievable score `θ0ᵀx̃ − α·‖x̃_perturbable‖_q`.
pub fn worst_case_score(theta0: &LinearModel, x: &FeatureVector, neighborhood: &Neighborhood) -> f64 {
    let k = neighborhood.perturbable_len(x.dim());
    theta0.score(x) - neighborhood.alpha * dual_norm_value(&x.augmented()[..k], neighborhood.p)
}

/// Closed-form worst case `θ*(x)` for a generalized linear model.
pub fn worst_case_glm(problem: &RecourseProblem, x: &FeatureVector) -> Result<AdversaryResult> {
    problem.model.check_dim(x)?;
    let nb = &problem.neighborhood;
    let k = nb.perturbable_len(x.dim());
    let delta = score_minimizing_perturbation(&x.augmented()[..k], nb.p, nb.alpha);
    let mut params = problem.model.augmented().to_vec();
    for (t, d) in params.iter_mut().zip(&delta) {
        *t += d;
    }
    let model = LinearModel::from_augmented(params)?;
    let objective = problem.price(x, &model)?;
    Ok(AdversaryResult {
        model,
        objective,
        exact: true,
    })
}

/// One element of `Θ±`: `θ + sign·α·e_pivot`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaCandidate {
    pub model: LinearModel,
    pub pivot: usize,
    pub sign: f64,
}

/// The `2(d+1)` single-coordinate perturbations of `theta` (`2d` when the
/// intercept is frozen), ordered by pivot, `−α` before `+α`.
pub fn enumerate_theta_pm(theta: &LinearModel, alpha: f64, perturb_intercept: bool) -> Vec<ThetaCandidate> {
    let len = if perturb_intercept {
        theta.dim() + 1
    } else {
        theta.dim()
    };
    let mut out = Vec::with_capacity(2 * len);
    for pivot in 0..len {
        for sign in [-1.0, 1.0] {
            let mut params = theta.augmented().to_vec();
            params[pivot] += sign * alpha;
            out.push(ThetaCandidate {
                model: LinearModel::from_augmented(params).expect("finite perturbation of a finite model"),
                pivot,
                sign,
            });
        }
    }
    out
}

/// Settings of projected gradient ascent over model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AscentConfig {
    pub steps: usize,
    /// Each step moves the parameters by `step_fraction·α` along the
    /// normalized gradient before projecting.
    pub step_fraction: f64,
}

impl Default for AscentConfig {
    fn default() -> Self {
        Self {
            steps: 500,
            step_fraction: 0.05,
        }
    }
}

/// The data term of a summed price objective: per-instance features and
/// implementation cost, sharing one loss and `λ`.
pub(crate) struct PriceTerms<'a> {
    pub instances: Vec<(&'a [f64], f64)>,
    pub loss: LossKind,
    pub lambda: f64,
}

impl PriceTerms<'_> {
    fn objective<M: DifferentiableScore + ?Sized>(&self, model: &M, params: &[f64]) -> f64 {
        self.instances
            .iter()
            .map(|(x, cost)| self.loss.value(model.score_with(params, x)) + self.lambda * cost)
            .sum()
    }

    fn gradient<M: DifferentiableScore + ?Sized>(
        &self,
        model: &M,
        params: &[f64],
        grad: &mut [f64],
        scratch: &mut [f64],
    ) -> Result<()> {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for (x, _) in &self.instances {
            let score = model.score_grad_with(params, x, scratch)?;
            let slope = self.loss.derivative(score);
            for (g, s) in grad.iter_mut().zip(scratch.iter()) {
                *g += slope * s;
            }
        }
        Ok(())
    }
}

/// Maximizes `Σ J(x, θ)` over `‖θ − center‖_p ≤ α` restricted to the
/// coordinates flagged in `perturbable`, starting from `start`. Returns the
/// best iterate and its objective.
pub(crate) fn projected_gradient_ascent<M: DifferentiableScore + ?Sized>(
    model: &M,
    center: &[f64],
    start: &[f64],
    perturbable: &[bool],
    terms: &PriceTerms<'_>,
    p: NormOrder,
    alpha: f64,
    cfg: &AscentConfig,
) -> Result<(Vec<f64>, f64)> {
    let n = center.len();
    let mut theta = start.to_vec();
    let mut best = theta.clone();
    let mut best_obj = terms.objective(model, &theta);
    if alpha == 0.0 || cfg.steps == 0 {
        return Ok((best, best_obj));
    }
    let free: Vec<usize> = (0..n).filter(|&i| perturbable[i]).collect();
    let mut grad = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut offset = vec![0.0; free.len()];

    let step = cfg.step_fraction * alpha;
    for _ in 0..cfg.steps {
        terms.gradient(model, &theta, &mut grad, &mut scratch)?;
        let norm = free.iter().map(|&i| grad[i] * grad[i]).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            break;
        }
        for (o, &i) in offset.iter_mut().zip(&free) {
            *o = theta[i] - center[i] + step * grad[i] / norm;
        }
        let projected = project_lp_ball(&offset, p, alpha)?;
        for (&i, o) in free.iter().zip(&projected) {
            theta[i] = center[i] + o;
        }
        let obj = terms.objective(model, &theta);
        if obj > best_obj {
            best_obj = obj;
            best.clone_from(&theta);
        }
    }
    Ok((best, best_obj))
}

/// For objectives convex in `θ`, jumping to the maximizer of the current
/// linearization over the ball never decreases the objective. Repeats while
/// that strictly improves, which lands ascent iterates on the vertex or
/// boundary point they were creeping toward.
fn linearization_jumps<M: DifferentiableScore + ?Sized>(
    model: &M,
    center: &[f64],
    mut theta: Vec<f64>,
    mut obj: f64,
    perturbable: &[bool],
    terms: &PriceTerms<'_>,
    p: NormOrder,
    alpha: f64,
) -> (Vec<f64>, f64) {
    let n = center.len();
    let free: Vec<usize> = (0..n).filter(|&i| perturbable[i]).collect();
    let mut grad = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    for _ in 0..50 {
        if terms.gradient(model, &theta, &mut grad, &mut scratch).is_err() {
            break;
        }
        let neg: Vec<f64> = free.iter().map(|&i| -grad[i]).collect();
        let delta = score_minimizing_perturbation(&neg, p, alpha);
        let mut next = center.to_vec();
        for (&i, d) in free.iter().zip(&delta) {
            next[i] += d;
        }
        let next_obj = terms.objective(model, &next);
        if next_obj > obj {
            theta = next;
            obj = next_obj;
        } else {
            break;
        }
    }
    (theta, obj)
}

/// Random point of the `L^p` ball on the given coordinates,
/// used to seed ascent restarts.
pub(crate) fn random_ball_point(
    rng: &mut ChaCha8Rng,
    center: &[f64],
    perturbable: &[bool],
    p: NormOrder,
    alpha: f64,
) -> Result<Vec<f64>> {
    let free: Vec<usize> = (0..center.len()).filter(|&i| perturbable[i]).collect();
    let raw: Vec<f64> = free.iter().map(|_| rng.random_range(-alpha..=alpha)).collect();
    let offset = project_lp_ball(&raw, p, alpha)?;
    let mut out = center.to_vec();
    for (&i, o) in free.iter().zip(&offset) {
        out[i] += o;
    }
    Ok(out)
}

/// Single model maximizing the summed price over a population of recourses.
///
/// All problems must share model, neighborhood, `λ`, and loss; only their
/// origins differ. Restarts beyond the first begin at seeded random points of
/// the ball and the best result is kept. Every run ends with jumps to the
/// maximizer of the current linearization, kept only when they improve.
pub fn population_worst_case_pga(
    problems: &[RecourseProblem],
    recourses: &[FeatureVector],
    cfg: &AscentConfig,
    restarts: usize,
    seed: u64,
) -> Result<AdversaryResult> {
    let first = problems.first().ok_or(RecourseError::EmptyInput("population"))?;
    if problems.len() != recourses.len() {
        return Err(RecourseError::DimensionMismatch {
            expected: problems.len(),
            found: recourses.len(),
        });
    }
    for (pr, x) in problems.iter().zip(recourses) {
        if pr.model != first.model
            || pr.neighborhood != first.neighborhood
            || pr.lambda != first.lambda
            || pr.loss != first.loss
        {
            return Err(RecourseError::invalid(
                "population problems must share model, neighborhood, lambda, and loss",
            ));
        }
        pr.model.check_dim(x)?;
    }
    let terms = PriceTerms {
        instances: problems
            .iter()
            .zip(recourses)
            .map(|(pr, x)| (x.features(), pr.cost(x)))
            .collect(),
        loss: first.loss,
        lambda: first.lambda,
    };
    let d = first.dim();
    let nb = first.neighborhood;
    let perturbable: Vec<bool> = (0..=d).map(|i| i < d || nb.perturb_intercept).collect();
    let (best, objective) = restarted_ascent(&first.model, &perturbable, &terms, nb, cfg, restarts, seed)?;
    Ok(AdversaryResult {
        model: LinearModel::from_augmented(best)?,
        objective,
        exact: false,
    })
}

/// Population worst case of a differentiable model over its flattened
/// parameters. `problems` supply origins, neighborhood, `λ`, and loss (their
/// linear models are ignored) and must agree on all but the origin.
pub fn population_worst_case_nn_pga<M: DifferentiableScore + ?Sized>(
    model: &M,
    problems: &[RecourseProblem],
    recourses: &[FeatureVector],
    cfg: &AscentConfig,
    restarts: usize,
    seed: u64,
) -> Result<AdversaryResult<FlatParameterVector>> {
    let first = problems.first().ok_or(RecourseError::EmptyInput("population"))?;
    if problems.len() != recourses.len() {
        return Err(RecourseError::DimensionMismatch {
            expected: problems.len(),
            found: recourses.len(),
        });
    }
    for pr in problems {
        if pr.neighborhood != first.neighborhood || pr.lambda != first.lambda || pr.loss != first.loss {
            return Err(RecourseError::invalid(
                "population problems must share neighborhood, lambda, and loss",
            ));
        }
    }
    let terms = PriceTerms {
        instances: problems
            .iter()
            .zip(recourses)
            .map(|(pr, x)| (x.features(), pr.cost(x)))
            .collect(),
        loss: first.loss,
        lambda: first.lambda,
    };
    let perturbable = vec![true; model.num_params()];
    let (best, objective) = restarted_ascent(model, &perturbable, &terms, first.neighborhood, cfg, restarts, seed)?;
    Ok(AdversaryResult {
        model: FlatParameterVector::new(best)?,
        objective,
        exact: false,
    })
}

fn restarted_ascent<M: DifferentiableScore + ?Sized>(
    model: &M,
    perturbable: &[bool],
    terms: &PriceTerms<'_>,
    nb: Neighborhood,
    cfg: &AscentConfig,
    restarts: usize,
    seed: u64,
) -> Result<(Vec<f64>, f64)> {
    let center = model.flat_params();
    let mut probe = vec![0.0; center.len()];
    if let Some((x, _)) = terms.instances.first() {
        model.score_grad_with(&center, x, &mut probe)?;
    }
    let mut rng = crate::seed::rng(seed, crate::seed::stream::PGA_RESTART, 0);
    let run = |start: &[f64]| -> Result<(Vec<f64>, f64)> {
        let (theta, obj) = projected_gradient_ascent(model, &center, start, perturbable, terms, nb.p, nb.alpha, cfg)?;
        if cfg.steps == 0 {
            return Ok((theta, obj));
        }
        Ok(linearization_jumps(
            model,
            &center,
            theta,
            obj,
            perturbable,
            terms,
            nb.p,
            nb.alpha,
        ))
    };
    let (mut best, mut best_obj) = run(&center)?;
    for _ in 1..restarts.max(1) {
        if nb.alpha == 0.0 {
            break;
        }
        let start = random_ball_point(&mut rng, &center, perturbable, nb.p, nb.alpha)?;
        let (theta, obj) = run(&start)?;
        if obj > best_obj {
            best_obj = obj;
            best = theta;
        }
    }
    Ok((best, best_obj))
}

/// Worst case of an arbitrary differentiable model for one recourse, found by
/// projected gradient ascent in its flattened parameter space around the
/// trained parameters. `problem` supplies origin, neighborhood, `λ`, and loss;
/// its linear model is ignored.
pub fn worst_case_nn_pga<M: DifferentiableScore + ?Sized>(
    model: &M,
    x: &FeatureVector,
    problem: &RecourseProblem,
    cfg: &AscentConfig,
) -> Result<AdversaryResult<FlatParameterVector>> {
    let center = model.flat_params();
    // probe the gradient up front so black-box models fail loudly
    let mut probe = vec![0.0; center.len()];
    model.score_grad_with(&center, x.features(), &mut probe)?;

    let terms = PriceTerms {
        instances: vec![(x.features(), problem.cost(x))],
        loss: problem.loss,
        lambda: problem.lambda,
    };
    let perturbable = vec![true; center.len()];
    let nb = problem.neighborhood;
    let (best, objective) =
        projected_gradient_ascent(model, &center, &center, &perturbable, &terms, nb.p, nb.alpha, cfg)?;
    let (best, objective) = if cfg.steps == 0 {
        (best, objective)
    } else {
        linearization_jumps(model, &center, best, objective, &perturbable, &terms, nb.p, nb.alpha)
    };
    Ok(AdversaryResult {
        model: FlatParameterVector::new(best)?,
        objective,
        exact: false,
    })
}

/// `J(x, θ)` for a differentiable model at the given parameters.
pub fn price_with_params<M: DifferentiableScore + ?Sized>(
    model: &M,
    params: &[f64],
    x: &FeatureVector,
    problem: &RecourseProblem,
) -> f64 {
    problem.price_from_score(model.score_with(params, x.features()), problem.cost(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    fn problem(weights: &[f64], intercept: f64, origin: &[f64], p: NormOrder, alpha: f64) -> RecourseProblem {
        RecourseProblem::new(
            FeatureVector::new(origin.to_vec()).unwrap(),
            LinearModel::new(weights.to_vec(), intercept).unwrap(),
            Neighborhood::new(p, alpha).unwrap(),
            0.1,
        )
        .unwrap()
    }

    #[test]
    fn closed_form_examples() {
        // frozen intercept so the dual norm covers the two features only
        let pr = problem(&[0.0, 0.0], 0.0, &[0.0, 0.0], NormOrder::L2, 1.0);
        let pr = pr
            .clone()
            .with_neighborhood(pr.neighborhood.with_intercept_perturbation(false));
        let x = FeatureVector::new(vec![3.0, 4.0]).unwrap();
        let r = worst_case_glm(&pr, &x).unwrap();
        assert_abs_diff_eq!(r.model.weights()[0], -0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(r.model.weights()[1], -0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(r.model.score(&x), -5.0, epsilon = 1e-14);

        let pr = problem(&[0.0], 0.0, &[0.0], NormOrder::L1, 0.5);
        let r = worst_case_glm(&pr, &FeatureVector::new(vec![0.0]).unwrap()).unwrap();
        assert_eq!(r.model.augmented(), &[0.0, -0.5]);

        let pr = problem(&[0.0, 0.0], 0.0, &[0.0, 0.0], NormOrder::Infinity, 1.0);
        let pr = pr
            .clone()
            .with_neighborhood(pr.neighborhood.with_intercept_perturbation(false));
        let r = worst_case_glm(&pr, &x).unwrap();
        assert_eq!(r.model.augmented(), &[-1.0, -1.0, 0.0]);
        assert_abs_diff_eq!(r.model.score(&x), -7.0, epsilon = 1e-14);
    }

    #[test]
    fn l1_ties_pick_lowest_index() {
        let delta = score_minimizing_perturbation(&[-2.0, 2.0, 1.0], NormOrder::L1, 0.3);
        assert_eq!(delta, vec![0.3, 0.0, 0.0]);
    }

    #[test]
    fn theta_pm_examples() {
        let theta = LinearModel::new(vec![1.0], 0.0).unwrap();
        let c: Vec<Vec<f64>> = enumerate_theta_pm(&theta, 0.5, true)
            .into_iter()
            .map(|c| c.model.into_augmented())
            .collect();
        assert_eq!(c, vec![vec![0.5, 0.0], vec![1.5, 0.0], vec![1.0, -0.5], vec![1.0, 0.5]]);

        let theta = LinearModel::new(vec![0.0, 0.0], 0.7).unwrap();
        let c = enumerate_theta_pm(&theta, 1.0, false);
        assert_eq!(c.len(), 4);
        for cand in &c {
            let diff: Vec<f64> = cand
                .model
                .augmented()
                .iter()
                .zip(theta.augmented())
                .map(|(a, b)| a - b)
                .collect();
            for p in [
                NormOrder::L1,
                NormOrder::L2,
                NormOrder::Finite(3.5),
                NormOrder::Infinity,
            ] {
                assert_abs_diff_eq!(lp_norm(&diff, p), 1.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn ascent_with_zero_radius_returns_center() {
        let pr = problem(&[0.4, -0.3], 0.2, &[0.1, 0.9], NormOrder::L2, 0.0);
        let x = FeatureVector::new(vec![0.5, 0.5]).unwrap();
        let r = population_worst_case_pga(std::slice::from_ref(&pr), &[x], &AscentConfig::default(), 5, 3).unwrap();
        assert_eq!(r.model, pr.model);
        assert!(!r.exact);
    }

    #[test]
    fn population_of_one_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for p in [NormOrder::L1, NormOrder::L2, NormOrder::Infinity] {
            for _ in 0..20 {
                let w: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
                let o: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
                let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
                let pr = problem(&w, rng.random_range(-1.0..1.0), &o, p, rng.random_range(0.05..0.6));
                let x = FeatureVector::new(x).unwrap();
                let exact = worst_case_glm(&pr, &x).unwrap();
                let pga = population_worst_case_pga(&[pr], &[x], &AscentConfig::default(), 1, 0).unwrap();
                assert!(
                    (pga.objective - exact.objective).abs() <= 1e-9,
                    "p={p}: pga {} exact {}",
                    pga.objective,
                    exact.objective
                );
            }
        }
    }

    #[test]
    fn population_pga_matches_parameter_grid() {
        // Σ J over three instances, maximized by brute force over the 3-dim
        // θ-box at step 1e-3
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let alpha = 0.1;
        for _ in 0..3 {
            let w: Vec<f64> = (0..2).map(|_| rng.random_range(-2.0..2.0)).collect();
            let b = rng.random_range(-1.0..1.0);
            let pr = problem(&w, b, &[0.2, 0.3], NormOrder::Infinity, alpha);
            let xs: Vec<FeatureVector> = (0..3)
                .map(|_| FeatureVector::new((0..2).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap())
                .collect();
            let problems = vec![pr.clone(); 3];
            let pga = population_worst_case_pga(&problems, &xs, &AscentConfig::default(), 1, 0).unwrap();

            let n = 200;
            let h = 2.0 * alpha / n as f64;
            let mut grid_best = f64::NEG_INFINITY;
            for i in 0..=n {
                for j in 0..=n {
                    for k in 0..=n {
                        let theta = [
                            w[0] - alpha + i as f64 * h,
                            w[1] - alpha + j as f64 * h,
                            b - alpha + k as f64 * h,
                        ];
                        let total: f64 = xs
                            .iter()
                            .map(|x| {
                                let s = theta[0] * x.features()[0] + theta[1] * x.features()[1] + theta[2];
                                pr.price_from_score(s, pr.cost(x))
                            })
                            .sum();
                        grid_best = grid_best.max(total);
                    }
                }
            }
            assert!(
                (pga.objective - grid_best).abs() <= 1e-3,
                "pga {} grid {}",
                pga.objective,
                grid_best
            );
        }
    }

    #[test]
    fn black_box_models_report_missing_gradient() {
        struct Opaque;
        impl DifferentiableScore for Opaque {
            fn num_params(&self) -> usize {
                1
            }
            fn flat_params(&self) -> Vec<f64> {
                vec![0.0]
            }
            fn score_with(&self, params: &[f64], _features: &[f64]) -> f64 {
                params[0]
            }
        }
        let pr = problem(&[0.0], 0.0, &[0.0], NormOrder::L2, 0.1);
        let x = FeatureVector::new(vec![0.0]).unwrap();
        assert!(matches!(
            worst_case_nn_pga(&Opaque, &x, &pr, &AscentConfig::default()),
            Err(RecourseError::GradientUnavailable(_))
        ));
    }

    #[test]
    fn linear_network_ascent_matches_closed_form() {
        let pr = problem(&[1.2, -0.7], 0.3, &[0.1, 0.4], NormOrder::L2, 0.3);
        let x = FeatureVector::new(vec![0.9, -0.2]).unwrap();
        let exact = worst_case_glm(&pr, &x).unwrap();
        let r = worst_case_nn_pga(&pr.model, &x, &pr, &AscentConfig::default()).unwrap();
        assert!((r.objective - exact.objective).abs() <= 1e-3);
        let zero = worst_case_nn_pga(
            &pr.model,
            &x,
            &pr,
            &AscentConfig {
                steps: 0,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(zero.model.values(), pr.model.augmented());
        assert_abs_diff_eq!(zero.objective, pr.price(&x, &pr.model).unwrap(), epsilon = 1e-15);
    }
}
