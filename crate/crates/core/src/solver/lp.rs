use crate::adversary::{enumerate_theta_pm, worst_case_glm, ThetaCandidate};
use crate::error::{RecourseError, Result};
use crate::geometry::{
    project_dominance_cone, project_dominance_cone_into, DominanceCone, DEFAULT_CONE_MAX_ITER, DEFAULT_CONE_TOL,
};
use crate::model::{FeatureVector, LinearModel, LossKind, NormOrder, RecourseProblem, RecourseSolution};
use crate::solver::linf::solve_1d_update;

/// How iterates are projected back onto a candidate's cone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConeProjection {
    /// Closed-form sort-based projection.
    Exact,
    /// Dykstra's alternating projections.
    Dykstra { tol: f64, max_iter: usize },
}

impl ConeProjection {
    pub fn dykstra() -> Self {
        ConeProjection::Dykstra {
            tol: DEFAULT_CONE_TOL,
            max_iter: DEFAULT_CONE_MAX_ITER,
        }
    }
}

/// How each candidate subproblem is minimized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SubproblemMethod {
    /// One-dimensional search over the pivot coordinate with an exact greedy
    /// inner solve. Needs a loss convex in the score; other losses fall back
    /// to the subgradient method.
    #[default]
    PivotSearch,
    /// Projected subgradient descent.
    Subgradient,
}

/// Settings for the candidate subproblems. The iteration fields drive the
/// projected subgradient method.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgradientConfig {
    pub method: SubproblemMethod,
    pub max_iter: usize,
    /// Initial step is `step_scale / ‖θ'‖₂`; step `t` is divided by `√t`.
    pub step_scale: f64,
    /// Stop once the best price improved by less than `tol` over the last
    /// `patience` iterations.
    pub tol: f64,
    pub patience: usize,
    pub projection: ConeProjection,
}

impl Default for SubgradientConfig {
    fn default() -> Self {
        Self {
            method: SubproblemMethod::PivotSearch,
            max_iter: 2000,
            step_scale: 0.5,
            tol: 1e-8,
            patience: 100,
            projection: ConeProjection::Exact,
        }
    }
}

impl SubgradientConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 || self.patience == 0 {
            return Err(RecourseError::invalid("max_iter and patience must be positive"));
        }
        if !(self.step_scale > 0.0 && self.step_scale.is_finite()) {
            return Err(RecourseError::invalid("step_scale must be positive and finite"));
        }
        if !(self.tol >= 0.0) {
            return Err(RecourseError::invalid("tol must be >= 0"));
        }
        Ok(())
    }
}

/// Minimizer of `J(·, θ')` over one candidate's cone.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSolution {
    pub recourse: FeatureVector,
    /// `J(recourse, θ')` under the candidate model.
    pub price: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn project(x: &mut Vec<f64>, cone: &DominanceCone, method: ConeProjection, scratch: &mut Vec<f64>) -> Result<bool> {
    match method {
        ConeProjection::Exact => {
            project_dominance_cone_into(x, cone, scratch)?;
            Ok(true)
        }
        ConeProjection::Dykstra { tol, max_iter } => match project_dominance_cone(x, cone, tol, max_iter) {
            Ok(p) => {
                *x = p;
                Ok(true)
            }
            Err(RecourseError::NotConverged { best, .. }) => {
                *x = best;
                Ok(false)
            }
            Err(e) => Err(e),
        },
    }
}

/// Minimizes `J(x, θ')` over the recourses in `cone` (augmented coordinates,
/// intercept slot fixed at 1).
pub fn solve_candidate_subproblem(
    problem: &RecourseProblem,
    candidate: &LinearModel,
    cone: &DominanceCone,
    cfg: &SubgradientConfig,
) -> Result<CandidateSolution> {
    cfg.validate()?;
    let d = problem.dim();
    if candidate.dim() != d {
        return Err(RecourseError::DimensionMismatch {
            expected: d,
            found: candidate.dim(),
        });
    }
    if cone.dim != d + 1 {
        return Err(RecourseError::DimensionMismatch {
            expected: d + 1,
            found: cone.dim,
        });
    }
    if !cone.fixed.contains_key(&d) {
        return Err(RecourseError::invalid("the cone must fix the intercept slot"));
    }
    if !cone.is_feasible() {
        return Err(RecourseError::Infeasible);
    }
    match cfg.method {
        SubproblemMethod::PivotSearch if problem.loss == LossKind::BinaryCrossEntropy => {
            pivot_search(problem, candidate, cone)
        }
        _ => subgradient(problem, candidate, cone, cfg),
    }
}

/// Inside the cone every compared coordinate satisfies `|x_j| ≤ t` with
/// `t = sign·x_pivot`. For fixed `t` the problem is a loss of a linear score
/// plus an `L¹` cost over a box, solved exactly by moving coordinates in
/// decreasing order of `|θ'_j|` until one stops strictly inside its bounds.
/// The optimal value is convex in `t`, which is found by golden-section
/// search.
struct PivotProblem<'a> {
    problem: &'a RecourseProblem,
    w: &'a [f64],
    pivot: Option<usize>,
    sign: f64,
    lower: f64,
    /// Free feature coordinates with a `[-t, t]` box flag, by decreasing `|w|`.
    order: Vec<(usize, bool)>,
    base_score: f64,
}

impl PivotProblem<'_> {
    /// Optimal recourse for pivot value `t`, written into `x`; returns its price.
    fn inner(&self, t: f64, x: &mut [f64]) -> (f64, bool) {
        let x0 = self.problem.origin.features();
        let lambda = self.problem.lambda;
        let mut score = self.base_score;
        let mut cost = 0.0;
        if let Some(p) = self.pivot {
            x[p] = self.sign * t;
            score += self.w[p] * x[p];
            cost += (x[p] - x0[p]).abs();
        }
        for &(j, boxed) in &self.order {
            x[j] = if boxed { x0[j].clamp(-t, t) } else { x0[j] };
            score += self.w[j] * x[j];
            cost += (x[j] - x0[j]).abs();
        }
        let mut bounded = true;
        for &(j, boxed) in &self.order {
            if self.w[j] == 0.0 {
                break;
            }
            let step = solve_1d_update(self.problem.loss, lambda, score, self.w[j], x[j], x0[j]);
            let target = x[j] + step.delta;
            let clamped = if boxed { target.clamp(-t, t) } else { target };
            bounded &= step.bounded || clamped != target;
            score += self.w[j] * (clamped - x[j]);
            cost += (clamped - x0[j]).abs() - (x[j] - x0[j]).abs();
            x[j] = clamped;
            if clamped == target {
                break;
            }
        }
        (self.problem.price_from_score(score, cost), bounded)
    }
}

fn pivot_search(problem: &RecourseProblem, candidate: &LinearModel, cone: &DominanceCone) -> Result<CandidateSolution> {
    let d = problem.dim();
    let w = candidate.augmented();
    let mut lower = 0.0f64;
    for (&k, &c) in &cone.fixed {
        if k != cone.pivot && !cone.exempt.contains(&k) {
            lower = lower.max(c.abs());
        }
    }
    let (pivot, fixed_t) = match cone.fixed.get(&cone.pivot) {
        Some(&c) => (None, Some(cone.sign * c)),
        None => (Some(cone.pivot), None),
    };
    let mut order: Vec<(usize, bool)> = (0..d)
        .filter(|&j| Some(j) != pivot && !cone.fixed.contains_key(&j))
        .map(|j| (j, !cone.exempt.contains(&j)))
        .collect();
    order.sort_by(|a, b| w[b.0].abs().total_cmp(&w[a.0].abs()));
    let base_score: f64 = cone.fixed.iter().map(|(&k, &c)| w[k] * c).sum();
    let pp = PivotProblem {
        problem,
        w,
        pivot,
        sign: cone.sign,
        lower,
        order,
        base_score,
    };

    let mut x = vec![0.0; d];
    for (&k, &c) in &cone.fixed {
        if k < d {
            x[k] = c;
        }
    }
    let mut evaluations = 0;
    let t_star = match fixed_t {
        Some(t) => t,
        None => {
            let mut f = |t: f64| {
                evaluations += 1;
                pp.inner(t, &mut x.clone()).0
            };
            minimize_convex_from(&mut f, pp.lower, problem.origin.features())
        }
    };
    let (price, bounded) = pp.inner(t_star, &mut x);
    Ok(CandidateSolution {
        recourse: FeatureVector::new(x)?,
        price,
        iterations: evaluations,
        converged: bounded,
    })
}

/// Minimizer of a convex function on `[lower, ∞)`: doubles an upper bracket
/// until the function stops decreasing, then runs golden-section search.
fn minimize_convex_from(f: &mut impl FnMut(f64) -> f64, lower: f64, scale: &[f64]) -> f64 {
    let span = 1.0 + scale.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut a = lower;
    let mut b = lower + span;
    let mut fb = f(b);
    loop {
        let c = lower + 2.0 * (b - lower);
        if c - lower > 1e7 {
            b = c;
            break;
        }
        let fc = f(c);
        if fc >= fb {
            b = c;
            break;
        }
        a = lower + 0.5 * (b - lower);
        b = c;
        fb = fc;
    }
    if a > lower {
        a = lower + 0.5 * (a - lower);
    }
    let invphi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - invphi * (b - a);
    let mut e = a + invphi * (b - a);
    let mut fc = f(c);
    let mut fe = f(e);
    for _ in 0..200 {
        if (b - a) <= 1e-13 * (1.0 + a.abs()) {
            break;
        }
        if fc <= fe {
            b = e;
            e = c;
            fe = fc;
            c = b - invphi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + invphi * (b - a);
            fe = f(e);
        }
    }
    let mid = 0.5 * (a + b);
    let candidates = [lower, mid];
    let mut best = mid;
    let mut best_val = f(mid);
    for t in candidates {
        let v = f(t);
        if v < best_val {
            best = t;
            best_val = v;
        }
    }
    best
}

/// Projected subgradient descent on `J(x, θ')` over `cone`, started from the
/// projection of the origin. Returns the best iterate seen.
fn subgradient(
    problem: &RecourseProblem,
    candidate: &LinearModel,
    cone: &DominanceCone,
    cfg: &SubgradientConfig,
) -> Result<CandidateSolution> {
    let d = problem.dim();

    let w = candidate.augmented();
    let origin = problem.origin.augmented();
    let mut scratch = Vec::new();
    let mut x = origin.to_vec();
    let mut exact_projection = project(&mut x, cone, cfg.projection, &mut scratch)?;

    let eval = |x: &[f64]| -> f64 {
        let score: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
        problem.price_from_score(score, problem.cost_of(&x[..d]))
    };
    let mut best = x.clone();
    let mut best_price = eval(&x);
    let mut checkpoint = best_price;

    let norm_w = w[..d].iter().map(|v| v * v).sum::<f64>().sqrt();
    let base = if norm_w > 0.0 {
        cfg.step_scale / norm_w
    } else {
        cfg.step_scale
    };

    let mut iterations = 0;
    let mut converged = false;
    let mut grad = vec![0.0; d + 1];
    for t in 1..=cfg.max_iter {
        iterations = t;
        let score: f64 = w.iter().zip(&x).map(|(a, b)| a * b).sum();
        let slope = problem.loss.derivative(score);
        for j in 0..d {
            let diff = x[j] - origin[j];
            let kink = if diff > 0.0 {
                1.0
            } else if diff < 0.0 {
                -1.0
            } else {
                0.0
            };
            grad[j] = slope * w[j] + problem.lambda * kink;
        }
        if grad[..d].iter().all(|g| *g == 0.0) {
            converged = true;
            break;
        }
        let step = base / (t as f64).sqrt();
        for j in 0..d {
            x[j] -= step * grad[j];
        }
        exact_projection &= project(&mut x, cone, cfg.projection, &mut scratch)?;
        let price = eval(&x);
        if price < best_price {
            best_price = price;
            best.clone_from(&x);
        }
        if t % cfg.patience == 0 {
            if checkpoint - best_price < cfg.tol {
                converged = true;
                break;
            }
            checkpoint = best_price;
        }
    }
    best.truncate(d);
    Ok(CandidateSolution {
        recourse: FeatureVector::new(best)?,
        price: best_price,
        iterations,
        converged: converged && exact_projection,
    })
}

/// Full output of the candidate decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct Algorithm1Report {
    /// Recourse with its certified worst-case model under the problem's norm.
    pub solution: RecourseSolution,
    /// The winning element of `Θ±` and its cone.
    pub candidate: ThetaCandidate,
    /// `J(recourse, candidate)`; equals `solution.price` when `p = 1`.
    pub candidate_price: f64,
    pub evaluated: usize,
    pub skipped_infeasible: usize,
}

const SNAP_TOL: f64 = 1e-12;

/// Robust recourse for `p ≠ ∞` by minimizing over the `2(d+1)` candidate
/// models of `Θ±`, each restricted to the recourses for which it is the
/// `L¹` worst case. Ties in price within `1e-12` keep the earlier candidate.
pub fn solve_algorithm1(problem: &RecourseProblem, cfg: &SubgradientConfig) -> Result<RecourseSolution> {
    solve_algorithm1_detailed(problem, cfg).map(|r| r.solution)
}

pub fn solve_algorithm1_detailed(problem: &RecourseProblem, cfg: &SubgradientConfig) -> Result<Algorithm1Report> {
    if problem.neighborhood.p == NormOrder::Infinity {
        return Err(RecourseError::UnsupportedNorm {
            p: "inf".into(),
            by: "the candidate decomposition (use the p = inf solver)",
        });
    }
    cfg.validate()?;
    let d = problem.dim();
    let nb = problem.neighborhood;
    let mut best: Option<(ThetaCandidate, CandidateSolution)> = None;
    let mut evaluated = 0;
    let mut skipped = 0;
    let mut iterations = 0;
    let mut all_converged = true;

    for cand in enumerate_theta_pm(&problem.model, nb.alpha, nb.perturb_intercept) {
        let cone = DominanceCone::for_recourse(d, cand.pivot, -cand.sign, nb.perturb_intercept)?;
        let sol = match solve_candidate_subproblem(problem, &cand.model, &cone, cfg) {
            Ok(s) => s,
            Err(RecourseError::Infeasible) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        evaluated += 1;
        iterations += sol.iterations;
        all_converged &= sol.converged;
        log::debug!(
            "candidate pivot {} sign {:+}: price {:.6} after {} iterations",
            cand.pivot,
            cand.sign,
            sol.price,
            sol.iterations
        );
        let better = match &best {
            None => true,
            Some((_, b)) => sol.price < b.price - 1e-12,
        };
        if better {
            best = Some((cand, sol));
        }
    }

    let (candidate, sol) = best.ok_or(RecourseError::NoFeasibleCandidate)?;
    let mut recourse = sol.recourse.clone();
    let mut worst = worst_case_glm(problem, &recourse)?;
    // rounding residue of the search: snap coordinates that barely moved
    let x0 = problem.origin.features();
    let snapped: Vec<f64> = recourse
        .features()
        .iter()
        .zip(x0)
        .map(|(&x, &o)| {
            if (x - o).abs() <= SNAP_TOL * o.abs().max(1.0) {
                o
            } else {
                x
            }
        })
        .collect();
    if snapped != recourse.features() {
        let snapped = FeatureVector::new(snapped)?;
        let w = worst_case_glm(problem, &snapped)?;
        if w.objective <= worst.objective + SNAP_TOL {
            recourse = snapped;
            worst = w;
        }
    }
    Ok(Algorithm1Report {
        solution: RecourseSolution {
            recourse,
            adversarial_model: worst.model,
            price: worst.objective,
            iterations,
            converged: all_converged,
        },
        candidate,
        candidate_price: sol.price,
        evaluated,
        skipped_infeasible: skipped,
    })
}
