//! Brute-force references used to validate the solvers.
//!
//! Nothing here shares code with the solvers beyond the price definition:
//! the min-max oracle scans a grid and evaluates the inner maximum through
//! the dual norm, the projection oracle enumerates active constraint sets,
//! and the non-convexity certificate maximizes over the vertices of the
//! `L¹` ball.

use nalgebra::{DMatrix, DVector};

use crate::error::{RecourseError, Result};
use crate::geometry::{dual_norm_value, DominanceCone};
use crate::model::{FeatureVector, LinearModel, LossKind, Neighborhood, NormOrder, RecourseProblem};

/// Axis-aligned grid `[lower, upper]^d` with spacing `step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub lower: f64,
    pub upper: f64,
    pub step: f64,
}

impl GridSpec {
    pub fn new(lower: f64, upper: f64, step: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && lower < upper && step > 0.0) {
            return Err(RecourseError::invalid("grid needs finite lower < upper and step > 0"));
        }
        Ok(Self { lower, upper, step })
    }

    pub fn points_per_axis(&self) -> usize {
        ((self.upper - self.lower) / self.step).round() as usize + 1
    }

    fn coord(&self, k: usize) -> f64 {
        (self.lower + k as f64 * self.step).min(self.upper)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOracleResult {
    pub recourse: FeatureVector,
    /// Robust price of `recourse`.
    pub price: f64,
    /// Bound on how far the grid minimum can sit above the box minimum,
    /// from a Lipschitz constant of the robust price.
    pub error_bound: f64,
    /// Grid points whose loss term was actually evaluated.
    pub evaluations: u64,
}

/// Lipschitz constant (Euclidean) of `x ↦ max_θ J(x, θ)`.
pub fn robust_price_lipschitz(problem: &RecourseProblem) -> f64 {
    let d = problem.dim() as f64;
    let w = problem.model.weights().iter().map(|v| v * v).sum::<f64>().sqrt();
    problem.loss.max_slope() * (w + problem.neighborhood.alpha * d.sqrt()) + problem.lambda * d.sqrt()
}

/// Minimizes the robust price over a grid for `d ≤ 3`.
///
/// The grid is split into blocks. Each block gets a lower bound from the
/// price at its center minus the Lipschitz constant times its half-diagonal,
/// and blocks are scanned point by point in order of that bound until the
/// bound exceeds the best price found. Inside a block, points whose cost term
/// alone exceeds the best price are skipped. Both rules only discard points
/// that cannot beat the incumbent, so the result is the exact grid minimum.
pub fn grid_minmax_oracle(problem: &RecourseProblem, grid: GridSpec) -> Result<GridOracleResult> {
    const BLOCK: usize = 64;
    let d = problem.dim();
    if d == 0 || d > 3 {
        return Err(RecourseError::invalid(format!(
            "grid oracle supports 1 to 3 features, got {d}"
        )));
    }
    let n = grid.points_per_axis();
    let nb = problem.neighborhood;
    let theta = problem.model.augmented();
    let origin = problem.origin.features();
    let axis: Vec<f64> = (0..n).map(|k| grid.coord(k)).collect();
    let dev: Vec<Vec<f64>> = (0..d)
        .map(|i| axis.iter().map(|a| (a - origin[i]).abs()).collect())
        .collect();
    let perturbable = nb.perturbable_len(d);
    let lipschitz = robust_price_lipschitz(problem);

    let robust_score = |point: &[f64]| -> f64 {
        let mut buf = [0.0f64; 4];
        let mut score = theta[d];
        for i in 0..d {
            buf[i] = point[i];
            score += theta[i] * point[i];
        }
        buf[d] = 1.0;
        score - nb.alpha * dual_norm_value(&buf[..perturbable], nb.p)
    };

    let blocks_per_axis = n.div_ceil(BLOCK);
    let mut blocks: Vec<(f64, Vec<usize>)> = Vec::new();
    let mut bidx = vec![0usize; d];
    let mut center = [0.0f64; 3];
    loop {
        let mut radius_sq = 0.0;
        let mut cost = 0.0;
        for i in 0..d {
            let lo = axis[bidx[i] * BLOCK];
            let hi = axis[((bidx[i] + 1) * BLOCK).min(n) - 1];
            center[i] = 0.5 * (lo + hi);
            radius_sq += (0.5 * (hi - lo)).powi(2);
            cost += (center[i] - origin[i]).abs();
        }
        let value = problem.price_from_score(robust_score(&center[..d]), cost);
        blocks.push((value - lipschitz * radius_sq.sqrt(), bidx.clone()));
        if !advance(&mut bidx, blocks_per_axis) {
            break;
        }
    }
    blocks.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut best = f64::INFINITY;
    let mut best_point = vec![0.0; d];
    let mut evaluations = 0u64;
    let mut point = [0.0f64; 3];
    for (bound, bidx) in &blocks {
        if *bound >= best {
            break;
        }
        let starts: Vec<usize> = bidx.iter().map(|b| b * BLOCK).collect();
        let lens: Vec<usize> = bidx.iter().map(|b| ((b + 1) * BLOCK).min(n) - b * BLOCK).collect();
        let mut local = vec![0usize; d];
        loop {
            let mut cost = 0.0;
            for i in 0..d {
                cost += dev[i][starts[i] + local[i]];
            }
            let penalty = problem.lambda * cost;
            if penalty < best {
                for i in 0..d {
                    point[i] = axis[starts[i] + local[i]];
                }
                let price = problem.loss.value(robust_score(&point[..d])) + penalty;
                evaluations += 1;
                // ties go to the lexicographically smallest grid index
                if price < best || (price == best && point[..d] < best_point[..]) {
                    best = price;
                    best_point.copy_from_slice(&point[..d]);
                }
            }
            if !advance_within(&mut local, &lens) {
                break;
            }
        }
    }

    Ok(GridOracleResult {
        recourse: FeatureVector::new(best_point)?,
        price: best,
        error_bound: lipschitz * grid.step * (d as f64).sqrt() / 2.0,
        evaluations,
    })
}

/// Odometer step over `[0, n)^d`, last coordinate fastest. False on wrap.
fn advance(idx: &mut [usize], n: usize) -> bool {
    for k in (0..idx.len()).rev() {
        idx[k] += 1;
        if idx[k] < n {
            return true;
        }
        idx[k] = 0;
    }
    false
}

fn advance_within(idx: &mut [usize], lens: &[usize]) -> bool {
    for k in (0..idx.len()).rev() {
        idx[k] += 1;
        if idx[k] < lens[k] {
            return true;
        }
        idx[k] = 0;
    }
    false
}

/// Euclidean projection onto a [`DominanceCone`] by enumerating every subset
/// of active halfspaces, solving each equality-constrained least-squares
/// problem with a pseudo-inverse, and keeping the closest feasible point.
/// Exponential in the number of halfspaces; limited to 16 of them.
pub fn projection_oracle_activeset(v: &[f64], cone: &DominanceCone) -> Result<Vec<f64>> {
    let n = cone.dim;
    if v.len() != n {
        return Err(RecourseError::DimensionMismatch {
            expected: n,
            found: v.len(),
        });
    }
    let compared: Vec<usize> = (0..n)
        .filter(|&j| j != cone.pivot && !cone.exempt.contains(&j))
        .collect();
    // rows a with constraint a·x ≥ 0
    let mut halfspaces: Vec<Vec<f64>> = Vec::new();
    for &j in &compared {
        for o in [1.0, -1.0] {
            let mut a = vec![0.0; n];
            a[cone.pivot] = cone.sign;
            a[j] = -o;
            halfspaces.push(a);
        }
    }
    if compared.is_empty() {
        let mut a = vec![0.0; n];
        a[cone.pivot] = cone.sign;
        halfspaces.push(a);
    }
    if halfspaces.len() > 16 {
        return Err(RecourseError::invalid("too many halfspaces for active-set enumeration"));
    }
    let equalities: Vec<(Vec<f64>, f64)> = cone
        .fixed
        .iter()
        .map(|(&k, &c)| {
            let mut a = vec![0.0; n];
            a[k] = 1.0;
            (a, c)
        })
        .collect();

    let vv = DVector::from_column_slice(v);
    let feasible = |x: &DVector<f64>| -> bool {
        halfspaces
            .iter()
            .all(|a| a.iter().zip(x.iter()).map(|(p, q)| p * q).sum::<f64>() >= -1e-9)
            && equalities
                .iter()
                .all(|(a, c)| (a.iter().zip(x.iter()).map(|(p, q)| p * q).sum::<f64>() - c).abs() <= 1e-9)
    };

    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 0u32..(1u32 << halfspaces.len()) {
        let mut rows: Vec<&[f64]> = Vec::new();
        let mut rhs: Vec<f64> = Vec::new();
        for (h, a) in halfspaces.iter().enumerate() {
            if mask & (1 << h) != 0 {
                rows.push(a);
                rhs.push(0.0);
            }
        }
        for (a, c) in &equalities {
            rows.push(a);
            rhs.push(*c);
        }
        let x = if rows.is_empty() {
            vv.clone()
        } else {
            let a = DMatrix::from_fn(rows.len(), n, |r, c| rows[r][c]);
            let b = DVector::from_vec(rhs);
            let gram = &a * a.transpose();
            let pinv = gram
                .pseudo_inverse(1e-12)
                .map_err(|e| RecourseError::Singular(e.to_string()))?;
            let residual = &a * &vv - b;
            &vv - a.transpose() * (pinv * residual)
        };
        if !feasible(&x) {
            continue;
        }
        let dist = (&x - &vv).norm_squared();
        if best.as_ref().is_none_or(|(b, _)| dist < *b) {
            best = Some((dist, x));
        }
    }
    best.map(|(_, x)| x.iter().copied().collect())
        .ok_or(RecourseError::Infeasible)
}

/// Three collinear recourses whose robust prices violate midpoint convexity.
#[derive(Debug, Clone, PartialEq)]
pub struct NonconvexityCertificate {
    pub points: [f64; 3],
    pub values: [f64; 3],
    /// `(g(a) + g(c)) / 2`, which convexity would require to be `≥ g(b)`.
    pub midpoint_average: f64,
}

impl NonconvexityCertificate {
    pub fn violates_convexity(&self) -> bool {
        self.values[1] > self.midpoint_average
    }
}

/// Robust price with the inner maximum taken over the vertices of the `L¹`
/// ball, which is exact because the score is linear in `θ`.
pub fn robust_price_by_vertices(problem: &RecourseProblem, x: &FeatureVector) -> Result<f64> {
    if !problem.neighborhood.p.is_l1() {
        return Err(RecourseError::invalid("vertex enumeration needs p = 1"));
    }
    let k = problem.neighborhood.perturbable_len(problem.dim());
    let alpha = problem.neighborhood.alpha;
    let mut worst = problem.price(x, &problem.model)?;
    for i in 0..k {
        for s in [-1.0, 1.0] {
            let mut params = problem.model.augmented().to_vec();
            params[i] += s * alpha;
            worst = worst.max(problem.price(x, &LinearModel::from_augmented(params)?)?);
        }
    }
    Ok(worst)
}

/// The one-feature problem of the non-convexity demo: squared loss,
/// `θ0 = 0`, `λ = 1`, `α = 0.5`, `p = 1`, `x0 = 1`.
pub fn nonconvexity_problem() -> Result<RecourseProblem> {
    Ok(RecourseProblem::new(
        FeatureVector::new(vec![1.0])?,
        LinearModel::new(vec![0.0], 0.0)?,
        Neighborhood::new(NormOrder::L1, 0.5)?,
        1.0,
    )?
    .with_loss(LossKind::SquaredError))
}

/// Robust price of the demo problem at `points + 1` evenly spaced recourses
/// covering `[−8, 8]`.
pub fn nonconvexity_curve(points: usize) -> Result<Vec<(f64, f64)>> {
    if points == 0 {
        return Err(RecourseError::invalid("curve needs at least one interval"));
    }
    let problem = nonconvexity_problem()?;
    (0..=points)
        .map(|i| {
            let x = -8.0 + 16.0 * i as f64 / points as f64;
            Ok((x, robust_price_by_vertices(&problem, &FeatureVector::new(vec![x])?)?))
        })
        .collect()
}

/// The robust price of [`nonconvexity_problem`] at `x = 2, 4, 6` is not
/// midpoint convex.
pub fn nonconvexity_demo() -> Result<NonconvexityCertificate> {
    let problem = nonconvexity_problem()?;
    let points = [2.0, 4.0, 6.0];
    let mut values = [0.0; 3];
    for (v, &p) in values.iter_mut().zip(&points) {
        *v = robust_price_by_vertices(&problem, &FeatureVector::new(vec![p])?)?;
    }
    Ok(NonconvexityCertificate {
        points,
        values,
        midpoint_average: (values[0] + values[2]) / 2.0,
    })
}
