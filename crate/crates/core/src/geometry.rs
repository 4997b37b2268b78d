//! Euclidean projections onto norm balls and dominance cones, plus the
//! dual-norm helper used by the closed-form adversary.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{RecourseError, Result};
use crate::model::NormOrder;

pub const DEFAULT_CONE_TOL: f64 = 1e-9;
pub const DEFAULT_CONE_MAX_ITER: usize = 10_000;

/// `‖x‖_p`.
pub fn lp_norm(x: &[f64], p: NormOrder) -> f64 {
    match p {
        NormOrder::Infinity => x.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        NormOrder::Finite(1.0) => x.iter().map(|v| v.abs()).sum(),
        NormOrder::Finite(2.0) => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
        NormOrder::Finite(p) => {
            // scale by the max entry so large p does not overflow
            let m = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if m == 0.0 {
                return 0.0;
            }
            m * x.iter().map(|v| (v.abs() / m).powf(p)).sum::<f64>().powf(1.0 / p)
        }
    }
}

/// `‖x‖_q` where `q` is the Hölder conjugate of `p`. This is the largest
/// drop of `θᵀx` over a radius-one `L^p` ball of models.
pub fn dual_norm_value(x: &[f64], p: NormOrder) -> f64 {
    lp_norm(x, p.dual())
}

/// Projection onto `{u : ‖u‖₁ ≤ radius}` by soft-thresholding.
pub fn project_l1_ball(v: &[f64], radius: f64) -> Vec<f64> {
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    if l1 <= radius {
        return v.to_vec();
    }
    if radius <= 0.0 {
        return vec![0.0; v.len()];
    }
    // stable sort: ties keep the lower index first
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[b].abs().total_cmp(&v[a].abs()));

    let mut cumulative = 0.0;
    let mut threshold = 0.0;
    for (k, &i) in order.iter().enumerate() {
        let u = v[i].abs();
        cumulative += u;
        let candidate = (cumulative - radius) / (k + 1) as f64;
        if u - candidate > 0.0 {
            threshold = candidate;
        } else {
            break;
        }
    }
    v.iter().map(|&x| x.signum() * (x.abs() - threshold).max(0.0)).collect()
}

/// Projection onto the `L^p` ball of the given radius.
///
/// `p ∈ {1, 2, ∞}` have closed forms. Other orders solve the optimality
/// conditions `u_i + μ·p·u_i^{p−1} = |v_i|` by safeguarded Newton on each
/// `u_i` inside a bisection on the multiplier `μ`; the returned point always
/// lies in the ball.
pub fn project_lp_ball(v: &[f64], p: NormOrder, radius: f64) -> Result<Vec<f64>> {
    if !(radius >= 0.0) {
        return Err(RecourseError::invalid("ball radius must be >= 0"));
    }
    if lp_norm(v, p) <= radius {
        return Ok(v.to_vec());
    }
    match p {
        NormOrder::Infinity => Ok(v.iter().map(|x| x.clamp(-radius, radius)).collect()),
        NormOrder::Finite(1.0) => Ok(project_l1_ball(v, radius)),
        NormOrder::Finite(2.0) => {
            let n = lp_norm(v, p);
            Ok(v.iter().map(|x| x * radius / n).collect())
        }
        NormOrder::Finite(_) if radius == 0.0 => Ok(vec![0.0; v.len()]),
        NormOrder::Finite(q) => Ok(project_lp_ball_general(v, q, radius)),
    }
}

fn project_lp_ball_general(v: &[f64], p: f64, radius: f64) -> Vec<f64> {
    // safeguarded Newton on u + μ·p·u^{p−1} = a over [0, a]
    let shrink = |mu: f64| -> Vec<f64> {
        let c = mu * p;
        v.iter()
            .map(|&x| {
                let a = x.abs();
                let (mut lo, mut hi) = (0.0, a);
                let mut u = 0.5 * a;
                for _ in 0..100 {
                    let f = u + c * u.powf(p - 1.0) - a;
                    if f > 0.0 {
                        hi = u;
                    } else {
                        lo = u;
                    }
                    let slope = 1.0 + c * (p - 1.0) * u.powf(p - 2.0);
                    let mut next = u - f / slope;
                    if !(next >= lo && next <= hi) {
                        next = 0.5 * (lo + hi);
                    }
                    let done = (next - u).abs() <= f64::EPSILON * a;
                    u = next;
                    if done {
                        break;
                    }
                }
                x.signum() * u
            })
            .collect()
    };
    let target = radius.powf(p);
    let excess = |u: &[f64]| u.iter().map(|x| x.abs().powf(p)).sum::<f64>() - target;
    let mut hi = 1.0;
    let mut best = shrink(hi);
    while excess(&best) > 0.0 {
        hi *= 2.0;
        best = shrink(hi);
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let u = shrink(mid);
        if excess(&u) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
            best = u;
        }
    }
    best
}

/// The set
///
/// ```text
/// { x : sign · x[pivot] ≥ |x[j]|  for every compared j ≠ pivot,
///       x[k] = value_k          for every fixed k }
/// ```
///
/// Coordinates in `exempt` take no part in the dominance constraints.
/// With no compared coordinate at all the constraint degenerates to
/// `sign · x[pivot] ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DominanceCone {
    pub dim: usize,
    pub pivot: usize,
    pub sign: f64,
    pub fixed: BTreeMap<usize, f64>,
    pub exempt: BTreeSet<usize>,
}

impl DominanceCone {
    pub fn new(dim: usize, pivot: usize, sign: f64) -> Result<Self> {
        if pivot >= dim {
            return Err(RecourseError::invalid(format!(
                "cone pivot {pivot} out of range for dimension {dim}"
            )));
        }
        if sign != 1.0 && sign != -1.0 {
            return Err(RecourseError::invalid("cone sign must be +1 or -1"));
        }
        Ok(Self {
            dim,
            pivot,
            sign,
            fixed: BTreeMap::new(),
            exempt: BTreeSet::new(),
        })
    }

    pub fn with_fixed(mut self, index: usize, value: f64) -> Self {
        self.fixed.insert(index, value);
        self
    }

    pub fn with_exempt(mut self, index: usize) -> Self {
        self.exempt.insert(index);
        self
    }

    /// Cone over augmented instances of `d` features: the intercept slot `d`
    /// is fixed at one, and compared only when the adversary may move it.
    pub fn for_recourse(features: usize, pivot: usize, sign: f64, compare_intercept: bool) -> Result<Self> {
        let cone = DominanceCone::new(features + 1, pivot, sign)?.with_fixed(features, 1.0);
        Ok(if compare_intercept {
            cone
        } else {
            cone.with_exempt(features)
        })
    }

    fn compared(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.dim).filter(move |&j| j != self.pivot && !self.exempt.contains(&j))
    }

    /// Largest constraint violation at `x` (zero when feasible).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let t = self.sign * x[self.pivot];
        let mut worst = (-t).max(0.0);
        for j in self.compared() {
            worst = worst.max(x[j].abs() - t);
        }
        for (&k, &c) in &self.fixed {
            worst = worst.max((x[k] - c).abs());
        }
        worst
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.violation(x) <= tol
    }

    /// Whether the constraint set is nonempty.
    pub fn is_feasible(&self) -> bool {
        match self.fixed.get(&self.pivot) {
            None => true,
            Some(&c) => {
                let t = self.sign * c;
                t >= 0.0
                    && self
                        .compared()
                        .filter_map(|j| self.fixed.get(&j))
                        .all(|&f| f.abs() <= t)
            }
        }
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() == self.dim {
            Ok(())
        } else {
            Err(RecourseError::DimensionMismatch {
                expected: self.dim,
                found: v.len(),
            })
        }
    }

    /// Halfspaces `a·x ≥ 0` written as `(j, o)` for `sign·x_p − o·x_j ≥ 0`;
    /// `None` encodes the degenerate `sign·x_p ≥ 0`.
    fn halfspaces(&self) -> Vec<Option<(usize, f64)>> {
        let mut out: Vec<_> = self
            .compared()
            .flat_map(|j| [Some((j, 1.0)), Some((j, -1.0))])
            .collect();
        if out.is_empty() {
            out.push(None);
        }
        out
    }
}

/// Euclidean projection onto a [`DominanceCone`] by Dykstra's alternating
/// projections over its halfspaces and fixed-coordinate hyperplanes.
///
/// Stops once a full sweep moves the iterate by less than `tol` and the
/// iterate violates no constraint by more than `tol`. A `v` already within
/// `tol` of every constraint is returned unchanged, so the map is exactly
/// idempotent.
pub fn project_dominance_cone(v: &[f64], cone: &DominanceCone, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    cone.check_len(v)?;
    if !(tol > 0.0) {
        return Err(RecourseError::invalid("projection tolerance must be > 0"));
    }
    if cone.violation(v) <= tol {
        return Ok(v.to_vec());
    }
    let halfspaces = cone.halfspaces();
    let fixed: Vec<(usize, f64)> = cone.fixed.iter().map(|(&k, &c)| (k, c)).collect();
    let p = cone.pivot;
    let s = cone.sign;

    let mut x = v.to_vec();
    // Dykstra increments: two entries (pivot, j) per halfspace, one per hyperplane
    let mut inc_half = vec![[0.0f64; 2]; halfspaces.len()];
    let mut inc_fixed = vec![0.0f64; fixed.len()];
    let mut best = x.clone();
    let mut best_violation = f64::INFINITY;

    for iter in 1..=max_iter {
        let previous = x.clone();
        for (h, inc) in halfspaces.iter().zip(inc_half.iter_mut()) {
            match *h {
                Some((j, o)) => {
                    let zp = x[p] + inc[0];
                    let zj = x[j] + inc[1];
                    let a_dot_z = s * zp - o * zj;
                    let (np, nj) = if a_dot_z < 0.0 {
                        (zp - s * a_dot_z / 2.0, zj + o * a_dot_z / 2.0)
                    } else {
                        (zp, zj)
                    };
                    inc[0] = zp - np;
                    inc[1] = zj - nj;
                    x[p] = np;
                    x[j] = nj;
                }
                None => {
                    let zp = x[p] + inc[0];
                    let np = if s * zp < 0.0 { 0.0 } else { zp };
                    inc[0] = zp - np;
                    x[p] = np;
                }
            }
        }
        for (&(k, c), inc) in fixed.iter().zip(inc_fixed.iter_mut()) {
            let z = x[k] + *inc;
            *inc = z - c;
            x[k] = c;
        }

        let change = x
            .iter()
            .zip(&previous)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let violation = cone.violation(&x);
        if violation < best_violation {
            best_violation = violation;
            best.clone_from(&x);
        }
        if change < tol && violation <= tol {
            log::trace!("dykstra converged after {iter} sweeps");
            return Ok(x);
        }
    }
    Err(RecourseError::NotConverged {
        iterations: max_iter,
        residual: best_violation,
        best,
    })
}

/// Exact projection onto a [`DominanceCone`].
///
/// Writing `t = sign·x[pivot]`, the projection keeps `t` and clips every
/// compared free coordinate to `[-t, t]`, so `t` minimizes the convex
/// piecewise quadratic `(t − t0)² + Σ_j (|v_j| − t)₊²` subject to
/// `t ≥ max(0, |fixed compared values|)`. The breakpoints are found by
/// sorting, which makes the projection `O(d log d)`.
pub fn project_dominance_cone_exact(v: &[f64], cone: &DominanceCone) -> Result<Vec<f64>> {
    let mut x = v.to_vec();
    project_dominance_cone_into(&mut x, cone, &mut Vec::new())?;
    Ok(x)
}

/// In-place variant of [`project_dominance_cone_exact`]; `scratch` is reused
/// across calls by the subgradient solver.
pub(crate) fn project_dominance_cone_into(x: &mut [f64], cone: &DominanceCone, scratch: &mut Vec<f64>) -> Result<()> {
    cone.check_len(x)?;
    for (&k, &c) in &cone.fixed {
        x[k] = c;
    }
    let mut lower = 0.0f64;
    scratch.clear();
    for j in cone.compared() {
        match cone.fixed.get(&j) {
            Some(c) => lower = lower.max(c.abs()),
            None => scratch.push(x[j].abs()),
        }
    }

    let t = if cone.fixed.contains_key(&cone.pivot) {
        let t = cone.sign * x[cone.pivot];
        if t < lower {
            return Err(RecourseError::Infeasible);
        }
        t
    } else {
        let t0 = cone.sign * x[cone.pivot];
        scratch.sort_by(|a, b| b.total_cmp(a));
        let mut prefix = 0.0;
        let mut t = t0;
        for k in 0..=scratch.len() {
            let candidate = (t0 + prefix) / (k + 1) as f64;
            let next = scratch.get(k).copied().unwrap_or(f64::NEG_INFINITY);
            if candidate >= next {
                t = candidate;
                break;
            }
            prefix += next;
        }
        let t = t.max(lower);
        x[cone.pivot] = cone.sign * t;
        t
    };

    for j in (0..cone.dim).filter(|&j| j != cone.pivot && !cone.exempt.contains(&j) && !cone.fixed.contains_key(&j)) {
        x[j] = x[j].clamp(-t, t);
    }
    Ok(())
}
