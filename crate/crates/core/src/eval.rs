//! Price, validity, sparsity, and feasibility metrics over sets of recourses.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::adversary::{
    population_worst_case_nn_pga, population_worst_case_pga, worst_case_glm, worst_case_nn_pga, AscentConfig,
    DifferentiableScore,
};
use crate::data::{argmax, FeasibilitySpec};
use crate::error::{RecourseError, Result};
use crate::model::{sigmoid, FeatureVector, NormOrder, RecourseProblem, RecourseSolution};
use crate::roar::{solve_roar, RoarConfig};
use crate::solver::{solve_algorithm1, solve_algorithm2, SubgradientConfig};
use crate::surrogate::Predictor;
use crate::train::MlpModel;

/// Decision threshold on the predicted probability (inclusive).
pub const VALIDITY_THRESHOLD: f64 = 0.5;

/// Recourse methods compared by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "alg1")]
    Alg1,
    #[serde(rename = "alg2")]
    Alg2,
    #[serde(rename = "roar-l1")]
    RoarL1,
    #[serde(rename = "roar-linf")]
    RoarLinf,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Alg1, Algorithm::Alg2, Algorithm::RoarL1, Algorithm::RoarLinf];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Alg1 => "alg1",
            Algorithm::Alg2 => "alg2",
            Algorithm::RoarL1 => "roar-l1",
            Algorithm::RoarLinf => "roar-linf",
        }
    }

    /// Norm of the neighborhood the method defends against.
    pub fn norm(self) -> NormOrder {
        match self {
            Algorithm::Alg1 | Algorithm::RoarL1 => NormOrder::L1,
            Algorithm::Alg2 | Algorithm::RoarLinf => NormOrder::Infinity,
        }
    }

    /// Solves `problem` under this method's norm. The returned price is
    /// certified against that norm's worst case.
    pub fn solve(self, problem: &RecourseProblem, settings: &SolverSettings) -> Result<RecourseSolution> {
        let mut nb = problem.neighborhood;
        nb.p = self.norm();
        let problem = problem.clone().with_neighborhood(nb);
        match self {
            Algorithm::Alg1 => solve_algorithm1(&problem, &settings.algorithm1),
            Algorithm::Alg2 => solve_algorithm2(&problem),
            Algorithm::RoarL1 | Algorithm::RoarLinf => {
                solve_roar(&problem, &settings.roar.clone().with_norm(self.norm()))
            }
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = RecourseError;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| {
            RecourseError::Parse(format!(
                "unknown algorithm `{s}` (expected alg1, alg2, roar-l1, roar-linf)"
            ))
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolverSettings {
    pub algorithm1: SubgradientConfig,
    pub roar: RoarConfig,
}

/// Worst-case price of `x`, recomputed from scratch.
pub fn certify(problem: &RecourseProblem, x: &FeatureVector) -> Result<f64> {
    Ok(worst_case_glm(problem, x)?.objective)
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(RecourseError::EmptyInput("instance set"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Ok((mean, var.sqrt()))
}

/// `(mean − best)/best·100`, rounded to one decimal. A zero best gives 0 for
/// a zero mean and infinity otherwise.
pub fn percent_increase(mean: f64, best: f64) -> f64 {
    if best == 0.0 {
        return if mean == 0.0 { 0.0 } else { f64::INFINITY };
    }
    ((mean - best) / best * 1000.0).round() / 10.0
}

/// Recourses produced by one algorithm for a list of problems.
#[derive(Debug, Clone)]
pub struct AlgorithmRecourses {
    pub algorithm: String,
    pub problems: Vec<RecourseProblem>,
    pub recourses: Vec<FeatureVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceRow {
    pub algorithm: String,
    pub instances: usize,
    pub mean: f64,
    /// Sample standard deviation.
    pub std: f64,
    pub percent_increase: f64,
    pub best: bool,
}

/// Recertifies every recourse under its problem's neighborhood and
/// summarizes prices per algorithm. The first algorithm with the minimum mean
/// is marked best.
pub fn compute_price_report(runs: &[AlgorithmRecourses]) -> Result<Vec<PriceRow>> {
    let mut stats = Vec::with_capacity(runs.len());
    for run in runs {
        if run.problems.len() != run.recourses.len() {
            return Err(RecourseError::DimensionMismatch {
                expected: run.problems.len(),
                found: run.recourses.len(),
            });
        }
        let prices = run
            .problems
            .iter()
            .zip(&run.recourses)
            .map(|(p, x)| certify(p, x))
            .collect::<Result<Vec<_>>>()?;
        stats.push((run.algorithm.clone(), prices.len(), mean_std(&prices)?));
    }
    Ok(price_rows(stats))
}

/// Price rows from precomputed `(algorithm, mean)` pairs.
pub fn price_rows_from_means(means: &[(&str, f64)]) -> Result<Vec<PriceRow>> {
    if means.is_empty() {
        return Err(RecourseError::EmptyInput("algorithm set"));
    }
    Ok(price_rows(
        means.iter().map(|(a, m)| (a.to_string(), 0, (*m, 0.0))).collect(),
    ))
}

fn price_rows(stats: Vec<(String, usize, (f64, f64))>) -> Vec<PriceRow> {
    let mut best_idx = 0;
    for (i, s) in stats.iter().enumerate() {
        if s.2 .0 < stats[best_idx].2 .0 {
            best_idx = i;
        }
    }
    let best = stats.get(best_idx).map_or(0.0, |s| s.2 .0);
    stats
        .into_iter()
        .enumerate()
        .map(|(i, (algorithm, instances, (mean, std)))| PriceRow {
            algorithm,
            instances,
            mean,
            std,
            percent_increase: percent_increase(mean, best),
            best: i == best_idx,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidityKind {
    /// Each recourse against its own worst-case model.
    InstanceWise,
    /// All recourses against one model maximizing their summed price.
    PopulationWise,
    /// Against the deployed model.
    Current,
    /// Against a model trained on shifted data.
    Future,
}

impl ValidityKind {
    pub const ALL: [ValidityKind; 4] = [
        ValidityKind::InstanceWise,
        ValidityKind::PopulationWise,
        ValidityKind::Current,
        ValidityKind::Future,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ValidityKind::InstanceWise => "instance_wise",
            ValidityKind::PopulationWise => "population_wise",
            ValidityKind::Current => "current",
            ValidityKind::Future => "future",
        }
    }
}

impl FromStr for ValidityKind {
    type Err = RecourseError;

    fn from_str(s: &str) -> Result<Self> {
        ValidityKind::ALL
            .into_iter()
            .find(|k| k.name() == s || k.name().replace('_', "-") == s)
            .ok_or_else(|| RecourseError::Parse(format!("unknown validity kind `{s}`")))
    }
}

/// What validity is measured against besides the problems themselves.
#[derive(Clone, Copy, Default)]
pub struct ValidityOptions<'a> {
    /// Deployed network; when absent the problems' linear models are used.
    pub network: Option<&'a MlpModel>,
    /// Model trained on shifted data, required for [`ValidityKind::Future`].
    pub future: Option<&'a dyn Predictor>,
    pub ascent: Option<&'a AscentConfig>,
    /// Population ascent restarts; 0 means the default of 5.
    pub restarts: usize,
    pub seed: u64,
}

impl fmt::Debug for ValidityOptions<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ValidityOptions")
            .field("network", &self.network.is_some())
            .field("future", &self.future.is_some())
            .field("restarts", &self.restarts)
            .field("seed", &self.seed)
            .finish()
    }
}

pub const DEFAULT_POPULATION_RESTARTS: usize = 5;

/// Fraction of recourses predicted positive under the kind's model. The
/// worst cases use each problem's neighborhood.
pub fn validity(
    kind: ValidityKind,
    problems: &[RecourseProblem],
    recourses: &[FeatureVector],
    opts: &ValidityOptions<'_>,
) -> Result<f64> {
    if recourses.is_empty() {
        return Err(RecourseError::EmptyInput("recourse set"));
    }
    if problems.len() != recourses.len() {
        return Err(RecourseError::DimensionMismatch {
            expected: problems.len(),
            found: recourses.len(),
        });
    }
    let default_ascent = AscentConfig::default();
    let ascent = opts.ascent.unwrap_or(&default_ascent);
    let restarts = if opts.restarts == 0 {
        DEFAULT_POPULATION_RESTARTS
    } else {
        opts.restarts
    };
    let probs: Vec<f64> = match kind {
        ValidityKind::Current => match opts.network {
            Some(net) => recourses.iter().map(|x| net.predict_proba(x.features())).collect(),
            None => problems
                .iter()
                .zip(recourses)
                .map(|(p, x)| sigmoid(p.model.score(x)))
                .collect(),
        },
        ValidityKind::Future => {
            let future = opts
                .future
                .ok_or_else(|| RecourseError::invalid("future validity needs a model trained on shifted data"))?;
            recourses.iter().map(|x| future.predict_proba(x.features())).collect()
        }
        ValidityKind::InstanceWise => {
            let mut out = Vec::with_capacity(recourses.len());
            for (p, x) in problems.iter().zip(recourses) {
                out.push(match opts.network {
                    Some(net) => {
                        sigmoid(net.score_with(worst_case_nn_pga(net, x, p, ascent)?.model.values(), x.features()))
                    }
                    None => sigmoid(worst_case_glm(p, x)?.model.score(x)),
                });
            }
            out
        }
        ValidityKind::PopulationWise => match opts.network {
            Some(net) => {
                let worst = population_worst_case_nn_pga(net, problems, recourses, ascent, restarts, opts.seed)?;
                recourses
                    .iter()
                    .map(|x| sigmoid(net.score_with(worst.model.values(), x.features())))
                    .collect()
            }
            None => {
                let worst = population_worst_case_pga(problems, recourses, ascent, restarts, opts.seed)?;
                recourses.iter().map(|x| sigmoid(worst.model.score(x))).collect()
            }
        },
    };
    let valid = probs.iter().filter(|&&q| q >= VALIDITY_THRESHOLD).count();
    Ok(valid as f64 / recourses.len() as f64)
}

/// Mean implementation cost `‖x − x0‖₁`.
pub fn mean_cost(problems: &[RecourseProblem], recourses: &[FeatureVector]) -> Result<f64> {
    let costs: Vec<f64> = problems.iter().zip(recourses).map(|(p, x)| p.cost(x)).collect();
    Ok(mean_std(&costs)?.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub algorithm: String,
    pub lambda: f64,
    pub mean_cost: f64,
    pub validity: f64,
}

impl FrontierPoint {
    fn dominates(&self, other: &FrontierPoint) -> bool {
        self.mean_cost <= other.mean_cost
            && self.validity >= other.validity
            && (self.mean_cost < other.mean_cost || self.validity > other.validity)
    }
}

/// Non-dominated points, duplicates (equal cost and validity) kept once,
/// sorted by cost then by input order.
pub fn pareto_front(points: &[FrontierPoint]) -> Vec<FrontierPoint> {
    let mut kept: Vec<(usize, &FrontierPoint)> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if points.iter().any(|q| q.dominates(p)) {
            continue;
        }
        if kept
            .iter()
            .any(|(_, k)| k.mean_cost == p.mean_cost && k.validity == p.validity)
        {
            continue;
        }
        kept.push((i, p));
    }
    kept.sort_by(|a, b| a.1.mean_cost.total_cmp(&b.1.mean_cost).then(a.0.cmp(&b.0)));
    kept.into_iter().map(|(_, p)| p.clone()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierSweep {
    pub points: Vec<FrontierPoint>,
    /// Pareto subset of each algorithm's points, in algorithm order.
    pub pareto: Vec<FrontierPoint>,
}

/// Solves every problem for each `(algorithm, λ)` and records mean cost and
/// validity of the resulting recourses.
pub fn frontier_sweep(
    algorithms: &[Algorithm],
    lambdas: &[f64],
    problems: &[RecourseProblem],
    settings: &SolverSettings,
    kind: ValidityKind,
    opts: &ValidityOptions<'_>,
) -> Result<FrontierSweep> {
    if lambdas.is_empty() {
        return Err(RecourseError::EmptyInput("lambda grid"));
    }
    let mut points = Vec::new();
    let mut pareto = Vec::new();
    for &alg in algorithms {
        let mut own = Vec::with_capacity(lambdas.len());
        for &lambda in lambdas {
            let at_lambda: Vec<RecourseProblem> = problems.iter().map(|p| p.clone().with_lambda(lambda)).collect();
            let recourses = at_lambda
                .iter()
                .map(|p| alg.solve(p, settings).map(|s| s.recourse))
                .collect::<Result<Vec<_>>>()?;
            own.push(FrontierPoint {
                algorithm: alg.name().to_string(),
                lambda,
                mean_cost: mean_cost(&at_lambda, &recourses)?,
                validity: validity(kind, &at_lambda, &recourses, opts)?,
            });
        }
        pareto.extend(pareto_front(&own));
        points.extend(own);
    }
    Ok(FrontierSweep { points, pareto })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SparsityMode {
    #[default]
    Additive,
    /// Relative to `|x0_i|`; a zero origin counts any nonzero change.
    Multiplicative,
}

impl FromStr for SparsityMode {
    type Err = RecourseError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "additive" => Ok(SparsityMode::Additive),
            "multiplicative" => Ok(SparsityMode::Multiplicative),
            _ => Err(RecourseError::Parse(format!("unknown sparsity mode `{s}`"))),
        }
    }
}

/// Default change threshold.
pub const SPARSITY_EPSILON: f64 = 0.01;

pub fn changed_features(x: &[f64], x0: &[f64], epsilon: f64, mode: SparsityMode) -> usize {
    x.iter()
        .zip(x0)
        .filter(|(a, b)| {
            let diff = (*a - *b).abs();
            match mode {
                SparsityMode::Additive => diff >= epsilon,
                SparsityMode::Multiplicative if **b == 0.0 => diff > 0.0,
                SparsityMode::Multiplicative => diff >= epsilon * b.abs(),
            }
        })
        .count()
}

/// Mean number of changed features per recourse.
pub fn sparsity_report(
    recourses: &[FeatureVector],
    origins: &[FeatureVector],
    epsilon: f64,
    mode: SparsityMode,
) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(RecourseError::invalid("sparsity epsilon must be > 0"));
    }
    if recourses.len() != origins.len() {
        return Err(RecourseError::DimensionMismatch {
            expected: origins.len(),
            found: recourses.len(),
        });
    }
    let counts: Vec<f64> = recourses
        .iter()
        .zip(origins)
        .map(|(x, o)| changed_features(x.features(), o.features(), epsilon, mode) as f64)
        .collect();
    Ok(mean_std(&counts)?.0)
}

/// Restores actionability: immutable features go back to the origin, each
/// one-hot group is snapped to its largest coordinate (lowest index on
/// ties), and bounded features are clamped to `origin + bound`.
pub fn apply_feasibility_postprocess(
    recourse: &FeatureVector,
    origin: &FeatureVector,
    spec: &FeasibilitySpec,
) -> Result<FeatureVector> {
    if recourse.dim() != origin.dim() {
        return Err(RecourseError::DimensionMismatch {
            expected: origin.dim(),
            found: recourse.dim(),
        });
    }
    let d = recourse.dim();
    let in_range = |i: usize| {
        if i < d {
            Ok(())
        } else {
            Err(RecourseError::invalid(format!(
                "feasibility rule refers to feature {i} of {d}"
            )))
        }
    };
    let x0 = origin.features();
    let mut x = recourse.features().to_vec();
    for &i in &spec.immutable {
        in_range(i)?;
        x[i] = x0[i];
    }
    for g in &spec.groups {
        if g.is_empty() {
            continue;
        }
        in_range(g.end - 1)?;
        let k = g.start + argmax(&x[g.clone()]);
        for j in g.clone() {
            x[j] = if j == k { 1.0 } else { 0.0 };
        }
    }
    for &(i, bound) in &spec.max_increase {
        in_range(i)?;
        x[i] = x[i].min(x0[i] + bound);
    }
    FeatureVector::new(x)
}

/// Mean cost and instance-wise validity before and after post-processing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityDelta {
    pub algorithm: String,
    pub cost_before: f64,
    pub cost_after: f64,
    pub validity_before: f64,
    pub validity_after: f64,
}

pub fn feasibility_effect(
    algorithm: &str,
    problems: &[RecourseProblem],
    recourses: &[FeatureVector],
    spec: &FeasibilitySpec,
    opts: &ValidityOptions<'_>,
) -> Result<FeasibilityDelta> {
    let after = problems
        .iter()
        .zip(recourses)
        .map(|(p, x)| apply_feasibility_postprocess(x, &p.origin, spec))
        .collect::<Result<Vec<_>>>()?;
    Ok(FeasibilityDelta {
        algorithm: algorithm.to_string(),
        cost_before: mean_cost(problems, recourses)?,
        cost_after: mean_cost(problems, &after)?,
        validity_before: validity(ValidityKind::InstanceWise, problems, recourses, opts)?,
        validity_after: validity(ValidityKind::InstanceWise, problems, &after, opts)?,
    })
}

/// One long-format line of a report CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    pub model: String,
    pub algorithm: String,
    pub alpha: f64,
    pub lambda: f64,
    pub metric: String,
    pub value: f64,
    /// Sample standard deviation where the metric is a mean.
    pub std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityRow {
    pub algorithm: String,
    pub kind: ValidityKind,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsityRow {
    pub algorithm: String,
    pub mode: SparsityMode,
    pub epsilon: f64,
    pub mean_changed: f64,
}

/// Metrics of every algorithm for one `(α, λ)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportCell {
    pub alpha: f64,
    pub lambda: f64,
    pub prices: Vec<PriceRow>,
    pub validity: Vec<ValidityRow>,
    pub sparsity: Vec<SparsityRow>,
    pub feasibility: Vec<FeasibilityDelta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub dataset: String,
    pub model: String,
    pub cells: Vec<ReportCell>,
}

impl EvaluationReport {
    /// Flattens the report into CSV rows, cell by cell.
    pub fn rows(&self) -> Vec<ReportRow> {
        let mut out = Vec::new();
        for cell in &self.cells {
            let row = |algorithm: &str, metric: String, value: f64, std: Option<f64>| ReportRow {
                dataset: self.dataset.clone(),
                model: self.model.clone(),
                algorithm: algorithm.to_string(),
                alpha: cell.alpha,
                lambda: cell.lambda,
                metric,
                value,
                std,
            };
            for p in &cell.prices {
                out.push(row(&p.algorithm, "price".into(), p.mean, Some(p.std)));
                out.push(row(
                    &p.algorithm,
                    "price_percent_increase".into(),
                    p.percent_increase,
                    None,
                ));
                out.push(row(
                    &p.algorithm,
                    "price_best".into(),
                    f64::from(u8::from(p.best)),
                    None,
                ));
            }
            for v in &cell.validity {
                out.push(row(&v.algorithm, format!("validity_{}", v.kind.name()), v.value, None));
            }
            for s in &cell.sparsity {
                let mode = match s.mode {
                    SparsityMode::Additive => "additive",
                    SparsityMode::Multiplicative => "multiplicative",
                };
                out.push(row(&s.algorithm, format!("sparsity_{mode}"), s.mean_changed, None));
            }
            for f in &cell.feasibility {
                out.push(row(&f.algorithm, "cost_before_feasibility".into(), f.cost_before, None));
                out.push(row(&f.algorithm, "cost_after_feasibility".into(), f.cost_after, None));
                out.push(row(
                    &f.algorithm,
                    "validity_before_feasibility".into(),
                    f.validity_before,
                    None,
                ));
                out.push(row(
                    &f.algorithm,
                    "validity_after_feasibility".into(),
                    f.validity_after,
                    None,
                ));
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_report_csv(&self.rows(), writer)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Writes rows with the header
/// `dataset,model,algorithm,alpha,lambda,metric,value,std`.
pub fn write_report_csv<W: Write>(rows: &[ReportRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "dataset",
        "model",
        "algorithm",
        "alpha",
        "lambda",
        "metric",
        "value",
        "std",
    ])?;
    for r in rows {
        w.write_record([
            r.dataset.clone(),
            r.model.clone(),
            r.algorithm.clone(),
            r.alpha.to_string(),
            r.lambda.to_string(),
            r.metric.clone(),
            r.value.to_string(),
            r.std.map(|s| s.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes frontier points with the header
/// `algorithm,lambda,mean_cost,validity,pareto`.
pub fn write_frontier_csv<W: Write>(sweep: &FrontierSweep, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["algorithm", "lambda", "mean_cost", "validity", "pareto"])?;
    for p in &sweep.points {
        let on_front = sweep.pareto.contains(p);
        w.write_record([
            p.algorithm.clone(),
            p.lambda.to_string(),
            p.mean_cost.to_string(),
            p.validity.to_string(),
            on_front.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LinearModel, Neighborhood};

    fn fv(v: &[f64]) -> FeatureVector {
        FeatureVector::new(v.to_vec()).unwrap()
    }

    fn problem(origin: &[f64], alpha: f64) -> RecourseProblem {
        let d = origin.len();
        let mut w = vec![0.0; d];
        w[0] = 1.0;
        RecourseProblem::new(
            fv(origin),
            LinearModel::new(w, 0.0).unwrap(),
            Neighborhood::new(NormOrder::L1, alpha).unwrap(),
            0.1,
        )
        .unwrap()
    }

    #[test]
    fn golden_percentages() {
        for (best, other, pct) in [
            (0.68, 0.83, 22.1),
            (0.14, 0.28, 100.0),
            (0.03, 0.26, 766.7),
            (0.04, 1.04, 2500.0),
        ] {
            let rows = price_rows_from_means(&[("alg1", best), ("roar", other)]).unwrap();
            assert!(rows[0].best && !rows[1].best);
            assert_eq!(rows[0].percent_increase, 0.0);
            assert!(
                (rows[1].percent_increase - pct).abs() <= 0.1 + 1e-9,
                "{pct} vs {}",
                rows[1].percent_increase
            );
        }
        let single = price_rows_from_means(&[("alg1", 0.5)]).unwrap();
        assert_eq!(single[0].percent_increase, 0.0);
        assert!(compute_price_report(&[AlgorithmRecourses {
            algorithm: "a".into(),
            problems: vec![],
            recourses: vec![],
        }])
        .is_err());
    }

    #[test]
    fn current_validity_example() {
        let problems = vec![problem(&[0.0], 0.0), problem(&[0.0], 0.0)];
        let recourses = vec![fv(&[1.0]), fv(&[-1.0])];
        let opts = ValidityOptions::default();
        assert_eq!(
            validity(ValidityKind::Current, &problems, &recourses, &opts).unwrap(),
            0.5
        );
        assert_eq!(
            validity(ValidityKind::InstanceWise, &problems, &recourses, &opts).unwrap(),
            0.5
        );
        assert!(validity(ValidityKind::Future, &problems, &recourses, &opts).is_err());
    }

    #[test]
    fn pareto_examples() {
        let pt = |c: f64, v: f64| FrontierPoint {
            algorithm: "a".into(),
            lambda: 0.0,
            mean_cost: c,
            validity: v,
        };
        let front = pareto_front(&[pt(1.0, 0.5), pt(2.0, 0.9), pt(3.0, 0.8)]);
        assert_eq!(front, vec![pt(1.0, 0.5), pt(2.0, 0.9)]);
        assert_eq!(pareto_front(&[pt(1.0, 0.5)]), vec![pt(1.0, 0.5)]);
        assert_eq!(pareto_front(&[pt(1.0, 0.5), pt(1.0, 0.5)]), vec![pt(1.0, 0.5)]);
    }

    #[test]
    fn sparsity_examples() {
        let x0 = [0.1, 0.2, 0.3];
        assert_eq!(
            changed_features(&[0.1, 0.25, 0.305], &x0, 0.01, SparsityMode::Additive),
            1
        );
        assert_eq!(changed_features(&x0, &x0, 0.01, SparsityMode::Additive), 0);
        assert_eq!(changed_features(&[1.05], &[1.0], 0.1, SparsityMode::Multiplicative), 0);
        assert_eq!(changed_features(&[1e-9], &[0.0], 0.1, SparsityMode::Multiplicative), 1);
        assert!(sparsity_report(&[fv(&[0.0])], &[fv(&[0.0])], 0.0, SparsityMode::Additive).is_err());
    }

    #[test]
    fn feasibility_examples() {
        let spec = FeasibilitySpec {
            groups: vec![1..4, 4..6],
            immutable: vec![],
            max_increase: vec![(0, 0.04)],
        };
        let origin = fv(&[0.30, 1.0, 0.0, 0.0, 1.0, 0.0]);
        let x = fv(&[0.40, 0.2, 0.7, 0.1, 0.5, 0.5]);
        let out = apply_feasibility_postprocess(&x, &origin, &spec).unwrap();
        assert!((out.features()[0] - 0.34).abs() < 1e-12);
        assert_eq!(&out.features()[1..], &[0.0, 1.0, 0.0, 1.0, 0.0]);
        assert_eq!(apply_feasibility_postprocess(&out, &origin, &spec).unwrap(), out);
    }

    #[test]
    fn report_csv_header_and_rows() {
        let report = EvaluationReport {
            dataset: "toy".into(),
            model: "lr".into(),
            cells: vec![ReportCell {
                alpha: 0.1,
                lambda: 0.01,
                prices: price_rows_from_means(&[("alg1", 0.5)]).unwrap(),
                validity: vec![],
                sparsity: vec![],
                feasibility: vec![],
            }],
        };
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("dataset,model,algorithm,alpha,lambda,metric,value,std\n"));
        assert!(text.contains("toy,lr,alg1,0.1,0.01,price,0.5,0\n"));
    }
}
