//! Cross-validated recourse experiments: solve every `(α, λ)` cell with every
//! algorithm, then report price, validity, sparsity, and feasibility.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{DatasetSchema, RawTable};
use crate::error::{RecourseError, Result};
use crate::eval::{
    compute_price_report, feasibility_effect, pareto_front, sparsity_report, validity, Algorithm, AlgorithmRecourses,
    EvaluationReport, FeasibilityDelta, FrontierPoint, FrontierSweep, ReportCell, SolverSettings, SparsityMode,
    SparsityRow, ValidityKind, ValidityOptions, ValidityRow, DEFAULT_POPULATION_RESTARTS, SPARSITY_EPSILON,
};
use crate::model::{FeatureVector, LinearModel, Neighborhood, NormOrder, RecourseProblem};
use crate::pipeline::{train_bundle, Bundle, RecourseInstance, TrainSettings};
use crate::roar::RoarConfig;
use crate::seed;
use crate::surrogate::{Predictor, SurrogateConfig};
use crate::synthetic::{generate, SyntheticConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dataset: String,
    pub synthetic: SyntheticConfig,
    pub train: TrainSettings,
    /// Recourse instances in total, drawn evenly from the held-out folds.
    pub instances: usize,
    pub alphas: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub algorithms: Vec<Algorithm>,
    pub roar: RoarConfig,
    pub population_restarts: usize,
    pub sparsity_epsilon: f64,
    pub surrogate: SurrogateConfig,
    /// Root of every random stream; overrides the nested seeds.
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: "synthetic".into(),
            synthetic: SyntheticConfig::default(),
            train: TrainSettings::default(),
            instances: 200,
            alphas: vec![0.1, 0.5],
            lambdas: vec![0.01, 0.1],
            algorithms: Algorithm::ALL.to_vec(),
            roar: RoarConfig::default(),
            population_restarts: DEFAULT_POPULATION_RESTARTS,
            sparsity_epsilon: SPARSITY_EPSILON,
            surrogate: SurrogateConfig::default(),
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() || self.lambdas.is_empty() || self.algorithms.is_empty() {
            return Err(RecourseError::invalid(
                "experiment needs at least one alpha, lambda, and algorithm",
            ));
        }
        if self.instances == 0 {
            return Err(RecourseError::invalid("experiment needs at least one instance"));
        }
        if !(self.sparsity_epsilon > 0.0) {
            return Err(RecourseError::invalid("sparsity epsilon must be > 0"));
        }
        self.roar.validate()
    }

    fn solver_settings(&self) -> SolverSettings {
        SolverSettings {
            roar: self.roar.clone(),
            ..Default::default()
        }
    }
}

/// One solved recourse, as written to `recourses.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecourseRecord {
    pub id: usize,
    pub fold: usize,
    pub algorithm: Algorithm,
    pub alpha: f64,
    pub lambda: f64,
    /// Certified worst-case price under the algorithm's norm.
    pub price: f64,
    pub cost: f64,
    pub converged: bool,
    pub recourse: Vec<f64>,
}

pub fn write_recourse_csv<W: Write>(records: &[RecourseRecord], writer: W) -> Result<()> {
    let dim = records.first().map_or(0, |r| r.recourse.len());
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = [
        "id",
        "fold",
        "algorithm",
        "alpha",
        "lambda",
        "price",
        "cost",
        "converged",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((0..dim).map(|j| format!("x{j}")));
    w.write_record(&header)?;
    for r in records {
        if r.recourse.len() != dim {
            return Err(RecourseError::DimensionMismatch {
                expected: dim,
                found: r.recourse.len(),
            });
        }
        let mut rec = vec![
            r.id.to_string(),
            r.fold.to_string(),
            r.algorithm.name().to_string(),
            r.alpha.to_string(),
            r.lambda.to_string(),
            r.price.to_string(),
            r.cost.to_string(),
            r.converged.to_string(),
        ];
        rec.extend(r.recourse.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_recourse_csv<R: Read>(reader: R) -> Result<Vec<RecourseRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let field = |k: usize, name: &str| -> Result<&str> {
            rec.get(k).ok_or_else(|| RecourseError::Data {
                row,
                column: name.into(),
                message: "missing field".into(),
            })
        };
        let num = |k: usize, name: &str| -> Result<f64> {
            let s = field(k, name)?;
            s.parse().map_err(|_| RecourseError::Data {
                row,
                column: name.into(),
                message: format!("not a number: `{s}`"),
            })
        };
        let int = |k: usize, name: &str| -> Result<usize> {
            let s = field(k, name)?;
            s.parse().map_err(|_| RecourseError::Data {
                row,
                column: name.into(),
                message: format!("not an integer: `{s}`"),
            })
        };
        let recourse = (8..rec.len()).map(|k| num(k, "recourse")).collect::<Result<Vec<_>>>()?;
        out.push(RecourseRecord {
            id: int(0, "id")?,
            fold: int(1, "fold")?,
            algorithm: field(2, "algorithm")?.parse()?,
            alpha: num(3, "alpha")?,
            lambda: num(4, "lambda")?,
            price: num(5, "price")?,
            cost: num(6, "cost")?,
            converged: field(7, "converged")? == "true",
            recourse,
        });
    }
    Ok(out)
}

/// Up to `total` negative held-out instances, `⌈total / folds⌉` per fold.
pub fn select_instances(bundle: &Bundle, table: &RawTable, total: usize) -> Result<Vec<RecourseInstance>> {
    let per_fold = total.div_ceil(bundle.folds.len().max(1));
    let mut instances = bundle.negative_instances(table, Some(per_fold))?;
    instances.truncate(total);
    if instances.is_empty() {
        return Err(RecourseError::EmptyInput("negative held-out instances"));
    }
    Ok(instances)
}

/// The linear model each instance's recourse is solved against. Network
/// surrogates use a per-instance seed derived from `seed_value`.
pub fn linearize_all(
    bundle: &Bundle,
    instances: &[RecourseInstance],
    surrogate: &SurrogateConfig,
    seed_value: u64,
) -> Result<Vec<LinearModel>> {
    instances
        .iter()
        .map(|inst| {
            let cfg = SurrogateConfig {
                seed: seed::derive(seed_value, seed::stream::SURROGATE, inst.id as u64),
                ..surrogate.clone()
            };
            bundle.folds[inst.fold].linearize(&inst.origin, &cfg)
        })
        .collect()
}

fn problems_for(
    instances: &[RecourseInstance],
    linear: &[LinearModel],
    p: NormOrder,
    alpha: f64,
    lambda: f64,
) -> Result<Vec<RecourseProblem>> {
    let nb = Neighborhood::new(p, alpha)?;
    instances
        .iter()
        .zip(linear)
        .map(|(inst, m)| RecourseProblem::new(inst.origin.clone(), m.clone(), nb, lambda))
        .collect()
}

/// Solves every instance with one algorithm.
pub fn solve_cell(
    instances: &[RecourseInstance],
    linear: &[LinearModel],
    algorithm: Algorithm,
    alpha: f64,
    lambda: f64,
    settings: &SolverSettings,
) -> Result<Vec<RecourseRecord>> {
    let problems = problems_for(instances, linear, algorithm.norm(), alpha, lambda)?;
    instances
        .iter()
        .zip(&problems)
        .map(|(inst, pr)| {
            let sol = algorithm.solve(pr, settings)?;
            Ok(RecourseRecord {
                id: inst.id,
                fold: inst.fold,
                algorithm,
                alpha,
                lambda,
                price: sol.price,
                cost: pr.cost(&sol.recourse),
                converged: sol.converged,
                recourse: sol.recourse.into_features(),
            })
        })
        .collect()
}

/// Validity pooled over folds: each fold is scored against its own models
/// and the fractions are weighted by fold size.
#[allow(clippy::too_many_arguments)]
fn pooled_validity(
    kind: ValidityKind,
    bundle: &Bundle,
    instances: &[RecourseInstance],
    problems: &[RecourseProblem],
    recourses: &[FeatureVector],
    restarts: usize,
    seed_value: u64,
) -> Result<Option<f64>> {
    let mut valid = 0.0;
    for (k, fold) in bundle.folds.iter().enumerate() {
        let idx: Vec<usize> = (0..instances.len()).filter(|&i| instances[i].fold == k).collect();
        if idx.is_empty() {
            continue;
        }
        let future = fold.future.as_ref().map(|m| m as &dyn Predictor);
        if kind == ValidityKind::Future && future.is_none() {
            return Ok(None);
        }
        let opts = ValidityOptions {
            network: fold.network(),
            future,
            ascent: None,
            restarts,
            seed: seed::derive(seed_value, seed::stream::PGA_RESTART, k as u64),
        };
        let pr: Vec<RecourseProblem> = idx.iter().map(|&i| problems[i].clone()).collect();
        let xs: Vec<FeatureVector> = idx.iter().map(|&i| recourses[i].clone()).collect();
        valid += validity(kind, &pr, &xs, &opts)? * idx.len() as f64;
    }
    Ok(Some(valid / instances.len() as f64))
}

fn pooled_feasibility(
    algorithm: Algorithm,
    bundle: &Bundle,
    instances: &[RecourseInstance],
    problems: &[RecourseProblem],
    recourses: &[FeatureVector],
) -> Result<FeasibilityDelta> {
    let n = instances.len() as f64;
    let mut acc = FeasibilityDelta {
        algorithm: algorithm.name().into(),
        cost_before: 0.0,
        cost_after: 0.0,
        validity_before: 0.0,
        validity_after: 0.0,
    };
    for (k, fold) in bundle.folds.iter().enumerate() {
        let idx: Vec<usize> = (0..instances.len()).filter(|&i| instances[i].fold == k).collect();
        if idx.is_empty() {
            continue;
        }
        let pr: Vec<RecourseProblem> = idx.iter().map(|&i| problems[i].clone()).collect();
        let xs: Vec<FeatureVector> = idx.iter().map(|&i| recourses[i].clone()).collect();
        let opts = ValidityOptions {
            network: fold.network(),
            ..Default::default()
        };
        let d = feasibility_effect(algorithm.name(), &pr, &xs, &fold.feasibility_spec(), &opts)?;
        let w = idx.len() as f64 / n;
        acc.cost_before += w * d.cost_before;
        acc.cost_after += w * d.cost_after;
        acc.validity_before += w * d.validity_before;
        acc.validity_after += w * d.validity_after;
    }
    Ok(acc)
}

/// Metrics of one `(α, λ)` cell from solved records. `records` must hold,
/// for each algorithm listed, one record per instance in instance order.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_cell(
    bundle: &Bundle,
    instances: &[RecourseInstance],
    linear: &[LinearModel],
    alpha: f64,
    lambda: f64,
    records: &[(Algorithm, Vec<RecourseRecord>)],
    cfg: &ExperimentConfig,
) -> Result<ReportCell> {
    let mut runs = Vec::new();
    let mut cell = ReportCell {
        alpha,
        lambda,
        prices: Vec::new(),
        validity: Vec::new(),
        sparsity: Vec::new(),
        feasibility: Vec::new(),
    };
    let origins: Vec<FeatureVector> = instances.iter().map(|i| i.origin.clone()).collect();
    for (alg, recs) in records {
        if recs.len() != instances.len() || recs.iter().zip(instances).any(|(r, i)| r.id != i.id) {
            return Err(RecourseError::invalid(format!(
                "records of {alg} do not match the instances"
            )));
        }
        let problems = problems_for(instances, linear, alg.norm(), alpha, lambda)?;
        let recourses = recs
            .iter()
            .map(|r| FeatureVector::new(r.recourse.clone()))
            .collect::<Result<Vec<_>>>()?;
        for kind in ValidityKind::ALL {
            if let Some(value) = pooled_validity(
                kind,
                bundle,
                instances,
                &problems,
                &recourses,
                cfg.population_restarts,
                cfg.seed,
            )? {
                cell.validity.push(ValidityRow {
                    algorithm: alg.name().into(),
                    kind,
                    value,
                });
            }
        }
        for mode in [SparsityMode::Additive, SparsityMode::Multiplicative] {
            cell.sparsity.push(SparsityRow {
                algorithm: alg.name().into(),
                mode,
                epsilon: cfg.sparsity_epsilon,
                mean_changed: sparsity_report(&recourses, &origins, cfg.sparsity_epsilon, mode)?,
            });
        }
        cell.feasibility
            .push(pooled_feasibility(*alg, bundle, instances, &problems, &recourses)?);
        runs.push(AlgorithmRecourses {
            algorithm: alg.name().into(),
            problems,
            recourses,
        });
    }
    cell.prices = compute_price_report(&runs)?;
    Ok(cell)
}

/// Per-algorithm cost–validity points over a `λ` grid at fixed `α`.
#[allow(clippy::too_many_arguments)]
pub fn frontier(
    bundle: &Bundle,
    instances: &[RecourseInstance],
    linear: &[LinearModel],
    alpha: f64,
    lambdas: &[f64],
    kind: ValidityKind,
    cfg: &ExperimentConfig,
) -> Result<FrontierSweep> {
    if lambdas.is_empty() {
        return Err(RecourseError::EmptyInput("lambda grid"));
    }
    let settings = cfg.solver_settings();
    let mut points = Vec::new();
    let mut pareto = Vec::new();
    for &alg in &cfg.algorithms {
        let mut own = Vec::new();
        for &lambda in lambdas {
            let recs = solve_cell(instances, linear, alg, alpha, lambda, &settings)?;
            let problems = problems_for(instances, linear, alg.norm(), alpha, lambda)?;
            let recourses = recs
                .iter()
                .map(|r| FeatureVector::new(r.recourse.clone()))
                .collect::<Result<Vec<_>>>()?;
            let value = pooled_validity(
                kind,
                bundle,
                instances,
                &problems,
                &recourses,
                cfg.population_restarts,
                cfg.seed,
            )?
            .ok_or_else(|| RecourseError::invalid("future validity needs models trained on shifted data"))?;
            own.push(FrontierPoint {
                algorithm: alg.name().into(),
                lambda,
                mean_cost: recs.iter().map(|r| r.cost).sum::<f64>() / recs.len() as f64,
                validity: value,
            });
        }
        pareto.extend(pareto_front(&own));
        points.extend(own);
    }
    Ok(FrontierSweep { points, pareto })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub bundle: Bundle,
    pub records: Vec<RecourseRecord>,
    pub report: EvaluationReport,
}

#[derive(Serialize)]
struct Summary<'a> {
    config: &'a ExperimentConfig,
    fold_accuracy: Vec<f64>,
    instances: usize,
    report: &'a EvaluationReport,
}

impl ExperimentOutput {
    /// Writes `recourses.csv`, `report.csv`, and `summary.json` to `dir`.
    pub fn write(&self, dir: &Path, cfg: &ExperimentConfig) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_recourse_csv(&self.records, std::fs::File::create(dir.join("recourses.csv"))?)?;
        self.report.write_csv(std::fs::File::create(dir.join("report.csv"))?)?;
        let summary = Summary {
            config: cfg,
            fold_accuracy: self.bundle.folds.iter().map(|f| f.test_accuracy).collect(),
            instances: self.records.first().map_or(0, |f| {
                self.records
                    .iter()
                    .filter(|r| r.algorithm == f.algorithm && r.alpha == f.alpha && r.lambda == f.lambda)
                    .count()
            }),
            report: &self.report,
        };
        std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
        Ok(())
    }
}

/// Trains a bundle on `table`, selects instances, and evaluates every cell.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    schema: &DatasetSchema,
    table: &RawTable,
    shifted: Option<&RawTable>,
) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let settings = TrainSettings {
        seed: cfg.seed,
        ..cfg.train.clone()
    };
    let bundle = train_bundle(schema, table, shifted, &settings)?;
    let instances = select_instances(&bundle, table, cfg.instances)?;
    log::info!(
        "{} recourse instances across {} folds",
        instances.len(),
        bundle.folds.len()
    );
    let linear = linearize_all(&bundle, &instances, &cfg.surrogate, cfg.seed)?;
    let solver = cfg.solver_settings();

    let mut all = Vec::new();
    let mut cells = Vec::new();
    for &alpha in &cfg.alphas {
        for &lambda in &cfg.lambdas {
            let mut per_alg = Vec::new();
            for &alg in &cfg.algorithms {
                log::info!("alpha {alpha}, lambda {lambda}: {alg}");
                per_alg.push((alg, solve_cell(&instances, &linear, alg, alpha, lambda, &solver)?));
            }
            cells.push(evaluate_cell(
                &bundle, &instances, &linear, alpha, lambda, &per_alg, cfg,
            )?);
            all.extend(per_alg.into_iter().flat_map(|(_, r)| r));
        }
    }
    Ok(ExperimentOutput {
        report: EvaluationReport {
            dataset: cfg.dataset.clone(),
            model: settings.model.name().into(),
            cells,
        },
        bundle,
        records: all,
    })
}

/// [`run_experiment`] on generated data seeded by `cfg.seed`.
pub fn run_synthetic_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let data = generate(&SyntheticConfig {
        seed: cfg.seed,
        ..cfg.synthetic.clone()
    })?;
    run_experiment(cfg, &data.schema, &data.table, Some(&data.shifted))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::train::TrainConfig;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            synthetic: SyntheticConfig {
                rows: 80,
                ..Default::default()
            },
            train: TrainSettings {
                folds: 2,
                train: TrainConfig {
                    epochs: 20,
                    ..Default::default()
                },
                ..Default::default()
            },
            instances: 6,
            alphas: vec![0.1],
            lambdas: vec![0.1],
            roar: RoarConfig {
                outer_steps: 50,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn small_experiment_is_deterministic() {
        let cfg = small();
        let a = run_synthetic_experiment(&cfg).unwrap();
        let b = run_synthetic_experiment(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.report.cells.len(), 1);
        assert_eq!(a.report.cells[0].prices.iter().filter(|p| p.best).count(), 1);
        let mut buf = Vec::new();
        write_recourse_csv(&a.records, &mut buf).unwrap();
        assert_eq!(read_recourse_csv(buf.as_slice()).unwrap(), a.records);
    }
}
