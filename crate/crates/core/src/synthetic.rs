//! Seeded synthetic data: a tabular dataset with a shifted twin, and a
//! ready-made linear recourse benchmark.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{Actionability, ColumnKind, ColumnSpec, DatasetSchema, RawTable, RawValue};
use crate::error::{RecourseError, Result};
use crate::model::{sigmoid, FeatureVector, LinearModel, Neighborhood, NormOrder, RecourseProblem};
use crate::seed;

/// Shape of the generated tabular dataset. The encoded dimension is
/// `numeric + categories`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub rows: usize,
    pub numeric: usize,
    pub categories: usize,
    /// Scale of the perturbation applied to the generating weights of the
    /// shifted twin.
    pub shift: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            rows: 1000,
            numeric: 7,
            categories: 3,
            shift: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub schema: DatasetSchema,
    pub table: RawTable,
    pub shifted: RawTable,
}

const NUMERIC_MEAN: f64 = 50.0;
const NUMERIC_SD: f64 = 10.0;

/// Schema of the generated data: numeric columns `x0, x1, …` (the first
/// immutable, the second allowed to grow by at most 2 units), one
/// categorical column `group`, and a binary `label`.
pub fn synthetic_schema(cfg: &SyntheticConfig) -> DatasetSchema {
    let mut columns: Vec<ColumnSpec> = (0..cfg.numeric)
        .map(|j| ColumnSpec {
            name: format!("x{j}"),
            kind: ColumnKind::Numeric,
            values: Vec::new(),
            actionability: match j {
                0 => Actionability::Immutable,
                1 => Actionability::MaxIncrease(2.0),
                _ => Actionability::Free,
            },
        })
        .collect();
    if cfg.categories > 0 {
        columns.push(ColumnSpec {
            name: "group".into(),
            kind: ColumnKind::Categorical,
            values: (0..cfg.categories).map(|k| format!("c{k}")).collect(),
            actionability: Actionability::Free,
        });
    }
    columns.push(ColumnSpec {
        name: "label".into(),
        kind: ColumnKind::Target,
        values: Vec::new(),
        actionability: Actionability::Free,
    });
    DatasetSchema {
        columns,
        positive_label: "1".into(),
        shifted_path: None,
    }
}

/// Generates a dataset whose labels follow a logistic model of the
/// standardized features, plus a shifted twin drawn from perturbed weights.
pub fn generate(cfg: &SyntheticConfig) -> Result<SyntheticData> {
    if cfg.rows == 0 || cfg.numeric + cfg.categories == 0 {
        return Err(RecourseError::invalid(
            "synthetic data needs rows and at least one feature",
        ));
    }
    let schema = synthetic_schema(cfg);
    let n_weights = cfg.numeric + cfg.categories;
    let mut rng = seed::rng(cfg.seed, seed::stream::SYNTHETIC, 0);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let weights: Vec<f64> = (0..n_weights).map(|_| 2.0 * unit.sample(&mut rng)).collect();
    let mut shift_rng = seed::rng(cfg.seed, seed::stream::SHIFT, 0);
    let shifted_weights: Vec<f64> = weights
        .iter()
        .map(|w| w + cfg.shift * unit.sample(&mut shift_rng))
        .collect();

    let table = draw_table(cfg, &weights, &mut seed::rng(cfg.seed, seed::stream::SYNTHETIC, 1))?;
    let shifted = draw_table(cfg, &shifted_weights, &mut seed::rng(cfg.seed, seed::stream::SHIFT, 1))?;
    Ok(SyntheticData { schema, table, shifted })
}

fn draw_table<R: Rng>(cfg: &SyntheticConfig, weights: &[f64], rng: &mut R) -> Result<RawTable> {
    let numeric = Normal::new(NUMERIC_MEAN, NUMERIC_SD).map_err(|e| RecourseError::invalid(e.to_string()))?;
    let mut table = RawTable {
        rows: Vec::with_capacity(cfg.rows),
        labels: Vec::with_capacity(cfg.rows),
    };
    for _ in 0..cfg.rows {
        let mut row = Vec::with_capacity(cfg.numeric + 1);
        let mut score = 0.0;
        for w in weights.iter().take(cfg.numeric) {
            // two decimals, as a CSV export would carry
            let v = (numeric.sample(rng) * 100.0).round() / 100.0;
            score += w * (v - NUMERIC_MEAN) / NUMERIC_SD;
            row.push(RawValue::Numeric(v));
        }
        if cfg.categories > 0 {
            let k = rng.random_range(0..cfg.categories);
            score += weights[cfg.numeric + k];
            row.push(RawValue::Category(k));
        }
        let positive = rng.random::<f64>() < sigmoid(score);
        table.rows.push(row);
        table.labels.push(u8::from(positive));
    }
    Ok(table)
}

/// A fixed linear model with negatively classified origins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkConfig {
    pub instances: usize,
    pub dim: usize,
    pub p: NormOrder,
    pub alpha: f64,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            instances: 200,
            dim: 10,
            p: NormOrder::L1,
            alpha: 0.5,
            lambda: 0.1,
            seed: 0,
        }
    }
}

/// Model of the benchmark: weights uniform in `[−2, 2]` rescaled so that
/// `‖w‖_∞ = 2`, intercept putting the decision boundary through the center
/// of the unit cube.
pub fn benchmark_model(dim: usize, seed_value: u64) -> Result<LinearModel> {
    if dim == 0 {
        return Err(RecourseError::invalid("benchmark dimension must be positive"));
    }
    let mut rng = seed::rng(seed_value, seed::stream::SYNTHETIC, 2);
    let mut w: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..=2.0)).collect();
    let top = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if top > 0.0 {
        w.iter_mut().for_each(|v| *v *= 2.0 / top);
    } else {
        w[0] = 2.0;
    }
    let intercept = -0.5 * w.iter().sum::<f64>();
    LinearModel::new(w, intercept)
}

/// Problems sharing [`benchmark_model`], with origins drawn uniformly from
/// the unit cube and kept only when the model scores them negative.
pub fn linear_benchmark(cfg: &BenchmarkConfig) -> Result<Vec<RecourseProblem>> {
    let model = benchmark_model(cfg.dim, cfg.seed)?;
    let nb = Neighborhood::new(cfg.p, cfg.alpha)?;
    let mut rng = seed::rng(cfg.seed, seed::stream::SYNTHETIC, 3);
    let mut out = Vec::with_capacity(cfg.instances);
    while out.len() < cfg.instances {
        let x: Vec<f64> = (0..cfg.dim).map(|_| rng.random::<f64>()).collect();
        let x = FeatureVector::new(x)?;
        if model.score(&x) < 0.0 {
            out.push(RecourseProblem::new(x, model.clone(), nb, cfg.lambda)?);
        }
    }
    Ok(out)
}
