//! Cross-validated model bundles: per-fold encoders, classifiers, and
//! shifted-data models, with their on-disk layout.
//!
//! A bundle directory holds `manifest.json` plus, for fold `k`,
//! `fold{k}.model`, `fold{k}.encoder.json`, and optionally
//! `fold{k}.future.model`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{encode_scale, encode_with, kfold_split, DatasetSchema, Encoder, FeasibilitySpec, RawTable};
use crate::error::{RecourseError, Result};
use crate::model::{FeatureVector, LinearModel};
use crate::seed;
use crate::surrogate::{fit_local_linear, Predictor, SurrogateConfig};
use crate::train::{accuracy, train_logreg, train_mlp, MlpModel, TrainConfig, TrainedModel, DEFAULT_HIDDEN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Logistic regression.
    #[default]
    Lr,
    /// ReLU network.
    Nn,
}

impl std::str::FromStr for ModelKind {
    type Err = RecourseError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lr" => Ok(ModelKind::Lr),
            "nn" => Ok(ModelKind::Nn),
            _ => Err(RecourseError::Parse(format!(
                "unknown model kind `{s}` (expected lr or nn)"
            ))),
        }
    }
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Lr => "lr",
            ModelKind::Nn => "nn",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSettings {
    pub model: ModelKind,
    pub folds: usize,
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
    pub seed: u64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            model: ModelKind::Lr,
            folds: 5,
            hidden: DEFAULT_HIDDEN.to_vec(),
            train: TrainConfig::default(),
            seed: 0,
        }
    }
}

/// One cross-validation fold: the model is trained on every row outside
/// `test_rows`, with an encoder fitted on the same rows.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldModel {
    pub encoder: Encoder,
    pub model: TrainedModel,
    /// Model trained on the shifted dataset under the same encoder.
    pub future: Option<TrainedModel>,
    pub test_rows: Vec<usize>,
    pub test_accuracy: f64,
}

impl FoldModel {
    pub fn network(&self) -> Option<&MlpModel> {
        match &self.model {
            TrainedModel::Mlp(m) => Some(m),
            TrainedModel::Linear(_) => None,
        }
    }

    pub fn feasibility_spec(&self) -> FeasibilitySpec {
        self.encoder.feasibility_spec()
    }

    /// The linear model recourse is computed against: the classifier itself
    /// for logistic regression, a local surrogate around `origin` otherwise.
    pub fn linearize(&self, origin: &FeatureVector, surrogate: &SurrogateConfig) -> Result<LinearModel> {
        match &self.model {
            TrainedModel::Linear(m) => Ok(m.clone()),
            TrainedModel::Mlp(m) => fit_local_linear(m, origin, surrogate),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub schema: DatasetSchema,
    /// Table the bundle was trained on, as given at training time.
    pub data_path: Option<PathBuf>,
    pub settings: TrainSettings,
    pub folds: Vec<FoldModel>,
}

/// An origin from a held-out fold that its fold model classifies negative.
#[derive(Debug, Clone, PartialEq)]
pub struct RecourseInstance {
    /// Row of the source table.
    pub id: usize,
    pub fold: usize,
    pub origin: FeatureVector,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    format: String,
    #[serde(default)]
    data_path: Option<PathBuf>,
    schema: DatasetSchema,
    settings: TrainSettings,
    folds: Vec<FoldManifest>,
}

#[derive(Serialize, Deserialize)]
struct FoldManifest {
    test_rows: Vec<usize>,
    test_accuracy: f64,
    has_future: bool,
}

const MANIFEST_FORMAT: &str = "robust-recourse-bundle v1";

fn fit(
    kind: ModelKind,
    x: &[Vec<f64>],
    y: &[u8],
    settings: &TrainSettings,
    fold: usize,
    shifted: bool,
) -> Result<TrainedModel> {
    let mut cfg = settings.train.clone();
    cfg.seed = seed::derive(
        settings.seed,
        seed::stream::INIT,
        (fold as u64) * 2 + u64::from(shifted),
    );
    Ok(match kind {
        ModelKind::Lr => TrainedModel::Linear(train_logreg(x, y, &cfg)?),
        ModelKind::Nn => TrainedModel::Mlp(train_mlp(x, y, &settings.hidden, &cfg)?),
    })
}

/// Splits `table` into folds and trains one model per fold. With `shifted`,
/// each fold also gets a model trained on the whole shifted table.
pub fn train_bundle(
    schema: &DatasetSchema,
    table: &RawTable,
    shifted: Option<&RawTable>,
    settings: &TrainSettings,
) -> Result<Bundle> {
    let folds = kfold_split(table.len(), settings.folds, settings.seed)?;
    let mut out = Vec::with_capacity(folds.len());
    for (k, test_rows) in folds.iter().enumerate() {
        let mut train_rows: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != k)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        train_rows.sort_unstable();
        let data = encode_scale(table, schema, &train_rows)?;
        let (x, y) = data.select(&train_rows);
        let model = fit(settings.model, &x, &y, settings, k, false)?;
        let (tx, ty) = data.select(test_rows);
        let test_accuracy = accuracy(&model, &tx, &ty);
        let future = match shifted {
            Some(s) => {
                let sd = encode_with(s, data.encoder.clone())?;
                Some(fit(settings.model, &sd.x, &sd.y, settings, k, true)?)
            }
            None => None,
        };
        out.push(FoldModel {
            encoder: data.encoder,
            model,
            future,
            test_rows: test_rows.clone(),
            test_accuracy,
        });
    }
    Ok(Bundle {
        schema: schema.clone(),
        data_path: None,
        settings: settings.clone(),
        folds: out,
    })
}

impl Bundle {
    /// Held-out rows each fold model classifies negative, fold by fold in
    /// ascending row order, at most `per_fold` from each fold.
    pub fn negative_instances(&self, table: &RawTable, per_fold: Option<usize>) -> Result<Vec<RecourseInstance>> {
        let mut out = Vec::new();
        for (k, fold) in self.folds.iter().enumerate() {
            let mut rows = fold.test_rows.clone();
            rows.sort_unstable();
            let mut taken = 0;
            for r in rows {
                if per_fold.is_some_and(|cap| taken >= cap) {
                    break;
                }
                let raw = table
                    .rows
                    .get(r)
                    .ok_or_else(|| RecourseError::invalid(format!("bundle row {r} is not in the table")))?;
                let x = fold.encoder.encode_row(raw)?;
                if fold.model.predict_proba(&x) < 0.5 {
                    out.push(RecourseInstance {
                        id: r,
                        fold: k,
                        origin: FeatureVector::new(x)?,
                    });
                    taken += 1;
                }
            }
        }
        Ok(out)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let manifest = Manifest {
            format: MANIFEST_FORMAT.into(),
            data_path: self.data_path.clone(),
            schema: self.schema.clone(),
            settings: self.settings.clone(),
            folds: self
                .folds
                .iter()
                .map(|f| FoldManifest {
                    test_rows: f.test_rows.clone(),
                    test_accuracy: f.test_accuracy,
                    has_future: f.future.is_some(),
                })
                .collect(),
        };
        std::fs::write(
            dir.join("manifest.json"),
            serde_json::to_string_pretty(&manifest)? + "\n",
        )?;
        for (k, f) in self.folds.iter().enumerate() {
            std::fs::write(dir.join(format!("fold{k}.model")), f.model.to_text())?;
            std::fs::write(
                dir.join(format!("fold{k}.encoder.json")),
                serde_json::to_string_pretty(&f.encoder)? + "\n",
            )?;
            if let Some(future) = &f.future {
                std::fs::write(dir.join(format!("fold{k}.future.model")), future.to_text())?;
            }
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: Manifest = serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)?;
        if manifest.format != MANIFEST_FORMAT {
            return Err(RecourseError::Parse(format!(
                "unsupported bundle format `{}`",
                manifest.format
            )));
        }
        manifest.schema.validate()?;
        let mut folds = Vec::with_capacity(manifest.folds.len());
        for (k, f) in manifest.folds.into_iter().enumerate() {
            let model = TrainedModel::from_text(&std::fs::read_to_string(dir.join(format!("fold{k}.model")))?)?;
            let encoder: Encoder =
                serde_json::from_str(&std::fs::read_to_string(dir.join(format!("fold{k}.encoder.json")))?)?;
            let future = if f.has_future {
                Some(TrainedModel::from_text(&std::fs::read_to_string(
                    dir.join(format!("fold{k}.future.model")),
                )?)?)
            } else {
                None
            };
            if model.input_dim() != encoder.dim() {
                return Err(RecourseError::DimensionMismatch {
                    expected: encoder.dim(),
                    found: model.input_dim(),
                });
            }
            folds.push(FoldModel {
                encoder,
                model,
                future,
                test_rows: f.test_rows,
                test_accuracy: f.test_accuracy,
            });
        }
        Ok(Self {
            schema: manifest.schema,
            data_path: manifest.data_path,
            settings: manifest.settings,
            folds,
        })
    }
}
