//! Schema-driven CSV ingestion, one-hot encoding, min-max scaling, and
//! fold splitting.

use std::collections::{BTreeSet, HashMap};
use std::ops::Range;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{RecourseError, Result};
use crate::seed;
use crate::surrogate::Predictor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Target,
}

/// What a recourse may do to a feature.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actionability {
    #[default]
    Free,
    Immutable,
    /// May only grow, by at most this much in raw units.
    MaxIncrease(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    /// Allowed values of a categorical column, in one-hot order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<String>,
    #[serde(default)]
    pub actionability: Actionability,
}

/// Dataset description, usually read from a TOML file:
///
/// ```toml
/// positive_label = "1"
/// shifted_path = "shifted.csv"
///
/// [[columns]]
/// name = "age"
/// kind = "numeric"
/// actionability = { max_increase = 2.0 }
///
/// [[columns]]
/// name = "label"
/// kind = "target"
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub columns: Vec<ColumnSpec>,
    pub positive_label: String,
    /// Shifted dataset for future validity, relative to the schema file.
    #[serde(default)]
    pub shifted_path: Option<PathBuf>,
}

impl DatasetSchema {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let schema: DatasetSchema = toml::from_str(text).map_err(|e| RecourseError::Schema(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }

    /// Reads a schema file; a relative `shifted_path` is resolved against the
    /// file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let mut schema = Self::from_toml_str(&std::fs::read_to_string(path)?)?;
        if let (Some(shifted), Some(dir)) = (&schema.shifted_path, path.parent()) {
            if shifted.is_relative() {
                schema.shifted_path = Some(dir.join(shifted));
            }
        }
        Ok(schema)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| RecourseError::Schema(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let targets = self.columns.iter().filter(|c| c.kind == ColumnKind::Target).count();
        if targets != 1 {
            return Err(RecourseError::Schema(format!(
                "expected exactly one target column, found {targets}"
            )));
        }
        let mut seen = BTreeSet::new();
        for c in &self.columns {
            if !seen.insert(c.name.as_str()) {
                return Err(RecourseError::Schema(format!("duplicate column `{}`", c.name)));
            }
            match c.kind {
                ColumnKind::Categorical => {
                    if c.values.is_empty() {
                        return Err(RecourseError::Schema(format!(
                            "categorical column `{}` lists no values",
                            c.name
                        )));
                    }
                    let distinct: BTreeSet<_> = c.values.iter().collect();
                    if distinct.len() != c.values.len() {
                        return Err(RecourseError::Schema(format!(
                            "categorical column `{}` repeats a value",
                            c.name
                        )));
                    }
                    if let Actionability::MaxIncrease(_) = c.actionability {
                        return Err(RecourseError::Schema(format!(
                            "max_increase applies to numeric columns only (`{}`)",
                            c.name
                        )));
                    }
                }
                ColumnKind::Numeric => {
                    if let Actionability::MaxIncrease(v) = c.actionability {
                        if !(v >= 0.0 && v.is_finite()) {
                            return Err(RecourseError::Schema(format!(
                                "max_increase of `{}` must be >= 0",
                                c.name
                            )));
                        }
                    }
                }
                ColumnKind::Target => {}
            }
        }
        Ok(())
    }

    pub fn target(&self) -> &ColumnSpec {
        self.columns
            .iter()
            .find(|c| c.kind == ColumnKind::Target)
            .expect("validated schema has a target")
    }

    pub fn features(&self) -> impl Iterator<Item = &ColumnSpec> {
        self.columns.iter().filter(|c| c.kind != ColumnKind::Target)
    }
}

/// Writes a table back to CSV in schema column order, the target rendered
/// as the positive label or `0`.
pub fn write_csv_with_schema<W: std::io::Write>(writer: W, schema: &DatasetSchema, table: &RawTable) -> Result<()> {
    schema.validate()?;
    let negative = if schema.positive_label == "0" { "1" } else { "0" };
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(schema.columns.iter().map(|c| c.name.as_str()))?;
    for (row, label) in table.rows.iter().zip(&table.labels) {
        let mut feats = row.iter().zip(schema.features());
        let mut record = Vec::with_capacity(schema.columns.len());
        for c in &schema.columns {
            if c.kind == ColumnKind::Target {
                record.push(if *label == 1 {
                    schema.positive_label.clone()
                } else {
                    negative.to_string()
                });
                continue;
            }
            let (v, spec) = feats
                .next()
                .ok_or_else(|| RecourseError::invalid("row shorter than the schema"))?;
            record.push(match v {
                RawValue::Numeric(x) => x.to_string(),
                RawValue::Category(k) => spec
                    .values
                    .get(*k)
                    .cloned()
                    .ok_or_else(|| RecourseError::invalid("category index out of range"))?,
            });
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum RawValue {
    Numeric(f64),
    /// Index into the column's declared values.
    Category(usize),
}

/// Typed rows in schema feature order, with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub rows: Vec<Vec<RawValue>>,
    pub labels: Vec<u8>,
}

impl RawTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Reads a CSV whose header contains every schema column (extra columns are
/// ignored). Rows are numbered from 1 in errors, not counting the header.
pub fn load_csv_with_schema(path: &Path, schema: &DatasetSchema) -> Result<RawTable> {
    let file = std::fs::File::open(path)?;
    read_csv_with_schema(file, schema)
}

pub fn read_csv_with_schema<R: std::io::Read>(reader: R, schema: &DatasetSchema) -> Result<RawTable> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: HashMap<String, usize> = rdr
        .headers()?
        .iter()
        .enumerate()
        .map(|(i, h)| (h.to_string(), i))
        .collect();
    let target = schema.target();
    let target_idx = *header
        .get(&target.name)
        .ok_or_else(|| RecourseError::Schema(format!("target column absent: `{}`", target.name)))?;
    let feature_idx = schema
        .features()
        .map(|c| {
            header
                .get(&c.name)
                .copied()
                .ok_or_else(|| RecourseError::Schema(format!("column absent: `{}`", c.name)))
        })
        .collect::<Result<Vec<_>>>()?;
    let features: Vec<&ColumnSpec> = schema.features().collect();

    let mut table = RawTable {
        rows: Vec::new(),
        labels: Vec::new(),
    };
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row_no = r + 1;
        let get = |i: usize, name: &str| {
            record.get(i).ok_or_else(|| RecourseError::Data {
                row: row_no,
                column: name.to_string(),
                message: "missing field".into(),
            })
        };
        let mut row = Vec::with_capacity(features.len());
        for (c, &i) in features.iter().zip(&feature_idx) {
            let cell = get(i, &c.name)?;
            row.push(parse_cell(cell, c, row_no)?);
        }
        table
            .labels
            .push(u8::from(get(target_idx, &target.name)? == schema.positive_label));
        table.rows.push(row);
    }
    Ok(table)
}

fn parse_cell(cell: &str, column: &ColumnSpec, row: usize) -> Result<RawValue> {
    match column.kind {
        ColumnKind::Numeric => cell
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(RawValue::Numeric)
            .ok_or_else(|| RecourseError::Data {
                row,
                column: column.name.clone(),
                message: format!("not a finite number: `{cell}`"),
            }),
        ColumnKind::Categorical => column
            .values
            .iter()
            .position(|v| v == cell)
            .map(RawValue::Category)
            .ok_or_else(|| RecourseError::Data {
                row,
                column: column.name.clone(),
                message: format!("unknown category `{cell}`"),
            }),
        ColumnKind::Target => unreachable!("targets are parsed separately"),
    }
}

/// Fitted per-column transformation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnEncoding {
    Numeric {
        name: String,
        min: f64,
        max: f64,
        actionability: Actionability,
    },
    Categorical {
        name: String,
        values: Vec<String>,
        actionability: Actionability,
    },
}

/// Maps raw rows to scaled feature vectors and back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub columns: Vec<ColumnEncoding>,
}

impl Encoder {
    /// Fits min-max scaling on `fit_rows`. A column constant on those rows is
    /// mapped to 0.
    pub fn fit(raw: &RawTable, schema: &DatasetSchema, fit_rows: &[usize]) -> Result<Self> {
        if fit_rows.is_empty() {
            return Err(RecourseError::EmptyInput("rows to fit the encoder on"));
        }
        let mut columns = Vec::new();
        for (c, spec) in schema.features().enumerate() {
            match spec.kind {
                ColumnKind::Numeric => {
                    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
                    for &r in fit_rows {
                        let row = raw
                            .rows
                            .get(r)
                            .ok_or_else(|| RecourseError::invalid(format!("row {r} out of range")))?;
                        if let RawValue::Numeric(v) = row[c] {
                            min = min.min(v);
                            max = max.max(v);
                        }
                    }
                    if max == min {
                        log::warn!(
                            "column `{}` is constant on the fitting rows; it encodes to 0",
                            spec.name
                        );
                    }
                    columns.push(ColumnEncoding::Numeric {
                        name: spec.name.clone(),
                        min,
                        max,
                        actionability: spec.actionability,
                    });
                }
                ColumnKind::Categorical => columns.push(ColumnEncoding::Categorical {
                    name: spec.name.clone(),
                    values: spec.values.clone(),
                    actionability: spec.actionability,
                }),
                ColumnKind::Target => {}
            }
        }
        Ok(Self { columns })
    }

    pub fn dim(&self) -> usize {
        self.columns
            .iter()
            .map(|c| match c {
                ColumnEncoding::Numeric { .. } => 1,
                ColumnEncoding::Categorical { values, .. } => values.len(),
            })
            .sum()
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for c in &self.columns {
            match c {
                ColumnEncoding::Numeric { name, .. } => out.push(name.clone()),
                ColumnEncoding::Categorical { name, values, .. } => {
                    out.extend(values.iter().map(|v| format!("{name}={v}")));
                }
            }
        }
        out
    }

    /// Index ranges of the one-hot groups.
    pub fn groups(&self) -> Vec<Range<usize>> {
        let mut out = Vec::new();
        let mut offset = 0;
        for c in &self.columns {
            match c {
                ColumnEncoding::Numeric { .. } => offset += 1,
                ColumnEncoding::Categorical { values, .. } => {
                    out.push(offset..offset + values.len());
                    offset += values.len();
                }
            }
        }
        out
    }

    pub fn encode_row(&self, row: &[RawValue]) -> Result<Vec<f64>> {
        if row.len() != self.columns.len() {
            return Err(RecourseError::DimensionMismatch {
                expected: self.columns.len(),
                found: row.len(),
            });
        }
        let mut out = Vec::with_capacity(self.dim());
        for (c, v) in self.columns.iter().zip(row) {
            match (c, v) {
                (ColumnEncoding::Numeric { min, max, .. }, RawValue::Numeric(x)) => {
                    out.push(if max > min { (x - min) / (max - min) } else { 0.0 });
                }
                (ColumnEncoding::Categorical { values, .. }, RawValue::Category(k)) if *k < values.len() => {
                    out.extend((0..values.len()).map(|j| if j == *k { 1.0 } else { 0.0 }));
                }
                _ => return Err(RecourseError::invalid("raw value does not match the encoder column")),
            }
        }
        Ok(out)
    }

    /// Inverse of [`Encoder::encode_row`]; a one-hot group decodes to its
    /// largest coordinate.
    pub fn decode_row(&self, encoded: &[f64]) -> Result<Vec<RawValue>> {
        if encoded.len() != self.dim() {
            return Err(RecourseError::DimensionMismatch {
                expected: self.dim(),
                found: encoded.len(),
            });
        }
        let mut out = Vec::with_capacity(self.columns.len());
        let mut offset = 0;
        for c in &self.columns {
            match c {
                ColumnEncoding::Numeric { min, max, .. } => {
                    out.push(RawValue::Numeric(min + encoded[offset] * (max - min)));
                    offset += 1;
                }
                ColumnEncoding::Categorical { values, .. } => {
                    out.push(RawValue::Category(argmax(&encoded[offset..offset + values.len()])));
                    offset += values.len();
                }
            }
        }
        Ok(out)
    }

    /// Actionability constraints in scaled coordinates.
    pub fn feasibility_spec(&self) -> FeasibilitySpec {
        let mut spec = FeasibilitySpec {
            groups: self.groups(),
            immutable: Vec::new(),
            max_increase: Vec::new(),
        };
        let mut offset = 0;
        for c in &self.columns {
            match c {
                ColumnEncoding::Numeric {
                    min,
                    max,
                    actionability,
                    ..
                } => {
                    match *actionability {
                        Actionability::Immutable => spec.immutable.push(offset),
                        Actionability::MaxIncrease(raw) => {
                            let scaled = if max > min { raw / (max - min) } else { 0.0 };
                            spec.max_increase.push((offset, scaled));
                        }
                        Actionability::Free => {}
                    }
                    offset += 1;
                }
                ColumnEncoding::Categorical {
                    values, actionability, ..
                } => {
                    if *actionability == Actionability::Immutable {
                        spec.immutable.extend(offset..offset + values.len());
                    }
                    offset += values.len();
                }
            }
        }
        spec
    }
}

/// Lowest index of the maximum.
pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// One-hot groups and actionability rules in scaled coordinates.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeasibilitySpec {
    pub groups: Vec<Range<usize>>,
    pub immutable: Vec<usize>,
    /// `(feature, largest allowed increase)`.
    pub max_increase: Vec<(usize, f64)>,
}

/// Encoded instances with labels and the encoder that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedDataset {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<u8>,
    pub feature_names: Vec<String>,
    pub groups: Vec<Range<usize>>,
    pub encoder: Encoder,
}

impl EncodedDataset {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.encoder.dim()
    }

    pub fn select(&self, rows: &[usize]) -> (Vec<Vec<f64>>, Vec<u8>) {
        (
            rows.iter().map(|&r| self.x[r].clone()).collect(),
            rows.iter().map(|&r| self.y[r]).collect(),
        )
    }
}

/// Fits the encoder on `fit_rows` and encodes every row.
pub fn encode_scale(raw: &RawTable, schema: &DatasetSchema, fit_rows: &[usize]) -> Result<EncodedDataset> {
    let encoder = Encoder::fit(raw, schema, fit_rows)?;
    encode_with(raw, encoder)
}

/// Encodes every row with an already fitted encoder.
pub fn encode_with(raw: &RawTable, encoder: Encoder) -> Result<EncodedDataset> {
    let x = raw
        .rows
        .iter()
        .map(|r| encoder.encode_row(r))
        .collect::<Result<Vec<_>>>()?;
    Ok(EncodedDataset {
        x,
        y: raw.labels.clone(),
        feature_names: encoder.feature_names(),
        groups: encoder.groups(),
        encoder,
    })
}

/// Reads the schema's shifted dataset and encodes it with the primary
/// encoder.
pub fn load_shifted(schema: &DatasetSchema, encoder: &Encoder) -> Result<EncodedDataset> {
    let path = schema
        .shifted_path
        .as_ref()
        .ok_or_else(|| RecourseError::Schema("no shifted dataset declared (shifted_path)".into()))?;
    let raw = load_csv_with_schema(path, schema)?;
    encode_with(&raw, encoder.clone())
}

/// Seeded shuffle of `0..n` cut into `k` contiguous folds; the first `n % k`
/// folds get one extra index.
pub fn kfold_split(n: usize, k: usize, seed_value: u64) -> Result<Vec<Vec<usize>>> {
    if k == 0 || k > n {
        return Err(RecourseError::invalid(format!("cannot split {n} rows into {k} folds")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seed::rng(seed_value, seed::stream::SPLIT, 0));
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        folds.push(idx[start..start + len].to_vec());
        start += len;
    }
    Ok(folds)
}

/// Seeded subsample of `round(fraction·n)` indices, returned sorted.
pub fn subsample(n: usize, fraction: f64, seed_value: u64) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(RecourseError::invalid("subsample fraction must be in (0, 1]"));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seed::rng(seed_value, seed::stream::SUBSAMPLE, 0));
    idx.truncate(((fraction * n as f64).round() as usize).max(1).min(n));
    idx.sort_unstable();
    Ok(idx)
}

/// Rows among `rows` that the model assigns to the negative class.
pub fn negative_rows<P: Predictor + ?Sized>(model: &P, x: &[Vec<f64>], rows: &[usize]) -> Vec<usize> {
    rows.iter()
        .copied()
        .filter(|&r| model.predict_proba(&x[r]) < 0.5)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCHEMA: &str = r#"
positive_label = "good"

[[columns]]
name = "age"
kind = "numeric"
actionability = { max_increase = 2.0 }

[[columns]]
name = "housing"
kind = "categorical"
values = ["A", "B", "C"]

[[columns]]
name = "sex"
kind = "categorical"
values = ["f", "m"]
actionability = "immutable"

[[columns]]
name = "risk"
kind = "target"
"#;

    const CSV: &str = "age,housing,sex,risk\n0,A,f,good\n5,B,m,bad\n10,C,f,good\n";

    #[test]
    fn loads_and_encodes() {
        let schema = DatasetSchema::from_toml_str(SCHEMA).unwrap();
        let raw = read_csv_with_schema(CSV.as_bytes(), &schema).unwrap();
        assert_eq!(raw.len(), 3);
        assert_eq!(raw.labels, vec![1, 0, 1]);
        let enc = encode_scale(&raw, &schema, &[0, 1, 2]).unwrap();
        assert_eq!(enc.x[1], vec![0.5, 0.0, 1.0, 0.0, 0.0, 1.0]);
        assert_eq!(enc.x[2][0], 1.0);
        assert_eq!(enc.groups, vec![1..4, 4..6]);
        let spec = enc.encoder.feasibility_spec();
        assert_eq!(spec.immutable, vec![4, 5]);
        assert_eq!(spec.max_increase, vec![(0, 0.2)]);

        let partial = encode_scale(&raw, &schema, &[0, 1]).unwrap();
        assert_eq!(partial.x[2][0], 2.0);
        for (row, enc_row) in raw.rows.iter().zip(&enc.x) {
            assert_eq!(&enc.encoder.decode_row(enc_row).unwrap(), row);
        }
    }

    #[test]
    fn reports_missing_target_and_unknown_category() {
        let schema = DatasetSchema::from_toml_str(SCHEMA).unwrap();
        let err = read_csv_with_schema("age,housing,sex\n1,A,f\n".as_bytes(), &schema).unwrap_err();
        assert!(err.to_string().contains("target column absent"));
        let err =
            read_csv_with_schema("age,housing,sex,risk\n1,A,f,good\n2,Z,f,bad\n".as_bytes(), &schema).unwrap_err();
        match err {
            RecourseError::Data { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "housing");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn fold_sizes() {
        let folds = kfold_split(7, 5, 1).unwrap();
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![2, 2, 1, 1, 1]);
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..7).collect::<Vec<_>>());
        assert_eq!(kfold_split(7, 5, 1).unwrap(), folds);
        assert!(kfold_split(3, 5, 1).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let schema = DatasetSchema::from_toml_str(SCHEMA).unwrap();
        let raw = read_csv_with_schema(CSV.as_bytes(), &schema).unwrap();
        let mut buf = Vec::new();
        write_csv_with_schema(&mut buf, &schema, &raw).unwrap();
        assert_eq!(read_csv_with_schema(buf.as_slice(), &schema).unwrap(), raw);
    }

    #[test]
    fn schema_round_trips_through_toml() {
        let schema = DatasetSchema::from_toml_str(SCHEMA).unwrap();
        let again = DatasetSchema::from_toml_str(&schema.to_toml_string().unwrap()).unwrap();
        assert_eq!(again, schema);
    }
}
