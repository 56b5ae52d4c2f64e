//! Schema declaration, CSV ingestion, stratified folds and class weighting.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

/// Direction in which predicted risk moves as the feature value grows.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monotonicity {
    Increasing,
    Decreasing,
    #[default]
    None,
}

impl Monotonicity {
    pub fn is_monotone(self) -> bool {
        !matches!(self, Monotonicity::None)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpecialValue {
    pub code: i64,
    pub meaning: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    #[serde(default)]
    pub monotonicity: Monotonicity,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub special_values: Vec<SpecialValue>,
    pub subscale: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    /// Inclusive normal range of non-special values, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<[f64; 2]>,
}

impl FeatureSpec {
    pub fn special(&self, code: i64) -> Option<&SpecialValue> {
        self.special_values.iter().find(|s| s.code == code)
    }

    pub fn label(&self) -> &str {
        self.description.as_deref().unwrap_or(&self.name)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub schema_version: u32,
    pub label: String,
    pub positive_means: String,
    #[serde(default = "default_negative_means")]
    pub negative_means: String,
    #[serde(default = "default_positive_token")]
    pub positive_token: String,
    #[serde(default = "default_negative_token")]
    pub negative_token: String,
    /// Declared subscale tags, in model order.
    pub subscales: Vec<String>,
    pub features: Vec<FeatureSpec>,
}

fn default_negative_means() -> String {
    "a low risk".to_string()
}

fn default_positive_token() -> String {
    "1".to_string()
}

fn default_negative_token() -> String {
    "0".to_string()
}

/// A single raw cell. Sentinel codes are kept apart from ordinary magnitudes.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Number(f64),
    Special(i64),
    Category(String),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Number(v) => write!(f, "{v}"),
            Cell::Special(c) => write!(f, "{c}"),
            Cell::Category(s) => f.write_str(s),
        }
    }
}

impl Cell {
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Cell::Number(v) if v.fract() == 0.0 && v.abs() < 1e15 => serde_json::json!(*v as i64),
            Cell::Number(v) => serde_json::json!(v),
            Cell::Special(c) => serde_json::json!(c),
            Cell::Category(s) => serde_json::json!(s),
        }
    }
}

impl Schema {
    pub fn from_toml_str(text: &str) -> Result<Schema> {
        let schema: Schema = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("schema serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Version {
                found: self.schema_version,
                expected: SCHEMA_VERSION,
            });
        }
        if self.label.trim().is_empty() {
            return Err(Error::Schema("label column name is empty".into()));
        }
        if self.features.is_empty() {
            return Err(Error::Schema("schema declares no features".into()));
        }
        if self.positive_token == self.negative_token {
            return Err(Error::Schema("positive and negative label tokens coincide".into()));
        }
        let mut tags = HashSet::new();
        for tag in &self.subscales {
            if tag.trim().is_empty() || !tags.insert(tag.as_str()) {
                return Err(Error::Schema(format!("invalid or duplicate subscale tag {tag:?}")));
            }
        }
        let mut names = HashSet::new();
        for f in &self.features {
            if f.name.trim().is_empty() {
                return Err(Error::Schema("feature with empty name".into()));
            }
            if f.name == self.label {
                return Err(Error::Schema(format!("feature {} shadows the label column", f.name)));
            }
            if !names.insert(f.name.as_str()) {
                return Err(Error::Schema(format!("duplicate feature name {}", f.name)));
            }
            if !tags.contains(f.subscale.as_str()) {
                return Err(Error::Schema(format!(
                    "feature {} uses unknown subscale tag {:?}",
                    f.name, f.subscale
                )));
            }
            match f.kind {
                FeatureKind::Categorical => {
                    if f.monotonicity != Monotonicity::None {
                        return Err(Error::Schema(format!(
                            "categorical feature {} cannot be monotone",
                            f.name
                        )));
                    }
                    if !f.special_values.is_empty() {
                        return Err(Error::Schema(format!(
                            "categorical feature {} cannot declare special values",
                            f.name
                        )));
                    }
                }
                FeatureKind::Numeric => {
                    let mut codes = HashSet::new();
                    for s in &f.special_values {
                        if !codes.insert(s.code) {
                            return Err(Error::Schema(format!(
                                "feature {} repeats special value {}",
                                f.name, s.code
                            )));
                        }
                        if let Some([lo, hi]) = f.range {
                            let c = s.code as f64;
                            if c >= lo && c <= hi {
                                return Err(Error::Schema(format!(
                                    "special value {} of {} lies inside its normal range",
                                    s.code, f.name
                                )));
                            }
                        }
                    }
                    if let Some([lo, hi]) = f.range {
                        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                            return Err(Error::Schema(format!("invalid range for {}", f.name)));
                        }
                    }
                }
            }
        }
        for tag in &self.subscales {
            if !self.features.iter().any(|f| &f.subscale == tag) {
                return Err(Error::Schema(format!("subscale {tag:?} has no features")));
            }
        }
        Ok(())
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    /// Feature indices of each declared subscale, in declaration order.
    pub fn subscale_members(&self) -> Vec<(String, Vec<usize>)> {
        self.subscales
            .iter()
            .map(|tag| {
                let members = self
                    .features
                    .iter()
                    .enumerate()
                    .filter(|(_, f)| &f.subscale == tag)
                    .map(|(i, _)| i)
                    .collect();
                (tag.clone(), members)
            })
            .collect()
    }

    pub fn parse_cell(&self, feature: usize, raw: &str) -> Result<Cell> {
        let spec = &self.features[feature];
        let raw = raw.trim();
        match spec.kind {
            FeatureKind::Categorical => {
                if raw.is_empty() {
                    return Err(Error::Data(format!("empty category for {}", spec.name)));
                }
                Ok(Cell::Category(raw.to_string()))
            }
            FeatureKind::Numeric => {
                let v: f64 = raw
                    .parse()
                    .map_err(|_| Error::Data(format!("cannot parse {raw:?} as a number for {}", spec.name)))?;
                self.numeric_cell(feature, v)
            }
        }
    }

    pub fn numeric_cell(&self, feature: usize, v: f64) -> Result<Cell> {
        let spec = &self.features[feature];
        if !v.is_finite() {
            return Err(Error::Data(format!("non-finite value for {}", spec.name)));
        }
        if v.fract() == 0.0 {
            if let Some(s) = spec.special(v as i64) {
                return Ok(Cell::Special(s.code));
            }
        }
        Ok(Cell::Number(v))
    }

    pub fn parse_label(&self, raw: &str) -> Result<u8> {
        let raw = raw.trim();
        if raw == self.positive_token {
            Ok(1)
        } else if raw == self.negative_token {
            Ok(0)
        } else {
            Err(Error::Data(format!(
                "label {raw:?} is neither {:?} nor {:?}",
                self.positive_token, self.negative_token
            )))
        }
    }

    /// Builds an observation from a name → value map. Numbers may be sentinel codes.
    pub fn observation_from_json(&self, map: &serde_json::Map<String, serde_json::Value>) -> Result<Vec<Cell>> {
        for key in map.keys() {
            if self.feature_index(key).is_none() {
                return Err(Error::SchemaMismatch(format!("unknown feature {key}")));
            }
        }
        self.features
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let value = map
                    .get(&f.name)
                    .ok_or_else(|| Error::SchemaMismatch(format!("missing feature {}", f.name)))?;
                match (f.kind, value) {
                    (FeatureKind::Numeric, serde_json::Value::Number(n)) => {
                        let v = n
                            .as_f64()
                            .ok_or_else(|| Error::SchemaMismatch(format!("bad number for {}", f.name)))?;
                        self.numeric_cell(i, v).map_err(|e| Error::SchemaMismatch(e.to_string()))
                    }
                    (FeatureKind::Numeric, serde_json::Value::String(s)) => {
                        self.parse_cell(i, s).map_err(|e| Error::SchemaMismatch(e.to_string()))
                    }
                    (FeatureKind::Categorical, serde_json::Value::String(s)) => {
                        self.parse_cell(i, s).map_err(|e| Error::SchemaMismatch(e.to_string()))
                    }
                    (FeatureKind::Categorical, serde_json::Value::Number(n)) => {
                        Ok(Cell::Category(n.to_string()))
                    }
                    _ => Err(Error::SchemaMismatch(format!("unsupported value for {}", f.name))),
                }
            })
            .collect()
    }

    pub fn observation_to_json(&self, row: &[Cell]) -> serde_json::Map<String, serde_json::Value> {
        self.features
            .iter()
            .zip(row)
            .map(|(f, c)| (f.name.clone(), c.to_json()))
            .collect()
    }

    /// Checks that a row has the right arity and cell kinds.
    pub fn check_row(&self, row: &[Cell]) -> Result<()> {
        if row.len() != self.features.len() {
            return Err(Error::SchemaMismatch(format!(
                "expected {} values, got {}",
                self.features.len(),
                row.len()
            )));
        }
        for (f, c) in self.features.iter().zip(row) {
            let ok = match (f.kind, c) {
                (FeatureKind::Numeric, Cell::Number(v)) => v.is_finite(),
                (FeatureKind::Numeric, Cell::Special(code)) => f.special(*code).is_some(),
                (FeatureKind::Categorical, Cell::Category(_)) => true,
                _ => false,
            };
            if !ok {
                return Err(Error::SchemaMismatch(format!("value {c} does not fit feature {}", f.name)));
            }
        }
        Ok(())
    }
}

pub fn load_schema(path: impl AsRef<Path>) -> Result<Schema> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Schema::from_toml_str(&text)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub schema: Schema,
    pub rows: Vec<Vec<Cell>>,
    pub labels: Vec<u8>,
    pub weights: Vec<f64>,
}

impl Dataset {
    pub fn new(schema: Schema, rows: Vec<Vec<Cell>>, labels: Vec<u8>) -> Result<Dataset> {
        let weights = vec![1.0; rows.len()];
        Dataset::with_weights(schema, rows, labels, weights)
    }

    pub fn with_weights(schema: Schema, rows: Vec<Vec<Cell>>, labels: Vec<u8>, weights: Vec<f64>) -> Result<Dataset> {
        if rows.is_empty() {
            return Err(Error::NoRows);
        }
        if rows.len() != labels.len() || rows.len() != weights.len() {
            return Err(Error::Data("rows, labels and weights differ in length".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            schema
                .check_row(row)
                .map_err(|e| Error::Data(format!("row {i}: {e}")))?;
        }
        if labels.iter().any(|&y| y > 1) {
            return Err(Error::Data("labels must be 0 or 1".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::Data("weights must be positive".into()));
        }
        Ok(Dataset {
            schema,
            rows,
            labels,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }

    /// Training precondition: both classes present.
    pub fn check_both_classes(&self) -> Result<()> {
        let pos = self.positives();
        if pos == 0 || pos == self.len() {
            return Err(Error::Data("labels contain a single class".into()));
        }
        Ok(())
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            weights: indices.iter().map(|&i| self.weights[i]).collect(),
        }
    }

    pub fn from_reader<R: Read>(reader: R, schema: &Schema) -> Result<Dataset> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
        let position = |name: &str| headers.iter().position(|h| h == name);
        let mut columns = Vec::with_capacity(schema.features.len());
        for f in &schema.features {
            columns.push(position(&f.name).ok_or_else(|| Error::Data(format!("missing column {}", f.name)))?);
        }
        let label_col = position(&schema.label).ok_or_else(|| Error::Data(format!("missing label column {}", schema.label)))?;

        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::Parse(e.to_string()))?;
            let get = |col: usize| {
                record
                    .get(col)
                    .ok_or_else(|| Error::Data(format!("record {} is too short", line + 1)))
            };
            let mut row = Vec::with_capacity(columns.len());
            for (fi, &col) in columns.iter().enumerate() {
                let cell = schema
                    .parse_cell(fi, get(col)?)
                    .map_err(|e| Error::Data(format!("record {}: {e}", line + 1)))?;
                row.push(cell);
            }
            labels.push(
                schema
                    .parse_label(get(label_col)?)
                    .map_err(|e| Error::Data(format!("record {}: {e}", line + 1)))?,
            );
            rows.push(row);
        }
        Dataset::new(schema.clone(), rows, labels)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.schema.features.iter().map(|f| f.name.as_str()).collect();
        header.push(&self.schema.label);
        w.write_record(&header).map_err(|e| Error::Parse(e.to_string()))?;
        for (row, &y) in self.rows.iter().zip(&self.labels) {
            let mut record: Vec<String> = row.iter().map(|c| c.to_string()).collect();
            record.push(if y == 1 {
                self.schema.positive_token.clone()
            } else {
                self.schema.negative_token.clone()
            });
            w.write_record(&record).map_err(|e| Error::Parse(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(())
    }
}

pub fn load_dataset(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Dataset::from_reader(std::io::BufReader::new(file), schema)
}

/// Per-row fold indices for k-fold cross validation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldAssignment {
    pub k: usize,
    pub assignment: Vec<usize>,
    pub seed: u64,
}

impl FoldAssignment {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] != fold).collect()
    }
}

/// Stratified fold assignment. Rows of each class are shuffled with a
/// ChaCha8 generator seeded by `seed` and dealt round-robin, positives
/// first, so every fold holds ⌊N₊/k⌋ or ⌈N₊/k⌉ positives.
pub fn stratified_folds(dataset: &Dataset, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {k}")));
    }
    let mut pos: Vec<usize> = (0..dataset.len()).filter(|&i| dataset.labels[i] == 1).collect();
    let mut neg: Vec<usize> = (0..dataset.len()).filter(|&i| dataset.labels[i] == 0).collect();
    let minority = pos.len().min(neg.len());
    if k > minority {
        return Err(Error::InvalidArgument(format!(
            "{k} folds exceed the minority class count {minority}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut assignment = vec![0; dataset.len()];
    for (slot, &i) in pos.iter().chain(neg.iter()).enumerate() {
        assignment[i] = slot % k;
    }
    Ok(FoldAssignment { k, assignment, seed })
}

/// Sets per-row weights by label. Losses consume them multiplicatively.
pub fn apply_class_weights(dataset: &Dataset, weight_pos: f64, weight_neg: f64) -> Result<Dataset> {
    if !(weight_pos > 0.0 && weight_pos.is_finite() && weight_neg > 0.0 && weight_neg.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "class weights must be positive, got {weight_pos} and {weight_neg}"
        )));
    }
    let mut out = dataset.clone();
    for (w, &y) in out.weights.iter_mut().zip(&dataset.labels) {
        *w = if y == 1 { weight_pos } else { weight_neg };
    }
    Ok(out)
}

/// Counts of each category token observed per categorical feature.
pub fn category_tokens(dataset: &Dataset, feature: usize) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for row in &dataset.rows {
        if let Cell::Category(tok) = &row[feature] {
            *out.entry(tok.clone()).or_insert(0) += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn toy_schema() -> Schema {
        Schema::from_toml_str(
            r#"
schema_version = 1
label = "bad"
positive_means = "a high risk of default"
negative_means = "a low risk of default"
subscales = ["credit", "personal"]

[[features]]
name = "score"
kind = "numeric"
monotonicity = "decreasing"
subscale = "credit"
range = [0, 100]
special_values = [{ code = -9, meaning = "no bureau record" }, { code = -8, meaning = "no usable trades" }]

[[features]]
name = "housing"
kind = "categorical"
subscale = "personal"
"#,
        )
        .unwrap()
    }

    #[test]
    fn minimal_single_feature_schema() {
        let s = Schema::from_toml_str(
            r#"
schema_version = 1
label = "y"
positive_means = "bad"
subscales = ["all"]
[[features]]
name = "x"
kind = "numeric"
monotonicity = "none"
subscale = "all"
"#,
        )
        .unwrap();
        assert_eq!(s.n_features(), 1);
    }

    #[test]
    fn categorical_cannot_be_monotone() {
        let err = Schema::from_toml_str(
            r#"
schema_version = 1
label = "y"
positive_means = "bad"
subscales = ["p"]
[[features]]
name = "housing"
kind = "categorical"
monotonicity = "decreasing"
subscale = "p"
"#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Schema(_)), "{err}");
    }

    #[test]
    fn schema_rejections() {
        let base = |features: &str, subscales: &str| {
            format!("schema_version = 1\nlabel = \"y\"\npositive_means = \"bad\"\nsubscales = {subscales}\n{features}")
        };
        let dup = base(
            "[[features]]\nname = \"a\"\nkind = \"numeric\"\nsubscale = \"s\"\n[[features]]\nname = \"a\"\nkind = \"numeric\"\nsubscale = \"s\"\n",
            "[\"s\"]",
        );
        assert!(matches!(Schema::from_toml_str(&dup), Err(Error::Schema(_))));
        let unknown_tag = base("[[features]]\nname = \"a\"\nkind = \"numeric\"\nsubscale = \"t\"\n", "[\"s\"]");
        assert!(matches!(Schema::from_toml_str(&unknown_tag), Err(Error::Schema(_))));
        let in_range = base(
            "[[features]]\nname = \"a\"\nkind = \"numeric\"\nsubscale = \"s\"\nrange = [-10, 10]\nspecial_values = [{ code = -7, meaning = \"x\" }]\n",
            "[\"s\"]",
        );
        assert!(matches!(Schema::from_toml_str(&in_range), Err(Error::Schema(_))));
        assert!(matches!(Schema::from_toml_str("not = [toml"), Err(Error::Parse(_))));
        let v2 = dup.replace("schema_version = 1", "schema_version = 2");
        assert!(matches!(Schema::from_toml_str(&v2), Err(Error::Version { found: 2, .. })));
    }

    #[test]
    fn special_codes_are_flagged() {
        let schema = toy_schema();
        let csv = "score,housing,bad\n-9,own,1\n55,rent,0\n";
        let d = Dataset::from_reader(csv.as_bytes(), &schema).unwrap();
        assert_eq!(d.rows[0][0], Cell::Special(-9));
        assert_eq!(d.rows[1][0], Cell::Number(55.0));
        assert_eq!(d.labels, vec![1, 0]);
    }

    #[test]
    fn ingestion_errors() {
        let schema = toy_schema();
        assert!(matches!(
            Dataset::from_reader("score,housing,bad\n".as_bytes(), &schema),
            Err(Error::NoRows)
        ));
        assert!(matches!(
            Dataset::from_reader("score,bad\n1,0\n".as_bytes(), &schema),
            Err(Error::Data(_))
        ));
        assert!(matches!(
            Dataset::from_reader("score,housing,bad\nabc,own,0\n".as_bytes(), &schema),
            Err(Error::Data(_))
        ));
        assert!(matches!(
            Dataset::from_reader("score,housing,bad\n3,own,2\n".as_bytes(), &schema),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn csv_round_trip() {
        let schema = toy_schema();
        let csv = "score,housing,bad\n-9,own,1\n55.25,rent,0\n-8,for free,0\n";
        let d = Dataset::from_reader(csv.as_bytes(), &schema).unwrap();
        let mut out = Vec::new();
        d.write_csv(&mut out).unwrap();
        let back = Dataset::from_reader(out.as_slice(), &schema).unwrap();
        assert_eq!(d, back);
    }

    fn labelled(labels: &[u8]) -> Dataset {
        let schema = toy_schema();
        let rows = labels
            .iter()
            .map(|_| vec![Cell::Number(1.0), Cell::Category("own".into())])
            .collect();
        Dataset::new(schema, rows, labels.to_vec()).unwrap()
    }

    #[test]
    fn four_rows_two_folds() {
        let d = labelled(&[1, 1, 0, 0]);
        for seed in 0..20 {
            let f = stratified_folds(&d, 2, seed).unwrap();
            for fold in 0..2 {
                let test = f.test_indices(fold);
                assert_eq!(test.len(), 2);
                assert_eq!(test.iter().filter(|&&i| d.labels[i] == 1).count(), 1);
            }
        }
    }

    #[test]
    fn fold_errors_and_determinism() {
        let d = labelled(&[1, 1, 0, 0, 0, 0]);
        assert!(stratified_folds(&d, 1, 0).is_err());
        assert!(stratified_folds(&d, 3, 0).is_err());
        assert_eq!(stratified_folds(&d, 2, 5).unwrap(), stratified_folds(&d, 2, 5).unwrap());
    }

    #[test]
    fn class_weights() {
        let d = labelled(&[1, 0, 1]);
        let w = apply_class_weights(&d, 5.0, 1.0).unwrap();
        assert_eq!(w.weights, vec![5.0, 1.0, 5.0]);
        assert_eq!(apply_class_weights(&d, 1.0, 1.0).unwrap(), d);
        assert!(apply_class_weights(&d, 0.0, 1.0).is_err());
        assert!(apply_class_weights(&d, 1.0, -2.0).is_err());
    }

    #[test]
    fn observation_json() {
        let schema = toy_schema();
        let map: serde_json::Map<_, _> = serde_json::from_str(r#"{"score": -8, "housing": "own"}"#).unwrap();
        let row = schema.observation_from_json(&map).unwrap();
        assert_eq!(row[0], Cell::Special(-8));
        let bad: serde_json::Map<_, _> = serde_json::from_str(r#"{"score": 1, "housing": "own", "zzz": 1}"#).unwrap();
        assert!(matches!(schema.observation_from_json(&bad), Err(Error::SchemaMismatch(_))));
        let missing: serde_json::Map<_, _> = serde_json::from_str(r#"{"score": 1}"#).unwrap();
        assert!(matches!(schema.observation_from_json(&missing), Err(Error::SchemaMismatch(_))));
    }
}
