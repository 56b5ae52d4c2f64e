//! Two-layer additive risk model: sigmoid subscales over binary columns,
//! combined by a non-negative sigmoid-linear second layer.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::binarize::{build_scheme, BinarizationScheme, BinaryMatrix, ColumnKind, DEFAULT_MAX_THRESHOLDS};
use crate::data::{Cell, Dataset, Schema};
use crate::error::{Error, Result};
use crate::optim::{minimize, OptimOptions, OptimReport};

pub const MODEL_VERSION: u32 = 1;
pub const DEFAULT_LAMBDA: f64 = 1e-3;
const EPS: f64 = 1e-12;

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn log_loss(p: f64, y: u8) -> f64 {
    let p = p.clamp(EPS, 1.0 - EPS);
    if y == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubscaleModel {
    pub name: String,
    pub features: Vec<String>,
    pub bias: f64,
    /// One coefficient per owned column, in scheme column order.
    pub coefficients: Vec<f64>,
    #[serde(skip)]
    pub feature_indices: Vec<usize>,
    #[serde(skip)]
    pub columns: Vec<usize>,
    /// True where the coefficient must stay non-negative.
    #[serde(skip)]
    pub constrained: Vec<bool>,
    #[serde(skip)]
    pub regularized: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingInfo {
    pub lambda: f64,
    pub max_thresholds: usize,
    pub fine_tune_epochs: usize,
    pub n_rows: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoLayerModel {
    pub model_version: u32,
    pub bias: f64,
    pub alpha: Vec<f64>,
    pub training: TrainingInfo,
    pub subscales: Vec<SubscaleModel>,
    pub schema: Schema,
    pub scheme: BinarizationScheme,
}

/// Column layout of one subscale: (feature indices, columns, constrained, regularized).
type Layout = (Vec<usize>, Vec<usize>, Vec<bool>, Vec<bool>);

fn subscale_layout(scheme: &BinarizationScheme, members: &[usize]) -> Layout {
    let mut columns = Vec::new();
    let mut constrained = Vec::new();
    let mut regularized = Vec::new();
    for &fi in members {
        for j in scheme.features[fi].columns() {
            let c = &scheme.columns[j];
            columns.push(j);
            constrained.push(c.is_one_sided());
            regularized.push(matches!(
                c.kind,
                ColumnKind::Below { .. }
                    | ColumnKind::AtLeast { .. }
                    | ColumnKind::Interval { .. }
                    | ColumnKind::Category { .. }
            ));
        }
    }
    (members.to_vec(), columns, constrained, regularized)
}

/// Logistic regression restricted to one subscale's columns. Parameters
/// are laid out as `[b_k, β...]`.
pub struct SubscaleProblem<'a> {
    /// Active local column ids per row.
    active: Vec<Vec<u32>>,
    n_params: usize,
    labels: &'a [u8],
    weights: &'a [f64],
    regularized: Vec<bool>,
    lambda: f64,
}

impl<'a> SubscaleProblem<'a> {
    pub fn new(
        matrix: &BinaryMatrix,
        columns: &[usize],
        regularized: Vec<bool>,
        labels: &'a [u8],
        weights: &'a [f64],
        lambda: f64,
    ) -> SubscaleProblem<'a> {
        let active = (0..matrix.n_rows)
            .map(|i| {
                let row = matrix.row(i);
                columns
                    .iter()
                    .enumerate()
                    .filter(|(_, &j)| row[j] == 1)
                    .map(|(k, _)| k as u32)
                    .collect()
            })
            .collect();
        SubscaleProblem {
            active,
            n_params: columns.len() + 1,
            labels,
            weights,
            regularized,
            lambda,
        }
    }

    pub fn scores(&self, params: &[f64]) -> Vec<f64> {
        self.active
            .iter()
            .map(|a| {
                let mut z = params[0];
                for &k in a {
                    z += params[k as usize + 1];
                }
                z
            })
            .collect()
    }

    pub fn loss_and_gradient(&self, params: &[f64]) -> (f64, Vec<f64>) {
        let n = self.active.len() as f64;
        let mut loss = 0.0;
        let mut grad = vec![0.0; self.n_params];
        for (i, a) in self.active.iter().enumerate() {
            let mut z = params[0];
            for &k in a {
                z += params[k as usize + 1];
            }
            let p = sigmoid(z);
            let w = self.weights[i];
            loss += w * log_loss(p, self.labels[i]);
            let r = w * (p - self.labels[i] as f64);
            grad[0] += r;
            for &k in a {
                grad[k as usize + 1] += r;
            }
        }
        loss /= n;
        for g in grad.iter_mut() {
            *g /= n;
        }
        for (k, &reg) in self.regularized.iter().enumerate() {
            if reg {
                let b = params[k + 1];
                loss += self.lambda * b * b;
                grad[k + 1] += 2.0 * self.lambda * b;
            }
        }
        (loss, grad)
    }
}

/// Second layer over subscale probabilities; parameters `[b, α...]`.
pub struct SecondLayerProblem<'a> {
    probs: &'a [Vec<f64>],
    labels: &'a [u8],
    weights: &'a [f64],
    lambda: f64,
}

impl<'a> SecondLayerProblem<'a> {
    pub fn new(probs: &'a [Vec<f64>], labels: &'a [u8], weights: &'a [f64], lambda: f64) -> Self {
        SecondLayerProblem {
            probs,
            labels,
            weights,
            lambda,
        }
    }

    pub fn loss_and_gradient(&self, params: &[f64]) -> (f64, Vec<f64>) {
        let n = self.probs.len() as f64;
        let mut loss = 0.0;
        let mut grad = vec![0.0; params.len()];
        for (i, r) in self.probs.iter().enumerate() {
            let mut z = params[0];
            for (k, rk) in r.iter().enumerate() {
                z += params[k + 1] * rk;
            }
            let p = sigmoid(z);
            let w = self.weights[i];
            loss += w * log_loss(p, self.labels[i]);
            let d = w * (p - self.labels[i] as f64);
            grad[0] += d;
            for (k, rk) in r.iter().enumerate() {
                grad[k + 1] += d * rk;
            }
        }
        loss /= n;
        for g in grad.iter_mut() {
            *g /= n;
        }
        for k in 1..params.len() {
            loss += self.lambda * params[k] * params[k];
            grad[k] += 2.0 * self.lambda * params[k];
        }
        (loss, grad)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lambda: f64,
    pub max_thresholds: usize,
    pub optim: OptimOptions,
    pub fine_tune_epochs: usize,
    pub fine_tune_lr: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: DEFAULT_LAMBDA,
            max_thresholds: DEFAULT_MAX_THRESHOLDS,
            optim: OptimOptions::default(),
            fine_tune_epochs: 0,
            fine_tune_lr: 1e-5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubscaleReport {
    pub name: String,
    pub report: OptimReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub subscales: Vec<SubscaleReport>,
    pub second_layer: OptimReport,
    /// Joint objective before fine-tuning followed by one value per epoch.
    pub fine_tune_trace: Vec<f64>,
    pub final_objective: f64,
}

/// Fits one subscale on its columns of `matrix`.
#[allow(clippy::too_many_arguments)]
pub fn train_subscale(
    name: &str,
    scheme: &BinarizationScheme,
    members: &[usize],
    matrix: &BinaryMatrix,
    labels: &[u8],
    weights: &[f64],
    lambda: f64,
    opts: &OptimOptions,
) -> (SubscaleModel, OptimReport) {
    let (feature_indices, columns, constrained, regularized) = subscale_layout(scheme, members);
    let problem = SubscaleProblem::new(matrix, &columns, regularized.clone(), labels, weights, lambda);
    let mut lower = vec![f64::NEG_INFINITY; columns.len() + 1];
    for (k, &c) in constrained.iter().enumerate() {
        if c {
            lower[k + 1] = 0.0;
        }
    }
    let (params, report) = minimize(vec![0.0; columns.len() + 1], &lower, opts, |p| problem.loss_and_gradient(p));
    let model = SubscaleModel {
        name: name.to_string(),
        features: feature_indices.iter().map(|&f| scheme.features[f].feature.clone()).collect(),
        bias: params[0],
        coefficients: params[1..].to_vec(),
        feature_indices,
        columns,
        constrained,
        regularized,
    };
    (model, report)
}

/// Fits `(α, b)` with α ≥ 0 on an N×K matrix of subscale probabilities.
pub fn train_second_layer(
    probs: &[Vec<f64>],
    labels: &[u8],
    weights: &[f64],
    lambda: f64,
    opts: &OptimOptions,
) -> (Vec<f64>, f64, OptimReport) {
    let k = probs.first().map_or(0, Vec::len);
    let problem = SecondLayerProblem::new(probs, labels, weights, lambda);
    let mut lower = vec![0.0; k + 1];
    lower[0] = f64::NEG_INFINITY;
    let (params, report) = minimize(vec![0.0; k + 1], &lower, opts, |p| problem.loss_and_gradient(p));
    (params[1..].to_vec(), params[0], report)
}

/// Learns thresholds on `dataset` and trains the full model.
pub fn train(dataset: &Dataset, cfg: &TrainConfig) -> Result<(TwoLayerModel, TrainReport)> {
    if dataset.is_empty() {
        return Err(Error::NoRows);
    }
    let scheme = build_scheme(dataset, cfg.max_thresholds)?;
    train_with_scheme(dataset, scheme, cfg)
}

/// Trains subscales, then the second layer, then optionally fine-tunes.
pub fn train_with_scheme(
    dataset: &Dataset,
    scheme: BinarizationScheme,
    cfg: &TrainConfig,
) -> Result<(TwoLayerModel, TrainReport)> {
    if dataset.is_empty() {
        return Err(Error::NoRows);
    }
    if !(cfg.lambda >= 0.0 && cfg.lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda must be non-negative, got {}", cfg.lambda)));
    }
    let matrix = scheme.encode_dataset(dataset);
    let groups = dataset.schema.subscale_members();
    let fitted: Vec<(SubscaleModel, OptimReport)> = groups
        .par_iter()
        .map(|(name, members)| {
            train_subscale(name, &scheme, members, &matrix, &dataset.labels, &dataset.weights, cfg.lambda, &cfg.optim)
        })
        .collect();
    let mut subscales = Vec::new();
    let mut reports = Vec::new();
    for (m, r) in fitted {
        if !m.bias.is_finite() || m.coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::Training(format!("subscale {} diverged", m.name)));
        }
        reports.push(SubscaleReport {
            name: m.name.clone(),
            report: r,
        });
        subscales.push(m);
    }
    let mut model = TwoLayerModel {
        model_version: MODEL_VERSION,
        bias: 0.0,
        alpha: vec![0.0; subscales.len()],
        training: TrainingInfo {
            lambda: cfg.lambda,
            max_thresholds: scheme.max_thresholds,
            fine_tune_epochs: cfg.fine_tune_epochs,
            n_rows: dataset.len(),
        },
        subscales,
        schema: dataset.schema.clone(),
        scheme,
    };
    let probs: Vec<Vec<f64>> = (0..matrix.n_rows).map(|i| model.subscale_probabilities(matrix.row(i))).collect();
    let (alpha, bias, second) = train_second_layer(&probs, &dataset.labels, &dataset.weights, cfg.lambda, &cfg.optim);
    model.alpha = alpha;
    model.bias = bias;
    let mut trace = Vec::new();
    if cfg.fine_tune_epochs > 0 {
        let (tuned, t) = fine_tune(&model, &matrix, &dataset.labels, &dataset.weights, cfg.fine_tune_lr, cfg.fine_tune_epochs);
        model = tuned;
        trace = t;
    }
    let final_objective = joint_objective(&model, &matrix, &dataset.labels, &dataset.weights, cfg.lambda).0;
    Ok((
        model,
        TrainReport {
            subscales: reports,
            second_layer: second,
            fine_tune_trace: trace,
            final_objective,
        },
    ))
}

/// Joint parameter vector: `[b, α..., (b_k, β_k...) per subscale]`.
fn flatten(model: &TwoLayerModel) -> Vec<f64> {
    let mut v = vec![model.bias];
    v.extend(&model.alpha);
    for s in &model.subscales {
        v.push(s.bias);
        v.extend(&s.coefficients);
    }
    v
}

fn unflatten(model: &mut TwoLayerModel, v: &[f64]) {
    let k = model.alpha.len();
    model.bias = v[0];
    model.alpha.copy_from_slice(&v[1..1 + k]);
    let mut at = 1 + k;
    for s in model.subscales.iter_mut() {
        s.bias = v[at];
        let n = s.coefficients.len();
        s.coefficients.copy_from_slice(&v[at + 1..at + 1 + n]);
        at += 1 + n;
    }
}

fn joint_lower(model: &TwoLayerModel) -> Vec<f64> {
    let mut lo = vec![f64::NEG_INFINITY];
    lo.extend(std::iter::repeat_n(0.0, model.alpha.len()));
    for s in &model.subscales {
        lo.push(f64::NEG_INFINITY);
        lo.extend(s.constrained.iter().map(|&c| if c { 0.0 } else { f64::NEG_INFINITY }));
    }
    lo
}

/// Weighted log loss of the full model plus the ridge penalty on interval
/// and category coefficients and on α, with its gradient in joint layout.
pub fn joint_objective(
    model: &TwoLayerModel,
    matrix: &BinaryMatrix,
    labels: &[u8],
    weights: &[f64],
    lambda: f64,
) -> (f64, Vec<f64>) {
    let n = matrix.n_rows as f64;
    let k = model.subscales.len();
    let mut grad = vec![0.0; flatten(model).len()];
    let mut offsets = Vec::with_capacity(k);
    let mut at = 1 + k;
    for s in &model.subscales {
        offsets.push(at);
        at += 1 + s.coefficients.len();
    }
    let mut loss = 0.0;
    for i in 0..matrix.n_rows {
        let row = matrix.row(i);
        let probs = model.subscale_probabilities(row);
        let mut z = model.bias;
        for (a, r) in model.alpha.iter().zip(&probs) {
            z += a * r;
        }
        let p = sigmoid(z);
        let w = weights[i];
        loss += w * log_loss(p, labels[i]);
        let d = w * (p - labels[i] as f64);
        grad[0] += d;
        for (kk, s) in model.subscales.iter().enumerate() {
            let r = probs[kk];
            grad[1 + kk] += d * r;
            let dz = d * model.alpha[kk] * r * (1.0 - r);
            let o = offsets[kk];
            grad[o] += dz;
            for (c, &j) in s.columns.iter().enumerate() {
                if row[j] == 1 {
                    grad[o + 1 + c] += dz;
                }
            }
        }
    }
    loss /= n;
    for g in grad.iter_mut() {
        *g /= n;
    }
    for (kk, a) in model.alpha.iter().enumerate() {
        loss += lambda * a * a;
        grad[1 + kk] += 2.0 * lambda * a;
    }
    for (kk, s) in model.subscales.iter().enumerate() {
        for (c, (&b, &reg)) in s.coefficients.iter().zip(&s.regularized).enumerate() {
            if reg {
                loss += lambda * b * b;
                grad[offsets[kk] + 1 + c] += 2.0 * lambda * b;
            }
        }
    }
    (loss, grad)
}

/// Full-batch joint gradient descent through both layers. Each step is
/// projected onto the feasible set; a step that would raise the objective
/// is rejected and the learning rate halved. Returns the tuned model and
/// the objective trace (initial value first).
pub fn fine_tune(
    model: &TwoLayerModel,
    matrix: &BinaryMatrix,
    labels: &[u8],
    weights: &[f64],
    lr: f64,
    epochs: usize,
) -> (TwoLayerModel, Vec<f64>) {
    let lambda = model.training.lambda;
    let lower = joint_lower(model);
    let mut current = model.clone();
    let mut theta = flatten(&current);
    for (v, lo) in theta.iter_mut().zip(&lower) {
        *v = v.max(*lo);
    }
    unflatten(&mut current, &theta);
    let (mut obj, mut grad) = joint_objective(&current, matrix, labels, weights, lambda);
    let mut trace = vec![obj];
    let mut lr = lr;
    for _ in 0..epochs {
        let candidate: Vec<f64> = theta
            .iter()
            .zip(&grad)
            .zip(&lower)
            .map(|((t, g), lo)| (t - lr * g).max(*lo))
            .collect();
        let mut trial = current.clone();
        unflatten(&mut trial, &candidate);
        let (o, g) = joint_objective(&trial, matrix, labels, weights, lambda);
        if o <= obj {
            current = trial;
            theta = candidate;
            obj = o;
            grad = g;
        } else {
            lr *= 0.5;
        }
        trace.push(obj);
    }
    current.training.fine_tune_epochs = model.training.fine_tune_epochs.max(epochs);
    (current, trace)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActiveTerm {
    pub column: usize,
    pub feature: String,
    pub condition: String,
    pub points: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeaturePoints {
    pub feature: String,
    pub value: String,
    pub points: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubscaleBreakdown {
    pub name: String,
    pub bias: f64,
    /// b_k + Σ f_p(x).
    pub score: f64,
    pub probability: f64,
    pub alpha: f64,
    /// α_k · r^[k](x).
    pub contribution: f64,
    pub features: Vec<FeaturePoints>,
    pub terms: Vec<ActiveTerm>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionBreakdown {
    pub bits: Vec<u8>,
    pub subscales: Vec<SubscaleBreakdown>,
    pub bias: f64,
    pub score: f64,
    pub probability: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unknown_categories: Vec<String>,
}

impl TwoLayerModel {
    /// Restores derived column layouts after deserialization.
    fn rebuild(&mut self) -> Result<()> {
        self.schema.validate()?;
        if self.scheme.features.len() != self.schema.n_features() {
            return Err(Error::Parse("scheme does not cover the schema features".into()));
        }
        let groups = self.schema.subscale_members();
        if groups.len() != self.subscales.len() || self.alpha.len() != self.subscales.len() {
            return Err(Error::Parse("subscale count does not match the schema".into()));
        }
        for (s, (name, members)) in self.subscales.iter_mut().zip(&groups) {
            if &s.name != name {
                return Err(Error::Parse(format!("subscale {} out of order (expected {name})", s.name)));
            }
            let (fi, columns, constrained, regularized) = subscale_layout(&self.scheme, members);
            if columns.len() != s.coefficients.len() {
                return Err(Error::Parse(format!(
                    "subscale {} has {} coefficients for {} columns",
                    s.name,
                    s.coefficients.len(),
                    columns.len()
                )));
            }
            s.feature_indices = fi;
            s.columns = columns;
            s.constrained = constrained;
            s.regularized = regularized;
        }
        Ok(())
    }

    pub fn n_subscales(&self) -> usize {
        self.subscales.len()
    }

    fn subscale_score(&self, k: usize, bits: &[u8]) -> f64 {
        let s = &self.subscales[k];
        let mut z = s.bias;
        let mut c = 0;
        for &fi in &s.feature_indices {
            let mut fp = 0.0;
            for j in self.scheme.features[fi].columns() {
                if bits[j] == 1 {
                    fp += s.coefficients[c];
                }
                c += 1;
            }
            z += fp;
        }
        z
    }

    pub fn subscale_probabilities(&self, bits: &[u8]) -> Vec<f64> {
        (0..self.subscales.len())
            .map(|k| sigmoid(self.subscale_score(k, bits)))
            .collect()
    }

    pub fn probability_from_bits(&self, bits: &[u8]) -> f64 {
        let mut z = self.bias;
        for (k, r) in self.subscale_probabilities(bits).into_iter().enumerate() {
            z += self.alpha[k] * r;
        }
        sigmoid(z)
    }

    pub fn predict_proba(&self, x: &[Cell]) -> f64 {
        self.probability_from_bits(&self.scheme.encode(x))
    }

    pub fn predict_matrix(&self, matrix: &BinaryMatrix) -> Vec<f64> {
        (0..matrix.n_rows)
            .into_par_iter()
            .map(|i| self.probability_from_bits(matrix.row(i)))
            .collect()
    }

    pub fn predict_dataset(&self, dataset: &Dataset) -> Vec<f64> {
        dataset.rows.par_iter().map(|r| self.predict_proba(r)).collect()
    }

    pub fn predict(&self, x: &[Cell]) -> Result<PredictionBreakdown> {
        self.schema.check_row(x)?;
        let (bits, unknown) = self.scheme.encode_with_diagnostics(x);
        let mut subscales = Vec::new();
        let mut score = self.bias;
        for (k, s) in self.subscales.iter().enumerate() {
            let mut features = Vec::new();
            let mut terms = Vec::new();
            let mut c = 0;
            for &fi in &s.feature_indices {
                let mut fp = 0.0;
                for j in self.scheme.features[fi].columns() {
                    if bits[j] == 1 {
                        fp += s.coefficients[c];
                        terms.push(ActiveTerm {
                            column: j,
                            feature: self.schema.features[fi].name.clone(),
                            condition: self.scheme.condition_text(j),
                            points: s.coefficients[c],
                        });
                    }
                    c += 1;
                }
                features.push(FeaturePoints {
                    feature: self.schema.features[fi].name.clone(),
                    value: x[fi].to_string(),
                    points: fp,
                });
            }
            let z = self.subscale_score(k, &bits);
            let r = sigmoid(z);
            let contribution = self.alpha[k] * r;
            score += contribution;
            subscales.push(SubscaleBreakdown {
                name: s.name.clone(),
                bias: s.bias,
                score: z,
                probability: r,
                alpha: self.alpha[k],
                contribution,
                features,
                terms,
            });
        }
        Ok(PredictionBreakdown {
            probability: sigmoid(score),
            bits,
            subscales,
            bias: self.bias,
            score,
            unknown_categories: unknown.iter().map(|&f| self.schema.features[f].name.clone()).collect(),
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("model serializes to TOML")
    }

    pub fn from_toml_str(text: &str) -> Result<TwoLayerModel> {
        let table: toml::Table = text.parse().map_err(|e| Error::Parse(format!("model file: {e}")))?;
        let found = table
            .get("model_version")
            .and_then(toml::Value::as_integer)
            .ok_or_else(|| Error::Parse("model file lacks model_version".into()))?;
        if found != MODEL_VERSION as i64 {
            return Err(Error::Version {
                found: found.try_into().unwrap_or(u32::MAX),
                expected: MODEL_VERSION,
            });
        }
        let mut model: TwoLayerModel = toml::from_str(text).map_err(|e| Error::Parse(format!("model file: {e}")))?;
        model.rebuild()?;
        Ok(model)
    }

    /// Rebuilds a model from its JSON form (the `/model` payload).
    pub fn from_json_value(value: serde_json::Value) -> Result<TwoLayerModel> {
        let mut model: TwoLayerModel =
            serde_json::from_value(value).map_err(|e| Error::Parse(format!("model payload: {e}")))?;
        if model.model_version != MODEL_VERSION {
            return Err(Error::Version {
                found: model.model_version,
                expected: MODEL_VERSION,
            });
        }
        model.rebuild()?;
        Ok(model)
    }

    /// SHA-256 of the serialized model.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml_string().as_bytes()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml_string()).map_err(|e| Error::io(path, e))
    }
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TwoLayerModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    TwoLayerModel::from_toml_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binarize::BinColumn;
    use crate::data::Schema;

    fn matrix(rows: &[Vec<u8>], kinds: Vec<ColumnKind>) -> BinaryMatrix {
        let cols = kinds
            .into_iter()
            .enumerate()
            .map(|(j, kind)| BinColumn {
                feature: format!("f{j}"),
                feature_index: j,
                level: 1,
                kind,
            })
            .collect();
        BinaryMatrix::from_rows(cols, rows)
    }

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(1.481) - 0.8147).abs() < 1e-4);
        assert!(sigmoid(1000.0) <= 1.0 && sigmoid(-1000.0) >= 0.0);
        for z in [-30.0, -2.5, 0.3, 7.0, 700.0] {
            assert!((sigmoid(z) + sigmoid(-z) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_params_balanced_loss_is_ln2() {
        let m = matrix(&[vec![1], vec![0], vec![1], vec![0]], vec![ColumnKind::NotMissing]);
        let labels = [1, 0, 0, 1];
        let w = [1.0; 4];
        let p = SubscaleProblem::new(&m, &[0], vec![false], &labels, &w, 0.0);
        let (l, _) = p.loss_and_gradient(&[0.0, 0.0]);
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn doubling_weights_doubles_data_term() {
        let m = matrix(&[vec![1, 0], vec![0, 1], vec![1, 1]], vec![ColumnKind::NotMissing; 2]);
        let labels = [1, 0, 1];
        let p1 = SubscaleProblem::new(&m, &[0, 1], vec![false; 2], &labels, &[1.0, 2.0, 0.5], 0.0);
        let p2 = SubscaleProblem::new(&m, &[0, 1], vec![false; 2], &labels, &[2.0, 4.0, 1.0], 0.0);
        let params = [0.3, -0.7, 1.1];
        assert_eq!(2.0 * p1.loss_and_gradient(&params).0, p2.loss_and_gradient(&params).0);
    }

    #[test]
    fn negative_optimum_pins_constrained_to_zero() {
        // column on => always good
        let rows: Vec<Vec<u8>> = (0..40).map(|i| vec![(i % 2) as u8]).collect();
        let labels: Vec<u8> = (0..40).map(|i| if i % 2 == 1 { 0 } else { (i % 4 == 0) as u8 }).collect();
        let m = matrix(&rows, vec![ColumnKind::Below { threshold: 1.0 }]);
        let p = SubscaleProblem::new(&m, &[0], vec![true], &labels, &[1.0; 40], 0.0);
        let (x, r) = minimize(vec![0.0, 0.0], &[f64::NEG_INFINITY, 0.0], &OptimOptions::default(), |q| {
            p.loss_and_gradient(q)
        });
        assert!(r.converged);
        assert_eq!(x[1], 0.0);
        let (_, g) = p.loss_and_gradient(&x);
        assert!(g[1] >= -1e-5);
    }

    #[test]
    fn intercept_only_recovers_weighted_base_rate() {
        let m = matrix(&vec![vec![]; 10], vec![]);
        let labels = [1, 1, 1, 0, 0, 0, 0, 0, 0, 0];
        let weights = [2.0, 2.0, 2.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        let p = SubscaleProblem::new(&m, &[], vec![], &labels, &weights, 0.0);
        let (x, _) = minimize(vec![0.0], &[f64::NEG_INFINITY], &OptimOptions::default(), |q| p.loss_and_gradient(q));
        assert!((sigmoid(x[0]) - 6.0 / 13.0).abs() < 1e-6);
    }

    #[test]
    fn second_layer_on_perfect_subscale() {
        let probs: Vec<Vec<f64>> = (0..50).map(|i| vec![(i % 2) as f64]).collect();
        let labels: Vec<u8> = (0..50).map(|i| (i % 2) as u8).collect();
        let (alpha, _, r) = train_second_layer(&probs, &labels, &[1.0; 50], 1e-4, &OptimOptions::default());
        assert!(alpha[0] > 0.0);
        assert!(r.objective < std::f64::consts::LN_2 / 10.0);
    }

    #[test]
    fn useless_subscales_give_base_rate() {
        let probs = vec![vec![0.5, 0.5]; 20];
        let labels: Vec<u8> = (0..20).map(|i| (i < 5) as u8).collect();
        let (_, b, _) = train_second_layer(&probs, &labels, &[1.0; 20], 0.0, &OptimOptions::default());
        let (alpha, _, _) = train_second_layer(&probs, &labels, &[1.0; 20], 0.0, &OptimOptions::default());
        let z = b + 0.5 * (alpha[0] + alpha[1]);
        assert!((sigmoid(z) - 0.25).abs() < 1e-6);
    }

    pub(crate) fn tiny_schema() -> Schema {
        Schema::from_toml_str(
            r#"
schema_version = 1
label = "bad"
positive_means = "a high risk"
subscales = ["a", "b"]

[[features]]
name = "score"
kind = "numeric"
monotonicity = "decreasing"
subscale = "a"
special_values = [{ code = -9, meaning = "no record" }]

[[features]]
name = "debt"
kind = "numeric"
monotonicity = "increasing"
subscale = "b"

[[features]]
name = "home"
kind = "categorical"
subscale = "b"
"#,
        )
        .unwrap()
    }

    pub(crate) fn tiny_dataset() -> Dataset {
        let schema = tiny_schema();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..120 {
            let s = (i * 37 % 100) as f64;
            let d = (i * 53 % 80) as f64;
            let home = ["own", "rent", "free"][i % 3];
            let score = if i % 17 == 0 { Cell::Special(-9) } else { Cell::Number(s) };
            let risk = 0.04 * (50.0 - s) + 0.05 * (d - 40.0) + if home == "rent" { 0.5 } else { 0.0 };
            labels.push((risk + ((i * 7919) % 13) as f64 / 6.0 - 1.0 > 0.0) as u8);
            rows.push(vec![score, Cell::Number(d), Cell::Category(home.into())]);
        }
        Dataset::new(schema, rows, labels).unwrap()
    }

    #[test]
    fn train_respects_constraints_and_round_trips() {
        let d = tiny_dataset();
        let (model, report) = train(&d, &TrainConfig::default()).unwrap();
        assert!(report.subscales.iter().all(|s| s.report.converged));
        assert!(model.alpha.iter().all(|&a| a >= 0.0));
        for s in &model.subscales {
            for (b, &c) in s.coefficients.iter().zip(&s.constrained) {
                if c {
                    assert!(*b >= 0.0);
                }
            }
        }
        let text = model.to_toml_string();
        let back = TwoLayerModel::from_toml_str(&text).unwrap();
        assert_eq!(back, model);
        for r in &d.rows {
            assert_eq!(back.predict_proba(r).to_bits(), model.predict_proba(r).to_bits());
        }
    }

    #[test]
    fn breakdown_recomputes() {
        let d = tiny_dataset();
        let (model, _) = train(&d, &TrainConfig::default()).unwrap();
        for r in &d.rows {
            let b = model.predict(r).unwrap();
            let sum: f64 = b.subscales.iter().map(|s| s.contribution).sum();
            assert!((b.score - b.bias - sum).abs() < 1e-12);
            assert!((sigmoid(b.score) - b.probability).abs() < 1e-12);
            assert_eq!(b.probability, model.predict_proba(r));
        }
    }

    #[test]
    fn version_mismatch() {
        let d = tiny_dataset();
        let (model, _) = train(&d, &TrainConfig::default()).unwrap();
        let text = model.to_toml_string().replacen("model_version = 1", "model_version = 99", 1);
        assert!(matches!(
            TwoLayerModel::from_toml_str(&text),
            Err(Error::Version { found: 99, .. })
        ));
        assert!(matches!(TwoLayerModel::from_toml_str("bias = [[["), Err(Error::Parse(_))));
    }

    #[test]
    fn fine_tune_zero_epochs_is_identity_and_projection_holds() {
        let d = tiny_dataset();
        let (model, _) = train(&d, &TrainConfig::default()).unwrap();
        let m = model.scheme.encode_dataset(&d);
        let (same, trace) = fine_tune(&model, &m, &d.labels, &d.weights, 1e-5, 0);
        assert_eq!(same, model);
        assert_eq!(trace.len(), 1);

        let mut broken = model.clone();
        let k = broken.subscales[0].constrained.iter().position(|&c| c).unwrap();
        broken.subscales[0].coefficients[k] = -0.1;
        let (tuned, trace) = fine_tune(&broken, &m, &d.labels, &d.weights, 1e-5, 1);
        assert!(tuned.subscales[0].coefficients[k] >= 0.0);
        assert!(trace.windows(2).all(|w| w[1] <= w[0]));
    }
}
