//! One loaded model with its explanation context, rule cache and training
//! snapshot. Produces the prediction and explanation payloads shared by the
//! service and the command line.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::binarize::ScoreTable;
use crate::cases::{annotate, similar_cases, CaseMatch, DEFAULT_CASES};
use crate::data::{Cell, Dataset};
use crate::error::{Error, Result};
use crate::factors::{important_factors, protective_factors, RiskFactor};
use crate::riskmodel::{PredictionBreakdown, TwoLayerModel};
use crate::rules::{
    build_context, opt_consistent_rule, verify_consistency, ExplainContext, ExplainOptions, Query, RulePayload,
    RuleCache, RuleSource, SolveStatus, DEFAULT_THRESHOLD,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplainSettings {
    pub n_subscales: usize,
    pub n_factors_each: usize,
    /// Number of protective (negative-point) terms to list; 0 lists none.
    pub protective: usize,
    pub n_cases: usize,
    pub show_labels: bool,
    pub rules: ExplainOptions,
}

impl Default for ExplainSettings {
    fn default() -> Self {
        ExplainSettings {
            n_subscales: 2,
            n_factors_each: 2,
            protective: 0,
            n_cases: DEFAULT_CASES,
            show_labels: true,
            rules: ExplainOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionPayload {
    pub model_fingerprint: String,
    pub probability: f64,
    pub predicted_label: u8,
    pub label_text: String,
    pub breakdown: PredictionBreakdown,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleSection {
    #[serde(flatten)]
    pub rule: RulePayload,
    pub source: RuleSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub opt_sparsity: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplanationPayload {
    pub model_fingerprint: String,
    pub probability: f64,
    pub predicted_label: u8,
    pub label_text: String,
    pub factors: Vec<RiskFactor>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub protective: Vec<RiskFactor>,
    pub rule: Option<RuleSection>,
    pub cases: Vec<CaseMatch>,
    /// Set when no rule could be produced (outlier, twin row, time limit).
    pub warning: Option<String>,
    /// A solver hit its time limit; the rule, if any, may not be optimal.
    pub timed_out: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubscaleView {
    pub name: String,
    pub alpha: f64,
    pub bias: f64,
    pub features: Vec<String>,
}

/// Full transparency dump of a model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelPayload {
    pub model_fingerprint: String,
    pub bias: f64,
    pub subscales: Vec<SubscaleView>,
    pub score_tables: Vec<ScoreTable>,
    /// The model itself; rebuilds with `TwoLayerModel::from_json_value`.
    pub model: serde_json::Value,
}

pub struct Engine {
    pub model: TwoLayerModel,
    pub dataset: Dataset,
    pub ctx: ExplainContext,
    pub cache: Option<RuleCache>,
    fingerprint: String,
}

impl Engine {
    pub fn new(model: TwoLayerModel, dataset: Dataset, threshold: f64) -> Result<Engine> {
        if dataset.schema != model.schema {
            return Err(Error::SchemaMismatch("dataset schema differs from the model's schema".into()));
        }
        let ctx = build_context(&model, &dataset, threshold);
        let fingerprint = model.fingerprint();
        Ok(Engine {
            model,
            dataset,
            ctx,
            cache: None,
            fingerprint,
        })
    }

    pub fn with_default_threshold(model: TwoLayerModel, dataset: Dataset) -> Result<Engine> {
        Engine::new(model, dataset, DEFAULT_THRESHOLD)
    }

    /// Attaches an existing cache file; refuses one built for other inputs.
    pub fn attach_cache(&mut self, path: impl AsRef<Path>) -> Result<()> {
        self.cache = Some(RuleCache::open_existing(path, &self.ctx)?);
        Ok(())
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn observation(&self, map: &serde_json::Map<String, serde_json::Value>) -> Result<Vec<Cell>> {
        self.model.schema.observation_from_json(map)
    }

    pub fn predict(&self, x: &[Cell]) -> Result<PredictionPayload> {
        let breakdown = self.model.predict(x)?;
        let label = (breakdown.probability >= self.ctx.threshold) as u8;
        Ok(PredictionPayload {
            model_fingerprint: self.fingerprint.clone(),
            probability: breakdown.probability,
            predicted_label: label,
            label_text: self.ctx.label_text(label).to_string(),
            breakdown,
        })
    }

    pub fn explain(&self, x: &[Cell], settings: &ExplainSettings) -> Result<ExplanationPayload> {
        let breakdown = self.model.predict(x)?;
        let q: Query = self.ctx.query_bits(breakdown.bits.clone(), breakdown.probability);
        let factors = important_factors(&breakdown, settings.n_subscales, settings.n_factors_each);
        let protective = if settings.protective > 0 {
            protective_factors(&breakdown, settings.protective)
        } else {
            Vec::new()
        };
        let mut payload = ExplanationPayload {
            model_fingerprint: self.fingerprint.clone(),
            probability: breakdown.probability,
            predicted_label: q.label,
            label_text: self.ctx.label_text(q.label).to_string(),
            factors,
            protective,
            rule: None,
            cases: Vec::new(),
            warning: None,
            timed_out: false,
        };
        match opt_consistent_rule(&q, &self.ctx, self.cache.as_ref(), &settings.rules) {
            Ok(e) => {
                debug_assert!(verify_consistency(&e.rule, &self.ctx).consistent);
                payload.timed_out = e.reports.iter().any(|r| r.status == SolveStatus::FeasibleTimeout);
                let mut cases = similar_cases(&q, &e.rule, &self.ctx, settings.n_cases);
                let display = self.display_features(&e.rule.columns, &payload.factors);
                annotate(&mut cases, &self.dataset, &display, settings.show_labels);
                payload.cases = cases;
                payload.rule = Some(RuleSection {
                    rule: self.ctx.payload(&e.rule),
                    source: e.source,
                    opt_sparsity: e.opt_sparsity,
                });
            }
            Err(Error::Timeout) => {
                payload.timed_out = true;
                payload.warning = Some(Error::Timeout.to_string());
            }
            Err(e @ (Error::Outlier | Error::Infeasible { .. })) => payload.warning = Some(e.to_string()),
            Err(e) => return Err(e),
        }
        Ok(payload)
    }

    /// Rule features first, then factor features, each once, in that order.
    fn display_features(&self, columns: &[usize], factors: &[RiskFactor]) -> Vec<usize> {
        let p = self.ctx.n_original;
        let mut out: Vec<usize> = Vec::new();
        let from_rule = columns.iter().map(|&c| self.model.scheme.columns[c % p].feature_index);
        let from_factors = factors.iter().map(|f| self.model.scheme.columns[f.column].feature_index);
        for fi in from_rule.chain(from_factors) {
            if !out.contains(&fi) {
                out.push(fi);
            }
        }
        out
    }

    pub fn model_payload(&self) -> ModelPayload {
        let m = &self.model;
        let mut score_tables = Vec::new();
        for s in &m.subscales {
            let mut c = 0;
            for &fi in &s.feature_indices {
                let n = m.scheme.features[fi].n_columns;
                score_tables.push(m.scheme.score_table(&m.schema, fi, &s.coefficients[c..c + n]));
                c += n;
            }
        }
        ModelPayload {
            model_fingerprint: self.fingerprint.clone(),
            bias: m.bias,
            subscales: m
                .subscales
                .iter()
                .zip(&m.alpha)
                .map(|(s, &a)| SubscaleView {
                    name: s.name.clone(),
                    alpha: a,
                    bias: s.bias,
                    features: s.features.clone(),
                })
                .collect(),
            score_tables,
            model: serde_json::to_value(m).expect("model serializes to JSON"),
        }
    }
}
