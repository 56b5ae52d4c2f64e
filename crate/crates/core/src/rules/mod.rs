//! Globally consistent rule-based summary explanations over a model's
//! predictions on the training matrix.

mod bitset;
pub mod cache;
pub mod solver;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use bitset::BitSet;
pub use cache::{build_rule_cache, CacheBuildReport, RuleCache};
pub use solver::{
    max_support_rule, min_sparsity_rule, opt_consistent_rule, ExplainOptions, Explanation, RuleSource,
    SolveOptions, SolveReport, SolveStatus,
};

use crate::binarize::BinaryMatrix;
use crate::data::Dataset;
use crate::riskmodel::TwoLayerModel;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Extended binary matrix `[X, 1 - X]` stored column-wise, with the
/// model's predictions fixed at build time.
#[derive(Clone, Debug)]
pub struct ExplainContext {
    /// Original columns P′; extended column `j + P′` is the complement of `j`.
    pub n_original: usize,
    pub matrix: BinaryMatrix,
    pub predictions: Vec<u8>,
    pub probabilities: Vec<f64>,
    pub threshold: f64,
    /// Rendered predicate per extended column.
    pub predicates: Vec<String>,
    pub positive_means: String,
    pub negative_means: String,
    columns: Vec<BitSet>,
    hash: String,
}

/// The observation being explained: its original bits and predicted label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub bits: Vec<u8>,
    pub label: u8,
    /// Training row index when the query is part of the universe.
    pub row: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Rule {
    /// Extended column ids, ascending.
    pub columns: Vec<usize>,
    pub label: u8,
    pub support: usize,
}

impl Rule {
    pub fn sparsity(&self) -> usize {
        self.columns.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub consistent: bool,
    pub violations: Vec<usize>,
}

/// Client-facing rule rendering.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RulePayload {
    pub predicates: Vec<String>,
    pub columns: Vec<usize>,
    pub label: u8,
    pub label_text: String,
    pub support: usize,
    pub support_fraction: f64,
    pub sparsity: usize,
    pub text: String,
}

impl ExplainContext {
    /// Builds a context from original-column rows and fixed predictions.
    pub fn new(
        matrix: BinaryMatrix,
        probabilities: Vec<f64>,
        threshold: f64,
        predicates: Vec<String>,
        model_fingerprint: &str,
    ) -> ExplainContext {
        let p = matrix.n_cols();
        let n = matrix.n_rows;
        assert_eq!(probabilities.len(), n, "one probability per row");
        assert_eq!(predicates.len(), 2 * p, "one predicate per extended column");
        let predictions: Vec<u8> = probabilities.iter().map(|&r| (r >= threshold) as u8).collect();
        let mut columns = vec![BitSet::new(n); 2 * p];
        for i in 0..n {
            let row = matrix.row(i);
            for j in 0..p {
                if row[j] == 1 {
                    columns[j].set(i);
                } else {
                    columns[j + p].set(i);
                }
            }
        }
        let mut h = Sha256::new();
        h.update(model_fingerprint.as_bytes());
        h.update(threshold.to_bits().to_le_bytes());
        h.update((n as u64).to_le_bytes());
        h.update((p as u64).to_le_bytes());
        for i in 0..n {
            h.update(matrix.row(i));
        }
        h.update(&predictions);
        ExplainContext {
            n_original: p,
            matrix,
            predictions,
            probabilities,
            threshold,
            predicates,
            positive_means: "a high risk".into(),
            negative_means: "a low risk".into(),
            columns,
            hash: hex::encode(h.finalize()),
        }
    }

    /// Context with generic predicate names, for instances without a model.
    pub fn from_rows(rows: &[Vec<u8>], predictions: &[u8]) -> ExplainContext {
        let p = rows.first().map_or(0, Vec::len);
        let cols = (0..p)
            .map(|j| crate::binarize::BinColumn {
                feature: format!("c{j}"),
                feature_index: j,
                level: 1,
                kind: crate::binarize::ColumnKind::NotMissing,
            })
            .collect();
        let matrix = BinaryMatrix::from_rows(cols, rows);
        let mut predicates: Vec<String> = (0..p).map(|j| format!("c{j}")).collect();
        predicates.extend((0..p).map(|j| format!("not c{j}")));
        let probs = predictions.iter().map(|&y| y as f64).collect();
        ExplainContext::new(matrix, probs, 0.5, predicates, "")
    }

    pub fn n_rows(&self) -> usize {
        self.matrix.n_rows
    }

    pub fn n_extended(&self) -> usize {
        2 * self.n_original
    }

    pub fn column(&self, ext: usize) -> &BitSet {
        &self.columns[ext]
    }

    /// Content hash of (model fingerprint, threshold, matrix, predictions).
    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn query_row(&self, i: usize) -> Query {
        Query {
            bits: self.matrix.row(i).to_vec(),
            label: self.predictions[i],
            row: Some(i),
        }
    }

    pub fn query_bits(&self, bits: Vec<u8>, probability: f64) -> Query {
        assert_eq!(bits.len(), self.n_original);
        Query {
            bits,
            label: (probability >= self.threshold) as u8,
            row: None,
        }
    }

    /// Whether the query satisfies extended column `ext`.
    pub fn satisfies(&self, bits: &[u8], ext: usize) -> bool {
        let p = self.n_original;
        if ext < p {
            bits[ext] == 1
        } else {
            bits[ext - p] == 0
        }
    }

    /// Extended columns the query satisfies, ascending.
    pub fn relevant_columns(&self, q: &Query) -> Vec<usize> {
        (0..self.n_extended()).filter(|&c| self.satisfies(&q.bits, c)).collect()
    }

    pub fn opposite_rows(&self, label: u8) -> BitSet {
        let mut b = BitSet::new(self.n_rows());
        for (i, &y) in self.predictions.iter().enumerate() {
            if y != label {
                b.set(i);
            }
        }
        b
    }

    /// Rows satisfying every column of `columns`.
    pub fn satisfying_rows(&self, columns: &[usize]) -> BitSet {
        let mut s = BitSet::full(self.n_rows());
        for &c in columns {
            s.and_assign(&self.columns[c]);
        }
        s
    }

    pub fn support(&self, columns: &[usize]) -> usize {
        self.satisfying_rows(columns).count()
    }

    pub fn make_rule(&self, mut columns: Vec<usize>, label: u8) -> Rule {
        columns.sort_unstable();
        columns.dedup();
        let support = self.support(&columns);
        Rule {
            columns,
            label,
            support,
        }
    }

    pub fn is_relevant(&self, rule: &Rule, q: &Query) -> bool {
        rule.label == q.label && rule.columns.iter().all(|&c| self.satisfies(&q.bits, c))
    }

    pub fn label_text(&self, label: u8) -> &str {
        if label == 1 {
            &self.positive_means
        } else {
            &self.negative_means
        }
    }

    pub fn payload(&self, rule: &Rule) -> RulePayload {
        let predicates: Vec<String> = rule.columns.iter().map(|&c| self.predicates[c].clone()).collect();
        let fraction = rule.support as f64 / self.n_rows().max(1) as f64;
        RulePayload {
            text: render_rule(&predicates, rule.support, fraction, self.label_text(rule.label)),
            predicates,
            columns: rule.columns.clone(),
            label: rule.label,
            label_text: self.label_text(rule.label).to_string(),
            support: rule.support,
            support_fraction: fraction,
            sparsity: rule.sparsity(),
        }
    }
}

pub fn render_rule(predicates: &[String], support: usize, fraction: f64, label_text: &str) -> String {
    let mut out = format!("For all {} ({:.1}%) people where:\n", support, 100.0 * fraction);
    if predicates.is_empty() {
        out.push_str("  (no conditions)\n");
    }
    for (i, p) in predicates.iter().enumerate() {
        let sep = if i + 1 < predicates.len() { ", and" } else { "," };
        out.push_str(&format!("  - {p}{sep}\n"));
    }
    out.push_str(&format!("the global model predicts {label_text}."));
    out
}

/// Builds the explanation context of `model` over `dataset`.
pub fn build_context(model: &TwoLayerModel, dataset: &Dataset, threshold: f64) -> ExplainContext {
    let matrix = model.scheme.encode_dataset(dataset);
    let probabilities = model.predict_matrix(&matrix);
    let p = model.scheme.n_columns();
    let mut predicates: Vec<String> = (0..p).map(|j| model.scheme.predicate_text(j, false)).collect();
    predicates.extend((0..p).map(|j| model.scheme.predicate_text(j, true)));
    let mut ctx = ExplainContext::new(matrix, probabilities, threshold, predicates, &model.fingerprint());
    ctx.positive_means = model.schema.positive_means.clone();
    ctx.negative_means = model.schema.negative_means.clone();
    ctx
}

/// Exhaustive scan for rows that satisfy the rule but get the other label.
pub fn verify_consistency(rule: &Rule, ctx: &ExplainContext) -> Verification {
    let violations: Vec<usize> = ctx
        .satisfying_rows(&rule.columns)
        .ones()
        .filter(|&i| ctx.predictions[i] != rule.label)
        .collect();
    Verification {
        consistent: violations.is_empty(),
        violations,
    }
}
