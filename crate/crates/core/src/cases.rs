//! Case-based explanations: past rows satisfying a rule, ranked by how
//! many original binary columns they share with the query.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::rules::{ExplainContext, Query, Rule};

pub const DEFAULT_CASES: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseMatch {
    pub row: usize,
    /// Original columns whose bits agree with the query, in [0, P′].
    pub similarity: usize,
    pub risk_prediction: f64,
    pub predicted_label: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_label: Option<u8>,
    /// (feature, value) pairs selected for display.
    #[serde(default)]
    pub values: Vec<(String, String)>,
}

pub fn similarity(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x == y).count()
}

/// Top `k` rows satisfying `rule` by similarity, then row index. The query's
/// own training row is left out.
pub fn similar_cases(q: &Query, rule: &Rule, ctx: &ExplainContext, k: usize) -> Vec<CaseMatch> {
    let mut scored: Vec<(usize, usize)> = ctx
        .satisfying_rows(&rule.columns)
        .ones()
        .filter(|&i| Some(i) != q.row)
        .map(|i| (similarity(&q.bits, ctx.matrix.row(i)), i))
        .collect();
    scored.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    scored
        .into_iter()
        .take(k)
        .map(|(s, i)| CaseMatch {
            row: i,
            similarity: s,
            risk_prediction: ctx.probabilities[i],
            predicted_label: ctx.predictions[i],
            true_label: None,
            values: Vec::new(),
        })
        .collect()
}

/// Adds true labels (unless hidden) and display values from the dataset.
pub fn annotate(cases: &mut [CaseMatch], dataset: &Dataset, display: &[usize], show_labels: bool) {
    for c in cases.iter_mut() {
        if show_labels {
            c.true_label = Some(dataset.labels[c.row]);
        }
        c.values = display
            .iter()
            .map(|&f| (dataset.schema.features[f].name.clone(), dataset.rows[c.row][f].to_string()))
            .collect();
    }
}
