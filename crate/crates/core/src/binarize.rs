//! Supervised discretization into one-sided, two-sided, category and
//! special-value indicator columns.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{category_tokens, Cell, Dataset, FeatureKind, Monotonicity, Schema};
use crate::error::{Error, Result};

pub const DEFAULT_MAX_THRESHOLDS: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ColumnKind {
    /// `x < threshold`, for features whose risk decreases with x.
    Below { threshold: f64 },
    /// `x >= threshold`, for features whose risk increases with x.
    AtLeast { threshold: f64 },
    /// `lo <= x < hi`; a missing bound is unbounded.
    Interval {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lo: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hi: Option<f64>,
    },
    Category { token: String },
    Special { code: i64, meaning: String },
    NotMissing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinColumn {
    pub feature: String,
    pub feature_index: usize,
    /// Level l: 1..=L for intervals and categories, 0 for the not-missing
    /// indicator, the code itself for special values.
    pub level: i64,
    pub kind: ColumnKind,
}

impl BinColumn {
    /// Interval columns of monotone features carry non-negative coefficients.
    pub fn is_one_sided(&self) -> bool {
        matches!(self.kind, ColumnKind::Below { .. } | ColumnKind::AtLeast { .. })
    }

    pub fn is_special(&self) -> bool {
        matches!(self.kind, ColumnKind::Special { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureBins {
    pub feature: String,
    pub monotonicity: Monotonicity,
    pub thresholds: Vec<f64>,
    /// All observed non-special values were whole numbers.
    pub integer_valued: bool,
    pub first_column: usize,
    pub n_columns: usize,
}

impl FeatureBins {
    pub fn columns(&self) -> std::ops::Range<usize> {
        self.first_column..self.first_column + self.n_columns
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinarizationScheme {
    pub max_thresholds: usize,
    pub features: Vec<FeatureBins>,
    pub columns: Vec<BinColumn>,
}

/// N×P′ binary design matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryMatrix {
    pub n_rows: usize,
    pub columns: Vec<BinColumn>,
    bits: Vec<u8>,
}

impl BinaryMatrix {
    pub fn from_rows(columns: Vec<BinColumn>, rows: &[Vec<u8>]) -> BinaryMatrix {
        let n_cols = columns.len();
        let mut bits = Vec::with_capacity(rows.len() * n_cols);
        for r in rows {
            assert_eq!(r.len(), n_cols, "row width does not match column count");
            bits.extend_from_slice(r);
        }
        BinaryMatrix {
            n_rows: rows.len(),
            columns,
            bits,
        }
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn row(&self, i: usize) -> &[u8] {
        let w = self.n_cols();
        &self.bits[i * w..(i + 1) * w]
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.n_cols() + j] == 1
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u8]> {
        (0..self.n_rows).map(move |i| self.row(i))
    }
}

fn binary_entropy(pos: f64, total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    let p = pos / total;
    let q = 1.0 - p;
    let mut h = 0.0;
    if p > 0.0 {
        h -= p * p.ln();
    }
    if q > 0.0 {
        h -= q * q.ln();
    }
    h
}

/// Weighted entropy of splitting at `threshold` into `x < θ` and `x ≥ θ`,
/// natural log. An empty side scores `+∞`.
pub fn entropy_of_split(values: &[f64], labels: &[u8], weights: &[f64], threshold: f64) -> f64 {
    let (mut n1, mut p1, mut n2, mut p2) = (0.0, 0.0, 0.0, 0.0);
    for ((&x, &y), &w) in values.iter().zip(labels).zip(weights) {
        if x < threshold {
            n1 += w;
            p1 += w * y as f64;
        } else {
            n2 += w;
            p2 += w * y as f64;
        }
    }
    if n1 <= 0.0 || n2 <= 0.0 {
        return f64::INFINITY;
    }
    let n = n1 + n2;
    n1 / n * binary_entropy(p1, n1) + n2 / n * binary_entropy(p2, n2)
}

/// Distinct sorted values with aggregated weights.
struct Support {
    values: Vec<f64>,
    // prefix sums over distinct values
    cum_w: Vec<f64>,
    cum_pos: Vec<f64>,
}

impl Support {
    fn new(values: &[f64], labels: &[u8], weights: &[f64]) -> Support {
        let mut idx: Vec<usize> = (0..values.len()).collect();
        idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let mut distinct = Vec::new();
        let mut cum_w = vec![0.0];
        let mut cum_pos = vec![0.0];
        for i in idx {
            let (w, p) = (weights[i], weights[i] * labels[i] as f64);
            if distinct.last() == Some(&values[i]) {
                *cum_w.last_mut().unwrap() += w;
                *cum_pos.last_mut().unwrap() += p;
            } else {
                distinct.push(values[i]);
                let (lw, lp) = (*cum_w.last().unwrap(), *cum_pos.last().unwrap());
                cum_w.push(lw + w);
                cum_pos.push(lp + p);
            }
        }
        Support {
            values: distinct,
            cum_w,
            cum_pos,
        }
    }

    fn weight(&self, a: usize, b: usize) -> (f64, f64) {
        (self.cum_w[b] - self.cum_w[a], self.cum_pos[b] - self.cum_pos[a])
    }

    /// Best split of the distinct-value segment [a, b): (gain, cut index, threshold).
    fn best_split(&self, a: usize, b: usize) -> Option<(f64, usize, f64)> {
        if b - a < 2 {
            return None;
        }
        let (n, pos) = self.weight(a, b);
        let parent = binary_entropy(pos, n);
        if parent <= 0.0 {
            return None;
        }
        let mut best: Option<(f64, usize)> = None;
        for t in a + 1..b {
            let (n1, p1) = self.weight(a, t);
            let (n2, p2) = self.weight(t, b);
            let e = n1 / n * binary_entropy(p1, n1) + n2 / n * binary_entropy(p2, n2);
            if best.is_none_or(|(be, _)| e < be) {
                best = Some((e, t));
            }
        }
        let (e, t) = best?;
        let gain = n * (parent - e);
        if gain <= 1e-12 * n {
            return None;
        }
        let theta = 0.5 * (self.values[t - 1] + self.values[t]);
        Some((gain, t, theta))
    }
}

struct Candidate {
    gain: f64,
    theta: f64,
    a: usize,
    cut: usize,
    b: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        // max-heap on gain; smaller threshold wins ties
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| other.theta.total_cmp(&self.theta))
    }
}

/// Greedy best-first information-gain splitting. Candidates are midpoints
/// between adjacent distinct values; returned thresholds are ascending.
pub fn select_thresholds(values: &[f64], labels: &[u8], weights: &[f64], max_thresholds: usize) -> Vec<f64> {
    let support = Support::new(values, labels, weights);
    let mut heap = BinaryHeap::new();
    let push = |heap: &mut BinaryHeap<Candidate>, a: usize, b: usize| {
        if let Some((gain, cut, theta)) = support.best_split(a, b) {
            heap.push(Candidate {
                gain,
                theta,
                a,
                cut,
                b,
            });
        }
    };
    push(&mut heap, 0, support.values.len());
    let mut out = Vec::new();
    while out.len() < max_thresholds {
        let Some(c) = heap.pop() else { break };
        out.push(c.theta);
        push(&mut heap, c.a, c.cut);
        push(&mut heap, c.cut, c.b);
    }
    out.sort_by(f64::total_cmp);
    out
}

fn feature_bins(dataset: &Dataset, fi: usize, max_thresholds: usize) -> Result<(FeatureBins, Vec<BinColumn>)> {
    let spec = &dataset.schema.features[fi];
    let mut columns = Vec::new();
    let mut thresholds = Vec::new();
    let mut integer_valued = true;
    let column = |level: i64, kind: ColumnKind| BinColumn {
        feature: spec.name.clone(),
        feature_index: fi,
        level,
        kind,
    };
    match spec.kind {
        FeatureKind::Categorical => {
            for (l, tok) in category_tokens(dataset, fi).into_keys().enumerate() {
                columns.push(column(l as i64 + 1, ColumnKind::Category { token: tok }));
            }
        }
        FeatureKind::Numeric => {
            let (mut values, mut labels, mut weights) = (Vec::new(), Vec::new(), Vec::new());
            for i in 0..dataset.len() {
                if let Cell::Number(v) = dataset.rows[i][fi] {
                    integer_valued &= v.fract() == 0.0;
                    values.push(v);
                    labels.push(dataset.labels[i]);
                    weights.push(dataset.weights[i]);
                }
            }
            if values.is_empty() {
                return Err(Error::Data(format!("feature {} has no usable values", spec.name)));
            }
            thresholds = select_thresholds(&values, &labels, &weights, max_thresholds);
            match spec.monotonicity {
                Monotonicity::Decreasing => {
                    for (l, &t) in thresholds.iter().enumerate() {
                        columns.push(column(l as i64 + 1, ColumnKind::Below { threshold: t }));
                    }
                    columns.push(column(0, ColumnKind::NotMissing));
                }
                Monotonicity::Increasing => {
                    for (l, &t) in thresholds.iter().enumerate() {
                        columns.push(column(l as i64 + 1, ColumnKind::AtLeast { threshold: t }));
                    }
                    columns.push(column(0, ColumnKind::NotMissing));
                }
                Monotonicity::None => {
                    let mut lo = None;
                    for l in 0..=thresholds.len() {
                        let hi = thresholds.get(l).copied();
                        columns.push(column(l as i64 + 1, ColumnKind::Interval { lo, hi }));
                        lo = hi;
                    }
                }
            }
            for s in &spec.special_values {
                columns.push(column(
                    s.code,
                    ColumnKind::Special {
                        code: s.code,
                        meaning: s.meaning.clone(),
                    },
                ));
            }
        }
    }
    let bins = FeatureBins {
        feature: spec.name.clone(),
        monotonicity: spec.monotonicity,
        thresholds,
        integer_valued,
        first_column: 0,
        n_columns: columns.len(),
    };
    Ok((bins, columns))
}

/// Learns thresholds on non-special values of every numeric feature and
/// lays out the binary columns in schema order.
pub fn build_scheme(dataset: &Dataset, max_thresholds: usize) -> Result<BinarizationScheme> {
    let per_feature: Vec<Result<(FeatureBins, Vec<BinColumn>)>> = (0..dataset.schema.n_features())
        .into_par_iter()
        .map(|fi| feature_bins(dataset, fi, max_thresholds))
        .collect();
    let mut features = Vec::new();
    let mut columns = Vec::new();
    for item in per_feature {
        let (mut bins, cols) = item?;
        bins.first_column = columns.len();
        columns.extend(cols);
        features.push(bins);
    }
    Ok(BinarizationScheme {
        max_thresholds,
        features,
        columns,
    })
}

impl BinarizationScheme {
    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    fn column_bit(kind: &ColumnKind, cell: &Cell) -> bool {
        match (kind, cell) {
            (ColumnKind::Below { threshold }, Cell::Number(x)) => x < threshold,
            (ColumnKind::AtLeast { threshold }, Cell::Number(x)) => x >= threshold,
            (ColumnKind::Interval { lo, hi }, Cell::Number(x)) => {
                lo.is_none_or(|lo| *x >= lo) && hi.is_none_or(|hi| *x < hi)
            }
            (ColumnKind::NotMissing, Cell::Number(_)) => true,
            (ColumnKind::Special { code, .. }, Cell::Special(c)) => code == c,
            (ColumnKind::Category { token }, Cell::Category(t)) => token == t,
            _ => false,
        }
    }

    /// Encodes one observation; also reports features whose category token
    /// was never seen when the scheme was built (encoded as all zeros).
    pub fn encode_with_diagnostics(&self, x: &[Cell]) -> (Vec<u8>, Vec<usize>) {
        let mut bits = vec![0u8; self.columns.len()];
        let mut unknown = Vec::new();
        for (fi, bins) in self.features.iter().enumerate() {
            let cell = &x[fi];
            let mut any = false;
            for j in bins.columns() {
                if Self::column_bit(&self.columns[j].kind, cell) {
                    bits[j] = 1;
                    any = true;
                }
            }
            if !any && matches!(cell, Cell::Category(_)) {
                unknown.push(fi);
            }
        }
        (bits, unknown)
    }

    pub fn encode(&self, x: &[Cell]) -> Vec<u8> {
        self.encode_with_diagnostics(x).0
    }

    pub fn encode_dataset(&self, dataset: &Dataset) -> BinaryMatrix {
        let rows: Vec<Vec<u8>> = dataset.rows.par_iter().map(|r| self.encode(r)).collect();
        BinaryMatrix::from_rows(self.columns.clone(), &rows)
    }

    /// f_p(x): the sum of active coefficients in column order.
    pub fn feature_points(&self, feature: usize, coefficients: &[f64], cell: &Cell) -> f64 {
        let bins = &self.features[feature];
        let mut acc = 0.0;
        for (k, j) in bins.columns().enumerate() {
            if Self::column_bit(&self.columns[j].kind, cell) {
                acc += coefficients[k];
            }
        }
        acc
    }

    fn fmt_threshold_below(&self, feature: usize, t: f64) -> String {
        if self.features[feature].integer_valued {
            format!("≤ {}", fmt_num(t.ceil() - 1.0))
        } else {
            format!("< {}", fmt_num(t))
        }
    }

    fn fmt_threshold_at_least(&self, feature: usize, t: f64) -> String {
        if self.features[feature].integer_valued {
            format!("≥ {}", fmt_num(t.ceil()))
        } else {
            format!("≥ {}", fmt_num(t))
        }
    }

    fn has_specials(&self, feature: usize) -> bool {
        self.features[feature]
            .columns()
            .any(|j| self.columns[j].is_special())
    }

    /// Plain-language rendering of an active column, used for risk factors.
    pub fn condition_text(&self, column: usize) -> String {
        let c = &self.columns[column];
        let fi = c.feature_index;
        let integer = self.features[fi].integer_valued;
        match &c.kind {
            ColumnKind::Below { threshold } if integer => {
                format!("{} is {} or less", c.feature, fmt_num(threshold.ceil() - 1.0))
            }
            ColumnKind::Below { threshold } => format!("{} is less than {}", c.feature, fmt_num(*threshold)),
            ColumnKind::AtLeast { threshold } if integer => {
                format!("{} is {} or more", c.feature, fmt_num(threshold.ceil()))
            }
            ColumnKind::AtLeast { threshold } => format!("{} is at least {}", c.feature, fmt_num(*threshold)),
            ColumnKind::Interval { .. } => format!("{} is {}", c.feature, self.interval_text(column)),
            ColumnKind::Category { token } => format!("{} is {}", c.feature, token),
            ColumnKind::Special { code, meaning } => format!("{} is missing: {} ({})", c.feature, meaning, code),
            ColumnKind::NotMissing => format!("{} is not missing", c.feature),
        }
    }

    fn interval_text(&self, column: usize) -> String {
        let c = &self.columns[column];
        let fi = c.feature_index;
        let ColumnKind::Interval { lo, hi } = c.kind else {
            unreachable!()
        };
        match (lo, hi) {
            (None, None) => "not missing".to_string(),
            (None, Some(h)) => self.fmt_threshold_below(fi, h),
            (Some(l), None) => self.fmt_threshold_at_least(fi, l),
            (Some(l), Some(h)) if self.features[fi].integer_valued => {
                format!("in {}..{}", fmt_num(l.ceil()), fmt_num(h.ceil() - 1.0))
            }
            (Some(l), Some(h)) => format!("in [{}, {})", fmt_num(l), fmt_num(h)),
        }
    }

    /// Predicate rendering for rules, e.g. `ExternalRiskEstimate ≤ 63`.
    /// `negated` renders the complement column `1 - x`.
    pub fn predicate_text(&self, column: usize, negated: bool) -> String {
        let c = &self.columns[column];
        let fi = c.feature_index;
        let or_missing = if self.has_specials(fi) { " or missing" } else { "" };
        let name = &c.feature;
        match (&c.kind, negated) {
            (ColumnKind::Below { threshold }, false) => format!("{name} {}", self.fmt_threshold_below(fi, *threshold)),
            (ColumnKind::Below { threshold }, true) => {
                format!("{name} {}{or_missing}", self.fmt_threshold_at_least(fi, *threshold))
            }
            (ColumnKind::AtLeast { threshold }, false) => {
                format!("{name} {}", self.fmt_threshold_at_least(fi, *threshold))
            }
            (ColumnKind::AtLeast { threshold }, true) => {
                format!("{name} {}{or_missing}", self.fmt_threshold_below(fi, *threshold))
            }
            (ColumnKind::Interval { .. }, false) => format!("{name} {}", self.interval_text(column)),
            (ColumnKind::Interval { .. }, true) => format!("{name} not {}", self.interval_text(column)),
            (ColumnKind::Category { token }, false) => format!("{name} = {token}"),
            (ColumnKind::Category { token }, true) => format!("{name} ≠ {token}"),
            (ColumnKind::Special { code, meaning }, false) => format!("{name} is missing: {meaning} ({code})"),
            (ColumnKind::Special { code, .. }, true) => format!("{name} ≠ {code}"),
            (ColumnKind::NotMissing, false) => format!("{name} is not missing"),
            (ColumnKind::NotMissing, true) => format!("{name} is missing"),
        }
    }

    /// Two-sided score table of one feature given its column coefficients.
    pub fn score_table(&self, schema: &Schema, feature: usize, coefficients: &[f64]) -> ScoreTable {
        to_two_sided(self, schema, feature, coefficients)
    }
}

pub(crate) fn fmt_num(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{v:.0}")
    } else {
        format!("{v}")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TableKey {
    Interval {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lo: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hi: Option<f64>,
    },
    Category { token: String },
    Special { code: i64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub key: TableKey,
    pub text: String,
    pub points: f64,
}

/// Feature score f_p as a traditional points table over mutually
/// exclusive intervals, categories and special codes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub feature: String,
    pub monotonicity: Monotonicity,
    pub rows: Vec<ScoreRow>,
}

impl ScoreTable {
    pub fn value_at(&self, cell: &Cell) -> f64 {
        for row in &self.rows {
            let hit = match (&row.key, cell) {
                (TableKey::Interval { lo, hi }, Cell::Number(x)) => {
                    lo.is_none_or(|lo| *x >= lo) && hi.is_none_or(|hi| *x < hi)
                }
                (TableKey::Category { token }, Cell::Category(t)) => token == t,
                (TableKey::Special { code }, Cell::Special(c)) => code == c,
                _ => false,
            };
            if hit {
                return row.points;
            }
        }
        0.0
    }

    pub fn render(&self) -> String {
        let mut out = format!("{}\n", self.feature);
        for row in &self.rows {
            out.push_str(&format!("  {:<32} {:>8.3}\n", row.text, row.points));
        }
        out
    }
}

/// Rewrites one-sided coefficients as points on two-sided intervals. Each
/// interval value sums the active coefficients in column order, so table
/// lookups reproduce `feature_points` bit for bit.
pub fn to_two_sided(scheme: &BinarizationScheme, schema: &Schema, feature: usize, coefficients: &[f64]) -> ScoreTable {
    let bins = &scheme.features[feature];
    let cols = &scheme.columns[bins.columns()];
    assert_eq!(cols.len(), coefficients.len(), "one coefficient per column");
    let name = &bins.feature;
    let mut rows = Vec::new();
    let thresholds = &bins.thresholds;
    let l = thresholds.len();
    let not_missing = cols.iter().position(|c| c.kind == ColumnKind::NotMissing);
    let interval_text = |lo: Option<f64>, hi: Option<f64>| match (lo, hi) {
        (None, None) => format!("{name} not missing"),
        (None, Some(h)) => format!("{name} {}", scheme.fmt_threshold_below(feature, h)),
        (Some(a), None) => format!("{name} {}", scheme.fmt_threshold_at_least(feature, a)),
        (Some(a), Some(h)) if bins.integer_valued => {
            format!("{} ≤ {name} ≤ {}", fmt_num(a.ceil()), fmt_num(h.ceil() - 1.0))
        }
        (Some(a), Some(h)) => format!("{} ≤ {name} < {}", fmt_num(a), fmt_num(h)),
    };
    let bound = |j: usize| -> (Option<f64>, Option<f64>) {
        let lo = if j == 0 { None } else { Some(thresholds[j - 1]) };
        (lo, thresholds.get(j).copied())
    };
    match bins.monotonicity {
        Monotonicity::Decreasing | Monotonicity::Increasing
            if schema.features[feature].kind == FeatureKind::Numeric =>
        {
            for j in 0..=l {
                let mut acc = 0.0;
                // one-sided columns occupy positions 0..l in threshold order
                let active: Vec<usize> = if bins.monotonicity == Monotonicity::Decreasing {
                    (j..l).collect()
                } else {
                    (0..j).collect()
                };
                for k in active {
                    acc += coefficients[k];
                }
                if let Some(nm) = not_missing {
                    acc += coefficients[nm];
                }
                let (lo, hi) = bound(j);
                rows.push(ScoreRow {
                    key: TableKey::Interval { lo, hi },
                    text: interval_text(lo, hi),
                    points: acc,
                });
            }
        }
        _ => {}
    }
    for (k, c) in cols.iter().enumerate() {
        let mut acc = 0.0;
        acc += coefficients[k];
        match &c.kind {
            ColumnKind::Interval { lo, hi } => rows.push(ScoreRow {
                key: TableKey::Interval { lo: *lo, hi: *hi },
                text: interval_text(*lo, *hi),
                points: acc,
            }),
            ColumnKind::Category { token } => rows.push(ScoreRow {
                key: TableKey::Category { token: token.clone() },
                text: format!("{name} = {token}"),
                points: acc,
            }),
            ColumnKind::Special { code, meaning } => rows.push(ScoreRow {
                key: TableKey::Special { code: *code },
                text: format!("{name} missing: {meaning} ({code})"),
                points: acc,
            }),
            _ => {}
        }
    }
    ScoreTable {
        feature: name.clone(),
        monotonicity: bins.monotonicity,
        rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Dataset, Schema};

    fn ln2() -> f64 {
        std::f64::consts::LN_2
    }

    #[test]
    fn entropy_examples() {
        let w = [1.0; 4];
        assert_eq!(entropy_of_split(&[1.0, 2.0, 9.0, 10.0], &[0, 0, 1, 1], &w, 5.0), 0.0);
        let e = entropy_of_split(&[1.0, 2.0, 3.0, 4.0], &[0, 1, 0, 1], &w, 2.5);
        assert!((e - ln2()).abs() < 1e-15);
        assert_eq!(entropy_of_split(&[1.0, 2.0, 3.0], &[1, 1, 1], &[1.0; 3], 2.5), 0.0);
        assert_eq!(entropy_of_split(&[1.0, 2.0], &[0, 1], &[1.0; 2], 0.5), f64::INFINITY);
    }

    #[test]
    fn thresholds_examples() {
        let t = select_thresholds(&[1.0, 2.0, 9.0, 10.0], &[0, 0, 1, 1], &[1.0; 4], 3);
        assert_eq!(t, vec![5.5]);
        assert!(select_thresholds(&[3.0; 5], &[0, 1, 0, 1, 1], &[1.0; 5], 5).is_empty());
        assert!(select_thresholds(&[1.0, 2.0], &[1, 1], &[1.0; 2], 5).is_empty());
    }

    #[test]
    fn thresholds_respect_budget_and_order() {
        let values: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let labels: Vec<u8> = (0..40).map(|i| ((i / 5) % 2) as u8).collect();
        let t = select_thresholds(&values, &labels, &vec![1.0; 40], 4);
        assert_eq!(t.len(), 4);
        assert!(t.windows(2).all(|w| w[0] < w[1]));
    }

    pub(crate) fn fico_like_schema() -> Schema {
        Schema::from_toml_str(
            r#"
schema_version = 1
label = "bad"
positive_means = "a high risk of default"
subscales = ["ere", "misc"]

[[features]]
name = "ExternalRiskEstimate"
kind = "numeric"
monotonicity = "decreasing"
subscale = "ere"
special_values = [{ code = -7, meaning = "condition not met" }, { code = -8, meaning = "no usable trades" }, { code = -9, meaning = "no bureau record" }]

[[features]]
name = "Housing"
kind = "categorical"
subscale = "misc"

[[features]]
name = "Utilization"
kind = "numeric"
monotonicity = "none"
subscale = "misc"
"#,
        )
        .unwrap()
    }

    /// Scheme with the published ExternalRiskEstimate cut points.
    pub(crate) fn figure_scheme() -> (Schema, BinarizationScheme) {
        let schema = fico_like_schema();
        let rows = vec![
            vec![Cell::Number(33.0), Cell::Category("rent".into()), Cell::Number(1.0)],
            vec![Cell::Number(90.0), Cell::Category("own".into()), Cell::Number(2.0)],
            vec![Cell::Special(-9), Cell::Category("for free".into()), Cell::Number(3.0)],
        ];
        let d = Dataset::new(schema.clone(), rows, vec![1, 0, 1]).unwrap();
        let mut scheme = build_scheme(&d, 5).unwrap();
        // pin thresholds 64/71/76/81
        let ere = &mut scheme.features[0];
        ere.thresholds = vec![64.0, 71.0, 76.0, 81.0];
        let mut cols: Vec<BinColumn> = ere
            .thresholds
            .iter()
            .enumerate()
            .map(|(l, &t)| BinColumn {
                feature: "ExternalRiskEstimate".into(),
                feature_index: 0,
                level: l as i64 + 1,
                kind: ColumnKind::Below { threshold: t },
            })
            .collect();
        let old_first = ere.columns();
        cols.extend(scheme.columns[old_first.clone()].iter().filter(|c| !c.is_one_sided()).cloned());
        let rest: Vec<BinColumn> = scheme.columns[old_first.end..].to_vec();
        let n0 = cols.len();
        scheme.features[0].n_columns = n0;
        let mut all = cols;
        all.extend(rest);
        let mut start = 0;
        for f in scheme.features.iter_mut() {
            f.first_column = start;
            start += f.n_columns;
        }
        scheme.columns = all;
        (schema, scheme)
    }

    #[test]
    fn figure_scheme_layout() {
        let (_, scheme) = figure_scheme();
        let ere: Vec<&BinColumn> = scheme.columns[scheme.features[0].columns()].iter().collect();
        // four one-sided columns + not-missing, then three special codes
        assert_eq!(ere.iter().filter(|c| c.is_one_sided() || c.kind == ColumnKind::NotMissing).count(), 5);
        assert_eq!(ere.iter().filter(|c| c.is_special()).count(), 3);
        let housing = &scheme.features[1];
        assert_eq!(housing.n_columns, 3);
    }

    #[test]
    fn encode_examples() {
        let (_, scheme) = figure_scheme();
        let row = |v: Cell| vec![v, Cell::Category("own".into()), Cell::Number(1.0)];
        let bits = scheme.encode(&row(Cell::Number(33.0)));
        let ere = scheme.features[0].columns();
        assert_eq!(&bits[ere.start..ere.start + 5], &[1, 1, 1, 1, 1]);
        assert_eq!(&bits[ere.start + 5..ere.end], &[0, 0, 0]);

        let bits = scheme.encode(&row(Cell::Special(-8)));
        let ere_bits = &bits[ere.clone()];
        assert_eq!(ere_bits, &[0, 0, 0, 0, 0, 0, 1, 0]);

        let bits = scheme.encode(&row(Cell::Number(95.0)));
        assert_eq!(&bits[ere], &[0, 0, 0, 0, 1, 0, 0, 0]);
    }

    #[test]
    fn unknown_category_is_all_zero() {
        let (_, scheme) = figure_scheme();
        let (bits, unknown) =
            scheme.encode_with_diagnostics(&[Cell::Number(50.0), Cell::Category("castle".into()), Cell::Number(1.0)]);
        assert_eq!(unknown, vec![1]);
        assert!(scheme.features[1].columns().all(|j| bits[j] == 0));
    }

    #[test]
    fn non_monotone_partition_is_exclusive() {
        let (_, scheme) = figure_scheme();
        for x in [-5.0, 1.0, 1.5, 2.0, 2.5, 3.0, 100.0] {
            let bits = scheme.encode(&[Cell::Number(50.0), Cell::Category("own".into()), Cell::Number(x)]);
            let active: usize = scheme.features[2]
                .columns()
                .filter(|&j| !scheme.columns[j].is_special())
                .map(|j| bits[j] as usize)
                .sum();
            assert_eq!(active, 1, "x = {x}");
        }
    }

    #[test]
    fn published_two_sided_value() {
        let (schema, scheme) = figure_scheme();
        let coefs = [0.782, 0.748, 0.595, 0.768, -1.094, 0.1, 0.2, 0.3];
        let table = scheme.score_table(&schema, 0, &coefs);
        let first = table.value_at(&Cell::Number(33.0));
        assert!((first - 1.799).abs() < 1e-9, "{first}");
        assert_eq!(table.value_at(&Cell::Number(95.0)), -1.094);
        assert_eq!(table.value_at(&Cell::Special(-9)), 0.3);
        assert_eq!(table.rows[0].text, "ExternalRiskEstimate ≤ 63");
    }

    #[test]
    fn zero_coefficients_flat_table() {
        let (schema, scheme) = figure_scheme();
        let table = scheme.score_table(&schema, 0, &[0.0; 8]);
        assert!(table.rows.iter().all(|r| r.points == 0.0));
    }

    #[test]
    fn renderings() {
        let (_, scheme) = figure_scheme();
        // 64 on integer data: x < 64 is x ≤ 63
        assert_eq!(scheme.predicate_text(0, false), "ExternalRiskEstimate ≤ 63");
        assert_eq!(scheme.predicate_text(0, true), "ExternalRiskEstimate ≥ 64 or missing");
        assert_eq!(scheme.condition_text(0), "ExternalRiskEstimate is 63 or less");
        assert_eq!(scheme.predicate_text(4, true), "ExternalRiskEstimate is missing");
        assert_eq!(scheme.predicate_text(7, false), "ExternalRiskEstimate is missing: no bureau record (-9)");
    }
}
