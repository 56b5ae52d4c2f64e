//! Oracles and fixtures shared by the integration tests and the acceptance
//! run. Everything here is deliberately naive.
#![allow(dead_code)]

use std::path::PathBuf;

use creditlens_core::binarize::BinarizationScheme;
use creditlens_core::data::{
    apply_class_weights, category_tokens, load_dataset, load_schema, Cell, Dataset, FeatureKind, Monotonicity, Schema,
};
use creditlens_core::riskmodel::{
    joint_objective, load_model, train, SecondLayerProblem, SubscaleProblem, TrainConfig, TwoLayerModel,
};
use creditlens_core::synth;
use creditlens_core::rules::{ExplainContext, Query};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn german() -> Dataset {
    let schema = load_schema(root().join("data/german/schema.toml")).unwrap();
    load_dataset(root().join("data/german/german_credit.csv"), &schema).unwrap()
}

/// German Credit with positives weighted 5 to 1.
pub fn german_weighted() -> Dataset {
    apply_class_weights(&german(), 5.0, 1.0).unwrap()
}

pub fn fico_demo() -> (TwoLayerModel, Dataset) {
    let model = load_model(root().join("data/fico/demo_model.toml")).unwrap();
    let data = load_dataset(root().join("data/fico/synthetic_fico.csv"), &model.schema).unwrap();
    (model, data)
}

pub fn fixture_json(name: &str) -> serde_json::Map<String, serde_json::Value> {
    let text = std::fs::read_to_string(root().join("data/fico/fixtures").join(name)).unwrap();
    serde_json::from_str(&text).unwrap()
}

/// A random rule-search instance: a universe of rows over `p` original
/// columns with predictions from a noisy random linear rule, and a query
/// taken from the universe or drawn fresh.
pub struct Instance {
    pub ctx: ExplainContext,
    pub query: Query,
}

pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = rng.random_range(1..=14);
    let n = rng.random_range(2..=200);
    let density: f64 = rng.random_range(0.15..0.85);
    let rows: Vec<Vec<u8>> = (0..n)
        .map(|_| (0..p).map(|_| rng.random_bool(density) as u8).collect())
        .collect();
    let w: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
    let noise: f64 = rng.random_range(0.0..0.3);
    let preds: Vec<u8> = rows
        .iter()
        .map(|r| {
            let z: f64 = r.iter().zip(&w).map(|(&b, w)| b as f64 * w).sum();
            let flip = rng.random_bool(noise);
            ((z > 0.0) ^ flip) as u8
        })
        .collect();
    let ctx = ExplainContext::from_rows(&rows, &preds);
    let query = if rng.random_bool(0.7) {
        ctx.query_row(rng.random_range(0..n))
    } else {
        let bits: Vec<u8> = (0..p).map(|_| rng.random_bool(density) as u8).collect();
        let label = rng.random_bool(0.5) as u8;
        Query { bits, label, row: None }
    };
    Instance { ctx, query }
}

/// Every relevant subset, as (columns, support, consistent).
pub fn enumerate_relevant(ctx: &ExplainContext, q: &Query) -> Vec<(Vec<usize>, usize, bool)> {
    let relevant = ctx.relevant_columns(q);
    let mut out = Vec::with_capacity(1 << relevant.len());
    for mask in 0u32..(1 << relevant.len()) {
        let cols: Vec<usize> = (0..relevant.len())
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| relevant[i])
            .collect();
        let mut support = 0;
        let mut consistent = true;
        for i in 0..ctx.n_rows() {
            let row = ctx.matrix.row(i);
            let sat = cols.iter().all(|&c| ctx.satisfies(row, c));
            if sat {
                support += 1;
                if ctx.predictions[i] != q.label {
                    consistent = false;
                }
            }
        }
        out.push((cols, support, consistent));
    }
    out
}

/// Smallest consistent relevant rule size, or None when none exists.
pub fn brute_min_sparsity(ctx: &ExplainContext, q: &Query) -> Option<usize> {
    enumerate_relevant(ctx, q)
        .into_iter()
        .filter(|r| r.2)
        .map(|r| r.0.len())
        .min()
}

/// Best (support, size) over consistent relevant rules of size ≤ cap:
/// maximal support, then fewest columns.
pub fn brute_max_support(ctx: &ExplainContext, q: &Query, cap: usize) -> Option<(usize, usize)> {
    enumerate_relevant(ctx, q)
        .into_iter()
        .filter(|r| r.2 && r.0.len() <= cap)
        .map(|r| (r.1, r.0.len()))
        .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)))
}

/// Fraction of (positive, negative) pairs ordered correctly, ties half.
pub fn pairwise_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] == 1 && labels[j] == 0 {
                den += 1.0;
                if scores[i] > scores[j] {
                    num += 1.0;
                } else if scores[i] == scores[j] {
                    num += 0.5;
                }
            }
        }
    }
    num / den
}

/// AP from scratch: one operating point per distinct score, each scanning
/// the full list.
pub fn naive_average_precision(scores: &[f64], labels: &[u8]) -> f64 {
    let pos = labels.iter().filter(|&&y| y == 1).count() as f64;
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    for t in thresholds {
        let flagged: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] >= t).collect();
        let tp = flagged.iter().filter(|&&i| labels[i] == 1).count() as f64;
        let recall = tp / pos;
        ap += (recall - prev_recall) * tp / flagged.len() as f64;
        prev_recall = recall;
    }
    ap
}

/// Random scores with deliberate ties and labels with both classes.
pub fn random_scored(seed: u64) -> (Vec<f64>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..120);
    let levels = rng.random_range(2..30);
    let mut labels: Vec<u8> = (0..n).map(|_| rng.random_bool(0.4) as u8).collect();
    labels[0] = 1;
    labels[1] = 0;
    let scores = labels
        .iter()
        .map(|&y| (rng.random_range(0..levels) as f64 + y as f64 * 3.0) / (levels as f64 + 3.0))
        .collect();
    (scores, labels)
}

/// Central-difference gradient.
pub fn finite_difference<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let orig = xp[i];
        xp[i] = orig + h;
        let fp = f(&xp);
        xp[i] = orig - h;
        let fm = f(&xp);
        xp[i] = orig;
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Parameters in the joint layout `[b, α..., (b_k, β_k...)...]`.
pub fn joint_params(m: &TwoLayerModel) -> Vec<f64> {
    let mut v = vec![m.bias];
    v.extend(&m.alpha);
    for s in &m.subscales {
        v.push(s.bias);
        v.extend(&s.coefficients);
    }
    v
}

pub fn set_joint_params(m: &mut TwoLayerModel, v: &[f64]) {
    let k = m.alpha.len();
    m.bias = v[0];
    m.alpha.copy_from_slice(&v[1..1 + k]);
    let mut at = 1 + k;
    for s in m.subscales.iter_mut() {
        s.bias = v[at];
        let n = s.coefficients.len();
        s.coefficients.copy_from_slice(&v[at + 1..at + 1 + n]);
        at += 1 + n;
    }
}

/// Largest analytic-versus-central-difference gradient error for the
/// subscale, second-layer and joint objectives of one random instance.
pub fn gradient_errors(seed: u64) -> [f64; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = synth::generate(150, seed).unwrap();
    let weights: Vec<f64> = (0..data.len()).map(|_| rng.random_range(0.5..3.0)).collect();
    let data = Dataset::with_weights(data.schema.clone(), data.rows.clone(), data.labels.clone(), weights).unwrap();
    let lambda = rng.random_range(0.0..0.05);
    let cfg = TrainConfig {
        lambda,
        max_thresholds: 3,
        ..TrainConfig::default()
    };
    let (mut model, _) = train(&data, &cfg).unwrap();
    let matrix = model.scheme.encode_dataset(&data);

    let s = &model.subscales[rng.random_range(0..model.subscales.len())];
    let problem = SubscaleProblem::new(&matrix, &s.columns, s.regularized.clone(), &data.labels, &data.weights, lambda);
    let x: Vec<f64> = (0..=s.columns.len()).map(|_| rng.random_range(-1.5..1.5)).collect();
    let fd = finite_difference(|p| problem.loss_and_gradient(p).0, &x, 1e-6);
    let e_sub = max_abs_diff(&problem.loss_and_gradient(&x).1, &fd);

    let probs: Vec<Vec<f64>> = (0..data.len())
        .map(|i| model.subscale_probabilities(matrix.row(i)))
        .collect();
    let second = SecondLayerProblem::new(&probs, &data.labels, &data.weights, lambda);
    let x: Vec<f64> = (0..=model.alpha.len()).map(|_| rng.random_range(-1.0..2.0)).collect();
    let fd = finite_difference(|p| second.loss_and_gradient(p).0, &x, 1e-6);
    let e_second = max_abs_diff(&second.loss_and_gradient(&x).1, &fd);

    let mut theta = joint_params(&model);
    for t in theta.iter_mut() {
        *t += rng.random_range(-0.3..0.3);
    }
    set_joint_params(&mut model, &theta);
    let (_, g) = joint_objective(&model, &matrix, &data.labels, &data.weights, lambda);
    let fd = finite_difference(
        |p| {
            let mut m = model.clone();
            set_joint_params(&mut m, p);
            joint_objective(&m, &matrix, &data.labels, &data.weights, lambda).0
        },
        &theta,
        1e-6,
    );
    [e_sub, e_second, max_abs_diff(&g, &fd)]
}

/// Largest KKT residual over every coefficient of a freshly trained model:
/// |g| for free and interior coordinates, max(0, -g) at a zero bound.
pub fn kkt_residual(model: &TwoLayerModel, data: &Dataset, lambda: f64) -> f64 {
    let matrix = model.scheme.encode_dataset(data);
    let mut worst: f64 = 0.0;
    for s in &model.subscales {
        let problem = SubscaleProblem::new(&matrix, &s.columns, s.regularized.clone(), &data.labels, &data.weights, lambda);
        let mut x = vec![s.bias];
        x.extend(&s.coefficients);
        let (_, g) = problem.loss_and_gradient(&x);
        worst = worst.max(g[0].abs());
        for (c, &constrained) in s.constrained.iter().enumerate() {
            let (b, gc) = (x[c + 1], g[c + 1]);
            worst = worst.max(if constrained && b == 0.0 { (-gc).max(0.0) } else { gc.abs() });
            if constrained && b < 0.0 {
                return f64::INFINITY;
            }
        }
    }
    let probs: Vec<Vec<f64>> = (0..data.len())
        .map(|i| model.subscale_probabilities(matrix.row(i)))
        .collect();
    let second = SecondLayerProblem::new(&probs, &data.labels, &data.weights, lambda);
    let mut x = vec![model.bias];
    x.extend(&model.alpha);
    let (_, g) = second.loss_and_gradient(&x);
    worst = worst.max(g[0].abs());
    for (&a, &ga) in model.alpha.iter().zip(&g[1..]) {
        if a < 0.0 {
            return f64::INFINITY;
        }
        worst = worst.max(if a == 0.0 { (-ga).max(0.0) } else { ga.abs() });
    }
    worst
}

pub fn numeric_range(data: &Dataset, fi: usize) -> (f64, f64) {
    data.rows
        .iter()
        .filter_map(|r| match r[fi] {
            Cell::Number(v) => Some(v),
            _ => None,
        })
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
}

/// Values around every threshold plus the observed extremes.
pub fn sweep_grid(scheme: &BinarizationScheme, fi: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut grid = vec![lo - 1.0, lo, hi, hi + 1.0];
    for &t in &scheme.features[fi].thresholds {
        grid.extend([t - 1.0, t.ceil() - 1.0, t - 1e-9, t, t.ceil(), t + 1.0]);
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Sweeps every monotone feature over its grid from `bases` random rows;
/// returns (violations, probability comparisons made).
pub fn monotonicity_violations(model: &TwoLayerModel, data: &Dataset, bases: usize, seed: u64) -> (usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut violations, mut checks) = (0, 0);
    for (fi, f) in model.schema.features.iter().enumerate() {
        if !f.monotonicity.is_monotone() || f.kind != FeatureKind::Numeric {
            continue;
        }
        let (lo, hi) = numeric_range(data, fi);
        let grid = sweep_grid(&model.scheme, fi, lo, hi);
        for _ in 0..bases {
            let mut x = data.rows[rng.random_range(0..data.len())].clone();
            let mut prev: Option<f64> = None;
            for &v in &grid {
                x[fi] = Cell::Number(v);
                let p = model.predict_proba(&x);
                if let Some(q) = prev {
                    let bad = match f.monotonicity {
                        Monotonicity::Decreasing => p > q,
                        _ => p < q,
                    };
                    violations += bad as usize;
                    checks += 1;
                }
                prev = Some(p);
            }
        }
    }
    (violations, checks)
}

/// Interval representatives, every special code and every category token
/// (plus one unseen token) of feature `fi`.
pub fn representative_cells(schema: &Schema, scheme: &BinarizationScheme, data: &Dataset, fi: usize) -> Vec<Cell> {
    let f = &schema.features[fi];
    let mut cells: Vec<Cell> = f.special_values.iter().map(|s| Cell::Special(s.code)).collect();
    match f.kind {
        FeatureKind::Numeric => {
            let (lo, hi) = numeric_range(data, fi);
            cells.extend(sweep_grid(scheme, fi, lo, hi).into_iter().map(Cell::Number));
            let t = &scheme.features[fi].thresholds;
            cells.extend(t.windows(2).map(|w| Cell::Number(0.5 * (w[0] + w[1]))));
        }
        FeatureKind::Categorical => {
            cells.extend(category_tokens(data, fi).into_keys().map(Cell::Category));
            cells.push(Cell::Category("never-seen".into()));
        }
    }
    cells
}

/// Compares every score table with the one-sided sum bit for bit; returns
/// (mismatches, cells checked).
pub fn score_table_mismatches(model: &TwoLayerModel, data: &Dataset) -> (usize, usize) {
    let (mut bad, mut checked) = (0, 0);
    for s in &model.subscales {
        let mut c = 0;
        for &fi in &s.feature_indices {
            let n = model.scheme.features[fi].n_columns;
            let coefs = &s.coefficients[c..c + n];
            c += n;
            let table = model.scheme.score_table(&model.schema, fi, coefs);
            for cell in representative_cells(&model.schema, &model.scheme, data, fi) {
                let direct = model.scheme.feature_points(fi, coefs, &cell);
                bad += (table.value_at(&cell).to_bits() != direct.to_bits()) as usize;
                checked += 1;
            }
        }
    }
    (bad, checked)
}
