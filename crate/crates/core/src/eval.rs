//! Classification metrics and stratified cross-validation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::binarize::build_scheme;
use crate::data::{Dataset, FoldAssignment};
use crate::error::{Error, Result};
use crate::riskmodel::{train_with_scheme, TrainConfig};

fn check_lengths(scores: &[f64], labels: &[u8]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    Ok(())
}

/// Mann-Whitney AUC with midranks for ties.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let pos = labels.iter().filter(|&&y| y == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::InvalidArgument("AUC needs both classes".into()));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 share their mean
        let mid = (i + j + 2) as f64 / 2.0;
        for &t in &idx[i..=j] {
            if labels[t] == 1 {
                rank_sum += mid;
            }
        }
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Non-interpolated average precision. Tied scores enter as one threshold.
pub fn average_precision(scores: &[f64], labels: &[u8]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let pos = labels.iter().filter(|&&y| y == 1).count();
    if pos == 0 {
        return Err(Error::InvalidArgument("average precision needs a positive".into()));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j < idx.len() && scores[idx[j]] == scores[idx[i]] {
            tp += labels[idx[j]] as usize;
            seen += 1;
            j += 1;
        }
        let recall = tp as f64 / pos as f64;
        let precision = tp as f64 / seen as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    Ok(ap)
}

pub fn accuracy(scores: &[f64], labels: &[u8], threshold: f64) -> f64 {
    let hits = scores
        .iter()
        .zip(labels)
        .filter(|(&s, &y)| (s >= threshold) == (y == 1))
        .count();
    hits as f64 / labels.len().max(1) as f64
}

/// Fraction of positives scored at or above `threshold`.
pub fn recall_at(scores: &[f64], labels: &[u8], threshold: f64) -> Result<f64> {
    check_lengths(scores, labels)?;
    let pos = labels.iter().filter(|&&y| y == 1).count();
    if pos == 0 {
        return Err(Error::InvalidArgument("recall needs a positive".into()));
    }
    let hit = scores
        .iter()
        .zip(labels)
        .filter(|(&s, &y)| y == 1 && s >= threshold)
        .count();
    Ok(hit as f64 / pos as f64)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub auc: f64,
    pub average_precision: f64,
    pub recall_at_half: f64,
}

impl Metrics {
    pub fn compute(scores: &[f64], labels: &[u8]) -> Result<Metrics> {
        Ok(Metrics {
            accuracy: accuracy(scores, labels, 0.5),
            auc: auc(scores, labels)?,
            average_precision: average_precision(scores, labels)?,
            recall_at_half: recall_at(scores, labels, 0.5)?,
        })
    }

    fn values(&self) -> [f64; 4] {
        [self.accuracy, self.auc, self.average_precision, self.recall_at_half]
    }

    fn from_values(v: [f64; 4]) -> Metrics {
        Metrics {
            accuracy: v[0],
            auc: v[1],
            average_precision: v[2],
            recall_at_half: v[3],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub n_test: usize,
    pub metrics: Metrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub k: usize,
    pub seed: u64,
    pub config_fingerprint: String,
    pub folds: Vec<FoldMetrics>,
    pub mean: Metrics,
    /// Sample (n - 1) standard deviation across folds.
    pub std: Metrics,
}

impl MetricReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fold,accuracy,auc,average_precision,recall_at_half\n");
        let line = |name: &str, m: &Metrics| {
            let v = m.values();
            format!("{name},{:.4},{:.4},{:.4},{:.4}\n", v[0], v[1], v[2], v[3])
        };
        for f in &self.folds {
            out.push_str(&line(&f.fold.to_string(), &f.metrics));
        }
        out.push_str(&line("mean", &self.mean));
        out.push_str(&line("std", &self.std));
        out
    }

    pub fn to_text(&self) -> String {
        let m = self.mean.values();
        let s = self.std.values();
        format!(
            "{}-fold cross validation (seed {})\n  accuracy           {:.3} ± {:.3}\n  AUC                {:.3} ± {:.3}\n  average precision  {:.3} ± {:.3}\n  recall@0.5         {:.3} ± {:.3}\n",
            self.k, self.seed, m[0], s[0], m[1], s[1], m[2], s[2], m[3], s[3]
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub train: TrainConfig,
    /// Learn thresholds once on all rows instead of per training split.
    pub fixed_scheme: bool,
}

pub fn aggregate(folds: &[FoldMetrics]) -> (Metrics, Metrics) {
    let n = folds.len() as f64;
    let mut mean = [0.0; 4];
    for f in folds {
        for (m, v) in mean.iter_mut().zip(f.metrics.values()) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n;
    }
    let mut var = [0.0; 4];
    for f in folds {
        for ((s, v), m) in var.iter_mut().zip(f.metrics.values()).zip(mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std = var.map(|s| if folds.len() > 1 { (s / (n - 1.0)).sqrt() } else { 0.0 });
    (Metrics::from_values(mean), Metrics::from_values(std))
}

/// Trains on k-1 folds and scores the held-out fold, for every fold.
pub fn evaluate(dataset: &Dataset, folds: &FoldAssignment, cfg: &EvalConfig) -> Result<MetricReport> {
    if folds.assignment.len() != dataset.len() {
        return Err(Error::InvalidArgument("fold assignment does not match the dataset".into()));
    }
    let fixed = if cfg.fixed_scheme {
        Some(build_scheme(dataset, cfg.train.max_thresholds)?)
    } else {
        None
    };
    let results: Vec<Result<FoldMetrics>> = (0..folds.k)
        .into_par_iter()
        .map(|f| {
            let wrap = |e: Error| Error::Fold {
                fold: f,
                source: Box::new(e),
            };
            let train_set = dataset.subset(&folds.train_indices(f));
            let test_set = dataset.subset(&folds.test_indices(f));
            let scheme = match &fixed {
                Some(s) => s.clone(),
                None => build_scheme(&train_set, cfg.train.max_thresholds).map_err(wrap)?,
            };
            let (model, _) = train_with_scheme(&train_set, scheme, &cfg.train).map_err(wrap)?;
            let scores = model.predict_dataset(&test_set);
            let metrics = Metrics::compute(&scores, &test_set.labels).map_err(wrap)?;
            Ok(FoldMetrics {
                fold: f,
                n_test: test_set.len(),
                metrics,
            })
        })
        .collect();
    let folds_out = results.into_iter().collect::<Result<Vec<_>>>()?;
    let (mean, std) = aggregate(&folds_out);
    let config_json = serde_json::to_string(cfg).expect("config serializes");
    Ok(MetricReport {
        k: folds.k,
        seed: folds.seed,
        config_fingerprint: hex::encode(Sha256::digest(config_json.as_bytes())),
        folds: folds_out,
        mean,
        std,
    })
}
