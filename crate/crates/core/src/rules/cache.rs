//! Append-only rule database keyed to one context.

use std::collections::BTreeSet;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::solver::{rule_ladder, SolveOptions, SolveStatus};
use super::{verify_consistency, ExplainContext, Query, Rule};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::riskmodel::TwoLayerModel;

pub const CACHE_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Line {
    Header { version: u32, hash: String },
    Entry { key: String, status: String, rules: Vec<Rule> },
}

#[derive(Default)]
struct Index {
    rules: BTreeSet<Rule>,
    done: BTreeSet<String>,
}

pub struct RuleCache {
    path: Option<PathBuf>,
    hash: String,
    index: RwLock<Index>,
    writer: Option<Mutex<BufWriter<File>>>,
}

impl RuleCache {
    pub fn in_memory(ctx: &ExplainContext) -> RuleCache {
        RuleCache {
            path: None,
            hash: ctx.hash().to_string(),
            index: RwLock::new(Index::default()),
            writer: None,
        }
    }

    /// Starts an empty cache file, replacing any existing one.
    pub fn create(path: impl AsRef<Path>, ctx: &ExplainContext) -> Result<RuleCache> {
        let path = path.as_ref();
        let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
        let header = Line::Header {
            version: CACHE_VERSION,
            hash: ctx.hash().to_string(),
        };
        writeln!(f, "{}", serde_json::to_string(&header).expect("header serializes")).map_err(|e| Error::io(path, e))?;
        drop(f);
        Self::open_existing(path, ctx)
    }

    /// Opens a cache file, creating it when absent. Every stored rule is
    /// re-verified against `ctx`.
    pub fn open(path: impl AsRef<Path>, ctx: &ExplainContext) -> Result<RuleCache> {
        let path = path.as_ref();
        let empty = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
        if empty {
            return Self::create(path, ctx);
        }
        Self::open_existing(path, ctx)
    }

    /// Opens without creating; a missing file is an error.
    pub fn open_existing(path: impl AsRef<Path>, ctx: &ExplainContext) -> Result<RuleCache> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let lines: Vec<String> = BufReader::new(f)
            .lines()
            .collect::<std::io::Result<_>>()
            .map_err(|e| Error::io(path, e))?;
        let mut it = lines.iter().enumerate();
        match it.next().map(|(_, l)| serde_json::from_str::<Line>(l)) {
            Some(Ok(Line::Header { version, hash })) => {
                if version != CACHE_VERSION {
                    return Err(Error::Version {
                        found: version,
                        expected: CACHE_VERSION,
                    });
                }
                if hash != ctx.hash() {
                    return Err(Error::CacheMismatch {
                        found: hash,
                        expected: ctx.hash().to_string(),
                    });
                }
            }
            _ => return Err(Error::CacheCorrupt("missing header".into())),
        }
        let mut index = Index::default();
        let last = lines.len() - 1;
        for (n, line) in it {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<Line>(line) {
                Ok(Line::Entry { key, rules, .. }) => {
                    for r in rules {
                        let fresh = ctx.make_rule(r.columns.clone(), r.label);
                        if fresh != r || !verify_consistency(&r, ctx).consistent {
                            return Err(Error::CacheCorrupt(format!("line {}: rule no longer holds", n + 1)));
                        }
                        index.rules.insert(r);
                    }
                    index.done.insert(key);
                }
                // an interrupted write can leave a partial final line
                Err(_) if n == last => {}
                _ => return Err(Error::CacheCorrupt(format!("line {} is not a cache entry", n + 1))),
            }
        }
        if lines.last().is_some_and(|l| serde_json::from_str::<Line>(l).is_err()) {
            // drop the partial tail so the next entry starts cleanly
            let keep: u64 = lines[..last].iter().map(|l| l.len() as u64 + 1).sum();
            let f = OpenOptions::new().write(true).open(path).map_err(|e| Error::io(path, e))?;
            f.set_len(keep).map_err(|e| Error::io(path, e))?;
        }
        let file = OpenOptions::new().append(true).open(path).map_err(|e| Error::io(path, e))?;
        Ok(RuleCache {
            path: Some(path.to_path_buf()),
            hash: ctx.hash().to_string(),
            index: RwLock::new(index),
            writer: Some(Mutex::new(BufWriter::new(file))),
        })
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.index.read().unwrap().rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn rules(&self) -> Vec<Rule> {
        self.index.read().unwrap().rules.iter().cloned().collect()
    }

    pub fn is_done(&self, key: &str) -> bool {
        self.index.read().unwrap().done.contains(key)
    }

    pub fn done_count(&self) -> usize {
        self.index.read().unwrap().done.len()
    }

    /// Sparsest stored rule relevant to `q` with support above `min_support`;
    /// larger support breaks ties.
    pub fn lookup(&self, ctx: &ExplainContext, q: &Query, min_support: usize) -> Option<Rule> {
        let index = self.index.read().unwrap();
        index
            .rules
            .iter()
            .filter(|r| r.support > min_support && ctx.is_relevant(r, q))
            .min_by(|a, b| {
                a.sparsity()
                    .cmp(&b.sparsity())
                    .then(b.support.cmp(&a.support))
                    .then(a.columns.cmp(&b.columns))
            })
            .cloned()
    }

    pub fn record(&self, key: &str, status: &str, rules: &[Rule]) -> Result<()> {
        if let Some(w) = &self.writer {
            let line = Line::Entry {
                key: key.to_string(),
                status: status.to_string(),
                rules: rules.to_vec(),
            };
            let text = serde_json::to_string(&line).expect("entry serializes");
            let mut w = w.lock().unwrap();
            let path = self.path.clone().unwrap_or_default();
            writeln!(w, "{text}").map_err(|e| Error::io(&path, e))?;
            w.flush().map_err(|e| Error::io(&path, e))?;
        }
        let mut index = self.index.write().unwrap();
        index.rules.extend(rules.iter().cloned());
        index.done.insert(key.to_string());
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CacheBuildReport {
    pub solved: usize,
    pub already_done: usize,
    pub timeouts: usize,
    pub infeasible: usize,
    /// Pending queries left over by the budget.
    pub remaining: usize,
}

pub fn training_queries(ctx: &ExplainContext) -> Vec<(String, Query)> {
    (0..ctx.n_rows()).map(|i| (format!("row:{i}"), ctx.query_row(i))).collect()
}

/// Random observations drawn feature by feature from the empirical
/// marginals of `dataset`, labelled by the model.
pub fn synthetic_queries(
    model: &TwoLayerModel,
    dataset: &Dataset,
    ctx: &ExplainContext,
    n: usize,
    seed: u64,
) -> Vec<(String, Query)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = dataset.schema.n_features();
    (0..n)
        .map(|j| {
            let x: Vec<_> = (0..p)
                .map(|f| dataset.rows[rng.random_range(0..dataset.len())][f].clone())
                .collect();
            let bits = model.scheme.encode(&x);
            let prob = model.probability_from_bits(&bits);
            (format!("synth:{seed}:{j}"), ctx.query_bits(bits, prob))
        })
        .collect()
}

/// Solves the rule ladder for every pending query, at most `budget` of
/// them, and appends the results. Already recorded keys are skipped, so an
/// interrupted build resumes where it stopped.
pub fn build_rule_cache(
    ctx: &ExplainContext,
    cache: &RuleCache,
    queries: &[(String, Query)],
    opts: &SolveOptions,
    budget: Option<usize>,
) -> Result<CacheBuildReport> {
    if cache.hash() != ctx.hash() {
        return Err(Error::CacheMismatch {
            found: cache.hash().to_string(),
            expected: ctx.hash().to_string(),
        });
    }
    let pending: Vec<&(String, Query)> = queries.iter().filter(|(k, _)| !cache.is_done(k)).collect();
    let already_done = queries.len() - pending.len();
    let take = budget.unwrap_or(usize::MAX).min(pending.len());
    let outcomes: Vec<Result<&'static str>> = pending[..take]
        .par_iter()
        .map(|(key, q)| match rule_ladder(q, ctx, opts) {
            Ok((rules, reports)) => {
                let mut kept: Vec<Rule> = rules.into_iter().map(|(r, _)| r).collect();
                kept.sort();
                kept.dedup();
                let timed_out = reports.iter().any(|r| r.status == SolveStatus::FeasibleTimeout);
                let status = if timed_out { "timeout" } else { "ok" };
                cache.record(key, status, &kept)?;
                Ok(status)
            }
            Err(Error::Infeasible { .. }) => {
                cache.record(key, "infeasible", &[])?;
                Ok("infeasible")
            }
            Err(Error::Timeout) => {
                cache.record(key, "timeout", &[])?;
                Ok("timeout")
            }
            Err(e) => Err(e),
        })
        .collect();
    let mut report = CacheBuildReport {
        already_done,
        remaining: pending.len() - take,
        ..Default::default()
    };
    for o in outcomes {
        match o? {
            "ok" => report.solved += 1,
            "timeout" => report.timeouts += 1,
            _ => report.infeasible += 1,
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_ctx() -> ExplainContext {
        let rows: Vec<Vec<u8>> = (0..60u32)
            .map(|i| (0..5).map(|j| ((i * 7 + j * 3) % 5 < 2) as u8).collect())
            .collect();
        let preds: Vec<u8> = rows.iter().map(|r| (r[0] + r[1] >= 1) as u8).collect();
        ExplainContext::from_rows(&rows, &preds)
    }

    #[test]
    fn build_resume_and_reload() {
        let ctx = small_ctx();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rules.jsonl");
        let queries = training_queries(&ctx);
        let cache = RuleCache::open(&path, &ctx).unwrap();
        let r1 = build_rule_cache(&ctx, &cache, &queries, &SolveOptions::default(), Some(10)).unwrap();
        assert_eq!(r1.solved + r1.infeasible + r1.timeouts, 10);
        assert_eq!(r1.remaining, 50);
        drop(cache);
        let cache = RuleCache::open(&path, &ctx).unwrap();
        assert_eq!(cache.done_count(), 10);
        let r2 = build_rule_cache(&ctx, &cache, &queries, &SolveOptions::default(), None).unwrap();
        assert_eq!(r2.already_done, 10);
        assert_eq!(r2.solved + r2.infeasible + r2.timeouts, 50);
        for r in cache.rules() {
            assert!(verify_consistency(&r, &ctx).consistent);
        }
        let q = ctx.query_row(3);
        if let Some(hit) = cache.lookup(&ctx, &q, 0) {
            assert!(ctx.is_relevant(&hit, &q));
        }
    }

    #[test]
    fn mismatched_context_is_refused() {
        let ctx = small_ctx();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rules.jsonl");
        RuleCache::open(&path, &ctx).unwrap();
        let mut preds = ctx.predictions.clone();
        preds[0] ^= 1;
        let rows: Vec<Vec<u8>> = (0..ctx.n_rows()).map(|i| ctx.matrix.row(i).to_vec()).collect();
        let other = ExplainContext::from_rows(&rows, &preds);
        assert!(matches!(
            RuleCache::open(&path, &other),
            Err(Error::CacheMismatch { .. })
        ));
    }

    #[test]
    fn truncated_tail_is_tolerated() {
        let ctx = small_ctx();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rules.jsonl");
        let cache = RuleCache::open(&path, &ctx).unwrap();
        build_rule_cache(&ctx, &cache, &training_queries(&ctx)[..3], &SolveOptions::default(), None).unwrap();
        drop(cache);
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        write!(f, "{{\"kind\":\"entry\",\"key\":\"row:3\",\"sta").unwrap();
        drop(f);
        let cache = RuleCache::open(&path, &ctx).unwrap();
        assert_eq!(cache.done_count(), 3);
        cache.record("row:9", "ok", &[]).unwrap();
        drop(cache);
        assert_eq!(RuleCache::open(&path, &ctx).unwrap().done_count(), 4);
    }
}
