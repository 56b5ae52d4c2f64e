//! Exact branch-and-bound solvers for sparsest and best-supported
//! consistent rules.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{BitSet, ExplainContext, Query, Rule, RuleCache};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    FeasibleTimeout,
    Infeasible,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub objective: f64,
    pub nodes: u64,
    pub wall_ms: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub time_limit: Duration,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            time_limit: Duration::from_secs(10),
        }
    }
}

/// Set-cover view of a query: elements are the rows predicted with the
/// opposite label, sets are the relevant columns that those rows fail.
struct Cover {
    /// Local column → extended column id, ascending.
    ext: Vec<usize>,
    /// Local column → covered elements.
    sets: Vec<BitSet>,
    /// Element → local columns covering it.
    members: Vec<BitSet>,
    /// Element → row index.
    rows: Vec<usize>,
}

impl Cover {
    fn new(ctx: &ExplainContext, q: &Query, drop_dominated: bool) -> std::result::Result<Cover, Vec<usize>> {
        let opposite = ctx.opposite_rows(q.label);
        let rows: Vec<usize> = opposite.ones().collect();
        let m = rows.len();
        let mut ext = Vec::new();
        let mut sets = Vec::new();
        for c in ctx.relevant_columns(q) {
            // rows failing column c
            let fail = opposite.and_not(ctx.column(c));
            if fail.is_empty() {
                continue;
            }
            let mut s = BitSet::new(m);
            for (e, &i) in rows.iter().enumerate() {
                if fail.get(i) {
                    s.set(e);
                }
            }
            ext.push(c);
            sets.push(s);
        }
        if drop_dominated {
            let n = sets.len();
            let mut keep = vec![true; n];
            for a in 0..n {
                for b in 0..n {
                    if a != b && keep[b] && sets[a].is_subset(&sets[b]) && (sets[a] != sets[b] || b < a) {
                        keep[a] = false;
                        break;
                    }
                }
            }
            let mut k = keep.iter();
            ext.retain(|_| *k.next().unwrap());
            let mut k = keep.iter();
            sets.retain(|_| *k.next().unwrap());
        }
        let mut members = vec![BitSet::new(sets.len()); m];
        for (c, s) in sets.iter().enumerate() {
            for e in s.ones() {
                members[e].set(c);
            }
        }
        let twins: Vec<usize> = (0..m).filter(|&e| members[e].is_empty()).map(|e| rows[e]).collect();
        if !twins.is_empty() {
            return Err(twins);
        }
        Ok(Cover {
            ext,
            sets,
            members,
            rows,
        })
    }

    fn n_cols(&self) -> usize {
        self.sets.len()
    }

    fn m(&self) -> usize {
        self.rows.len()
    }

    /// Uncovered element with the fewest allowed covering columns.
    fn branch_element(&self, uncovered: &BitSet, allowed: &BitSet) -> Option<(usize, usize)> {
        let mut best: Option<(usize, usize)> = None;
        for e in uncovered.ones() {
            let d = self.members[e].and_count(allowed);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((e, d));
                if d <= 1 {
                    break;
                }
            }
        }
        best
    }

    /// Lower bound on columns still needed: max of the coverage-ratio bound
    /// and a greedy packing of elements with disjoint covering columns.
    fn lower_bound(&self, uncovered: &BitSet, allowed: &BitSet) -> usize {
        let u = uncovered.count();
        if u == 0 {
            return 0;
        }
        let max_cov = allowed.ones().map(|c| self.sets[c].and_count(uncovered)).max().unwrap_or(0);
        if max_cov == 0 {
            return usize::MAX / 2;
        }
        let ratio = u.div_ceil(max_cov);
        let mut degree: Vec<(usize, usize)> = uncovered
            .ones()
            .map(|e| (self.members[e].and_count(allowed), e))
            .collect();
        degree.sort_unstable();
        let mut used = BitSet::new(self.n_cols());
        let mut packing = 0;
        for (d, e) in degree {
            if d == 0 {
                return usize::MAX / 2;
            }
            let cols = self.members[e].and(allowed);
            if !cols.intersects(&used) {
                used.or_assign(&cols);
                packing += 1;
            }
        }
        ratio.max(packing)
    }

    fn greedy(&self) -> Vec<usize> {
        let mut uncovered = BitSet::full(self.m());
        let mut chosen = Vec::new();
        while !uncovered.is_empty() {
            let mut best = (0, 0);
            for c in 0..self.n_cols() {
                let k = self.sets[c].and_count(&uncovered);
                if k > best.1 {
                    best = (c, k);
                }
            }
            chosen.push(best.0);
            uncovered = uncovered.and_not(&self.sets[best.0]);
        }
        chosen
    }
}

struct Clock {
    start: Instant,
    limit: Duration,
    nodes: u64,
    timed_out: bool,
}

impl Clock {
    fn new(limit: Duration) -> Clock {
        Clock {
            start: Instant::now(),
            limit,
            nodes: 0,
            timed_out: false,
        }
    }

    fn tick(&mut self) -> bool {
        self.nodes += 1;
        if self.nodes.is_multiple_of(64) && self.start.elapsed() > self.limit {
            self.timed_out = true;
        }
        self.timed_out
    }

    fn ms(&self) -> f64 {
        self.start.elapsed().as_secs_f64() * 1e3
    }
}

struct MinSearch<'a> {
    cover: &'a Cover,
    best: Vec<usize>,
    clock: Clock,
}

impl MinSearch<'_> {
    fn run(&mut self, chosen: &mut Vec<usize>, uncovered: &BitSet, allowed: &BitSet) {
        if self.clock.tick() {
            return;
        }
        if uncovered.is_empty() {
            if chosen.len() < self.best.len() {
                self.best = chosen.clone();
            }
            return;
        }
        if chosen.len() + 1 >= self.best.len() {
            return;
        }
        let lb = self.cover.lower_bound(uncovered, allowed);
        if chosen.len() + lb >= self.best.len() {
            return;
        }
        let Some((e, d)) = self.cover.branch_element(uncovered, allowed) else {
            return;
        };
        if d == 0 {
            return;
        }
        let mut cands: Vec<(usize, usize)> = self.cover.members[e]
            .and(allowed)
            .ones()
            .map(|c| (self.cover.sets[c].and_count(uncovered), c))
            .collect();
        cands.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut allowed_here = allowed.clone();
        for (_, c) in cands {
            allowed_here.clear(c);
            chosen.push(c);
            let next = uncovered.and_not(&self.cover.sets[c]);
            self.run(chosen, &next, &allowed_here);
            chosen.pop();
            if self.clock.timed_out {
                return;
            }
        }
    }
}

fn to_rule(ctx: &ExplainContext, cover: &Cover, local: &[usize], label: u8) -> Rule {
    ctx.make_rule(local.iter().map(|&c| cover.ext[c]).collect(), label)
}

fn infeasible(twins: Vec<usize>) -> Error {
    Error::Infeasible { twins }
}

/// Sparsest relevant rule such that every row with the opposite prediction
/// fails at least one of its columns. Ties keep the first optimum found.
pub fn min_sparsity_rule(q: &Query, ctx: &ExplainContext, opts: &SolveOptions) -> Result<(Rule, SolveReport)> {
    let cover = Cover::new(ctx, q, true).map_err(infeasible)?;
    let mut search = MinSearch {
        cover: &cover,
        best: cover.greedy(),
        clock: Clock::new(opts.time_limit),
    };
    let n = cover.n_cols();
    search.run(&mut Vec::new(), &BitSet::full(cover.m()), &BitSet::full(n));
    let rule = to_rule(ctx, &cover, &search.best, q.label);
    let status = if search.clock.timed_out {
        SolveStatus::FeasibleTimeout
    } else {
        SolveStatus::Optimal
    };
    let report = SolveReport {
        status,
        objective: rule.sparsity() as f64,
        nodes: search.clock.nodes,
        wall_ms: search.clock.ms(),
    };
    Ok((rule, report))
}

struct MaxSearch<'a> {
    cover: &'a Cover,
    /// Extended column bits per local column.
    col_rows: Vec<&'a BitSet>,
    cap: usize,
    best: Option<(usize, Vec<usize>)>,
    clock: Clock,
}

impl MaxSearch<'_> {
    fn beats(&self, support: usize, len: usize) -> bool {
        match &self.best {
            None => true,
            Some((s, r)) => support > *s || (support == *s && len < r.len()),
        }
    }

    fn run(&mut self, chosen: &mut Vec<usize>, uncovered: &BitSet, sat: &BitSet, allowed: &BitSet) {
        if self.clock.tick() {
            return;
        }
        let support = sat.count();
        if uncovered.is_empty() {
            if self.beats(support, chosen.len()) {
                self.best = Some((support, chosen.clone()));
            }
            return;
        }
        if chosen.len() >= self.cap || !self.beats(support, chosen.len() + 1) {
            return;
        }
        let lb = self.cover.lower_bound(uncovered, allowed);
        if chosen.len() + lb > self.cap || !self.beats(support, chosen.len() + lb) {
            return;
        }
        let Some((e, d)) = self.cover.branch_element(uncovered, allowed) else {
            return;
        };
        if d == 0 {
            return;
        }
        let mut cands: Vec<(usize, usize, BitSet)> = self.cover.members[e]
            .and(allowed)
            .ones()
            .map(|c| {
                let s = sat.and(self.col_rows[c]);
                (s.count(), c, s)
            })
            .collect();
        cands.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut allowed_here = allowed.clone();
        for (s_count, c, s) in cands {
            allowed_here.clear(c);
            if !self.beats(s_count, chosen.len() + 1) {
                // candidates are sorted by support, so later ones cannot win either
                break;
            }
            chosen.push(c);
            let next = uncovered.and_not(&self.cover.sets[c]);
            self.run(chosen, &next, &s, &allowed_here);
            chosen.pop();
            if self.clock.timed_out {
                return;
            }
        }
    }
}

/// Relevant consistent rule with at most `max_sparsity` columns maximizing
/// support, then minimizing sparsity. `warm_start` seeds the incumbent.
pub fn max_support_rule(
    q: &Query,
    ctx: &ExplainContext,
    max_sparsity: usize,
    warm_start: Option<&Rule>,
    opts: &SolveOptions,
) -> Result<(Rule, SolveReport)> {
    let cover = Cover::new(ctx, q, false).map_err(infeasible)?;
    let col_rows: Vec<&BitSet> = cover.ext.iter().map(|&c| ctx.column(c)).collect();
    let mut search = MaxSearch {
        cover: &cover,
        col_rows,
        cap: max_sparsity,
        best: None,
        clock: Clock::new(opts.time_limit),
    };
    let mut incumbent_ext: Option<Vec<usize>> = None;
    if let Some(w) = warm_start {
        let local: Option<Vec<usize>> = w
            .columns
            .iter()
            .map(|c| cover.ext.iter().position(|e| e == c))
            .collect();
        let ok = w.label == q.label
            && w.sparsity() <= max_sparsity
            && super::verify_consistency(w, ctx).consistent
            && ctx.is_relevant(w, q);
        if ok {
            match local {
                Some(local) => search.best = Some((w.support, local)),
                // warm start uses columns that cover nothing; keep it outside the search
                None => incumbent_ext = Some(w.columns.clone()),
            }
        }
    }
    let greedy = cover.greedy();
    if greedy.len() <= max_sparsity {
        let s = ctx.support(&greedy.iter().map(|&c| cover.ext[c]).collect::<Vec<_>>());
        if search.beats(s, greedy.len()) {
            search.best = Some((s, greedy));
        }
    }
    let m = cover.m();
    let sat = BitSet::full(ctx.n_rows()).and_not(&ctx.opposite_rows(q.label));
    search.run(&mut Vec::new(), &BitSet::full(m), &sat, &BitSet::full(cover.n_cols()));
    let timed_out = search.clock.timed_out;
    let searched = search.best.as_ref().map(|(_, local)| to_rule(ctx, &cover, local, q.label));
    let outside = incumbent_ext.map(|cols| ctx.make_rule(cols, q.label));
    let rule = match (searched, outside) {
        (Some(a), Some(b)) => {
            if (b.support, std::cmp::Reverse(b.sparsity())) > (a.support, std::cmp::Reverse(a.sparsity())) {
                b
            } else {
                a
            }
        }
        (Some(a), None) => a,
        (None, Some(b)) => b,
        (None, None) if timed_out => return Err(Error::Timeout),
        (None, None) => {
            return Err(Error::InvalidArgument(format!(
                "no consistent rule with at most {max_sparsity} columns"
            )))
        }
    };
    let p2 = (2 * ctx.n_extended() + 1) as f64;
    let report = SolveReport {
        status: if timed_out {
            SolveStatus::FeasibleTimeout
        } else {
            SolveStatus::Optimal
        },
        objective: rule.support as f64 - rule.sparsity() as f64 / p2,
        nodes: search.clock.nodes,
        wall_ms: search.clock.ms(),
    };
    Ok((rule, report))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplainOptions {
    pub min_support: usize,
    pub fallback_support: usize,
    pub solve: SolveOptions,
}

impl Default for ExplainOptions {
    fn default() -> Self {
        ExplainOptions {
            min_support: 10,
            fallback_support: 5,
            solve: SolveOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleSource {
    Cache,
    MinSparsity,
    MaxSupport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub rule: Rule,
    pub source: RuleSource,
    /// Optimal sparsity when a solve happened.
    pub opt_sparsity: Option<usize>,
    pub reports: Vec<SolveReport>,
}

/// Candidate rules with where each came from, and the solve reports.
pub type Ladder = (Vec<(Rule, RuleSource)>, Vec<SolveReport>);

/// Best-support rules at sparsity caps OPT, OPT+1 and OPT+2, each solve
/// warm-started from the previous solution. Solves share the time left
/// until `deadline`; a cap skipped for lack of time is reported as a
/// timeout at the incumbent's support.
fn support_ladder(
    q: &Query,
    ctx: &ExplainContext,
    sparse: Rule,
    deadline: Instant,
) -> Result<Ladder> {
    let opt = sparse.sparsity();
    let mut rules = vec![(sparse.clone(), RuleSource::MinSparsity)];
    let mut reports = Vec::new();
    let mut warm = sparse;
    for cap in opt..=opt + 2 {
        let left = deadline.saturating_duration_since(Instant::now());
        if left.is_zero() {
            reports.push(SolveReport {
                status: SolveStatus::FeasibleTimeout,
                objective: warm.support as f64,
                nodes: 0,
                wall_ms: 0.0,
            });
            break;
        }
        match max_support_rule(q, ctx, cap, Some(&warm), &SolveOptions { time_limit: left }) {
            Ok((r, rep)) => {
                reports.push(rep);
                warm = r.clone();
                rules.push((r, RuleSource::MaxSupport));
            }
            Err(Error::Timeout) => break,
            Err(e) => return Err(e),
        }
    }
    Ok((rules, reports))
}

/// The sparsest rule followed by the best-support rules at OPT..=OPT+2,
/// all within one time limit.
pub fn rule_ladder(q: &Query, ctx: &ExplainContext, opts: &SolveOptions) -> Result<Ladder> {
    let deadline = Instant::now() + opts.time_limit;
    let (sparse, report) = min_sparsity_rule(q, ctx, opts)?;
    let (rules, mut reports) = support_ladder(q, ctx, sparse, deadline)?;
    reports.insert(0, report);
    Ok((rules, reports))
}

fn sparsest_above(rules: &[(Rule, RuleSource)], min_support: usize) -> Option<(Rule, RuleSource)> {
    rules
        .iter()
        .filter(|(r, _)| r.support > min_support)
        .min_by(|(a, _), (b, _)| a.sparsity().cmp(&b.sparsity()).then(b.support.cmp(&a.support)))
        .cloned()
}

/// Cache scan, then the sparsest rule, then best-support rules with the
/// sparsity cap relaxed by up to two, first requiring support above
/// `min_support` and then above `fallback_support`. The solver time limit
/// bounds the whole sequence.
pub fn opt_consistent_rule(
    q: &Query,
    ctx: &ExplainContext,
    cache: Option<&RuleCache>,
    opts: &ExplainOptions,
) -> Result<Explanation> {
    if let Some(rule) = cache.and_then(|c| c.lookup(ctx, q, opts.min_support)) {
        return Ok(Explanation {
            rule,
            source: RuleSource::Cache,
            opt_sparsity: None,
            reports: vec![],
        });
    }
    let deadline = Instant::now() + opts.solve.time_limit;
    let (sparse, report) = min_sparsity_rule(q, ctx, &opts.solve)?;
    let opt = sparse.sparsity();
    if sparse.support > opts.min_support {
        return Ok(Explanation {
            rule: sparse,
            source: RuleSource::MinSparsity,
            opt_sparsity: Some(opt),
            reports: vec![report],
        });
    }
    let (rules, more) = support_ladder(q, ctx, sparse, deadline)?;
    let mut reports = vec![report];
    reports.extend(more);
    let pick = sparsest_above(&rules, opts.min_support)
        .or_else(|| {
            cache
                .and_then(|c| c.lookup(ctx, q, opts.fallback_support))
                .map(|r| (r, RuleSource::Cache))
        })
        .or_else(|| sparsest_above(&rules, opts.fallback_support));
    match pick {
        Some((rule, source)) => Ok(Explanation {
            rule,
            source,
            opt_sparsity: Some(opt),
            reports,
        }),
        None => Err(Error::Outlier),
    }
}
