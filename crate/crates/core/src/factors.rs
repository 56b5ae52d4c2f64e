//! Most important contributing risk factors of a prediction.

use serde::{Deserialize, Serialize};

use crate::riskmodel::PredictionBreakdown;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskFactor {
    pub condition: String,
    pub feature: String,
    pub column: usize,
    pub subscale: String,
    /// 1 for the most important subscale.
    pub subscale_rank: usize,
    pub points: f64,
    /// α_k · r^[k](x) of the owning subscale.
    pub subscale_points: f64,
}

/// Subscale indices ordered by weighted output, declaration order on ties.
pub fn rank_subscales(breakdown: &PredictionBreakdown) -> Vec<usize> {
    let mut order: Vec<usize> = (0..breakdown.subscales.len()).collect();
    order.sort_by(|&a, &b| {
        breakdown.subscales[b]
            .contribution
            .total_cmp(&breakdown.subscales[a].contribution)
    });
    order
}

/// Top `n_factors_each` positive active terms within each of the top
/// `n_subscales` subscales.
pub fn important_factors(breakdown: &PredictionBreakdown, n_subscales: usize, n_factors_each: usize) -> Vec<RiskFactor> {
    let mut out = Vec::new();
    for (rank, k) in rank_subscales(breakdown).into_iter().take(n_subscales).enumerate() {
        let s = &breakdown.subscales[k];
        let mut terms: Vec<_> = s.terms.iter().filter(|t| t.points > 0.0).collect();
        terms.sort_by(|a, b| b.points.total_cmp(&a.points));
        for t in terms.into_iter().take(n_factors_each) {
            out.push(RiskFactor {
                condition: t.condition.clone(),
                feature: t.feature.clone(),
                column: t.column,
                subscale: s.name.clone(),
                subscale_rank: rank + 1,
                points: t.points,
                subscale_points: s.contribution,
            });
        }
    }
    out
}

/// Active terms with negative points, most protective first.
pub fn protective_factors(breakdown: &PredictionBreakdown, n: usize) -> Vec<RiskFactor> {
    let ranks = rank_subscales(breakdown);
    let mut out = Vec::new();
    for (k, s) in breakdown.subscales.iter().enumerate() {
        let rank = ranks.iter().position(|&r| r == k).unwrap() + 1;
        for t in s.terms.iter().filter(|t| t.points < 0.0) {
            out.push(RiskFactor {
                condition: t.condition.clone(),
                feature: t.feature.clone(),
                column: t.column,
                subscale: s.name.clone(),
                subscale_rank: rank,
                points: t.points,
                subscale_points: s.contribution,
            });
        }
    }
    out.sort_by(|a, b| a.points.total_cmp(&b.points));
    out.truncate(n);
    out
}

fn ordinal(rank: usize) -> String {
    match rank {
        1 => "most important".into(),
        2 => "second most important".into(),
        3 => "third most important".into(),
        n => format!("{n}th most important"),
    }
}

pub fn render_factors(factors: &[RiskFactor]) -> String {
    let mut out = String::new();
    for (i, f) in factors.iter().enumerate() {
        out.push_str(&format!(
            "{:>3}  {} (from the {} subscale, {})\n",
            i + 1,
            f.condition,
            ordinal(f.subscale_rank),
            f.subscale
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::riskmodel::{ActiveTerm, SubscaleBreakdown};

    fn sub(name: &str, contribution: f64, terms: &[(usize, f64)]) -> SubscaleBreakdown {
        SubscaleBreakdown {
            name: name.into(),
            bias: 0.0,
            score: 0.0,
            probability: 0.5,
            alpha: 1.0,
            contribution,
            features: vec![],
            terms: terms
                .iter()
                .map(|&(c, p)| ActiveTerm {
                    column: c,
                    feature: format!("f{c}"),
                    condition: format!("f{c} is high"),
                    points: p,
                })
                .collect(),
        }
    }

    fn breakdown(subs: Vec<SubscaleBreakdown>) -> PredictionBreakdown {
        PredictionBreakdown {
            bits: vec![],
            subscales: subs,
            bias: 0.0,
            score: 0.0,
            probability: 0.5,
            unknown_categories: vec![],
        }
    }

    #[test]
    fn ordering_and_filtering() {
        let b = breakdown(vec![
            sub("A", 0.5, &[(0, 0.3)]),
            sub("B", 1.9, &[(1, 0.2), (2, 0.9), (3, -0.4), (4, 0.5)]),
            sub("C", 1.2, &[(5, 0.0), (6, 0.1)]),
        ]);
        let f = important_factors(&b, 2, 2);
        let cols: Vec<usize> = f.iter().map(|x| x.column).collect();
        assert_eq!(cols, vec![2, 4, 6]);
        assert_eq!(f[0].subscale_rank, 1);
        assert_eq!(f[2].subscale, "C");
        assert!(f.iter().all(|x| x.points > 0.0));
        let text = render_factors(&f);
        assert!(text.contains("f2 is high (from the most important subscale, B)"));
        let p = protective_factors(&b, 5);
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].column, 3);
    }

    #[test]
    fn empty_when_nothing_active() {
        let b = breakdown(vec![sub("A", 0.5, &[]), sub("B", 0.1, &[])]);
        assert!(important_factors(&b, 2, 2).is_empty());
    }

    #[test]
    fn ties_follow_declaration_order() {
        let b = breakdown(vec![sub("A", 1.0, &[(0, 1.0)]), sub("B", 1.0, &[(1, 1.0)])]);
        assert_eq!(rank_subscales(&b), vec![0, 1]);
        let f = important_factors(&b, 1, 1);
        assert_eq!(f[0].subscale, "A");
    }
}
