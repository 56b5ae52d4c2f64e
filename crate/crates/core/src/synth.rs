//! Synthetic home-equity credit data with the 23-feature layout of the
//! public HELOC challenge data. Latent per-subscale risk factors drive both
//! the features (in their declared monotone directions) and the label.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{Cell, Dataset, Schema};
use crate::error::Result;

pub const FICO_SCHEMA_TOML: &str = r#"schema_version = 1
label = "RiskPerformance"
positive_means = "a high risk of default"
negative_means = "a low risk of default"
positive_token = "Bad"
negative_token = "Good"
subscales = ["ExternalRiskEstimate", "TradeOpenTime", "NumSatisfactoryTrades", "TradeFrequency", "Delinquency", "DerogatoryTrades", "Installment", "Inquiry", "RevolvingBalance", "Utilization"]

[[features]]
name = "ExternalRiskEstimate"
kind = "numeric"
monotonicity = "decreasing"
subscale = "ExternalRiskEstimate"
description = "Consolidated version of risk markers"
special_values = [{ code = -9, meaning = "no bureau record or no investigation" }]

[[features]]
name = "MSinceOldestTradeOpen"
kind = "numeric"
monotonicity = "decreasing"
subscale = "TradeOpenTime"
description = "Months since oldest trade open"
special_values = [{ code = -8, meaning = "no usable or valid trades" }]

[[features]]
name = "MSinceMostRecentTradeOpen"
kind = "numeric"
monotonicity = "decreasing"
subscale = "TradeOpenTime"
description = "Months since most recent trade open"

[[features]]
name = "AverageMInFile"
kind = "numeric"
monotonicity = "decreasing"
subscale = "TradeOpenTime"
description = "Average months in file"

[[features]]
name = "NumSatisfactoryTrades"
kind = "numeric"
monotonicity = "decreasing"
subscale = "NumSatisfactoryTrades"
description = "Number of satisfactory trades"

[[features]]
name = "NumTotalTrades"
kind = "numeric"
subscale = "TradeFrequency"
description = "Number of total trades"

[[features]]
name = "NumTradesOpeninLast12M"
kind = "numeric"
subscale = "TradeFrequency"
description = "Number of trades open in the last 12 months"

[[features]]
name = "MaxDelq2PublicRecLast12M"
kind = "numeric"
monotonicity = "decreasing"
subscale = "Delinquency"
description = "Max delinquency or public record in the last 12 months (larger is better)"

[[features]]
name = "MaxDelqEver"
kind = "numeric"
monotonicity = "decreasing"
subscale = "Delinquency"
description = "Max delinquency ever (larger is better)"

[[features]]
name = "PercentTradesNeverDelq"
kind = "numeric"
monotonicity = "decreasing"
subscale = "Delinquency"
description = "Percent of trades never delinquent"

[[features]]
name = "MSinceMostRecentDelq"
kind = "numeric"
monotonicity = "decreasing"
subscale = "Delinquency"
description = "Months since most recent delinquency"
special_values = [{ code = -7, meaning = "condition not met (no delinquency)" }, { code = -8, meaning = "no usable or valid trades" }]

[[features]]
name = "NumTrades60Ever2DerogPubRec"
kind = "numeric"
monotonicity = "increasing"
subscale = "DerogatoryTrades"
description = "Number of trades 60+ days past due ever"

[[features]]
name = "NumTrades90Ever2DerogPubRec"
kind = "numeric"
monotonicity = "increasing"
subscale = "DerogatoryTrades"
description = "Number of trades 90+ days past due ever"

[[features]]
name = "PercentInstallTrades"
kind = "numeric"
subscale = "Installment"
description = "Percent of installment trades"

[[features]]
name = "NetFractionInstallBurden"
kind = "numeric"
monotonicity = "increasing"
subscale = "Installment"
description = "Installment balance over original loan amount"
special_values = [{ code = -8, meaning = "no usable or valid trades" }]

[[features]]
name = "NumInstallTradesWBalance"
kind = "numeric"
subscale = "Installment"
description = "Number of installment trades with balance"
special_values = [{ code = -8, meaning = "no usable or valid trades" }]

[[features]]
name = "MSinceMostRecentInqexcl7days"
kind = "numeric"
monotonicity = "decreasing"
subscale = "Inquiry"
description = "Months since most recent inquiry excluding the last 7 days"
special_values = [{ code = -7, meaning = "condition not met (no inquiries)" }, { code = -8, meaning = "no usable or valid inquiries" }]

[[features]]
name = "NumInqLast6M"
kind = "numeric"
monotonicity = "increasing"
subscale = "Inquiry"
description = "Number of inquiries in the last 6 months"

[[features]]
name = "NumInqLast6Mexcl7days"
kind = "numeric"
monotonicity = "increasing"
subscale = "Inquiry"
description = "Number of inquiries in the last 6 months excluding the last 7 days"

[[features]]
name = "NetFractionRevolvingBurden"
kind = "numeric"
monotonicity = "increasing"
subscale = "RevolvingBalance"
description = "Revolving balance over credit limit"
special_values = [{ code = -8, meaning = "no usable or valid trades" }]

[[features]]
name = "NumRevolvingTradesWBalance"
kind = "numeric"
subscale = "RevolvingBalance"
description = "Number of revolving trades with balance"
special_values = [{ code = -8, meaning = "no usable or valid trades" }]

[[features]]
name = "NumBank2NatlTradesWHighUtilization"
kind = "numeric"
monotonicity = "increasing"
subscale = "Utilization"
description = "Number of bank or national trades with high utilization"
special_values = [{ code = -8, meaning = "no usable or valid trades" }]

[[features]]
name = "PercentTradesWBalance"
kind = "numeric"
monotonicity = "increasing"
subscale = "Utilization"
description = "Percent of trades with balance"
special_values = [{ code = -8, meaning = "no usable or valid trades" }]
"#;

pub fn fico_like_schema() -> Schema {
    Schema::from_toml_str(FICO_SCHEMA_TOML).expect("built-in schema is valid")
}

struct Gen {
    rng: ChaCha8Rng,
    normal: Normal<f64>,
}

impl Gen {
    fn n(&mut self, sd: f64) -> f64 {
        self.normal.sample(&mut self.rng) * sd
    }

    fn coin(&mut self, p: f64) -> bool {
        self.rng.random::<f64>() < p
    }
}

fn clamp_round(v: f64, lo: f64, hi: f64) -> Cell {
    Cell::Number(v.round().clamp(lo, hi))
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Generates `n` rows; deterministic in `seed`.
pub fn generate(n: usize, seed: u64) -> Result<Dataset> {
    let schema = fico_like_schema();
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        normal: Normal::new(0.0, 1.0).expect("unit normal"),
    };
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let r = g.n(1.0);
        // latent risk per subscale, correlated through r
        let mut u = [0.0; 10];
        for v in u.iter_mut() {
            *v = 0.75 * r + 0.66 * g.n(1.0);
        }
        let [ere, tot, sat, freq, delq, derog, inst, inq, rev, util] = u;
        let mut row = Vec::with_capacity(23);
        row.push(if g.coin(0.01) {
            Cell::Special(-9)
        } else {
            clamp_round(72.0 - 8.0 * ere + g.n(3.0), 33.0, 94.0)
        });
        row.push(if g.coin(0.02) {
            Cell::Special(-8)
        } else {
            clamp_round(200.0 - 55.0 * tot + g.n(45.0), 2.0, 800.0)
        });
        row.push(clamp_round((2.2 - 0.35 * tot + g.n(0.8)).exp(), 0.0, 380.0));
        row.push(clamp_round(78.0 - 20.0 * tot + g.n(16.0), 4.0, 380.0));
        row.push(clamp_round(21.0 - 5.0 * sat + g.n(8.0), 0.0, 80.0));
        row.push(clamp_round(23.0 - 2.0 * freq + g.n(11.0), 0.0, 100.0));
        row.push(clamp_round((0.6 + 0.25 * freq + g.n(0.6)).exp() - 1.0, 0.0, 19.0));
        let bad = (delq + g.n(0.7)).max(0.0);
        row.push(clamp_round(7.0 - 1.6 * bad, 0.0, 9.0));
        row.push(clamp_round(8.0 - 1.3 * (delq + g.n(0.6)).max(0.0), 2.0, 8.0));
        row.push(clamp_round(100.0 - 9.0 * (delq + 0.4 + g.n(0.8)).max(0.0), 0.0, 100.0));
        row.push(if g.coin(0.02) {
            Cell::Special(-8)
        } else if g.coin(logistic(-1.8 * delq)) {
            Cell::Special(-7)
        } else {
            clamp_round((3.0 - 0.5 * delq + g.n(0.7)).exp(), 0.0, 83.0)
        });
        let d60 = (1.2 * (0.8 * derog + g.n(0.6)).max(0.0)).round().min(19.0);
        row.push(Cell::Number(d60));
        row.push(Cell::Number((0.7 * d60 + g.n(0.3)).round().clamp(0.0, d60)));
        row.push(clamp_round(33.0 + 3.0 * inst + g.n(15.0), 0.0, 100.0));
        row.push(if g.coin(0.3) {
            Cell::Special(-8)
        } else {
            clamp_round(68.0 + 12.0 * inst + g.n(20.0), 0.0, 471.0)
        });
        row.push(if g.coin(0.08) {
            Cell::Special(-8)
        } else {
            clamp_round(2.5 + 0.3 * inst + g.n(1.8), 1.0, 23.0)
        });
        let n_inq = (0.2 + 0.5 * inq + g.n(0.7)).exp() - 0.5;
        row.push(if g.coin(0.05) {
            Cell::Special(-8)
        } else if g.coin(logistic(-1.0 - inq)) {
            Cell::Special(-7)
        } else {
            clamp_round((0.8 - 0.5 * inq + g.n(1.0)).exp(), 0.0, 24.0)
        });
        let n_inq = n_inq.round().clamp(0.0, 66.0);
        row.push(Cell::Number(n_inq));
        row.push(Cell::Number((0.9 * n_inq).round()));
        row.push(if g.coin(0.02) {
            Cell::Special(-8)
        } else {
            clamp_round(35.0 + 22.0 * rev + g.n(20.0), 0.0, 232.0)
        });
        row.push(if g.coin(0.02) {
            Cell::Special(-8)
        } else {
            clamp_round(4.0 + 0.5 * rev + g.n(3.0), 0.0, 32.0)
        });
        row.push(if g.coin(0.06) {
            Cell::Special(-8)
        } else {
            clamp_round(1.0 + 1.1 * util + g.n(1.0), 0.0, 18.0)
        });
        row.push(if g.coin(0.02) {
            Cell::Special(-8)
        } else {
            clamp_round(66.0 + 14.0 * util + g.n(15.0), 0.0, 100.0)
        });
        let z = 0.8 * ere + 0.8 * tot + 0.15 * sat + 0.6 * delq + 0.2 * derog + 0.1 * inst + 0.25 * inq + 0.35 * rev + 0.2 * util
            - 0.05 * freq
            + g.n(0.6);
        labels.push(g.coin(logistic(1.1 * z)) as u8);
        rows.push(row);
    }
    Dataset::new(schema, rows, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_and_determinism() {
        let a = generate(300, 7).unwrap();
        let b = generate(300, 7).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.schema.n_features(), 23);
        assert_eq!(a.schema.subscales.len(), 10);
        let members = a.schema.subscale_members();
        assert!(members.iter().all(|(_, m)| (1..=4).contains(&m.len())));
        let rate = a.positives() as f64 / a.len() as f64;
        assert!((0.3..0.7).contains(&rate), "{rate}");
        for row in &a.rows {
            a.schema.check_row(row).unwrap();
        }
    }
}
