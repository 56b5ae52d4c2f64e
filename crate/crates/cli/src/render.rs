//! Plain-text views of the payloads printed with `--format text`.

use std::fmt::Write;
use std::path::Path;

use creditlens_core::explain::{ExplanationPayload, PredictionPayload};
use creditlens_core::riskmodel::TrainReport;
use creditlens_core::rules::cache::CacheBuildReport;

pub fn train_report(r: &TrainReport, fingerprint: &str, out: &Path) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<28} {:>6} {:>12}  converged", "stage", "iters", "objective");
    for sub in &r.subscales {
        let o = &sub.report;
        let _ = writeln!(s, "{:<28} {:>6} {:>12.6}  {}", sub.name, o.iterations, o.objective, o.converged);
    }
    let o = &r.second_layer;
    let _ = writeln!(s, "{:<28} {:>6} {:>12.6}  {}", "second layer", o.iterations, o.objective, o.converged);
    if r.fine_tune_trace.len() > 1 {
        let first = r.fine_tune_trace[0];
        let last = r.fine_tune_trace[r.fine_tune_trace.len() - 1];
        let _ = writeln!(s, "fine-tune: {} epochs, {first:.6} -> {last:.6}", r.fine_tune_trace.len() - 1);
    }
    let _ = writeln!(s, "final objective {:.6}", r.final_objective);
    let _ = writeln!(s, "model {} written to {}", &fingerprint[..12.min(fingerprint.len())], out.display());
    s
}

pub fn prediction(p: &PredictionPayload) -> String {
    let b = &p.breakdown;
    let mut s = String::new();
    let _ = writeln!(s, "Probability {:.3}: the model predicts {}.", p.probability, p.label_text);
    let _ = writeln!(s);
    for sub in &b.subscales {
        let _ = writeln!(
            s,
            "{}  score {:.3}  probability {:.3}  x weight {:.3} = {:.3}",
            sub.name, sub.score, sub.probability, sub.alpha, sub.contribution
        );
        for f in &sub.features {
            let _ = writeln!(s, "    {:<36} {:>12}  {:>8.3}", f.feature, f.value, f.points);
        }
        let _ = writeln!(s, "    {:<36} {:>12}  {:>8.3}", "(bias)", "", sub.bias);
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "bias {:.3} + contributions = score {:.3}", b.bias, b.score);
    if !b.unknown_categories.is_empty() {
        let _ = writeln!(s, "unseen categories scored as baseline: {}", b.unknown_categories.join(", "));
    }
    s
}

pub fn explanation(p: &PredictionPayload, e: &ExplanationPayload) -> String {
    let mut s = prediction(p);
    let _ = writeln!(s);
    if e.factors.is_empty() {
        let _ = writeln!(s, "No risk-increasing factors.");
    } else {
        let _ = writeln!(s, "Most important contributing factors");
        let _ = writeln!(s, "  {:<24} {:<52} {:>8}", "Subscale", "Factor", "Points");
        for f in &e.factors {
            let _ = writeln!(s, "  {:<24} {:<52} {:>8.3}", f.subscale, f.condition, f.points);
        }
    }
    if !e.protective.is_empty() {
        let _ = writeln!(s);
        let _ = writeln!(s, "Factors lowering the risk");
        for f in &e.protective {
            let _ = writeln!(s, "  {:<24} {:<52} {:>8.3}", f.subscale, f.condition, f.points);
        }
    }
    let _ = writeln!(s);
    match &e.rule {
        Some(r) => {
            let _ = writeln!(s, "{}", r.rule.text.trim_end());
        }
        None => {
            let _ = writeln!(s, "No rule shown.");
        }
    }
    if let Some(w) = &e.warning {
        let _ = writeln!(s, "Warning: {w}");
    }
    if !e.cases.is_empty() {
        let _ = writeln!(s);
        let _ = writeln!(s, "Similar cases");
        let names: Vec<&str> = e.cases[0].values.iter().map(|(n, _)| n.as_str()).collect();
        let mut header = format!("  {:>6} {:>10} {:>6}", "row", "similarity", "risk");
        if e.cases.iter().any(|c| c.true_label.is_some()) {
            header.push_str(&format!(" {:>7}", "outcome"));
        }
        for n in &names {
            header.push_str(&format!("  {n}"));
        }
        let _ = writeln!(s, "{header}");
        for c in &e.cases {
            let mut line = format!("  {:>6} {:>10} {:>6.3}", c.row, c.similarity, c.risk_prediction);
            if let Some(y) = c.true_label {
                line.push_str(&format!(" {y:>7}"));
            }
            for ((n, v), _) in c.values.iter().zip(&names) {
                line.push_str(&format!("  {v:>w$}", w = n.len()));
            }
            let _ = writeln!(s, "{line}");
        }
    }
    if e.timed_out {
        let _ = writeln!(s, "(solver time limit reached; the rule may not be optimal)");
    }
    s
}

pub fn cache_report(r: &CacheBuildReport, rules: usize, path: &Path) -> String {
    format!(
        "solved {}, infeasible {}, timed out {}, already done {}, remaining {}\n{} rules in {}\n",
        r.solved,
        r.infeasible,
        r.timeouts,
        r.already_done,
        r.remaining,
        rules,
        path.display()
    )
}
