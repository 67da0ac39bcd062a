//! Human-readable tables, line records and plot-ready belief curves.

use std::fmt::Write as _;

use gst_core::eval::EvalReport;
use gst_core::train::AblationRow;

pub fn eval_table(r: &EvalReport) -> String {
    let mut s = String::new();
    writeln!(s, "split         {}", r.split).unwrap();
    writeln!(s, "games         {}", r.games).unwrap();
    writeln!(s, "successes     {}", r.successes).unwrap();
    writeln!(s, "aborted       {}", r.aborted).unwrap();
    writeln!(s, "success rate  {:.2}%  (95% CI {:.2}–{:.2})", 100.0 * r.success_rate, 100.0 * r.ci_low, 100.0 * r.ci_high)
        .unwrap();
    writeln!(s, "error rate    {:.2}%", 100.0 * r.error_rate).unwrap();
    s
}

pub fn belief_csv(curve: &[f64]) -> String {
    let mut s = String::from("round,mean_target_belief\n");
    for (j, p) in curve.iter().enumerate() {
        writeln!(s, "{j},{p:.9}").unwrap();
    }
    s
}

pub fn ablation_table(rows: &[AblationRow]) -> String {
    let width = rows.iter().map(|r| r.label.len()).max().unwrap_or(0).max(5);
    let mut s = format!("{:width$}  {:>9}  {:>9}  per-seed success\n", "cell", "success", "val err");
    for r in rows {
        let per: Vec<String> = r.success_rates.iter().map(|x| format!("{:.2}", 100.0 * x)).collect();
        writeln!(
            s,
            "{:width$}  {:>8.2}%  {:>8.2}%  {}",
            r.label,
            100.0 * r.mean_success,
            100.0 * r.mean_val_error,
            per.join(" ")
        )
        .unwrap();
    }
    s
}

/// One JSON object per line.
pub fn jsonl<T: serde::Serialize>(items: &[T]) -> String {
    items.iter().map(|x| serde_json::to_string(x).expect("serializable") + "\n").collect()
}
