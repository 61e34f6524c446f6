use std::path::Path;

use anyhow::{Context, Result};
use unlearn_core::eval::MetricsReport;

pub const CSV_FILE: &str = "compare.csv";

const HEADER: [&str; 7] = ["method", "acc_f", "acc_r", "acc_ft", "acc_rt", "h_mean", "mia"];

fn metrics(r: &MetricsReport) -> [f64; 6] {
    [r.acc_f, r.acc_r, r.acc_ft, r.acc_rt, r.h_mean, r.mia]
}

/// Fixed-width table for the terminal.
pub fn table(reports: &[MetricsReport]) -> String {
    let width = reports.iter().map(|r| r.method.len()).max().unwrap_or(0).max(6);
    let mut out = format!(
        "{:<width$}  {:>7}  {:>7}  {:>7}  {:>7}  {:>7}  {:>7}\n",
        "Method", "Acc_f", "Acc_r", "Acc_ft", "Acc_rt", "H-Mean", "MIA"
    );
    for r in reports {
        out.push_str(&format!("{:<width$}", r.method));
        for x in metrics(r) {
            out.push_str(&format!("  {x:>7.2}"));
        }
        out.push('\n');
    }
    out
}

/// Writes one row per report. Floats use Rust's shortest round-trip
/// formatting, so parsing the CSV recovers the report values exactly.
pub fn write_csv(reports: &[MetricsReport], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(HEADER)?;
    for r in reports {
        let mut row = vec![r.method.clone()];
        row.extend(metrics(r).iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Describes reports whose dataset or original model differ from the first.
pub fn mismatches(reports: &[MetricsReport]) -> Vec<String> {
    let Some(first) = reports.first() else { return Vec::new() };
    let mut out = Vec::new();
    for r in &reports[1..] {
        if r.fingerprints.dataset != first.fingerprints.dataset {
            out.push(format!(
                "{} was evaluated on dataset {}, {} on {}",
                r.method, r.fingerprints.dataset, first.method, first.fingerprints.dataset
            ));
        }
        if r.fingerprints.original != first.fingerprints.original {
            out.push(format!(
                "{} starts from original {}, {} from {}",
                r.method, r.fingerprints.original, first.method, first.fingerprints.original
            ));
        }
    }
    out
}
