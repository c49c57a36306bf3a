use std::fmt::Write;

use super::{aligned, extract_f0, f0_metrics, mcd, snr};
use crate::dsp::SpectralConfig;
use crate::error::Result;

/// One row of the evaluation report.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub name: String,
    pub snr_db: f64,
    pub mcd_db: f64,
    pub f0_rmse_cents: Option<f64>,
    pub vuv_err_pct: f64,
}

pub fn evaluate_pair(name: &str, reference: &[f64], synth: &[f64], cfg: &SpectralConfig) -> Result<EvalRow> {
    let (r, s) = aligned(reference, synth)?;
    let f0 = f0_metrics(&extract_f0(r, cfg)?, &extract_f0(s, cfg)?)?;
    Ok(EvalRow {
        name: name.to_string(),
        snr_db: snr(r, s)?,
        mcd_db: mcd(r, s, cfg)?,
        f0_rmse_cents: f0.rmse_cents,
        vuv_err_pct: f0.vuv_error_pct,
    })
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| format!("{v:.2}"))
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Tab-separated report: header, one row per pair, a `MEAN` row, then a
/// `#` footer listing inputs that had no counterpart.
pub fn format_report(rows: &[EvalRow], unmatched: &[String]) -> String {
    let mut out = String::from("name\tsnr_db\tmcd_db\tf0_rmse_cents\tvuv_err_pct\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{}\t{:.2}\t{:.2}\t{}\t{:.2}",
            r.name,
            r.snr_db,
            r.mcd_db,
            cell(r.f0_rmse_cents),
            r.vuv_err_pct
        );
    }
    let _ = writeln!(
        out,
        "MEAN\t{}\t{}\t{}\t{}",
        cell(mean(rows.iter().map(|r| r.snr_db))),
        cell(mean(rows.iter().map(|r| r.mcd_db))),
        cell(mean(rows.iter().filter_map(|r| r.f0_rmse_cents))),
        cell(mean(rows.iter().map(|r| r.vuv_err_pct)))
    );
    if !unmatched.is_empty() {
        let _ = writeln!(out, "# warnings: {} unmatched file(s)", unmatched.len());
        for name in unmatched {
            let _ = writeln!(out, "# unmatched\t{name}");
        }
    }
    out
}
