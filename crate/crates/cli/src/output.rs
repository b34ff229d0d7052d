//! Text formats written and read by the subcommands. Money columns use
//! 17 significant digits so values round-trip exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use gbdp::bounds::BoundReport;
use gbdp::trainer::TrainingTrace;
use gbdp::validator::ValidationSummary;
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

pub fn money(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// `trace.csv`: `i,u,l,cum_avg_l`.
pub fn trace_csv(trace: &TrainingTrace) -> String {
    trace_table(trace, "i,u,l,cum_avg_l")
}

/// `fig_converge.csv`: `i,u,l,cum_avg`.
pub fn converge_csv(trace: &TrainingTrace) -> String {
    trace_table(trace, "i,u,l,cum_avg")
}

fn trace_table(trace: &TrainingTrace, header: &str) -> String {
    let mut out = format!("{header}\n");
    for (r, avg) in trace.records.iter().zip(trace.cumulative_mean()) {
        let _ = writeln!(out, "{},{},{},{}", r.i, money(r.u), money(r.l), money(avg));
    }
    out
}

/// `validation.csv`: `k,l_v` with `k` counted from 1.
pub fn validation_csv(summary: &ValidationSummary) -> String {
    let mut out = String::from("k,l_v\n");
    for (k, v) in summary.samples.iter().enumerate() {
        let _ = writeln!(out, "{},{}", k + 1, money(*v));
    }
    out
}

pub fn read_validation_csv(path: &Path) -> CliResult<Vec<f64>> {
    let text = read_text(path)?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("k,l_v") {
        return Err(CliError::argument("validation", format!("{}: expected header `k,l_v`", path.display())));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(row, line)| {
            let bad = || CliError::argument("validation", format!("{}: bad row {}", path.display(), row + 2));
            let (k, v) = line.split_once(',').ok_or_else(bad)?;
            if k.trim().parse::<usize>().ok() != Some(row + 1) {
                return Err(bad());
            }
            v.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(bad)
        })
        .collect()
}

/// Summary record stored next to `validation.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryRecord {
    pub samples: usize,
    pub seed: u64,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub support_lo: f64,
    pub support_hi: f64,
}

impl SummaryRecord {
    pub fn new(summary: &ValidationSummary, seed: u64) -> Self {
        SummaryRecord {
            samples: summary.k(),
            seed,
            mean: summary.mean,
            std: summary.std,
            min: summary.min,
            max: summary.max,
            support_lo: summary.support_lo,
            support_hi: summary.support_hi,
        }
    }
}

/// `validation.csv` -> `validation.summary.json`.
pub fn summary_path(validation: &Path) -> PathBuf {
    let stem = validation.file_stem().map_or_else(|| "validation".into(), |s| s.to_string_lossy().into_owned());
    validation.with_file_name(format!("{stem}.summary.json"))
}

pub fn write_summary(path: &Path, record: &SummaryRecord) -> CliResult<()> {
    let text = serde_json::to_string_pretty(record).expect("summary serialises");
    write_text(path, &(text + "\n"))
}

pub fn read_summary(path: &Path) -> CliResult<SummaryRecord> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::argument("validation", format!("{}: {e}", path.display())))
}

/// Equal-width bins spanning `[min, max]`; the last bin is closed.
pub fn histogram(samples: &[f64], bins: usize) -> Vec<(f64, f64, usize)> {
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for &v in samples {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(b, c)| (lo + b as f64 * width, lo + (b + 1) as f64 * width, c))
        .collect()
}

/// `fig_hist.csv`: `bin,lo,hi,count`.
pub fn hist_csv(samples: &[f64], bins: usize) -> String {
    let mut out = String::from("bin,lo,hi,count\n");
    for (b, (lo, hi, c)) in histogram(samples, bins).into_iter().enumerate() {
        let _ = writeln!(out, "{b},{},{},{c}", money(lo), money(hi));
    }
    out
}

/// `bounds.csv`: `bound,alpha,value,params,available`; unavailable rows
/// carry an empty value and the reason in `params`.
pub fn bounds_csv(report: &BoundReport) -> String {
    let mut out = String::from("bound,alpha,value,params,available\n");
    for e in &report.entries {
        let value = e.value.map(money).unwrap_or_default();
        let mut params = e.params();
        if let Some(reason) = &e.reason {
            if !params.is_empty() {
                params.push(';');
            }
            params.push_str(&format!("reason={}", reason.replace([',', '\n'], " ")));
        }
        let _ = writeln!(out, "{},{:e},{value},{params},{}", e.kind, e.alpha, e.available());
    }
    out
}

/// `n` log-spaced levels from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// `fig_bounds.csv`: one row per level, one column per bound; `NA` marks
/// unavailable cells.
pub fn bounds_grid_csv(names: &[&str], rows: &[(f64, Vec<Option<f64>>)]) -> String {
    let mut out = format!("alpha,{}\n", names.join(","));
    for (alpha, values) in rows {
        let cells: Vec<String> = values
            .iter()
            .map(|v| v.map(money).unwrap_or_else(|| "NA".to_string()))
            .collect();
        let _ = writeln!(out, "{alpha:e},{}", cells.join(","));
    }
    out
}
