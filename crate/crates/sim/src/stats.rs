//! Aggregation of result rows into mean ± sample standard deviation.

use std::io::Read;

use anyhow::{bail, Context};
use serde::Serialize;

use crate::sweep::ResultRow;

/// Columns that identify a group. Delays, seeds and replicates are averaged
/// over; anything else that varies separates groups.
pub const KEY_COLUMNS: &[&str] =
    &["spec", "regime", "coding", "strategy", "ols", "deadline_ms", "plr", "duration_s", "adapt_window_s", "rate_mode"];
const REQUIRED: &[&str] = &["regime", "coding", "info_loss_pct"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub spec: String,
    pub regime: String,
    pub coding: String,
    pub strategy: String,
    pub ols: String,
    pub deadline_ms: String,
    pub plr: String,
    pub duration_s: String,
    pub adapt_window_s: String,
    pub rate_mode: String,
    pub runs: usize,
    pub mean_info_loss_pct: f64,
    pub std_info_loss_pct: f64,
}

impl GroupSummary {
    pub fn key(&self, column: &str) -> &str {
        match column {
            "spec" => &self.spec,
            "regime" => &self.regime,
            "coding" => &self.coding,
            "strategy" => &self.strategy,
            "ols" => &self.ols,
            "deadline_ms" => &self.deadline_ms,
            "plr" => &self.plr,
            "duration_s" => &self.duration_s,
            "adapt_window_s" => &self.adapt_window_s,
            "rate_mode" => &self.rate_mode,
            _ => "",
        }
    }
}

/// Mean and sample (n - 1) standard deviation; 0 for a single value.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Group a results CSV. Groups appear in order of first occurrence.
pub fn summarize_csv<R: Read>(input: R) -> anyhow::Result<Vec<GroupSummary>> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers().context("reading CSV header")?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let missing: Vec<&str> = REQUIRED.iter().copied().filter(|c| col(c).is_none()).collect();
    if !missing.is_empty() {
        bail!(
            "CSV lacks required column(s): {} (found: {})",
            missing.join(", "),
            headers.iter().collect::<Vec<_>>().join(", ")
        );
    }
    let key_idx: Vec<Option<usize>> = KEY_COLUMNS.iter().map(|c| col(c)).collect();
    let loss_idx = col("info_loss_pct").unwrap_or_default();

    let mut keys: Vec<Vec<String>> = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.with_context(|| format!("reading CSV record {}", line + 1))?;
        let key: Vec<String> = key_idx.iter().map(|i| i.and_then(|i| rec.get(i)).unwrap_or("").to_string()).collect();
        let raw = rec.get(loss_idx).unwrap_or("");
        let v: f64 =
            raw.parse().with_context(|| format!("record {}: info_loss_pct `{raw}` is not a number", line + 1))?;
        match keys.iter().position(|k| *k == key) {
            Some(i) => values[i].push(v),
            None => {
                keys.push(key);
                values.push(vec![v]);
            }
        }
    }
    Ok(keys
        .into_iter()
        .zip(values)
        .map(|(k, v)| {
            let (mean, std) = mean_std(&v);
            let mut k = k.into_iter();
            let mut next = || k.next().unwrap_or_default();
            GroupSummary {
                spec: next(),
                regime: next(),
                coding: next(),
                strategy: next(),
                ols: next(),
                deadline_ms: next(),
                plr: next(),
                duration_s: next(),
                adapt_window_s: next(),
                rate_mode: next(),
                runs: v.len(),
                mean_info_loss_pct: mean,
                std_info_loss_pct: std,
            }
        })
        .collect())
}

/// Same grouping as [`summarize_csv`], straight from rows.
pub fn group_rows(rows: &[ResultRow]) -> Vec<GroupSummary> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory CSV write");
    }
    let bytes = w.into_inner().expect("in-memory CSV flush");
    summarize_csv(bytes.as_slice()).expect("rows produce a well-formed CSV")
}

fn distinct<'a>(groups: &'a [GroupSummary], column: &str) -> Vec<&'a str> {
    let mut out: Vec<&str> = Vec::new();
    for g in groups {
        let v = g.key(column);
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

fn cell(g: &GroupSummary) -> String {
    format!("{:.4}% ± {:.4}", g.mean_info_loss_pct, g.std_info_loss_pct)
}

/// Plain-text table. Columns pivot on `ols` when it varies (with/without
/// threshold), otherwise on the loss regime.
pub fn render_table(groups: &[GroupSummary]) -> String {
    let pivot = ["ols", "regime"].into_iter().find(|c| distinct(groups, c).len() > 1);
    let label_cols: Vec<&str> = KEY_COLUMNS
        .iter()
        .copied()
        .filter(|c| Some(*c) != pivot)
        .filter(|c| *c == "coding" || distinct(groups, c).len() > 1)
        .collect();
    let pivot_vals = pivot.map(|p| distinct(groups, p)).unwrap_or_else(|| vec![""]);

    let mut header: Vec<String> = label_cols.iter().map(|c| c.to_string()).collect();
    header.extend(pivot_vals.iter().map(|v| if v.is_empty() { "info loss".to_string() } else { v.to_string() }));
    let mut lines: Vec<Vec<String>> = vec![header];
    let mut seen: Vec<Vec<&str>> = Vec::new();
    for g in groups {
        let label: Vec<&str> = label_cols.iter().map(|c| g.key(c)).collect();
        if seen.contains(&label) {
            continue;
        }
        let mut line: Vec<String> = label.iter().map(|s| s.to_string()).collect();
        for pv in &pivot_vals {
            let hit = groups
                .iter()
                .find(|h| label_cols.iter().all(|c| h.key(c) == g.key(c)) && pivot.is_none_or(|p| h.key(p) == *pv));
            line.push(hit.map(cell).unwrap_or_else(|| "-".into()));
        }
        seen.push(label);
        lines.push(line);
    }

    let widths: Vec<usize> =
        (0..lines[0].len()).map(|i| lines.iter().map(|l| l[i].chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for (n, l) in lines.iter().enumerate() {
        let cells: Vec<String> = l.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
        if n == 0 {
            out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
            out.push('\n');
        }
    }
    out
}
