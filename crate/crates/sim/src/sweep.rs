//! Sweep execution and CSV output.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tetrys_core::sim::{run_with_trace, TraceEvent};
use tetrys_core::{run, MetricsLedger};

use crate::spec::{Point, SweepSpec};
use crate::stats::{group_rows, GroupSummary};

/// One CSV line: the configuration of a run and what it measured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub spec: String,
    pub point: usize,
    pub replicate: u32,
    pub seed: u64,
    pub regime: String,
    pub coding: String,
    pub strategy: String,
    pub ols: String,
    pub deadline_ms: f64,
    pub delays_ms: String,
    pub plr: String,
    pub duration_s: f64,
    pub adapt_window_s: f64,
    pub rate_mode: String,
    pub sources_sent: u64,
    pub delivered_on_time: u64,
    pub recovered_on_time: u64,
    pub late: u64,
    pub unrecovered: u64,
    pub repairs_sent: u64,
    pub acks_sent: u64,
    pub acks_lost: u64,
    pub max_window: u64,
    pub payload_mismatches: u64,
    pub info_loss_pct: f64,
    pub path_loss_pct: String,
    pub path_traffic_pct: String,
}

/// Wall-clock cost of one run, kept apart so result files stay reproducible.
#[derive(Debug, Clone, Serialize)]
pub struct TimingRow {
    pub spec: String,
    pub point: usize,
    pub replicate: u32,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    /// Override the spec's base seed.
    pub seed: Option<u64>,
    /// Directory for per-run JSON-lines traces.
    pub trace_dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub rows: Vec<ResultRow>,
    pub timings: Vec<TimingRow>,
}

impl SweepOutput {
    pub fn summary(&self) -> Vec<GroupSummary> {
        group_rows(&self.rows)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of run `run_index`, distinct for every run of a sweep.
pub fn derive_seed(base: u64, run_index: u64) -> u64 {
    splitmix64(splitmix64(base) ^ run_index)
}

fn join<T: ToString>(xs: impl IntoIterator<Item = T>) -> String {
    xs.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join("/")
}

fn pct(x: f64) -> f64 {
    // Rounded so the CSV stays short and stable.
    (x * 100.0 * 1e9).round() / 1e9
}

fn row(spec: &str, p: &Point, replicate: u32, seed: u64, m: &MetricsLedger) -> ResultRow {
    let cfg = &p.config;
    let total: u64 = m.paths.iter().map(|c| c.sent()).sum();
    ResultRow {
        spec: spec.to_string(),
        point: p.index,
        replicate,
        seed,
        regime: p.labels.regime.clone(),
        coding: p.labels.coding.clone(),
        strategy: p.labels.strategy.clone(),
        ols: p.labels.ols.clone(),
        deadline_ms: cfg.deadline_ms,
        delays_ms: join(cfg.paths.iter().map(|p| p.prop_delay_ms)),
        plr: join(cfg.paths.iter().map(|p| p.loss.plr)),
        duration_s: cfg.duration_s,
        adapt_window_s: cfg.adapt_window_s,
        rate_mode: format!("{:?}", cfg.rate_mode).to_ascii_lowercase(),
        sources_sent: m.sources_sent,
        delivered_on_time: m.delivered_on_time,
        recovered_on_time: m.recovered_on_time,
        late: m.late,
        unrecovered: m.unrecovered,
        repairs_sent: m.repairs_sent,
        acks_sent: m.acks_sent,
        acks_lost: m.acks_lost,
        max_window: m.max_window,
        payload_mismatches: m.payload_mismatches,
        info_loss_pct: pct(m.information_loss_rate()),
        path_loss_pct: join(m.path_loss_rates().into_iter().map(pct)),
        path_traffic_pct: join(
            m.paths.iter().map(|c| if total == 0 { 0.0 } else { pct(c.sent() as f64 / total as f64) }),
        ),
    }
}

fn run_one(
    spec: &str,
    p: &Point,
    replicate: u32,
    seed: u64,
    trace_dir: Option<&Path>,
) -> anyhow::Result<(ResultRow, TimingRow)> {
    let mut cfg = p.config.clone();
    cfg.seed = seed;
    let start = Instant::now();
    let ledger = match trace_dir {
        None => run(&cfg)?,
        Some(dir) => {
            let path = dir.join(format!("{spec}_{:04}_{replicate}.jsonl", p.index));
            let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            let mut out = BufWriter::new(file);
            let mut failed = None;
            let ledger = run_with_trace(&cfg, &mut |ev: &TraceEvent| {
                if failed.is_none() {
                    if let Err(e) = serde_json::to_writer(&mut out, ev)
                        .map_err(anyhow::Error::from)
                        .and_then(|_| Ok(out.write_all(b"\n")?))
                    {
                        failed = Some(e);
                    }
                }
            })?;
            if let Some(e) = failed {
                return Err(e.context(format!("writing {}", path.display())));
            }
            out.flush()?;
            ledger
        }
    };
    let wall_ms = start.elapsed().as_secs_f64() * 1000.0;
    Ok((
        row(spec, p, replicate, seed, &ledger),
        TimingRow { spec: spec.to_string(), point: p.index, replicate, wall_ms },
    ))
}

/// Run every point of `spec` `replications` times. Rows come back in point
/// order, then replicate order, whatever the scheduling.
pub fn run_sweep(spec: &SweepSpec, opts: &RunOptions) -> anyhow::Result<SweepOutput> {
    let points = spec.points()?;
    let base_seed = opts.seed.unwrap_or(spec.seed);
    let reps = spec.replications;
    let jobs: Vec<(usize, u32)> = (0..points.len()).flat_map(|p| (0..reps).map(move |r| (p, r))).collect();
    if let Some(dir) = &opts.trace_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }

    let work = || -> anyhow::Result<Vec<(ResultRow, TimingRow)>> {
        jobs.par_iter()
            .map(|&(p, r)| {
                let seed = derive_seed(base_seed, p as u64 * reps as u64 + r as u64);
                run_one(&spec.name, &points[p], r, seed, opts.trace_dir.as_deref())
            })
            .collect()
    };
    let mut results = match opts.workers {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(work)?,
        None => work()?,
    };
    results.sort_by_key(|(r, _)| (r.point, r.replicate));
    let (rows, timings) = results.into_iter().unzip();
    Ok(SweepOutput { rows, timings })
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Write `<name>.csv`, `<name>_summary.csv` and `<name>_timing.csv` into
/// `dir`; returns the result file path.
pub fn write_outputs(dir: &Path, name: &str, out: &SweepOutput) -> anyhow::Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let results = dir.join(format!("{name}.csv"));
    write_csv(&results, &out.rows)?;
    write_csv(&dir.join(format!("{name}_summary.csv")), &out.summary())?;
    write_csv(&dir.join(format!("{name}_timing.csv")), &out.timings)?;
    Ok(results)
}
