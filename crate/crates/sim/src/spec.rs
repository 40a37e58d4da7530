//! Sweep specification files.
//!
//! A spec is TOML with a `[base]` table describing one experiment point and
//! any number of `[[axis]]` entries. The run set is the cartesian product of
//! the axes, first axis outermost:
//!
//! ```toml
//! name = "demo"
//! seed = 7
//! replications = 1
//!
//! [base]
//! delays = [50.0, 80.0]
//! plr = [0.03, 0.03]
//! regime = "burst3"          # uniform | burst<N> | burst(<mean>)
//! coding = "tetrys"          # tetrys | tetrys(<k>) | fec(<k>,<n>)
//! redundancy = 0.10          # picks k for plain "tetrys"
//!
//! [[axis]]
//! name = "plr.1"             # any base key; "key.i" targets one array slot
//! values = [0.0, 0.01, 0.02]
//!
//! [[axis]]
//! name = "delays"
//! permutations_of = [50.0, 60.0, 70.0, 80.0]
//! take = 3
//! ```

use serde::Deserialize;
use tetrys_core::scheduler::LoadVector;
use tetrys_core::tetrys::k_for_redundancy;
use tetrys_core::{Coding, ExperimentConfig, FecParams, LossModel, OlsMode, PathConfig, RateMode, RepairStrategy};
use toml::{Table, Value};

#[derive(Debug, thiserror::Error)]
pub enum SpecError {
    #[error("cannot parse spec: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("unknown builtin spec `{0}`")]
    UnknownBuiltin(String),
    #[error("axis `{axis}`: {reason}")]
    Axis { axis: String, reason: String },
    #[error("{context}field `{field}`: {reason}")]
    Field { context: String, field: String, reason: String },
    #[error("{context}{reason}")]
    Point { context: String, reason: String },
}

const BUILTINS: &[(&str, &str)] = &[
    ("fig3", include_str!("../specs/fig3.toml")),
    ("fig4", include_str!("../specs/fig4.toml")),
    ("table2", include_str!("../specs/table2.toml")),
    ("table3", include_str!("../specs/table3.toml")),
    ("table4", include_str!("../specs/table4.toml")),
];

/// Names accepted by [`SweepSpec::builtin`], aliases included.
pub fn builtin_names() -> Vec<&'static str> {
    let mut names: Vec<&str> = BUILTINS.iter().map(|(n, _)| *n).collect();
    names.extend(["fig5", "fig6", "fig7", "fig8"]);
    names
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    name: Option<String>,
    #[serde(default = "default_seed")]
    seed: u64,
    #[serde(default = "default_replications")]
    replications: u32,
    #[serde(default)]
    base: Table,
    #[serde(default)]
    axis: Vec<RawAxis>,
}

fn default_seed() -> u64 {
    1
}

fn default_replications() -> u32 {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAxis {
    name: String,
    values: Option<Vec<Value>>,
    permutations_of: Option<Vec<Value>>,
    take: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub name: String,
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub name: String,
    pub seed: u64,
    pub replications: u32,
    pub base: Table,
    pub axes: Vec<Axis>,
}

/// One point of the sweep with its resolved configuration.
#[derive(Debug, Clone)]
pub struct Point {
    pub index: usize,
    /// Position along every axis, in axis order.
    pub coords: Vec<usize>,
    pub labels: Labels,
    pub config: ExperimentConfig,
}

/// Human-readable descriptors of a point, as written to the CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Labels {
    pub regime: String,
    pub coding: String,
    pub strategy: String,
    pub ols: String,
}

impl SweepSpec {
    pub fn parse(text: &str, default_name: &str) -> Result<Self, SpecError> {
        let raw: RawSpec = toml::from_str(text)?;
        let mut axes = Vec::with_capacity(raw.axis.len());
        for a in raw.axis {
            let fail = |reason: &str| SpecError::Axis { axis: a.name.clone(), reason: reason.into() };
            let values = match (a.values, a.permutations_of, a.take) {
                (Some(v), None, None) => v,
                (None, Some(items), take) => {
                    let take = take.unwrap_or(items.len());
                    if take == 0 || take > items.len() {
                        return Err(fail("`take` must be between 1 and the number of items"));
                    }
                    permutations(&items, take).into_iter().map(Value::Array).collect()
                }
                _ => return Err(fail("needs either `values` or `permutations_of` (with optional `take`)")),
            };
            if values.is_empty() {
                return Err(fail("has no values"));
            }
            axes.push(Axis { name: a.name, values });
        }
        if raw.replications == 0 {
            return Err(SpecError::Field {
                context: String::new(),
                field: "replications".into(),
                reason: "must be at least 1".into(),
            });
        }
        let spec = SweepSpec {
            name: raw.name.unwrap_or_else(|| default_name.to_string()),
            seed: raw.seed,
            replications: raw.replications,
            base: raw.base,
            axes,
        };
        // Surface every configuration error before anything runs.
        spec.points()?;
        Ok(spec)
    }

    /// Built-in reproduction spec by name (`fig5`/`fig6` alias `table3`,
    /// `fig7`/`fig8` alias `table4`).
    pub fn builtin(name: &str) -> Result<Self, SpecError> {
        let canonical = match name {
            "fig5" | "fig6" => "table3",
            "fig7" | "fig8" => "table4",
            other => other,
        };
        let (_, text) = BUILTINS
            .iter()
            .find(|(n, _)| *n == canonical)
            .ok_or_else(|| SpecError::UnknownBuiltin(name.to_string()))?;
        SweepSpec::parse(text, canonical)
    }

    /// Override a base key, e.g. a shorter `duration_s`.
    pub fn set_base(&mut self, key: &str, value: impl Into<Value>) {
        self.base.insert(key.to_string(), value.into());
    }

    /// Keep only the listed values of axis `name`.
    pub fn restrict_axis(&mut self, name: &str, keep: &[Value]) {
        if let Some(axis) = self.axes.iter_mut().find(|a| a.name == name) {
            axis.values.retain(|v| keep.contains(v));
        }
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points(&self) -> Result<Vec<Point>, SpecError> {
        let total = self.len();
        let mut out = Vec::with_capacity(total);
        for index in 0..total {
            let mut coords = vec![0; self.axes.len()];
            let mut rest = index;
            for (i, axis) in self.axes.iter().enumerate().rev() {
                coords[i] = rest % axis.values.len();
                rest /= axis.values.len();
            }
            let mut table = self.base.clone();
            for (axis, &c) in self.axes.iter().zip(&coords) {
                set_key(&mut table, &axis.name, axis.values[c].clone())
                    .map_err(|reason| SpecError::Axis { axis: axis.name.clone(), reason })?;
            }
            let context = if self.axes.is_empty() {
                String::new()
            } else {
                let parts: Vec<String> =
                    self.axes.iter().zip(&coords).map(|(a, &c)| format!("{}={}", a.name, a.values[c])).collect();
                format!("point [{}]: ", parts.join(", "))
            };
            let (config, labels) = resolve(&table, &context)?;
            out.push(Point { index, coords, labels, config });
        }
        Ok(out)
    }
}

fn permutations(items: &[Value], take: usize) -> Vec<Vec<Value>> {
    fn go(items: &[Value], take: usize, used: &mut Vec<bool>, cur: &mut Vec<Value>, out: &mut Vec<Vec<Value>>) {
        if cur.len() == take {
            out.push(cur.clone());
            return;
        }
        for i in 0..items.len() {
            if !used[i] {
                used[i] = true;
                cur.push(items[i].clone());
                go(items, take, used, cur, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(items, take, &mut vec![false; items.len()], &mut Vec::new(), &mut out);
    out
}

fn set_key(table: &mut Table, name: &str, value: Value) -> Result<(), String> {
    match name.split_once('.') {
        None => {
            table.insert(name.to_string(), value);
            Ok(())
        }
        Some((key, idx)) => {
            let idx: usize = idx.parse().map_err(|_| format!("`{idx}` is not an array index"))?;
            let arr =
                table.get_mut(key).and_then(Value::as_array_mut).ok_or_else(|| format!("base has no array `{key}`"))?;
            let len = arr.len();
            let slot = arr.get_mut(idx).ok_or_else(|| format!("index {idx} outside `{key}` of length {len}"))?;
            *slot = value;
            Ok(())
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PointFields {
    delays: Vec<f64>,
    plr: Vec<f64>,
    #[serde(default = "default_regime")]
    regime: String,
    coding: String,
    redundancy: Option<f64>,
    #[serde(default = "default_strategy")]
    strategy: String,
    fec_strategy: Option<String>,
    #[serde(default = "default_ols")]
    ols: String,
    theta: Option<f64>,
    load: Option<Vec<f64>>,
    delta_l: Option<f64>,
    rate_kbps: Option<f64>,
    packet_bytes: Option<usize>,
    payload_bytes: Option<usize>,
    deadline_ms: Option<f64>,
    ack_period_ms: Option<f64>,
    adapt_window_s: Option<f64>,
    duration_s: Option<f64>,
    rate_mode: Option<String>,
    drain: Option<bool>,
    drain_limit_ms: Option<f64>,
}

fn default_regime() -> String {
    "uniform".into()
}

fn default_strategy() -> String {
    "long".into()
}

fn default_ols() -> String {
    "original".into()
}

/// `name(args)` split into lowercase name and comma-separated arguments.
fn call(s: &str) -> (String, Vec<String>) {
    let s = s.trim().to_ascii_lowercase();
    match s.split_once('(') {
        Some((head, rest)) if rest.ends_with(')') => {
            let args =
                rest[..rest.len() - 1].split(',').map(|a| a.trim().to_string()).filter(|a| !a.is_empty()).collect();
            (head.trim().to_string(), args)
        }
        _ => (s, Vec::new()),
    }
}

fn parse_regime(s: &str) -> Result<Option<f64>, String> {
    let (head, args) = call(s);
    match (head.as_str(), args.as_slice()) {
        ("uniform", []) => Ok(None),
        ("burst", [b]) => b.parse().map(Some).map_err(|_| format!("bad burst size `{b}`")),
        (h, []) if h.starts_with("burst") => h[5..].parse().map(Some).map_err(|_| format!("unknown regime `{s}`")),
        _ => Err(format!("unknown regime `{s}` (expected uniform, burst<N> or burst(<mean>))")),
    }
}

fn parse_strategy(s: &str) -> Result<RepairStrategy, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "long" => Ok(RepairStrategy::Long),
        "short" => Ok(RepairStrategy::Short),
        "any" => Ok(RepairStrategy::Any),
        _ => Err(format!("unknown strategy `{s}` (expected long, short or any)")),
    }
}

fn strategy_label(s: RepairStrategy) -> &'static str {
    match s {
        RepairStrategy::Long => "long",
        RepairStrategy::Short => "short",
        RepairStrategy::Any => "any",
    }
}

fn parse_coding(s: &str, redundancy: Option<f64>) -> Result<Coding, String> {
    let (head, args) = call(s);
    match (head.as_str(), args.as_slice()) {
        ("fec", [k, n]) => {
            let k = k.parse().map_err(|_| format!("bad k `{k}`"))?;
            let n = n.parse().map_err(|_| format!("bad n `{n}`"))?;
            FecParams::new(k, n).map(Coding::Fec).map_err(|e| e.to_string())
        }
        ("tetrys", [k]) => {
            let k = k.trim_start_matches("k=").parse().map_err(|_| format!("bad k `{k}`"))?;
            Ok(Coding::Tetrys { k })
        }
        ("tetrys", []) => {
            let r = redundancy.ok_or("plain `tetrys` needs `redundancy` (or use tetrys(<k>))")?;
            k_for_redundancy(r).map(|k| Coding::Tetrys { k }).map_err(|e| e.to_string())
        }
        _ => Err(format!("unknown coding `{s}` (expected fec(<k>,<n>), tetrys or tetrys(<k>))")),
    }
}

fn coding_label(c: &Coding) -> String {
    match c {
        Coding::Fec(p) => format!("FEC({},{})", p.k(), p.n()),
        Coding::Tetrys { k } => format!("Tetrys(k={k})"),
    }
}

fn resolve(table: &Table, context: &str) -> Result<(ExperimentConfig, Labels), SpecError> {
    let field =
        |field: &str, reason: String| SpecError::Field { context: context.to_string(), field: field.into(), reason };
    let f: PointFields = Value::Table(table.clone()).try_into().map_err(|e: toml::de::Error| SpecError::Point {
        context: context.to_string(),
        reason: e.message().to_string(),
    })?;

    if f.delays.len() != f.plr.len() {
        return Err(field("plr", format!("has {} entries but there are {} delays", f.plr.len(), f.delays.len())));
    }
    let burst = parse_regime(&f.regime).map_err(|r| field("regime", r))?;
    let paths: Vec<PathConfig> = f
        .delays
        .iter()
        .zip(&f.plr)
        .map(|(&d, &plr)| {
            let loss = match burst {
                None => LossModel::uniform(plr),
                Some(b) => LossModel::gilbert_elliot(plr, b),
            };
            PathConfig::new(d, loss)
        })
        .collect();
    let coding = parse_coding(&f.coding, f.redundancy).map_err(|r| field("coding", r))?;
    let mut cfg = ExperimentConfig::new(paths, coding);
    cfg.strategy = parse_strategy(&f.strategy).map_err(|r| field("strategy", r))?;
    if let Some(s) = &f.fec_strategy {
        cfg.fec_repair_strategy = parse_strategy(s).map_err(|r| field("fec_strategy", r))?;
    }

    let (ols_head, ols_args) = call(&f.ols);
    cfg.ols = match (ols_head.as_str(), ols_args.as_slice()) {
        ("original", []) => OlsMode::Original,
        ("modified", []) => OlsMode::Modified { theta: f.theta.unwrap_or(tetrys_core::ols::DEFAULT_THRESHOLD) },
        ("modified", [t]) => {
            OlsMode::Modified { theta: t.parse().map_err(|_| field("ols", format!("bad threshold `{t}`")))? }
        }
        ("off", []) => {
            let load = match &f.load {
                Some(l) => LoadVector::new(l.clone()).map_err(|e| field("load", e.to_string()))?,
                None => LoadVector::uniform(cfg.paths.len()),
            };
            OlsMode::Off(load)
        }
        _ => return Err(field("ols", format!("unknown mode `{}` (expected original, modified[(θ)] or off)", f.ols))),
    };
    if let Some(v) = f.delta_l {
        cfg.delta_l = v;
    }
    if let Some(v) = f.rate_kbps {
        cfg.rate_kbps = v;
    }
    if let Some(v) = f.packet_bytes {
        cfg.packet_bytes = v;
    }
    if let Some(v) = f.payload_bytes {
        cfg.payload_bytes = v;
    }
    if let Some(v) = f.deadline_ms {
        cfg.deadline_ms = v;
    }
    if let Some(v) = f.ack_period_ms {
        cfg.ack_period_ms = v;
    }
    if let Some(v) = f.adapt_window_s {
        cfg.adapt_window_s = v;
    }
    if let Some(v) = f.duration_s {
        cfg.duration_s = v;
    }
    if let Some(v) = &f.rate_mode {
        cfg.rate_mode = match v.to_ascii_lowercase().as_str() {
            "source" => RateMode::Source,
            "wire" => RateMode::Wire,
            _ => return Err(field("rate_mode", format!("unknown rate mode `{v}` (expected source or wire)"))),
        };
    }
    if let Some(v) = f.drain {
        cfg.drain = v;
    }
    if let Some(v) = f.drain_limit_ms {
        cfg.drain_limit_ms = v;
    }
    cfg.validate().map_err(|e| SpecError::Point { context: context.to_string(), reason: e.to_string() })?;

    let ols = match &cfg.ols {
        OlsMode::Original => "original".to_string(),
        OlsMode::Modified { theta } => format!("modified({theta})"),
        OlsMode::Off(_) => "off".to_string(),
    };
    let strategy = match cfg.coding {
        Coding::Fec(_) => strategy_label(cfg.fec_repair_strategy),
        Coding::Tetrys { .. } => strategy_label(cfg.strategy),
    };
    let labels = Labels {
        regime: f.regime.trim().to_ascii_lowercase(),
        coding: coding_label(&cfg.coding),
        strategy: strategy.into(),
        ols,
    };
    Ok((cfg, labels))
}
