//! Load-vector driven packet scheduler with repair placement strategies.
//!
//! Every path receives its share of the total traffic. With [`RepairStrategy::Any`]
//! one smooth weighted round-robin runs over all packets regardless of class.
//! With `Long` or `Short`, the repair fraction of the traffic is first budgeted
//! against paths in delay order (longest or shortest first, cascading when a
//! path's share is used up) and source packets fill what is left, each class
//! with its own round-robin. Per-path totals still follow the load vector.

use alloc::vec;
use alloc::vec::Vec;

const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LoadError {
    #[error("load vector is empty")]
    Empty,
    #[error("share {index} is {value}, expected a finite non-negative number")]
    BadShare { index: usize, value: f64 },
    #[error("shares sum to {0}, expected 1")]
    Sum(f64),
    #[error("load vector has {got} shares for {expected} paths")]
    Width { expected: usize, got: usize },
}

/// Normalized per-path traffic shares.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "Vec<f64>", into = "Vec<f64>"))]
pub struct LoadVector(Vec<f64>);

impl LoadVector {
    pub fn new(shares: Vec<f64>) -> Result<Self, LoadError> {
        if shares.is_empty() {
            return Err(LoadError::Empty);
        }
        for (index, &value) in shares.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(LoadError::BadShare { index, value });
            }
        }
        let sum: f64 = shares.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(LoadError::Sum(sum));
        }
        Ok(LoadVector(shares))
    }

    /// Equal split over `n` paths (`n >= 1`).
    pub fn uniform(n: usize) -> Self {
        assert!(n >= 1, "at least one path");
        LoadVector(vec![1.0 / n as f64; n])
    }

    /// Scale non-negative weights to sum 1; `None` if they are all zero.
    pub fn normalized(weights: &[f64]) -> Option<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) || weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return None;
        }
        Some(LoadVector(weights.iter().map(|w| w / sum).collect()))
    }

    pub fn shares(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for LoadVector {
    type Error = LoadError;
    fn try_from(v: Vec<f64>) -> Result<Self, LoadError> {
        LoadVector::new(v)
    }
}

impl From<LoadVector> for Vec<f64> {
    fn from(v: LoadVector) -> Vec<f64> {
        v.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum RepairStrategy {
    /// Repairs fill the longest-delay paths first.
    Long,
    /// Repairs fill the shortest-delay paths first.
    Short,
    /// Repairs are scheduled like any other packet.
    #[default]
    Any,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PacketClass {
    Source,
    Repair,
}

/// Smooth weighted round-robin: every pick credits each path with its
/// weight, takes the largest credit and charges it the total weight.
#[derive(Debug, Clone)]
struct Swrr {
    credit: Vec<f64>,
}

impl Swrr {
    fn new(n: usize) -> Self {
        Swrr { credit: vec![0.0; n] }
    }
}

#[derive(Debug, Clone)]
pub struct Scheduler {
    delays: Vec<f64>,
    load: LoadVector,
    strategy: RepairStrategy,
    repair_fraction: f64,
    total: Swrr,
    sources: Swrr,
    repairs: Swrr,
    source_weights: Vec<f64>,
    repair_weights: Vec<f64>,
    sent: Vec<[u64; 2]>,
}

impl Scheduler {
    /// `delays` orders paths for the Long/Short strategies; `repair_fraction`
    /// is the expected share of repair packets in the stream.
    pub fn new(delays: Vec<f64>, strategy: RepairStrategy, repair_fraction: f64) -> Self {
        let n = delays.len();
        let mut s = Scheduler {
            load: LoadVector::uniform(n),
            delays,
            strategy,
            repair_fraction: repair_fraction.clamp(0.0, 1.0),
            total: Swrr::new(n),
            sources: Swrr::new(n),
            repairs: Swrr::new(n),
            source_weights: Vec::new(),
            repair_weights: Vec::new(),
            sent: vec![[0; 2]; n],
        };
        s.recompute();
        s
    }

    pub fn load(&self) -> &LoadVector {
        &self.load
    }

    pub fn strategy(&self) -> RepairStrategy {
        self.strategy
    }

    pub fn num_paths(&self) -> usize {
        self.delays.len()
    }

    /// Packets assigned to `path`, by class.
    pub fn sent(&self, path: usize, class: PacketClass) -> u64 {
        self.sent[path][class as usize]
    }

    pub fn sent_total(&self, path: usize) -> u64 {
        self.sent[path][0] + self.sent[path][1]
    }

    /// Paths in repair preference order: by delay, ties by lowest index.
    pub fn repair_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.delays.len()).collect();
        match self.strategy {
            RepairStrategy::Long => order.sort_by(|&a, &b| self.delays[b].total_cmp(&self.delays[a]).then(a.cmp(&b))),
            RepairStrategy::Short => order.sort_by(|&a, &b| self.delays[a].total_cmp(&self.delays[b]).then(a.cmp(&b))),
            RepairStrategy::Any => {}
        }
        order
    }

    /// Per-class weights for the current load: `(source, repair)`.
    pub fn class_weights(&self) -> (&[f64], &[f64]) {
        (&self.source_weights, &self.repair_weights)
    }

    fn recompute(&mut self) {
        let n = self.delays.len();
        let shares = self.load.shares();
        let f = self.repair_fraction;
        let mut repair = vec![0.0; n];
        let mut remaining = f;
        for i in self.repair_order() {
            let take = shares[i].min(remaining);
            repair[i] = take;
            remaining -= take;
        }
        self.repair_weights = if f > 0.0 { repair.iter().map(|r| r / f).collect() } else { shares.to_vec() };
        self.source_weights = if f < 1.0 {
            shares.iter().zip(&repair).map(|(s, r)| ((s - r) / (1.0 - f)).max(0.0)).collect()
        } else {
            shares.to_vec()
        };
    }

    pub fn assign(&mut self, class: PacketClass) -> usize {
        let path = match (self.strategy, class) {
            (RepairStrategy::Any, _) => pick(&mut self.total, self.load.shares()),
            (_, PacketClass::Source) => pick(&mut self.sources, &self.source_weights),
            (_, PacketClass::Repair) => pick(&mut self.repairs, &self.repair_weights),
        };
        self.sent[path][class as usize] += 1;
        path
    }

    /// Install a new load vector. Malformed vectors are rejected and the
    /// previous one stays in effect.
    pub fn apply_feedback(&mut self, load: &[f64]) -> Result<(), LoadError> {
        if load.len() != self.delays.len() {
            return Err(LoadError::Width { expected: self.delays.len(), got: load.len() });
        }
        let load = LoadVector::new(load.to_vec())?;
        if load != self.load {
            self.load = load;
            self.recompute();
        }
        Ok(())
    }
}

fn pick(rr: &mut Swrr, weights: &[f64]) -> usize {
    let mut best = 0;
    let mut best_credit = f64::NEG_INFINITY;
    let mut total = 0.0;
    for (i, (c, &w)) in rr.credit.iter_mut().zip(weights).enumerate() {
        *c += w;
        total += w;
        if w > 0.0 && *c > best_credit {
            best = i;
            best_credit = *c;
        }
    }
    rr.credit[best] -= total;
    best
}
