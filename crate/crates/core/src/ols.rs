//! Receiver-side online load splitting.
//!
//! Once per adapt window the receiver feeds the window's measurements to
//! [`OlsState`], which hill-climbs on the load vector:
//!
//! 1. start from [`asymptotic_optimal`] and sort paths by increasing loss;
//! 2. pick the first path and keep adding `delta_l` to its share, taking the
//!    same amount from the other paths in proportion to their loss rates;
//! 3. as soon as the information loss rate rises compared to the previous
//!    window, revert the last increase, drop the path from the list and move
//!    to the next one;
//! 4. when the list is exhausted, re-sort and start over.
//!
//! The modified variant additionally watches the per-path loss rates: if any
//! of them moved by more than `threshold` since the previous window, it stops
//! probing the current path and re-sorts right away.

use alloc::vec;
use alloc::vec::Vec;

use crate::scheduler::LoadVector;

pub const DEFAULT_DELTA_L: f64 = 0.03;
pub const DEFAULT_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OlsParams {
    pub delta_l: f64,
    /// `Some(theta)` selects the modified algorithm.
    pub threshold: Option<f64>,
}

impl OlsParams {
    pub fn original() -> Self {
        OlsParams { delta_l: DEFAULT_DELTA_L, threshold: None }
    }

    pub fn modified(theta: f64) -> Self {
        OlsParams { delta_l: DEFAULT_DELTA_L, threshold: Some(theta) }
    }
}

impl Default for OlsParams {
    fn default() -> Self {
        OlsParams::original()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum OlsPhase {
    /// No measurement seen yet.
    Init,
    /// The chosen path's share was just increased.
    Probing,
    /// A path was just reverted (or the optimum just installed); the next
    /// window starts probing the next path.
    Reverting,
}

/// What the receiver observed during one adapt window.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WindowMeasurement {
    /// Loss rate per path; `None` when nothing was sent on the path.
    pub path_loss: Vec<Option<f64>>,
    /// Fraction of source data that missed its deadline in this window.
    pub info_loss: f64,
}

/// Uniform split used before the first feedback.
pub fn bootstrap(num_paths: usize) -> LoadVector {
    LoadVector::uniform(num_paths)
}

/// Starting split: shares proportional to `1 - loss`. Falls back to the
/// uniform split when every path loses everything.
pub fn asymptotic_optimal(losses: &[f64]) -> LoadVector {
    let survival: Vec<f64> = losses.iter().map(|l| (1.0 - l).clamp(0.0, 1.0)).collect();
    LoadVector::normalized(&survival).unwrap_or_else(|| LoadVector::uniform(losses.len()))
}

#[derive(Debug, Clone)]
pub struct OlsState {
    params: OlsParams,
    phase: OlsPhase,
    /// Paths still to probe in this round, best first.
    path_order: Vec<usize>,
    last_load: LoadVector,
    /// Load in effect before the most recent increase.
    best_load: LoadVector,
    last_info_loss: Option<f64>,
    loss_now: Vec<f64>,
    loss_prev: Vec<f64>,
    measured: usize,
    window: u64,
}

impl OlsState {
    pub fn new(num_paths: usize, params: OlsParams) -> Self {
        let load = bootstrap(num_paths);
        OlsState {
            params,
            phase: OlsPhase::Init,
            path_order: Vec::new(),
            last_load: load.clone(),
            best_load: load,
            last_info_loss: None,
            loss_now: vec![0.0; num_paths],
            loss_prev: vec![0.0; num_paths],
            measured: 0,
            window: 0,
        }
    }

    pub fn params(&self) -> &OlsParams {
        &self.params
    }

    pub fn phase(&self) -> OlsPhase {
        self.phase
    }

    pub fn path_order(&self) -> &[usize] {
        &self.path_order
    }

    pub fn current_path(&self) -> Option<usize> {
        self.path_order.first().copied()
    }

    pub fn load(&self) -> &LoadVector {
        &self.last_load
    }

    pub fn best_load(&self) -> &LoadVector {
        &self.best_load
    }

    pub fn last_info_loss(&self) -> Option<f64> {
        self.last_info_loss
    }

    /// Per-path loss rates (current, previous window), carried forward for
    /// paths that were idle.
    pub fn loss_rates(&self) -> (&[f64], &[f64]) {
        (&self.loss_now, &self.loss_prev)
    }

    /// Number of windows processed so far.
    pub fn window_index(&self) -> u64 {
        self.window
    }

    /// Advance by one adapt window using the configured variant.
    pub fn step(&mut self, meas: &WindowMeasurement) -> LoadVector {
        let threshold = self.params.threshold;
        self.advance(meas, threshold)
    }

    fn advance(&mut self, meas: &WindowMeasurement, threshold: Option<f64>) -> LoadVector {
        assert_eq!(meas.path_loss.len(), self.loss_now.len(), "measurement width");
        self.loss_prev.clone_from(&self.loss_now);
        for (now, m) in self.loss_now.iter_mut().zip(&meas.path_loss) {
            if let Some(l) = m {
                *now = l.clamp(0.0, 1.0);
            }
        }
        self.measured += 1;
        self.window += 1;
        let info = meas.info_loss.clamp(0.0, 1.0);

        let load = match self.phase {
            OlsPhase::Init => {
                let load = asymptotic_optimal(&self.loss_now);
                self.best_load = load.clone();
                self.sort_paths();
                self.phase = OlsPhase::Reverting;
                load
            }
            OlsPhase::Reverting => self.probe(threshold),
            OlsPhase::Probing => {
                let increased = self.last_info_loss.is_some_and(|prev| info > prev);
                if increased {
                    self.path_order.remove(0);
                    if self.path_order.is_empty() {
                        self.sort_paths();
                    }
                    self.phase = OlsPhase::Reverting;
                    self.best_load.clone()
                } else {
                    self.probe(threshold)
                }
            }
        };
        self.last_info_loss = Some(info);
        self.last_load = load.clone();
        load
    }

    fn loss_moved(&self, theta: f64) -> bool {
        self.measured >= 2 && self.loss_now.iter().zip(&self.loss_prev).any(|(a, b)| (a - b).abs() > theta)
    }

    /// One inner-loop iteration: optional threshold check, then increase the
    /// chosen path.
    fn probe(&mut self, threshold: Option<f64>) -> LoadVector {
        if threshold.is_some_and(|theta| self.loss_moved(theta)) {
            self.sort_paths();
        }
        // A saturated path cannot take more load; treat it as done.
        for _ in 0..=self.loss_now.len() {
            if self.path_order.is_empty() {
                self.sort_paths();
            }
            let chosen = self.path_order[0];
            if let Some(next) = self.increase(chosen) {
                self.best_load = self.last_load.clone();
                self.phase = OlsPhase::Probing;
                return next;
            }
            self.path_order.remove(0);
        }
        self.phase = OlsPhase::Reverting;
        self.last_load.clone()
    }

    fn sort_paths(&mut self) {
        let mut order: Vec<usize> = (0..self.loss_now.len()).collect();
        order.sort_by(|&a, &b| self.loss_now[a].total_cmp(&self.loss_now[b]).then(a.cmp(&b)));
        self.path_order = order;
    }

    /// Load after moving up to `delta_l` onto `chosen`, or `None` if the path
    /// already carries everything.
    fn increase(&self, chosen: usize) -> Option<LoadVector> {
        let mut shares = self.last_load.shares().to_vec();
        let n = shares.len();
        let inc = self.params.delta_l.min(1.0 - shares[chosen]);
        if n < 2 || inc <= 1e-12 {
            return None;
        }
        shares[chosen] += inc;

        let others: Vec<usize> = (0..n).filter(|&j| j != chosen).collect();
        let loss_sum: f64 = others.iter().map(|&j| self.loss_now[j]).sum();
        for &j in &others {
            let part = if loss_sum > 0.0 { self.loss_now[j] / loss_sum } else { 1.0 / others.len() as f64 };
            shares[j] -= inc * part;
        }

        // Shares pushed below zero are clipped and the shortfall is taken
        // from the largest remaining share.
        let mut deficit = 0.0;
        for &j in &others {
            if shares[j] < 0.0 {
                deficit -= shares[j];
                shares[j] = 0.0;
            }
        }
        while deficit > 1e-15 {
            let Some(&big) = others
                .iter()
                .filter(|&&j| shares[j] > 0.0)
                .max_by(|&&a, &&b| shares[a].total_cmp(&shares[b]).then(b.cmp(&a)))
            else {
                break;
            };
            let take = deficit.min(shares[big]);
            shares[big] -= take;
            deficit -= take;
        }
        LoadVector::normalized(&shares)
    }
}

/// Original algorithm: hill-climb without the loss-change threshold.
pub fn ols_step(state: &mut OlsState, meas: &WindowMeasurement) -> LoadVector {
    state.advance(meas, None)
}

/// Modified algorithm with threshold `theta` on per-path loss changes.
pub fn ols_step_modified(state: &mut OlsState, meas: &WindowMeasurement, theta: f64) -> LoadVector {
    state.advance(meas, Some(theta))
}
