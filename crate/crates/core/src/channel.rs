//! Per-path loss and delay.
//!
//! A path has a constant one-way propagation delay and a loss process. The
//! Gilbert-Elliot process used here loses every packet in the bad state and
//! none in the good state, so the two observables (average loss rate and
//! mean loss-run length) fix both transition probabilities:
//! `r = 1 / mean_burst` (bad to good) and `p = r * plr / (1 - plr)`
//! (good to bad).

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum ChannelError {
    #[error("packet loss rate {0} outside [0, 1)")]
    Plr(f64),
    #[error("mean burst size {0} must be >= 1")]
    MeanBurst(f64),
    #[error("loss rate {plr} with mean burst {mean_burst} needs a good-to-bad probability above 1")]
    Infeasible { plr: f64, mean_burst: f64 },
    #[error("propagation delay {0} ms must be positive")]
    Delay(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum LossKind {
    Uniform,
    GilbertElliot { mean_burst: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossModel {
    pub kind: LossKind,
    pub plr: f64,
}

impl LossModel {
    pub fn uniform(plr: f64) -> Self {
        LossModel { kind: LossKind::Uniform, plr }
    }

    pub fn gilbert_elliot(plr: f64, mean_burst: f64) -> Self {
        LossModel { kind: LossKind::GilbertElliot { mean_burst }, plr }
    }

    pub fn lossless() -> Self {
        LossModel::uniform(0.0)
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(0.0..1.0).contains(&self.plr) {
            return Err(ChannelError::Plr(self.plr));
        }
        if let LossKind::GilbertElliot { mean_burst } = self.kind {
            if !(mean_burst >= 1.0) {
                return Err(ChannelError::MeanBurst(mean_burst));
            }
            let (p, _) = ge_transitions(self.plr, mean_burst);
            if p > 1.0 {
                return Err(ChannelError::Infeasible { plr: self.plr, mean_burst });
            }
        }
        Ok(())
    }

    /// Mean burst size, 1 for uniform losses.
    pub fn mean_burst(&self) -> f64 {
        match self.kind {
            LossKind::Uniform => 1.0,
            LossKind::GilbertElliot { mean_burst } => mean_burst,
        }
    }
}

/// `(p, r)`: good-to-bad and bad-to-good transition probabilities.
pub fn ge_transitions(plr: f64, mean_burst: f64) -> (f64, f64) {
    let r = 1.0 / mean_burst;
    (r * plr / (1.0 - plr), r)
}

/// Stateful loss process driven by its own seeded generator.
#[derive(Debug, Clone)]
pub struct LossProcess {
    model: LossModel,
    rng: ChaCha8Rng,
    bad: bool,
    p: f64,
    r: f64,
}

#[inline]
fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

impl LossProcess {
    pub fn new(model: LossModel, seed: u64) -> Result<Self, ChannelError> {
        model.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (p, r) = match model.kind {
            LossKind::Uniform => (model.plr, 1.0 - model.plr),
            LossKind::GilbertElliot { mean_burst } => ge_transitions(model.plr, mean_burst),
        };
        // Start from the stationary distribution.
        let bad = model.plr > 0.0 && unit(&mut rng) < model.plr;
        Ok(LossProcess { model, rng, bad, p, r })
    }

    pub fn model(&self) -> &LossModel {
        &self.model
    }

    /// Fate of the next packet; `true` means lost.
    #[inline]
    pub fn next_lost(&mut self) -> bool {
        if self.model.plr <= 0.0 {
            return false;
        }
        match self.model.kind {
            LossKind::Uniform => unit(&mut self.rng) < self.model.plr,
            LossKind::GilbertElliot { .. } => {
                let lost = self.bad;
                let u = unit(&mut self.rng);
                self.bad = if self.bad { u >= self.r } else { u < self.p };
                lost
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PathConfig {
    pub prop_delay_ms: f64,
    pub loss: LossModel,
}

impl PathConfig {
    pub fn new(prop_delay_ms: f64, loss: LossModel) -> Self {
        PathConfig { prop_delay_ms, loss }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.prop_delay_ms > 0.0) || !self.prop_delay_ms.is_finite() {
            return Err(ChannelError::Delay(self.prop_delay_ms));
        }
        self.loss.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transmission {
    Delivered { arrival: f64 },
    Lost,
}

/// One direction of a path: fixed delay plus its own loss process.
#[derive(Debug, Clone)]
pub struct Path {
    config: PathConfig,
    loss: LossProcess,
}

impl Path {
    pub fn new(config: PathConfig, seed: u64) -> Result<Self, ChannelError> {
        config.validate()?;
        Ok(Path { config, loss: LossProcess::new(config.loss, seed)? })
    }

    pub fn config(&self) -> &PathConfig {
        &self.config
    }

    pub fn delay(&self) -> f64 {
        self.config.prop_delay_ms
    }

    pub fn transmit(&mut self, now: f64) -> Transmission {
        if self.loss.next_lost() {
            Transmission::Lost
        } else {
            Transmission::Delivered { arrival: now + self.config.prop_delay_ms }
        }
    }
}
