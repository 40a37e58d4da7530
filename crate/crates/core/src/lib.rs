//! Erasure coding and multipath scheduling for real-time streaming.
//!
//! The crate compares on-the-fly convolutional coding against systematic block
//! FEC when a live stream is split over several lossy paths of unequal delay:
//!
//! - [`gf`]: GF(2^8) arithmetic and the dense solver shared by both decoders.
//! - [`fec`]: systematic MDS block code FEC(k, n).
//! - [`tetrys`]: elastic-window encoder, online decoder and cumulative ACKs.
//! - [`channel`]: Bernoulli and Gilbert-Elliot loss with fixed path delay.
//! - [`scheduler`]: load-vector scheduler with Long/Short/Any repair placement.
//! - [`ols`]: online load splitting, with and without the loss-change threshold.
//! - [`sim`]: the discrete-event engine producing a [`sim::MetricsLedger`].
//!
//! Everything is `no_std` (with `alloc`) and deterministic for a given seed.

#![no_std]
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::suspicious_arithmetic_impl,
    clippy::suspicious_op_assign_impl,
    clippy::needless_range_loop
)]

extern crate alloc;

pub mod channel;
pub mod fec;
pub mod gf;
pub mod ols;
pub mod scheduler;
pub mod sim;
pub mod tetrys;

pub use channel::{LossKind, LossModel, PathConfig};
pub use fec::{FecCodec, FecParams};
pub use gf::{Gf256, LinearSystem, Singular};
pub use ols::{OlsParams, OlsState, WindowMeasurement};
pub use scheduler::{LoadVector, PacketClass, RepairStrategy, Scheduler};
pub use sim::{run, Coding, ExperimentConfig, MetricsLedger, OlsMode, RateMode};
pub use tetrys::{TetrysDecoder, TetrysEncoder};
