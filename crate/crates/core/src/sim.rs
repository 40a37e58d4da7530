//! Deterministic discrete-event engine.
//!
//! One run drives a CBR source through the configured code (block FEC or
//! on-the-fly), the load-vector scheduler and the per-path channels, decodes
//! at the receiver, runs the acknowledgment and load-splitting loops, and
//! classifies every source packet against the playout deadline.
//!
//! Times are milliseconds (`f64`). Events at equal times are ordered by kind
//! (arrivals, then ACK handling, then window ticks, then source ticks) and
//! then by insertion order.

use alloc::collections::{BinaryHeap, VecDeque};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::channel::{ChannelError, Path, PathConfig, Transmission};
use crate::fec::{FecBlock, FecParams};
use crate::ols::{OlsParams, OlsState, WindowMeasurement, DEFAULT_DELTA_L};
use crate::scheduler::{LoadError, LoadVector, PacketClass, RepairStrategy, Scheduler};
use crate::tetrys::{self, AckPacket, RepairPacket, SourcePacket, TetrysDecoder, TetrysEncoder};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("experiment needs at least one path")]
    NoPaths,
    #[error("path {index}: {source}")]
    Path { index: usize, source: ChannelError },
    #[error("fixed load vector: {0}")]
    Load(#[from] LoadError),
    #[error("{field} must be positive and finite, got {value}")]
    NotPositive { field: &'static str, value: f64 },
    #[error("tetrys k must be at least 1")]
    TetrysK,
    #[error("threshold {0} must be non-negative")]
    Threshold(f64),
    #[error("load step {0} must be in (0, 1]")]
    DeltaL(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Coding {
    Fec(FecParams),
    /// One repair per `k` source packets.
    Tetrys {
        k: usize,
    },
}

impl Coding {
    pub fn redundancy_ratio(&self) -> f64 {
        match self {
            Coding::Fec(p) => p.redundancy_ratio(),
            Coding::Tetrys { k } => tetrys::redundancy_of(*k),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum OlsMode {
    Original,
    Modified {
        theta: f64,
    },
    /// No adaptation; the scheduler keeps this vector for the whole run.
    Off(LoadVector),
}

/// What the configured bit rate measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum RateMode {
    /// Sources alone are emitted at the rate; repairs leave together with
    /// the source that triggers them.
    #[default]
    Source,
    /// Sources and repairs share the rate; every packet takes one slot.
    Wire,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExperimentConfig {
    pub paths: Vec<PathConfig>,
    pub coding: Coding,
    /// Repair placement for on-the-fly coding.
    pub strategy: RepairStrategy,
    /// Repair placement for block FEC.
    pub fec_repair_strategy: RepairStrategy,
    pub ols: OlsMode,
    pub delta_l: f64,
    pub rate_kbps: f64,
    pub packet_bytes: usize,
    /// Symbol bytes actually coded by the on-the-fly path. 0 tracks only
    /// the coefficient algebra, which decides the same decode events.
    pub payload_bytes: usize,
    pub deadline_ms: f64,
    pub ack_period_ms: f64,
    pub adapt_window_s: f64,
    pub duration_s: f64,
    pub rate_mode: RateMode,
    /// Keep emitting repairs after the last source until everything is
    /// acknowledged (bounded by `drain_limit_ms`).
    pub drain: bool,
    pub drain_limit_ms: f64,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn new(paths: Vec<PathConfig>, coding: Coding) -> Self {
        ExperimentConfig {
            paths,
            coding,
            strategy: RepairStrategy::Long,
            fec_repair_strategy: RepairStrategy::Any,
            ols: OlsMode::Original,
            delta_l: DEFAULT_DELTA_L,
            rate_kbps: 1900.0,
            packet_bytes: 210,
            payload_bytes: 0,
            deadline_ms: 150.0,
            ack_period_ms: 10.0,
            adapt_window_s: 1.0,
            duration_s: 1000.0,
            rate_mode: RateMode::Source,
            drain: true,
            drain_limit_ms: 5000.0,
            seed: 1,
        }
    }

    /// Spacing between consecutive CBR slots in ms.
    pub fn source_interval_ms(&self) -> f64 {
        self.packet_bytes as f64 * 8.0 / self.rate_kbps
    }

    fn effective_strategy(&self) -> RepairStrategy {
        match self.coding {
            Coding::Fec(_) => self.fec_repair_strategy,
            Coding::Tetrys { .. } => self.strategy,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.paths.is_empty() {
            return Err(SimError::NoPaths);
        }
        for (index, p) in self.paths.iter().enumerate() {
            p.validate().map_err(|source| SimError::Path { index, source })?;
        }
        let positive = |field: &'static str, value: f64| {
            if value > 0.0 && value.is_finite() {
                Ok(())
            } else {
                Err(SimError::NotPositive { field, value })
            }
        };
        positive("rate_kbps", self.rate_kbps)?;
        positive("packet_bytes", self.packet_bytes as f64)?;
        positive("ack_period_ms", self.ack_period_ms)?;
        positive("adapt_window_s", self.adapt_window_s)?;
        positive("duration_s", self.duration_s)?;
        if !(self.deadline_ms > 0.0) {
            return Err(SimError::NotPositive { field: "deadline_ms", value: self.deadline_ms });
        }
        if !(self.drain_limit_ms >= 0.0) {
            return Err(SimError::NotPositive { field: "drain_limit_ms", value: self.drain_limit_ms });
        }
        if !(self.delta_l > 0.0 && self.delta_l <= 1.0) {
            return Err(SimError::DeltaL(self.delta_l));
        }
        if let Coding::Tetrys { k } = self.coding {
            if k == 0 {
                return Err(SimError::TetrysK);
            }
        }
        match &self.ols {
            OlsMode::Modified { theta } if !(*theta >= 0.0) => return Err(SimError::Threshold(*theta)),
            OlsMode::Off(load) if load.len() != self.paths.len() => {
                return Err(SimError::Load(LoadError::Width { expected: self.paths.len(), got: load.len() }))
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Timeliness {
    OnTime,
    Late,
}

/// On time iff the packet was available no later than `deadline` after it
/// was sent (inclusive).
pub fn deadline_classify(send_time: f64, available_time: f64, deadline: f64) -> Timeliness {
    if available_time <= send_time + deadline {
        Timeliness::OnTime
    } else {
        Timeliness::Late
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Outcome {
    DeliveredOnTime,
    RecoveredOnTime,
    Late,
    Unrecovered,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PathCounters {
    pub sent_source: u64,
    pub sent_repair: u64,
    pub lost_source: u64,
    pub lost_repair: u64,
}

impl PathCounters {
    pub fn sent(&self) -> u64 {
        self.sent_source + self.sent_repair
    }

    pub fn lost(&self) -> u64 {
        self.lost_source + self.lost_repair
    }

    pub fn loss_rate(&self) -> f64 {
        if self.sent() == 0 {
            0.0
        } else {
            self.lost() as f64 / self.sent() as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WindowSnapshot {
    pub index: u64,
    pub end_ms: f64,
    pub path_sent: Vec<u64>,
    pub path_lost: Vec<u64>,
    /// Sources whose deadline expired inside the window.
    pub finalized: u64,
    pub info_loss: f64,
    /// Load vector installed at the end of the window.
    pub load: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricsLedger {
    pub sources_sent: u64,
    pub delivered_on_time: u64,
    pub recovered_on_time: u64,
    pub late: u64,
    pub unrecovered: u64,
    pub repairs_sent: u64,
    pub acks_sent: u64,
    pub acks_lost: u64,
    /// Decoded payloads that differ from what was sent (payload mode only).
    pub payload_mismatches: u64,
    pub max_window: u64,
    pub end_ms: f64,
    pub paths: Vec<PathCounters>,
    pub windows: Vec<WindowSnapshot>,
}

impl MetricsLedger {
    /// `(late + unrecovered) / sources_sent`.
    pub fn information_loss_rate(&self) -> f64 {
        if self.sources_sent == 0 {
            0.0
        } else {
            (self.late + self.unrecovered) as f64 / self.sources_sent as f64
        }
    }

    pub fn path_loss_rates(&self) -> Vec<f64> {
        self.paths.iter().map(PathCounters::loss_rate).collect()
    }
}

/// Observable events, for optional tracing.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "event", rename_all = "snake_case"))]
pub enum TraceEvent {
    Sent { t: f64, path: usize, class: PacketClass, id: u64, lost: bool },
    Arrived { t: f64, path: usize, class: PacketClass, id: u64 },
    Recovered { t: f64, seq: u64 },
    Ack { t: f64, acked_through: Option<u64>, lost: bool },
    AckReceived { t: f64, acked_through: Option<u64>, window: u64 },
    Feedback { t: f64, window: u64, load: Vec<f64>, info_loss: f64 },
}

#[derive(Debug, Clone)]
enum WirePacket {
    FecSource { seq: u64 },
    FecRepair { block: u64, index: usize },
    Source(SourcePacket),
    Repair(RepairPacket),
}

impl WirePacket {
    fn class(&self) -> PacketClass {
        match self {
            WirePacket::FecSource { .. } | WirePacket::Source(_) => PacketClass::Source,
            WirePacket::FecRepair { .. } | WirePacket::Repair(_) => PacketClass::Repair,
        }
    }

    fn id(&self) -> u64 {
        match self {
            WirePacket::FecSource { seq } => *seq,
            WirePacket::FecRepair { block, index } => block * 256 + *index as u64,
            WirePacket::Source(s) => s.seq,
            WirePacket::Repair(r) => r.id,
        }
    }
}

#[derive(Debug)]
enum Event {
    Arrival { path: usize, pkt: WirePacket },
    AckArrival(AckPacket),
    AckTick,
    OlsWindowTick,
    SourceTick,
    Flush,
}

impl Event {
    fn priority(&self) -> u8 {
        match self {
            Event::Arrival { .. } => 0,
            Event::AckArrival(_) => 1,
            Event::AckTick => 2,
            Event::OlsWindowTick => 3,
            Event::SourceTick => 4,
            Event::Flush => 5,
        }
    }
}

struct Queued {
    time: f64,
    priority: u8,
    order: u64,
    event: Event,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Queued {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then(other.priority.cmp(&self.priority)).then(other.order.cmp(&self.order))
    }
}

fn mix(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic payload for source `seq` in payload mode.
pub fn source_payload(seq: u64, len: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(len);
    let mut state = mix(seq, 0xC0DE);
    while out.len() < len {
        state = mix(state, seq);
        out.extend(state.to_le_bytes().iter().take(len - out.len()));
    }
    out
}

enum Codec {
    Fec { params: FecParams, blocks: VecDeque<(FecBlock, f64)>, first_block: u64 },
    Tetrys { enc: TetrysEncoder, dec: TetrysDecoder },
}

struct Engine<'a> {
    cfg: &'a ExperimentConfig,
    queue: BinaryHeap<Queued>,
    order: u64,
    paths: Vec<Path>,
    ack_path: Option<(usize, Path)>,
    scheduler: Scheduler,
    ols: Option<OlsState>,
    codec: Codec,
    interval: f64,
    duration_ms: f64,
    max_delay: f64,

    send_time: Vec<f64>,
    got_time: Vec<f64>,
    recovered: Vec<bool>,
    next_seq: u64,
    sources_done: bool,
    last_source_time: f64,

    finalize_ptr: usize,
    window_sent: Vec<u64>,
    window_lost: Vec<u64>,
    windows_done: u64,

    ledger: MetricsLedger,
    trace: Option<&'a mut dyn FnMut(&TraceEvent)>,
}

/// Run one experiment to completion.
pub fn run(config: &ExperimentConfig) -> Result<MetricsLedger, SimError> {
    Engine::new(config, None)?.run()
}

/// As [`run`], reporting every observable event to `sink`.
pub fn run_with_trace(config: &ExperimentConfig, sink: &mut dyn FnMut(&TraceEvent)) -> Result<MetricsLedger, SimError> {
    Engine::new(config, Some(sink))?.run()
}

impl<'a> Engine<'a> {
    fn new(cfg: &'a ExperimentConfig, trace: Option<&'a mut dyn FnMut(&TraceEvent)>) -> Result<Self, SimError> {
        cfg.validate()?;
        let n = cfg.paths.len();
        let paths = cfg
            .paths
            .iter()
            .enumerate()
            .map(|(i, p)| {
                Path::new(*p, mix(cfg.seed, 2 * i as u64 + 1)).map_err(|source| SimError::Path { index: i, source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let delays: Vec<f64> = cfg.paths.iter().map(|p| p.prop_delay_ms).collect();
        let max_delay = delays.iter().cloned().fold(0.0, f64::max);

        let mut scheduler = Scheduler::new(delays.clone(), cfg.effective_strategy(), cfg.coding.redundancy_ratio());
        let ols = match &cfg.ols {
            OlsMode::Original => Some(OlsState::new(n, OlsParams { delta_l: cfg.delta_l, threshold: None })),
            OlsMode::Modified { theta } => {
                Some(OlsState::new(n, OlsParams { delta_l: cfg.delta_l, threshold: Some(*theta) }))
            }
            OlsMode::Off(load) => {
                scheduler.apply_feedback(load.shares())?;
                None
            }
        };

        let (codec, ack_path) = match cfg.coding {
            Coding::Fec(params) => (Codec::Fec { params, blocks: VecDeque::new(), first_block: 0 }, None),
            Coding::Tetrys { k } => {
                let enc = TetrysEncoder::new(k).map_err(|_| SimError::TetrysK)?;
                let dec = TetrysDecoder::new(cfg.ack_period_ms);
                // Acknowledgments go back on the shortest path, through an
                // independent loss process with the same parameters.
                let shortest = (0..n).min_by(|&a, &b| delays[a].total_cmp(&delays[b]).then(a.cmp(&b))).unwrap_or(0);
                let back = Path::new(cfg.paths[shortest], mix(cfg.seed, 2 * shortest as u64 + 2))
                    .map_err(|source| SimError::Path { index: shortest, source })?;
                (Codec::Tetrys { enc, dec }, Some((shortest, back)))
            }
        };

        let interval = cfg.source_interval_ms();
        let duration_ms = cfg.duration_s * 1000.0;
        let expected = (duration_ms / interval) as usize + 256;
        Ok(Engine {
            cfg,
            queue: BinaryHeap::new(),
            order: 0,
            paths,
            ack_path,
            scheduler,
            ols,
            codec,
            interval,
            duration_ms,
            max_delay,
            send_time: Vec::with_capacity(expected),
            got_time: Vec::with_capacity(expected),
            recovered: Vec::with_capacity(expected),
            next_seq: 0,
            sources_done: false,
            last_source_time: 0.0,
            finalize_ptr: 0,
            window_sent: vec![0; n],
            window_lost: vec![0; n],
            windows_done: 0,
            ledger: MetricsLedger { paths: vec![PathCounters::default(); n], ..Default::default() },
            trace,
        })
    }

    fn push(&mut self, time: f64, event: Event) {
        let priority = event.priority();
        self.order += 1;
        self.queue.push(Queued { time, priority, order: self.order, event });
    }

    #[inline]
    fn emit(&mut self, ev: impl FnOnce() -> TraceEvent) {
        if let Some(sink) = self.trace.as_mut() {
            sink(&ev());
        }
    }

    fn run(mut self) -> Result<MetricsLedger, SimError> {
        self.push(0.0, Event::SourceTick);
        if self.ols.is_some() {
            self.push(self.cfg.adapt_window_s * 1000.0, Event::OlsWindowTick);
        }
        if self.ack_path.is_some() {
            self.push(0.0, Event::AckTick);
        }
        let mut now = 0.0;
        while let Some(q) = self.queue.pop() {
            debug_assert!(q.time >= now);
            now = q.time;
            match q.event {
                Event::SourceTick => self.on_source_tick(now),
                Event::Flush => self.on_flush(now),
                Event::Arrival { path, pkt } => self.on_arrival(now, path, pkt),
                Event::AckTick => self.on_ack_tick(now),
                Event::AckArrival(ack) => self.on_ack_arrival(now, ack),
                Event::OlsWindowTick => self.on_window_tick(now),
            }
        }
        self.ledger.end_ms = now;
        Ok(self.finish())
    }

    fn send(&mut self, t: f64, pkt: WirePacket) {
        let class = pkt.class();
        let path = self.scheduler.assign(class);
        let counters = &mut self.ledger.paths[path];
        match class {
            PacketClass::Source => counters.sent_source += 1,
            PacketClass::Repair => {
                counters.sent_repair += 1;
                self.ledger.repairs_sent += 1;
            }
        }
        self.window_sent[path] += 1;
        let fate = self.paths[path].transmit(t);
        let lost = matches!(fate, Transmission::Lost);
        if lost {
            let counters = &mut self.ledger.paths[path];
            match class {
                PacketClass::Source => counters.lost_source += 1,
                PacketClass::Repair => counters.lost_repair += 1,
            }
            self.window_lost[path] += 1;
        }
        let id = pkt.id();
        self.emit(|| TraceEvent::Sent { t, path, class, id, lost });
        if let Transmission::Delivered { arrival } = fate {
            self.push(arrival, Event::Arrival { path, pkt });
        }
    }

    fn on_source_tick(&mut self, now: f64) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.send_time.push(now);
        self.got_time.push(f64::INFINITY);
        self.recovered.push(false);
        self.ledger.sources_sent += 1;
        self.last_source_time = now;

        let wire = self.cfg.rate_mode == RateMode::Wire;
        let interval = self.interval;
        let mut slots = 1usize;
        let block_end;
        let fec = match &self.codec {
            Codec::Fec { params, .. } => Some(*params),
            Codec::Tetrys { .. } => None,
        };
        if let Some(params) = fec {
            self.prune_blocks(now);
            let k = params.k() as u64;
            let index = (seq % k) as usize;
            let block = seq / k;
            self.fec_block(block);
            self.send(now, WirePacket::FecSource { seq });
            block_end = index + 1 == params.k();
            if block_end {
                let mut last = now;
                for j in 0..params.repairs() {
                    let t = if wire { now + (j + 1) as f64 * interval } else { now };
                    last = t;
                    self.send(t, WirePacket::FecRepair { block, index: params.k() + j });
                }
                slots += params.repairs();
                if let Codec::Fec { blocks, first_block, .. } = &mut self.codec {
                    if let Some(entry) = blocks.get_mut((block - *first_block) as usize) {
                        entry.1 = last;
                    }
                }
            }
        } else {
            let payload =
                if self.cfg.payload_bytes > 0 { source_payload(seq, self.cfg.payload_bytes) } else { Vec::new() };
            let Codec::Tetrys { enc, .. } = &mut self.codec else { unreachable!() };
            let (src, rep) = enc.on_source_tick(payload);
            self.ledger.max_window = self.ledger.max_window.max(enc.window().len() as u64);
            self.send(now, WirePacket::Source(src));
            if let Some(rep) = rep {
                let t = if wire { now + interval } else { now };
                self.send(t, WirePacket::Repair(rep));
                slots += 1;
            }
            block_end = true;
        }

        let step = if wire { slots as f64 * interval } else { interval };
        let next = now + step;
        if next < self.duration_ms || !block_end {
            self.push(next, Event::SourceTick);
        } else {
            self.sources_done = true;
            if let Codec::Tetrys { enc, .. } = &self.codec {
                if self.cfg.drain {
                    let gap = enc.k() as f64 * interval;
                    self.push(now + gap, Event::Flush);
                }
            }
        }
    }

    /// Drop blocks whose every packet has landed; they can no longer change.
    fn prune_blocks(&mut self, now: f64) {
        let max_delay = self.max_delay;
        if let Codec::Fec { blocks, first_block, .. } = &mut self.codec {
            while blocks.front().is_some_and(|(_, done)| *done + max_delay < now) {
                blocks.pop_front();
                *first_block += 1;
            }
        }
    }

    fn drain_deadline(&self) -> f64 {
        self.last_source_time + self.cfg.drain_limit_ms
    }

    fn on_flush(&mut self, now: f64) {
        if now > self.drain_deadline() {
            return;
        }
        let Codec::Tetrys { enc, .. } = &mut self.codec else {
            return;
        };
        let k = enc.k();
        if let Some(rep) = enc.build_repair() {
            self.send(now, WirePacket::Repair(rep));
            self.push(now + k as f64 * self.interval, Event::Flush);
        }
    }

    fn fec_block(&mut self, block: u64) -> Option<&mut FecBlock> {
        let Codec::Fec { params, blocks, first_block } = &mut self.codec else {
            return None;
        };
        if block < *first_block {
            return None;
        }
        let pos = (block - *first_block) as usize;
        while blocks.len() <= pos {
            let id = *first_block + blocks.len() as u64;
            blocks.push_back((FecBlock::new(id, *params), f64::INFINITY));
        }
        Some(&mut blocks[pos].0)
    }

    fn mark_available(&mut self, seq: u64, now: f64, recovered: bool) {
        let i = seq as usize;
        if self.got_time[i].is_infinite() {
            self.got_time[i] = now;
            self.recovered[i] = recovered;
            if recovered {
                self.emit(|| TraceEvent::Recovered { t: now, seq });
            }
        }
    }

    fn on_arrival(&mut self, now: f64, path: usize, pkt: WirePacket) {
        let class = pkt.class();
        let id = pkt.id();
        self.emit(|| TraceEvent::Arrived { t: now, path, class, id });
        match pkt {
            WirePacket::FecSource { seq } => {
                self.mark_available(seq, now, false);
                let Codec::Fec { params, .. } = &self.codec else { unreachable!() };
                let params = *params;
                let block = params.block_of(seq);
                let index = (seq % params.k() as u64) as usize;
                self.fec_arrival(now, params, block, index);
            }
            WirePacket::FecRepair { block, index } => {
                let Codec::Fec { params, .. } = &self.codec else { unreachable!() };
                let params = *params;
                self.fec_arrival(now, params, block, index);
            }
            WirePacket::Source(s) => {
                let seq = s.seq;
                self.mark_available(seq, now, false);
                let mut out = Vec::new();
                if let Codec::Tetrys { dec, .. } = &mut self.codec {
                    dec.on_source(seq, s.payload, now, &mut out);
                }
                self.tetrys_decoded(out);
            }
            WirePacket::Repair(r) => {
                let mut out = Vec::new();
                if let Codec::Tetrys { dec, .. } = &mut self.codec {
                    dec.on_repair(r, now, &mut out);
                }
                self.tetrys_decoded(out);
            }
        }
    }

    fn fec_arrival(&mut self, now: f64, params: FecParams, block: u64, index: usize) {
        let Some(b) = self.fec_block(block) else {
            return;
        };
        if b.receive(params, index, Vec::new(), now).unwrap_or(false) {
            // Block complete: every missing source is rebuilt now.
            let k = params.k() as u64;
            for seq in block * k..(block + 1) * k {
                self.mark_available(seq, now, true);
            }
        }
    }

    fn tetrys_decoded(&mut self, out: Vec<(u64, f64)>) {
        for (seq, t) in out {
            if self.cfg.payload_bytes > 0 {
                if let Codec::Tetrys { dec, .. } = &self.codec {
                    let expect = source_payload(seq, self.cfg.payload_bytes);
                    if dec.payload(seq) != Some(expect.as_slice()) {
                        self.ledger.payload_mismatches += 1;
                    }
                }
            }
            self.mark_available(seq, t, true);
        }
    }

    fn acks_active(&self, now: f64) -> bool {
        if !self.sources_done {
            return true;
        }
        let Codec::Tetrys { enc, .. } = &self.codec else {
            return false;
        };
        self.cfg.drain && !enc.window().is_empty() && now <= self.drain_deadline()
    }

    fn on_ack_tick(&mut self, now: f64) {
        let Codec::Tetrys { dec, .. } = &mut self.codec else {
            return;
        };
        if let Some(ack) = dec.maybe_emit_ack(now) {
            self.ledger.acks_sent += 1;
            let (_, back) = self.ack_path.as_mut().expect("ack path exists for tetrys");
            let fate = back.transmit(now);
            let lost = matches!(fate, Transmission::Lost);
            if lost {
                self.ledger.acks_lost += 1;
            }
            let acked_through = ack.acked_through;
            self.emit(|| TraceEvent::Ack { t: now, acked_through, lost });
            if let Transmission::Delivered { arrival } = fate {
                self.push(arrival, Event::AckArrival(ack));
            }
        }
        if self.acks_active(now) {
            self.push(now + self.cfg.ack_period_ms, Event::AckTick);
        }
    }

    fn on_ack_arrival(&mut self, now: f64, ack: AckPacket) {
        if let Codec::Tetrys { enc, .. } = &mut self.codec {
            enc.on_ack(&ack);
            let window = enc.window().len() as u64;
            let acked_through = ack.acked_through;
            self.emit(|| TraceEvent::AckReceived { t: now, acked_through, window });
        }
    }

    fn on_window_tick(&mut self, now: f64) {
        let deadline = self.cfg.deadline_ms;
        let mut finalized = 0u64;
        let mut missed = 0u64;
        while self.finalize_ptr < self.send_time.len() {
            let i = self.finalize_ptr;
            let due = self.send_time[i] + deadline;
            if due > now {
                break;
            }
            finalized += 1;
            if deadline_classify(self.send_time[i], self.got_time[i], deadline) == Timeliness::Late {
                missed += 1;
            }
            self.finalize_ptr += 1;
        }
        let info_loss = if finalized == 0 { 0.0 } else { missed as f64 / finalized as f64 };
        let path_loss = self
            .window_sent
            .iter()
            .zip(&self.window_lost)
            .map(|(&s, &l)| if s == 0 { None } else { Some(l as f64 / s as f64) })
            .collect();
        let meas = WindowMeasurement { path_loss, info_loss };

        let ols = self.ols.as_mut().expect("window ticks only run with load splitting");
        let load = ols.step(&meas);
        // Feedback reaches the sender instantly.
        self.scheduler.apply_feedback(load.shares()).expect("load splitting emits valid vectors");
        let index = self.windows_done;
        self.windows_done += 1;
        let shares = load.shares().to_vec();
        self.emit(|| TraceEvent::Feedback { t: now, window: index, load: shares.clone(), info_loss });
        self.ledger.windows.push(WindowSnapshot {
            index,
            end_ms: now,
            path_sent: core::mem::replace(&mut self.window_sent, vec![0; self.paths.len()]),
            path_lost: core::mem::replace(&mut self.window_lost, vec![0; self.paths.len()]),
            finalized,
            info_loss,
            load: shares,
        });

        let next = now + self.cfg.adapt_window_s * 1000.0;
        if next <= self.duration_ms + 1e-6 {
            self.push(next, Event::OlsWindowTick);
        }
    }

    fn finish(mut self) -> MetricsLedger {
        let deadline = self.cfg.deadline_ms;
        for i in 0..self.send_time.len() {
            let got = self.got_time[i];
            if got.is_infinite() {
                self.ledger.unrecovered += 1;
            } else if deadline_classify(self.send_time[i], got, deadline) == Timeliness::OnTime {
                if self.recovered[i] {
                    self.ledger.recovered_on_time += 1;
                } else {
                    self.ledger.delivered_on_time += 1;
                }
            } else {
                self.ledger.late += 1;
            }
        }
        self.ledger
    }
}

/// Per-source outcome, mostly useful in tests.
pub fn classify(send_time: f64, available: Option<f64>, recovered: bool, deadline: f64) -> Outcome {
    match available {
        None => Outcome::Unrecovered,
        Some(t) => match (deadline_classify(send_time, t, deadline), recovered) {
            (Timeliness::OnTime, false) => Outcome::DeliveredOnTime,
            (Timeliness::OnTime, true) => Outcome::RecoveredOnTime,
            (Timeliness::Late, _) => Outcome::Late,
        },
    }
}
