//! On-the-fly convolutional coding with an elastic encoding window.
//!
//! The sender keeps every source packet it has sent until an acknowledgment
//! covers it. After every `k` source packets it emits one repair packet that
//! combines the whole window. The receiver substitutes known sources into the
//! repair equations as they arrive and keeps the remaining system in reduced
//! row-echelon form, so a lost source is rebuilt the moment the received
//! equations determine it.
//!
//! Sequence numbers start at 0.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec;
use alloc::vec::Vec;

use crate::gf::{mul_add_slice, scale_slice, Gf256};

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum TetrysError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("redundancy ratio {0} outside (0, 0.5]")]
    Ratio(f64),
}

/// `k` such that one repair per `k` sources gives redundancy `ratio`:
/// `k = round(1 / ratio) - 1`.
pub fn k_for_redundancy(ratio: f64) -> Result<usize, TetrysError> {
    if !(ratio > 0.0 && ratio <= 0.5) {
        return Err(TetrysError::Ratio(ratio));
    }
    Ok((1.0 / ratio + 0.5) as usize - 1)
}

/// Redundancy ratio of one repair per `k` sources, `1 / (k + 1)`.
pub fn redundancy_of(k: usize) -> f64 {
    1.0 / (k as f64 + 1.0)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Coefficient applied to source `seq` inside repair `repair_id`. Never zero.
#[inline]
pub fn coefficient(repair_id: u64, seq: u64) -> Gf256 {
    let h = splitmix64(splitmix64(repair_id) ^ seq.wrapping_mul(0xD6E8_FEB8_6659_FD93));
    Gf256((h % 255) as u8 + 1)
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SourcePacket {
    pub seq: u64,
    pub payload: Vec<u8>,
}

/// Linear combination of sources `first..=last`; the coefficient of each
/// covered source is `coefficient(id, seq)`.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RepairPacket {
    pub id: u64,
    pub first: u64,
    pub last: u64,
    pub payload: Vec<u8>,
}

impl RepairPacket {
    pub fn span(&self) -> core::ops::RangeInclusive<u64> {
        self.first..=self.last
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AckPacket {
    /// Every source up to and including this one is received or decoded.
    pub acked_through: Option<u64>,
    pub sent_time: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TetrysPacket {
    Source(SourcePacket),
    Repair(RepairPacket),
}

/// Sources sent and not yet acknowledged, `[first_unacked, next_seq)`.
#[derive(Debug, Clone, Default)]
pub struct EncodingWindow {
    first_unacked: u64,
    entries: VecDeque<Vec<u8>>,
}

impl EncodingWindow {
    pub fn first_unacked(&self) -> u64 {
        self.first_unacked
    }

    pub fn next_seq(&self) -> u64 {
        self.first_unacked + self.entries.len() as u64
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn push(&mut self, payload: Vec<u8>) -> u64 {
        let seq = self.next_seq();
        self.entries.push_back(payload);
        seq
    }

    /// Drop everything up to `through`. Stale acknowledgments are no-ops.
    fn ack(&mut self, through: u64) {
        let new_first = through.saturating_add(1).min(self.next_seq());
        while self.first_unacked < new_first {
            self.entries.pop_front();
            self.first_unacked += 1;
        }
    }
}

#[derive(Debug, Clone)]
pub struct TetrysEncoder {
    k: usize,
    window: EncodingWindow,
    since_repair: usize,
    next_repair_id: u64,
}

impl TetrysEncoder {
    pub fn new(k: usize) -> Result<Self, TetrysError> {
        if k == 0 {
            return Err(TetrysError::ZeroK);
        }
        Ok(TetrysEncoder { k, window: EncodingWindow::default(), since_repair: 0, next_repair_id: 0 })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn window(&self) -> &EncodingWindow {
        &self.window
    }

    /// Queue one source packet; every k-th call also yields a repair over the
    /// entire window.
    pub fn on_source_tick(&mut self, payload: Vec<u8>) -> (SourcePacket, Option<RepairPacket>) {
        let seq = self.window.push(payload.clone());
        let src = SourcePacket { seq, payload };
        self.since_repair += 1;
        if self.since_repair == self.k {
            self.since_repair = 0;
            (src, self.build_repair())
        } else {
            (src, None)
        }
    }

    /// Repair over the current window, or `None` if the window is empty.
    pub fn build_repair(&mut self) -> Option<RepairPacket> {
        if self.window.is_empty() {
            return None;
        }
        let id = self.next_repair_id;
        self.next_repair_id += 1;
        let first = self.window.first_unacked;
        let len = self.window.entries.iter().map(Vec::len).max().unwrap_or(0);
        let mut payload = vec![0u8; len];
        if len > 0 {
            for (seq, src) in (first..).zip(&self.window.entries) {
                mul_add_slice(&mut payload[..src.len()], src, coefficient(id, seq));
            }
        }
        Some(RepairPacket { id, first, last: self.window.next_seq() - 1, payload })
    }

    pub fn on_ack(&mut self, ack: &AckPacket) {
        if let Some(through) = ack.acked_through {
            self.window.ack(through);
        }
    }
}

/// A pending repair equation over still-unknown sources. Columns are sorted
/// by sequence number and the first column is the pivot once inserted.
#[derive(Debug, Clone)]
struct Equation {
    cols: Vec<(u64, Gf256)>,
    rhs: Vec<u8>,
}

impl Equation {
    fn coeff(&self, seq: u64) -> Option<Gf256> {
        self.cols.binary_search_by_key(&seq, |c| c.0).ok().map(|i| self.cols[i].1)
    }

    fn pivot(&self) -> u64 {
        self.cols[0].0
    }

    /// `self += f * other`
    fn axpy(&mut self, f: Gf256, other: &Equation) {
        let mut merged = Vec::with_capacity(self.cols.len() + other.cols.len());
        let (mut i, mut j) = (0, 0);
        while i < self.cols.len() || j < other.cols.len() {
            let a = self.cols.get(i);
            let b = other.cols.get(j);
            match (a, b) {
                (Some(&(sa, ca)), Some(&(sb, cb))) if sa == sb => {
                    let v = ca + f * cb;
                    if !v.is_zero() {
                        merged.push((sa, v));
                    }
                    i += 1;
                    j += 1;
                }
                (Some(&(sa, ca)), Some(&(sb, _))) if sa < sb => {
                    merged.push((sa, ca));
                    i += 1;
                }
                (Some(&(sa, ca)), None) => {
                    merged.push((sa, ca));
                    i += 1;
                }
                (_, Some(&(sb, cb))) => {
                    merged.push((sb, f * cb));
                    j += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        self.cols = merged;
        if !other.rhs.is_empty() {
            if self.rhs.len() < other.rhs.len() {
                self.rhs.resize(other.rhs.len(), 0);
            }
            mul_add_slice(&mut self.rhs[..other.rhs.len()], &other.rhs, f);
        }
    }

    fn normalize(&mut self) {
        let lead = self.cols[0].1;
        if lead != Gf256::ONE {
            let inv = lead.inv();
            for c in self.cols.iter_mut() {
                c.1 *= inv;
            }
            scale_slice(&mut self.rhs, inv);
        }
    }
}

/// Growable bitmap over sequence numbers.
#[derive(Debug, Clone, Default)]
struct SeqSet {
    words: Vec<u64>,
}

impl SeqSet {
    #[inline]
    fn contains(&self, seq: u64) -> bool {
        let w = (seq >> 6) as usize;
        self.words.get(w).is_some_and(|word| word & (1 << (seq & 63)) != 0)
    }

    #[inline]
    fn insert(&mut self, seq: u64) {
        let w = (seq >> 6) as usize;
        if w >= self.words.len() {
            self.words.resize(w + 1, 0);
        }
        self.words[w] |= 1 << (seq & 63);
    }
}

/// Receiver state: received and decoded sources plus the pending system.
#[derive(Debug, Clone)]
pub struct TetrysDecoder {
    known: SeqSet,
    decoded: SeqSet,
    payloads: BTreeMap<u64, Vec<u8>>,
    rows: Vec<Equation>,
    next_unknown: u64,
    ack_period: f64,
    next_ack_due: Option<f64>,
    received_count: u64,
    decoded_count: u64,
}

impl Default for TetrysDecoder {
    fn default() -> Self {
        TetrysDecoder::new(10.0)
    }
}

impl TetrysDecoder {
    /// `ack_period` is in the same time unit as the `now` arguments.
    pub fn new(ack_period: f64) -> Self {
        TetrysDecoder {
            known: SeqSet::default(),
            decoded: SeqSet::default(),
            payloads: BTreeMap::new(),
            rows: Vec::new(),
            next_unknown: 0,
            ack_period,
            next_ack_due: None,
            received_count: 0,
            decoded_count: 0,
        }
    }

    pub fn is_known(&self, seq: u64) -> bool {
        self.known.contains(seq)
    }

    pub fn was_decoded(&self, seq: u64) -> bool {
        self.decoded.contains(seq)
    }

    /// Payload of a received or decoded source (empty payloads are not kept).
    pub fn payload(&self, seq: u64) -> Option<&[u8]> {
        self.payloads.get(&seq).map(Vec::as_slice)
    }

    pub fn received_count(&self) -> u64 {
        self.received_count
    }

    pub fn decoded_count(&self) -> u64 {
        self.decoded_count
    }

    /// Repair equations currently waiting for more information.
    pub fn pending_equations(&self) -> usize {
        self.rows.len()
    }

    /// Highest sequence number such that every source at or below it is known.
    pub fn acked_through(&self) -> Option<u64> {
        self.next_unknown.checked_sub(1)
    }

    /// Emit a cumulative acknowledgment if at least one ack period elapsed
    /// since the previous one.
    pub fn maybe_emit_ack(&mut self, now: f64) -> Option<AckPacket> {
        if let Some(due) = self.next_ack_due {
            if now + 1e-9 < due {
                return None;
            }
        }
        self.next_ack_due = Some(now + self.ack_period);
        Some(AckPacket { acked_through: self.acked_through(), sent_time: now })
    }

    /// Process one packet; returns `(seq, recovery_time)` for every source
    /// decoded as a consequence.
    pub fn on_receive(&mut self, pkt: TetrysPacket, now: f64) -> Vec<(u64, f64)> {
        let mut out = Vec::new();
        match pkt {
            TetrysPacket::Source(s) => self.on_source(s.seq, s.payload, now, &mut out),
            TetrysPacket::Repair(r) => self.on_repair(r, now, &mut out),
        }
        out
    }

    pub fn on_source(&mut self, seq: u64, payload: Vec<u8>, now: f64, out: &mut Vec<(u64, f64)>) {
        if self.known.contains(seq) {
            return;
        }
        self.received_count += 1;
        self.mark_known(seq, payload);

        // Substitute the new source into every equation mentioning it. If it
        // was a pivot, that row loses its pivot and has to be re-inserted.
        let mut reinsert = None;
        let mut i = 0;
        while i < self.rows.len() {
            if let Ok(pos) = self.rows[i].cols.binary_search_by_key(&seq, |c| c.0) {
                let (_, c) = self.rows[i].cols.remove(pos);
                if let Some(p) = self.payloads.get(&seq) {
                    let row = &mut self.rows[i];
                    if row.rhs.len() < p.len() {
                        row.rhs.resize(p.len(), 0);
                    }
                    mul_add_slice(&mut row.rhs[..p.len()], p, c);
                }
                if pos == 0 {
                    reinsert = Some(self.rows.swap_remove(i));
                    continue;
                }
            }
            i += 1;
        }
        if let Some(eq) = reinsert {
            if !eq.cols.is_empty() {
                self.insert(eq);
            }
        }
        self.harvest(now, out);
    }

    pub fn on_repair(&mut self, r: RepairPacket, now: f64, out: &mut Vec<(u64, f64)>) {
        let mut eq = Equation { cols: Vec::new(), rhs: r.payload };
        let start = r.first.max(self.next_unknown);
        if !eq.rhs.is_empty() {
            for seq in r.first..start {
                self.subtract_known(&mut eq, r.id, seq);
            }
        }
        for seq in start..=r.last {
            if self.known.contains(seq) {
                if !eq.rhs.is_empty() {
                    self.subtract_known(&mut eq, r.id, seq);
                }
            } else {
                eq.cols.push((seq, coefficient(r.id, seq)));
            }
        }
        if eq.cols.is_empty() {
            return;
        }
        self.insert(eq);
        self.harvest(now, out);
    }

    fn subtract_known(&self, eq: &mut Equation, id: u64, seq: u64) {
        if let Some(p) = self.payloads.get(&seq) {
            if eq.rhs.len() < p.len() {
                eq.rhs.resize(p.len(), 0);
            }
            mul_add_slice(&mut eq.rhs[..p.len()], p, coefficient(id, seq));
        }
    }

    fn mark_known(&mut self, seq: u64, payload: Vec<u8>) {
        self.known.insert(seq);
        if !payload.is_empty() {
            self.payloads.insert(seq, payload);
        }
        while self.known.contains(self.next_unknown) {
            self.next_unknown += 1;
        }
    }

    /// Insert an equation, keeping the system in reduced row-echelon form.
    fn insert(&mut self, mut eq: Equation) {
        for row in &self.rows {
            if let Some(f) = eq.coeff(row.pivot()) {
                eq.axpy(f, row);
            }
        }
        if eq.cols.is_empty() {
            // linearly dependent on what we already hold
            return;
        }
        eq.normalize();
        let p = eq.pivot();
        for row in self.rows.iter_mut() {
            if let Some(f) = row.coeff(p) {
                row.axpy(f, &eq);
            }
        }
        self.rows.push(eq);
    }

    /// Rows reduced to a single column determine that source.
    fn harvest(&mut self, now: f64, out: &mut Vec<(u64, f64)>) {
        let mut i = 0;
        while i < self.rows.len() {
            if self.rows[i].cols.len() == 1 {
                let row = self.rows.swap_remove(i);
                let seq = row.cols[0].0;
                debug_assert_eq!(row.cols[0].1, Gf256::ONE);
                self.decoded.insert(seq);
                self.decoded_count += 1;
                self.mark_known(seq, row.rhs);
                out.push((seq, now));
            } else {
                i += 1;
            }
        }
    }
}
