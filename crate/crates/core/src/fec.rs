//! Systematic MDS block code FEC(k, n).
//!
//! Sources are sent verbatim and followed by `n - k` repair symbols. The
//! generator is derived from an `n x k` Vandermonde matrix over distinct
//! evaluation points, brought to systematic form by right-multiplying with
//! the inverse of its top `k x k` block. Any `k` rows of a Vandermonde matrix
//! with distinct points are independent, and right-multiplication by an
//! invertible matrix keeps that, so any `k` of the `n` packets decode.

use alloc::vec;
use alloc::vec::Vec;

use crate::gf::{mul_add_slice, Gf256, LinearSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum FecError {
    #[error("FEC parameters out of range: need 1 <= k < n <= 255, got k={k}, n={n}")]
    ParamsOutOfRange { k: usize, n: usize },
    #[error("expected {expected} source symbols, got {got}")]
    SourceCount { expected: usize, got: usize },
    #[error("source symbols must all have the same length")]
    SymbolLength,
    #[error("packet index {index} outside block of {n}")]
    IndexOutOfRange { index: usize, n: usize },
}

/// `k` source packets protected by `n - k` repair packets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FecParams {
    k: usize,
    n: usize,
}

impl FecParams {
    pub fn new(k: usize, n: usize) -> Result<Self, FecError> {
        if k == 0 || k >= n || n > 255 {
            return Err(FecError::ParamsOutOfRange { k, n });
        }
        Ok(FecParams { k, n })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn repairs(&self) -> usize {
        self.n - self.k
    }

    /// Fraction of transmitted packets that are repair packets, `(n - k) / n`.
    pub fn redundancy_ratio(&self) -> f64 {
        self.repairs() as f64 / self.n as f64
    }

    /// Block that carries source sequence number `seq`.
    pub fn block_of(&self, seq: u64) -> u64 {
        seq / self.k as u64
    }
}

/// Encoder holding the systematic generator for one parameter set.
#[derive(Debug, Clone)]
pub struct FecCodec {
    params: FecParams,
    /// Full `n x k` generator; the top `k` rows are the identity.
    generator: Vec<Vec<Gf256>>,
}

impl FecCodec {
    pub fn new(params: FecParams) -> Self {
        let (k, n) = (params.k, params.n);
        // Evaluation points 0, 1, .., n-1 are distinct field elements.
        let vandermonde: Vec<Vec<Gf256>> =
            (0..n).map(|i| (0..k).map(|j| Gf256(i as u8).pow(j as u32)).collect()).collect();

        let top_inv = invert(&vandermonde[..k]);
        let mut generator: Vec<Vec<Gf256>> = vandermonde
            .iter()
            .map(|row| {
                (0..k)
                    .map(|c| row.iter().zip(&top_inv).fold(Gf256::ZERO, |acc, (&a, inv_row)| acc + a * inv_row[c]))
                    .collect()
            })
            .collect();

        // Scale columns so the first repair row is all ones, then restore the
        // identity on top by row scaling. Neither step changes which k-subsets
        // of rows are independent.
        let first = generator[k].clone();
        for row in generator.iter_mut() {
            for (v, &s) in row.iter_mut().zip(&first) {
                *v = *v / s;
            }
        }
        for (i, row) in generator.iter_mut().take(k).enumerate() {
            let d = row[i].inv();
            for v in row.iter_mut() {
                *v *= d;
            }
        }
        FecCodec { params, generator }
    }

    pub fn params(&self) -> FecParams {
        self.params
    }

    /// Coefficients of repair `j` (0-based among the `n - k` repairs).
    pub fn repair_row(&self, j: usize) -> &[Gf256] {
        &self.generator[self.params.k + j]
    }

    /// Generator row for block index `index` in `[0, n)`.
    pub fn row(&self, index: usize) -> &[Gf256] {
        &self.generator[index]
    }

    pub fn encode_block<S: AsRef<[u8]>>(&self, sources: &[S]) -> Result<Vec<Vec<u8>>, FecError> {
        let k = self.params.k;
        if sources.len() != k {
            return Err(FecError::SourceCount { expected: k, got: sources.len() });
        }
        let len = sources[0].as_ref().len();
        if sources.iter().any(|s| s.as_ref().len() != len) {
            return Err(FecError::SymbolLength);
        }
        Ok((0..self.params.repairs())
            .map(|j| {
                let mut out = vec![0u8; len];
                for (c, s) in self.repair_row(j).iter().zip(sources) {
                    mul_add_slice(&mut out, s.as_ref(), *c);
                }
                out
            })
            .collect())
    }
}

/// Convenience wrapper building the generator on each call.
pub fn encode_block<S: AsRef<[u8]>>(params: FecParams, sources: &[S]) -> Result<Vec<Vec<u8>>, FecError> {
    FecCodec::new(params).encode_block(sources)
}

fn invert(m: &[Vec<Gf256>]) -> Vec<Vec<Gf256>> {
    let k = m.len();
    let mut a: Vec<Vec<Gf256>> = m.to_vec();
    let mut inv: Vec<Vec<Gf256>> =
        (0..k).map(|i| (0..k).map(|j| if i == j { Gf256::ONE } else { Gf256::ZERO }).collect()).collect();
    for col in 0..k {
        let p = (col..k).find(|&r| !a[r][col].is_zero()).expect("Vandermonde block with distinct points is invertible");
        a.swap(col, p);
        inv.swap(col, p);
        let d = a[col][col].inv();
        for c in 0..k {
            a[col][c] *= d;
            inv[col][c] *= d;
        }
        for r in 0..k {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col];
                for c in 0..k {
                    let (x, y) = (a[col][c], inv[col][c]);
                    a[r][c] += f * x;
                    inv[r][c] += f * y;
                }
            }
        }
    }
    inv
}

/// Outcome of a decode attempt.
#[derive(Debug, Clone, PartialEq)]
pub enum FecDecode {
    NotYet,
    /// The block is complete. `recovered` lists `(source index, payload)`
    /// for sources that were not received directly.
    Complete {
        recovered: Vec<(usize, Vec<u8>)>,
        decode_time: f64,
    },
}

/// Receiver-side state for one block.
#[derive(Debug, Clone)]
pub struct FecBlock {
    block_id: u64,
    received: Vec<Option<Vec<u8>>>,
    distinct: usize,
    decode_time: Option<f64>,
}

impl FecBlock {
    pub fn new(block_id: u64, params: FecParams) -> Self {
        FecBlock { block_id, received: vec![None; params.n], distinct: 0, decode_time: None }
    }

    pub fn block_id(&self) -> u64 {
        self.block_id
    }

    /// Record the arrival of packet `index` at `now`. Returns `true` when this
    /// arrival is the k-th distinct one, i.e. the block just became decodable.
    pub fn receive(&mut self, params: FecParams, index: usize, payload: Vec<u8>, now: f64) -> Result<bool, FecError> {
        let slot = self.received.get_mut(index).ok_or(FecError::IndexOutOfRange { index, n: params.n })?;
        if slot.is_some() {
            return Ok(false);
        }
        *slot = Some(payload);
        self.distinct += 1;
        if self.distinct == params.k {
            self.decode_time = Some(now);
            return Ok(true);
        }
        Ok(false)
    }

    pub fn has(&self, index: usize) -> bool {
        self.received.get(index).is_some_and(Option::is_some)
    }

    pub fn distinct_received(&self) -> usize {
        self.distinct
    }

    pub fn decoded(&self) -> bool {
        self.decode_time.is_some()
    }

    /// Arrival time of the k-th distinct packet.
    pub fn decode_time(&self) -> Option<f64> {
        self.decode_time
    }

    pub fn try_decode(&self, codec: &FecCodec) -> FecDecode {
        let k = codec.params.k;
        let Some(decode_time) = self.decode_time else {
            return FecDecode::NotYet;
        };
        let missing: Vec<usize> = (0..k).filter(|&i| self.received[i].is_none()).collect();
        if missing.is_empty() {
            return FecDecode::Complete { recovered: Vec::new(), decode_time };
        }

        // Sources first so the system is mostly identity rows.
        let chosen: Vec<usize> = (0..codec.params.n).filter(|&i| self.received[i].is_some()).take(k).collect();
        let matrix = chosen.iter().map(|&i| codec.row(i).to_vec()).collect();
        let rhs = chosen.iter().map(|&i| self.received[i].clone().unwrap_or_default()).collect();
        let solved = LinearSystem::new(matrix, rhs)
            .expect("received symbols share one length")
            .solve()
            .expect("any k rows of an MDS generator are independent");
        let recovered = missing.into_iter().map(|i| (i, solved[i].clone())).collect();
        FecDecode::Complete { recovered, decode_time }
    }
}
