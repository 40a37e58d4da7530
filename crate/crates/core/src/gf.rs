//! GF(2^8) arithmetic and a dense linear solver.
//!
//! Elements are bytes; addition is XOR and multiplication goes through
//! log/antilog tables for the reduction polynomial x^8 + x^4 + x^3 + x^2 + 1
//! (0x11D), with generator 2. Both the FEC and the on-the-fly decoders reduce
//! their received equations through [`LinearSystem::solve`].

use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, AddAssign, Div, Mul, MulAssign, Sub};

/// Reduction polynomial, including the x^8 term.
pub const POLY: u16 = 0x11D;

static EXP: [u8; 512] = build_exp();
static LOG: [u8; 256] = build_log();

const fn build_exp() -> [u8; 512] {
    let mut exp = [0u8; 512];
    let mut x: u16 = 1;
    let mut i = 0;
    while i < 255 {
        exp[i] = x as u8;
        exp[i + 255] = x as u8;
        x <<= 1;
        if x & 0x100 != 0 {
            x ^= POLY;
        }
        i += 1;
    }
    // exp[510], exp[511] are only reachable through log(0) and never read
    exp
}

const fn build_log() -> [u8; 256] {
    let exp = build_exp();
    let mut log = [0u8; 256];
    let mut i = 0;
    while i < 255 {
        log[exp[i] as usize] = i as u8;
        i += 1;
    }
    log
}

/// An element of GF(2^8).
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Gf256(pub u8);

impl Gf256 {
    pub const ZERO: Gf256 = Gf256(0);
    pub const ONE: Gf256 = Gf256(1);

    #[inline]
    pub const fn new(value: u8) -> Self {
        Gf256(value)
    }

    #[inline]
    pub const fn value(self) -> u8 {
        self.0
    }

    #[inline]
    pub const fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// `2^e` in the field.
    #[inline]
    pub fn exp(e: usize) -> Self {
        Gf256(EXP[e % 255])
    }

    /// Multiplicative inverse. Panics on zero.
    #[inline]
    pub fn inv(self) -> Self {
        assert!(self.0 != 0, "inverse of zero in GF(256)");
        Gf256(EXP[255 - LOG[self.0 as usize] as usize])
    }

    pub fn pow(self, mut e: u32) -> Self {
        if e == 0 {
            return Gf256::ONE;
        }
        if self.0 == 0 {
            return Gf256::ZERO;
        }
        e %= 255;
        Gf256(EXP[(LOG[self.0 as usize] as usize * e as usize) % 255])
    }
}

impl fmt::Debug for Gf256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Gf256({:#04x})", self.0)
    }
}

impl From<u8> for Gf256 {
    fn from(v: u8) -> Self {
        Gf256(v)
    }
}

/// Field product via the log/antilog tables.
#[inline]
pub fn mul(a: Gf256, b: Gf256) -> Gf256 {
    if a.0 == 0 || b.0 == 0 {
        return Gf256::ZERO;
    }
    Gf256(EXP[LOG[a.0 as usize] as usize + LOG[b.0 as usize] as usize])
}

impl Add for Gf256 {
    type Output = Gf256;
    #[inline]
    fn add(self, rhs: Gf256) -> Gf256 {
        Gf256(self.0 ^ rhs.0)
    }
}

impl AddAssign for Gf256 {
    #[inline]
    fn add_assign(&mut self, rhs: Gf256) {
        self.0 ^= rhs.0;
    }
}

impl Sub for Gf256 {
    type Output = Gf256;
    #[inline]
    fn sub(self, rhs: Gf256) -> Gf256 {
        Gf256(self.0 ^ rhs.0)
    }
}

impl Mul for Gf256 {
    type Output = Gf256;
    #[inline]
    fn mul(self, rhs: Gf256) -> Gf256 {
        mul(self, rhs)
    }
}

impl MulAssign for Gf256 {
    #[inline]
    fn mul_assign(&mut self, rhs: Gf256) {
        *self = mul(*self, rhs);
    }
}

impl Div for Gf256 {
    type Output = Gf256;
    #[inline]
    fn div(self, rhs: Gf256) -> Gf256 {
        assert!(rhs.0 != 0, "division by zero in GF(256)");
        if self.0 == 0 {
            return Gf256::ZERO;
        }
        let e = LOG[self.0 as usize] as usize + 255 - LOG[rhs.0 as usize] as usize;
        Gf256(EXP[e])
    }
}

/// `dst += c * src`, element-wise over byte symbols.
pub fn mul_add_slice(dst: &mut [u8], src: &[u8], c: Gf256) {
    debug_assert_eq!(dst.len(), src.len());
    match c.0 {
        0 => {}
        1 => dst.iter_mut().zip(src).for_each(|(d, s)| *d ^= *s),
        _ => {
            let lc = LOG[c.0 as usize] as usize;
            for (d, &s) in dst.iter_mut().zip(src) {
                if s != 0 {
                    *d ^= EXP[lc + LOG[s as usize] as usize];
                }
            }
        }
    }
}

/// `buf *= c`, element-wise.
pub fn scale_slice(buf: &mut [u8], c: Gf256) {
    match c.0 {
        0 => buf.fill(0),
        1 => {}
        _ => {
            let lc = LOG[c.0 as usize] as usize;
            for b in buf.iter_mut() {
                if *b != 0 {
                    *b = EXP[lc + LOG[*b as usize] as usize];
                }
            }
        }
    }
}

/// Raised when the received equations do not determine every unknown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("linear system is singular (rank {rank} < {columns} columns)")]
pub struct Singular {
    pub rank: usize,
    pub columns: usize,
}

/// Dense system `matrix · x = rhs` where every `x` is a byte symbol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearSystem {
    matrix: Vec<Vec<Gf256>>,
    rhs: Vec<Vec<u8>>,
    columns: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SystemShapeError {
    #[error("{rows} coefficient rows but {rhs} right-hand sides")]
    RowCount { rows: usize, rhs: usize },
    #[error("row {row} has width {width}, expected {expected}")]
    RowWidth { row: usize, width: usize, expected: usize },
    #[error("right-hand side {row} has length {len}, expected {expected}")]
    SymbolLength { row: usize, len: usize, expected: usize },
}

impl LinearSystem {
    pub fn new(matrix: Vec<Vec<Gf256>>, rhs: Vec<Vec<u8>>) -> Result<Self, SystemShapeError> {
        if matrix.len() != rhs.len() {
            return Err(SystemShapeError::RowCount { rows: matrix.len(), rhs: rhs.len() });
        }
        let columns = matrix.first().map_or(0, Vec::len);
        for (row, r) in matrix.iter().enumerate() {
            if r.len() != columns {
                return Err(SystemShapeError::RowWidth { row, width: r.len(), expected: columns });
            }
        }
        let symbol = rhs.first().map_or(0, Vec::len);
        for (row, r) in rhs.iter().enumerate() {
            if r.len() != symbol {
                return Err(SystemShapeError::SymbolLength { row, len: r.len(), expected: symbol });
            }
        }
        Ok(LinearSystem { matrix, rhs, columns })
    }

    pub fn rows(&self) -> usize {
        self.matrix.len()
    }

    pub fn columns(&self) -> usize {
        self.columns
    }

    /// Gaussian elimination; the pivot is the first row (at or below the
    /// diagonal) with a nonzero entry in the column. Extra rows of an
    /// over-determined system are eliminated but not checked for consistency.
    pub fn solve(self) -> Result<Vec<Vec<u8>>, Singular> {
        let LinearSystem { mut matrix, mut rhs, columns } = self;
        let rows = matrix.len();
        if rows < columns {
            return Err(Singular { rank: rank_of(&matrix), columns });
        }
        for col in 0..columns {
            let Some(pivot) = (col..rows).find(|&r| !matrix[r][col].is_zero()) else {
                return Err(Singular { rank: rank_of(&matrix), columns });
            };
            matrix.swap(col, pivot);
            rhs.swap(col, pivot);

            let inv = matrix[col][col].inv();
            if inv != Gf256::ONE {
                for v in matrix[col][col..].iter_mut() {
                    *v *= inv;
                }
                scale_slice(&mut rhs[col], inv);
            }

            let prow = matrix[col].clone();
            let prhs = rhs[col].clone();
            for (r, (row, sym)) in matrix.iter_mut().zip(rhs.iter_mut()).enumerate() {
                let f = row[col];
                if r == col || f.is_zero() {
                    continue;
                }
                for (dst, &src) in row[col..].iter_mut().zip(&prow[col..]) {
                    *dst += f * src;
                }
                mul_add_slice(sym, &prhs, f);
            }
        }
        rhs.truncate(columns);
        Ok(rhs)
    }
}

/// Rank of a coefficient matrix.
pub fn rank_of(matrix: &[Vec<Gf256>]) -> usize {
    let mut m: Vec<Vec<Gf256>> = matrix.to_vec();
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    let mut rank = 0;
    for col in 0..cols {
        let Some(p) = (rank..rows).find(|&r| !m[r][col].is_zero()) else {
            continue;
        };
        m.swap(rank, p);
        let inv = m[rank][col].inv();
        for r in 0..rows {
            if r != rank && !m[r][col].is_zero() {
                let f = m[r][col] * inv;
                for c in col..cols {
                    let v = m[rank][c];
                    m[r][c] += f * v;
                }
            }
        }
        rank += 1;
    }
    rank
}
