//! Dense square matrices and vectors over a semiring.
//!
//! The matrix product is the usual one with (⊕, ⊗) in place of (+, ×):
//! `C_ij = ⊕_k A_ik ⊗ B_kj`. Accumulations always run over ascending
//! indices, so two routes that perform the same additions in the same
//! left-to-right grouping compare bit-equal; the prefix-memoization and
//! associativity checks in the test suites rely on that.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::semiring::{SemiringTag, Weight};

/// Dimension mismatch between semiring matrix/vector operands.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ShapeError {
    pub expected: usize,
    pub got: usize,
}

impl fmt::Display for ShapeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "dimension mismatch: expected {}, got {}", self.expected, self.got)
    }
}

impl core::error::Error for ShapeError {}

/// A `|Q|`-vector of weights.
#[derive(Clone, Debug, PartialEq)]
pub struct WVector {
    entries: Vec<Weight>,
}

impl WVector {
    pub fn from_entries(entries: Vec<Weight>) -> Self {
        WVector { entries }
    }

    pub fn filled(dim: usize, w: Weight) -> Self {
        WVector { entries: vec![w; dim] }
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, i: usize) -> Weight {
        self.entries[i]
    }

    pub fn set(&mut self, i: usize, w: Weight) {
        self.entries[i] = w;
    }

    pub fn entries(&self) -> &[Weight] {
        &self.entries
    }

    /// `q ⊕`-folded entrywise: `⊕_i q_i` (used to read off the best
    /// reachable weight regardless of acceptance).
    pub fn fold_add(&self, tag: SemiringTag) -> Weight {
        let mut acc = tag.zero();
        for &w in &self.entries {
            acc = tag.add(acc, w);
        }
        acc
    }

    /// Dot product `⊕_i q_i ⊗ r_i`.
    pub fn dot(&self, other: &WVector, tag: SemiringTag) -> Result<Weight, ShapeError> {
        if self.dim() != other.dim() {
            return Err(ShapeError { expected: self.dim(), got: other.dim() });
        }
        let mut acc = tag.zero();
        for i in 0..self.dim() {
            acc = tag.add(acc, tag.mul(self.entries[i], other.entries[i]));
        }
        Ok(acc)
    }
}

/// A square `|Q| × |Q|` weight matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct WMatrix {
    dim: usize,
    entries: Vec<Weight>,
}

impl WMatrix {
    /// All-0̃ matrix (the additive identity).
    pub fn zeros(dim: usize, tag: SemiringTag) -> Self {
        WMatrix { dim, entries: vec![tag.zero(); dim * dim] }
    }

    /// 1̃ on the diagonal, 0̃ elsewhere (the multiplicative identity).
    pub fn identity(dim: usize, tag: SemiringTag) -> Self {
        let mut m = Self::zeros(dim, tag);
        for i in 0..dim {
            m.set(i, i, tag.one());
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> Weight {
        self.entries[row * self.dim + col]
    }

    pub fn set(&mut self, row: usize, col: usize, w: Weight) {
        self.entries[row * self.dim + col] = w;
    }
}

/// Semiring matrix product `C_ij = ⊕_k A_ik ⊗ B_kj`.
pub fn mat_mul(a: &WMatrix, b: &WMatrix, tag: SemiringTag) -> Result<WMatrix, ShapeError> {
    if a.dim != b.dim {
        return Err(ShapeError { expected: a.dim, got: b.dim });
    }
    let n = a.dim;
    let mut c = WMatrix::zeros(n, tag);
    for i in 0..n {
        for j in 0..n {
            let mut acc = tag.zero();
            for k in 0..n {
                acc = tag.add(acc, tag.mul(a.get(i, k), b.get(k, j)));
            }
            c.set(i, j, acc);
        }
    }
    Ok(c)
}

/// Vector-matrix product `q'_j = ⊕_i q_i ⊗ A_ij`.
pub fn vec_mat(q: &WVector, a: &WMatrix, tag: SemiringTag) -> Result<WVector, ShapeError> {
    if q.dim() != a.dim {
        return Err(ShapeError { expected: a.dim, got: q.dim() });
    }
    let n = a.dim;
    let mut out = WVector::filled(n, tag.zero());
    for j in 0..n {
        let mut acc = tag.zero();
        for i in 0..n {
            acc = tag.add(acc, tag.mul(q.get(i), a.get(i, j)));
        }
        out.set(j, acc);
    }
    Ok(out)
}
