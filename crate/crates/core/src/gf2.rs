//! Dense, word-packed linear algebra over GF(2).
//!
//! [`BinMatrix`] is the carrier for parity-check matrices, symmetry
//! tableaus and every restricted sub-tableau built from them. Rows are
//! packed into `u64` words; all bits past `cols` in the last word of a row
//! are kept at zero so that word-level comparisons and popcounts are exact.
//!
//! Elimination is deterministic: the pivot for each column is the first
//! eligible row in index order, so every derived basis is a pure function of
//! the input matrix.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};

const WORD_BITS: usize = 64;

#[inline]
fn words_for(bits: usize) -> usize {
    bits.div_ceil(WORD_BITS)
}

#[inline]
fn tail_mask(bits: usize) -> u64 {
    match bits % WORD_BITS {
        0 => u64::MAX,
        r => (1u64 << r) - 1,
    }
}

#[inline]
fn xor_into(dst: &mut [u64], src: &[u64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d ^= *s;
    }
}

/// A vector over GF(2).
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitVec {
    words: Vec<u64>,
    len: usize,
}

impl BitVec {
    pub fn zeros(len: usize) -> Self {
        Self {
            words: vec![0; words_for(len)],
            len,
        }
    }

    pub fn from_indices(len: usize, ones: impl IntoIterator<Item = usize>) -> Self {
        let mut v = Self::zeros(len);
        for i in ones {
            v.set(i, true);
        }
        v
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        Self::from_indices(
            bits.len(),
            bits.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i),
        )
    }

    pub(crate) fn from_words(words: Vec<u64>, len: usize) -> Self {
        debug_assert_eq!(words.len(), words_for(len));
        let mut v = Self { words, len };
        v.clear_tail();
        v
    }

    fn clear_tail(&mut self) {
        if let Some(last) = self.words.last_mut() {
            *last &= tail_mask(self.len);
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit {i} out of range for length {}", self.len);
        (self.words[i / WORD_BITS] >> (i % WORD_BITS)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit {i} out of range for length {}", self.len);
        let mask = 1u64 << (i % WORD_BITS);
        if value {
            self.words[i / WORD_BITS] |= mask;
        } else {
            self.words[i / WORD_BITS] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len, "bit {i} out of range for length {}", self.len);
        self.words[i / WORD_BITS] ^= 1u64 << (i % WORD_BITS);
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub(crate) fn words_mut(&mut self) -> &mut [u64] {
        &mut self.words
    }

    /// Index of the lowest set bit.
    pub fn first_one(&self) -> Option<usize> {
        self.words
            .iter()
            .enumerate()
            .find(|(_, w)| **w != 0)
            .map(|(k, w)| k * WORD_BITS + w.trailing_zeros() as usize)
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(k, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(k * WORD_BITS + b)
            })
        })
    }

    pub fn xor_assign(&mut self, other: &BitVec) {
        assert_eq!(self.len, other.len, "length mismatch in xor");
        xor_into(&mut self.words, &other.words);
    }

    /// Parity of the bitwise AND, i.e. the GF(2) dot product.
    pub fn dot(&self, other: &BitVec) -> bool {
        assert_eq!(self.len, other.len, "length mismatch in dot");
        self.words
            .iter()
            .zip(&other.words)
            .fold(0u32, |acc, (a, b)| acc ^ (a & b).count_ones())
            & 1
            == 1
    }

    /// Copy of the bits at `indices`, in that order.
    pub fn gather(&self, indices: &[usize]) -> BitVec {
        let mut out = BitVec::zeros(indices.len());
        for (k, &i) in indices.iter().enumerate() {
            if self.get(i) {
                out.set(k, true);
            }
        }
        out
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.len).map(|i| self.get(i)).collect()
    }
}

impl fmt::Debug for BitVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVec({self})")
    }
}

impl fmt::Display for BitVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Dense row-major matrix over GF(2).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinMatrix {
    rows: usize,
    cols: usize,
    stride: usize,
    data: Vec<u64>,
}

/// Reduced row echelon form of a matrix together with its pivot structure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RrefResult {
    pub matrix: BinMatrix,
    pub pivot_columns: Vec<usize>,
    pub rank: usize,
}

impl BinMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let stride = words_for(cols);
        Self {
            rows,
            cols,
            stride,
            data: vec![0; rows * stride],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                if f(r, c) {
                    m.set(r, c, true);
                }
            }
        }
        m
    }

    /// Builds a matrix whose rows are the given vectors.
    ///
    /// # Panics
    /// Panics if the vectors do not all have length `cols`.
    pub fn from_rows<'a>(cols: usize, rows: impl IntoIterator<Item = &'a BitVec>) -> Self {
        let stride = words_for(cols);
        let mut data = Vec::new();
        let mut n = 0;
        for row in rows {
            assert_eq!(row.len(), cols, "row length mismatch");
            data.extend_from_slice(row.words());
            n += 1;
        }
        Self {
            rows: n,
            cols,
            stride,
            data,
        }
    }

    /// Rows given as sets of column indices.
    pub fn from_row_supports(cols: usize, supports: &[Vec<usize>]) -> Self {
        let mut m = Self::zeros(supports.len(), cols);
        for (r, support) in supports.iter().enumerate() {
            for &c in support {
                m.flip(r, c);
            }
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        assert!(
            r < self.rows && c < self.cols,
            "index ({r}, {c}) out of range"
        );
        (self.data[r * self.stride + c / WORD_BITS] >> (c % WORD_BITS)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: bool) {
        assert!(
            r < self.rows && c < self.cols,
            "index ({r}, {c}) out of range"
        );
        let w = &mut self.data[r * self.stride + c / WORD_BITS];
        let mask = 1u64 << (c % WORD_BITS);
        if value {
            *w |= mask;
        } else {
            *w &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, r: usize, c: usize) {
        assert!(
            r < self.rows && c < self.cols,
            "index ({r}, {c}) out of range"
        );
        self.data[r * self.stride + c / WORD_BITS] ^= 1u64 << (c % WORD_BITS);
    }

    #[inline]
    pub fn row_words(&self, r: usize) -> &[u64] {
        &self.data[r * self.stride..(r + 1) * self.stride]
    }

    pub fn row(&self, r: usize) -> BitVec {
        BitVec::from_words(self.row_words(r).to_vec(), self.cols)
    }

    pub fn row_weight(&self, r: usize) -> usize {
        self.row_words(r)
            .iter()
            .map(|w| w.count_ones() as usize)
            .sum()
    }

    pub fn row_is_zero(&self, r: usize) -> bool {
        self.row_words(r).iter().all(|&w| w == 0)
    }

    pub fn column(&self, c: usize) -> BitVec {
        BitVec::from_indices(self.rows, (0..self.rows).filter(|&r| self.get(r, c)))
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&w| w == 0)
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn transpose(&self) -> BinMatrix {
        let mut t = BinMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for (k, &w) in self.row_words(r).iter().enumerate() {
                let mut w = w;
                while w != 0 {
                    let c = k * WORD_BITS + w.trailing_zeros() as usize;
                    w &= w - 1;
                    t.data[c * t.stride + r / WORD_BITS] |= 1u64 << (r % WORD_BITS);
                }
            }
        }
        t
    }

    /// Matrix product over GF(2).
    pub fn mul(&self, rhs: &BinMatrix) -> Result<BinMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = BinMatrix::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            let dst = r * out.stride;
            for (k, &w) in self.row_words(r).iter().enumerate() {
                let mut w = w;
                while w != 0 {
                    let inner = k * WORD_BITS + w.trailing_zeros() as usize;
                    w &= w - 1;
                    let src = rhs.row_words(inner);
                    xor_into(&mut out.data[dst..dst + out.stride], src);
                }
            }
        }
        Ok(out)
    }

    /// Row subset in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> BinMatrix {
        let mut data = Vec::with_capacity(rows.len() * self.stride);
        for &r in rows {
            assert!(r < self.rows, "row {r} out of range");
            data.extend_from_slice(self.row_words(r));
        }
        BinMatrix {
            rows: rows.len(),
            cols: self.cols,
            stride: self.stride,
            data,
        }
    }

    /// Column subset in the given order.
    ///
    /// # Panics
    /// Panics if an index is out of range.
    pub fn restrict_columns(&self, cols: &[usize]) -> BinMatrix {
        for &c in cols {
            assert!(
                c < self.cols,
                "column {c} out of range for {} columns",
                self.cols
            );
        }
        let mut out = BinMatrix::zeros(self.rows, cols.len());
        for r in 0..self.rows {
            let src = self.row_words(r);
            let dst = &mut out.data[r * out.stride..(r + 1) * out.stride];
            for (k, &c) in cols.iter().enumerate() {
                if (src[c / WORD_BITS] >> (c % WORD_BITS)) & 1 == 1 {
                    dst[k / WORD_BITS] |= 1u64 << (k % WORD_BITS);
                }
            }
        }
        out
    }

    /// Horizontal concatenation `[self | rhs]`.
    pub fn hstack(&self, rhs: &BinMatrix) -> Result<BinMatrix> {
        if self.rows != rhs.rows {
            return Err(Error::ShapeMismatch(format!(
                "hstack of {} and {} rows",
                self.rows, rhs.rows
            )));
        }
        let mut out = BinMatrix::zeros(self.rows, self.cols + rhs.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                if self.get(r, c) {
                    out.set(r, c, true);
                }
            }
            for c in 0..rhs.cols {
                if rhs.get(r, c) {
                    out.set(r, self.cols + c, true);
                }
            }
        }
        Ok(out)
    }

    /// Vertical concatenation.
    pub fn vstack(&self, rhs: &BinMatrix) -> Result<BinMatrix> {
        if self.cols != rhs.cols {
            return Err(Error::ShapeMismatch(format!(
                "vstack of {} and {} columns",
                self.cols, rhs.cols
            )));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&rhs.data);
        Ok(BinMatrix {
            rows: self.rows + rhs.rows,
            cols: self.cols,
            stride: self.stride,
            data,
        })
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        let (lo, hi) = (a.min(b), a.max(b));
        let s = self.stride;
        let (head, tail) = self.data.split_at_mut(hi * s);
        head[lo * s..(lo + 1) * s].swap_with_slice(&mut tail[..s]);
    }

    /// `row[dst] ^= row[src]`, touching only words from `from_word` on.
    fn xor_row(&mut self, dst: usize, src: usize, from_word: usize) {
        let s = self.stride;
        let (d, sr) = if dst < src {
            let (head, tail) = self.data.split_at_mut(src * s);
            (&mut head[dst * s..(dst + 1) * s], &tail[..s])
        } else {
            let (head, tail) = self.data.split_at_mut(dst * s);
            (&mut tail[..s], &head[src * s..(src + 1) * s])
        };
        xor_into(&mut d[from_word..], &sr[from_word..]);
    }

    /// Gaussian elimination in place. With `full`, rows above each pivot are
    /// cleared too (reduced form). Returns the pivot columns.
    fn eliminate(&mut self, full: bool) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..self.cols {
            if r == self.rows {
                break;
            }
            let word = c / WORD_BITS;
            let mask = 1u64 << (c % WORD_BITS);
            let Some(p) = (r..self.rows).find(|&i| self.data[i * self.stride + word] & mask != 0)
            else {
                continue;
            };
            self.swap_rows(r, p);
            let start = if full { 0 } else { r + 1 };
            for i in start..self.rows {
                if i != r && self.data[i * self.stride + word] & mask != 0 {
                    self.xor_row(i, r, word);
                }
            }
            pivots.push(c);
            r += 1;
        }
        pivots
    }

    pub fn rref(&self) -> RrefResult {
        let mut m = self.clone();
        let pivot_columns = m.eliminate(true);
        RrefResult {
            rank: pivot_columns.len(),
            matrix: m,
            pivot_columns,
        }
    }

    pub fn rank(&self) -> usize {
        let mut m = self.clone();
        m.eliminate(false).len()
    }

    /// Basis of the right nullspace as the columns of a `cols x (cols - rank)`
    /// matrix. Column `j` belongs to the `j`-th free column of the reduced
    /// form in ascending order: it has a one at that free index, and at each
    /// pivot index the entry of the corresponding reduced row.
    pub fn nullspace(&self) -> BinMatrix {
        let RrefResult {
            matrix,
            pivot_columns,
            ..
        } = self.rref();
        let mut is_pivot = vec![false; self.cols];
        for &c in &pivot_columns {
            is_pivot[c] = true;
        }
        let free: Vec<usize> = (0..self.cols).filter(|&c| !is_pivot[c]).collect();
        let mut t = BinMatrix::zeros(self.cols, free.len());
        for (j, &f) in free.iter().enumerate() {
            t.set(f, j, true);
        }
        for (k, &pc) in pivot_columns.iter().enumerate() {
            let src = matrix.row_words(k);
            let dst = &mut t.data[pc * t.stride..(pc + 1) * t.stride];
            for (j, &f) in free.iter().enumerate() {
                if (src[f / WORD_BITS] >> (f % WORD_BITS)) & 1 == 1 {
                    dst[j / WORD_BITS] |= 1u64 << (j % WORD_BITS);
                }
            }
        }
        t
    }

    /// Rows in the span of `self` that vanish on `target_cols`.
    ///
    /// Row reduction with the target columns ordered first brings the matrix
    /// to the block form `(Q0 Qt; Q1 0)`. The returned matrix holds the rows
    /// of the lower block (with all original columns, target columns zero) and
    /// the count is the number of rows in the upper block, i.e. the rank of
    /// the target-column restriction.
    pub fn zero_block_reduce(&self, target_cols: &[usize]) -> (BinMatrix, usize) {
        let (upper, lower) = self.block_split(target_cols);
        (lower, upper.rows())
    }

    /// Both blocks of the target-first reduced form: the rows with a pivot
    /// on a target column, and the rows vanishing there. Together they form
    /// a basis of the row space.
    pub fn block_split(&self, target_cols: &[usize]) -> (BinMatrix, BinMatrix) {
        let mut in_target = vec![false; self.cols];
        for &c in target_cols {
            assert!(c < self.cols, "target column {c} out of range");
            in_target[c] = true;
        }
        let order: Vec<usize> = target_cols
            .iter()
            .copied()
            .chain((0..self.cols).filter(|&c| !in_target[c]))
            .collect();
        let n_target = target_cols.len();
        let reduced = self.restrict_columns(&order).rref();
        let split = reduced
            .pivot_columns
            .iter()
            .take_while(|&&c| c < n_target)
            .count();
        let unpermute = |rows: std::ops::Range<usize>| {
            let mut out = BinMatrix::zeros(rows.len(), self.cols);
            for (k, r) in rows.enumerate() {
                for (pc, &oc) in order.iter().enumerate() {
                    if reduced.matrix.get(r, pc) {
                        out.set(k, oc, true);
                    }
                }
            }
            out
        };
        (unpermute(0..split), unpermute(split..reduced.rank))
    }

    /// `self * v` for a column vector `v`.
    pub fn mul_vec(&self, v: &BitVec) -> BitVec {
        assert_eq!(v.len(), self.cols, "vector length mismatch");
        let mut out = BitVec::zeros(self.rows);
        for r in 0..self.rows {
            let parity = self
                .row_words(r)
                .iter()
                .zip(v.words())
                .fold(0u32, |acc, (a, b)| acc ^ (a & b).count_ones());
            if parity & 1 == 1 {
                out.set(r, true);
            }
        }
        out
    }

    /// Uniformly random element of the column span. With
    /// `exclude_identity` the all-zero combination is rejected.
    pub fn random_combination<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        exclude_identity: bool,
    ) -> Result<BitVec> {
        if self.cols == 0 && exclude_identity {
            return Err(Error::TrivialGroup);
        }
        loop {
            let mut alpha = BitVec::zeros(self.cols);
            for w in alpha.words_mut() {
                *w = rng.random();
            }
            alpha.clear_tail();
            if exclude_identity && alpha.is_zero() {
                continue;
            }
            return Ok(self.mul_vec(&alpha));
        }
    }
}

impl fmt::Debug for BinMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BinMatrix {}x{}", self.rows, self.cols)?;
        write!(f, "{self}")
    }
}

/// One line of `0`/`1` characters per row.
impl fmt::Display for BinMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.rows {
            for c in 0..self.cols {
                f.write_str(if self.get(r, c) { "1" } else { "0" })?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl FromStr for BinMatrix {
    type Err = Error;

    /// Parses the `Display` format. Blank lines are skipped; every row must
    /// have the same width.
    fn from_str(s: &str) -> Result<Self> {
        let mut rows = Vec::new();
        let mut width = None;
        for (n, line) in s.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut bits = Vec::with_capacity(line.len());
            for ch in line.chars() {
                match ch {
                    '0' => bits.push(false),
                    '1' => bits.push(true),
                    other => {
                        return Err(Error::Parse {
                            line: n + 1,
                            reason: format!("unexpected character {other:?}"),
                        })
                    }
                }
            }
            match width {
                None => width = Some(bits.len()),
                Some(w) if w != bits.len() => {
                    return Err(Error::Parse {
                        line: n + 1,
                        reason: format!("row has {} columns, expected {w}", bits.len()),
                    })
                }
                _ => {}
            }
            rows.push(BitVec::from_bools(&bits));
        }
        Ok(BinMatrix::from_rows(width.unwrap_or(0), &rows))
    }
}

/// Echelon basis that accepts vectors one at a time.
///
/// Each stored vector has a distinct lowest set bit, so insertion reduces a
/// candidate in at most `rank` steps. The running rank always equals the
/// batch rank of the inserted vectors.
#[derive(Clone, Debug)]
pub struct IncrementalBasis {
    len: usize,
    by_lead: Vec<Option<usize>>,
    vectors: Vec<BitVec>,
}

impl IncrementalBasis {
    pub fn new(len: usize) -> Self {
        Self {
            len,
            by_lead: vec![None; len],
            vectors: Vec::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.vectors.len()
    }

    /// Inserts `v`; returns true if it was independent of the basis.
    pub fn insert(&mut self, mut v: BitVec) -> bool {
        assert_eq!(v.len(), self.len, "vector length mismatch");
        while let Some(lead) = v.first_one() {
            match self.by_lead[lead] {
                Some(k) => v.xor_assign(&self.vectors[k]),
                None => {
                    self.by_lead[lead] = Some(self.vectors.len());
                    self.vectors.push(v);
                    return true;
                }
            }
        }
        false
    }

    pub fn contains(&self, v: &BitVec) -> bool {
        let mut v = v.clone();
        while let Some(lead) = v.first_one() {
            match self.by_lead[lead] {
                Some(k) => v.xor_assign(&self.vectors[k]),
                None => return false,
            }
        }
        true
    }
}
