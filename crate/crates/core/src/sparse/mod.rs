//! Compressed sparse column storage and the direct factorizations built on it.
//!
//! [`CscMatrix`] is generic over the scalar so the network code can reuse the
//! same container for complex admittance matrices. Triplet assembly sums
//! duplicate entries and keeps explicit zeros, so a pattern assembled from a
//! structural template stays stable when numerical values happen to cancel.

mod amd;
mod ldl;
mod lu;

pub use amd::amd_order;
pub use ldl::{ldl_factor, LdlFactors, LdlPivot};
pub use lu::{lu_factor, LuFactors};

use num_complex::Complex64;
use num_traits::Zero;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use crate::error::SparseError;

/// Element types a [`CscMatrix`] can hold.
pub trait Scalar:
    Copy
    + Zero
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + PartialEq
    + Send
    + Sync
    + std::fmt::Debug
{
    fn abs_val(self) -> f64;
    fn conj_val(self) -> Self;
    fn from_f64(v: f64) -> Self;
}

impl Scalar for f64 {
    fn abs_val(self) -> f64 {
        self.abs()
    }
    fn conj_val(self) -> Self {
        self
    }
    fn from_f64(v: f64) -> Self {
        v
    }
}

impl Scalar for Complex64 {
    fn abs_val(self) -> f64 {
        self.norm()
    }
    fn conj_val(self) -> Self {
        self.conj()
    }
    fn from_f64(v: f64) -> Self {
        Complex64::new(v, 0.0)
    }
}

/// A sparse matrix in compressed sparse column form with sorted row indices.
#[derive(Clone, Debug, PartialEq)]
pub struct CscMatrix<T> {
    nrows: usize,
    ncols: usize,
    colptr: Vec<usize>,
    rowind: Vec<usize>,
    values: Vec<T>,
}

/// Real sparse matrix, the common case.
pub type SparseMat = CscMatrix<f64>;
/// Complex sparse matrix used for admittances.
pub type ComplexMat = CscMatrix<Complex64>;

/// Coordinate-form accumulator that compresses into a [`CscMatrix`].
#[derive(Clone, Debug)]
pub struct Triplets<T> {
    nrows: usize,
    ncols: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<T>,
}

impl<T: Scalar> Triplets<T> {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self::with_capacity(nrows, ncols, 0)
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        Triplets {
            nrows,
            ncols,
            rows: Vec::with_capacity(cap),
            cols: Vec::with_capacity(cap),
            vals: Vec::with_capacity(cap),
        }
    }

    /// Records `v` at `(i, j)`. Panics on out-of-range indices.
    #[inline]
    pub fn push(&mut self, i: usize, j: usize, v: T) {
        assert!(i < self.nrows && j < self.ncols, "triplet ({i},{j}) outside {}x{}", self.nrows, self.ncols);
        self.rows.push(i);
        self.cols.push(j);
        self.vals.push(v);
    }

    /// Checked variant of [`Triplets::push`].
    pub fn try_push(&mut self, i: usize, j: usize, v: T) -> Result<(), SparseError> {
        if i >= self.nrows || j >= self.ncols {
            return Err(SparseError::IndexOutOfRange { row: i, col: j, nrows: self.nrows, ncols: self.ncols });
        }
        self.push(i, j, v);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }

    /// Adds every entry of `m` shifted by `(r0, c0)`.
    pub fn push_block(&mut self, r0: usize, c0: usize, m: &CscMatrix<T>) {
        for j in 0..m.ncols {
            for (i, v) in m.col_iter(j) {
                self.push(r0 + i, c0 + j, v);
            }
        }
    }

    /// Adds the transpose of `m` shifted by `(r0, c0)`.
    pub fn push_block_transposed(&mut self, r0: usize, c0: usize, m: &CscMatrix<T>) {
        for j in 0..m.ncols {
            for (i, v) in m.col_iter(j) {
                self.push(r0 + j, c0 + i, v);
            }
        }
    }

    /// Compresses to CSC, summing duplicates.
    pub fn to_csc(&self) -> CscMatrix<T> {
        let n = self.ncols;
        let mut count = vec![0usize; n + 1];
        for &c in &self.cols {
            count[c + 1] += 1;
        }
        for j in 0..n {
            count[j + 1] += count[j];
        }
        let mut next = count.clone();
        let nnz = self.vals.len();
        let mut ri = vec![0usize; nnz];
        let mut rv = vec![T::zero(); nnz];
        for k in 0..nnz {
            let c = self.cols[k];
            let dst = next[c];
            next[c] += 1;
            ri[dst] = self.rows[k];
            rv[dst] = self.vals[k];
        }
        let mut colptr = Vec::with_capacity(n + 1);
        let mut rowind = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        colptr.push(0);
        let mut order: Vec<usize> = Vec::new();
        for j in 0..n {
            let (a, b) = (count[j], count[j + 1]);
            order.clear();
            order.extend(a..b);
            order.sort_by_key(|&k| ri[k]);
            let mut last = usize::MAX;
            for &k in &order {
                if ri[k] == last {
                    let l = values.len() - 1;
                    values[l] += rv[k];
                } else {
                    rowind.push(ri[k]);
                    values.push(rv[k]);
                    last = ri[k];
                }
            }
            colptr.push(rowind.len());
        }
        CscMatrix { nrows: self.nrows, ncols: n, colptr, rowind, values }
    }
}

impl<T: Scalar> CscMatrix<T> {
    /// Builds from raw parts, validating ordering and bounds.
    pub fn from_parts(
        nrows: usize,
        ncols: usize,
        colptr: Vec<usize>,
        rowind: Vec<usize>,
        values: Vec<T>,
    ) -> Result<Self, SparseError> {
        if colptr.len() != ncols + 1 || colptr[0] != 0 || rowind.len() != values.len() {
            return Err(SparseError::Malformed("column pointer length or start"));
        }
        if *colptr.last().unwrap() != rowind.len() {
            return Err(SparseError::Malformed("column pointer end"));
        }
        for j in 0..ncols {
            if colptr[j] > colptr[j + 1] {
                return Err(SparseError::Malformed("column pointers decrease"));
            }
            let col = &rowind[colptr[j]..colptr[j + 1]];
            for w in col.windows(2) {
                if w[0] >= w[1] {
                    return Err(SparseError::Malformed("row indices not strictly increasing"));
                }
            }
            if let Some(&r) = col.last() {
                if r >= nrows {
                    return Err(SparseError::IndexOutOfRange { row: r, col: j, nrows, ncols });
                }
            }
        }
        Ok(CscMatrix { nrows, ncols, colptr, rowind, values })
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CscMatrix { nrows, ncols, colptr: vec![0; ncols + 1], rowind: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diag(&vec![T::from_f64(1.0); n])
    }

    pub fn from_diag(d: &[T]) -> Self {
        let n = d.len();
        CscMatrix { nrows: n, ncols: n, colptr: (0..=n).collect(), rowind: (0..n).collect(), values: d.to_vec() }
    }

    pub fn from_dense(rows: usize, cols: usize, data: &[T]) -> Self {
        let mut t = Triplets::new(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                let v = data[i * cols + j];
                if v != T::zero() {
                    t.push(i, j, v);
                }
            }
        }
        t.to_csc()
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.nrows
    }
    #[inline]
    pub fn ncols(&self) -> usize {
        self.ncols
    }
    #[inline]
    pub fn nnz(&self) -> usize {
        self.rowind.len()
    }
    #[inline]
    pub fn colptr(&self) -> &[usize] {
        &self.colptr
    }
    #[inline]
    pub fn rowind(&self) -> &[usize] {
        &self.rowind
    }
    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }
    #[inline]
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    /// Iterates `(row, value)` over column `j`.
    #[inline]
    pub fn col_iter(&self, j: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let (a, b) = (self.colptr[j], self.colptr[j + 1]);
        self.rowind[a..b].iter().copied().zip(self.values[a..b].iter().copied())
    }

    /// Value at `(i, j)`, zero when structurally absent.
    pub fn get(&self, i: usize, j: usize) -> T {
        let (a, b) = (self.colptr[j], self.colptr[j + 1]);
        match self.rowind[a..b].binary_search(&i) {
            Ok(k) => self.values[a + k],
            Err(_) => T::zero(),
        }
    }

    /// Position of `(i, j)` in the value array.
    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        let (a, b) = (self.colptr[j], self.colptr[j + 1]);
        self.rowind[a..b].binary_search(&i).ok().map(|k| a + k)
    }

    /// Iterates all stored `(row, col, value)` entries column by column.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.ncols).flat_map(move |j| self.col_iter(j).map(move |(i, v)| (i, j, v)))
    }

    pub fn transpose(&self) -> Self {
        let mut count = vec![0usize; self.nrows + 1];
        for &r in &self.rowind {
            count[r + 1] += 1;
        }
        for i in 0..self.nrows {
            count[i + 1] += count[i];
        }
        let mut next = count.clone();
        let mut rowind = vec![0usize; self.nnz()];
        let mut values = vec![T::zero(); self.nnz()];
        for j in 0..self.ncols {
            for (i, v) in self.col_iter(j) {
                let d = next[i];
                next[i] += 1;
                rowind[d] = j;
                values[d] = v;
            }
        }
        CscMatrix { nrows: self.ncols, ncols: self.nrows, colptr: count, rowind, values }
    }

    /// Elementwise map of the stored values, keeping the pattern.
    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> CscMatrix<U> {
        CscMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            colptr: self.colptr.clone(),
            rowind: self.rowind.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn conj(&self) -> Self {
        self.map(|v| v.conj_val())
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    /// `diag(d) * self`.
    pub fn scale_rows(&self, d: &[T]) -> Self {
        assert_eq!(d.len(), self.nrows);
        let mut out = self.clone();
        for (k, v) in out.values.iter_mut().enumerate() {
            *v = d[self.rowind[k]] * *v;
        }
        out
    }

    /// `self * diag(d)`.
    pub fn scale_cols(&self, d: &[T]) -> Self {
        assert_eq!(d.len(), self.ncols);
        let mut out = self.clone();
        for j in 0..self.ncols {
            for k in self.colptr[j]..self.colptr[j + 1] {
                out.values[k] = out.values[k] * d[j];
            }
        }
        out
    }

    /// `alpha * self + beta * other` with the union pattern.
    pub fn add_scaled(&self, alpha: T, other: &Self, beta: T) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut colptr = Vec::with_capacity(self.ncols + 1);
        let mut rowind = Vec::with_capacity(self.nnz() + other.nnz());
        let mut values = Vec::with_capacity(self.nnz() + other.nnz());
        colptr.push(0);
        for j in 0..self.ncols {
            let (mut a, ae) = (self.colptr[j], self.colptr[j + 1]);
            let (mut b, be) = (other.colptr[j], other.colptr[j + 1]);
            while a < ae || b < be {
                let ra = if a < ae { self.rowind[a] } else { usize::MAX };
                let rb = if b < be { other.rowind[b] } else { usize::MAX };
                if ra == rb {
                    rowind.push(ra);
                    values.push(alpha * self.values[a] + beta * other.values[b]);
                    a += 1;
                    b += 1;
                } else if ra < rb {
                    rowind.push(ra);
                    values.push(alpha * self.values[a]);
                    a += 1;
                } else {
                    rowind.push(rb);
                    values.push(beta * other.values[b]);
                    b += 1;
                }
            }
            colptr.push(rowind.len());
        }
        CscMatrix { nrows: self.nrows, ncols: self.ncols, colptr, rowind, values }
    }

    pub fn add(&self, other: &Self) -> Self {
        let one = T::from_f64(1.0);
        self.add_scaled(one, other, one)
    }

    /// Sparse product `self * other` (Gustavson).
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows, "dimension mismatch in matmul");
        let m = self.nrows;
        let mut mark = vec![usize::MAX; m];
        let mut acc = vec![T::zero(); m];
        let mut colptr = Vec::with_capacity(other.ncols + 1);
        let mut rowind = Vec::new();
        let mut values = Vec::new();
        let mut touched: Vec<usize> = Vec::new();
        colptr.push(0);
        for j in 0..other.ncols {
            touched.clear();
            for (k, bkj) in other.col_iter(j) {
                for (i, aik) in self.col_iter(k) {
                    if mark[i] != j {
                        mark[i] = j;
                        acc[i] = aik * bkj;
                        touched.push(i);
                    } else {
                        acc[i] += aik * bkj;
                    }
                }
            }
            touched.sort_unstable();
            for &i in &touched {
                rowind.push(i);
                values.push(acc[i]);
            }
            colptr.push(rowind.len());
        }
        CscMatrix { nrows: m, ncols: other.ncols, colptr, rowind, values }
    }

    /// `y = self * x`.
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![T::zero(); self.nrows];
        for j in 0..self.ncols {
            let xj = x[j];
            for (i, v) in self.col_iter(j) {
                y[i] += v * xj;
            }
        }
        y
    }

    /// `y = selfᵀ * x`.
    pub fn tr_mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.nrows);
        (0..self.ncols)
            .map(|j| {
                let mut s = T::zero();
                for (i, v) in self.col_iter(j) {
                    s += v * x[i];
                }
                s
            })
            .collect()
    }

    /// Columns `c0..c1` as a new matrix.
    pub fn slice_cols(&self, c0: usize, c1: usize) -> Self {
        let (a, b) = (self.colptr[c0], self.colptr[c1]);
        CscMatrix {
            nrows: self.nrows,
            ncols: c1 - c0,
            colptr: self.colptr[c0..=c1].iter().map(|&p| p - a).collect(),
            rowind: self.rowind[a..b].to_vec(),
            values: self.values[a..b].to_vec(),
        }
    }

    /// The block `rows r0..r1` × `cols c0..c1`.
    pub fn block(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> Self {
        let mut colptr = Vec::with_capacity(c1 - c0 + 1);
        let mut rowind = Vec::new();
        let mut values = Vec::new();
        colptr.push(0);
        for j in c0..c1 {
            let (a, b) = (self.colptr[j], self.colptr[j + 1]);
            let col = &self.rowind[a..b];
            let lo = a + col.partition_point(|&r| r < r0);
            let hi = a + col.partition_point(|&r| r < r1);
            for k in lo..hi {
                rowind.push(self.rowind[k] - r0);
                values.push(self.values[k]);
            }
            colptr.push(rowind.len());
        }
        CscMatrix { nrows: r1 - r0, ncols: c1 - c0, colptr, rowind, values }
    }

    /// Symmetric permutation `P A Pᵀ` where `perm[new] = old`.
    pub fn permute_sym(&self, perm: &Permutation) -> Self {
        assert_eq!(self.nrows, self.ncols);
        let inv = perm.inverse();
        let mut t = Triplets::with_capacity(self.nrows, self.ncols, self.nnz());
        for (i, j, v) in self.iter() {
            t.push(inv.get(i), inv.get(j), v);
        }
        t.to_csc()
    }

    /// Structural equality of the sparsity patterns.
    pub fn same_pattern(&self, other: &Self) -> bool {
        self.nrows == other.nrows
            && self.ncols == other.ncols
            && self.colptr == other.colptr
            && self.rowind == other.rowind
    }

    /// Largest absolute stored value.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs_val()))
    }

    /// Row-major dense copy, meant for tests and small oracles.
    pub fn to_dense(&self) -> Vec<T> {
        let mut d = vec![T::zero(); self.nrows * self.ncols];
        for (i, j, v) in self.iter() {
            d[i * self.ncols + j] = v;
        }
        d
    }

    /// Drops entries with `|v| <= tol`.
    pub fn prune(&self, tol: f64) -> Self {
        let mut t = Triplets::with_capacity(self.nrows, self.ncols, self.nnz());
        for (i, j, v) in self.iter() {
            if v.abs_val() > tol {
                t.push(i, j, v);
            }
        }
        t.to_csc()
    }

    /// Pattern of `self + selfᵀ` without the diagonal, used by orderings.
    pub fn sym_pattern(&self) -> CscMatrix<f64> {
        assert_eq!(self.nrows, self.ncols);
        let mut t = Triplets::with_capacity(self.nrows, self.ncols, 2 * self.nnz());
        for (i, j, _) in self.iter() {
            if i != j {
                t.push(i, j, 1.0);
                t.push(j, i, 1.0);
            }
        }
        t.to_csc()
    }

    /// Adds `d[i]` to each diagonal entry, inserting missing ones.
    pub fn add_diag(&self, d: &[T]) -> Self {
        self.add(&CscMatrix::from_diag(d))
    }

    /// Stable 64-bit hash of the sparsity pattern.
    pub fn pattern_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |x: usize| {
            h ^= x as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        };
        feed(self.nrows);
        feed(self.ncols);
        self.colptr.iter().for_each(|&p| feed(p));
        self.rowind.iter().for_each(|&r| feed(r));
        h
    }
}

impl CscMatrix<f64> {
    /// Maximum absolute asymmetry relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let t = self.transpose();
        let diff = self.add_scaled(1.0, &t, -1.0);
        diff.max_abs() / scale
    }

    /// Real part of a complex matrix.
    pub fn real_of(m: &ComplexMat) -> Self {
        m.map(|v| v.re)
    }

    /// Imaginary part of a complex matrix.
    pub fn imag_of(m: &ComplexMat) -> Self {
        m.map(|v| v.im)
    }
}

/// A permutation stored as `perm[new] = old`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Permutation {
    perm: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation { perm: (0..n).collect() }
    }

    /// Validates that `perm` is a bijection on `0..n`.
    pub fn new(perm: Vec<usize>) -> Result<Self, SparseError> {
        let n = perm.len();
        let mut seen = vec![false; n];
        for &p in &perm {
            if p >= n || seen[p] {
                return Err(SparseError::Malformed("not a permutation"));
            }
            seen[p] = true;
        }
        Ok(Permutation { perm })
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    #[inline]
    pub fn get(&self, new: usize) -> usize {
        self.perm[new]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.perm
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.perm.len()];
        for (new, &old) in self.perm.iter().enumerate() {
            inv[old] = new;
        }
        Permutation { perm: inv }
    }

    /// `out[new] = x[perm[new]]`.
    pub fn apply<T: Copy>(&self, x: &[T]) -> Vec<T> {
        self.perm.iter().map(|&o| x[o]).collect()
    }

    /// `out[perm[new]] = x[new]`.
    pub fn apply_inverse<T: Copy + Default>(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::default(); x.len()];
        for (new, &old) in self.perm.iter().enumerate() {
            out[old] = x[new];
        }
        out
    }

    pub fn compose(&self, inner: &Permutation) -> Permutation {
        Permutation { perm: self.perm.iter().map(|&p| inner.perm[p]).collect() }
    }
}

/// `max_i |a_i - b_i|`.
pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Infinity norm of a vector.
pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SparseMat {
        let mut t = Triplets::new(3, 3);
        t.push(0, 0, 4.0);
        t.push(2, 0, 1.0);
        t.push(1, 1, 3.0);
        t.push(0, 2, 2.0);
        t.push(2, 2, 5.0);
        t.to_csc()
    }

    #[test]
    fn triplets_sum_duplicates_and_sort() {
        let mut t = Triplets::new(2, 2);
        t.push(1, 0, 1.0);
        t.push(0, 0, 2.0);
        t.push(1, 0, 3.0);
        let m = t.to_csc();
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(1, 0), 4.0);
        assert_eq!(m.rowind(), &[0, 1]);
    }

    #[test]
    fn out_of_range_is_rejected() {
        let mut t = Triplets::<f64>::new(2, 2);
        assert!(matches!(t.try_push(2, 0, 1.0), Err(SparseError::IndexOutOfRange { .. })));
    }

    #[test]
    fn transpose_roundtrip() {
        let m = sample();
        assert_eq!(m.transpose().transpose(), m);
        assert_eq!(m.transpose().get(0, 2), 1.0);
    }

    #[test]
    fn matmul_matches_dense() {
        let a = sample();
        let b = a.transpose();
        let c = a.matmul(&b).to_dense();
        let (ad, bd) = (a.to_dense(), b.to_dense());
        for i in 0..3 {
            for j in 0..3 {
                let s: f64 = (0..3).map(|k| ad[i * 3 + k] * bd[k * 3 + j]).sum();
                assert!((s - c[i * 3 + j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn block_and_slice() {
        let m = sample();
        let b = m.block(1, 3, 0, 2);
        assert_eq!(b.nrows(), 2);
        assert_eq!(b.get(1, 0), 1.0);
        assert_eq!(b.get(0, 1), 3.0);
        let s = m.slice_cols(2, 3);
        assert_eq!(s.get(2, 0), 5.0);
    }

    #[test]
    fn permutation_inverse_roundtrip() {
        let p = Permutation::new(vec![2, 0, 1]).unwrap();
        let x = [10.0, 20.0, 30.0];
        let y = p.apply(&x);
        assert_eq!(y, vec![30.0, 10.0, 20.0]);
        assert_eq!(p.apply_inverse(&y), x.to_vec());
        assert!(Permutation::new(vec![0, 0]).is_err());
    }

    #[test]
    fn permute_sym_moves_entries() {
        let m = sample();
        let p = Permutation::new(vec![2, 1, 0]).unwrap();
        let q = m.permute_sym(&p);
        assert_eq!(q.get(0, 0), 5.0);
        assert_eq!(q.get(0, 2), 1.0);
    }

    #[test]
    fn from_parts_validates() {
        assert!(SparseMat::from_parts(2, 1, vec![0, 2], vec![1, 0], vec![1.0, 1.0]).is_err());
        assert!(SparseMat::from_parts(2, 1, vec![0, 2], vec![0, 1], vec![1.0, 1.0]).is_ok());
    }
}
