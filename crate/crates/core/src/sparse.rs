//! Compressed sparse row storage.
//!
//! Assembly always sorts column indices within a row and merges duplicates,
//! so two matrices built from the same entries are bitwise identical.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Mul};

use num_complex::Complex64;
use num_traits::Zero;

/// Scalar types a [`CsrMatrix`] can hold.
pub trait Scalar: Copy + Zero + Add<Output = Self> + Mul<Output = Self> + PartialEq {}

impl Scalar for f64 {}
impl Scalar for Complex64 {}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicate positions
    /// are summed. Explicit zeros are kept so the sparsity pattern only depends
    /// on the triplet positions.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, T)]) -> Self {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&k| (triplets[k].0, triplets[k].1));

        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<T> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for &k in &order {
            let (r, c, v) = triplets[k];
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                let tail = values.last_mut().expect("duplicate follows an entry");
                *tail = *tail + v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self
    where
        T: num_traits::One,
    {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![T::one(); n],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[T]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    /// Entry `(r, c)`, zero when outside the pattern.
    pub fn get(&self, r: usize, c: usize) -> T {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => T::zero(),
        }
    }

    /// Lower and upper bandwidth.
    pub fn bandwidth(&self) -> (usize, usize) {
        self.iter().fold((0, 0), |(lo, up), (r, c, _)| {
            if c < r {
                (lo.max(r - c), up)
            } else {
                (lo, up.max(c - r))
            }
        })
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> CsrMatrix<U> {
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        let triplets: Vec<_> = self.iter().map(|(r, c, v)| (c, r, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, &triplets)
    }

    /// `alpha * self + beta * other` over the union of both patterns.
    pub fn linear_combination(&self, alpha: T, other: &Self, beta: T) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let triplets: Vec<_> = self
            .iter()
            .map(|(r, c, v)| (r, c, alpha * v))
            .chain(other.iter().map(|(r, c, v)| (r, c, beta * v)))
            .collect();
        Self::from_triplets(self.nrows, self.ncols, &triplets)
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let mut triplets = Vec::with_capacity(self.nnz() * other.nnz());
        for (r1, c1, v1) in self.iter() {
            for (r2, c2, v2) in other.iter() {
                triplets.push((r1 * other.nrows + r2, c1 * other.ncols + c2, v1 * v2));
            }
        }
        Self::from_triplets(self.nrows * other.nrows, self.ncols * other.ncols, &triplets)
    }

    /// `y = self * x`.
    pub fn mul_vec_into<V>(&self, x: &[V], y: &mut [V])
    where
        V: Copy + Zero + Add<Output = V>,
        T: Mul<V, Output = V>,
    {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (r, out) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(r);
            *out = cols.iter().zip(vals).fold(V::zero(), |acc, (&c, &v)| acc + v * x[c]);
        }
    }

    pub fn mul_vec<V>(&self, x: &[V]) -> Vec<V>
    where
        V: Copy + Zero + Add<Output = V>,
        T: Mul<V, Output = V>,
    {
        let mut y = vec![V::zero(); self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// Dense row-major copy; intended for small matrices and checks.
    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut dense = vec![vec![T::zero(); self.ncols]; self.nrows];
        for (r, c, v) in self.iter() {
            dense[r][c] = v;
        }
        dense
    }
}

impl CsrMatrix<f64> {
    pub fn to_complex(&self) -> CsrMatrix<Complex64> {
        self.map(|v| Complex64::new(v, 0.0))
    }

    pub fn is_symmetric(&self) -> bool {
        self.iter().all(|(r, c, v)| self.get(c, r) == v)
    }
}

impl CsrMatrix<Complex64> {
    pub fn conj_transpose(&self) -> Self {
        self.transpose().map(|v| v.conj())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed_and_rows_sorted() {
        let m = CsrMatrix::from_triplets(2, 3, &[(1, 2, 1.0), (0, 1, 2.0), (1, 0, 3.0), (0, 1, 0.5)]);
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.row(0), (&[1usize][..], &[2.5][..]));
        assert_eq!(m.row(1), (&[0usize, 2][..], &[3.0, 1.0][..]));
        assert_eq!(m.mul_vec(&[1.0, 1.0, 1.0]), vec![2.5, 4.0]);
    }

    #[test]
    fn kron_of_identities_is_identity() {
        let i2 = CsrMatrix::<f64>::identity(2);
        let i3 = CsrMatrix::<f64>::identity(3);
        assert_eq!(i2.kron(&i3), CsrMatrix::identity(6));
    }

    #[test]
    fn kron_places_blocks() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 1, 2.0), (1, 0, 3.0)]);
        let b = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, 5.0)]);
        let k = a.kron(&b);
        assert_eq!(k.get(0, 2), 2.0);
        assert_eq!(k.get(1, 3), 10.0);
        assert_eq!(k.get(2, 0), 3.0);
        assert_eq!(k.get(3, 1), 15.0);
        assert_eq!(k.nnz(), 4);
    }

    #[test]
    fn conj_transpose_conjugates() {
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 1, Complex64::new(1.0, 2.0))]);
        assert_eq!(m.conj_transpose().get(1, 0), Complex64::new(1.0, -2.0));
    }

    #[test]
    fn bandwidth_reports_both_sides() {
        let m = CsrMatrix::from_triplets(4, 4, &[(3, 0, 1.0), (0, 1, 1.0), (2, 2, 1.0)]);
        assert_eq!(m.bandwidth(), (3, 1));
    }
}
