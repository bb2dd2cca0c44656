//! Small dense row-major matrices over any [`Scalar`].

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = S::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<S>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            check_dim("matrix row length", c, row.len())?;
            data.extend(row);
        }
        Ok(Matrix {
            rows: r,
            cols: c,
            data,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn diag(d: &[S]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, x) in d.iter().enumerate() {
            m[(i, i)] = x.clone();
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<S>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].clone())
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        check_dim("matrix product", self.cols, other.rows)?;
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = &other[(k, j)];
                    if !b.is_zero() {
                        out[(i, j)] = out[(i, j)].clone() + a.clone() * b.clone();
                    }
                }
            }
        }
        Ok(out)
    }

    /// `M v`
    pub fn mul_vec(&self, v: &[S]) -> Result<Vec<S>> {
        check_dim("matrix-vector product", self.cols, v.len())?;
        Ok((0..self.rows)
            .map(|i| dot(self.row(i), v))
            .collect())
    }

    /// `vᵀ M`, skipping zero entries of `v`.
    pub fn vec_mul(&self, v: &[S]) -> Result<Vec<S>> {
        check_dim("vector-matrix product", self.rows, v.len())?;
        let mut out = vec![S::zero(); self.cols];
        for (i, vi) in v.iter().enumerate() {
            if vi.is_zero() {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                if !a.is_zero() {
                    *o = o.clone() + vi.clone() * a.clone();
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_dim("matrix sum rows", self.rows, other.rows)?;
        check_dim("matrix sum cols", self.cols, other.cols)?;
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a.clone() + b.clone())
                .collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(&-S::one()))
    }

    pub fn scale(&self, s: &S) -> Self {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a.clone() * s.clone()).collect(),
        }
    }

    /// Copies `block` into `self` with its top-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Self) {
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(r0 + i, c0 + j)] = block[(i, j)].clone();
            }
        }
    }

    pub fn block_diag(blocks: &[&Self]) -> Self {
        let r: usize = blocks.iter().map(|b| b.rows).sum();
        let c: usize = blocks.iter().map(|b| b.cols).sum();
        let mut out = Self::zeros(r, c);
        let (mut r0, mut c0) = (0, 0);
        for b in blocks {
            out.set_block(r0, c0, b);
            r0 += b.rows;
            c0 += b.cols;
        }
        out
    }

    /// Frobenius inner product.
    pub fn inner(&self, other: &Self) -> Result<S> {
        check_dim("matrix inner product rows", self.rows, other.rows)?;
        check_dim("matrix inner product cols", self.cols, other.cols)?;
        Ok(dot(&self.data, &other.data))
    }

    pub fn entries(&self) -> &[S] {
        &self.data
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> Matrix<T> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn to_f64(&self) -> Matrix<f64> {
        self.map(|x| x.to_f64())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.to_f64().abs()).fold(0.0, f64::max)
    }

    /// True when every entry is in {-1, 0, 1} and each row and column has at
    /// most one nonzero entry; such a matrix has operator norm at most one.
    pub fn is_signed_partial_permutation(&self) -> bool {
        let one = S::one();
        let mut col_used = vec![false; self.cols];
        for i in 0..self.rows {
            let mut seen = false;
            for (j, a) in self.row(i).iter().enumerate() {
                if a.is_zero() {
                    continue;
                }
                if a.abs() != one || seen || col_used[j] {
                    return false;
                }
                seen = true;
                col_used[j] = true;
            }
        }
        true
    }
}

impl<S> Index<(usize, usize)> for Matrix<S> {
    type Output = S;

    fn index(&self, (i, j): (usize, usize)) -> &S {
        &self.data[i * self.cols + j]
    }
}

impl<S> IndexMut<(usize, usize)> for Matrix<S> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        &mut self.data[i * self.cols + j]
    }
}

/// Row-compressed sparse matrix; each row keeps its nonzeros sorted by column.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<Vec<(usize, S)>>,
}

impl<S: Scalar> SparseMatrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        SparseMatrix {
            rows,
            cols,
            data: vec![Vec::new(); rows],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i].push((i, S::one()));
        }
        m
    }

    pub fn from_dense(m: &Matrix<S>) -> Self {
        let mut out = Self::zeros(m.rows(), m.cols());
        for i in 0..m.rows() {
            for (j, x) in m.row(i).iter().enumerate() {
                if !x.is_zero() {
                    out.data[i].push((j, x.clone()));
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> Matrix<S> {
        let mut m = Matrix::zeros(self.rows, self.cols);
        for (i, row) in self.data.iter().enumerate() {
            for (j, x) in row {
                m[(i, *j)] = x.clone();
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.data.iter().map(Vec::len).sum()
    }

    pub fn row(&self, i: usize) -> &[(usize, S)] {
        &self.data[i]
    }

    pub fn get(&self, i: usize, j: usize) -> S {
        match self.data[i].binary_search_by_key(&j, |e| e.0) {
            Ok(k) => self.data[i][k].1.clone(),
            Err(_) => S::zero(),
        }
    }

    /// Adds `x` to entry `(i, j)`, dropping it if the result is zero.
    pub fn add_to(&mut self, i: usize, j: usize, x: S) {
        let row = &mut self.data[i];
        match row.binary_search_by_key(&j, |e| e.0) {
            Ok(k) => {
                let v = row[k].1.clone() + x;
                if v.is_zero() {
                    row.remove(k);
                } else {
                    row[k].1 = v;
                }
            }
            Err(k) => {
                if !x.is_zero() {
                    row.insert(k, (j, x));
                }
            }
        }
    }

    /// `vᵀ M`.
    pub fn vec_mul(&self, v: &[S]) -> Result<Vec<S>> {
        check_dim("vector-matrix product", self.rows, v.len())?;
        let mut out = vec![S::zero(); self.cols];
        for (vi, row) in v.iter().zip(&self.data) {
            if vi.is_zero() {
                continue;
            }
            for (j, a) in row {
                out[*j] = out[*j].clone() + vi.clone() * a.clone();
            }
        }
        Ok(out)
    }

    /// `M v`
    pub fn mul_vec(&self, v: &[S]) -> Result<Vec<S>> {
        check_dim("matrix-vector product", self.cols, v.len())?;
        Ok(self
            .data
            .iter()
            .map(|row| {
                row.iter()
                    .fold(S::zero(), |acc, (j, a)| acc + a.clone() * v[*j].clone())
            })
            .collect())
    }

    pub fn scale(&self, s: &S) -> Self {
        if s.is_zero() {
            return Self::zeros(self.rows, self.cols);
        }
        SparseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .map(|row| row.iter().map(|(j, a)| (*j, a.clone() * s.clone())).collect())
                .collect(),
        }
    }

    /// Adds `block` with its top-left corner at `(r0, c0)`.
    pub fn add_block(&mut self, r0: usize, c0: usize, block: &Self) {
        for (i, row) in block.data.iter().enumerate() {
            for (j, a) in row {
                self.add_to(r0 + i, c0 + j, a.clone());
            }
        }
    }

    pub fn block_diag(blocks: &[&Self]) -> Self {
        let r: usize = blocks.iter().map(|b| b.rows).sum();
        let c: usize = blocks.iter().map(|b| b.cols).sum();
        let mut out = Self::zeros(r, c);
        let (mut r0, mut c0) = (0, 0);
        for b in blocks {
            out.add_block(r0, c0, b);
            r0 += b.rows;
            c0 += b.cols;
        }
        out
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> SparseMatrix<T> {
        let mut out = SparseMatrix::zeros(self.rows, self.cols);
        for (i, row) in self.data.iter().enumerate() {
            for (j, a) in row {
                out.add_to(i, *j, f(a));
            }
        }
        out
    }

    /// Entries in {-1, 0, 1} with at most one nonzero per row and per column.
    pub fn is_signed_partial_permutation(&self) -> bool {
        let one = S::one();
        let mut col_used = vec![false; self.cols];
        for row in &self.data {
            if row.len() > 1 {
                return false;
            }
            for (j, a) in row {
                if a.abs() != one || col_used[*j] {
                    return false;
                }
                col_used[*j] = true;
            }
        }
        true
    }
}

pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter()
        .zip(b)
        .fold(S::zero(), |acc, (x, y)| acc + x.clone() * y.clone())
}

pub fn norm_sq<S: Scalar>(a: &[S]) -> S {
    dot(a, a)
}

pub fn scale_vec<S: Scalar>(a: &[S], s: &S) -> Vec<S> {
    a.iter().map(|x| x.clone() * s.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_and_transpose() {
        let a = Matrix::from_rows(vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = a.matmul(&Matrix::identity(2)).unwrap();
        assert_eq!(a, b);
        let at = a.transpose();
        assert_eq!(at[(0, 1)], 3.0);
        assert_eq!(a.vec_mul(&[1.0, 1.0]).unwrap(), vec![4.0, 6.0]);
        assert_eq!(a.mul_vec(&[1.0, 1.0]).unwrap(), vec![3.0, 7.0]);
        assert!(a.matmul(&Matrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn sparse_matches_dense() {
        let a = Matrix::from_rows(vec![vec![0.0, 2.0, 0.0], vec![1.0, 0.0, -1.0]]).unwrap();
        let s = SparseMatrix::from_dense(&a);
        assert_eq!(s.nnz(), 3);
        assert_eq!(s.to_dense(), a);
        assert_eq!(s.vec_mul(&[1.0, 2.0]).unwrap(), a.vec_mul(&[1.0, 2.0]).unwrap());
        assert_eq!(s.mul_vec(&[1.0, 2.0, 3.0]).unwrap(), a.mul_vec(&[1.0, 2.0, 3.0]).unwrap());
        let mut t = s.clone();
        t.add_to(0, 1, -2.0);
        assert_eq!(t.nnz(), 2);
        assert_eq!(t.get(1, 2), -1.0);
        let d = SparseMatrix::block_diag(&[&s, &SparseMatrix::identity(1)]);
        assert_eq!((d.rows(), d.cols(), d.get(2, 3)), (3, 4, 1.0));
        assert!(!s.is_signed_partial_permutation());
        assert!(SparseMatrix::<f64>::identity(3).scale(&-1.0).is_signed_partial_permutation());
    }

    #[test]
    fn partial_permutation_detection() {
        let p = Matrix::from_rows(vec![vec![0.0, -1.0, 0.0], vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]])
            .unwrap();
        assert!(p.is_signed_partial_permutation());
        let q = Matrix::from_rows(vec![vec![1.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!(!q.is_signed_partial_permutation());
        let r = Matrix::from_rows(vec![vec![0.5, 0.0], vec![0.0, 0.0]]).unwrap();
        assert!(!r.is_signed_partial_permutation());
    }
}
