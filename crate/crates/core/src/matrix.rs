//! Square column-major `f64` matrices.
//!
//! Every matrix in the distributed parser is `d × d`, so the type only
//! models square shapes. Storage is column-major because the structured
//! operators act column by column.

use std::fmt;
use std::ops::{AddAssign, Index, IndexMut};

/// A dense square matrix of 64-bit floats in column-major order.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for k in 0..dim {
            m[(k, k)] = 1.0;
        }
        m
    }

    /// Builds a matrix from a row/column closure.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for c in 0..dim {
            for r in 0..dim {
                data.push(f(r, c));
            }
        }
        Self { dim, data }
    }

    /// Wraps column-major data. Panics if the length is not `dim * dim`.
    pub fn from_col_major(dim: usize, data: Vec<f64>) -> Self {
        assert_eq!(
            data.len(),
            dim * dim,
            "column-major buffer has wrong length"
        );
        Self { dim, data }
    }

    /// Diagonal matrix with the given entries.
    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (k, &v) in diag.iter().enumerate() {
            m[(k, k)] = v;
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `(rows, cols)`; always square.
    pub fn shape(&self) -> (usize, usize) {
        (self.dim, self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn column(&self, c: usize) -> &[f64] {
        &self.data[c * self.dim..(c + 1) * self.dim]
    }

    #[inline]
    pub fn column_mut(&mut self, c: usize) -> &mut [f64] {
        let d = self.dim;
        &mut self.data[c * d..(c + 1) * d]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|k| self[(k, k)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |r, c| self[(c, r)])
    }

    /// Dense product `self · rhs` through a blocked GEMM kernel.
    pub fn matmul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in matmul");
        let d = self.dim;
        let mut out = Matrix::zeros(d);
        // Column-major: row stride 1, column stride d.
        unsafe {
            matrixmultiply::dgemm(
                d,
                d,
                d,
                1.0,
                self.data.as_ptr(),
                1,
                d as isize,
                rhs.data.as_ptr(),
                1,
                d as isize,
                0.0,
                out.data.as_mut_ptr(),
                1,
                d as isize,
            );
        }
        out
    }

    /// Left-to-right product of a non-empty chain.
    pub fn chain(factors: &[&Matrix]) -> Matrix {
        let (first, rest) = factors.split_first().expect("empty matrix chain");
        rest.iter().fold((*first).clone(), |acc, m| acc.matmul(m))
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            dim: self.dim,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            dim: self.dim,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise (Hadamard) product with the identity: keeps the diagonal.
    pub fn mask_diagonal(&self) -> Matrix {
        Matrix::from_diagonal(&self.diagonal())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Frobenius norm of `self - other`.
    pub fn frobenius_distance(&self, other: &Matrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Frobenius distance to the identity matrix.
    pub fn distance_to_identity(&self) -> f64 {
        let d = self.dim;
        let mut acc = 0.0;
        for c in 0..d {
            for (r, &v) in self.column(c).iter().enumerate() {
                let e = if r == c { v - 1.0 } else { v };
                acc += e * e;
            }
        }
        acc.sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[c * self.dim + r]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[c * self.dim + r]
    }
}

impl AddAssign<&Matrix> for Matrix {
    fn add_assign(&mut self, rhs: &Matrix) {
        assert_eq!(self.dim, rhs.dim);
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl std::ops::Add<&Matrix> for &Matrix {
    type Output = Matrix;

    fn add(self, rhs: &Matrix) -> Matrix {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.dim > 8 {
            return write!(f, "Matrix({0}x{0})", self.dim);
        }
        writeln!(f, "Matrix({0}x{0}) [", self.dim)?;
        for r in 0..self.dim {
            let row: Vec<String> = (0..self.dim)
                .map(|c| format!("{:9.4}", self[(r, c)]))
                .collect();
            writeln!(f, "  {}", row.join(" "))?;
        }
        write!(f, "]")
    }
}
