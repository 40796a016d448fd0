use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use super::KernelError;
use crate::scalar::Real;

/// Dense row-major real matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix<T: Real = f64> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    /// Builds a matrix from row-major entries, rejecting wrong lengths and
    /// non-finite values.
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self, KernelError> {
        if rows == 0 || cols == 0 {
            return Err(KernelError::EmptyMatrix);
        }
        if data.len() != rows * cols {
            return Err(KernelError::Dimension(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(KernelError::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    /// Internal constructor for results of arithmetic; dimensions are trusted.
    pub(crate) fn from_parts(rows: usize, cols: usize, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_parts(rows, cols, vec![T::zero(); rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Self::from_parts(rows, cols, vec![value; rows * cols])
    }

    pub fn from_diag(diag: &[T]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = d;
        }
        m
    }

    /// Builds a matrix from a slice of equal-length rows.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self, KernelError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(KernelError::Dimension("ragged rows".into()));
        }
        Self::new(r, c, rows.iter().flatten().copied().collect())
    }

    /// Column vector.
    pub fn column(values: &[T]) -> Self {
        Self::from_parts(values.len(), 1, values.to_vec())
    }

    /// Row vector.
    pub fn row(values: &[T]) -> Self {
        Self::from_parts(1, values.len(), values.to_vec())
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
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub(crate) fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn row_slice(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column_vec(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    pub fn scale(&self, s: T) -> Self {
        Self::from_parts(self.rows, self.cols, self.data.iter().map(|&v| v * s).collect())
    }

    /// Matrix product; panics on inner dimension mismatch.
    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(
            self.cols, rhs.rows,
            "matmul dimension mismatch: {}x{} * {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == T::zero() {
                    continue;
                }
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(self.cols, x.len(), "mul_vec dimension mismatch");
        (0..self.rows)
            .map(|i| {
                self.row_slice(i)
                    .iter()
                    .zip(x)
                    .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect()
    }

    /// Induced infinity norm (largest absolute row sum).
    pub fn norm_inf(&self) -> T {
        (0..self.rows)
            .map(|i| self.row_slice(i).iter().fold(T::zero(), |acc, v| acc + v.abs()))
            .fold(T::zero(), T::max)
    }

    /// Induced one norm (largest absolute column sum).
    pub fn norm_one(&self) -> T {
        (0..self.cols)
            .map(|j| (0..self.rows).fold(T::zero(), |acc, i| acc + self[(i, j)].abs()))
            .fold(T::zero(), T::max)
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, v| acc.max(v.abs()))
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Copy of the `rows x cols` block starting at `(r0, c0)`.
    pub fn submatrix(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        assert!(r0 + rows <= self.rows && c0 + cols <= self.cols, "block out of range");
        let mut out = Self::zeros(rows, cols);
        for i in 0..rows {
            out.data[i * cols..(i + 1) * cols]
                .copy_from_slice(&self.data[(r0 + i) * self.cols + c0..(r0 + i) * self.cols + c0 + cols]);
        }
        out
    }

    /// Writes `block` into this matrix with its top-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Self) {
        assert!(
            r0 + block.rows <= self.rows && c0 + block.cols <= self.cols,
            "block out of range"
        );
        for i in 0..block.rows {
            let dst = (r0 + i) * self.cols + c0;
            self.data[dst..dst + block.cols].copy_from_slice(block.row_slice(i));
        }
    }

    pub fn hstack(&self, other: &Self) -> Self {
        assert_eq!(self.rows, other.rows, "hstack row mismatch");
        let mut out = Self::zeros(self.rows, self.cols + other.cols);
        out.set_block(0, 0, self);
        out.set_block(0, self.cols, other);
        out
    }

    pub fn vstack(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.cols, "vstack column mismatch");
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Self::from_parts(self.rows + other.rows, self.cols, data)
    }

    /// `(A + Aᵀ) / 2`.
    pub fn symmetrized(&self) -> Self {
        assert!(self.is_square());
        let half = T::lit(0.5);
        let mut out = self.clone();
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[i * self.cols + j] = half * (self[(i, j)] + self[(j, i)]);
            }
        }
        out
    }

    /// Largest absolute entry of `A - Aᵀ`.
    pub fn asymmetry(&self) -> T {
        assert!(self.is_square());
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// Entry-wise maximum absolute difference.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (&a, &b)| acc.max((a - b).abs()))
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::from_parts(self.rows, self.cols, self.data.iter().map(|&v| f(v)).collect())
    }

    /// Converts between scalar types.
    pub fn cast<U: Real>(&self) -> Matrix<U> {
        Matrix::from_parts(
            self.rows,
            self.cols,
            self.data.iter().map(|v| U::lit(v.to_f64_lossy())).collect(),
        )
    }
}

impl<T: Real> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T: Real> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

fn zip_with<T: Real>(a: &Matrix<T>, b: &Matrix<T>, f: impl Fn(T, T) -> T) -> Matrix<T> {
    assert_eq!(a.shape(), b.shape(), "elementwise dimension mismatch");
    Matrix::from_parts(
        a.rows,
        a.cols,
        a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect(),
    )
}

impl<T: Real> Add for &Matrix<T> {
    type Output = Matrix<T>;
    fn add(self, rhs: Self) -> Matrix<T> {
        zip_with(self, rhs, |a, b| a + b)
    }
}

impl<T: Real> Sub for &Matrix<T> {
    type Output = Matrix<T>;
    fn sub(self, rhs: Self) -> Matrix<T> {
        zip_with(self, rhs, |a, b| a - b)
    }
}

impl<T: Real> Mul for &Matrix<T> {
    type Output = Matrix<T>;
    fn mul(self, rhs: Self) -> Matrix<T> {
        self.matmul(rhs)
    }
}

impl<T: Real> Neg for &Matrix<T> {
    type Output = Matrix<T>;
    fn neg(self) -> Matrix<T> {
        self.map(|v| -v)
    }
}

impl<T: Real> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for v in self.row_slice(i) {
                write!(f, "{:>14.6e}", v)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_rejects_bad_input() {
        assert!(Matrix::<f64>::new(2, 2, vec![1.0, 2.0, 3.0]).is_err());
        assert!(matches!(
            Matrix::<f64>::new(1, 2, vec![1.0, f64::NAN]),
            Err(KernelError::NonFinite)
        ));
        assert!(matches!(
            Matrix::<f64>::new(0, 2, vec![]),
            Err(KernelError::EmptyMatrix)
        ));
    }

    #[test]
    fn blocks_and_products() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = &a * &Matrix::identity(2);
        assert_eq!(a, b);
        let t = a.transpose();
        assert_eq!(t[(0, 1)], 3.0);
        let mut big = Matrix::<f64>::zeros(3, 3);
        big.set_block(1, 1, &a);
        assert_eq!(big.submatrix(1, 1, 2, 2), a);
        assert_eq!(a.norm_inf(), 7.0);
        assert_eq!(a.norm_one(), 6.0);
        assert_eq!(a.hstack(&a).shape(), (2, 4));
        assert_eq!(a.vstack(&a).shape(), (4, 2));
        assert_eq!(a.mul_vec(&[1.0, 1.0]), vec![3.0, 7.0]);
    }
}
