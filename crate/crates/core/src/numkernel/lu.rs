use super::{KernelError, Matrix};
use crate::scalar::Real;

/// LU factorisation with partial pivoting, `PA = LU`, stored compactly.
#[derive(Debug, Clone)]
pub struct Lu<T: Real> {
    lu: Matrix<T>,
    perm: Vec<usize>,
}

impl<T: Real> Lu<T> {
    /// Factorises `a`. A pivot below `1e-13 * max|a|` is reported as singular.
    pub fn factor(a: &Matrix<T>) -> Result<Self, KernelError> {
        if !a.is_square() {
            return Err(KernelError::Dimension(format!(
                "LU needs a square matrix, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        let n = a.rows();
        let threshold = T::lit(1e-13) * a.max_abs();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].abs();
            for i in (k + 1)..n {
                let v = lu[(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= threshold || best == T::zero() {
                return Err(KernelError::SingularMatrix {
                    column: k,
                    pivot: best.to_f64_lossy(),
                });
            }
            if p != k {
                perm.swap(p, k);
                let data = lu.as_mut_slice();
                for j in 0..n {
                    data.swap(p * n + j, k * n + j);
                }
            }
            let pivot = lu[(k, k)];
            for i in (k + 1)..n {
                let factor = lu[(i, k)] / pivot;
                lu[(i, k)] = factor;
                if factor != T::zero() {
                    for j in (k + 1)..n {
                        let u = lu[(k, j)];
                        lu[(i, j)] -= factor * u;
                    }
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.lu.rows()
    }

    /// Solves `A X = B` for every column of `b`.
    pub fn solve(&self, b: &Matrix<T>) -> Result<Matrix<T>, KernelError> {
        let n = self.dim();
        if b.rows() != n {
            return Err(KernelError::Dimension(format!(
                "right-hand side has {} rows, system has {n}",
                b.rows()
            )));
        }
        let mut x = Matrix::zeros(n, b.cols());
        for c in 0..b.cols() {
            let mut y: Vec<T> = self.perm.iter().map(|&p| b[(p, c)]).collect();
            for i in 0..n {
                let mut s = y[i];
                for j in 0..i {
                    s -= self.lu[(i, j)] * y[j];
                }
                y[i] = s;
            }
            for i in (0..n).rev() {
                let mut s = y[i];
                for j in (i + 1)..n {
                    s -= self.lu[(i, j)] * y[j];
                }
                y[i] = s / self.lu[(i, i)];
            }
            for i in 0..n {
                x[(i, c)] = y[i];
            }
        }
        Ok(x)
    }

    pub fn inverse(&self) -> Result<Matrix<T>, KernelError> {
        self.solve(&Matrix::identity(self.dim()))
    }
}

/// Solves `A X = B` by LU with partial pivoting.
pub fn solve_linear<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>, KernelError> {
    if b.rows() != a.rows() {
        return Err(KernelError::Dimension(format!(
            "B has {} rows, A has {}",
            b.rows(),
            a.rows()
        )));
    }
    let lu = Lu::factor(a)?;
    let mut x = lu.solve(b)?;
    // One step of iterative refinement.
    let r = b - &a.matmul(&x);
    if r.max_abs() > T::zero() {
        if let Ok(dx) = lu.solve(&r) {
            let refined = &x + &dx;
            if (b - &a.matmul(&refined)).norm_inf() < r.norm_inf() {
                x = refined;
            }
        }
    }
    Ok(x)
}
