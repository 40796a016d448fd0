use super::{solve_linear, KernelError, Matrix};
use crate::scalar::Real;

/// Fixed point of the discrete algebraic Riccati equation.
#[derive(Debug, Clone)]
pub struct DareSolution<T: Real> {
    /// `(R + GᵀPG)⁻¹ GᵀPF`; the stabilising control law is `u = -K x`.
    pub k: Matrix<T>,
    pub p: Matrix<T>,
    pub iterations: usize,
}

/// Iterates `P ← Q + FᵀPF − FᵀPG (R + GᵀPG)⁻¹ GᵀPF` from `P = Q` until the
/// update is below `tol` in the infinity norm.
pub fn dare_gain<T: Real>(
    f: &Matrix<T>,
    g: &Matrix<T>,
    q: &Matrix<T>,
    r: &Matrix<T>,
    tol: T,
    max_iter: usize,
) -> Result<DareSolution<T>, KernelError> {
    let n = f.rows();
    let m = g.cols();
    if !f.is_square() || g.rows() != n || q.shape() != (n, n) || r.shape() != (m, m) {
        return Err(KernelError::Dimension(format!(
            "F {:?}, G {:?}, Q {:?}, R {:?}",
            f.shape(),
            g.shape(),
            q.shape(),
            r.shape()
        )));
    }
    let ft = f.transpose();
    let gt = g.transpose();
    let mut p = q.symmetrized();
    let mut residual = T::infinity();
    for it in 1..=max_iter {
        let pf = p.matmul(f);
        let pg = p.matmul(g);
        let s = r + &gt.matmul(&pg);
        let k = solve_linear(&s, &gt.matmul(&pf))?;
        let next = &(q + &ft.matmul(&pf)) - &ft.matmul(&pg).matmul(&k);
        let next = next.symmetrized();
        if !next.is_finite() {
            return Err(KernelError::NoConvergence {
                iterations: it,
                residual: f64::INFINITY,
            });
        }
        residual = (&next - &p).norm_inf();
        p = next;
        if residual < tol {
            let s = r + &gt.matmul(&p.matmul(g));
            let k = solve_linear(&s, &gt.matmul(&p.matmul(f)))?;
            return Ok(DareSolution { k, p, iterations: it });
        }
    }
    Err(KernelError::NoConvergence {
        iterations: max_iter,
        residual: residual.to_f64_lossy(),
    })
}
