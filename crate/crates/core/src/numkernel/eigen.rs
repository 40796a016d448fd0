use super::{KernelError, Matrix};
use crate::scalar::Real;

/// Largest eigenvalue modulus, via balancing, Hessenberg reduction and the
/// shifted double-step QR iteration.
pub fn spectral_radius<T: Real>(a: &Matrix<T>) -> Result<T, KernelError> {
    let eig = eigenvalues(a)?;
    Ok(eig
        .into_iter()
        .map(|(re, im)| re.hypot(im))
        .fold(T::zero(), T::max))
}

/// All eigenvalues of a real square matrix as `(re, im)` pairs, unordered.
pub fn eigenvalues<T: Real>(a: &Matrix<T>) -> Result<Vec<(T, T)>, KernelError> {
    if !a.is_square() {
        return Err(KernelError::Dimension("eigenvalues need a square matrix".into()));
    }
    let n = a.rows();
    let mut h: Vec<Vec<T>> = (0..n).map(|i| a.row_slice(i).to_vec()).collect();
    balance(&mut h);
    hessenberg(&mut h);
    hqr(&mut h)
}

fn balance<T: Real>(a: &mut [Vec<T>]) {
    let n = a.len();
    let radix = T::lit(2.0);
    let sqrdx = radix * radix;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut r = T::zero();
            let mut c = T::zero();
            for j in 0..n {
                if j != i {
                    c += a[j][i].abs();
                    r += a[i][j].abs();
                }
            }
            if c == T::zero() || r == T::zero() {
                continue;
            }
            let s = c + r;
            let mut f = T::one();
            let mut g = r / radix;
            while c < g {
                f *= radix;
                c *= sqrdx;
            }
            g = r * radix;
            while c > g {
                f /= radix;
                c /= sqrdx;
            }
            if (c + r) / f < T::lit(0.95) * s {
                done = false;
                let ginv = T::one() / f;
                for j in 0..n {
                    a[i][j] *= ginv;
                }
                for row in a.iter_mut() {
                    row[i] *= f;
                }
            }
        }
    }
}

/// Similarity reduction to upper Hessenberg form by stabilised elimination.
fn hessenberg<T: Real>(a: &mut [Vec<T>]) {
    let n = a.len();
    for m in 1..n.saturating_sub(1) {
        let mut x = T::zero();
        let mut piv = m;
        for j in m..n {
            if a[j][m - 1].abs() > x.abs() {
                x = a[j][m - 1];
                piv = j;
            }
        }
        if piv != m {
            for j in (m - 1)..n {
                let tmp = a[piv][j];
                a[piv][j] = a[m][j];
                a[m][j] = tmp;
            }
            for row in a.iter_mut() {
                row.swap(piv, m);
            }
        }
        if x != T::zero() {
            for i in (m + 1)..n {
                let mut y = a[i][m - 1];
                if y != T::zero() {
                    y /= x;
                    a[i][m - 1] = y;
                    for j in m..n {
                        let v = a[m][j];
                        a[i][j] -= y * v;
                    }
                    for row in a.iter_mut() {
                        let v = row[i];
                        row[m] += y * v;
                    }
                }
            }
        }
    }
    for i in 2..n {
        for j in 0..(i - 1) {
            a[i][j] = T::zero();
        }
    }
}

fn hqr<T: Real>(a: &mut [Vec<T>]) -> Result<Vec<(T, T)>, KernelError> {
    let n = a.len() as isize;
    let eps = T::epsilon();
    let zero = T::zero();
    let mut wr = vec![zero; n as usize];
    let mut wi = vec![zero; n as usize];
    macro_rules! at {
        ($i:expr, $j:expr) => {
            a[($i) as usize][($j) as usize]
        };
    }
    let mut anorm = zero;
    for i in 0..n {
        for j in (i - 1).max(0)..n {
            anorm += at!(i, j).abs();
        }
    }
    let mut nn = n - 1;
    let mut t = zero;
    while nn >= 0 {
        let mut its = 0;
        loop {
            let mut l = nn;
            while l > 0 {
                let mut s = at!(l - 1, l - 1).abs() + at!(l, l).abs();
                if s == zero {
                    s = anorm;
                }
                if at!(l, l - 1).abs() <= eps * s {
                    at!(l, l - 1) = zero;
                    break;
                }
                l -= 1;
            }
            let mut x = at!(nn, nn);
            if l == nn {
                wr[nn as usize] = x + t;
                wi[nn as usize] = zero;
                nn -= 1;
                its = 0;
            } else {
                let mut y = at!(nn - 1, nn - 1);
                let mut w = at!(nn, nn - 1) * at!(nn - 1, nn);
                if l == nn - 1 {
                    let p = T::lit(0.5) * (y - x);
                    let q = p * p + w;
                    let mut z = q.abs().sqrt();
                    x += t;
                    if q >= zero {
                        z = p + if p >= zero { z } else { -z };
                        wr[(nn - 1) as usize] = x + z;
                        wr[nn as usize] = x + z;
                        if z != zero {
                            wr[nn as usize] = x - w / z;
                        }
                        wi[(nn - 1) as usize] = zero;
                        wi[nn as usize] = zero;
                    } else {
                        wr[(nn - 1) as usize] = x + p;
                        wr[nn as usize] = x + p;
                        wi[(nn - 1) as usize] = z;
                        wi[nn as usize] = -z;
                    }
                    nn -= 2;
                    its = 0;
                } else {
                    if its == 60 {
                        return Err(KernelError::NoConvergence {
                            iterations: its,
                            residual: at!(nn, nn - 1).abs().to_f64_lossy(),
                        });
                    }
                    if its == 10 || its == 20 {
                        t += x;
                        for i in 0..=nn {
                            at!(i, i) -= x;
                        }
                        let s = at!(nn, nn - 1).abs() + at!(nn - 1, nn - 2).abs();
                        x = T::lit(0.75) * s;
                        y = x;
                        w = T::lit(-0.4375) * s * s;
                    }
                    its += 1;
                    let (mut p, mut q, mut r);
                    let mut m = nn - 2;
                    loop {
                        let z = at!(m, m);
                        r = x - z;
                        let s0 = y - z;
                        p = (r * s0 - w) / at!(m + 1, m) + at!(m, m + 1);
                        q = at!(m + 1, m + 1) - z - r - s0;
                        r = at!(m + 2, m + 1);
                        let s = p.abs() + q.abs() + r.abs();
                        p /= s;
                        q /= s;
                        r /= s;
                        if m == l {
                            break;
                        }
                        let u = at!(m, m - 1).abs() * (q.abs() + r.abs());
                        let v = p.abs() * (at!(m - 1, m - 1).abs() + z.abs() + at!(m + 1, m + 1).abs());
                        if u <= eps * v {
                            break;
                        }
                        m -= 1;
                    }
                    for i in m..(nn - 1) {
                        at!(i + 2, i) = zero;
                        if i != m {
                            at!(i + 2, i - 1) = zero;
                        }
                    }
                    let mut k = m;
                    while k < nn {
                        if k != m {
                            p = at!(k, k - 1);
                            q = at!(k + 1, k - 1);
                            r = zero;
                            if k + 1 != nn {
                                r = at!(k + 2, k - 1);
                            }
                            x = p.abs() + q.abs() + r.abs();
                            if x != zero {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        let mag = (p * p + q * q + r * r).sqrt();
                        let s = if p >= zero { mag } else { -mag };
                        if s != zero {
                            if k == m {
                                if l != m {
                                    at!(k, k - 1) = -at!(k, k - 1);
                                }
                            } else {
                                at!(k, k - 1) = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            let z = r / s;
                            q /= p;
                            r /= p;
                            for j in k..=nn {
                                p = at!(k, j) + q * at!(k + 1, j);
                                if k + 1 != nn {
                                    p += r * at!(k + 2, j);
                                    at!(k + 2, j) -= p * z;
                                }
                                at!(k + 1, j) -= p * y;
                                at!(k, j) -= p * x;
                            }
                            let mmin = if nn < k + 3 { nn } else { k + 3 };
                            for i in l..=mmin {
                                p = x * at!(i, k) + y * at!(i, k + 1);
                                if k + 1 != nn {
                                    p += z * at!(i, k + 2);
                                    at!(i, k + 2) -= p * r;
                                }
                                at!(i, k + 1) -= p * q;
                                at!(i, k) -= p;
                            }
                        }
                        k += 1;
                    }
                }
            }
            if l + 1 >= nn {
                break;
            }
        }
    }
    Ok(wr.into_iter().zip(wi).collect())
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues<T: Real>(a: &Matrix<T>) -> Result<Vec<T>, KernelError> {
    if !a.is_square() {
        return Err(KernelError::Dimension("eigenvalues need a square matrix".into()));
    }
    let n = a.rows();
    let mut m = a.symmetrized();
    let scale = m.max_abs();
    if scale == T::zero() {
        return Ok(vec![T::zero(); n]);
    }
    let tiny = T::epsilon() * T::epsilon() * scale * scale;
    for sweep in 0..100 {
        let mut off = T::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if off <= tiny {
            let mut ev: Vec<T> = (0..n).map(|i| m[(i, i)]).collect();
            ev.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
            return Ok(ev);
        }
        if sweep == 99 {
            return Err(KernelError::NoConvergence {
                iterations: sweep,
                residual: off.sqrt().to_f64_lossy(),
            });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (T::lit(2.0) * apq);
                let sign = if theta >= T::zero() { T::one() } else { -T::one() };
                let tan = sign / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (tan * tan + T::one()).sqrt();
                let s = tan * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
            }
        }
    }
    unreachable!()
}

/// Singular values by one-sided Jacobi orthogonalisation, descending.
pub fn singular_values<T: Real>(a: &Matrix<T>) -> Vec<T> {
    let w = if a.rows() >= a.cols() { a.clone() } else { a.transpose() };
    let (rows, cols) = w.shape();
    let mut cols_v: Vec<Vec<T>> = (0..cols).map(|j| w.column_vec(j)).collect();
    let eps = T::epsilon();
    for _ in 0..60 {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let mut alpha = T::zero();
                let mut beta = T::zero();
                let mut gamma = T::zero();
                for i in 0..rows {
                    alpha += cols_v[p][i] * cols_v[p][i];
                    beta += cols_v[q][i] * cols_v[q][i];
                    gamma += cols_v[p][i] * cols_v[q][i];
                }
                if gamma.abs() <= eps * (alpha * beta).sqrt() || gamma == T::zero() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let sign = if zeta >= T::zero() { T::one() } else { -T::one() };
                let t = sign / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for i in 0..rows {
                    let xp = cols_v[p][i];
                    let xq = cols_v[q][i];
                    cols_v[p][i] = c * xp - s * xq;
                    cols_v[q][i] = s * xp + c * xq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<T> = cols_v
        .iter()
        .map(|c| c.iter().fold(T::zero(), |acc, &v| acc + v * v).sqrt())
        .collect();
    sv.sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));
    sv
}

/// Number of singular values above `rel_tol` times the largest one.
pub fn numerical_rank<T: Real>(a: &Matrix<T>, rel_tol: T) -> usize {
    let sv = singular_values(a);
    let top = sv.first().copied().unwrap_or(T::zero());
    if top == T::zero() {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * top).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_radius() {
        let r = spectral_radius(&Matrix::<f64>::from_diag(&[0.2, -0.9])).unwrap();
        assert!((r - 0.9).abs() < 1e-12);
    }

    #[test]
    fn rotation_radius() {
        let a = Matrix::<f64>::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        assert!((spectral_radius(&a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn companion_matrix_roots() {
        // (x-1)(x-2)(x-3)(x+4) = x^4 - 2x^3 - 13x^2 + 38x - 24
        let a = Matrix::from_rows(&[
            vec![2.0, 13.0, -38.0, 24.0],
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
        ])
        .unwrap();
        let mut ev: Vec<f64> = eigenvalues(&a).unwrap().into_iter().map(|(re, _)| re).collect();
        ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (got, want) in ev.iter().zip([-4.0, 1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-9, "{ev:?}");
        }
    }

    #[test]
    fn symmetric_known_spectrum() {
        let a = Matrix::<f64>::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let ev = symmetric_eigenvalues(&a).unwrap();
        assert!((ev[0] - 1.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn rank_of_outer_product() {
        let u = Matrix::column(&[1.0, 2.0, 3.0]);
        let v = Matrix::row(&[1.0, -1.0]);
        assert_eq!(numerical_rank(&u.matmul(&v), 1e-10), 1);
        assert_eq!(numerical_rank(&Matrix::<f64>::zeros(2, 3), 1e-10), 0);
        assert_eq!(numerical_rank(&Matrix::<f64>::identity(3), 1e-10), 3);
        let sv = singular_values(&Matrix::<f64>::row(&[3.0, 4.0]));
        assert!((sv[0] - 5.0).abs() < 1e-14);
    }
}
