use super::Matrix;
use crate::scalar::Real;

/// Matrix exponential by scaling and squaring with a truncated Taylor series.
pub fn mat_exp<T: Real>(a: &Matrix<T>) -> Matrix<T> {
    assert!(a.is_square(), "mat_exp needs a square matrix");
    let n = a.rows();
    let norm = a.norm_one();
    let mut squarings = 0u32;
    let mut scale = T::one();
    let half = T::lit(0.5);
    while norm * scale > half {
        scale *= half;
        squarings += 1;
    }
    let scaled = a.scale(scale);

    let eps = T::epsilon();
    let mut result = Matrix::identity(n);
    let mut term = Matrix::identity(n);
    for k in 1..=30 {
        term = term.matmul(&scaled).scale(T::one() / T::lit(k as f64));
        result = &result + &term;
        if term.max_abs() <= eps * result.max_abs() {
            break;
        }
    }
    for _ in 0..squarings {
        result = result.matmul(&result);
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gives_identity() {
        assert_eq!(mat_exp(&Matrix::<f64>::zeros(3, 3)), Matrix::identity(3));
    }

    #[test]
    fn diagonal() {
        let e = mat_exp(&Matrix::from_diag(&[2f64.ln(), 3f64.ln()]));
        assert!((e[(0, 0)] - 2.0).abs() < 1e-13);
        assert!((e[(1, 1)] - 3.0).abs() < 1e-13);
        assert_eq!(e[(0, 1)], 0.0);
    }

    #[test]
    fn nilpotent() {
        let a = Matrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let e = mat_exp(&a);
        let want = Matrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        assert!(e.max_abs_diff(&want) < 1e-15);
    }

    #[test]
    fn rotation_generator() {
        let t = 2.5f64;
        let a = Matrix::from_rows(&[vec![0.0, -t], vec![t, 0.0]]).unwrap();
        let e = mat_exp(&a);
        assert!((e[(0, 0)] - t.cos()).abs() < 1e-13);
        assert!((e[(1, 0)] - t.sin()).abs() < 1e-13);
    }

    #[test]
    fn large_norm_relative_accuracy() {
        let e = mat_exp(&Matrix::from_diag(&[10.0, -10.0]));
        assert!((e[(0, 0)] / 10f64.exp() - 1.0).abs() < 1e-12);
        assert!((e[(1, 1)] / (-10f64).exp() - 1.0).abs() < 1e-10);
    }
}
