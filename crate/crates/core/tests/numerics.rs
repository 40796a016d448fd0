use num_complex::Complex64;
use proptest::prelude::*;

use molsp_core::numkernel::{dare_gain, mat_exp, solve_linear, spectral_radius, symmetric_eigenvalues};
use molsp_core::vehicle::{applied_model, build_continuous_with_curvature, discretize_zoh};
use molsp_core::{Matrix, VehicleParams};

fn matrix(n: usize, m: usize, entries: &[f64]) -> Matrix {
    Matrix::new(n, m, entries[..n * m].to_vec()).unwrap()
}

fn entries(len: usize, scale: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-scale..scale, len)
}

/// Characteristic polynomial coefficients `c_0..c_n` (monic) by Faddeev–LeVerrier.
fn char_poly(a: &Matrix) -> Vec<f64> {
    let n = a.rows();
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    let mut m = Matrix::zeros(n, n);
    for k in 1..=n {
        let next = &a.matmul(&m) + &Matrix::identity(n).scale(c[n - k + 1]);
        c[n - k] = -a.matmul(&next).trace() / k as f64;
        m = next;
    }
    c
}

/// Roots of a monic polynomial by Durand–Kerner.
fn poly_roots(c: &[f64]) -> Vec<Complex64> {
    let n = c.len() - 1;
    let eval = |x: Complex64| c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &ci| acc * x + ci);
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..n).map(|k| seed.powu(k as u32)).collect();
    for _ in 0..2000 {
        let prev = roots.clone();
        for i in 0..n {
            let denom = (0..n).filter(|&j| j != i).fold(Complex64::new(1.0, 0.0), |acc, j| acc * (roots[i] - roots[j]));
            let step = eval(roots[i]) / denom;
            roots[i] -= step;
        }
        if roots.iter().zip(&prev).all(|(a, b)| (a - b).norm() < 1e-15) {
            break;
        }
    }
    roots
}

fn rk4_step(a: &Matrix, b: &Matrix, x0: &[f64], u: &[f64], dt: f64, substeps: usize) -> Vec<f64> {
    let bu = b.mul_vec(u);
    let f = |x: &[f64]| -> Vec<f64> { a.mul_vec(x).iter().zip(&bu).map(|(p, q)| p + q).collect() };
    let axpy = |x: &[f64], k: &[f64], s: f64| -> Vec<f64> { x.iter().zip(k).map(|(p, q)| p + s * q).collect() };
    let h = dt / substeps as f64;
    let mut x = x0.to_vec();
    for _ in 0..substeps {
        let k1 = f(&x);
        let k2 = f(&axpy(&x, &k1, h / 2.0));
        let k3 = f(&axpy(&x, &k2, h / 2.0));
        let k4 = f(&axpy(&x, &k3, h));
        for i in 0..x.len() {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    x
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn solve_reproduces_rhs(n in 1usize..=6, m in 1usize..=3, a in entries(36, 1.0), b in entries(18, 10.0)) {
        let mut a = matrix(n, n, &a);
        for i in 0..n {
            a[(i, i)] += n as f64 + 1.0;
        }
        let b = matrix(n, m, &b);
        let x = solve_linear(&a, &b).unwrap();
        let res = (&a.matmul(&x) - &b).norm_inf();
        prop_assert!(res <= 1e-9 * (1.0 + b.norm_inf()), "residual {res}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn exponential_inverse_pair(n in 1usize..=5, a in entries(25, 1.0)) {
        let a = matrix(n, n, &a);
        let a = a.scale(5.0 * unit_norm_scale(&a));
        let prod = mat_exp(&a).matmul(&mat_exp(&a.scale(-1.0)));
        prop_assert!(prod.max_abs_diff(&Matrix::identity(n)) <= 1e-8);
    }

    #[test]
    fn riccati_solution_symmetric_psd(n in 1usize..=4, m in 1usize..=2, f in entries(16, 1.0), g in entries(8, 1.0), qd in entries(4, 1.0)) {
        let f = matrix(n, n, &f);
        let rho = spectral_radius(&f).unwrap().max(1e-3);
        let f = f.scale(0.9 / rho);
        let g = matrix(n, m, &g);
        let q = Matrix::from_diag(&qd[..n].iter().map(|v| v.abs()).collect::<Vec<_>>());
        let r = Matrix::identity(m);
        let sol = dare_gain(&f, &g, &q, &r, 1e-12, 50_000).unwrap();
        prop_assert!(sol.p.asymmetry() <= 1e-10);
        let lo = symmetric_eigenvalues(&sol.p.symmetrized()).unwrap().into_iter().fold(f64::INFINITY, f64::min);
        prop_assert!(lo >= -1e-10, "min eigenvalue {lo}");
    }

    #[test]
    fn spectral_radius_matches_characteristic_roots(n in 1usize..=4, a in entries(16, 1.0)) {
        let a = matrix(n, n, &a);
        let oracle = poly_roots(&char_poly(&a)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        let rho = spectral_radius(&a).unwrap();
        prop_assert!((rho - oracle).abs() <= 1e-6 * (1.0 + oracle), "{rho} vs {oracle}");
    }
}

fn unit_norm_scale(a: &Matrix) -> f64 {
    1.0 / a.norm_inf().max(1.0)
}

#[test]
fn zoh_matches_fine_rk4() {
    let p = VehicleParams::reference_truck();
    let cont = build_continuous_with_curvature(&p).unwrap();
    let disc = applied_model(&p, 0.1).unwrap();
    let n = cont.n_states();
    let m = cont.n_inputs();
    for j in 0..n {
        let mut x0 = vec![0.0; n];
        x0[j] = 1.0;
        let x = rk4_step(&cont.f, &cont.g, &x0, &vec![0.0; m], 0.1, 10_000);
        for i in 0..n {
            assert!((x[i] - disc.f[(i, j)]).abs() <= 1e-6, "F[{i},{j}]");
        }
    }
    for j in 0..m {
        let mut u = vec![0.0; m];
        u[j] = 1.0;
        let x = rk4_step(&cont.f, &cont.g, &vec![0.0; n], &u, 0.1, 10_000);
        for i in 0..n {
            assert!((x[i] - disc.g[(i, j)]).abs() <= 1e-6, "G[{i},{j}]");
        }
    }
}

#[test]
fn zoh_first_order_taylor() {
    let p = VehicleParams::reference_truck();
    let cont = build_continuous_with_curvature(&p).unwrap();
    let dt = 1e-6;
    let disc = discretize_zoh(&cont, dt).unwrap();
    let n = cont.n_states();
    let f1 = &Matrix::identity(n) + &cont.f.scale(dt);
    assert!(disc.f.max_abs_diff(&f1) <= 1e-9);
    assert!(disc.g.max_abs_diff(&cont.g.scale(dt)) <= 1e-9);
}

#[test]
fn riccati_scalar_and_vehicle_examples() {
    let one = Matrix::identity(1);
    let sol = dare_gain(&one.scale(0.5), &Matrix::zeros(1, 1), &one, &one, 1e-14, 10_000).unwrap();
    assert!(sol.k.max_abs() < 1e-15);
    assert!((sol.p[(0, 0)] - 1.0 / 0.75).abs() < 1e-10);

    let model = applied_model(&VehicleParams::reference_truck(), 0.1).unwrap();
    let sol = dare_gain(&model.f, &model.g, &Matrix::identity(4), &Matrix::identity(2), 1e-10, 50_000).unwrap();
    let closed = &model.f - &model.g.matmul(&sol.k);
    assert!(spectral_radius(&closed).unwrap() < 1.0);
}
