use deepjscc_mimo::linalg::{
    complex_svd, frobenius_norm_sq, pseudo_inverse_diag, sample_complex_gaussian, Complex64, ComplexMatrix, RngStream,
};
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Distance of `aᴴa` from the identity, Frobenius.
fn unitarity_defect(a: &ComplexMatrix) -> f64 {
    let g = a.adjoint().matmul(a).unwrap();
    g.sub(&ComplexMatrix::identity(a.cols())).unwrap().frobenius_norm_sq().sqrt()
}

/// Determinant by Gaussian elimination with partial pivoting.
fn det(a: &ComplexMatrix) -> Complex64 {
    let n = a.rows();
    let mut m: Vec<Vec<Complex64>> = (0..n).map(|r| (0..n).map(|c| a[(r, c)]).collect()).collect();
    let mut d = c(1.0, 0.0);
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| m[x][col].norm().total_cmp(&m[y][col].norm())).unwrap();
        if m[piv][col].norm() == 0.0 {
            return c(0.0, 0.0);
        }
        if piv != col {
            m.swap(piv, col);
            d = -d;
        }
        d *= m[col][col];
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for k in col..n {
                let t = m[col][k];
                m[r][k] -= f * t;
            }
        }
    }
    d
}

/// Singular values of a 2×2 matrix from the characteristic polynomial of
/// `HᴴH`.
fn singular_values_2x2(h: &ComplexMatrix) -> (f64, f64) {
    let a = h.adjoint().matmul(h).unwrap();
    let tr = a[(0, 0)].re + a[(1, 1)].re;
    let dt = a[(0, 0)].re * a[(1, 1)].re - a[(0, 1)].norm_sqr();
    let disc = (tr * tr / 4.0 - dt).max(0.0).sqrt();
    ((tr / 2.0 + disc).sqrt(), (tr / 2.0 - disc).max(0.0).sqrt())
}

#[test]
fn characteristic_polynomial_example() {
    let h = ComplexMatrix::from_real_rows(&[&[0.0, 2.0], &[1.0, 0.0]]).unwrap();
    let f = complex_svd(&h).unwrap();
    let (s1, s2) = singular_values_2x2(&h);
    assert_eq!((s1, s2), (2.0, 1.0));
    assert!((f.s[0] - s1).abs() < 1e-14 && (f.s[1] - s2).abs() < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn svd_factors_any_square_matrix(seed in any::<u64>(), m in 1usize..=8, scale_exp in -6i32..6) {
        let mut rng = RngStream::new(seed, 11);
        let h = sample_complex_gaussian(&mut rng, m, m, 1.0).unwrap().scale_real(10f64.powi(scale_exp));
        let f = complex_svd(&h).unwrap();
        let rel = f.reconstruct().sub(&h).unwrap().frobenius_norm_sq().sqrt() / h.frobenius_norm_sq().sqrt();
        prop_assert!(rel < 1e-10, "reconstruction {rel}");
        prop_assert!(unitarity_defect(&f.u) < 1e-10);
        prop_assert!(unitarity_defect(&f.v) < 1e-10);
        for w in f.s.windows(2) {
            prop_assert!(w[0] >= w[1] && w[1] >= 0.0);
        }
        // Phase convention on U.
        for j in 0..m {
            let col = f.u.column(j);
            let big = col.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap();
            prop_assert!(big.im.abs() < 1e-12 && big.re >= 0.0);
        }
        // Independent invariants: Σs² = ‖H‖², Πs = |det H|.
        let energy: f64 = f.s.iter().map(|s| s * s).sum();
        prop_assert!((energy - h.frobenius_norm_sq()).abs() <= 1e-10 * energy);
        let prod: f64 = f.s.iter().product();
        prop_assert!((prod - det(&h).norm()).abs() <= 1e-9 * prod.max(f64::MIN_POSITIVE));
    }

    #[test]
    fn svd_matches_char_poly_2x2(seed in any::<u64>()) {
        let h = sample_complex_gaussian(&mut RngStream::new(seed, 12), 2, 2, 1.0).unwrap();
        let f = complex_svd(&h).unwrap();
        let (s1, s2) = singular_values_2x2(&h);
        prop_assert!((f.s[0] - s1).abs() < 1e-10 * s1);
        prop_assert!((f.s[1] - s2).abs() < 1e-8 * s1);
    }

    #[test]
    fn svd_of_rank_deficient(seed in any::<u64>(), m in 2usize..=8, r in 0usize..8) {
        let r = r % m;
        let mut rng = RngStream::new(seed, 13);
        let a = sample_complex_gaussian(&mut rng, m, r.max(1), 1.0).unwrap();
        let b = sample_complex_gaussian(&mut rng, r.max(1), m, 1.0).unwrap();
        let h = if r == 0 { ComplexMatrix::zeros(m, m) } else { a.matmul(&b).unwrap() };
        let f = complex_svd(&h).unwrap();
        let err = f.reconstruct().sub(&h).unwrap().frobenius_norm_sq().sqrt();
        prop_assert!(err <= 1e-10 * h.frobenius_norm_sq().sqrt().max(1.0));
        prop_assert!(unitarity_defect(&f.u) < 1e-10);
        prop_assert!(unitarity_defect(&f.v) < 1e-10);
        let smax = f.s[0].max(f64::MIN_POSITIVE);
        for &s in &f.s[r..] {
            prop_assert!(s <= 1e-10 * smax.max(1.0));
        }
    }

    #[test]
    fn pseudo_inverse_is_an_involution_on_support(s in prop::collection::vec(0.0f64..10.0, 1..8)) {
        let tol = 1e-12;
        let once = pseudo_inverse_diag(&s, tol);
        let twice = pseudo_inverse_diag(&once, tol);
        let max = s.iter().cloned().fold(0.0, f64::max);
        for (x, y) in s.iter().zip(&twice) {
            if *x > tol * max {
                prop_assert!((x - y).abs() <= 1e-12 * x);
            } else {
                prop_assert_eq!(*y, 0.0);
            }
        }
    }
}

#[test]
fn frobenius_examples() {
    assert_eq!(frobenius_norm_sq(&ComplexMatrix::zeros(2, 3)), 0.0);
    assert_eq!(frobenius_norm_sq(&ComplexMatrix::new(1, 1, vec![c(1.0, 1.0)]).unwrap()), 2.0);
    assert_eq!(frobenius_norm_sq(&ComplexMatrix::identity(3)), 3.0);
}

#[test]
fn unit_variance_sampling() {
    let x = sample_complex_gaussian(&mut RngStream::new(1, 1), 1000, 1000, 1.0).unwrap();
    let n = x.data().len() as f64;
    let var = x.data().iter().map(|z| z.norm_sqr()).sum::<f64>() / n;
    assert!((0.99..=1.01).contains(&var), "{var}");
    let zero = sample_complex_gaussian(&mut RngStream::new(1, 1), 3, 3, 0.0).unwrap();
    assert!(zero.data().iter().all(|z| *z == c(0.0, 0.0)));
    let again = sample_complex_gaussian(&mut RngStream::new(1, 1), 1000, 1000, 1.0).unwrap();
    assert_eq!(x, again);
}

#[test]
fn distinct_streams_are_uncorrelated() {
    let n = 100_000;
    let a = sample_complex_gaussian(&mut RngStream::new(9, 1), n, 1, 1.0).unwrap();
    let b = sample_complex_gaussian(&mut RngStream::new(9, 2), n, 1, 1.0).unwrap();
    let corr: Complex64 = a.data().iter().zip(b.data()).map(|(x, y)| x * y.conj()).sum::<Complex64>() / n as f64;
    assert!(corr.norm() < 0.02, "{corr}");
}
