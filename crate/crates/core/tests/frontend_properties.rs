use deepjscc_mimo::frontend::{
    build_heatmap, capacity_closed_loop, capacity_open_loop, checked_svd, mmse_matrix, noise_power_csir,
    noise_power_csit, packed_index, svd_equalize, svd_equalizer_matrix, svd_precode, water_filling, zf_matrix,
    DEFAULT_SENTINEL, SINGULAR_TOL,
};
use deepjscc_mimo::linalg::{complex_svd, sample_complex_gaussian, Complex64, ComplexMatrix, RngStream};
use deepjscc_mimo::Error;
use proptest::prelude::*;

fn random_h(seed: u64, m: usize) -> ComplexMatrix {
    sample_complex_gaussian(&mut RngStream::new(seed, 31), m, m, 1.0).unwrap()
}

fn frob(a: &ComplexMatrix) -> f64 {
    a.frobenius_norm_sq().sqrt()
}

/// `log2 det(I + HHᴴ/σ²)` by elimination.
fn log_det_capacity(h: &ComplexMatrix, sigma2: f64) -> f64 {
    let m = h.rows();
    let a = ComplexMatrix::identity(m)
        .add(&h.matmul(&h.adjoint()).unwrap().scale_real(1.0 / sigma2))
        .unwrap();
    let mut rows: Vec<Vec<Complex64>> = (0..m).map(|r| (0..m).map(|c| a[(r, c)]).collect()).collect();
    let mut log_det = 0.0;
    for col in 0..m {
        // Hermitian positive definite: no pivoting needed.
        let p = rows[col][col];
        log_det += p.norm().log2();
        for r in col + 1..m {
            let f = rows[r][col] / p;
            for k in col..m {
                let t = rows[col][k];
                rows[r][k] -= f * t;
            }
        }
    }
    log_det
}

/// Water-filling by enumerating active-set sizes over the sorted floors.
fn water_filling_active_set(s: &[f64], sigma2: f64, p_total: f64) -> Vec<f64> {
    let floors: Vec<f64> = s.iter().map(|&x| sigma2 / (x * x)).collect();
    let mut sorted = floors.clone();
    sorted.sort_by(f64::total_cmp);
    let mut mu = 0.0;
    for n in (1..=sorted.len()).rev() {
        let cand = (p_total + sorted[..n].iter().sum::<f64>()) / n as f64;
        if cand > sorted[n - 1] {
            mu = cand;
            break;
        }
    }
    floors.iter().map(|g| (mu - g).max(0.0)).collect()
}

/// Per-row empirical variance of `a·W` for `n` columns of unit-variance noise
/// scaled to `sigma2`, split into real and imaginary parts.
fn empirical_component_power(a: &ComplexMatrix, sigma2: f64, n: usize, seed: u64) -> Vec<(f64, f64)> {
    let w = sample_complex_gaussian(&mut RngStream::new(seed, 32), a.cols(), n, sigma2).unwrap();
    let e = a.matmul(&w).unwrap();
    (0..a.rows())
        .map(|i| {
            let row = &e.data()[i * n..(i + 1) * n];
            let re = row.iter().map(|z| z.re * z.re).sum::<f64>() / n as f64;
            let im = row.iter().map(|z| z.im * z.im).sum::<f64>() / n as f64;
            (re, im)
        })
        .collect()
}

#[test]
fn zf_examples() {
    assert!(zf_matrix(&ComplexMatrix::identity(3)).unwrap().max_abs_diff(&ComplexMatrix::identity(3)) < 1e-15);
    let hw = zf_matrix(&ComplexMatrix::from_diag(&[2.0, 1.0])).unwrap();
    assert!(hw.max_abs_diff(&ComplexMatrix::from_diag(&[0.5, 1.0])) < 1e-15);
    let singular = ComplexMatrix::from_real_rows(&[&[1.0, 2.0], &[2.0, 4.0]]).unwrap();
    assert!(matches!(zf_matrix(&singular), Err(Error::IllConditioned { .. })));
}

#[test]
fn mmse_examples() {
    let id = mmse_matrix(&ComplexMatrix::identity(2), 1.0).unwrap();
    assert!(id.max_abs_diff(&ComplexMatrix::identity(2).scale_real(0.5)) < 1e-15);
    let h = random_h(1, 3);
    let zf = zf_matrix(&h).unwrap();
    assert!(mmse_matrix(&h, 0.0).unwrap().max_abs_diff(&zf) < 1e-8);
    let mut prev = f64::INFINITY;
    for e in [-2, -4, -6, -8] {
        let d = frob(&mmse_matrix(&h, 10f64.powi(e)).unwrap().sub(&zf).unwrap());
        assert!(d < prev);
        prev = d;
    }
    assert!(prev < 1e-6);
    assert!(frob(&mmse_matrix(&h, 1e12).unwrap()) < 1e-10);
}

#[test]
fn svd_scheme_examples() {
    let mut rng = RngStream::new(2, 33);
    let x = sample_complex_gaussian(&mut rng, 2, 4, 1.0).unwrap();
    assert_eq!(svd_precode(&x, &ComplexMatrix::identity(2)).unwrap(), x);

    let h = ComplexMatrix::from_diag(&[3.0, 1.0]);
    let f = complex_svd(&h).unwrap();
    let y = h.matmul(&x).unwrap();
    assert!(svd_equalize(&y, &f, SINGULAR_TOL).unwrap().max_abs_diff(&x) < 1e-15);

    // A dead direction is masked, not amplified.
    let rank1 = ComplexMatrix::from_real_rows(&[&[1.0, 1.0], &[1.0, 1.0]]).unwrap();
    let f = complex_svd(&rank1).unwrap();
    let eq = svd_equalizer_matrix(&f, SINGULAR_TOL);
    assert!((0..2).all(|c| eq[(1, c)].norm() == 0.0));
}

#[test]
fn noise_power_examples_match_monte_carlo() {
    // CSIR: H = diag(1, 2), σ² = 0.5.
    let h = ComplexMatrix::from_diag(&[1.0, 2.0]);
    let hw = zf_matrix(&h).unwrap();
    let p = noise_power_csir(&hw, 0.5);
    assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.125).abs() < 1e-15);
    for (i, (re, im)) in empirical_component_power(&hw, 0.5, 1_000_000, 1).into_iter().enumerate() {
        assert!(((re + im) / p[i] - 1.0).abs() < 0.03);
    }

    // CSIT: s = (2, 1), σ² = 1, through Σ†Uᴴ.
    let p = noise_power_csit(&[2.0, 1.0], 1.0, SINGULAR_TOL, DEFAULT_SENTINEL);
    assert_eq!(p, vec![0.25, 1.0]);
    let f = complex_svd(&ComplexMatrix::from_diag(&[2.0, 1.0])).unwrap();
    let eq = svd_equalizer_matrix(&f, SINGULAR_TOL);
    for (i, (re, im)) in empirical_component_power(&eq, 1.0, 1_000_000, 2).into_iter().enumerate() {
        assert!(((re + im) / p[i] - 1.0).abs() < 0.03);
    }

    assert_eq!(noise_power_csir(&ComplexMatrix::identity(3), 0.7), vec![0.7; 3]);
    assert_eq!(noise_power_csit(&[1.5, 1.5], 0.3, SINGULAR_TOL, 1e3)[0], noise_power_csit(&[1.5, 1.5], 0.3, SINGULAR_TOL, 1e3)[1]);
    assert_eq!(noise_power_csit(&[2.0, 0.0], 1.0, SINGULAR_TOL, 1e3)[1], 1e3);
}

#[test]
fn water_filling_examples() {
    let a = water_filling(&[2.0, 1.0], 1.0, 2.0).unwrap();
    assert!((a.p[0] - 1.375).abs() < 1e-12 && (a.p[1] - 0.625).abs() < 1e-12);
    assert!((a.water_level - 1.625).abs() < 1e-12);
    let a = water_filling(&[10.0, 0.01], 1.0, 0.1).unwrap();
    assert!((a.p[0] - 0.1).abs() < 1e-12 && a.p[1] == 0.0);
    let a = water_filling(&[1.3; 4], 0.2, 2.0).unwrap();
    assert!(a.p.iter().all(|p| (p - 0.5).abs() < 1e-12));
}

#[test]
fn capacity_examples() {
    assert!((capacity_open_loop(&ComplexMatrix::identity(2), 1.0).unwrap() - 2.0).abs() < 1e-15);
    assert_eq!(capacity_open_loop(&ComplexMatrix::zeros(2, 2), 1.0).unwrap(), 0.0);
    // Closed form from the water-filling example: log2(6.5) + log2(1.625).
    let c = capacity_closed_loop(&[2.0, 1.0], 1.0, 2.0).unwrap();
    assert!((c - 3.400_879_436_282_184).abs() < 1e-12, "{c}");
    let h = random_h(3, 2);
    let mut prev = capacity_open_loop(&h, 1.0).unwrap();
    let mut sigma2 = 1.0;
    for _ in 0..30 {
        sigma2 /= 2.0;
        let c = capacity_open_loop(&h, sigma2).unwrap();
        assert!(c > prev);
        prev = c;
    }
}

#[test]
fn heatmap_examples() {
    let hm = build_heatmap(&[0.4], 1, 2).unwrap();
    assert_eq!((hm.rows, hm.cols), (1, 4));
    assert_eq!(hm.values, vec![0.2; 4]);
    let hm = build_heatmap(&[0.8; 3], 4, 8).unwrap();
    assert!(hm.values.iter().all(|&v| v == 0.4));
    assert!(build_heatmap(&[1.0, 1.0], 3, 4).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn zf_and_mmse_match_inverse_oracle(seed in any::<u64>(), m in 1usize..=8, sigma2 in 0.01f64..10.0) {
        let h = random_h(seed, m);
        let f = complex_svd(&h).unwrap();
        prop_assume!(f.condition_number() < 1e6);
        let inv = h.inverse().unwrap();
        let zf = zf_matrix(&h).unwrap();
        let scale = frob(&inv);
        prop_assert!(frob(&zf.sub(&inv).unwrap()) < 1e-9 * scale.max(1.0));
        prop_assert!(frob(&zf.matmul(&h).unwrap().sub(&ComplexMatrix::identity(m)).unwrap()) < 1e-8);
        // Hᴴ(HHᴴ + σ²I)⁻¹
        let gram = h.matmul(&h.adjoint()).unwrap().add(&ComplexMatrix::identity(m).scale_real(sigma2)).unwrap();
        let oracle = h.adjoint().matmul(&gram.inverse().unwrap()).unwrap();
        prop_assert!(frob(&mmse_matrix(&h, sigma2).unwrap().sub(&oracle).unwrap()) < 1e-10 * frob(&oracle).max(1.0));
    }

    #[test]
    fn svd_round_trip(seed in any::<u64>(), m in 1usize..=8, k in 1usize..8) {
        let h = random_h(seed, m);
        let f = match checked_svd(&h) {
            Ok(f) if f.condition_number() < 1e6 => f,
            _ => return Ok(()),
        };
        let x = sample_complex_gaussian(&mut RngStream::new(seed, 34), m, k, 1.0).unwrap();
        let tx = svd_precode(&x, &f.v).unwrap();
        prop_assert!((frob(&tx) - frob(&x)).abs() < 1e-9 * frob(&x).max(1.0));
        let y = h.matmul(&tx).unwrap();
        prop_assert!(svd_equalize(&y, &f, SINGULAR_TOL).unwrap().max_abs_diff(&x) < 1e-8);
    }

    #[test]
    fn water_filling_kkt_and_oracle(seed in any::<u64>(), m in 1usize..=8, log_sigma in -2.0f64..1.0, p_total in 0.1f64..10.0) {
        let s = complex_svd(&random_h(seed, m)).unwrap().s;
        let sigma2 = 10f64.powf(log_sigma);
        let a = water_filling(&s, sigma2, p_total).unwrap();
        prop_assert!((a.p.iter().sum::<f64>() - p_total).abs() < 1e-9);
        for (p, &si) in a.p.iter().zip(&s) {
            let g = sigma2 / (si * si);
            if *p == 0.0 {
                prop_assert!(a.water_level <= g + 1e-9);
            } else {
                prop_assert!((p + g - a.water_level).abs() < 1e-9);
            }
        }
        for (p, q) in a.p.iter().zip(water_filling_active_set(&s, sigma2, p_total)) {
            prop_assert!((p - q).abs() < 1e-9, "{p} vs {q}");
        }
    }

    #[test]
    fn capacity_orderings(seed in any::<u64>(), m in 1usize..=8, log_sigma in -2.0f64..1.0) {
        let h = random_h(seed, m);
        let sigma2 = 10f64.powf(log_sigma);
        let s = complex_svd(&h).unwrap().s;
        let open = capacity_open_loop(&h, sigma2).unwrap();
        prop_assert!((open - log_det_capacity(&h, sigma2)).abs() < 1e-9 * open.max(1.0));
        let closed = capacity_closed_loop(&s, sigma2, m as f64).unwrap();
        prop_assert!(closed >= open - 1e-9);
        prop_assert!(capacity_closed_loop(&s, 2.0 * sigma2, m as f64).unwrap() <= closed + 1e-12);
    }

    #[test]
    fn equal_gains_close_the_gap(s in 0.1f64..5.0, m in 1usize..=8, sigma2 in 0.01f64..10.0) {
        let phases = ComplexMatrix::from_fn(m, m, |r, c| {
            // Scaled unitary DFT matrix: all singular values equal to s.
            Complex64::from_polar(s / (m as f64).sqrt(), std::f64::consts::TAU * (r * c) as f64 / m as f64)
        });
        let sv = complex_svd(&phases).unwrap().s;
        let open = capacity_open_loop(&phases, sigma2).unwrap();
        let closed = capacity_closed_loop(&sv, sigma2, m as f64).unwrap();
        prop_assert!((open - closed).abs() < 1e-9);
    }

    #[test]
    fn heatmap_cells_align_with_symbols(m in 1usize..=8, k_per in 1usize..6, l_exp in 0u32..4, seed in any::<u64>()) {
        let l = 2usize.pow(l_exp);
        let k = k_per * l;
        let mut rng = RngStream::new(seed, 35);
        let p: Vec<f64> = (0..m).map(|_| rng.uniform()).collect();
        let hm = build_heatmap(&p, l, k).unwrap();
        prop_assert_eq!(hm.rows * hm.cols, 2 * m * k);
        for a in 0..m {
            for j in 0..k {
                for imag in [false, true] {
                    let idx = packed_index(a, j, imag, k);
                    prop_assert_eq!(hm.get(idx / hm.cols, idx % hm.cols), 0.5 * p[a]);
                }
            }
        }
    }
}
