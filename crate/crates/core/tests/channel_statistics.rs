use deepjscc_mimo::channel::{
    noise_variance_to_snr, sample_channel, snr_to_noise_variance, transmit, transmit_with_noise, verify_power,
    ChannelRealization, SymbolBlock,
};
use deepjscc_mimo::linalg::{sample_complex_gaussian, Complex64, ComplexMatrix, RngStream};
use proptest::prelude::*;

fn unit_power_block(rng: &mut RngStream, m: usize, k: usize) -> SymbolBlock {
    let x = sample_complex_gaussian(rng, m, k, 1.0).unwrap();
    let scale = ((m * k) as f64 / x.frobenius_norm_sq()).sqrt();
    SymbolBlock { x: x.scale_real(scale) }
}

#[test]
fn snr_examples() {
    assert!((snr_to_noise_variance(3.0103, 2) - 1.0).abs() < 1e-4);
    assert_eq!(snr_to_noise_variance(0.0, 2), 2.0);
    assert!((snr_to_noise_variance(20.0, 4) - 0.04).abs() < 1e-15);
}

#[test]
fn measured_snr_matches_nominal() {
    let (m, k, blocks) = (4, 16, 10_000);
    let sigma2 = snr_to_noise_variance(20.0, m);
    let mut rng = RngStream::new(3, 21);
    let (mut sig, mut noise) = (0.0, 0.0);
    for _ in 0..blocks {
        let ch = sample_channel(&mut rng, m, sigma2, 0.0).unwrap();
        let x = unit_power_block(&mut rng, m, k);
        assert!((verify_power(&x) - 1.0).abs() < 1e-12);
        let clean = transmit_with_noise(&x, &ch, &ComplexMatrix::zeros(m, k)).unwrap();
        let y = transmit(&mut rng, &x, &ch).unwrap();
        sig += clean.frobenius_norm_sq();
        noise += y.sub(&clean).unwrap().frobenius_norm_sq();
    }
    let measured = 10.0 * (sig / noise).log10();
    assert!((measured - 20.0).abs() < 0.3, "{measured}");
}

#[test]
fn estimation_error_statistics() {
    let mut rng = RngStream::new(4, 22);
    let n_mats = 62_500; // 4×4 entries each, 10⁶ total
    let (mut sum, mut sq) = (Complex64::new(0.0, 0.0), 0.0);
    for _ in 0..n_mats {
        let ch = sample_channel(&mut rng, 4, 1.0, 1.0).unwrap();
        for (a, b) in ch.h.data().iter().zip(ch.h_est.data()) {
            let e = b - a;
            sum += e;
            sq += e.norm_sqr();
        }
    }
    let n = (n_mats * 16) as f64;
    let var = sq / n;
    assert!((0.99..=1.01).contains(&var), "{var}");
    // Each real part has variance 1/2.
    let bound = 3.0 * (0.5f64).sqrt() / n.sqrt();
    assert!((sum.re / n).abs() < bound && (sum.im / n).abs() < bound);
}

#[test]
fn channel_noise_variance() {
    let ch = ChannelRealization::known(ComplexMatrix::identity(1), 1.0);
    let x = SymbolBlock { x: ComplexMatrix::zeros(1, 1_000_000) };
    let y = transmit(&mut RngStream::new(5, 23), &x, &ch).unwrap();
    let var = y.frobenius_norm_sq() / 1e6;
    assert!((0.99..=1.01).contains(&var), "{var}");
}

#[test]
fn noiseless_and_identity_channels() {
    let mut rng = RngStream::new(6, 24);
    let x = unit_power_block(&mut rng, 3, 5);
    let ch = sample_channel(&mut rng, 3, 0.0, 0.0).unwrap();
    assert_eq!(transmit(&mut rng, &x, &ch).unwrap(), ch.h.matmul(&x.x).unwrap());
    let id = ChannelRealization::known(ComplexMatrix::identity(3), 0.0);
    assert_eq!(transmit(&mut rng, &x, &id).unwrap(), x.x);
}

#[test]
fn power_examples() {
    assert_eq!(verify_power(&SymbolBlock { x: ComplexMatrix::zeros(2, 3) }), 0.0);
    let phases = ComplexMatrix::from_fn(2, 3, |r, c| Complex64::from_polar(1.0, (r * 3 + c) as f64));
    assert!((verify_power(&SymbolBlock { x: phases }) - 1.0).abs() < 1e-15);
}

proptest! {
    #[test]
    fn transmit_is_linear(seed in any::<u64>(), m in 1usize..=8, k in 1usize..6, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut rng = RngStream::new(seed, 25);
        let ch = sample_channel(&mut rng, m, 1.0, 0.0).unwrap();
        let x1 = sample_complex_gaussian(&mut rng, m, k, 1.0).unwrap();
        let x2 = sample_complex_gaussian(&mut rng, m, k, 1.0).unwrap();
        let w = sample_complex_gaussian(&mut rng, m, k, 1.0).unwrap();
        let mix = x1.scale_real(a).add(&x2.scale_real(b)).unwrap();
        let lhs = transmit_with_noise(&SymbolBlock { x: mix }, &ch, &w).unwrap();
        let rhs = ch.h.matmul(&x1).unwrap().scale_real(a)
            .add(&ch.h.matmul(&x2).unwrap().scale_real(b)).unwrap()
            .add(&w).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn snr_conversions_invert(snr in -30.0f64..60.0, m in 1usize..=8) {
        let back = noise_variance_to_snr(snr_to_noise_variance(snr, m), m);
        prop_assert!((back - snr).abs() < 1e-12);
    }

    #[test]
    fn realizations_are_reproducible(seed in any::<u64>(), m in 1usize..=8) {
        let a = sample_channel(&mut RngStream::new(seed, 26), m, 0.3, 0.0).unwrap();
        let b = sample_channel(&mut RngStream::new(seed, 26), m, 0.3, 0.0).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(&a.h, &a.h_est);
        // The channel does not depend on the estimation-error level.
        let c = sample_channel(&mut RngStream::new(seed, 26), m, 0.3, 0.5).unwrap();
        prop_assert_eq!(&a.h, &c.h);
    }
}
