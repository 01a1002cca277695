use deepjscc_mimo::baseline::{
    bound_from_curve, floor_psnr, link_capacity, separation_bound_psnr, Codec, CombinedCodec, ExternalCodec, RdPoint,
    ToyDctCodec,
};
use deepjscc_mimo::channel::{sample_channel, snr_to_noise_variance, ChannelRealization};
use deepjscc_mimo::frontend::CsiMode;
use deepjscc_mimo::harness::{psnr, synth_dataset};
use deepjscc_mimo::linalg::{ComplexMatrix, RngStream};
use proptest::prelude::*;

fn textured(h: usize, w: usize, seed: u64) -> deepjscc_mimo::jscc::Image {
    // Pick a non-flat synthetic image so the curve has several points.
    (0..)
        .map(|i| synth_dataset(i + 1, h, w, seed).pop().unwrap())
        .find(|img| floor_psnr(img).unwrap() < 25.0)
        .unwrap()
}

#[test]
fn identity_channel_worked_example() {
    let img = textured(32, 32, 3);
    let ch = ChannelRealization::known(ComplexMatrix::identity(2), 1.0);
    let codec = ToyDctCodec::default();
    for mode in [CsiMode::Csir, CsiMode::Csit] {
        assert!((link_capacity(&ch, mode).unwrap() - 2.0).abs() < 1e-12);
    }
    // k = 256 channel uses at 2 bits each over 1024 pixels: 0.5 bpp.
    let budget = 256.0 * 2.0 / 1024.0;
    let mut best = floor_psnr(&img).unwrap();
    let mut top_bpp = 0.0;
    for &(m, b) in &codec.ladder {
        let bpp = ToyDctCodec::bpp(m, b);
        if bpp <= budget {
            let q = psnr(&img, &codec.reconstruct(&img, m, b).unwrap(), 1.0).unwrap();
            best = best.max(q);
            top_bpp = f64::max(top_bpp, bpp);
        }
    }
    assert_eq!(top_bpp, 0.375);
    let curve = codec.rd_curve(&img).unwrap();
    let selected = curve.iter().filter(|p| p.bpp <= budget).last().unwrap();
    assert_eq!(selected.psnr_db, best);
    for mode in [CsiMode::Csir, CsiMode::Csit] {
        let bound = separation_bound_psnr(&img, &ch, 1.0 / 12.0, mode, &codec).unwrap();
        assert_eq!(bound, best);
    }
}

#[test]
fn bound_is_monotone_and_csit_dominates() {
    let img = textured(16, 16, 4);
    let codec = ToyDctCodec::default();
    let curve = codec.rd_curve(&img).unwrap();
    let floor = floor_psnr(&img).unwrap();
    let mut rng = RngStream::new(8, 51);
    for _ in 0..20 {
        let base = sample_channel(&mut rng, 2, 1.0, 0.0).unwrap();
        let mut prev = [f64::NEG_INFINITY; 2];
        for snr in (0..10).map(|i| -5.0 + 3.0 * i as f64) {
            let ch = ChannelRealization::known(base.h.clone(), snr_to_noise_variance(snr, 2));
            let b: Vec<f64> = [CsiMode::Csir, CsiMode::Csit]
                .iter()
                .map(|&mode| bound_from_curve(&curve, floor, link_capacity(&ch, mode).unwrap(), 64, 16, 16))
                .collect();
            assert!(b[1] >= b[0]);
            assert!(b[0] >= prev[0] && b[1] >= prev[1]);
            prev = [b[0], b[1]];
        }
    }
}

#[test]
fn lossless_external_codec_only_raises_the_bound() {
    let img = textured(16, 16, 5);
    let external = ExternalCodec {
        encode: "cp {input} {output}".into(),
        decode: "cp {input} {output}".into(),
        qualities: vec!["1".into()],
        decoded_ext: "ppm".into(),
    };
    let ext_curve = external.rd_curve(&img).unwrap();
    assert_eq!(ext_curve.len(), 1);
    // 8-bit quantization of the source only.
    assert!(ext_curve[0].psnr_db > 50.0 && ext_curve[0].bpp > 24.0);

    let combined = CombinedCodec(vec![Box::new(ToyDctCodec::default()), Box::new(external)]);
    let toy = ToyDctCodec::default();
    let mut rng = RngStream::new(1, 52);
    for snr in [0.0, 10.0, 30.0, 60.0, f64::INFINITY] {
        let ch = sample_channel(&mut rng, 2, snr_to_noise_variance(snr, 2), 0.0).unwrap();
        for mode in [CsiMode::Csir, CsiMode::Csit] {
            let a = separation_bound_psnr(&img, &ch, 1.0 / 12.0, mode, &toy).unwrap();
            let b = separation_bound_psnr(&img, &ch, 1.0 / 12.0, mode, &combined).unwrap();
            assert!(b >= a);
        }
    }
}

#[test]
fn failing_external_codec_reports_an_error() {
    let img = textured(8, 8, 6);
    let broken = ExternalCodec {
        encode: "exit 3".into(),
        decode: "true".into(),
        qualities: vec!["1".into()],
        decoded_ext: "png".into(),
    };
    assert!(broken.rd_curve(&img).is_err());
}

proptest! {
    #[test]
    fn more_capacity_never_hurts(cap in 0.0f64..20.0, extra in 0.0f64..20.0, k in 1usize..200) {
        let curve: Vec<RdPoint> = (1..=10).map(|i| RdPoint { bpp: 0.1 * i as f64, psnr_db: 15.0 + i as f64 }).collect();
        let a = bound_from_curve(&curve, 12.0, cap, k, 16, 16);
        let b = bound_from_curve(&curve, 12.0, cap + extra, k, 16, 16);
        prop_assert!(b >= a && a >= 12.0);
    }

    #[test]
    fn toy_curves_are_monotone(seed in 0u64..50) {
        let img = synth_dataset(1, 16, 16, seed).remove(0);
        let curve = ToyDctCodec::default().rd_curve(&img).unwrap();
        prop_assert!(!curve.is_empty());
        for w in curve.windows(2) {
            prop_assert!(w[1].bpp > w[0].bpp && w[1].psnr_db >= w[0].psnr_db);
        }
    }
}
