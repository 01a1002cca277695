use jscc_nn::{gradient_check, GradCheckOptions, GradCheckReport, Graph, ParameterStore, Tensor, Var};

use super::config::ModelConfig;
use super::model::{init_params, residual_compensation, transformer_layer};
use super::pipeline::{forward_image, LinkDraw, RayleighChannel};
use crate::error::Result;
use crate::frontend::CsiMode;
use crate::linalg::{sample_complex_gaussian, RngStream};

#[derive(Clone, Debug)]
pub struct GradCheckCase {
    pub name: &'static str,
    pub report: GradCheckReport,
}

/// Weighted sum against a fixed non-uniform pattern, so every output entry
/// gets a distinct upstream gradient.
fn probe(g: &mut Graph, y: Var) -> Result<Var> {
    let (r, c) = g.shape(y);
    let w = (0..r * c).map(|i| ((i * 7 % 11) as f64 - 5.0) / 5.0).collect();
    let wv = g.constant(r, c, w)?;
    let p = g.mul(y, wv)?;
    Ok(g.sum(p))
}

/// Entries uniform in `[-1, 1]`.
fn uniform(rng: &mut RngStream, shape: Vec<usize>) -> Tensor {
    Tensor::uniform_fan_in(shape, 1, rng)
}

fn opts(seed: u64) -> GradCheckOptions {
    GradCheckOptions {
        seed,
        ..GradCheckOptions::default()
    }
}

/// Finite-difference checks of the model's building blocks and of the full
/// link (encoder, normalization, channel, equalization, decoder) in both CSI
/// modes, at the named profile.
pub fn gradcheck_suite(profile: &str, seed: u64) -> Result<Vec<GradCheckCase>> {
    let mut cases = Vec::new();
    let mut rng = RngStream::new(seed, 0x6c);

    // Transformer block with its input as a parameter.
    let cfg = ModelConfig::profile(profile, CsiMode::Csir)?;
    let mut s = init_params(&cfg, &mut rng)?;
    s.insert("input", uniform(&mut rng, vec![cfg.l(), cfg.d]));
    let layer_store = restrict(&s, &["input", "enc.layers.0."]);
    let report = gradient_check(
        &layer_store,
        |g, s| {
            let x = g.param(s, "input")?;
            let y = transformer_layer(g, s, "enc.layers.0", &cfg, x)?;
            probe(g, y)
        },
        opts(seed),
    )?;
    cases.push(GradCheckCase {
        name: "transformer_layer",
        report,
    });

    // Residual equalizer on a random received block.
    let h = sample_complex_gaussian(&mut rng, cfg.m_max, cfg.m_max, 1.0)?;
    s.insert("received", uniform(&mut rng, vec![cfg.m_max, 2 * cfg.k]));
    let res_store = restrict(&s, &["received", "res."]);
    let report = gradient_check(
        &res_store,
        |g, s| {
            let y = g.param(s, "received")?;
            let c = residual_compensation(g, s, &cfg, &h, y)?;
            probe(g, c)
        },
        opts(seed),
    )?;
    cases.push(GradCheckCase {
        name: "residual_equalizer",
        report,
    });

    for (name, mode) in [("end_to_end_csir", CsiMode::Csir), ("end_to_end_csit", CsiMode::Csit)] {
        let cfg = ModelConfig::profile(profile, mode)?;
        let s = init_params(&cfg, &mut rng)?;
        let n = cfg.l() * cfg.c();
        let patches: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
        let link = LinkDraw::sample(&cfg, &RayleighChannel, &mut rng, cfg.m_max, 10.0, 0.0)?;
        let report = gradient_check(
            &s,
            |g, s| -> Result<Var> { Ok(forward_image(g, s, &cfg, &patches, &link)?.loss) },
            opts(seed),
        )?;
        cases.push(GradCheckCase { name, report });
    }
    Ok(cases)
}

/// The parameters whose names start with any of `prefixes`.
fn restrict(s: &ParameterStore, prefixes: &[&str]) -> ParameterStore {
    let mut out = ParameterStore::new();
    for (name, t) in s.iter() {
        if prefixes.iter().any(|p| name.starts_with(p)) {
            out.insert(name.clone(), t.clone());
        }
    }
    out
}
