use jscc_nn::ParameterStore;
use rayon::prelude::*;

use super::config::ModelConfig;
use super::layout::Image;
use super::pipeline::{reconstruct, ChannelSampler, LinkDraw, PowerStats};
use crate::error::{Error, Result};
use crate::harness::metrics::{mean_std, psnr, PsnrPeak};
use crate::linalg::RngStream;

/// Stream id for evaluation draws. Every (image, draw) item derives its own
/// sub-stream, so results do not depend on scheduling, and cells that differ
/// only in SNR or estimation error see the same channel and noise shapes.
pub const EVAL_STREAM: u64 = 3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalOptions {
    pub snr_db: f64,
    pub sigma_e2: f64,
    /// Active antennas; `None` uses `m_max`.
    pub m: Option<usize>,
    pub n_channel_draws: usize,
    pub seed: u64,
    pub peak: PsnrPeak,
}

impl EvalOptions {
    pub fn new(snr_db: f64, seed: u64) -> Self {
        Self {
            snr_db,
            sigma_e2: 0.0,
            m: None,
            n_channel_draws: 10,
            seed,
            peak: PsnrPeak::Fixed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalStats {
    pub psnr_mean: f64,
    pub psnr_std: f64,
    pub n_images: usize,
    pub n_channel_draws: usize,
    pub power: PowerStats,
}

/// Mean and standard deviation of PSNR over `images × n_channel_draws`
/// independent transmissions. Deterministic for a given seed.
pub fn evaluate_model(
    s: &ParameterStore,
    cfg: &ModelConfig,
    images: &[Image],
    opts: &EvalOptions,
    sampler: &dyn ChannelSampler,
) -> Result<EvalStats> {
    if images.is_empty() {
        return Err(Error::Dataset("no images to evaluate".into()));
    }
    if opts.n_channel_draws == 0 {
        return Err(Error::Argument("need at least one channel draw".into()));
    }
    let m = opts.m.unwrap_or(cfg.m_max);
    cfg.check_estimation_error(opts.sigma_e2)?;
    let base = RngStream::new(opts.seed, EVAL_STREAM);
    let draws = opts.n_channel_draws;

    let results: Vec<Result<(f64, f64)>> = (0..images.len() * draws)
        .into_par_iter()
        .map(|item| {
            let img = &images[item / draws];
            let mut rng = base.derive(item as u64);
            let link = LinkDraw::sample(cfg, sampler, &mut rng, m, opts.snr_db, opts.sigma_e2)?;
            let r = reconstruct(s, cfg, img, &link)?;
            Ok((psnr(img, &r.image, opts.peak.peak(img))?, r.power))
        })
        .collect();

    let mut values = Vec::with_capacity(results.len());
    let mut power = PowerStats::default();
    for r in results {
        let (p, pw) = r?;
        values.push(p);
        power.record(pw);
    }
    let (psnr_mean, psnr_std) = mean_std(&values);
    Ok(EvalStats {
        psnr_mean,
        psnr_std,
        n_images: images.len(),
        n_channel_draws: draws,
        power,
    })
}
