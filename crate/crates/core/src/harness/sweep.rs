use jscc_nn::ParameterStore;
use rayon::prelude::*;

use super::metrics::{mean_std, PsnrPeak};
use super::records::TransmissionRecord;
use crate::baseline::{bound_from_curve, floor_psnr, link_capacity, Codec, RdPoint};
use crate::channel::{sample_channel, snr_to_noise_variance, ChannelRealization};
use crate::error::{Error, Result};
use crate::frontend::CsiMode;
use crate::jscc::{evaluate_model, initial_params, ChannelSampler, EvalOptions, Image, ModelConfig, EVAL_STREAM};
use crate::linalg::RngStream;

/// Model id used for separation-bound rows.
pub const BOUND_MODEL_ID: &str = "separation-bound";

/// One point of an evaluation grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepCell {
    pub snr_db: f64,
    pub sigma_e2: f64,
    pub m: usize,
    pub seed: u64,
}

/// What a model sweep evaluates.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPlan {
    pub cells: Vec<SweepCell>,
    pub n_channel_draws: usize,
    pub peak: PsnrPeak,
    pub model_id: String,
}

/// Cartesian grid, SNR varying fastest.
pub fn grid(snrs: &[f64], sigma_e2: &[f64], ms: &[usize], seeds: &[u64]) -> Vec<SweepCell> {
    let mut cells = Vec::new();
    for &seed in seeds {
        for &m in ms {
            for &s in sigma_e2 {
                for &snr_db in snrs {
                    cells.push(SweepCell {
                        snr_db,
                        sigma_e2: s,
                        m,
                        seed,
                    });
                }
            }
        }
    }
    cells
}

/// Checks that `s` has exactly the parameters `cfg` builds, with matching
/// shapes.
pub fn check_params(s: &ParameterStore, cfg: &ModelConfig) -> Result<()> {
    let expected = initial_params(cfg, 0)?;
    for (name, t) in expected.iter() {
        let got = s
            .get(name)
            .map_err(|_| Error::Config(format!("checkpoint lacks parameter {name}")))?;
        if got.shape != t.shape {
            return Err(Error::Config(format!(
                "parameter {name} has shape {:?}, model expects {:?}",
                got.shape, t.shape
            )));
        }
    }
    if let Some(extra) = s.names().find(|n| !expected.contains(n)) {
        return Err(Error::Config(format!("checkpoint has unexpected parameter {extra}")));
    }
    Ok(())
}

/// Evaluates a model on every cell. Cells sharing a seed reuse the same
/// channel and noise draws (common random numbers), so curves over SNR or
/// estimation error are not blurred by sampling noise.
pub fn run_sweep(
    s: &ParameterStore,
    cfg: &ModelConfig,
    images: &[Image],
    plan: &SweepPlan,
    sampler: &dyn ChannelSampler,
) -> Result<Vec<TransmissionRecord>> {
    check_params(s, cfg)?;
    for c in &plan.cells {
        if c.m < cfg.m_min() || c.m > cfg.m_max {
            return Err(Error::Config(format!("antenna count {} not supported by the model", c.m)));
        }
        cfg.check_estimation_error(c.sigma_e2)?;
    }
    plan.cells
        .par_iter()
        .map(|c| {
            let opts = EvalOptions {
                snr_db: c.snr_db,
                sigma_e2: c.sigma_e2,
                m: Some(c.m),
                n_channel_draws: plan.n_channel_draws,
                seed: c.seed,
                peak: plan.peak,
            };
            let st = evaluate_model(s, cfg, images, &opts, sampler)?;
            if st.power.violations > 0 {
                return Err(Error::Numeric(format!(
                    "{} of {} blocks violated the power constraint",
                    st.power.violations, st.power.checks
                )));
            }
            Ok(TransmissionRecord {
                mode: cfg.mode,
                snr_db: c.snr_db,
                bandwidth_ratio: cfg.rate(),
                m: c.m,
                sigma_e2: c.sigma_e2,
                seed: c.seed,
                psnr_mean: st.psnr_mean,
                psnr_std: st.psnr_std,
                n_images: st.n_images,
                n_channel_draws: st.n_channel_draws,
                model_id: plan.model_id.clone(),
            })
        })
        .collect()
}

/// Separation-bound rows for both CSI modes over `snrs × seeds`.
///
/// Channel draws depend only on the seed and the (image, draw) index, so
/// the CSIR and CSIT rows and every SNR see identical channels.
pub fn run_baseline(
    images: &[Image],
    snrs: &[f64],
    r: f64,
    m: usize,
    seeds: &[u64],
    n_channel_draws: usize,
    codec: &dyn Codec,
) -> Result<Vec<TransmissionRecord>> {
    if images.is_empty() {
        return Err(Error::Dataset("no images to evaluate".into()));
    }
    if n_channel_draws == 0 {
        return Err(Error::Argument("need at least one channel draw".into()));
    }
    let (h, w) = (images[0].h, images[0].w);
    let k = crate::jscc::channel_uses(r, h, w)?;
    let curves: Vec<(Vec<RdPoint>, f64)> = images
        .par_iter()
        .map(|img| Ok((codec.rd_curve(img)?, floor_psnr(img)?)))
        .collect::<Result<_>>()?;
    let name = format!("{BOUND_MODEL_ID}/{}", codec.name());

    let mut out = Vec::new();
    for &seed in seeds {
        let base = RngStream::new(seed, EVAL_STREAM);
        let items = images.len() * n_channel_draws;
        let channels: Vec<ChannelRealization> = (0..items)
            .map(|i| sample_channel(&mut base.derive(i as u64), m, 1.0, 0.0))
            .collect::<Result<_>>()?;
        for mode in [CsiMode::Csir, CsiMode::Csit] {
            for &snr_db in snrs {
                let sigma_w2 = snr_to_noise_variance(snr_db, m);
                let values = channels
                    .par_iter()
                    .enumerate()
                    .map(|(i, ch)| {
                        let ch = ChannelRealization::known(ch.h.clone(), sigma_w2);
                        let (curve, floor) = &curves[i / n_channel_draws];
                        let img = &images[i / n_channel_draws];
                        let cap = link_capacity(&ch, mode)?;
                        Ok(bound_from_curve(curve, *floor, cap, k, img.h, img.w))
                    })
                    .collect::<Result<Vec<f64>>>()?;
                let (psnr_mean, psnr_std) = mean_std(&values);
                out.push(TransmissionRecord {
                    mode,
                    snr_db,
                    bandwidth_ratio: r,
                    m,
                    sigma_e2: 0.0,
                    seed,
                    psnr_mean,
                    psnr_std,
                    n_images: images.len(),
                    n_channel_draws,
                    model_id: name.clone(),
                });
            }
        }
    }
    Ok(out)
}
