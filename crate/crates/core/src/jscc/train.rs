use std::fmt::Write as _;
use std::path::Path;

use jscc_nn::{adam_step, AdamConfig, AdamState, Graph, ParameterStore};

use super::config::ModelConfig;
use super::eval::{evaluate_model, EvalOptions};
use super::layout::{patchify, Image};
use super::model::init_params;
use super::pipeline::{forward_image, ChannelSampler, LinkDraw, PowerStats};
use crate::error::{Error, Result};
use crate::harness::metrics::PsnrPeak;
use crate::linalg::RngStream;

/// Stream id for parameter initialization.
pub const INIT_STREAM: u64 = 1;
/// Stream id for batch selection and per-image link draws during training.
pub const TRAIN_STREAM: u64 = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Validate every this many steps; 0 disables validation and early
    /// stopping.
    pub eval_every: usize,
    /// Stop after this many validations without sufficient improvement.
    pub patience: usize,
    pub min_delta_db: f64,
    pub val_draws: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 5000,
            batch_size: 16,
            lr: AdamConfig::default().lr,
            eval_every: 100,
            patience: 10,
            min_delta_db: 0.01,
            val_draws: 2,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HistoryRow {
    pub step: usize,
    pub loss: f64,
    pub val_psnr: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub rows: Vec<HistoryRow>,
    pub best_step: Option<usize>,
    pub best_val_psnr: Option<f64>,
    pub stopped_early: bool,
    /// Power checks over every transmitted block, training and validation.
    pub power: PowerStats,
}

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,loss,val_psnr\n");
        for r in &self.rows {
            let val = r.val_psnr.map(|v| format!("{v:.6}")).unwrap_or_default();
            let _ = writeln!(out, "{},{:.9e},{}", r.step, r.loss, val);
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Parameters a training run with `seed` starts from.
pub fn initial_params(cfg: &ModelConfig, seed: u64) -> Result<ParameterStore> {
    init_params(cfg, &mut RngStream::new(seed, INIT_STREAM))
}

/// One optimizer step on the mean loss over `batch`, image `i` sent over
/// `links[i]`. Returns the pre-update batch loss.
pub fn train_step(
    s: &mut ParameterStore,
    adam: &mut AdamState,
    cfg: &ModelConfig,
    batch: &[&[f64]],
    links: &[LinkDraw],
    power: &mut PowerStats,
) -> Result<f64> {
    if batch.is_empty() || batch.len() != links.len() {
        return Err(Error::Argument(format!(
            "{} images with {} link draws",
            batch.len(),
            links.len()
        )));
    }
    s.zero_grads();
    let inv = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    for (patches, link) in batch.iter().zip(links) {
        let mut g = Graph::new();
        let f = forward_image(&mut g, s, cfg, patches, link)?;
        power.record(f.power);
        let loss = g.scale(f.loss, inv);
        total += g.scalar(loss);
        g.backward(loss, s)?;
    }
    if !total.is_finite() {
        return Err(Error::Numeric(format!("non-finite training loss {total}")));
    }
    adam_step(s, adam)?;
    if !s.all_finite() {
        return Err(Error::Numeric("parameters became non-finite".into()));
    }
    Ok(total)
}

/// Trains from [`initial_params`] with Adam, validating periodically and
/// keeping the best validated parameters.
pub fn train(
    cfg: &ModelConfig,
    tc: &TrainConfig,
    train_set: &[Image],
    val_set: &[Image],
    sampler: &dyn ChannelSampler,
) -> Result<(ParameterStore, TrainHistory)> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::Dataset("training set is empty".into()));
    }
    if tc.batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }
    if !(tc.lr >= 0.0) {
        return Err(Error::Config(format!("learning rate {} must be >= 0", tc.lr)));
    }
    let patches: Vec<Vec<f64>> = train_set
        .iter()
        .map(|img| patchify(img, cfg.p))
        .collect::<Result<_>>()?;

    let mut params = initial_params(cfg, tc.seed)?;
    let mut adam = AdamState::new(AdamConfig {
        lr: tc.lr,
        ..AdamConfig::default()
    });
    let mut hist = TrainHistory::default();
    let mut best: Option<ParameterStore> = None;
    let mut stale = 0;
    let validate = tc.eval_every > 0 && !val_set.is_empty();
    let base = RngStream::new(tc.seed, TRAIN_STREAM);

    for step in 0..tc.steps {
        let mut rng = base.derive(step as u64);
        let mut batch = Vec::with_capacity(tc.batch_size);
        let mut links = Vec::with_capacity(tc.batch_size);
        for _ in 0..tc.batch_size {
            let idx = rng.below(patches.len());
            let snr = cfg.snr_train.sample(&mut rng);
            let m = if cfg.adaptive_m {
                cfg.m_min() + rng.below(cfg.m_max - cfg.m_min() + 1)
            } else {
                cfg.m_max
            };
            links.push(LinkDraw::sample(cfg, sampler, &mut rng, m, snr, cfg.sigma_e2_train)?);
            batch.push(patches[idx].as_slice());
        }
        let loss = train_step(&mut params, &mut adam, cfg, &batch, &links, &mut hist.power)
            .map_err(|e| match e {
                Error::Numeric(msg) => Error::Numeric(format!("step {step}: {msg}")),
                other => other,
            })?;

        let done = step + 1;
        let mut row = HistoryRow {
            step: done,
            loss,
            val_psnr: None,
        };
        if validate && (done % tc.eval_every == 0 || done == tc.steps) {
            let opts = EvalOptions {
                snr_db: cfg.snr_train.midpoint(),
                sigma_e2: cfg.sigma_e2_train,
                m: None,
                n_channel_draws: tc.val_draws.max(1),
                seed: tc.seed,
                peak: PsnrPeak::Fixed,
            };
            let stats = evaluate_model(&params, cfg, val_set, &opts, sampler)?;
            hist.power.merge(stats.power);
            row.val_psnr = Some(stats.psnr_mean);
            let improved = match hist.best_val_psnr {
                None => true,
                Some(b) => stats.psnr_mean >= b + tc.min_delta_db,
            };
            if improved {
                hist.best_val_psnr = Some(stats.psnr_mean);
                hist.best_step = Some(done);
                best = Some(params.clone());
                stale = 0;
            } else {
                stale += 1;
            }
        }
        hist.rows.push(row);
        if validate && tc.patience > 0 && stale >= tc.patience {
            hist.stopped_early = true;
            break;
        }
    }
    if let Some(b) = best {
        params = b;
    }
    Ok((params, hist))
}
