use jscc_nn::{Graph, ParameterStore, Var, ZERO_INDEX};

use super::config::ModelConfig;
use super::layout::{from_packed, patchify, to_packed, unpatchify, Image};
use super::model::{decode, encode, residual_compensation};
use crate::channel::{sample_channel, snr_to_noise_variance, ChannelRealization, SymbolBlock};
use crate::error::{Error, Result};
use crate::frontend::{
    build_heatmap, noise_power_csir, noise_power_csit, svd_equalizer_matrix, zf_matrix, CsiMode,
    SINGULAR_TOL,
};
use crate::linalg::{complex_svd, sample_complex_gaussian, ComplexMatrix, RngStream};

/// Allowed deviation of the transmitted average power from one.
pub const POWER_TOL: f64 = 1e-6;

/// Source of channel realizations for training and evaluation.
pub trait ChannelSampler: Sync {
    fn sample(
        &self,
        rng: &mut RngStream,
        m: usize,
        sigma_w2: f64,
        sigma_e2: f64,
    ) -> Result<ChannelRealization>;
}

/// I.i.d. Rayleigh fading.
#[derive(Clone, Copy, Debug, Default)]
pub struct RayleighChannel;

impl ChannelSampler for RayleighChannel {
    fn sample(&self, rng: &mut RngStream, m: usize, sigma_w2: f64, sigma_e2: f64) -> Result<ChannelRealization> {
        sample_channel(rng, m, sigma_w2, sigma_e2)
    }
}

/// `H = I`; the estimate still carries the configured error.
#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityChannel;

impl ChannelSampler for IdentityChannel {
    fn sample(&self, rng: &mut RngStream, m: usize, sigma_w2: f64, sigma_e2: f64) -> Result<ChannelRealization> {
        let mut ch = sample_channel(rng, m, sigma_w2, sigma_e2)?;
        let err = ch.h_est.sub(&ch.h)?;
        ch.h = ComplexMatrix::identity(m);
        ch.h_est = if sigma_e2 == 0.0 { ch.h.clone() } else { ch.h.add(&err)? };
        Ok(ch)
    }
}

/// Everything random about one image's transmission.
#[derive(Clone, Debug)]
pub struct LinkDraw {
    /// Active antennas.
    pub m: usize,
    pub channel: ChannelRealization,
    /// `m×k` additive noise.
    pub noise: ComplexMatrix,
}

impl LinkDraw {
    /// Draws the channel, then the noise, from `rng`.
    pub fn sample(
        cfg: &ModelConfig,
        sampler: &dyn ChannelSampler,
        rng: &mut RngStream,
        m: usize,
        snr_db: f64,
        sigma_e2: f64,
    ) -> Result<Self> {
        let sigma_w2 = snr_to_noise_variance(snr_db, m);
        let channel = sampler.sample(rng, m, sigma_w2, sigma_e2)?;
        let noise = sample_complex_gaussian(rng, m, cfg.k, sigma_w2)?;
        Ok(Self { m, channel, noise })
    }

    /// A fixed channel without noise.
    pub fn noiseless(h: ComplexMatrix, k: usize) -> Self {
        let m = h.rows();
        Self {
            m,
            channel: ChannelRealization::known(h, 0.0),
            noise: ComplexMatrix::zeros(m, k),
        }
    }
}

/// Count of power-constraint checks and failures.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PowerStats {
    pub checks: u64,
    pub violations: u64,
}

impl PowerStats {
    pub fn record(&mut self, power: f64) {
        self.checks += 1;
        if !((power - 1.0).abs() <= POWER_TOL) {
            self.violations += 1;
        }
    }

    pub fn merge(&mut self, other: PowerStats) {
        self.checks += other.checks;
        self.violations += other.violations;
    }
}

enum Receiver {
    Zf { h_w: ComplexMatrix },
    Svd { v: ComplexMatrix, eq: ComplexMatrix },
}

/// Equalizer matrices and the clamped per-antenna noise powers (padded to
/// `m_max` with the sentinel).
fn prepare(cfg: &ModelConfig, link: &LinkDraw) -> Result<(Receiver, Vec<f64>)> {
    let m = link.m;
    if m < cfg.m_min() || m > cfg.m_max {
        return Err(Error::Argument(format!(
            "model supports {}..={} antennas, got {m}",
            cfg.m_min(),
            cfg.m_max
        )));
    }
    let ch = &link.channel;
    if ch.m() != m || link.noise.shape() != (m, cfg.k) {
        return Err(Error::Dimension(format!(
            "link draw for {m} antennas has a {:?} channel and {:?} noise",
            ch.h.shape(),
            link.noise.shape()
        )));
    }
    cfg.check_estimation_error(ch.sigma_e2)?;
    let (rx, mut p_n) = match cfg.mode {
        CsiMode::Csir => {
            let h_w = zf_matrix(&ch.h_est)?;
            let p_n = noise_power_csir(&h_w, ch.sigma_w2);
            (Receiver::Zf { h_w }, p_n)
        }
        CsiMode::Csit => {
            let f = complex_svd(&ch.h_est)?;
            let p_n = noise_power_csit(&f.s, ch.sigma_w2, SINGULAR_TOL, cfg.sentinel);
            let eq = svd_equalizer_matrix(&f, SINGULAR_TOL);
            (Receiver::Svd { v: f.v, eq }, p_n)
        }
    };
    p_n.resize(cfg.m_max, cfg.sentinel);
    for v in &mut p_n {
        *v = v.min(cfg.sentinel);
    }
    Ok((rx, p_n))
}

fn complex_left(g: &mut Graph, a: &ComplexMatrix, x: Var) -> Result<Var> {
    let (rows, inner) = a.shape();
    Ok(g.complex_matmul(&a.re_parts(), &a.im_parts(), rows, inner, x)?)
}

/// Rows `0..m` of a packed block, then zero rows up to `rows`.
fn pad_rows(g: &mut Graph, x: Var, rows: usize) -> Result<Var> {
    let (m, cols) = g.shape(x);
    if m == rows {
        return Ok(x);
    }
    let idx = (0..rows * cols)
        .map(|i| if i / cols < m { i } else { ZERO_INDEX })
        .collect();
    Ok(g.gather(x, idx, rows, cols)?)
}

/// Graph nodes of one image's pass through the link.
pub struct Forward {
    /// Reconstructed patches, `l×c`, unclamped.
    pub recon: Var,
    pub loss: Var,
    /// Average transmitted power of the normalized block.
    pub power: f64,
    /// Packed `m×2k` transmitted block (before any precoding).
    pub x: Var,
    /// Packed `m_max×2k` equalized block handed to the decoder.
    pub x_prime: Var,
}

/// Encoder, power normalization, channel, equalization and decoder for one
/// image, recorded on `g`. `patches` is the `l×c` target.
pub fn forward_image(
    g: &mut Graph,
    s: &ParameterStore,
    cfg: &ModelConfig,
    patches: &[f64],
    link: &LinkDraw,
) -> Result<Forward> {
    let (l, k, mm, m) = (cfg.l(), cfg.k, cfg.m_max, link.m);
    let (rx, p_n) = prepare(cfg, link)?;
    let hm = build_heatmap(&p_n, l, k)?;
    let heatmap = g.constant(hm.rows, hm.cols, hm.values)?;
    let target = g.constant(l, cfg.c(), patches.to_vec())?;

    let enc_hm = (cfg.mode == CsiMode::Csit).then_some(heatmap);
    let z = encode(g, s, cfg, target, enc_hm)?;
    let z = g.reshape(z, mm, 2 * k)?;
    let z = if m < mm {
        g.gather(z, (0..m * 2 * k).collect(), m, 2 * k)?
    } else {
        z
    };
    let x = g.scale_to_norm(z, ((m * k) as f64).sqrt());
    let power = g.value(x).iter().map(|v| v * v).sum::<f64>() / (m * k) as f64;

    let ch = &link.channel;
    let tx = match &rx {
        Receiver::Svd { v, .. } => complex_left(g, v, x)?,
        Receiver::Zf { .. } => x,
    };
    let hx = complex_left(g, &ch.h, tx)?;
    let w = g.constant(m, 2 * k, to_packed(&link.noise))?;
    let y = g.add(hx, w)?;

    let xp = match &rx {
        Receiver::Zf { h_w } => {
            let zf = complex_left(g, h_w, y)?;
            let h_pad = ch.h_est.zero_padded(mm, mm);
            let comp = residual_compensation(g, s, cfg, &h_pad, y)?;
            g.add(zf, comp)?
        }
        Receiver::Svd { eq, .. } => complex_left(g, eq, y)?,
    };
    let x_prime = pad_rows(g, xp, mm)?;
    let xs = g.reshape(x_prime, l, cfg.cols())?;
    let recon = decode(g, s, cfg, xs, heatmap)?;
    let loss = g.mse(recon, target)?;
    Ok(Forward {
        recon,
        loss,
        power,
        x,
        x_prime,
    })
}

/// Result of sending one image at evaluation time.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    /// Decoder output clamped to `[0, 1]`.
    pub image: Image,
    pub power: f64,
    /// Transmitted block before precoding.
    pub x: SymbolBlock,
    /// Equalized block, `m_max×k`.
    pub x_prime: ComplexMatrix,
}

pub fn reconstruct(
    s: &ParameterStore,
    cfg: &ModelConfig,
    img: &Image,
    link: &LinkDraw,
) -> Result<Reconstruction> {
    if (img.h, img.w) != (cfg.image_h, cfg.image_w) {
        return Err(Error::Dimension(format!(
            "model expects {}x{} images, got {}x{}",
            cfg.image_h, cfg.image_w, img.h, img.w
        )));
    }
    let patches = patchify(img, cfg.p)?;
    let mut g = Graph::new();
    let f = forward_image(&mut g, s, cfg, &patches, link)?;
    let out = unpatchify(g.value(f.recon), cfg.p, cfg.image_h, cfg.image_w)?;
    if !out.data.iter().all(|v| v.is_finite()) {
        return Err(Error::Numeric("decoder produced non-finite output".into()));
    }
    Ok(Reconstruction {
        image: out.clamped(),
        power: f.power,
        x: SymbolBlock {
            x: from_packed(g.value(f.x), link.m, cfg.k)?,
        },
        x_prime: from_packed(g.value(f.x_prime), cfg.m_max, cfg.k)?,
    })
}
