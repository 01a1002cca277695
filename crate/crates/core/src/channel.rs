//! Flat-fading MIMO link `Y = H·X + W` with optional imperfect CSI.

use crate::error::{Error, Result};
use crate::linalg::{sample_complex_gaussian, ComplexMatrix, RngStream};

/// Largest antenna count supported by the link simulator.
pub const MAX_ANTENNAS: usize = crate::linalg::MAX_SVD_DIM;

/// Noise variance for an SNR of `snr_db` with `m` antennas at unit
/// per-antenna transmit power: `σ_w² = m·10^(−snr/10)`.
pub fn snr_to_noise_variance(snr_db: f64, m: usize) -> f64 {
    m as f64 * 10f64.powf(-snr_db / 10.0)
}

/// Inverse of [`snr_to_noise_variance`].
pub fn noise_variance_to_snr(sigma_w2: f64, m: usize) -> f64 {
    10.0 * (m as f64 / sigma_w2).log10()
}

/// One channel draw. `h_est = h + E` with `E ~ CN(0, σ_e²)` i.i.d.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    pub h: ComplexMatrix,
    pub sigma_w2: f64,
    pub h_est: ComplexMatrix,
    pub sigma_e2: f64,
}

impl ChannelRealization {
    /// A fixed channel with perfect knowledge.
    pub fn known(h: ComplexMatrix, sigma_w2: f64) -> Self {
        Self {
            h_est: h.clone(),
            h,
            sigma_w2,
            sigma_e2: 0.0,
        }
    }

    pub fn m(&self) -> usize {
        self.h.rows()
    }
}

/// `M×k` complex symbols about to enter the channel.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolBlock {
    pub x: ComplexMatrix,
}

impl SymbolBlock {
    pub fn m(&self) -> usize {
        self.x.rows()
    }

    pub fn k(&self) -> usize {
        self.x.cols()
    }
}

fn check_variance(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0) || !v.is_finite() {
        return Err(Error::Argument(format!(
            "{name} must be finite and non-negative, got {v}"
        )));
    }
    Ok(())
}

/// Draws `H ~ CN(0,1)^{m×m}` then the estimation error.
///
/// The error matrix is always drawn, even for `σ_e² = 0`, so the same
/// stream yields the same `H` whatever the estimation-error level.
pub fn sample_channel(
    rng: &mut RngStream,
    m: usize,
    sigma_w2: f64,
    sigma_e2: f64,
) -> Result<ChannelRealization> {
    if m == 0 || m > MAX_ANTENNAS {
        return Err(Error::Argument(format!(
            "antenna count {m} outside 1..={MAX_ANTENNAS}"
        )));
    }
    check_variance("noise variance", sigma_w2)?;
    check_variance("estimation-error variance", sigma_e2)?;
    let h = sample_complex_gaussian(rng, m, m, 1.0)?;
    let e = sample_complex_gaussian(rng, m, m, sigma_e2)?;
    let h_est = if sigma_e2 == 0.0 { h.clone() } else { h.add(&e)? };
    Ok(ChannelRealization {
        h,
        sigma_w2,
        h_est,
        sigma_e2,
    })
}

/// `H·X + W` for a given noise matrix.
pub fn transmit_with_noise(
    x: &SymbolBlock,
    ch: &ChannelRealization,
    w: &ComplexMatrix,
) -> Result<ComplexMatrix> {
    if x.m() != ch.m() {
        return Err(Error::Dimension(format!(
            "{} transmit streams over a {}-antenna channel",
            x.m(),
            ch.m()
        )));
    }
    ch.h.matmul(&x.x)?.add(w)
}

/// `H·X + W` with fresh `W ~ CN(0, σ_w²)`.
pub fn transmit(rng: &mut RngStream, x: &SymbolBlock, ch: &ChannelRealization) -> Result<ComplexMatrix> {
    if x.m() != ch.m() {
        return Err(Error::Dimension(format!(
            "{} transmit streams over a {}-antenna channel",
            x.m(),
            ch.m()
        )));
    }
    let w = sample_complex_gaussian(rng, x.m(), x.k(), ch.sigma_w2)?;
    transmit_with_noise(x, ch, &w)
}

/// Average transmit power per antenna per channel use, `‖X‖²/(m·k)`.
pub fn verify_power(x: &SymbolBlock) -> f64 {
    let n = x.m() * x.k();
    if n == 0 {
        return 0.0;
    }
    x.x.frobenius_norm_sq() / n as f64
}
