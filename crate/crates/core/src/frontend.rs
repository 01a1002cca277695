//! Linear MIMO front-ends, their per-stream noise powers, the noise heatmap
//! handed to the decoder, and capacity references.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{complex_svd, pseudo_inverse_diag, ComplexMatrix, SvdFactors};

/// Zero-forcing refuses channels at or beyond this condition number.
pub const MAX_CONDITION: f64 = 1e12;
/// Relative singular-value threshold below which a stream counts as dead.
pub const SINGULAR_TOL: f64 = 1e-12;
/// Default noise power reported for dead streams.
pub const DEFAULT_SENTINEL: f64 = 1e3;

const WATER_FILL_ITERS: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CsiMode {
    /// Channel known at the receiver only; zero-forcing equalization.
    Csir,
    /// Channel known at both ends; SVD precoding and per-stream scaling.
    Csit,
}

impl CsiMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CsiMode::Csir => "csir",
            CsiMode::Csit => "csit",
        }
    }
}

impl std::fmt::Display for CsiMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for CsiMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csir" => Ok(CsiMode::Csir),
            "csit" => Ok(CsiMode::Csit),
            other => Err(Error::Argument(format!("unknown CSI mode {other:?}"))),
        }
    }
}

/// Position of symbol `(antenna, symbol)` (real or imaginary part) in the
/// flattened `M×2k` real layout shared by symbol packing and the heatmap:
/// row `antenna` holds the `k` real parts followed by the `k` imaginary parts.
pub fn packed_index(antenna: usize, symbol: usize, imag: bool, k: usize) -> usize {
    antenna * 2 * k + if imag { k } else { 0 } + symbol
}

/// Per-symbol noise map reshaped to the decoder's `l × (2Mk/l)` grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Heatmap {
    pub rows: usize,
    pub cols: usize,
    /// Row-major values.
    pub values: Vec<f64>,
}

impl Heatmap {
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }
}

/// Spreads `p_n[i]` over the real and imaginary slots of every symbol sent
/// on stream `i`, each slot carrying `p_n[i]/2`, then reshapes to `l` rows.
pub fn build_heatmap(p_n: &[f64], l: usize, k: usize) -> Result<Heatmap> {
    let m = p_n.len();
    let total = 2 * m * k;
    if l == 0 || total % l != 0 {
        return Err(Error::Dimension(format!(
            "2·M·k = {total} is not divisible by {l} tokens"
        )));
    }
    let mut values = vec![0.0; total];
    for (i, &p) in p_n.iter().enumerate() {
        for j in 0..k {
            values[packed_index(i, j, false, k)] = 0.5 * p;
            values[packed_index(i, j, true, k)] = 0.5 * p;
        }
    }
    Ok(Heatmap {
        rows: l,
        cols: total / l,
        values,
    })
}

/// SVD of `h` with its condition number checked against [`MAX_CONDITION`].
pub fn checked_svd(h: &ComplexMatrix) -> Result<SvdFactors> {
    let f = complex_svd(h)?;
    let condition = f.condition_number();
    if !(condition < MAX_CONDITION) {
        return Err(Error::IllConditioned { condition });
    }
    Ok(f)
}

/// `V·diag(d)·Uᴴ`.
fn v_diag_uh(f: &SvdFactors, d: &[f64]) -> Result<ComplexMatrix> {
    f.v.scale_cols(d)?.matmul(&f.u.adjoint())
}

/// Zero-forcing equalizer `H⁻¹`, computed as `V·Σ⁻¹·Uᴴ`.
pub fn zf_matrix(h: &ComplexMatrix) -> Result<ComplexMatrix> {
    let f = checked_svd(h)?;
    let inv: Vec<f64> = f.s.iter().map(|s| 1.0 / s).collect();
    v_diag_uh(&f, &inv)
}

/// Linear MMSE equalizer `Hᴴ(HHᴴ + σ²I)⁻¹ = V·diag(s/(s²+σ²))·Uᴴ`.
pub fn mmse_matrix(h: &ComplexMatrix, sigma2: f64) -> Result<ComplexMatrix> {
    if !(sigma2 >= 0.0) {
        return Err(Error::Argument(format!("noise variance {sigma2} < 0")));
    }
    let f = complex_svd(h)?;
    let d: Vec<f64> = f
        .s
        .iter()
        .map(|&s| {
            let den = s * s + sigma2;
            if den > 0.0 {
                s / den
            } else {
                0.0
            }
        })
        .collect();
    v_diag_uh(&f, &d)
}

/// `V·X`.
pub fn svd_precode(x: &ComplexMatrix, v: &ComplexMatrix) -> Result<ComplexMatrix> {
    v.matmul(x)
}

/// `Σ†·Uᴴ`, the receive-side operator of the SVD scheme.
pub fn svd_equalizer_matrix(f: &SvdFactors, tol: f64) -> ComplexMatrix {
    let inv = pseudo_inverse_diag(&f.s, tol);
    f.u.adjoint().scale_rows(&inv).expect("matching sizes")
}

/// `Σ†·Uᴴ·Y`.
pub fn svd_equalize(y: &ComplexMatrix, f: &SvdFactors, tol: f64) -> Result<ComplexMatrix> {
    svd_equalizer_matrix(f, tol).matmul(y)
}

/// Post-equalization noise power per stream, `σ²·Σ_j |H_w[i,j]|²`.
pub fn noise_power_csir(h_w: &ComplexMatrix, sigma2: f64) -> Vec<f64> {
    (0..h_w.rows())
        .map(|i| {
            let row: f64 = (0..h_w.cols()).map(|j| h_w[(i, j)].norm_sqr()).sum();
            sigma2 * row
        })
        .collect()
}

/// Per-stream noise power `σ²/s_i²`, or `sentinel` for streams whose singular
/// value is below `tol·max(s)`.
pub fn noise_power_csit(s: &[f64], sigma2: f64, tol: f64, sentinel: f64) -> Vec<f64> {
    let inv = pseudo_inverse_diag(s, tol);
    inv.iter()
        .map(|&r| if r == 0.0 { sentinel } else { sigma2 * r * r })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PowerAllocation {
    pub p: Vec<f64>,
    pub water_level: f64,
}

/// Capacity-optimal power split over parallel channels with gains `s_i²/σ²`:
/// `p_i = max(0, μ − σ²/s_i²)` with `Σ p_i = p_total`, μ found by bisection.
pub fn water_filling(s: &[f64], sigma2: f64, p_total: f64) -> Result<PowerAllocation> {
    if !(p_total > 0.0) || !p_total.is_finite() {
        return Err(Error::Argument(format!("power budget {p_total} must be positive")));
    }
    if !(sigma2 >= 0.0) || !sigma2.is_finite() {
        return Err(Error::Argument(format!("noise variance {sigma2} < 0")));
    }
    let inv_gain: Vec<Option<f64>> = s
        .iter()
        .map(|&x| (x > 0.0).then(|| sigma2 / (x * x)))
        .collect();
    let floors: Vec<f64> = inv_gain.iter().flatten().copied().collect();
    if floors.is_empty() {
        return Err(Error::Degenerate("all singular values are zero".into()));
    }
    let spent = |mu: f64| -> f64 { floors.iter().map(|&g| (mu - g).max(0.0)).sum() };

    let mut lo = floors.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = floors.iter().copied().fold(0.0, f64::max) + p_total;
    for _ in 0..WATER_FILL_ITERS {
        let mid = 0.5 * (lo + hi);
        if spent(mid) > p_total {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    let mu = 0.5 * (lo + hi);
    let p = inv_gain
        .iter()
        .map(|g| g.map_or(0.0, |g| (mu - g).max(0.0)))
        .collect();
    Ok(PowerAllocation { p, water_level: mu })
}

/// `Σ log2(1 + s_i²/σ²)`, equal unit power per stream.
pub fn capacity_open_loop(h: &ComplexMatrix, sigma2: f64) -> Result<f64> {
    let f = complex_svd(h)?;
    Ok(log_sum(&f.s, &vec![1.0; f.s.len()], sigma2))
}

/// `Σ log2(1 + p_i·s_i²/σ²)` under water-filling with budget `p_total`.
pub fn capacity_closed_loop(s: &[f64], sigma2: f64, p_total: f64) -> Result<f64> {
    let alloc = water_filling(s, sigma2, p_total)?;
    Ok(log_sum(s, &alloc.p, sigma2))
}

fn log_sum(s: &[f64], p: &[f64], sigma2: f64) -> f64 {
    s.iter()
        .zip(p)
        .map(|(&s, &p)| {
            let signal = p * s * s;
            if signal == 0.0 {
                0.0
            } else {
                (1.0 + signal / sigma2).log2()
            }
        })
        .sum()
}
