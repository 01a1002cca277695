use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jscc::{mse_loss, Image};

/// PSNR reported for a perfect reconstruction.
pub const PSNR_CAP_DB: f64 = 100.0;

/// Peak value used in the PSNR numerator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsnrPeak {
    /// Images live in `[0, 1]`, so the peak is 1.
    #[default]
    Fixed,
    /// Largest absolute value of the reference image.
    PerImage,
}

impl PsnrPeak {
    pub fn peak(self, reference: &Image) -> f64 {
        match self {
            PsnrPeak::Fixed => 1.0,
            PsnrPeak::PerImage => reference.data.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }
}

/// `10·log10(peak²/MSE)`, capped at [`PSNR_CAP_DB`].
pub fn psnr(s: &Image, s_hat: &Image, peak: f64) -> Result<f64> {
    if !(peak > 0.0) {
        return Err(Error::Argument(format!("PSNR peak {peak} must be positive")));
    }
    let mse = mse_loss(s, s_hat)?;
    Ok(psnr_from_mse(mse, peak))
}

pub fn psnr_from_mse(mse: f64, peak: f64) -> f64 {
    if mse <= 0.0 {
        return PSNR_CAP_DB;
    }
    (10.0 * (peak * peak / mse).log10()).min(PSNR_CAP_DB)
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}
