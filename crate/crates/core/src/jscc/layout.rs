use crate::channel::SymbolBlock;
use crate::error::{Error, Result};
use crate::frontend::packed_index;
use crate::linalg::{Complex64, ComplexMatrix};

/// An RGB image with values nominally in `[0, 1]`, stored row-major with
/// interleaved channels (`h × w × 3`).
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(h: usize, w: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != h * w * 3 {
            return Err(Error::Dimension(format!(
                "{h}x{w}x3 image from {} values",
                data.len()
            )));
        }
        Ok(Self { h, w, data })
    }

    pub fn filled(h: usize, w: usize, value: f64) -> Self {
        Self {
            h,
            w,
            data: vec![value; h * w * 3],
        }
    }

    pub fn get(&self, y: usize, x: usize, ch: usize) -> f64 {
        self.data[(y * self.w + x) * 3 + ch]
    }

    pub fn clamped(&self) -> Image {
        Image {
            h: self.h,
            w: self.w,
            data: self.data.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        }
    }
}

fn check_grid(p: usize, h: usize, w: usize) -> Result<()> {
    if p == 0 || h % p != 0 || w % p != 0 {
        return Err(Error::Dimension(format!(
            "patch grid {p} does not divide {h}x{w}"
        )));
    }
    Ok(())
}

/// Splits the image into a `p×p` grid and flattens each patch row-major
/// (row, column, channel); tokens are ordered row-major over the grid.
/// Returns an `l×c` matrix as a flat row-major vector.
pub fn patchify(img: &Image, p: usize) -> Result<Vec<f64>> {
    check_grid(p, img.h, img.w)?;
    let (ph, pw) = (img.h / p, img.w / p);
    let mut out = Vec::with_capacity(img.data.len());
    for gi in 0..p {
        for gj in 0..p {
            for r in 0..ph {
                let start = ((gi * ph + r) * img.w + gj * pw) * 3;
                out.extend_from_slice(&img.data[start..start + pw * 3]);
            }
        }
    }
    Ok(out)
}

/// Inverse of [`patchify`].
pub fn unpatchify(seq: &[f64], p: usize, h: usize, w: usize) -> Result<Image> {
    check_grid(p, h, w)?;
    if seq.len() != h * w * 3 {
        return Err(Error::Dimension(format!(
            "{} sequence values for a {h}x{w}x3 image",
            seq.len()
        )));
    }
    let (ph, pw) = (h / p, w / p);
    let mut data = vec![0.0; h * w * 3];
    let mut src = 0;
    for gi in 0..p {
        for gj in 0..p {
            for r in 0..ph {
                let start = ((gi * ph + r) * w + gj * pw) * 3;
                data[start..start + pw * 3].copy_from_slice(&seq[src..src + pw * 3]);
                src += pw * 3;
            }
        }
    }
    Image::new(h, w, data)
}

/// Real layout of an `m×k` complex matrix: per row, `k` real parts then `k`
/// imaginary parts.
pub fn to_packed(x: &ComplexMatrix) -> Vec<f64> {
    let (m, k) = x.shape();
    let mut out = vec![0.0; 2 * m * k];
    for i in 0..m {
        for j in 0..k {
            let z = x[(i, j)];
            out[packed_index(i, j, false, k)] = z.re;
            out[packed_index(i, j, true, k)] = z.im;
        }
    }
    out
}

/// Inverse of [`to_packed`].
pub fn from_packed(z: &[f64], m: usize, k: usize) -> Result<ComplexMatrix> {
    if z.len() != 2 * m * k {
        return Err(Error::Dimension(format!(
            "{} packed values for a {m}x{k} symbol block",
            z.len()
        )));
    }
    Ok(ComplexMatrix::from_fn(m, k, |i, j| {
        Complex64::new(z[packed_index(i, j, false, k)], z[packed_index(i, j, true, k)])
    }))
}

/// Reads a row-major `l×(2mk/l)` real matrix as an `m×k` symbol block.
pub fn pack_symbols(z: &[f64], m: usize, k: usize) -> Result<SymbolBlock> {
    Ok(SymbolBlock {
        x: from_packed(z, m, k)?,
    })
}

/// Inverse of [`pack_symbols`]; reshape the result to `l` rows as needed.
pub fn unpack_symbols(x: &SymbolBlock) -> Vec<f64> {
    to_packed(&x.x)
}

/// Packs `z` and scales it to unit average power per antenna per use.
/// A zero input maps to a zero block.
pub fn power_normalize(z: &[f64], m: usize, k: usize) -> Result<SymbolBlock> {
    let mut block = pack_symbols(z, m, k)?;
    let norm = block.x.frobenius_norm_sq().sqrt();
    if norm > 0.0 {
        block.x = block.x.scale_real(((m * k) as f64).sqrt() / norm);
    }
    Ok(block)
}

/// Mean squared error over every pixel and channel.
pub fn mse_loss(s: &Image, s_hat: &Image) -> Result<f64> {
    if (s.h, s.w) != (s_hat.h, s_hat.w) {
        return Err(Error::Dimension(format!(
            "{}x{} vs {}x{}",
            s.h, s.w, s_hat.h, s_hat.w
        )));
    }
    let sum: f64 = s
        .data
        .iter()
        .zip(&s_hat.data)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / s.data.len() as f64)
}
