//! Separation-based reference: channel capacity turned into a bit budget
//! and spent on an image codec's rate-distortion curve.

use std::path::{Path, PathBuf};
use std::process::Command;

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::frontend::{capacity_closed_loop, capacity_open_loop, CsiMode};
use crate::harness::metrics::psnr;
use crate::jscc::Image;
use crate::linalg::complex_svd;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RdPoint {
    pub bpp: f64,
    pub psnr_db: f64,
}

pub trait Codec: Sync {
    fn name(&self) -> String;

    /// Operating points for `img`, sorted by strictly increasing bpp with
    /// non-decreasing PSNR.
    fn rd_curve(&self, img: &Image) -> Result<Vec<RdPoint>>;
}

/// Upper envelope of a point cloud: sorted by bpp, keeping only points that
/// improve on every cheaper point.
pub fn pareto_front(mut points: Vec<RdPoint>) -> Vec<RdPoint> {
    points.sort_by(|a, b| a.bpp.total_cmp(&b.bpp).then(b.psnr_db.total_cmp(&a.psnr_db)));
    let mut out: Vec<RdPoint> = Vec::with_capacity(points.len());
    for p in points {
        match out.last() {
            Some(last) if p.bpp <= last.bpp || p.psnr_db <= last.psnr_db => {}
            _ => out.push(p),
        }
    }
    out
}

const BLOCK: usize = 8;
const DC_RANGE: f64 = 4.0;
const AC_RANGE: f64 = 2.0;

/// Zigzag scan of an 8×8 block as `(row, col)`.
fn zigzag() -> Vec<(usize, usize)> {
    let mut order = Vec::with_capacity(BLOCK * BLOCK);
    for s in 0..2 * BLOCK - 1 {
        let lo = s.saturating_sub(BLOCK - 1);
        let hi = s.min(BLOCK - 1);
        if s % 2 == 1 {
            (lo..=hi).for_each(|r| order.push((r, s - r)));
        } else {
            (lo..=hi).rev().for_each(|r| order.push((r, s - r)));
        }
    }
    order
}

/// Orthonormal DCT-II basis, `basis[u][x]`.
fn dct_basis() -> [[f64; BLOCK]; BLOCK] {
    let mut b = [[0.0; BLOCK]; BLOCK];
    for (u, row) in b.iter_mut().enumerate() {
        let scale = if u == 0 { (1.0 / BLOCK as f64).sqrt() } else { (2.0 / BLOCK as f64).sqrt() };
        for (x, v) in row.iter_mut().enumerate() {
            *v = scale * (std::f64::consts::PI * (2 * x + 1) as f64 * u as f64 / (2 * BLOCK) as f64).cos();
        }
    }
    b
}

/// Mid-tread uniform quantizer on `[-range, range]` with `2^bits − 1` levels,
/// so zero is reproduced exactly.
fn quantize(v: f64, range: f64, bits: u32) -> f64 {
    let steps = ((1u64 << bits) - 2) as f64;
    let step = 2.0 * range / steps;
    let idx = ((v.clamp(-range, range) + range) / step).round();
    idx * step - range
}

/// Stand-in image codec: 8×8 block DCT per channel, the first `m` zigzag
/// coefficients kept and quantized to `b` bits each at a fixed length.
#[derive(Clone, Debug)]
pub struct ToyDctCodec {
    /// `(coefficients kept, bits per coefficient)` rungs.
    pub ladder: Vec<(usize, u32)>,
}

impl Default for ToyDctCodec {
    fn default() -> Self {
        let mut ladder = Vec::new();
        for m in [1, 2, 4, 8, 16, 32, 64] {
            for b in [2, 4, 8] {
                ladder.push((m, b));
            }
        }
        Self { ladder }
    }
}

impl ToyDctCodec {
    pub fn bpp(m: usize, b: u32) -> f64 {
        3.0 * (m as f64) * (b as f64) / (BLOCK * BLOCK) as f64
    }

    /// Encodes and decodes `img` at one rung.
    pub fn reconstruct(&self, img: &Image, m: usize, b: u32) -> Result<Image> {
        if img.h % BLOCK != 0 || img.w % BLOCK != 0 || img.h == 0 || img.w == 0 {
            return Err(Error::Dimension(format!(
                "codec needs dimensions that are multiples of {BLOCK}, got {}x{}",
                img.h, img.w
            )));
        }
        if m == 0 || m > BLOCK * BLOCK || !(2..=16).contains(&b) {
            return Err(Error::Argument(format!("invalid rung m={m}, b={b}")));
        }
        let basis = dct_basis();
        let zz = zigzag();
        let mut out = vec![0.0; img.data.len()];
        for by in (0..img.h).step_by(BLOCK) {
            for bx in (0..img.w).step_by(BLOCK) {
                for ch in 0..3 {
                    let px = |y: usize, x: usize| img.get(by + y, bx + x, ch) - 0.5;
                    let mut coef = [[0.0; BLOCK]; BLOCK];
                    for (u, cu) in coef.iter_mut().enumerate() {
                        for (v, c) in cu.iter_mut().enumerate() {
                            let mut acc = 0.0;
                            for y in 0..BLOCK {
                                for x in 0..BLOCK {
                                    acc += basis[u][y] * basis[v][x] * px(y, x);
                                }
                            }
                            *c = acc;
                        }
                    }
                    let mut kept = [[0.0; BLOCK]; BLOCK];
                    for (i, &(u, v)) in zz.iter().take(m).enumerate() {
                        let range = if i == 0 { DC_RANGE } else { AC_RANGE };
                        kept[u][v] = quantize(coef[u][v], range, b);
                    }
                    for y in 0..BLOCK {
                        for x in 0..BLOCK {
                            let mut acc = 0.0;
                            for (u, ku) in kept.iter().enumerate() {
                                for (v, &k) in ku.iter().enumerate() {
                                    acc += basis[u][y] * basis[v][x] * k;
                                }
                            }
                            out[((by + y) * img.w + bx + x) * 3 + ch] = (acc + 0.5).clamp(0.0, 1.0);
                        }
                    }
                }
            }
        }
        Image::new(img.h, img.w, out)
    }
}

impl Codec for ToyDctCodec {
    fn name(&self) -> String {
        "toy-dct".into()
    }

    fn rd_curve(&self, img: &Image) -> Result<Vec<RdPoint>> {
        let mut points = Vec::with_capacity(self.ladder.len());
        for &(m, b) in &self.ladder {
            let rec = self.reconstruct(img, m, b)?;
            points.push(RdPoint {
                bpp: Self::bpp(m, b),
                psnr_db: psnr(img, &rec, 1.0)?,
            });
        }
        Ok(pareto_front(points))
    }
}

/// Runs a user-supplied compressor per quality setting.
///
/// `encode` receives `{input}` (a binary PPM), `{output}` and `{quality}`;
/// `decode` receives `{input}` (the compressed file) and `{output}`, and must
/// write a PNG or PPM image there. Commands run through `sh -c`. The
/// compressed file size on disk defines the rate.
#[derive(Clone, Debug)]
pub struct ExternalCodec {
    pub encode: String,
    pub decode: String,
    pub qualities: Vec<String>,
    /// Extension of the decoded file (`png` or `ppm`).
    pub decoded_ext: String,
}

fn run_shell(cmd: &str) -> Result<()> {
    let status = Command::new("sh")
        .arg("-c")
        .arg(cmd)
        .status()
        .map_err(|e| Error::Codec(format!("cannot run {cmd:?}: {e}")))?;
    if !status.success() {
        return Err(Error::Codec(format!("{cmd:?} exited with {status}")));
    }
    Ok(())
}

fn shell_quote(p: &Path) -> String {
    format!("'{}'", p.display().to_string().replace('\'', r"'\''"))
}

impl ExternalCodec {
    fn fill(template: &str, input: &Path, output: &Path, quality: &str) -> String {
        template
            .replace("{input}", &shell_quote(input))
            .replace("{output}", &shell_quote(output))
            .replace("{quality}", quality)
    }

    fn point(&self, img: &Image, dir: &Path, src: &Path, q: &str) -> Result<RdPoint> {
        let packed: PathBuf = dir.join(format!("q{q}.bin"));
        let decoded: PathBuf = dir.join(format!("q{q}.{}", self.decoded_ext));
        run_shell(&Self::fill(&self.encode, src, &packed, q))?;
        let bytes = std::fs::metadata(&packed)
            .map_err(|e| Error::Codec(format!("encoder produced no output at {}: {e}", packed.display())))?
            .len();
        run_shell(&Self::fill(&self.decode, &packed, &decoded, q))?;
        let rec = crate::harness::dataset::read_image(&decoded)?;
        if (rec.h, rec.w) != (img.h, img.w) {
            return Err(Error::Codec(format!(
                "decoder returned {}x{} for a {}x{} image",
                rec.h, rec.w, img.h, img.w
            )));
        }
        Ok(RdPoint {
            bpp: 8.0 * bytes as f64 / (img.h * img.w) as f64,
            psnr_db: psnr(img, &rec, 1.0)?,
        })
    }
}

impl Codec for ExternalCodec {
    fn name(&self) -> String {
        "external".into()
    }

    fn rd_curve(&self, img: &Image) -> Result<Vec<RdPoint>> {
        let dir = tempfile::tempdir()?;
        let src = dir.path().join("input.ppm");
        crate::harness::dataset::write_image(img, &src)?;
        let points = self
            .qualities
            .iter()
            .map(|q| self.point(img, dir.path(), &src, q))
            .collect::<Result<Vec<_>>>()?;
        if points.is_empty() {
            return Err(Error::Codec("external codec has no quality settings".into()));
        }
        Ok(pareto_front(points))
    }
}

/// Union of several codecs' operating points.
pub struct CombinedCodec(pub Vec<Box<dyn Codec>>);

impl Codec for CombinedCodec {
    fn name(&self) -> String {
        self.0.iter().map(|c| c.name()).collect::<Vec<_>>().join("+")
    }

    fn rd_curve(&self, img: &Image) -> Result<Vec<RdPoint>> {
        let mut all = Vec::new();
        for c in &self.0 {
            all.extend(c.rd_curve(img)?);
        }
        Ok(pareto_front(all))
    }
}

/// PSNR of reconstructing `img` by its per-channel mean colour.
pub fn floor_psnr(img: &Image) -> Result<f64> {
    let n = (img.h * img.w) as f64;
    let mut mean = [0.0; 3];
    for (i, v) in img.data.iter().enumerate() {
        mean[i % 3] += v / n;
    }
    let flat = Image::new(img.h, img.w, (0..img.data.len()).map(|i| mean[i % 3]).collect())?;
    psnr(img, &flat, 1.0)
}

/// Capacity in bits per channel use: equal power without CSIT, water-filling
/// with total power `M` under CSIT.
pub fn link_capacity(ch: &ChannelRealization, mode: CsiMode) -> Result<f64> {
    match mode {
        CsiMode::Csir => capacity_open_loop(&ch.h, ch.sigma_w2),
        CsiMode::Csit => {
            let s = complex_svd(&ch.h)?.s;
            if s.iter().all(|&x| x == 0.0) {
                return Ok(0.0);
            }
            capacity_closed_loop(&s, ch.sigma_w2, ch.m() as f64)
        }
    }
}

/// Best PSNR on `curve` affordable with `k·capacity` bits over an `h×w`
/// image, or `floor` when nothing fits.
pub fn bound_from_curve(curve: &[RdPoint], floor: f64, capacity: f64, k: usize, h: usize, w: usize) -> f64 {
    let budget = k as f64 * capacity / (h * w) as f64;
    curve
        .iter()
        .filter(|p| p.bpp <= budget)
        .map(|p| p.psnr_db)
        .fold(floor, f64::max)
}

/// Separation bound for one image and channel draw at bandwidth ratio `r`.
pub fn separation_bound_psnr(
    img: &Image,
    ch: &ChannelRealization,
    r: f64,
    mode: CsiMode,
    codec: &dyn Codec,
) -> Result<f64> {
    let k = crate::jscc::channel_uses(r, img.h, img.w)?;
    let curve = codec.rd_curve(img)?;
    let c = link_capacity(ch, mode)?;
    Ok(bound_from_curve(&curve, floor_psnr(img)?, c, k, img.h, img.w))
}
