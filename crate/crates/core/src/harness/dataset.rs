use std::path::{Path, PathBuf};

use image::imageops::FilterType;
use image::RgbImage;

use crate::error::{Error, Result};
use crate::jscc::Image;
use crate::linalg::{splitmix64, RngStream};

/// Stream id for synthetic image generation.
pub const DATA_STREAM: u64 = 4;

const EXTENSIONS: [&str; 4] = ["png", "ppm", "pnm", "pgm"];
const SPLIT_SALT: u64 = 0x5eed_da7a;

fn to_image(rgb: &RgbImage) -> Result<Image> {
    let (w, h) = rgb.dimensions();
    let data = rgb.as_raw().iter().map(|&v| v as f64 / 255.0).collect();
    Image::new(h as usize, w as usize, data)
}

/// Decodes a PNG or PNM file to RGB in `[0, 1]`.
pub fn read_image(path: &Path) -> Result<Image> {
    let img = image::open(path)
        .map_err(|e| Error::Dataset(format!("cannot decode {}: {e}", path.display())))?;
    to_image(&img.to_rgb8())
}

/// Writes `img` as 8-bit RGB; the format follows the file extension.
pub fn write_image(img: &Image, path: &Path) -> Result<()> {
    let raw: Vec<u8> = img
        .data
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let buf = RgbImage::from_raw(img.w as u32, img.h as u32, raw)
        .ok_or_else(|| Error::Dimension(format!("{}x{} image buffer", img.h, img.w)))?;
    buf.save(path)
        .map_err(|e| Error::Dataset(format!("cannot write {}: {e}", path.display())))
}

/// Centre-crops to the `h:w` aspect ratio, then resizes to `h×w`.
fn fit(rgb: &RgbImage, h: usize, w: usize) -> RgbImage {
    let (sw, sh) = rgb.dimensions();
    let (sw64, sh64) = (sw as u64, sh as u64);
    let (cw, ch) = if sw64 * h as u64 > sh64 * w as u64 {
        (((sh64 * w as u64) / h as u64).max(1) as u32, sh)
    } else {
        (sw, ((sw64 * h as u64) / w as u64).max(1) as u32)
    };
    let cropped = image::imageops::crop_imm(rgb, (sw - cw) / 2, (sh - ch) / 2, cw, ch).to_image();
    if (cw, ch) == (w as u32, h as u32) {
        cropped
    } else {
        image::imageops::resize(&cropped, w as u32, h as u32, FilterType::Triangle)
    }
}

/// Image files directly inside `dir`, sorted by name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| Error::Dataset(format!("cannot read {}: {e}", dir.display())))?;
    let mut paths = Vec::new();
    for entry in entries {
        let p = entry?.path();
        let ext = p
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        if p.is_file() && ext.is_some_and(|e| EXTENSIONS.contains(&e.as_str())) {
            paths.push(p);
        }
    }
    paths.sort();
    Ok(paths)
}

/// Loads every image in `dir`, centre-cropped and resized to `h×w`.
pub fn load_images(dir: &Path, h: usize, w: usize) -> Result<Vec<Image>> {
    if h == 0 || w == 0 {
        return Err(Error::Argument(format!("target size {h}x{w}")));
    }
    let paths = list_images(dir)?;
    if paths.is_empty() {
        return Err(Error::Dataset(format!("no images in {}", dir.display())));
    }
    paths
        .iter()
        .map(|p| {
            let img = image::open(p)
                .map_err(|e| Error::Dataset(format!("cannot decode {}: {e}", p.display())))?;
            to_image(&fit(&img.to_rgb8(), h, w))
        })
        .collect()
}

fn colour(rng: &mut RngStream) -> [f64; 3] {
    [rng.uniform(), rng.uniform(), rng.uniform()]
}

/// Image `index` of a deterministic synthetic set: smooth random fields,
/// linear gradients, stripes and checkerboards, and colour blobs.
pub fn synth_image(seed: u64, index: usize, h: usize, w: usize) -> Image {
    let mut rng = RngStream::new(seed, DATA_STREAM).derive(index as u64);
    let (hf, wf) = (h as f64, w as f64);
    let kind = rng.below(4);
    let mut data = vec![0.0; h * w * 3];
    let mut put = |f: &dyn Fn(f64, f64, usize) -> f64| {
        for y in 0..h {
            for x in 0..w {
                for c in 0..3 {
                    data[(y * w + x) * 3 + c] = f(y as f64 / hf, x as f64 / wf, c).clamp(0.0, 1.0);
                }
            }
        }
    };
    match kind {
        0 => {
            let base = colour(&mut rng);
            let waves: Vec<[f64; 6]> = (0..9)
                .map(|_| {
                    [
                        0.3 + 1.7 * rng.uniform(),
                        0.3 + 1.7 * rng.uniform(),
                        std::f64::consts::TAU * rng.uniform(),
                        0.1 + 0.15 * rng.uniform(),
                        if rng.uniform() < 0.5 { 1.0 } else { -1.0 },
                        if rng.uniform() < 0.5 { 1.0 } else { -1.0 },
                    ]
                })
                .collect();
            put(&|y, x, c| {
                let tau = std::f64::consts::TAU;
                base[c]
                    + waves[3 * c..3 * c + 3]
                        .iter()
                        .map(|w| w[3] * (tau * (w[0] * w[4] * y + w[1] * w[5] * x) + w[2]).sin())
                        .sum::<f64>()
            });
        }
        1 => {
            let (a, b) = (colour(&mut rng), colour(&mut rng));
            let theta = std::f64::consts::TAU * rng.uniform();
            let (dy, dx) = theta.sin_cos();
            put(&|y, x, c| {
                let t = 0.5 + (y - 0.5) * dy + (x - 0.5) * dx;
                a[c] + (b[c] - a[c]) * t.clamp(0.0, 1.0)
            });
        }
        2 => {
            let (a, b) = (colour(&mut rng), colour(&mut rng));
            let period = [2.0, 4.0, 8.0][rng.below(3)];
            let checker = rng.uniform() < 0.5;
            put(&|y, x, c| {
                let (cy, cx) = ((y * hf / period).floor() as i64, (x * wf / period).floor() as i64);
                let on = if checker { (cy + cx) % 2 == 0 } else { cx % 2 == 0 };
                if on {
                    a[c]
                } else {
                    b[c]
                }
            });
        }
        _ => {
            let bg = colour(&mut rng);
            let blobs: Vec<([f64; 3], f64, f64, f64)> = (0..3)
                .map(|_| (colour(&mut rng), rng.uniform(), rng.uniform(), 0.1 + 0.25 * rng.uniform()))
                .collect();
            put(&|y, x, c| {
                blobs.iter().fold(bg[c], |v, (col, by, bx, r)| {
                    let d2 = (y - by).powi(2) + (x - bx).powi(2);
                    let a = (-d2 / (2.0 * r * r)).exp();
                    v * (1.0 - a) + col[c] * a
                })
            });
        }
    }
    Image { h, w, data }
}

pub fn synth_dataset(n: usize, h: usize, w: usize, seed: u64) -> Vec<Image> {
    (0..n).map(|i| synth_image(seed, i, h, w)).collect()
}

/// Whether item `index` belongs to the validation split (about one in ten).
pub fn is_validation(index: usize) -> bool {
    splitmix64(index as u64 ^ SPLIT_SALT) % 10 == 0
}

/// Splits by index into `(train, validation)`.
pub fn split(images: Vec<Image>) -> (Vec<Image>, Vec<Image>) {
    let mut train = Vec::new();
    let mut val = Vec::new();
    for (i, img) in images.into_iter().enumerate() {
        if is_validation(i) {
            val.push(img);
        } else {
            train.push(img);
        }
    }
    (train, val)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_is_deterministic_and_in_range() {
        let a = synth_dataset(12, 8, 8, 3);
        assert_eq!(a, synth_dataset(12, 8, 8, 3));
        assert_ne!(a, synth_dataset(12, 8, 8, 4));
        for img in &a {
            assert!(img.data.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn split_is_about_a_tenth() {
        let n = 2000;
        let val = (0..n).filter(|&i| is_validation(i)).count();
        assert!((150..=250).contains(&val), "{val}");
    }

    #[test]
    fn round_trip_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let img = synth_image(0, 1, 8, 12);
        write_image(&img, &dir.path().join("b.png")).unwrap();
        write_image(&img, &dir.path().join("a.ppm")).unwrap();
        std::fs::write(dir.path().join("notes.txt"), "x").unwrap();
        let names: Vec<_> = list_images(dir.path())
            .unwrap()
            .iter()
            .map(|p| p.file_name().unwrap().to_owned())
            .collect();
        assert_eq!(names, ["a.ppm", "b.png"]);
        let loaded = load_images(dir.path(), 8, 12).unwrap();
        for l in &loaded {
            for (a, b) in l.data.iter().zip(&img.data) {
                assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
            }
        }
        let small = load_images(dir.path(), 4, 4).unwrap();
        assert_eq!((small[0].h, small[0].w), (4, 4));
    }

    #[test]
    fn empty_directory_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_images(dir.path(), 8, 8), Err(Error::Dataset(_))));
    }
}
