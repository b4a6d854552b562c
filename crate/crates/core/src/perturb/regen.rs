//! Masked regeneration `(1−M)⊙x + M⊙fill` and synthetic region masks.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::mask::BinaryMask;
use crate::rng::Rng;
use crate::tensor::Tensor3;

const STREAM_FILL: u64 = 0x10;
const STREAM_MASK: u64 = 0x11;
pub const MOCK_BLUR: usize = 9;

/// Source of the content written under the mask.
#[derive(Debug, Clone, PartialEq)]
pub enum Fill {
    /// Seeded blurred noise matched to the unmasked statistics.
    Mock,
    /// An image file produced elsewhere (e.g. an inpainting model).
    External(PathBuf),
    /// An in-memory replacement image.
    Image(Tensor3),
}

pub fn masked_regenerate(img: &Tensor3, mask: &BinaryMask, fill: &Fill, seed: u64) -> Result<Tensor3> {
    let (c, h, w) = img.shape();
    if (mask.height(), mask.width()) != (h, w) {
        return Err(Error::Shape(format!(
            "mask {}×{} does not match image {h}×{w}",
            mask.height(),
            mask.width()
        )));
    }
    if mask.count() == 0 {
        return Ok(img.clone());
    }
    let content = match fill {
        Fill::Mock => mock_fill(img, mask, seed),
        Fill::External(path) => io::image_read(path)?,
        Fill::Image(t) => t.clone(),
    };
    if content.shape() != (c, h, w) {
        return Err(Error::Shape(format!(
            "fill {:?} does not match image {:?}",
            content.shape(),
            img.shape()
        )));
    }
    let mut out = img.clone();
    for ch in 0..c {
        let src = content.plane(ch);
        let dst = out.plane_mut(ch);
        for (i, &m) in mask.bits().iter().enumerate() {
            if m {
                dst[i] = src[i];
            }
        }
    }
    Ok(out)
}

/// Per-channel Gaussian noise with the unmasked mean and standard deviation,
/// box-blurred and rescaled back to that deviation.
///
/// With nothing unmasked the whole image supplies the statistics.
pub fn mock_fill(img: &Tensor3, mask: &BinaryMask, seed: u64) -> Tensor3 {
    let (c, h, w) = img.shape();
    let use_all = mask.count() == mask.bits().len();
    let mut rng = Rng::new(seed, STREAM_FILL);
    let mut out = Tensor3::zeros(c, h, w);
    for ch in 0..c {
        let plane = img.plane(ch);
        let (mut n, mut sum, mut sq) = (0usize, 0.0f64, 0.0f64);
        for (i, &v) in plane.iter().enumerate() {
            if use_all || !mask.bits()[i] {
                n += 1;
                sum += v as f64;
                sq += (v as f64) * (v as f64);
            }
        }
        let mean = sum / n as f64;
        let std = (sq / n as f64 - mean * mean).max(0.0).sqrt();
        let noise: Vec<f64> = (0..h * w).map(|_| rng.normal()).collect();
        let blurred = box_blur(&noise, h, w, MOCK_BLUR);
        let spread = {
            let m = blurred.iter().sum::<f64>() / blurred.len() as f64;
            (blurred.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / blurred.len() as f64).sqrt()
        };
        let gain = if spread > 0.0 { std / spread } else { 0.0 };
        for (o, b) in out.plane_mut(ch).iter_mut().zip(&blurred) {
            *o = (mean + gain * b).clamp(0.0, 1.0) as f32;
        }
    }
    out
}

/// Mean over a `k × k` window with replicated borders.
pub fn box_blur(src: &[f64], h: usize, w: usize, k: usize) -> Vec<f64> {
    let r = (k / 2) as isize;
    let pass = |src: &[f64], along_x: bool| -> Vec<f64> {
        let mut out = vec![0.0; h * w];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for d in -r..=r {
                    let (sy, sx) = if along_x {
                        (y, (x as isize + d).clamp(0, w as isize - 1) as usize)
                    } else {
                        ((y as isize + d).clamp(0, h as isize - 1) as usize, x)
                    };
                    acc += src[sy * w + sx];
                }
                out[y * w + x] = acc / k as f64;
            }
        }
        out
    };
    pass(&pass(src, true), false)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskShape {
    Rect,
    Ellipse,
}

/// Seeded rectangle or ellipse covering `area_fraction ± 0.02` of the frame.
pub fn synth_mask(shape: MaskShape, h: usize, w: usize, area_fraction: f64, seed: u64) -> Result<BinaryMask> {
    if !(area_fraction > 0.0 && area_fraction <= 0.9) {
        return Err(Error::Param(format!("mask area {area_fraction} outside (0, 0.9]")));
    }
    if h == 0 || w == 0 {
        return Err(Error::Shape("empty frame".into()));
    }
    let mut rng = Rng::new(seed, STREAM_MASK);
    let target = area_fraction * (h * w) as f64;
    // aspect ratio height/width in [2/3, 3/2]
    let aspect = (2.0f64 / 3.0) * (9.0f64 / 4.0).powf(rng.uniform());
    match shape {
        MaskShape::Rect => {
            let mut rh = ((target * aspect).sqrt().round() as usize).clamp(1, h);
            let mut rw = ((target / rh as f64).round() as usize).clamp(1, w);
            if rw == w {
                rh = ((target / w as f64).round() as usize).clamp(1, h);
            }
            if rh == h {
                rw = ((target / h as f64).round() as usize).clamp(1, w);
            }
            let y0 = rng.below((h - rh + 1) as u64) as usize;
            let x0 = rng.below((w - rw + 1) as u64) as usize;
            Ok(BinaryMask::from_fn(h, w, |y, x| {
                (y0..y0 + rh).contains(&y) && (x0..x0 + rw).contains(&x)
            }))
        }
        MaskShape::Ellipse => {
            let (hf, wf) = (h as f64, w as f64);
            // semi-axes before correction: π·ay·ax = target, ay/ax = aspect
            let ay = (target * aspect / std::f64::consts::PI).sqrt();
            let ax = ay / aspect;
            let raster = |scale: f64, cy: f64, cx: f64| {
                BinaryMask::from_fn(h, w, |y, x| {
                    let dy = (y as f64 + 0.5 - cy) / (ay * scale);
                    let dx = (x as f64 + 0.5 - cx) / (ax * scale);
                    dy * dy + dx * dx <= 1.0
                })
            };
            // rasterization and frame clipping shift the area, so solve for the
            // scale on a centered ellipse before placing it
            let (mid_y, mid_x) = (hf / 2.0, wf / 2.0);
            let (mut lo, mut hi) = (0.5, 3.0);
            let mut scale = 1.0;
            let mut best = (raster(1.0, mid_y, mid_x).count() as f64 - target).abs();
            for _ in 0..60 {
                if best <= 0.002 * (h * w) as f64 {
                    break;
                }
                let s = 0.5 * (lo + hi);
                let count = raster(s, mid_y, mid_x).count() as f64;
                if count < target {
                    lo = s;
                } else {
                    hi = s;
                }
                if (count - target).abs() < best {
                    best = (count - target).abs();
                    scale = s;
                }
            }
            let (ry, rx) = (ay * scale, ax * scale);
            let place = |radius: f64, side: f64, u: f64| {
                let free = side - 2.0 * radius - 2.0;
                if free > 0.0 {
                    radius + 1.0 + u * free
                } else {
                    side / 2.0
                }
            };
            let cy = place(ry, hf, rng.uniform());
            let cx = place(rx, wf, rng.uniform());
            Ok(raster(scale, cy, cx))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize) -> Tensor3 {
        Tensor3::from_fn(3, h, w, |c, y, x| ((c * 13 + y * 5 + x * 3) % 41) as f32 / 41.0)
    }

    #[test]
    fn empty_mask_is_identity() {
        let img = ramp(16, 16);
        let out = masked_regenerate(&img, &BinaryMask::empty(16, 16), &Fill::Mock, 1).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn full_mask_with_external_fill_is_the_fill() {
        let dir = tempfile::tempdir().unwrap();
        let fill = crate::tensor::ImageU8::from_tensor(&ramp(16, 16).map(|v| 1.0 - v)).unwrap();
        let path = dir.path().join("fill.png");
        io::png_write(&fill, &path).unwrap();
        let out = masked_regenerate(&ramp(16, 16), &BinaryMask::full(16, 16), &Fill::External(path), 1).unwrap();
        assert_eq!(out, fill.to_tensor());
    }

    #[test]
    fn outside_mask_is_untouched() {
        let img = ramp(64, 64);
        let mask = synth_mask(MaskShape::Rect, 64, 64, 0.25, 3).unwrap();
        let out = masked_regenerate(&img, &mask, &Fill::Mock, 3).unwrap();
        for c in 0..3 {
            for y in 0..64 {
                for x in 0..64 {
                    if !mask.get(y, x) {
                        assert_eq!(out.get(c, y, x).to_bits(), img.get(c, y, x).to_bits());
                    }
                }
            }
        }
        assert_ne!(out, img);
    }

    #[test]
    fn errors() {
        let img = ramp(8, 8);
        assert!(matches!(
            masked_regenerate(&img, &BinaryMask::full(8, 9), &Fill::Mock, 0),
            Err(Error::Shape(_))
        ));
        let e = masked_regenerate(&img, &BinaryMask::full(8, 8), &Fill::External("/no/such.png".into()), 0)
            .unwrap_err();
        assert!(e.is_io());
        assert!(matches!(
            masked_regenerate(&img, &BinaryMask::full(8, 8), &Fill::Image(ramp(8, 4)), 0),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn rect_area_on_512() {
        for seed in 0..20 {
            let m = synth_mask(MaskShape::Rect, 512, 512, 0.25, seed).unwrap();
            assert!((m.count() as i64 - 65536).abs() <= 1311, "{}", m.count());
        }
    }

    #[test]
    fn areas_within_tolerance() {
        for shape in [MaskShape::Rect, MaskShape::Ellipse] {
            for &a in &[0.05, 0.1, 0.25, 0.5, 0.75, 0.9] {
                for seed in 0..5 {
                    let m = synth_mask(shape, 128, 96, a, seed).unwrap();
                    assert!((m.area_fraction() - a).abs() <= 0.02, "{shape:?} {a} {}", m.area_fraction());
                }
            }
        }
    }

    #[test]
    fn ellipse_inside_frame_up_to_half() {
        for &a in &[0.1, 0.3, 0.5] {
            for seed in 0..10 {
                let m = synth_mask(MaskShape::Ellipse, 512, 512, a, seed).unwrap();
                let touches = (0..512).any(|i| m.get(0, i) || m.get(511, i) || m.get(i, 0) || m.get(i, 511));
                assert!(!touches, "a={a} seed={seed}");
            }
        }
    }

    #[test]
    fn masks_are_deterministic() {
        let a = synth_mask(MaskShape::Ellipse, 64, 64, 0.3, 8).unwrap();
        assert_eq!(a, synth_mask(MaskShape::Ellipse, 64, 64, 0.3, 8).unwrap());
        assert!(synth_mask(MaskShape::Rect, 64, 64, 0.95, 8).is_err());
        assert!(synth_mask(MaskShape::Rect, 64, 64, 0.0, 8).is_err());
    }
}
