//! Grey-level erosion and dilation with a square structuring element.
//!
//! Separable: a k×k min (max) is a horizontal k-window min followed by a
//! vertical one. Each 1-D pass uses the van Herk / Gil–Werman block
//! prefix/suffix scheme, so cost is independent of `k`. Borders replicate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MorphOp {
    Erode,
    Dilate,
}

pub fn morphology(img: &Tensor3, op: MorphOp, k: usize) -> Result<Tensor3> {
    if k.is_multiple_of(2) || !(3..=11).contains(&k) {
        return Err(Error::Param(format!("kernel {k} must be odd in 3..=11")));
    }
    let pick: fn(f32, f32) -> f32 = match op {
        MorphOp::Erode => f32::min,
        MorphOp::Dilate => f32::max,
    };
    let (c, h, w) = img.shape();
    let mut out = img.clone();
    let r = k / 2;
    let mut line = Vec::new();
    let mut tmp = Vec::new();
    for ch in 0..c {
        let plane = out.plane_mut(ch);
        for y in 0..h {
            line.clear();
            line.extend_from_slice(&plane[y * w..(y + 1) * w]);
            window_1d(&line, r, pick, &mut tmp);
            plane[y * w..(y + 1) * w].copy_from_slice(&tmp);
        }
        for x in 0..w {
            line.clear();
            line.extend((0..h).map(|y| plane[y * w + x]));
            window_1d(&line, r, pick, &mut tmp);
            for (y, &v) in tmp.iter().enumerate() {
                plane[y * w + x] = v;
            }
        }
    }
    Ok(out)
}

/// `out[i] = pick over src[i−r ..= i+r]` with replicated ends.
fn window_1d(src: &[f32], r: usize, pick: fn(f32, f32) -> f32, out: &mut Vec<f32>) {
    let n = src.len();
    let k = 2 * r + 1;
    // pad by replication so every window is in range
    let padded: Vec<f32> = (0..n + 2 * r)
        .map(|i| src[i.saturating_sub(r).min(n - 1)])
        .collect();
    let m = padded.len();
    let mut prefix = vec![0f32; m];
    let mut suffix = vec![0f32; m];
    for i in 0..m {
        prefix[i] = if i % k == 0 { padded[i] } else { pick(prefix[i - 1], padded[i]) };
    }
    for i in (0..m).rev() {
        suffix[i] = if i % k == k - 1 || i == m - 1 {
            padded[i]
        } else {
            pick(suffix[i + 1], padded[i])
        };
    }
    out.clear();
    // window [i, i+k−1] in padded coordinates
    out.extend((0..n).map(|i| pick(suffix[i], prefix[i + k - 1])));
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(img: &Tensor3, op: MorphOp, k: usize) -> Tensor3 {
        let (c, h, w) = img.shape();
        let r = (k / 2) as isize;
        Tensor3::from_fn(c, h, w, |ch, y, x| {
            let mut acc = img.get(ch, y, x);
            for dy in -r..=r {
                for dx in -r..=r {
                    let sy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                    let sx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                    let v = img.get(ch, sy, sx);
                    acc = match op {
                        MorphOp::Erode => acc.min(v),
                        MorphOp::Dilate => acc.max(v),
                    };
                }
            }
            acc
        })
    }

    #[test]
    fn constant_unchanged() {
        let img = Tensor3::filled(3, 9, 7, 0.25);
        for op in [MorphOp::Erode, MorphOp::Dilate] {
            assert_eq!(morphology(&img, op, 5).unwrap(), img);
        }
    }

    #[test]
    fn single_pixel_dilates_to_square() {
        let mut img = Tensor3::zeros(1, 7, 7);
        img.set(0, 3, 3, 1.0);
        let out = morphology(&img, MorphOp::Dilate, 3).unwrap();
        for y in 0..7 {
            for x in 0..7 {
                let inside = (2..=4).contains(&y) && (2..=4).contains(&x);
                assert_eq!(out.get(0, y, x), if inside { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn matches_naive_on_small_images() {
        let mut rng = crate::rng::Rng::new(11, 0);
        for &(h, w) in &[(8, 8), (3, 13), (12, 5), (1, 1)] {
            let img = Tensor3::from_fn(3, h, w, |_, _, _| rng.uniform() as f32);
            for k in [3, 5, 7, 9, 11] {
                for op in [MorphOp::Erode, MorphOp::Dilate] {
                    assert_eq!(morphology(&img, op, k).unwrap(), naive(&img, op, k), "{h}×{w} k={k} {op:?}");
                }
            }
        }
    }

    #[test]
    fn even_kernel_rejected() {
        assert!(matches!(
            morphology(&Tensor3::zeros(3, 4, 4), MorphOp::Erode, 4),
            Err(Error::Param(_))
        ));
        assert!(morphology(&Tensor3::zeros(3, 4, 4), MorphOp::Erode, 13).is_err());
    }
}
