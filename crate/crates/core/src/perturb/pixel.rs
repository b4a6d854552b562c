//! Erasure, row blanking and block permutation attacks.

use crate::error::{Error, Result};
use crate::perturb::resize::resize_bilinear;
use crate::rng::Rng;
use crate::tensor::Tensor3;

const STREAM_IMPULSE: u64 = 0x1;
const STREAM_OCCLUDE: u64 = 0x2;
const STREAM_PARTIAL: u64 = 0x3;
const STREAM_COMPLETE: u64 = 0x4;

fn blacken(img: &mut Tensor3, y: usize, x: usize) {
    for c in 0..img.channels() {
        img.set(c, y, x, 0.0);
    }
}

fn blacken_row(img: &mut Tensor3, y: usize) {
    let w = img.width();
    for c in 0..img.channels() {
        let plane = img.plane_mut(c);
        plane[y * w..(y + 1) * w].fill(0.0);
    }
}

/// Bilinear down to `⌈H/f⌉ × ⌈W/f⌉` and back, without an anti-aliasing filter.
pub fn downsample_up(img: &Tensor3, factor: usize) -> Result<Tensor3> {
    let (_, h, w) = img.shape();
    if !(2..=32).contains(&factor) {
        return Err(Error::Param(format!("downsample factor {factor} outside 2..=32")));
    }
    if factor >= h.min(w) {
        return Err(Error::Param(format!(
            "downsample factor {factor} ≥ min side {}",
            h.min(w)
        )));
    }
    let small = resize_bilinear(img, h.div_ceil(factor), w.div_ceil(factor));
    Ok(resize_bilinear(&small, h, w))
}

/// Blackens each pixel independently with probability `p`.
pub fn impulse_erase(img: &Tensor3, p: f64, seed: u64) -> Result<Tensor3> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Param(format!("erasure probability {p} outside [0, 1]")));
    }
    let mut out = img.clone();
    let mut rng = Rng::new(seed, STREAM_IMPULSE);
    for y in 0..img.height() {
        for x in 0..img.width() {
            if rng.uniform() < p {
                blacken(&mut out, y, x);
            }
        }
    }
    Ok(out)
}

/// Blackens every row whose index is a multiple of `period`.
pub fn interleave_black(img: &Tensor3, period: usize) -> Result<Tensor3> {
    if period < 2 {
        return Err(Error::Param(format!("interleave period {period} < 2")));
    }
    let mut out = img.clone();
    for y in (0..img.height()).step_by(period) {
        blacken_row(&mut out, y);
    }
    Ok(out)
}

/// Blackens a contiguous band of `⌊f·H⌋` rows from a seeded start row, wrapping.
pub fn occlude_rows(img: &Tensor3, fraction: f64, seed: u64) -> Result<Tensor3> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Param(format!("occlusion fraction {fraction} outside (0, 1]")));
    }
    let h = img.height();
    let rows = (fraction * h as f64).floor() as usize;
    let mut out = img.clone();
    if h == 0 {
        return Ok(out);
    }
    let start = Rng::new(seed, STREAM_OCCLUDE).below(h as u64) as usize;
    for i in 0..rows {
        blacken_row(&mut out, (start + i) % h);
    }
    Ok(out)
}

fn block_grid(img: &Tensor3, block: usize) -> Result<(usize, usize)> {
    let (_, h, w) = img.shape();
    if block == 0 || h % block != 0 || w % block != 0 {
        return Err(Error::Shape(format!("{h}×{w} is not divisible into {block}-pixel blocks")));
    }
    Ok((h / block, w / block))
}

/// Rearranges blocks so that destination block `i` receives source block `perm[i]`.
fn permute_blocks(img: &Tensor3, block: usize, cols: usize, perm: &[usize]) -> Tensor3 {
    let mut out = img.clone();
    for (dst, &src) in perm.iter().enumerate() {
        if dst == src {
            continue;
        }
        let (dy, dx) = ((dst / cols) * block, (dst % cols) * block);
        let (sy, sx) = ((src / cols) * block, (src % cols) * block);
        for c in 0..img.channels() {
            for r in 0..block {
                let w = img.width();
                let from = &img.plane(c)[(sy + r) * w + sx..(sy + r) * w + sx + block];
                out.plane_mut(c)[(dy + r) * w + dx..(dy + r) * w + dx + block].copy_from_slice(from);
            }
        }
    }
    out
}

/// `swaps` seeded transpositions of two distinct blocks on the `block`-pixel grid.
///
/// Transpositions are drawn independently, so a later swap may undo or
/// reuse blocks touched by an earlier one.
pub fn partial_block_shuffle(img: &Tensor3, swaps: usize, block: usize, seed: u64) -> Result<Tensor3> {
    let (rows, cols) = block_grid(img, block)?;
    let n = rows * cols;
    let mut perm: Vec<usize> = (0..n).collect();
    if n >= 2 {
        let mut rng = Rng::new(seed, STREAM_PARTIAL);
        for _ in 0..swaps {
            let a = rng.below(n as u64) as usize;
            let b = (a + 1 + rng.below(n as u64 - 1) as usize) % n;
            perm.swap(a, b);
        }
    }
    Ok(permute_blocks(img, block, cols, &perm))
}

/// Uniform random permutation of all `block × block` tiles.
pub fn complete_block_shuffle(img: &Tensor3, block: usize, seed: u64) -> Result<Tensor3> {
    if ![4, 8, 16, 32].contains(&block) {
        return Err(Error::Param(format!("shuffle block {block} not in {{4, 8, 16, 32}}")));
    }
    let (rows, cols) = block_grid(img, block)?;
    let mut perm: Vec<usize> = (0..rows * cols).collect();
    Rng::new(seed, STREAM_COMPLETE).shuffle(&mut perm);
    Ok(permute_blocks(img, block, cols, &perm))
}
