//! Backward-energy seam carving.
//!
//! Energy is `|∂x L| + |∂y L|` on luma with central differences and clamped
//! borders. The cumulative cost is `M(i, j) = e(i, j) + min(M(i−1, j−1..=j+1))`;
//! ties prefer the leftmost parent and the leftmost bottom cell.

use crate::error::{Error, Result};
use crate::perturb::resize::resize_bilinear;
use crate::tensor::{to_gray, Tensor3};

/// Column index of the seam in each row, top to bottom.
pub type Seam = Vec<usize>;

pub fn energy(luma: &[f32], h: usize, w: usize) -> Vec<f64> {
    let at = |y: usize, x: usize| luma[y * w + x] as f64;
    let mut e = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let dx = at(y, (x + 1).min(w - 1)) - at(y, x.saturating_sub(1));
            let dy = at((y + 1).min(h - 1), x) - at(y.saturating_sub(1), x);
            e[y * w + x] = dx.abs() + dy.abs();
        }
    }
    e
}

/// Minimum-cost 8-connected vertical seam through an energy map.
pub fn find_seam(energy: &[f64], h: usize, w: usize) -> Seam {
    let mut cost = energy[..w].to_vec();
    let mut parent = vec![0usize; h * w];
    let mut next = vec![0.0; w];
    for y in 1..h {
        for x in 0..w {
            let lo = x.saturating_sub(1);
            let hi = (x + 1).min(w - 1);
            let mut best = lo;
            for cand in lo + 1..=hi {
                if cost[cand] < cost[best] {
                    best = cand;
                }
            }
            parent[y * w + x] = best;
            next[x] = energy[y * w + x] + cost[best];
        }
        std::mem::swap(&mut cost, &mut next);
    }
    let mut x = 0;
    for cand in 1..w {
        if cost[cand] < cost[x] {
            x = cand;
        }
    }
    let mut seam = vec![0; h];
    for y in (0..h).rev() {
        seam[y] = x;
        if y > 0 {
            x = parent[y * w + x];
        }
    }
    seam
}

pub fn remove_seam(img: &Tensor3, seam: &[usize]) -> Tensor3 {
    let (c, h, w) = img.shape();
    let mut data = Vec::with_capacity(c * h * (w - 1));
    for ch in 0..c {
        let plane = img.plane(ch);
        for (y, &sx) in seam.iter().enumerate() {
            let row = &plane[y * w..(y + 1) * w];
            data.extend_from_slice(&row[..sx]);
            data.extend_from_slice(&row[sx + 1..]);
        }
    }
    Tensor3::from_vec(c, h, w - 1, data).expect("seam removal keeps a valid shape")
}

/// Removes `count` seams one at a time, recomputing energy after each removal.
pub fn carve_seams(img: &Tensor3, count: usize) -> Result<(Tensor3, Vec<Seam>)> {
    if img.channels() != 3 {
        return Err(Error::Shape("seam carving needs an RGB image".into()));
    }
    if count > 0 && count >= img.width() {
        return Err(Error::Param(format!(
            "cannot remove {count} seams from width {}",
            img.width()
        )));
    }
    let mut cur = img.clone();
    let mut seams = Vec::with_capacity(count);
    for _ in 0..count {
        let luma = to_gray(&cur)?;
        let e = energy(luma.data(), cur.height(), cur.width());
        let seam = find_seam(&e, cur.height(), cur.width());
        cur = remove_seam(&cur, &seam);
        seams.push(seam);
    }
    Ok((cur, seams))
}

/// Removes `⌊fraction·W⌋` seams and rescales back to the original width.
pub fn seam_carve(img: &Tensor3, fraction: f64) -> Result<Tensor3> {
    if !(0.0..=0.5).contains(&fraction) {
        return Err(Error::Param(format!("seam fraction {fraction} outside [0, 0.5]")));
    }
    if img.width() < 3 {
        return Err(Error::Shape(format!("width {} < 3", img.width())));
    }
    let count = (fraction * img.width() as f64).floor() as usize;
    if count == 0 {
        return Ok(img.clone());
    }
    let (carved, _) = carve_seams(img, count)?;
    Ok(resize_bilinear(&carved, img.height(), img.width()))
}
