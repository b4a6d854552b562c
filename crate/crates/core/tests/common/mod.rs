//! Reference implementations shared by the oracle tests and the acceptance run.
#![allow(dead_code)]

use wmlab_core::{Rng, Tensor3};

pub fn random_rgb(rng: &mut Rng, h: usize, w: usize) -> Tensor3 {
    Tensor3::from_fn(3, h, w, |_, _, _| rng.uniform() as f32)
}

pub fn oracle_luma(img: &Tensor3) -> Vec<Vec<f64>> {
    let (_, h, w) = img.shape();
    (0..h)
        .map(|y| {
            (0..w)
                .map(|x| {
                    (0.299f32 * img.get(0, y, x) + 0.587f32 * img.get(1, y, x) + 0.114f32 * img.get(2, y, x)) as f64
                })
                .collect()
        })
        .collect()
}

pub fn oracle_energy(l: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (h, w) = (l.len() as isize, l[0].len() as isize);
    let at = |y: isize, x: isize| l[y.clamp(0, h - 1) as usize][x.clamp(0, w - 1) as usize];
    (0..h)
        .map(|y| (0..w).map(|x| (at(y, x + 1) - at(y, x - 1)).abs() + (at(y + 1, x) - at(y - 1, x)).abs()).collect())
        .collect()
}

/// Enumerates every 8-connected vertical seam; returns the cheapest and the runner-up cost.
pub fn brute_force_seam(e: &[Vec<f64>]) -> (Vec<usize>, f64, f64) {
    let (h, w) = (e.len(), e[0].len());
    let mut best = (Vec::new(), f64::INFINITY);
    let mut second = f64::INFINITY;
    let mut path = vec![0usize; h];
    fn walk(
        e: &[Vec<f64>],
        y: usize,
        cost: f64,
        path: &mut Vec<usize>,
        best: &mut (Vec<usize>, f64),
        second: &mut f64,
    ) {
        let (h, w) = (e.len(), e[0].len());
        if y == h {
            if cost < best.1 {
                *second = best.1;
                *best = (path.clone(), cost);
            } else if cost < *second {
                *second = cost;
            }
            return;
        }
        let prev = path[y - 1] as isize;
        for dx in -1..=1 {
            let x = prev + dx;
            if x < 0 || x >= w as isize {
                continue;
            }
            path[y] = x as usize;
            walk(e, y + 1, cost + e[y][x as usize], path, best, second);
        }
    }
    for x in 0..w {
        path[0] = x;
        walk(e, 1, e[0][x], &mut path, &mut best, &mut second);
    }
    (best.0, best.1, second)
}

pub fn drop_seam(img: &Tensor3, seam: &[usize]) -> Tensor3 {
    let (c, h, w) = img.shape();
    let mut data = Vec::new();
    for ch in 0..c {
        for y in 0..h {
            for x in 0..w {
                if x != seam[y] {
                    data.push(img.get(ch, y, x));
                }
            }
        }
    }
    Tensor3::from_vec(c, h, w - 1, data).unwrap()
}

pub fn naive_morph(img: &Tensor3, dilate: bool, k: usize) -> Tensor3 {
    let (_, h, w) = img.shape();
    let r = (k / 2) as isize;
    Tensor3::from_fn(img.channels(), h, w, |c, y, x| {
        let mut acc = if dilate { f32::NEG_INFINITY } else { f32::INFINITY };
        for dy in -r..=r {
            for dx in -r..=r {
                let yy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                let xx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                let v = img.get(c, yy, xx);
                acc = if dilate { acc.max(v) } else { acc.min(v) };
            }
        }
        acc
    })
}

pub fn naive_ssim(a: &Tensor3, b: &Tensor3) -> f64 {
    let luma = |t: &Tensor3, y: usize, x: usize| -> f64 {
        if t.channels() == 1 {
            t.get(0, y, x) as f64
        } else {
            (0.299f32 * t.get(0, y, x) + 0.587f32 * t.get(1, y, x) + 0.114f32 * t.get(2, y, x)) as f64
        }
    };
    let (_, h, w) = a.shape();
    let mut g = [[0.0f64; 11]; 11];
    let mut norm = 0.0;
    for (i, row) in g.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (di, dj) = (i as f64 - 5.0, j as f64 - 5.0);
            *v = (-(di * di + dj * dj) / (2.0 * 1.5 * 1.5)).exp();
            norm += *v;
        }
    }
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let mut total = 0.0;
    let mut n = 0;
    for y0 in 0..=h - 11 {
        for x0 in 0..=w - 11 {
            let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..11 {
                for j in 0..11 {
                    let wt = g[i][j] / norm;
                    let (p, q) = (luma(a, y0 + i, x0 + j), luma(b, y0 + i, x0 + j));
                    mx += wt * p;
                    my += wt * q;
                    sxx += wt * p * p;
                    syy += wt * q * q;
                    sxy += wt * p * q;
                }
            }
            let (vx, vy, cxy) = (sxx - mx * mx, syy - my * my, sxy - mx * my);
            total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            n += 1;
        }
    }
    total / n as f64
}
