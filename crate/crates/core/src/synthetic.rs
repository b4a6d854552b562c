//! Seeded procedural test images: gradients, filled shapes and textures.

use crate::rng::Rng;
use crate::tensor::Tensor3;

const STREAM_PROCEDURAL: u64 = 0x20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pattern {
    Gradient,
    Shapes,
    Texture,
}

impl Pattern {
    pub const ALL: [Pattern; 3] = [Pattern::Gradient, Pattern::Shapes, Pattern::Texture];
}

fn color(rng: &mut Rng) -> [f32; 3] {
    [rng.uniform() as f32, rng.uniform() as f32, rng.uniform() as f32]
}

/// Image `index` of a seeded procedural set; patterns cycle with the index.
pub fn procedural_image(seed: u64, index: u64, h: usize, w: usize) -> Tensor3 {
    let pattern = Pattern::ALL[(index % 3) as usize];
    let mut rng = Rng::derive(seed, &[STREAM_PROCEDURAL, index]);
    render(pattern, &mut rng, h, w)
}

pub fn render(pattern: Pattern, rng: &mut Rng, h: usize, w: usize) -> Tensor3 {
    match pattern {
        Pattern::Gradient => {
            let (a, b) = (color(rng), color(rng));
            let angle = rng.uniform() * std::f64::consts::TAU;
            let (dy, dx) = (angle.sin(), angle.cos());
            let span = (h as f64 * dy.abs() + w as f64 * dx.abs()).max(1.0);
            let (cy, cx) = (h as f64 / 2.0, w as f64 / 2.0);
            Tensor3::from_fn(3, h, w, |c, y, x| {
                let t = (((y as f64 - cy) * dy + (x as f64 - cx) * dx) / span + 0.5).clamp(0.0, 1.0) as f32;
                a[c] * (1.0 - t) + b[c] * t
            })
        }
        Pattern::Shapes => {
            let bg = color(rng);
            let mut img = Tensor3::from_fn(3, h, w, |c, _, _| bg[c]);
            let count = 3 + rng.below(6) as usize;
            for _ in 0..count {
                let fg = color(rng);
                let cy = rng.uniform() * h as f64;
                let cx = rng.uniform() * w as f64;
                let ry = (0.05 + 0.25 * rng.uniform()) * h as f64;
                let rx = (0.05 + 0.25 * rng.uniform()) * w as f64;
                let disc = rng.uniform() < 0.5;
                for y in 0..h {
                    for x in 0..w {
                        let (u, v) = ((y as f64 - cy) / ry, (x as f64 - cx) / rx);
                        let inside = if disc { u * u + v * v <= 1.0 } else { u.abs() <= 1.0 && v.abs() <= 1.0 };
                        if inside {
                            for (c, &f) in fg.iter().enumerate() {
                                img.set(c, y, x, f);
                            }
                        }
                    }
                }
            }
            img
        }
        Pattern::Texture => {
            // sum of a few random plane waves per channel
            let waves: Vec<[f64; 4]> = (0..6)
                .map(|_| {
                    let period = 4.0 + 60.0 * rng.uniform();
                    let angle = rng.uniform() * std::f64::consts::PI;
                    [
                        angle.sin() / period,
                        angle.cos() / period,
                        rng.uniform() * std::f64::consts::TAU,
                        rng.uniform(),
                    ]
                })
                .collect();
            let tint = color(rng);
            Tensor3::from_fn(3, h, w, |c, y, x| {
                let mut s = 0.0;
                for (i, [fy, fx, phase, amp]) in waves.iter().enumerate() {
                    let ph = phase + c as f64 * (i as f64 + 1.0);
                    s += amp * (std::f64::consts::TAU * (fy * y as f64 + fx * x as f64) + ph).sin();
                }
                (0.5 * tint[c] as f64 + 0.25 + 0.12 * s).clamp(0.0, 1.0) as f32
            })
        }
    }
}
