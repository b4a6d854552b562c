//! Bilinear resampling with half-pixel-center alignment and edge clamping.

use crate::tensor::Tensor3;

pub fn resize_bilinear(img: &Tensor3, out_h: usize, out_w: usize) -> Tensor3 {
    let (c, h, w) = img.shape();
    if (h, w) == (out_h, out_w) {
        return img.clone();
    }
    let ys = taps(h, out_h);
    let xs = taps(w, out_w);
    let mut out = Tensor3::zeros(c, out_h, out_w);
    for ch in 0..c {
        let src = img.plane(ch);
        let dst = out.plane_mut(ch);
        for (oy, &(y0, y1, fy)) in ys.iter().enumerate() {
            for (ox, &(x0, x1, fx)) in xs.iter().enumerate() {
                let top = src[y0 * w + x0] as f64 * (1.0 - fx) + src[y0 * w + x1] as f64 * fx;
                let bot = src[y1 * w + x0] as f64 * (1.0 - fx) + src[y1 * w + x1] as f64 * fx;
                dst[oy * out_w + ox] = (top * (1.0 - fy) + bot * fy) as f32;
            }
        }
    }
    out
}

/// Source index pair and weight for each output coordinate.
fn taps(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|o| {
            let s = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let i0 = s.floor() as usize;
            let i1 = (i0 + 1).min(src - 1);
            (i0, i1, s - i0 as f64)
        })
        .collect()
}
