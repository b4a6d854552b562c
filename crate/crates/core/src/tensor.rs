//! Dense `channels × height × width` arrays and the 8-bit image form used at I/O boundaries.

use crate::error::{Error, Result};

/// Row-major `(c, y, x)` float array holding latents and normalized images.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl Tensor3 {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self::filled(channels, height, width, 0.0)
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f32) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![value; channels * height * width],
        }
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        let expected = channels
            .checked_mul(height)
            .and_then(|n| n.checked_mul(width))
            .ok_or_else(|| Error::Capacity(format!("{channels}×{height}×{width} overflows")))?;
        if data.len() != expected {
            return Err(Error::Shape(format!(
                "{} values cannot fill {channels}×{height}×{width}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Param(format!("non-finite value at flat index {bad}")));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    /// Builds a tensor by evaluating `f(c, y, x)` at every position.
    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Self {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Self {
            channels,
            height,
            width,
            data,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }
    pub fn len(&self) -> usize {
        self.data.len()
    }
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
    pub fn data(&self) -> &[f32] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }
    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn index(&self, c: usize, y: usize, x: usize) -> usize {
        (c * self.height + y) * self.width + x
    }
    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[self.index(c, y, x)]
    }
    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f32) {
        let i = self.index(c, y, x);
        self.data[i] = v;
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }
    pub fn plane_mut(&mut self, c: usize) -> &mut [f32] {
        let n = self.height * self.width;
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn same_shape(&self, other: &Tensor3) -> bool {
        self.shape() == other.shape()
    }

    pub(crate) fn expect_shape(&self, shape: (usize, usize, usize), what: &str) -> Result<()> {
        if self.shape() != shape {
            return Err(Error::Shape(format!(
                "{what}: expected {:?}, got {:?}",
                shape,
                self.shape()
            )));
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Tensor3) -> f32 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max)
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Tensor3 {
        Tensor3 {
            channels: self.channels,
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn clamp01(&self) -> Tensor3 {
        self.map(|v| v.clamp(0.0, 1.0))
    }
}

/// BT.601 luma of a 3-channel image.
pub fn to_gray(img: &Tensor3) -> Result<Tensor3> {
    if img.channels() != 3 {
        return Err(Error::Shape(format!(
            "to_gray needs 3 channels, got {}",
            img.channels()
        )));
    }
    let (r, g, b) = (img.plane(0), img.plane(1), img.plane(2));
    let data = r
        .iter()
        .zip(g)
        .zip(b)
        .map(|((&r, &g), &b)| 0.299 * r + 0.587 * g + 0.114 * b)
        .collect();
    Tensor3::from_vec(1, img.height(), img.width(), data)
}

/// Interleaved 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageU8 {
    height: usize,
    width: usize,
    rgb: Vec<u8>,
}

impl ImageU8 {
    pub fn new(height: usize, width: usize, rgb: Vec<u8>) -> Result<Self> {
        if rgb.len() != 3 * height * width {
            return Err(Error::Shape(format!(
                "{} samples cannot fill a {height}×{width} RGB image",
                rgb.len()
            )));
        }
        Ok(Self { height, width, rgb })
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn rgb(&self) -> &[u8] {
        &self.rgb
    }

    /// Normalizes to `[0, 1]` by dividing by 255.
    pub fn to_tensor(&self) -> Tensor3 {
        let (h, w) = (self.height, self.width);
        Tensor3::from_fn(3, h, w, |c, y, x| self.rgb[(y * w + x) * 3 + c] as f32 / 255.0)
    }

    /// Quantizes a 3-channel tensor, clamping to `[0, 1]` and rounding to nearest.
    pub fn from_tensor(t: &Tensor3) -> Result<Self> {
        if t.channels() != 3 {
            return Err(Error::Shape(format!(
                "RGB export needs 3 channels, got {}",
                t.channels()
            )));
        }
        let (h, w) = (t.height(), t.width());
        let mut rgb = vec![0u8; 3 * h * w];
        for c in 0..3 {
            for (i, &v) in t.plane(c).iter().enumerate() {
                rgb[i * 3 + c] = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
            }
        }
        Ok(Self {
            height: h,
            width: w,
            rgb,
        })
    }
}
