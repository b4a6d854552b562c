use crate::error::{Error, Result};

/// Per-pixel region selector; `true` marks pixels to be replaced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
    ones: usize,
}

impl BinaryMask {
    pub fn empty(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            bits: vec![false; height * width],
            ones: 0,
        }
    }

    pub fn full(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            bits: vec![true; height * width],
            ones: height * width,
        }
    }

    pub fn from_bits(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != height * width {
            return Err(Error::Shape(format!(
                "{} mask bits cannot fill {height}×{width}",
                bits.len()
            )));
        }
        let ones = bits.iter().filter(|&&b| b).count();
        Ok(Self {
            height,
            width,
            bits,
            ones,
        })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(y, x));
            }
        }
        let ones = bits.iter().filter(|&&b| b).count();
        Self {
            height,
            width,
            bits,
            ones,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }
    pub fn count(&self) -> usize {
        self.ones
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, y: usize, x: usize, value: bool) {
        let slot = &mut self.bits[y * self.width + x];
        match (*slot, value) {
            (false, true) => self.ones += 1,
            (true, false) => self.ones -= 1,
            _ => {}
        }
        *slot = value;
    }

    /// Fraction of pixels set, in `[0, 1]`.
    pub fn area_fraction(&self) -> f64 {
        if self.bits.is_empty() {
            0.0
        } else {
            self.ones as f64 / self.bits.len() as f64
        }
    }
}
