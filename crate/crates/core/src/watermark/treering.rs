//! Concentric-ring pattern written into the Fourier spectrum of one latent channel.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{DetectionResult, Scheme};
use crate::error::{Error, Result};
use crate::fft::{signed_freq, Fft2};
use crate::rng::Rng;
use crate::tensor::Tensor3;

pub const DEFAULT_RADII: std::ops::RangeInclusive<u32> = 2..=10;
pub const DEFAULT_SIGMA: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeRingKey {
    pub seed: u64,
    pub radii: Vec<u32>,
    pub channel: usize,
    /// Per-component standard deviation the ring values were drawn with.
    pub sigma: f64,
    /// One `[re, im]` pair per entry of `radii`.
    pub ring_values: Vec<[f64; 2]>,
}

impl TreeRingKey {
    pub fn generate(seed: u64, radii: Vec<u32>, channel: usize, sigma: f64) -> Self {
        let mut rng = Rng::new(seed, 0x7EE);
        let ring_values = radii
            .iter()
            .map(|_| [sigma * rng.normal(), sigma * rng.normal()])
            .collect();
        Self {
            seed,
            radii,
            channel,
            sigma,
            ring_values,
        }
    }

    pub fn with_defaults(seed: u64) -> Self {
        Self::generate(seed, DEFAULT_RADII.collect(), 0, DEFAULT_SIGMA)
    }

    pub fn validate(&self, shape: (usize, usize, usize)) -> Result<()> {
        let (c, h, w) = shape;
        if self.channel >= c {
            return Err(Error::Key(format!(
                "ring channel {} not in a {c}-channel latent",
                self.channel
            )));
        }
        if self.ring_values.len() != self.radii.len() {
            return Err(Error::Key(format!(
                "{} ring values for {} radii",
                self.ring_values.len(),
                self.radii.len()
            )));
        }
        let limit = (h.min(w) / 2).saturating_sub(1) as u32;
        if let Some(&r) = self.radii.iter().find(|&&r| r == 0 || r > limit) {
            return Err(Error::Key(format!(
                "radius {r} outside 1..={limit} for a {h}×{w} plane"
            )));
        }
        Ok(())
    }

    /// Masked bins of an `h × w` spectrum with their target values.
    ///
    /// A bin belongs to ring `r` when its rounded distance to the zero
    /// frequency equals `r`. The half-plane with positive frequency carries
    /// the ring value and its mirror the conjugate, so the pattern is
    /// Hermitian and its inverse transform is real.
    pub fn pattern(&self, h: usize, w: usize) -> Vec<(usize, Complex64)> {
        let mut out = Vec::new();
        for ky in 0..h {
            for kx in 0..w {
                let (fy, fx) = (signed_freq(ky, h), signed_freq(kx, w));
                let dist = ((fy * fy + fx * fx) as f64).sqrt().round() as u32;
                if let Some(slot) = self.radii.iter().position(|&r| r == dist) {
                    let [re, im] = self.ring_values[slot];
                    let upper = fy > 0 || (fy == 0 && fx > 0);
                    let v = if upper {
                        Complex64::new(re, im)
                    } else {
                        Complex64::new(re, -im)
                    };
                    out.push((ky * w + kx, v));
                }
            }
        }
        out
    }
}

pub fn treering_embed(key: &TreeRingKey, z_t: &Tensor3) -> Result<Tensor3> {
    key.validate(z_t.shape())?;
    let (_, h, w) = z_t.shape();
    let fft = Fft2::new(h, w);
    let mut spec = fft.forward_real(z_t.plane(key.channel));
    for (i, v) in key.pattern(h, w) {
        spec[i] = v;
    }
    fft.inverse(&mut spec);
    let mut out = z_t.clone();
    for (o, s) in out.plane_mut(key.channel).iter_mut().zip(&spec) {
        *o = s.re as f32;
    }
    Ok(out)
}

/// Squared distance between the keyed channel's spectrum and the pattern over masked bins.
pub fn treering_statistic(key: &TreeRingKey, z_hat: &Tensor3) -> Result<f64> {
    key.validate(z_hat.shape())?;
    let (_, h, w) = z_hat.shape();
    let spec = Fft2::new(h, w).forward_real(z_hat.plane(key.channel));
    Ok(key
        .pattern(h, w)
        .into_iter()
        .map(|(i, v)| (spec[i] - v).norm_sqr())
        .sum())
}

/// Empirical-null p-value with add-one smoothing; small distances give small p.
pub fn empirical_p_value(statistic: f64, null_scores: &[f64]) -> Result<f64> {
    if null_scores.is_empty() {
        return Err(Error::Calibration("empty null score set".into()));
    }
    let at_or_below = null_scores.iter().filter(|&&s| s <= statistic).count();
    Ok((1 + at_or_below) as f64 / (null_scores.len() + 1) as f64)
}

pub fn treering_detect(key: &TreeRingKey, z_hat: &Tensor3, null_scores: &[f64]) -> Result<DetectionResult> {
    if null_scores.is_empty() {
        return Err(Error::Calibration("empty null score set".into()));
    }
    let eta = treering_statistic(key, z_hat)?;
    Ok(DetectionResult {
        scheme: Scheme::TreeRing,
        statistic: eta,
        p_value: Some(empirical_p_value(eta, null_scores)?),
        decoded_bits: None,
    })
}
