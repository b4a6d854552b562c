//! Embedding and detection through the toy channel for one scheme.

use crate::channel::ToyChannel;
use crate::error::{Error, Result};
use crate::metrics::tpr::{calibrate, Direction};
use crate::rng::Rng;
use crate::tensor::Tensor3;
use crate::watermark::{
    empirical_p_value, gaussianshading_decode, gaussianshading_sample, spreadspectrum_decode,
    spreadspectrum_embed, treering_embed, treering_statistic, DetectionResult, Scheme, WatermarkKey,
};

/// Clip applied to standardized latents recovered from arbitrary images.
const LATENT_CLIP: f32 = 4.0;

/// Unwatermarked starting point for one image.
#[derive(Debug, Clone)]
pub enum Host {
    /// Initial latent drawn from the prior.
    Latent(Tensor3),
    /// Existing image; latent schemes start from its standardized inversion.
    Image(Tensor3),
}

/// Per-channel zero mean and unit variance, clipped to `±4`.
pub fn standardize_latent(z: &Tensor3) -> Tensor3 {
    let mut out = z.clone();
    for c in 0..z.channels() {
        let plane = out.plane_mut(c);
        let n = plane.len() as f64;
        let mean = plane.iter().map(|&v| v as f64).sum::<f64>() / n;
        let var = plane.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        for v in plane.iter_mut() {
            *v = (((*v as f64 - mean) / sd) as f32).clamp(-LATENT_CLIP, LATENT_CLIP);
        }
    }
    out
}

/// Scheme direction for threshold calibration.
pub fn direction(scheme: Scheme) -> Direction {
    if scheme.higher_is_detected() {
        Direction::HigherIsDetected
    } else {
        Direction::LowerIsDetected
    }
}

/// Watermarked image for `host`; `rng` feeds Gaussian Shading's sampler.
pub fn watermark_image(channel: &ToyChannel, key: &WatermarkKey, host: &Host, rng: &mut Rng) -> Result<Tensor3> {
    match key {
        WatermarkKey::TreeRing(k) => {
            let z = match host {
                Host::Latent(z) => z.clone(),
                Host::Image(x) => standardize_latent(&channel.invert_pixels(x)?),
            };
            channel.render(&treering_embed(k, &z)?)
        }
        WatermarkKey::GaussianShading(k) => {
            let z = gaussianshading_sample(k, channel.latent_shape(), rng)?;
            channel.render(&z)
        }
        WatermarkKey::SpreadSpectrum(k) => {
            let x = match host {
                Host::Latent(z) => channel.render(z)?,
                Host::Image(x) => x.clone(),
            };
            spreadspectrum_embed(k, &x)
        }
    }
}

/// Raw statistic for `img` plus the inverted latent when the scheme needs one.
pub fn score_image(channel: &ToyChannel, key: &WatermarkKey, img: &Tensor3) -> Result<DetectionResult> {
    match key {
        WatermarkKey::TreeRing(k) => {
            let z = channel.invert_pixels(img)?;
            Ok(DetectionResult {
                scheme: Scheme::TreeRing,
                statistic: treering_statistic(k, &z)?,
                p_value: None,
                decoded_bits: None,
            })
        }
        WatermarkKey::GaussianShading(k) => gaussianshading_decode(k, &channel.invert_pixels(img)?),
        WatermarkKey::SpreadSpectrum(k) => spreadspectrum_decode(k, img),
    }
}

/// Null statistics for one scheme with the resulting decision threshold.
#[derive(Debug, Clone)]
pub struct NullModel {
    pub scheme: Scheme,
    pub scores: Vec<f64>,
    pub threshold: f64,
    pub undersampled: bool,
}

impl NullModel {
    pub fn new(scheme: Scheme, scores: Vec<f64>, fpr: f64) -> Result<Self> {
        let (threshold, undersampled) = calibrate(&scores, direction(scheme), fpr)?;
        Ok(Self {
            scheme,
            scores,
            threshold,
            undersampled,
        })
    }

    /// Adds the empirical p-value (Tree-Ring) and returns whether the score
    /// lies beyond the calibrated threshold.
    pub fn decide(&self, result: &mut DetectionResult) -> Result<bool> {
        if result.scheme != self.scheme {
            return Err(Error::Key(format!(
                "{} null model applied to a {} result",
                self.scheme, result.scheme
            )));
        }
        if self.scheme == Scheme::TreeRing {
            result.p_value = Some(empirical_p_value(result.statistic, &self.scores)?);
        }
        Ok(direction(self.scheme).beyond(result.statistic, self.threshold))
    }
}
