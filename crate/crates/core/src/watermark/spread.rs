//! Additive spread-spectrum surrogate for a decoder-embedded 48-bit signature.
//!
//! Template `j` assigns `±1` to every sample of the image from bit `j` of a
//! keyed hash of the sample index, then has its mean removed. Embedding adds
//! `α·Σ_j (2b_j − 1)·T_j`; decoding takes the sign of `⟨x, T_j⟩`.

use serde::{Deserialize, Serialize};

use super::{bits_from_hex, bits_to_hex, DetectionResult, Scheme};
use crate::error::{Error, Result};
use crate::rng::{mix64, Rng};
use crate::tensor::Tensor3;

pub const DEFAULT_SIGNATURE_BITS: usize = 48;
pub const DEFAULT_AMPLITUDE: f64 = 2.0 / 255.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpreadSpectrumKey {
    #[serde(serialize_with = "ser_bits", deserialize_with = "de_bits")]
    pub signature: Vec<bool>,
    pub template_seed: u64,
    pub amplitude: f64,
}

impl SpreadSpectrumKey {
    pub fn generate(seed: u64) -> Self {
        let mut rng = Rng::new(seed, 0x55);
        Self {
            signature: (0..DEFAULT_SIGNATURE_BITS).map(|_| rng.below(2) == 1).collect(),
            template_seed: rand::RngCore::next_u64(&mut rng),
            amplitude: DEFAULT_AMPLITUDE,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.signature.is_empty() || self.signature.len() > 64 {
            return Err(Error::Key(format!(
                "signature length {} outside 1..=64",
                self.signature.len()
            )));
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::Key(format!("amplitude {} must be ≥ 0", self.amplitude)));
        }
        Ok(())
    }

    /// Template sign bits of sample `i`; bit `j` set means `T_j(i) = +1`.
    #[inline]
    pub fn template_bits(&self, i: usize) -> u64 {
        mix64(self.template_seed ^ mix64(i as u64))
    }

    /// Mean of each `±1` template over `n` samples.
    pub fn template_means(&self, n: usize) -> Vec<f64> {
        let k = self.signature.len();
        let used = self.used_mask();
        let mut plus = vec![0u64; k];
        for i in 0..n {
            let mut bits = self.template_bits(i) & used;
            while bits != 0 {
                plus[bits.trailing_zeros() as usize] += 1;
                bits &= bits - 1;
            }
        }
        plus.iter().map(|&p| (2.0 * p as f64 - n as f64) / n as f64).collect()
    }

    fn used_mask(&self) -> u64 {
        match self.signature.len() {
            64 => u64::MAX,
            k => (1u64 << k) - 1,
        }
    }

    fn signature_word(&self) -> u64 {
        self.signature
            .iter()
            .enumerate()
            .fold(0, |acc, (j, &b)| acc | ((b as u64) << j))
    }
}

fn check_image(img: &Tensor3) -> Result<()> {
    if img.channels() != 3 || img.is_empty() {
        return Err(Error::Shape(format!(
            "spread-spectrum needs a non-empty 3-channel image, got {:?}",
            img.shape()
        )));
    }
    Ok(())
}

pub fn spreadspectrum_embed(key: &SpreadSpectrumKey, img: &Tensor3) -> Result<Tensor3> {
    key.validate()?;
    check_image(img)?;
    if key.amplitude == 0.0 {
        return Ok(img.clone());
    }
    let k = key.signature.len() as u32;
    let used = key.used_mask();
    let word = key.signature_word();
    let means = key.template_means(img.len());
    // Σ_j s_j·m_j, subtracted so every template stays zero-mean
    let bias: f64 = key
        .signature
        .iter()
        .zip(&means)
        .map(|(&b, m)| if b { *m } else { -*m })
        .sum();
    let mut out = img.clone();
    for (i, v) in out.data_mut().iter_mut().enumerate() {
        let disagree = ((key.template_bits(i) ^ word) & used).count_ones();
        let sum = k as f64 - 2.0 * disagree as f64;
        *v = (*v as f64 + key.amplitude * (sum - bias)).clamp(0.0, 1.0) as f32;
    }
    Ok(out)
}

/// Raw correlations `⟨x, T_j − m_j⟩`.
pub fn spreadspectrum_correlations(key: &SpreadSpectrumKey, img: &Tensor3) -> Result<Vec<f64>> {
    key.validate()?;
    check_image(img)?;
    let k = key.signature.len();
    let used = key.used_mask();
    // with t = 2b − 1: ⟨x, t_j⟩ = 2·S_j − Σx and m_j = (2·P_j − n)/n, where
    // S_j and P_j are the sum and count over samples whose bit j is set
    let mut set_sum = vec![0.0f64; k];
    let mut set_count = vec![0u64; k];
    let mut total = 0.0f64;
    for (i, &v) in img.data().iter().enumerate() {
        let v = v as f64;
        total += v;
        let mut bits = key.template_bits(i) & used;
        while bits != 0 {
            let j = bits.trailing_zeros() as usize;
            set_sum[j] += v;
            set_count[j] += 1;
            bits &= bits - 1;
        }
    }
    let n = img.len() as f64;
    Ok(set_sum
        .iter()
        .zip(&set_count)
        .map(|(&s, &p)| {
            let mean = (2.0 * p as f64 - n) / n;
            2.0 * s - total - mean * total
        })
        .collect())
}

pub fn spreadspectrum_decode(key: &SpreadSpectrumKey, img: &Tensor3) -> Result<DetectionResult> {
    let decoded: Vec<bool> = spreadspectrum_correlations(key, img)?
        .into_iter()
        .map(|c| c > 0.0)
        .collect();
    Ok(DetectionResult {
        scheme: Scheme::SpreadSpectrum,
        statistic: super::bit_accuracy(&decoded, &key.signature),
        p_value: None,
        decoded_bits: Some(decoded),
    })
}

fn ser_bits<S: serde::Serializer>(bits: &[bool], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&bits_to_hex(bits))
}

fn de_bits<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Vec<bool>, D::Error> {
    let s = String::deserialize(d)?;
    bits_from_hex(&s).map_err(serde::de::Error::custom)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_amplitude_is_identity() {
        let mut key = SpreadSpectrumKey::generate(1);
        key.amplitude = 0.0;
        let img = Tensor3::from_fn(3, 16, 16, |c, y, x| ((c + y * x) % 7) as f32 / 7.0);
        assert_eq!(spreadspectrum_embed(&key, &img).unwrap(), img);
    }

    #[test]
    fn templates_are_zero_mean_and_nearly_orthogonal() {
        let key = SpreadSpectrumKey::generate(2);
        let n = 3 * 512 * 512;
        let means = key.template_means(n);
        let k = key.signature.len();
        let mut dots = vec![vec![0.0f64; k]; k];
        for i in 0..n {
            let b = key.template_bits(i);
            let t: Vec<f64> = (0..k)
                .map(|j| if (b >> j) & 1 == 1 { 1.0 } else { -1.0 } - means[j])
                .collect();
            for a in 0..k {
                for c in a + 1..k {
                    dots[a][c] += t[a] * t[c];
                }
            }
        }
        for a in 0..k {
            for c in a + 1..k {
                let corr = dots[a][c] / n as f64;
                assert!(corr.abs() < 0.05, "templates {a},{c}: {corr}");
            }
        }
    }

    #[test]
    fn mid_gray_round_trip() {
        let key = SpreadSpectrumKey::generate(3);
        let img = Tensor3::filled(3, 512, 512, 0.5);
        let marked = spreadspectrum_embed(&key, &img).unwrap();
        let r = spreadspectrum_decode(&key, &marked).unwrap();
        assert_eq!(r.statistic, 1.0);
        assert!(r.p_value.is_none());
    }

    #[test]
    fn rejects_non_rgb() {
        let key = SpreadSpectrumKey::generate(3);
        assert!(matches!(
            spreadspectrum_decode(&key, &Tensor3::zeros(4, 8, 8)),
            Err(Error::Shape(_))
        ));
    }
}
