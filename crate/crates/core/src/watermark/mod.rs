//! Watermark schemes: Tree-Ring, Gaussian Shading and a spread-spectrum
//! stand-in for decoder-embedded signatures.

mod shading;
mod spread;
mod treering;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

pub use shading::{
    gaussianshading_decode, gaussianshading_sample, recover_raw_bits, GaussianShadingKey,
    DEFAULT_MESSAGE_BITS, DEFAULT_REPLICATION,
};
pub use spread::{
    spreadspectrum_correlations, spreadspectrum_decode, spreadspectrum_embed, SpreadSpectrumKey,
    DEFAULT_AMPLITUDE, DEFAULT_SIGNATURE_BITS,
};
pub use treering::{
    empirical_p_value, treering_detect, treering_embed, treering_statistic, TreeRingKey,
    DEFAULT_RADII, DEFAULT_SIGMA,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    TreeRing,
    GaussianShading,
    SpreadSpectrum,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::TreeRing, Scheme::GaussianShading, Scheme::SpreadSpectrum];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::TreeRing => "tree-ring",
            Scheme::GaussianShading => "gaussian-shading",
            Scheme::SpreadSpectrum => "spread-spectrum",
        }
    }

    /// Whether a larger statistic means "more watermarked".
    pub fn higher_is_detected(self) -> bool {
        !matches!(self, Scheme::TreeRing)
    }

    /// Whether detection runs on the inverted latent rather than on pixels.
    pub fn is_latent(self) -> bool {
        !matches!(self, Scheme::SpreadSpectrum)
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::Param(format!("unknown scheme {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub scheme: Scheme,
    /// Tree-Ring spectral distance, otherwise bit accuracy in `[0, 1]`.
    pub statistic: f64,
    /// Present exactly for Tree-Ring.
    pub p_value: Option<f64>,
    pub decoded_bits: Option<Vec<bool>>,
}

/// Secret material for one scheme, as stored in a keyfile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "kebab-case")]
pub enum WatermarkKey {
    TreeRing(TreeRingKey),
    GaussianShading(GaussianShadingKey),
    SpreadSpectrum(SpreadSpectrumKey),
}

impl WatermarkKey {
    pub fn generate(scheme: Scheme, seed: u64) -> Self {
        match scheme {
            Scheme::TreeRing => WatermarkKey::TreeRing(TreeRingKey::with_defaults(seed)),
            Scheme::GaussianShading => WatermarkKey::GaussianShading(GaussianShadingKey::generate(seed)),
            Scheme::SpreadSpectrum => WatermarkKey::SpreadSpectrum(SpreadSpectrumKey::generate(seed)),
        }
    }

    /// Key sized for a latent of `shape`: Tree-Ring radii beyond the Nyquist
    /// ring are dropped and Gaussian Shading replication fills the latent.
    pub fn generate_for_latent(scheme: Scheme, seed: u64, shape: (usize, usize, usize)) -> Result<Self> {
        let (c, h, w) = shape;
        match scheme {
            Scheme::TreeRing => {
                let limit = (h.min(w) / 2).saturating_sub(1) as u32;
                let radii: Vec<u32> = DEFAULT_RADII.filter(|&r| r <= limit).collect();
                if radii.is_empty() {
                    return Err(Error::Key(format!("{h}×{w} latent too small for any ring")));
                }
                Ok(WatermarkKey::TreeRing(TreeRingKey::generate(seed, radii, 0, DEFAULT_SIGMA)))
            }
            Scheme::GaussianShading => {
                let n = c * h * w;
                if n == 0 || n % DEFAULT_MESSAGE_BITS != 0 {
                    return Err(Error::Capacity(format!(
                        "{n} latent elements not a multiple of {DEFAULT_MESSAGE_BITS} message bits"
                    )));
                }
                let mut key = GaussianShadingKey::generate(seed);
                key.replication = n / DEFAULT_MESSAGE_BITS;
                Ok(WatermarkKey::GaussianShading(key))
            }
            Scheme::SpreadSpectrum => Ok(Self::generate(scheme, seed)),
        }
    }

    /// Checks the key against the latent geometry it will be used with.
    pub fn validate_for_latent(&self, shape: (usize, usize, usize)) -> Result<()> {
        match self {
            WatermarkKey::TreeRing(k) => k.validate(shape),
            WatermarkKey::GaussianShading(k) => {
                let n = shape.0 * shape.1 * shape.2;
                if k.message.is_empty() || k.capacity() != n {
                    return Err(Error::Capacity(format!(
                        "key capacity {} ≠ {n} latent elements",
                        k.capacity()
                    )));
                }
                Ok(())
            }
            WatermarkKey::SpreadSpectrum(k) => {
                if k.signature.is_empty() {
                    return Err(Error::Key("empty signature".into()));
                }
                Ok(())
            }
        }
    }

    pub fn scheme(&self) -> Scheme {
        match self {
            WatermarkKey::TreeRing(_) => Scheme::TreeRing,
            WatermarkKey::GaussianShading(_) => Scheme::GaussianShading,
            WatermarkKey::SpreadSpectrum(_) => Scheme::SpreadSpectrum,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        io::json_read(path)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        io::json_write(self, path)
    }
}

/// Fraction of positions where `decoded` matches `truth`.
pub fn bit_accuracy(decoded: &[bool], truth: &[bool]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let hits = decoded.iter().zip(truth).filter(|(a, b)| a == b).count();
    hits as f64 / truth.len() as f64
}

/// Packs bits MSB-first into hex; the bit count must be a multiple of 4.
pub fn bits_to_hex(bits: &[bool]) -> String {
    bits.chunks(4)
        .map(|nib| {
            let v = nib.iter().fold(0u32, |acc, &b| (acc << 1) | b as u32) << (4 - nib.len());
            char::from_digit(v, 16).unwrap()
        })
        .collect()
}

pub fn bits_from_hex(s: &str) -> std::result::Result<Vec<bool>, String> {
    let mut out = Vec::with_capacity(4 * s.len());
    for ch in s.chars() {
        let v = ch.to_digit(16).ok_or_else(|| format!("invalid hex digit {ch:?}"))?;
        out.extend((0..4).rev().map(|i| (v >> i) & 1 == 1));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex_bits_round_trip() {
        let bits: Vec<bool> = (0..48).map(|i| (i * 7) % 3 == 0).collect();
        assert_eq!(bits_from_hex(&bits_to_hex(&bits)).unwrap(), bits);
        assert_eq!(bits_to_hex(&[true, false, true, true]), "b");
        assert!(bits_from_hex("zz").is_err());
    }

    #[test]
    fn keyfile_round_trip_keeps_secrets_hex() {
        let dir = tempfile::tempdir().unwrap();
        for scheme in Scheme::ALL {
            let key = WatermarkKey::generate(scheme, 42);
            let path = dir.path().join(format!("{scheme}.json"));
            key.save(&path).unwrap();
            assert_eq!(WatermarkKey::load(&path).unwrap(), key);
            let text = std::fs::read_to_string(&path).unwrap();
            assert!(text.contains(&format!("\"scheme\": \"{scheme}\"")));
        }
        let text = serde_json::to_string(&WatermarkKey::generate(Scheme::GaussianShading, 1)).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["cipher_key"].as_str().unwrap().len(), 64);
        assert_eq!(v["nonce"].as_str().unwrap().len(), 24);
        assert_eq!(v["message"].as_str().unwrap().len(), 64);
    }

    #[test]
    fn latent_sized_keys() {
        let k = WatermarkKey::generate_for_latent(Scheme::GaussianShading, 3, (4, 16, 16)).unwrap();
        match &k {
            WatermarkKey::GaussianShading(g) => assert_eq!(g.replication, 4),
            _ => unreachable!(),
        }
        k.validate_for_latent((4, 16, 16)).unwrap();
        assert!(k.validate_for_latent((4, 64, 64)).is_err());
        let t = WatermarkKey::generate_for_latent(Scheme::TreeRing, 3, (4, 16, 16)).unwrap();
        match &t {
            WatermarkKey::TreeRing(r) => assert_eq!(r.radii, vec![2, 3, 4, 5, 6, 7]),
            _ => unreachable!(),
        }
        let d = WatermarkKey::generate_for_latent(Scheme::TreeRing, 3, (4, 64, 64)).unwrap();
        assert_eq!(d, WatermarkKey::generate(Scheme::TreeRing, 3));
        assert!(WatermarkKey::generate_for_latent(Scheme::GaussianShading, 3, (1, 3, 5)).is_err());
    }

    #[test]
    fn scheme_names_parse() {
        for s in Scheme::ALL {
            assert_eq!(s.as_str().parse::<Scheme>().unwrap(), s);
        }
        assert!("stable-signature".parse::<Scheme>().is_err());
    }
}
