//! Cipher-keyed half-Gaussian latent sampling.
//!
//! The message is replicated with a stride of `message_bits` (replica `r` of
//! bit `b` sits at flat index `b + message_bits·r`), XORed with a ChaCha20
//! keystream, and each resulting bit picks the sign of one latent element.

use chacha20::cipher::{KeyIvInit, StreamCipher};
use chacha20::ChaCha20;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{bits_from_hex, bits_to_hex, DetectionResult, Scheme};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor3;

pub const DEFAULT_MESSAGE_BITS: usize = 256;
pub const DEFAULT_REPLICATION: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianShadingKey {
    #[serde(with = "hex_array")]
    pub cipher_key: [u8; 32],
    #[serde(with = "hex_array")]
    pub nonce: [u8; 12],
    #[serde(serialize_with = "ser_bits", deserialize_with = "de_bits")]
    pub message: Vec<bool>,
    pub replication: usize,
}

impl GaussianShadingKey {
    pub fn generate(seed: u64) -> Self {
        let mut rng = Rng::new(seed, 0x6A55);
        let mut cipher_key = [0u8; 32];
        let mut nonce = [0u8; 12];
        rand::RngCore::fill_bytes(&mut rng, &mut cipher_key);
        rand::RngCore::fill_bytes(&mut rng, &mut nonce);
        let message = (0..DEFAULT_MESSAGE_BITS).map(|_| rng.below(2) == 1).collect();
        Self {
            cipher_key,
            nonce,
            message,
            replication: DEFAULT_REPLICATION,
        }
    }

    pub fn capacity(&self) -> usize {
        self.message.len() * self.replication
    }

    fn check_capacity(&self, elements: usize) -> Result<()> {
        if self.message.is_empty() || self.replication == 0 {
            return Err(Error::Key("empty message or zero replication".into()));
        }
        if self.capacity() != elements {
            return Err(Error::Capacity(format!(
                "{} bits × {} replicas = {} ≠ {elements} latent elements",
                self.message.len(),
                self.replication,
                self.capacity()
            )));
        }
        Ok(())
    }

    /// First `n` keystream bits, little-endian within each byte.
    pub fn keystream(&self, n: usize) -> Vec<bool> {
        let mut bytes = vec![0u8; n.div_ceil(8)];
        let mut cipher = ChaCha20::new(&self.cipher_key.into(), &self.nonce.into());
        cipher.apply_keystream(&mut bytes);
        (0..n).map(|i| (bytes[i / 8] >> (i % 8)) & 1 == 1).collect()
    }

    /// Encrypted, replicated sign pattern `s`.
    pub fn sign_bits(&self) -> Vec<bool> {
        let m = self.message.len();
        self.keystream(self.capacity())
            .into_iter()
            .enumerate()
            .map(|(i, k)| k ^ self.message[i % m])
            .collect()
    }
}

/// Draws `z_i = Φ⁻¹((s_i + u_i)/2)` with `u_i` uniform on `(0, 1)`.
pub fn gaussianshading_sample(
    key: &GaussianShadingKey,
    shape: (usize, usize, usize),
    rng: &mut Rng,
) -> Result<Tensor3> {
    let n = shape.0 * shape.1 * shape.2;
    key.check_capacity(n)?;
    let normal = Normal::standard();
    let data = key
        .sign_bits()
        .into_iter()
        .map(|s| {
            let u = rng.open01();
            normal.inverse_cdf((s as u8 as f64 + u) / 2.0) as f32
        })
        .collect();
    Tensor3::from_vec(shape.0, shape.1, shape.2, data)
}

/// Per-element recovered sign bits with the keystream removed.
pub fn recover_raw_bits(key: &GaussianShadingKey, z_hat: &Tensor3) -> Result<Vec<bool>> {
    key.check_capacity(z_hat.len())
        .map_err(|e| Error::Shape(e.to_string()))?;
    Ok(z_hat
        .data()
        .iter()
        .zip(key.keystream(z_hat.len()))
        .map(|(&v, k)| (v > 0.0) ^ k)
        .collect())
}

pub fn gaussianshading_decode(key: &GaussianShadingKey, z_hat: &Tensor3) -> Result<DetectionResult> {
    let raw = recover_raw_bits(key, z_hat)?;
    let m = key.message.len();
    let mut ones = vec![0usize; m];
    for (i, b) in raw.iter().enumerate() {
        if *b {
            ones[i % m] += 1;
        }
    }
    // ties go to 0
    let decoded: Vec<bool> = ones.iter().map(|&n| 2 * n > key.replication).collect();
    Ok(DetectionResult {
        scheme: Scheme::GaussianShading,
        statistic: super::bit_accuracy(&decoded, &key.message),
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

mod hex_array {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer, const N: usize>(v: &[u8; N], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>, const N: usize>(d: D) -> Result<[u8; N], D::Error> {
        let s = String::deserialize(d)?;
        let bytes = hex::decode(&s).map_err(serde::de::Error::custom)?;
        bytes
            .try_into()
            .map_err(|b: Vec<u8>| serde::de::Error::custom(format!("expected {N} bytes, got {}", b.len())))
    }
}
