//! Run configuration (JSON).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::ChannelConfig;
use crate::error::{Error, Result};
use crate::io;
use crate::metrics::DEFAULT_FPR;
use crate::perturb::Family;
use crate::watermark::Scheme;

/// Source of the host images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Dataset {
    /// Seeded gradients, shapes and textures at the channel's image size.
    #[serde(alias = "procedural")]
    Synthetic { count: usize },
    /// Channel renders of seeded Gaussian initial latents.
    Latent { count: usize },
    /// Every `*.png` in a directory, resized to the channel's image size.
    Directory { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub family: Family,
    pub strengths: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KeyConfig {
    /// Base seed for generated keys; each scheme derives its own.
    pub seed: u64,
    /// Keyfiles overriding generation, per scheme.
    pub files: BTreeMap<Scheme, PathBuf>,
}

impl Default for KeyConfig {
    fn default() -> Self {
        Self {
            seed: 0x6B65_7973,
            files: BTreeMap::new(),
        }
    }
}

fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}
fn default_null_count() -> usize {
    200
}
fn default_fpr() -> f64 {
    DEFAULT_FPR
}
fn default_true() -> bool {
    true
}
fn default_schemes() -> Vec<Scheme> {
    Scheme::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: Dataset,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<Scheme>,
    #[serde(default)]
    pub sweeps: Vec<Sweep>,
    /// Perturbation seeds; every spec is applied once per seed.
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Unwatermarked channel outputs used to calibrate p-values and thresholds.
    #[serde(default = "default_null_count")]
    pub null_count: usize,
    pub output_dir: PathBuf,
    /// Seed for dataset latents, procedural images and null latents.
    #[serde(default)]
    pub data_seed: u64,
    #[serde(default)]
    pub channel: ChannelConfig,
    #[serde(default)]
    pub keys: KeyConfig,
    /// Provider bundle containing `manifest.json`.
    #[serde(default)]
    pub manifest_dir: Option<PathBuf>,
    /// Emit unperturbed rows (family `none`).
    #[serde(default = "default_true")]
    pub include_unperturbed: bool,
    #[serde(default = "default_fpr")]
    pub fpr: f64,
    #[serde(default)]
    pub threads: Option<usize>,
}

impl RunConfig {
    /// Minimal config over `count` synthetic images with every scheme.
    pub fn synthetic(count: usize, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            dataset: Dataset::Synthetic { count },
            schemes: default_schemes(),
            sweeps: Vec::new(),
            seeds: default_seeds(),
            null_count: default_null_count(),
            output_dir: output_dir.into(),
            data_seed: 0,
            channel: ChannelConfig::default(),
            keys: KeyConfig::default(),
            manifest_dir: None,
            include_unperturbed: true,
            fpr: DEFAULT_FPR,
            threads: None,
        }
    }

    /// Reads a config, resolving relative paths against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg: RunConfig = io::json_read(path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        if let Dataset::Directory { path } = &mut self.dataset {
            fix(path);
        }
        if let Some(m) = &mut self.manifest_dir {
            fix(m);
        }
        for p in self.keys.files.values_mut() {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if self.schemes.is_empty() {
            return bad("config lists no schemes".into());
        }
        let mut seen = self.schemes.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.schemes.len() {
            return bad("duplicate scheme in config".into());
        }
        if self.seeds.is_empty() {
            return bad("config lists no seeds".into());
        }
        if self.null_count == 0 {
            return bad("null_count must be positive".into());
        }
        if !(self.fpr > 0.0 && self.fpr < 1.0) {
            return bad(format!("fpr {} outside (0, 1)", self.fpr));
        }
        if self.threads == Some(0) {
            return bad("threads must be positive".into());
        }
        match &self.dataset {
            Dataset::Synthetic { count } | Dataset::Latent { count } if *count == 0 => {
                return bad("dataset count must be positive".into())
            }
            Dataset::Directory { path } if !path.is_dir() => {
                return Err(Error::io(path, std::io::Error::from(std::io::ErrorKind::NotFound)))
            }
            _ => {}
        }
        for sweep in &self.sweeps {
            if sweep.strengths.is_empty() {
                return bad(format!("sweep {} has no strengths", sweep.family));
            }
            for &s in &sweep.strengths {
                sweep.family.validate_strength(s)?;
            }
        }
        for (scheme, path) in &self.keys.files {
            if !path.is_file() {
                return Err(Error::io(path, std::io::Error::from(std::io::ErrorKind::NotFound)));
            }
            if !self.schemes.contains(scheme) {
                return bad(format!("keyfile given for unused scheme {scheme}"));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_json_gets_defaults() {
        let cfg: RunConfig =
            serde_json::from_str(r#"{"dataset": {"synthetic": {"count": 4}}, "output_dir": "out"}"#).unwrap();
        assert_eq!(cfg.seeds, vec![0, 1, 2, 3, 4]);
        assert_eq!(cfg.null_count, 200);
        assert_eq!(cfg.schemes.len(), 3);
        assert_eq!(cfg.channel, ChannelConfig::default());
        cfg.validate().unwrap();
        assert_eq!(cfg.hash().len(), 64);
    }

    #[test]
    fn rejects_bad_values() {
        let mut cfg = RunConfig::synthetic(2, "out");
        cfg.sweeps.push(Sweep {
            family: Family::Impulse,
            strengths: vec![1.5],
        });
        assert!(matches!(cfg.validate(), Err(Error::Param(_))));
        let typo = r#"{"dataset": {"synthetic": {"count": 4}}, "output_dir": "o", "null_cnt": 3}"#;
        assert!(serde_json::from_str::<RunConfig>(typo).is_err());
        let mut cfg = RunConfig::synthetic(2, "out");
        cfg.keys.files.insert(Scheme::TreeRing, "/no/such/key.json".into());
        assert!(cfg.validate().unwrap_err().is_io());
    }
}
