//! Provider bundles: `manifest.json` plus the files it references.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::mask::BinaryMask;
use crate::metrics::TripletSet;
use crate::tensor::Tensor3;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Texture,
    Intra,
    Inter,
    Style,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Texture => "texture",
            Variant::Intra => "intra",
            Variant::Inter => "inter",
            Variant::Style => "style",
        }
    }

    /// Local edits must leave pixels outside their mask untouched.
    pub fn is_local(self) -> bool {
        !matches!(self, Variant::Style)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A record exactly as listed in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub variant: Variant,
    pub original: PathBuf,
    pub edited: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emb_original: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emb_edited: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub triplets_original: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub triplets_edited: Option<PathBuf>,
    /// Provider-specific extras (editor family, class names, ...), kept verbatim.
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub records: Vec<ManifestEntry>,
}

impl Manifest {
    /// Parses and schema-checks a manifest document.
    pub fn parse(text: &str) -> Result<Self> {
        let doc: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Validation(format!("manifest is not JSON: {e}")))?;
        let obj = doc
            .as_object()
            .ok_or_else(|| Error::Validation("manifest must be a JSON object".into()))?;
        match obj.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == MANIFEST_VERSION as u64 => {}
            Some(v) => return Err(Error::Validation(format!("field `version`: unsupported version {v}"))),
            None => return Err(Error::Validation("field `version`: missing or not an integer".into())),
        }
        let list = obj
            .get("records")
            .and_then(|r| r.as_array())
            .ok_or_else(|| Error::Validation("field `records`: missing or not an array".into()))?;
        let mut records = Vec::with_capacity(list.len());
        for (i, raw) in list.iter().enumerate() {
            let id = raw
                .get("id")
                .and_then(|v| v.as_str())
                .map(str::to_owned)
                .unwrap_or_else(|| format!("#{i}"));
            let entry: ManifestEntry = serde_json::from_value(raw.clone())
                .map_err(|e| Error::Validation(format!("record {id:?}: {e}")))?;
            if entry.id.trim().is_empty() {
                return Err(Error::Validation(format!("record #{i}: field `id` is empty")));
            }
            records.push(entry);
        }
        Ok(Manifest {
            version: MANIFEST_VERSION,
            records,
        })
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let path = dir.as_ref().join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Self::parse(&text)
    }

    /// Writes `manifest.json` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        io::json_write(self, dir.as_ref().join(MANIFEST_FILE))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Issue {
    pub id: String,
    pub field: String,
    pub severity: Severity,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{level}: record {:?}, field `{}`: {}", self.id, self.field, self.message)
    }
}

/// A record whose files loaded and passed the structural checks.
#[derive(Debug, Clone)]
pub struct SemanticRecord {
    pub id: String,
    pub variant: Variant,
    pub original: Tensor3,
    pub edited: Tensor3,
    pub mask: Option<BinaryMask>,
    pub prompt: Option<String>,
    pub emb_original: Option<Vec<f32>>,
    pub emb_edited: Option<Vec<f32>>,
    pub triplets_original: Option<TripletSet>,
    pub triplets_edited: Option<TripletSet>,
    /// Out-of-mask preservation for local variants; `None` when not checkable.
    pub locality_ok: Option<bool>,
}

#[derive(Debug, Clone, Default)]
pub struct ManifestReport {
    pub records: Vec<SemanticRecord>,
    pub issues: Vec<Issue>,
    /// Ids listed in the manifest but dropped because of an error.
    pub skipped: Vec<String>,
}

impl ManifestReport {
    pub fn error_count(&self) -> usize {
        self.issues.iter().filter(|i| i.severity == Severity::Error).count()
    }
    pub fn warning_count(&self) -> usize {
        self.issues.len() - self.error_count()
    }
}

/// Pixels that differ between `a` and `b` outside `mask`.
pub fn out_of_mask_changes(a: &Tensor3, b: &Tensor3, mask: &BinaryMask) -> usize {
    let (c, h, w) = a.shape();
    let mut n = 0;
    for y in 0..h {
        for x in 0..w {
            if !mask.get(y, x) && (0..c).any(|ch| a.get(ch, y, x).to_bits() != b.get(ch, y, x).to_bits()) {
                n += 1;
            }
        }
    }
    n
}

struct Checker<'a> {
    dir: &'a Path,
    id: String,
    issues: Vec<Issue>,
}

impl Checker<'_> {
    fn push(&mut self, field: &str, severity: Severity, message: String) {
        self.issues.push(Issue {
            id: self.id.clone(),
            field: field.into(),
            severity,
            message,
        });
    }

    fn load<T>(&mut self, field: &str, rel: &Path, f: impl FnOnce(PathBuf) -> Result<T>) -> Option<T> {
        match f(self.dir.join(rel)) {
            Ok(v) => Some(v),
            Err(e) => {
                self.push(field, Severity::Error, e.to_string());
                None
            }
        }
    }

    fn load_opt<T>(&mut self, field: &str, rel: &Option<PathBuf>, f: impl FnOnce(PathBuf) -> Result<T>) -> Option<Option<T>> {
        match rel {
            None => Some(None),
            Some(p) => self.load(field, p, f).map(Some),
        }
    }
}

fn check_entry(dir: &Path, e: &ManifestEntry) -> (Option<SemanticRecord>, Vec<Issue>) {
    let mut ck = Checker {
        dir,
        id: e.id.clone(),
        issues: Vec::new(),
    };
    let original = ck.load("original", &e.original, io::image_read);
    let edited = ck.load("edited", &e.edited, io::image_read);
    let mask = ck.load_opt("mask", &e.mask, io::mask_read);
    let emb_original = ck.load_opt("emb_original", &e.emb_original, io::vector_read);
    let emb_edited = ck.load_opt("emb_edited", &e.emb_edited, io::vector_read);
    let triplets_original = ck.load_opt("triplets_original", &e.triplets_original, io::json_read::<TripletSet>);
    let triplets_edited = ck.load_opt("triplets_edited", &e.triplets_edited, io::json_read::<TripletSet>);
    for key in e.extra.keys() {
        if key != "metadata" {
            ck.push(key, Severity::Warning, "unrecognized field kept as metadata".into());
        }
    }
    let (
        Some(original),
        Some(edited),
        Some(mask),
        Some(emb_original),
        Some(emb_edited),
        Some(triplets_original),
        Some(triplets_edited),
    ) = (original, edited, mask, emb_original, emb_edited, triplets_original, triplets_edited)
    else {
        return (None, ck.issues);
    };

    if original.shape() != edited.shape() {
        ck.push(
            "edited",
            Severity::Error,
            format!("shape {:?} differs from original {:?}", edited.shape(), original.shape()),
        );
        return (None, ck.issues);
    }
    if let Some(m) = &mask {
        if (m.height(), m.width()) != (original.height(), original.width()) {
            ck.push(
                "mask",
                Severity::Error,
                format!(
                    "{}×{} mask for a {}×{} image",
                    m.height(),
                    m.width(),
                    original.height(),
                    original.width()
                ),
            );
            return (None, ck.issues);
        }
    }
    if let (Some(a), Some(b)) = (&emb_original, &emb_edited) {
        if a.len() != b.len() {
            ck.push(
                "emb_edited",
                Severity::Error,
                format!("length {} differs from emb_original length {}", b.len(), a.len()),
            );
            return (None, ck.issues);
        }
    }
    let locality_ok = match (&mask, e.variant.is_local()) {
        (Some(m), true) => {
            let changed = out_of_mask_changes(&original, &edited, m);
            if changed > 0 {
                ck.push(
                    "edited",
                    Severity::Warning,
                    format!("{changed} pixels differ outside the mask of a local {} edit", e.variant),
                );
            }
            Some(changed == 0)
        }
        (None, true) => {
            ck.push("mask", Severity::Warning, "local edit without mask; locality unchecked".into());
            None
        }
        _ => None,
    };
    let record = SemanticRecord {
        id: e.id.clone(),
        variant: e.variant,
        original,
        edited,
        mask,
        prompt: e.prompt.clone(),
        emb_original,
        emb_edited,
        triplets_original,
        triplets_edited,
        locality_ok,
    };
    (Some(record), ck.issues)
}

/// Loads and checks every record in `dir`. Records with errors are skipped
/// and reported; manifest-level problems fail the whole call.
pub fn ingest_semantic_manifest(dir: impl AsRef<Path>) -> Result<ManifestReport> {
    let dir = dir.as_ref();
    let manifest = Manifest::load(dir)?;
    let mut report = ManifestReport::default();
    let mut seen = BTreeSet::new();
    for entry in &manifest.records {
        if !seen.insert(entry.id.clone()) {
            report.issues.push(Issue {
                id: entry.id.clone(),
                field: "id".into(),
                severity: Severity::Error,
                message: "duplicate id".into(),
            });
            report.skipped.push(entry.id.clone());
            continue;
        }
        let (record, issues) = check_entry(dir, entry);
        for i in &issues {
            warn!("{i}");
        }
        report.issues.extend(issues);
        match record {
            Some(r) => report.records.push(r),
            None => report.skipped.push(entry.id.clone()),
        }
    }
    Ok(report)
}
