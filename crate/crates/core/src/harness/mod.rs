//! Sweep orchestration: embed, perturb, invert, detect, score, aggregate.

pub mod config;
pub mod manifest;
pub mod pipeline;
pub mod records;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

pub use config::{Dataset, KeyConfig, RunConfig, Sweep};
pub use manifest::{ingest_semantic_manifest, Issue, Manifest, ManifestEntry, ManifestReport, SemanticRecord, Severity, Variant};
pub use pipeline::{score_image, watermark_image, Host, NullModel};
pub use records::{read_records, AggregateRow, EvalRecord, RECORD_COLUMNS};

use crate::channel::ToyChannel;
use crate::error::{Error, Result};
use crate::io::{self, write_atomic};
use crate::metrics::{caption_agreement, psnr, ssim, triplet_similarity};
use crate::perturb::{resize_bilinear, Family, PerturbationSpec};
use crate::rng::{label_hash, stream_id, Rng};
use crate::synthetic::procedural_image;
use crate::tensor::Tensor3;
use crate::watermark::{Scheme, WatermarkKey};

const TAG_HOST: u64 = 0x484F_5354;
const TAG_NULL: u64 = 0x4E55_4C4C;
const TAG_SAMPLE: u64 = 0x5341_4D50;
const TAG_PERTURB: u64 = 0x5045_5254;

pub const FAMILY_NONE: &str = "none";
pub const FAMILY_SEMANTIC: &str = "semantic";
pub const VARIANT_CLEAN: &str = "clean";
pub const VARIANT_BASELINE: &str = "baseline";

/// Key for `scheme` under the config: the keyfile if given, else derived from the key seed.
pub fn scheme_key(cfg: &RunConfig, channel: &ToyChannel, scheme: Scheme) -> Result<WatermarkKey> {
    let key = match cfg.keys.files.get(&scheme) {
        Some(path) => {
            let k = WatermarkKey::load(path)?;
            if k.scheme() != scheme {
                return Err(Error::Key(format!(
                    "{} holds a {} key, expected {scheme}",
                    path.display(),
                    k.scheme()
                )));
            }
            k
        }
        None => WatermarkKey::generate_for_latent(
            scheme,
            stream_id(&[cfg.keys.seed, label_hash(scheme.as_str())]),
            channel.latent_shape(),
        )?,
    };
    key.validate_for_latent(channel.latent_shape())?;
    Ok(key)
}

#[derive(Debug, Clone)]
enum HostSource {
    Synthetic(u64),
    Latent(u64),
    File(PathBuf),
}

fn host_sources(cfg: &RunConfig) -> Result<Vec<(String, HostSource)>> {
    Ok(match &cfg.dataset {
        Dataset::Synthetic { count } => (0..*count as u64)
            .map(|i| (format!("syn-{i:04}"), HostSource::Synthetic(i)))
            .collect(),
        Dataset::Latent { count } => (0..*count as u64)
            .map(|i| (format!("lat-{i:04}"), HostSource::Latent(i)))
            .collect(),
        Dataset::Directory { path } => {
            let mut files: Vec<PathBuf> = std::fs::read_dir(path)
                .map_err(|e| Error::io(path, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
                .collect();
            files.sort();
            if files.is_empty() {
                return Err(Error::Validation(format!("no PNG files in {}", path.display())));
            }
            files
                .into_iter()
                .map(|p| {
                    let id = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                    (id, HostSource::File(p))
                })
                .collect()
        }
    })
}

/// Brings an arbitrary image to the channel's pixel geometry.
fn fit_to_channel(channel: &ToyChannel, img: &Tensor3) -> Tensor3 {
    let (_, h, w) = channel.image_shape();
    if (img.height(), img.width()) == (h, w) {
        img.clone()
    } else {
        resize_bilinear(img, h, w)
    }
}

fn load_host(cfg: &RunConfig, channel: &ToyChannel, src: &HostSource) -> Result<Host> {
    let (_, h, w) = channel.image_shape();
    Ok(match src {
        HostSource::Synthetic(i) => Host::Image(procedural_image(cfg.data_seed, *i, h, w)),
        HostSource::Latent(i) => {
            Host::Latent(channel.sample_latent(&mut Rng::derive(cfg.data_seed, &[TAG_HOST, *i])))
        }
        HostSource::File(p) => Host::Image(fit_to_channel(channel, &io::image_read(p)?)),
    })
}

/// Statistics of `null_count` unwatermarked channel outputs under every key.
pub fn null_scores(cfg: &RunConfig, channel: &ToyChannel, keys: &[WatermarkKey]) -> Result<Vec<Vec<f64>>> {
    let per_null: Vec<Vec<f64>> = (0..cfg.null_count as u64)
        .into_par_iter()
        .map(|j| {
            let z = channel.sample_latent(&mut Rng::derive(cfg.data_seed, &[TAG_NULL, j]));
            let img = channel.render(&z)?;
            keys.iter()
                .map(|k| Ok(score_image(channel, k, &img)?.statistic))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Ok((0..keys.len())
        .map(|s| per_null.iter().map(|row| row[s]).collect())
        .collect())
}

/// One attack in the sweep, without its seed.
#[derive(Debug, Clone, Copy)]
struct Cell {
    family: Option<Family>,
    strength: f64,
}

fn cells(cfg: &RunConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    if cfg.include_unperturbed {
        out.push(Cell {
            family: None,
            strength: 0.0,
        });
    }
    for sweep in &cfg.sweeps {
        for &strength in &sweep.strengths {
            out.push(Cell {
                family: Some(sweep.family),
                strength,
            });
        }
    }
    out
}

/// Perturbation seed shared by every scheme for the same image, cell and seed.
pub fn perturbation_seed(seed: u64, image_index: u64, family: Family, strength: f64) -> u64 {
    stream_id(&[TAG_PERTURB, seed, image_index, label_hash(family.as_str()), strength.to_bits()])
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    channel: &'a ToyChannel,
}

impl Ctx<'_> {
    #[allow(clippy::too_many_arguments)]
    fn record(
        &self,
        image_id: &str,
        key: &WatermarkKey,
        null: &NullModel,
        reference: &Tensor3,
        observed: &Tensor3,
        family: &str,
        variant: &str,
        strength: f64,
        seed: u64,
    ) -> Result<EvalRecord> {
        let mut det = score_image(self.channel, key, &fit_to_channel(self.channel, observed))?;
        let detected = null.decide(&mut det)?;
        Ok(EvalRecord {
            image_id: image_id.to_string(),
            scheme: key.scheme(),
            family: family.to_string(),
            variant: variant.to_string(),
            strength,
            seed,
            psnr_db: psnr(reference, observed)?,
            ssim: ssim(reference, observed)?,
            stat: det.statistic,
            p_value: det.p_value,
            detected,
            vlma: None,
            blipa: None,
            triplet_sim: None,
            mask_area: None,
        })
    }

    fn image_rows(
        &self,
        index: u64,
        image_id: &str,
        src: &HostSource,
        key: &WatermarkKey,
        null: &NullModel,
        cells: &[Cell],
    ) -> Result<Vec<EvalRecord>> {
        let host = load_host(self.cfg, self.channel, src)?;
        let mut rng = Rng::derive(self.cfg.data_seed, &[TAG_SAMPLE, index]);
        let marked = watermark_image(self.channel, key, &host, &mut rng)?;
        let mut rows = Vec::new();
        for cell in cells {
            match cell.family {
                None => {
                    let r = self.record(image_id, key, null, &marked, &marked, FAMILY_NONE, VARIANT_CLEAN, 0.0, 0)?;
                    for &seed in &self.cfg.seeds {
                        rows.push(EvalRecord { seed, ..r.clone() });
                    }
                }
                Some(family) => {
                    for &seed in &self.cfg.seeds {
                        let spec = PerturbationSpec::new(
                            family,
                            cell.strength,
                            perturbation_seed(seed, index, family, cell.strength),
                        )?;
                        let attacked = spec.apply(&marked)?;
                        let mut r = self.record(
                            image_id,
                            key,
                            null,
                            &marked,
                            &attacked,
                            family.as_str(),
                            VARIANT_BASELINE,
                            cell.strength,
                            seed,
                        )?;
                        if family == Family::MaskedRegen {
                            r.mask_area = Some(spec.region(marked.height(), marked.width())?.area_fraction());
                        }
                        rows.push(r);
                    }
                }
            }
        }
        Ok(rows)
    }

    fn semantic_row(&self, rec: &SemanticRecord, key: &WatermarkKey, null: &NullModel) -> Result<EvalRecord> {
        let mask_area = rec.mask.as_ref().map(|m| m.area_fraction());
        let mut r = self.record(
            &rec.id,
            key,
            null,
            &rec.original,
            &rec.edited,
            FAMILY_SEMANTIC,
            rec.variant.as_str(),
            mask_area.unwrap_or(1.0),
            0,
        )?;
        r.mask_area = mask_area;
        if let (Some(a), Some(b)) = (&rec.emb_original, &rec.emb_edited) {
            match caption_agreement(a, b) {
                Ok(v) => r.blipa = Some(v),
                Err(e) => warn!("record {:?}: caption agreement unavailable: {e}", rec.id),
            }
        }
        if let (Some(a), Some(b)) = (&rec.triplets_original, &rec.triplets_edited) {
            r.triplet_sim = Some(triplet_similarity(a, b));
        }
        Ok(r)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NullSummary {
    pub count: usize,
    pub threshold: f64,
    pub undersampled: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Skip {
    pub id: String,
    pub reason: String,
}

/// Everything a sweep computes, before it is written out.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<EvalRecord>,
    pub aggregates: Vec<AggregateRow>,
    pub nulls: BTreeMap<Scheme, NullModel>,
    pub skipped: Vec<Skip>,
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n);
    }
    let pool = b
        .build()
        .map_err(|e| Error::Param(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Computes all records and aggregates in memory.
pub fn run_records(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let channel = ToyChannel::new(cfg.channel.clone())?;
    let keys: Vec<WatermarkKey> = cfg
        .schemes
        .iter()
        .map(|&s| scheme_key(cfg, &channel, s))
        .collect::<Result<_>>()?;
    let hosts = host_sources(cfg)?;
    let report = match &cfg.manifest_dir {
        Some(dir) => Some(ingest_semantic_manifest(dir)?),
        None => None,
    };
    let cells = cells(cfg);
    with_pool(cfg.threads, || {
        let scores = null_scores(cfg, &channel, &keys)?;
        let mut nulls = BTreeMap::new();
        for (key, s) in keys.iter().zip(scores) {
            nulls.insert(key.scheme(), NullModel::new(key.scheme(), s, cfg.fpr)?);
        }
        info!("calibrated {} null images", cfg.null_count);
        let ctx = Ctx { cfg, channel: &channel };
        let groups: Vec<(usize, usize)> = (0..hosts.len())
            .flat_map(|i| (0..keys.len()).map(move |k| (i, k)))
            .collect();
        let per_group: Vec<Vec<EvalRecord>> = groups
            .par_iter()
            .map(|&(i, k)| {
                let (id, src) = &hosts[i];
                ctx.image_rows(i as u64, id, src, &keys[k], &nulls[&keys[k].scheme()], &cells)
            })
            .collect::<Result<_>>()?;
        let mut records: Vec<EvalRecord> = per_group.into_iter().flatten().collect();
        let mut skipped = Vec::new();
        if let Some(report) = &report {
            for issue in report.issues.iter().filter(|i| i.severity == Severity::Error) {
                skipped.push(Skip {
                    id: issue.id.clone(),
                    reason: format!("{}: {}", issue.field, issue.message),
                });
            }
            let pairs: Vec<(usize, usize)> = (0..report.records.len())
                .flat_map(|r| (0..keys.len()).map(move |k| (r, k)))
                .collect();
            let semantic: Vec<EvalRecord> = pairs
                .par_iter()
                .map(|&(r, k)| ctx.semantic_row(&report.records[r], &keys[k], &nulls[&keys[k].scheme()]))
                .collect::<Result<_>>()?;
            records.extend(semantic);
        }
        for s in &skipped {
            warn!("skipped {:?}: {}", s.id, s.reason);
        }
        let aggregates = records::aggregate(&records, &nulls, cfg.fpr)?;
        Ok(RunOutput {
            records,
            aggregates,
            nulls,
            skipped,
        })
    })?
}

#[derive(Serialize)]
struct Sidecar<'a> {
    tool: &'static str,
    version: &'static str,
    config_sha256: String,
    config: &'a RunConfig,
    record_count: usize,
    nulls: BTreeMap<Scheme, NullSummary>,
    skipped: &'a [Skip],
    maps: Vec<String>,
}

/// Runs the sweep and writes `records.csv`, `aggregates.csv`, `maps/*.csv`
/// and `run.json` into the configured output directory.
pub fn run_sweep(cfg: &RunConfig) -> Result<PathBuf> {
    let out = run_records(cfg)?;
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_atomic(&dir.join("records.csv"), &records::records_csv(&out.records)?)?;
    write_atomic(&dir.join("aggregates.csv"), &records::aggregates_csv(&out.aggregates)?)?;
    let maps = records::write_maps(&dir.join("maps"), &out.aggregates, &cfg.schemes)?;
    let sidecar = Sidecar {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config_sha256: cfg.hash(),
        config: cfg,
        record_count: out.records.len(),
        nulls: out
            .nulls
            .iter()
            .map(|(s, n)| {
                (
                    *s,
                    NullSummary {
                        count: n.scores.len(),
                        threshold: n.threshold,
                        undersampled: n.undersampled,
                    },
                )
            })
            .collect(),
        skipped: &out.skipped,
        maps,
    };
    io::json_write(&sidecar, dir.join("run.json"))?;
    info!("wrote {} records to {}", out.records.len(), dir.display());
    Ok(dir.clone())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub scheme: Scheme,
    pub fraction: f64,
    pub n: usize,
    pub stat_mean: f64,
    pub stat_std: f64,
    pub p_value_mean: Option<f64>,
    pub detected_rate: f64,
}

/// Detection statistic against the fraction of pixels replaced by masked
/// regeneration; writes `mask_fraction.csv` to the output directory.
pub fn mask_fraction_study(cfg: &RunConfig, fractions: &[f64]) -> Result<Vec<CurvePoint>> {
    let curve = mask_fraction_curve(cfg, fractions)?;
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in &curve {
        w.serialize(p)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Validation(format!("csv buffer: {e}")))?;
    write_atomic(&dir.join("mask_fraction.csv"), &bytes)?;
    Ok(curve)
}

/// In-memory part of [`mask_fraction_study`].
pub fn mask_fraction_curve(cfg: &RunConfig, fractions: &[f64]) -> Result<Vec<CurvePoint>> {
    if fractions.is_empty() {
        return Err(Error::Param("no mask fractions given".into()));
    }
    let mut study = cfg.clone();
    study.include_unperturbed = false;
    study.manifest_dir = None;
    study.sweeps = vec![Sweep {
        family: Family::MaskedRegen,
        strengths: fractions.to_vec(),
    }];
    let out = run_records(&study)?;
    let mut curve = Vec::new();
    for &scheme in &cfg.schemes {
        for &f in fractions {
            let rows: Vec<&EvalRecord> = out
                .records
                .iter()
                .filter(|r| r.scheme == scheme && r.strength.to_bits() == f.to_bits())
                .collect();
            let stats: Vec<f64> = rows.iter().map(|r| r.stat).collect();
            let (stat_mean, stat_std) = records::mean_std(&stats);
            let ps: Vec<f64> = rows.iter().filter_map(|r| r.p_value).collect();
            curve.push(CurvePoint {
                scheme,
                fraction: f,
                n: rows.len(),
                stat_mean,
                stat_std,
                p_value_mean: (!ps.is_empty()).then(|| records::mean_std(&ps).0),
                detected_rate: rows.iter().filter(|r| r.detected).count() as f64 / rows.len() as f64,
            });
        }
    }
    Ok(curve)
}

/// Directory holding `path`, for resolving config-relative paths.
pub fn config_dir(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new(""))
}
