//! Per-tuple records, per-cell aggregates and strength × scheme grids.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::pipeline::NullModel;
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::metrics::{tpr_at_fpr, ScoreSet};
use crate::watermark::Scheme;

/// One `(image, scheme, perturbation, seed)` row of `records.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub image_id: String,
    pub scheme: Scheme,
    pub family: String,
    pub variant: String,
    pub strength: f64,
    pub seed: u64,
    pub psnr_db: f64,
    pub ssim: f64,
    pub stat: f64,
    pub p_value: Option<f64>,
    pub detected: bool,
    pub vlma: Option<f64>,
    pub blipa: Option<f64>,
    pub triplet_sim: Option<f64>,
    pub mask_area: Option<f64>,
}

pub const RECORD_COLUMNS: [&str; 15] = [
    "image_id",
    "scheme",
    "family",
    "variant",
    "strength",
    "seed",
    "psnr_db",
    "ssim",
    "stat",
    "p_value",
    "detected",
    "vlma",
    "blipa",
    "triplet_sim",
    "mask_area",
];

fn to_csv<T: Serialize>(rows: &[T], header_if_empty: &[&str]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(!rows.is_empty()).from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(header_if_empty)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Validation(format!("csv buffer: {e}")))
}

pub fn records_csv(records: &[EvalRecord]) -> Result<Vec<u8>> {
    to_csv(records, &RECORD_COLUMNS)
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<EvalRecord>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => Error::Validation(format!("{}: {e}", path.display())),
        _ => Error::Csv(e),
    })?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// One `(scheme, family, variant, strength)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub scheme: Scheme,
    pub family: String,
    pub variant: String,
    pub strength: f64,
    pub n: usize,
    pub psnr_mean: f64,
    pub psnr_std: f64,
    pub ssim_mean: f64,
    pub ssim_std: f64,
    pub stat_mean: f64,
    pub stat_std: f64,
    pub p_value_mean: Option<f64>,
    pub detected_rate: f64,
    pub tpr: f64,
    pub tpr_undersampled: bool,
}

type CellKey = (Scheme, String, String, u64);

fn cell_key(r: &EvalRecord) -> CellKey {
    // total order on strength via its bit pattern is fine: strengths are finite and non-negative
    (r.scheme, r.family.clone(), r.variant.clone(), r.strength.to_bits())
}

pub fn aggregate(records: &[EvalRecord], nulls: &BTreeMap<Scheme, NullModel>, fpr: f64) -> Result<Vec<AggregateRow>> {
    let mut cells: BTreeMap<CellKey, Vec<&EvalRecord>> = BTreeMap::new();
    for r in records {
        cells.entry(cell_key(r)).or_default().push(r);
    }
    let mut out = Vec::with_capacity(cells.len());
    for ((scheme, family, variant, bits), rows) in cells {
        let col = |f: fn(&EvalRecord) -> f64| rows.iter().map(|r| f(r)).collect::<Vec<f64>>();
        let (psnr_mean, psnr_std) = mean_std(&col(|r| r.psnr_db));
        let (ssim_mean, ssim_std) = mean_std(&col(|r| r.ssim));
        let stats = col(|r| r.stat);
        let (stat_mean, stat_std) = mean_std(&stats);
        let ps: Vec<f64> = rows.iter().filter_map(|r| r.p_value).collect();
        let p_value_mean = (!ps.is_empty()).then(|| mean_std(&ps).0);
        let detected_rate = rows.iter().filter(|r| r.detected).count() as f64 / rows.len() as f64;
        let null = nulls
            .get(&scheme)
            .ok_or_else(|| Error::Calibration(format!("no null scores for {scheme}")))?;
        let t = tpr_at_fpr(
            &ScoreSet {
                null_scores: null.scores.clone(),
                positive_scores: stats,
                direction: super::pipeline::direction(scheme),
            },
            fpr,
        )?;
        out.push(AggregateRow {
            scheme,
            family,
            variant,
            strength: f64::from_bits(bits),
            n: rows.len(),
            psnr_mean,
            psnr_std,
            ssim_mean,
            ssim_std,
            stat_mean,
            stat_std,
            p_value_mean,
            detected_rate,
            tpr: t.tpr,
            tpr_undersampled: t.undersampled,
        });
    }
    Ok(out)
}

pub fn aggregates_csv(rows: &[AggregateRow]) -> Result<Vec<u8>> {
    to_csv(
        rows,
        &[
            "scheme",
            "family",
            "variant",
            "strength",
            "n",
            "psnr_mean",
            "psnr_std",
            "ssim_mean",
            "ssim_std",
            "stat_mean",
            "stat_std",
            "p_value_mean",
            "detected_rate",
            "tpr",
            "tpr_undersampled",
        ],
    )
}

type MapMetric = (&'static str, fn(&AggregateRow) -> f64);

/// Writes `maps/<family>_<metric>.csv`: one row per strength, one column per scheme.
pub fn write_maps(dir: &Path, rows: &[AggregateRow], schemes: &[Scheme]) -> Result<Vec<String>> {
    let metrics: [MapMetric; 4] = [
        ("stat", |r| r.stat_mean),
        ("ssim", |r| r.ssim_mean),
        ("tpr", |r| r.tpr),
        ("detected", |r| r.detected_rate),
    ];
    let mut by_family: BTreeMap<&str, BTreeMap<u64, BTreeMap<Scheme, &AggregateRow>>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.variant == "baseline") {
        by_family
            .entry(&r.family)
            .or_default()
            .entry(r.strength.to_bits())
            .or_default()
            .insert(r.scheme, r);
    }
    let mut written = Vec::new();
    if by_family.is_empty() {
        return Ok(written);
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (family, grid) in &by_family {
        for (name, get) in metrics {
            let mut w = csv::Writer::from_writer(Vec::new());
            let mut header = vec!["strength".to_string()];
            header.extend(schemes.iter().map(|s| s.to_string()));
            w.write_record(&header)?;
            for (bits, cells) in grid {
                let mut line = vec![f64::from_bits(*bits).to_string()];
                line.extend(
                    schemes
                        .iter()
                        .map(|s| cells.get(s).map(|r| get(r).to_string()).unwrap_or_default()),
                );
                w.write_record(&line)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Validation(format!("csv buffer: {e}")))?;
            let file = format!("{family}_{name}.csv");
            write_atomic(&dir.join(&file), &bytes)?;
            written.push(file);
        }
    }
    Ok(written)
}
