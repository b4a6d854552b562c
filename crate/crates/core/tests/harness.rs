use std::collections::BTreeMap;
use std::path::Path;

use wmlab_core::harness::{mask_fraction_curve, read_records, run_records, run_sweep, Dataset, RunConfig, Sweep};
use wmlab_core::metrics::ks_two_sample;
use wmlab_core::watermark::Scheme;
use wmlab_core::{ChannelConfig, Family};

fn small_channel() -> ChannelConfig {
    ChannelConfig {
        latent_height: 16,
        latent_width: 16,
        ..ChannelConfig::default()
    }
}

fn base(out: &Path, count: usize) -> RunConfig {
    let mut cfg = RunConfig::synthetic(count, out);
    cfg.channel = small_channel();
    cfg.seeds = vec![0, 1];
    cfg.null_count = 60;
    cfg
}

#[test]
fn identity_sweep_sits_at_ceiling() {
    let out = tempfile::tempdir().unwrap();
    let cfg = base(out.path(), 6);
    let run = run_records(&cfg).unwrap();
    assert_eq!(run.records.len(), 6 * 2 * 3);
    for r in &run.records {
        assert_eq!((r.family.as_str(), r.variant.as_str()), ("none", "clean"));
        assert!(r.detected, "{r:?}");
        match r.scheme {
            Scheme::TreeRing => assert_eq!(r.p_value, Some(1.0 / 61.0)),
            _ => assert_eq!(r.stat, 1.0),
        }
    }
}

#[test]
fn impulse_sweep_counts_and_psnr_trend() {
    let out = tempfile::tempdir().unwrap();
    let mut cfg = base(out.path(), 16);
    cfg.seeds = vec![0];
    cfg.include_unperturbed = false;
    cfg.schemes = vec![Scheme::GaussianShading, Scheme::SpreadSpectrum];
    cfg.sweeps = vec![Sweep {
        family: Family::Impulse,
        strengths: vec![0.1, 0.2, 0.3, 0.4, 0.5],
    }];
    let run = run_records(&cfg).unwrap();
    assert_eq!(run.records.len(), 16 * 5 * 2);
    for scheme in &cfg.schemes {
        let psnrs: Vec<f64> = run
            .aggregates
            .iter()
            .filter(|a| a.scheme == *scheme)
            .map(|a| a.psnr_mean)
            .collect();
        assert_eq!(psnrs.len(), 5);
        assert!(psnrs.windows(2).all(|w| w[1] < w[0]), "{scheme}: {psnrs:?}");
    }
}

fn sweep_cfg(out: &Path, threads: Option<usize>) -> RunConfig {
    let mut cfg = base(out, 4);
    cfg.threads = threads;
    cfg.sweeps = vec![
        Sweep {
            family: Family::Occlusion,
            strengths: vec![0.2, 0.5],
        },
        Sweep {
            family: Family::MaskedRegen,
            strengths: vec![0.25],
        },
        Sweep {
            family: Family::CompleteShuffle,
            strengths: vec![8.0],
        },
    ];
    cfg
}

#[test]
fn runs_are_byte_identical_across_repeats_and_threads() {
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    run_sweep(&sweep_cfg(dirs[0].path(), Some(1))).unwrap();
    run_sweep(&sweep_cfg(dirs[1].path(), Some(1))).unwrap();
    run_sweep(&sweep_cfg(dirs[2].path(), Some(4))).unwrap();
    for name in ["records.csv", "aggregates.csv", "maps/occlusion_stat.csv", "maps/masked_regen_tpr.csv"] {
        let a = std::fs::read(dirs[0].path().join(name)).unwrap();
        assert_eq!(a, std::fs::read(dirs[1].path().join(name)).unwrap(), "{name} repeat");
        assert_eq!(a, std::fs::read(dirs[2].path().join(name)).unwrap(), "{name} threads");
    }
}

#[test]
fn record_count_and_sidecar() {
    let out = tempfile::tempdir().unwrap();
    let cfg = sweep_cfg(out.path(), None);
    run_sweep(&cfg).unwrap();
    let records = read_records(out.path().join("records.csv")).unwrap();
    // images × (clean + 4 sweep cells) × seeds × schemes
    assert_eq!(records.len(), 4 * 5 * 2 * 3);
    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.path().join("run.json")).unwrap()).unwrap();
    assert_eq!(sidecar["config_sha256"], cfg.hash());
    assert_eq!(sidecar["record_count"], records.len());
}

type Cell = (String, String, String, String);

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let s = if v.len() > 1 {
        (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (m, s)
}

#[test]
fn aggregates_recompute_from_records() {
    let out = tempfile::tempdir().unwrap();
    run_sweep(&sweep_cfg(out.path(), None)).unwrap();

    // group the raw CSV rows without going through the library's types
    let mut rdr = csv::Reader::from_path(out.path().join("records.csv")).unwrap();
    let head = rdr.headers().unwrap().clone();
    let col = |name: &str| head.iter().position(|h| h == name).unwrap();
    let mut cells: BTreeMap<Cell, Vec<csv::StringRecord>> = BTreeMap::new();
    for row in rdr.records() {
        let row = row.unwrap();
        let key = (
            row[col("scheme")].to_string(),
            row[col("family")].to_string(),
            row[col("variant")].to_string(),
            row[col("strength")].to_string(),
        );
        cells.entry(key).or_default().push(row);
    }

    let mut agg = csv::Reader::from_path(out.path().join("aggregates.csv")).unwrap();
    let ahead = agg.headers().unwrap().clone();
    let acol = |name: &str| ahead.iter().position(|h| h == name).unwrap();
    let mut seen = 0;
    for row in agg.records() {
        let row = row.unwrap();
        let strength: f64 = row[acol("strength")].parse().unwrap();
        let key = cells
            .keys()
            .find(|k| {
                k.0 == row[acol("scheme")]
                    && k.1 == row[acol("family")]
                    && k.2 == row[acol("variant")]
                    && k.3.parse::<f64>().unwrap() == strength
            })
            .cloned()
            .unwrap_or_else(|| panic!("no records for {row:?}"));
        let rows = &cells[&key];
        assert_eq!(row[acol("n")].parse::<usize>().unwrap(), rows.len());
        for (field, mean_col, std_col) in [
            ("psnr_db", "psnr_mean", "psnr_std"),
            ("ssim", "ssim_mean", "ssim_std"),
            ("stat", "stat_mean", "stat_std"),
        ] {
            let v: Vec<f64> = rows.iter().map(|r| r[col(field)].parse().unwrap()).collect();
            let (m, s) = mean_std(&v);
            let (gm, gs): (f64, f64) = (row[acol(mean_col)].parse().unwrap(), row[acol(std_col)].parse().unwrap());
            assert!((gm - m).abs() <= 1e-9 * m.abs().max(1.0), "{key:?} {field} mean {gm} vs {m}");
            assert!((gs - s).abs() <= 1e-9 * s.abs().max(1.0), "{key:?} {field} std {gs} vs {s}");
        }
        let det = rows.iter().filter(|r| &r[col("detected")] == "true").count() as f64 / rows.len() as f64;
        assert!((row[acol("detected_rate")].parse::<f64>().unwrap() - det).abs() < 1e-12);
        let ps: Vec<f64> = rows.iter().filter_map(|r| r[col("p_value")].parse().ok()).collect();
        if ps.is_empty() {
            assert_eq!(&row[acol("p_value_mean")], "");
        } else {
            let pm = ps.iter().sum::<f64>() / ps.len() as f64;
            assert!((row[acol("p_value_mean")].parse::<f64>().unwrap() - pm).abs() < 1e-9);
        }
        seen += 1;
    }
    assert_eq!(seen, cells.len());
}

#[test]
fn mask_fraction_curve_trends() {
    let out = tempfile::tempdir().unwrap();
    let mut cfg = base(out.path(), 12);
    cfg.schemes = vec![Scheme::TreeRing, Scheme::GaussianShading];
    cfg.null_count = 100;
    cfg.sweeps = vec![Sweep {
        family: Family::MaskedRegen,
        strengths: vec![0.5],
    }];
    let fractions = [0.0, 0.1, 0.25, 0.5, 0.75, 1.0];
    let curve = mask_fraction_curve(&cfg, &fractions).unwrap();
    let stat = |scheme: Scheme, f: f64| {
        curve
            .iter()
            .find(|p| p.scheme == scheme && p.fraction == f)
            .unwrap()
            .stat_mean
    };
    let eta: Vec<f64> = fractions.iter().map(|&f| stat(Scheme::TreeRing, f)).collect();
    assert!(eta.windows(2).all(|w| w[1] >= w[0]), "{eta:?}");
    assert!(stat(Scheme::GaussianShading, 0.25) >= stat(Scheme::GaussianShading, 0.75));

    let run = run_records(&cfg).unwrap();
    let clean: Vec<f64> = run
        .records
        .iter()
        .filter(|r| r.scheme == Scheme::TreeRing && r.family == "none")
        .map(|r| r.stat)
        .collect();
    let clean_mean = clean.iter().sum::<f64>() / clean.len() as f64;
    assert!((stat(Scheme::TreeRing, 0.0) - clean_mean).abs() <= 1e-9 * clean_mean.max(1.0));
}

#[test]
fn full_mock_fill_erases_tree_ring() {
    let out = tempfile::tempdir().unwrap();
    let mut cfg = base(out.path(), 12);
    cfg.dataset = Dataset::Latent { count: 12 };
    cfg.schemes = vec![Scheme::TreeRing];
    cfg.null_count = 100;
    cfg.include_unperturbed = false;
    cfg.sweeps = vec![Sweep {
        family: Family::MaskedRegen,
        strengths: vec![1.0],
    }];
    let run = run_records(&cfg).unwrap();
    assert!(run.records.iter().all(|r| !r.detected && r.p_value.unwrap() > 0.05));
    // the filled content is not distributed like channel renders, so the
    // statistic is not null-distributed; report the gap for the record
    let eta: Vec<f64> = run.records.iter().map(|r| r.stat).collect();
    let (d, p) = ks_two_sample(&eta, &run.nulls[&Scheme::TreeRing].scores);
    eprintln!("full fill vs null: KS D={d:.3} p={p:.3e}");
}

#[test]
fn latent_dataset_rows_are_labelled() {
    let out = tempfile::tempdir().unwrap();
    let mut cfg = base(out.path(), 2);
    cfg.dataset = Dataset::Latent { count: 2 };
    cfg.seeds = vec![0];
    let run = run_records(&cfg).unwrap();
    assert!(run.records.iter().all(|r| r.image_id.starts_with("lat-")));
    assert!(run.records.iter().all(|r| r.detected));
}
