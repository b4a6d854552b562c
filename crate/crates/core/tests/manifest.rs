use std::path::PathBuf;

use wmlab_core::harness::{
    ingest_semantic_manifest, read_records, run_sweep, Manifest, ManifestEntry, RunConfig, Severity, Variant,
};
use wmlab_core::io;
use wmlab_core::metrics::TripletSet;
use wmlab_core::perturb::{masked_regenerate, synth_mask, Fill, MaskShape};
use wmlab_core::synthetic::procedural_image;
use wmlab_core::watermark::Scheme;
use wmlab_core::{ImageU8, Rng, Tensor3};

const SIDE: usize = 128;

fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/stub_manifest")
}

fn quantize(t: &Tensor3) -> Tensor3 {
    ImageU8::from_tensor(t).unwrap().to_tensor()
}

fn style_edit(img: &Tensor3) -> Tensor3 {
    // warm tint plus gamma, applied everywhere
    Tensor3::from_fn(3, img.height(), img.width(), |c, y, x| {
        let v = img.get(c, y, x).powf(0.8);
        (v * [1.1, 1.0, 0.85][c]).clamp(0.0, 1.0)
    })
}

/// Rebuilds the stub provider bundle. Run with `--ignored` after changing the
/// generator; the output is committed.
#[test]
#[ignore]
fn regenerate_stub_manifest() {
    let dir = fixture_dir();
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    let plan = [
        ("stub-texture", Variant::Texture, Some((MaskShape::Rect, 0.2))),
        ("stub-intra", Variant::Intra, Some((MaskShape::Ellipse, 0.15))),
        ("stub-inter", Variant::Inter, Some((MaskShape::Rect, 0.3))),
        ("stub-style", Variant::Style, None),
    ];
    let subjects = ["dog", "cat", "car", "tree"];
    let mut records = Vec::new();
    for (i, (id, variant, mask)) in plan.into_iter().enumerate() {
        let original = quantize(&procedural_image(7, i as u64, SIDE, SIDE));
        let name = |s: &str| PathBuf::from(format!("{id}_{s}"));
        let (edited, mask_file) = match mask {
            Some((shape, area)) => {
                let m = synth_mask(shape, SIDE, SIDE, area, 100 + i as u64).unwrap();
                let e = masked_regenerate(&original, &m, &Fill::Mock, 200 + i as u64).unwrap();
                io::mask_write(&m, dir.join(name("mask.png"))).unwrap();
                (e, Some(name("mask.png")))
            }
            None => (style_edit(&original), None),
        };
        io::image_write(&original, dir.join(name("original.png"))).unwrap();
        io::image_write(&edited, dir.join(name("edited.png"))).unwrap();

        let mut rng = Rng::new(300 + i as u64, 0);
        let emb: Vec<f32> = (0..16).map(|_| rng.normal() as f32).collect();
        let drift: Vec<f32> = emb.iter().map(|v| v + 0.3 * rng.normal() as f32).collect();
        io::vector_write(&emb, dir.join(name("emb_original.wtns"))).unwrap();
        io::vector_write(&drift, dir.join(name("emb_edited.wtns"))).unwrap();

        let subject = subjects[i];
        let before: TripletSet = [[subject, "on", "grass"], [subject, "near", "fence"], ["sky", "above", "grass"]]
            .into_iter()
            .collect();
        let after: TripletSet = [[subject, "on", "grass"], ["sky", "above", "grass"], [subject, "wears", "hat"]]
            .into_iter()
            .collect();
        io::json_write(&before, dir.join(name("triplets_original.json"))).unwrap();
        io::json_write(&after, dir.join(name("triplets_edited.json"))).unwrap();

        records.push(ManifestEntry {
            id: id.into(),
            variant,
            original: name("original.png"),
            edited: name("edited.png"),
            mask: mask_file,
            prompt: Some(format!("a photo of a {subject}")),
            emb_original: Some(name("emb_original.wtns")),
            emb_edited: Some(name("emb_edited.wtns")),
            triplets_original: Some(name("triplets_original.json")),
            triplets_edited: Some(name("triplets_edited.json")),
            extra: Default::default(),
        });
    }
    Manifest { version: 1, records }.save(&dir).unwrap();
}

#[test]
fn stub_manifest_ingests_cleanly() {
    let report = ingest_semantic_manifest(fixture_dir()).unwrap();
    assert_eq!(report.records.len(), 4);
    assert!(report.skipped.is_empty());
    assert!(report.issues.is_empty(), "{:?}", report.issues);
    for r in &report.records {
        assert_eq!(r.locality_ok, r.variant.is_local().then_some(true), "{}", r.id);
        assert_eq!(r.original.shape(), (3, SIDE, SIDE));
        assert_eq!(r.emb_original.as_ref().unwrap().len(), 16);
        assert_eq!(r.mask.is_some(), r.variant.is_local());
    }
}

#[test]
fn tampered_intra_record_is_flagged() {
    let tmp = tempfile::tempdir().unwrap();
    for entry in std::fs::read_dir(fixture_dir()).unwrap() {
        let p = entry.unwrap().path();
        std::fs::copy(&p, tmp.path().join(p.file_name().unwrap())).unwrap();
    }
    let edited = tmp.path().join("stub-intra_edited.png");
    let mut img = io::image_read(&edited).unwrap();
    let mask = io::mask_read(tmp.path().join("stub-intra_mask.png")).unwrap();
    assert!(!mask.get(0, 0));
    img.set(0, 0, 0, 1.0 - img.get(0, 0, 0));
    io::image_write(&img, &edited).unwrap();

    let report = ingest_semantic_manifest(tmp.path()).unwrap();
    let flagged: Vec<_> = report.issues.iter().filter(|i| i.severity == Severity::Warning).collect();
    assert_eq!(flagged.len(), 1, "{:?}", report.issues);
    assert_eq!(flagged[0].id, "stub-intra");
    let rec = report.records.iter().find(|r| r.id == "stub-intra").unwrap();
    assert_eq!(rec.locality_ok, Some(false));
}

#[test]
fn missing_artifact_skips_record_only() {
    let tmp = tempfile::tempdir().unwrap();
    for entry in std::fs::read_dir(fixture_dir()).unwrap() {
        let p = entry.unwrap().path();
        std::fs::copy(&p, tmp.path().join(p.file_name().unwrap())).unwrap();
    }
    std::fs::remove_file(tmp.path().join("stub-inter_edited.png")).unwrap();
    let report = ingest_semantic_manifest(tmp.path()).unwrap();
    assert_eq!(report.records.len(), 3);
    assert_eq!(report.skipped, vec!["stub-inter".to_string()]);
}

#[test]
fn stub_manifest_round_trips_to_records() {
    let out = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::synthetic(1, out.path());
    cfg.schemes = vec![Scheme::GaussianShading, Scheme::SpreadSpectrum];
    cfg.seeds = vec![0];
    cfg.null_count = 20;
    cfg.include_unperturbed = false;
    cfg.manifest_dir = Some(fixture_dir());
    run_sweep(&cfg).unwrap();
    let records = read_records(out.path().join("records.csv")).unwrap();
    assert_eq!(records.len(), 4 * 2);
    for r in &records {
        assert_eq!(r.family, "semantic");
        let blipa = r.blipa.unwrap();
        assert!(blipa > 0.5 && blipa < 1.0, "{blipa}");
        // two of three triplets survive, one added: 2 / 4
        assert!((r.triplet_sim.unwrap() - 0.5).abs() < 1e-12);
        assert!(r.vlma.is_none());
        match r.variant.as_str() {
            "style" => assert_eq!(r.mask_area, None),
            _ => assert!(r.mask_area.unwrap() > 0.1),
        }
    }
}
