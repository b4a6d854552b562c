use proptest::prelude::*;

use wmlab_core::harness::manifest::out_of_mask_changes;
use wmlab_core::io::{decode_wtns, encode_wtns};
use wmlab_core::metrics::{psnr, ssim, tpr_at_fpr, triplet_similarity, Direction, ScoreSet, TripletSet};
use wmlab_core::perturb::{masked_regenerate, Fill};
use wmlab_core::watermark::{
    gaussianshading_decode, spreadspectrum_decode, treering_detect, GaussianShadingKey, SpreadSpectrumKey,
    TreeRingKey,
};
use wmlab_core::{BinaryMask, Family, PerturbationSpec, Rng, Tensor3};

fn image(seed: u64, h: usize, w: usize) -> Tensor3 {
    let mut rng = Rng::new(seed, 0xAB);
    Tensor3::from_fn(3, h, w, |_, _, _| rng.uniform() as f32)
}

fn sorted_bits(t: &Tensor3) -> Vec<u32> {
    let mut v: Vec<u32> = t.data().iter().map(|x| x.to_bits()).collect();
    v.sort_unstable();
    v
}

/// A valid strength for `family` drawn from `u ∈ [0, 1)`.
fn strength_for(family: Family, u: f64) -> f64 {
    match family {
        Family::SeamCarve => 0.5 * u,
        Family::Downsample => 2.0 + (u * 14.0).floor(),
        Family::Impulse => u,
        Family::Interleave => 2.0 + (u * 40.0).floor(),
        Family::Occlusion => 0.01 + 0.99 * u,
        Family::Erosion | Family::Dilation => [3.0, 5.0, 7.0, 9.0, 11.0][(u * 5.0) as usize],
        Family::PartialShuffle => (u * 50.0).floor(),
        Family::CompleteShuffle => [4.0, 8.0, 16.0, 32.0][(u * 4.0) as usize],
        Family::MaskedRegen => [0.0, 0.1, 0.3, 0.6, 0.9, 1.0][(u * 6.0) as usize],
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn wtns_round_trip(dims in prop::collection::vec(1usize..6, 1..5), seed: u64) {
        let n: usize = dims.iter().product();
        let mut rng = Rng::new(seed, 1);
        let values: Vec<f32> = (0..n).map(|_| (rng.normal() * 1e3) as f32).collect();
        let bytes = encode_wtns(&dims, &values).unwrap();
        prop_assert_eq!(bytes.len(), 7 + 4 * dims.len() + 4 * n);
        let (d, v) = decode_wtns(&bytes).unwrap();
        prop_assert_eq!(d, dims);
        prop_assert_eq!(v, values);
    }

    #[test]
    fn wtns_truncation_never_panics(cut in 0usize..40, seed: u64) {
        let bytes = encode_wtns(&[2, 3], &[seed as f32; 6]).unwrap();
        let cut = cut.min(bytes.len() - 1);
        prop_assert!(decode_wtns(&bytes[..cut]).is_err());
    }

    #[test]
    fn perturbations_keep_shape_finite_and_deterministic(
        fam in 0usize..Family::ALL.len(), u in 0.0f64..1.0, seed: u64, img_seed: u64,
    ) {
        let family = Family::ALL[fam];
        let img = image(img_seed, 64, 64);
        let spec = PerturbationSpec::new(family, strength_for(family, u), seed).unwrap();
        let a = spec.apply(&img).unwrap();
        prop_assert_eq!(a.shape(), img.shape());
        prop_assert!(a.all_finite());
        prop_assert!(a.data().iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert_eq!(spec.apply(&img).unwrap(), a);
    }

    #[test]
    fn shuffles_preserve_pixel_multiset(u in 0.0f64..1.0, seed: u64, img_seed: u64, partial: bool) {
        let img = image(img_seed, 64, 64);
        let family = if partial { Family::PartialShuffle } else { Family::CompleteShuffle };
        let out = PerturbationSpec::new(family, strength_for(family, u), seed).unwrap().apply(&img).unwrap();
        prop_assert_eq!(sorted_bits(&out), sorted_bits(&img));
    }

    #[test]
    fn mid_gray_psnr_falls_with_strength(seed: u64) {
        let gray = Tensor3::filled(3, 64, 64, 0.5);
        for family in [Family::Impulse, Family::Occlusion] {
            let mut last = f64::INFINITY;
            for s in [0.1, 0.3, 0.5, 0.7] {
                let p = psnr(&gray, &PerturbationSpec::new(family, s, seed).unwrap().apply(&gray).unwrap()).unwrap();
                prop_assert!(p <= last, "{} {} {} {}", family, s, p, last);
                last = p;
            }
        }
        let mut last = 0.0;
        for k in [2.0, 4.0, 8.0, 16.0] {
            let p = psnr(&gray, &PerturbationSpec::new(Family::Interleave, k, seed).unwrap().apply(&gray).unwrap()).unwrap();
            prop_assert!(p > last);
            last = p;
        }
    }

    #[test]
    fn regeneration_is_exact_outside_mask(seed: u64, img_seed: u64, density in 0.0f64..1.0) {
        let img = image(img_seed, 24, 40);
        let mut rng = Rng::new(seed, 3);
        let mask = BinaryMask::from_fn(24, 40, |_, _| rng.uniform() < density);
        let out = masked_regenerate(&img, &mask, &Fill::Mock, seed).unwrap();
        prop_assert_eq!(out_of_mask_changes(&img, &out, &mask), 0);
        prop_assert!(out.all_finite());
    }

    #[test]
    fn fidelity_metrics_are_symmetric(a in any::<u64>(), b in any::<u64>()) {
        let (x, y) = (image(a, 16, 20), image(b, 16, 20));
        prop_assert_eq!(psnr(&x, &y).unwrap(), psnr(&y, &x).unwrap());
        prop_assert!((ssim(&x, &y).unwrap() - ssim(&y, &x).unwrap()).abs() < 1e-9);
        prop_assert!((ssim(&x, &x).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn triplet_similarity_is_symmetric_and_exact_on_equality(
        a in prop::collection::vec((0u8..4, 0u8..3, 0u8..4), 0..6),
        b in prop::collection::vec((0u8..4, 0u8..3, 0u8..4), 0..6),
    ) {
        let set = |v: &[(u8, u8, u8)]| -> TripletSet {
            v.iter().map(|(s, p, o)| [format!("s{s}"), format!("p{p}"), format!("o{o}")]).collect()
        };
        let (x, y) = (set(&a), set(&b));
        let sxy = triplet_similarity(&x, &y);
        prop_assert_eq!(sxy, triplet_similarity(&y, &x));
        prop_assert!((0.0..=1.0).contains(&sxy));
        prop_assert_eq!(sxy == 1.0, x == y);
    }

    #[test]
    fn tpr_is_monotone_in_positive_scores(seed: u64, bump in 0.0f64..3.0, idx in 0usize..50, lower: bool) {
        let mut rng = Rng::new(seed, 4);
        let nulls: Vec<f64> = (0..300).map(|_| rng.normal()).collect();
        let positives: Vec<f64> = (0..50).map(|_| 2.0 + rng.normal()).collect();
        let direction = if lower { Direction::LowerIsDetected } else { Direction::HigherIsDetected };
        let sign = if lower { -1.0 } else { 1.0 };
        let mut s = ScoreSet {
            null_scores: nulls.iter().map(|v| sign * v).collect(),
            positive_scores: positives.iter().map(|v| sign * v).collect(),
            direction,
        };
        let before = tpr_at_fpr(&s, 0.01).unwrap().tpr;
        s.positive_scores[idx] += sign * bump;
        prop_assert!(tpr_at_fpr(&s, 0.01).unwrap().tpr >= before);
    }

    #[test]
    fn decoders_are_total(seed: u64, scale in 0.0f32..50.0) {
        let mut rng = Rng::new(seed, 5);
        let z = Tensor3::from_fn(4, 64, 64, |_, _, _| scale * rng.normal() as f32);
        let gs = gaussianshading_decode(&GaussianShadingKey::generate(seed), &z).unwrap();
        prop_assert!((0.0..=1.0).contains(&gs.statistic));
        let tr = treering_detect(&TreeRingKey::with_defaults(seed), &z, &[1.0, 2.0]).unwrap();
        prop_assert!(tr.statistic.is_finite());
        let p = tr.p_value.unwrap();
        prop_assert!(p > 0.0 && p <= 1.0);
        let img = Tensor3::from_fn(3, 16, 16, |_, _, _| rng.uniform() as f32);
        let ss = spreadspectrum_decode(&SpreadSpectrumKey::generate(seed), &img).unwrap();
        prop_assert!((0.0..=1.0).contains(&ss.statistic));
        prop_assert!(ss.p_value.is_none() && gs.p_value.is_none());
    }

    #[test]
    fn rng_streams_repeat(seed: u64, stream: u64) {
        let mut a = Rng::new(seed, stream);
        let mut b = Rng::new(seed, stream);
        for _ in 0..16 {
            prop_assert_eq!(a.uniform().to_bits(), b.uniform().to_bits());
        }
    }

    #[test]
    fn mask_area_tracks_bits(seed: u64, density in 0.0f64..1.0) {
        let mut rng = Rng::new(seed, 6);
        let m = BinaryMask::from_fn(13, 17, |_, _| rng.uniform() < density);
        let count = m.bits().iter().filter(|&&b| b).count();
        prop_assert_eq!(m.area_fraction(), count as f64 / (13.0 * 17.0));
    }
}
