//! Image-domain attacks. Every operation keeps the input dimensions.

pub mod morphology;
pub mod pixel;
pub mod regen;
pub mod resize;
pub mod seam;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use morphology::{morphology, MorphOp};
pub use pixel::{
    complete_block_shuffle, downsample_up, impulse_erase, interleave_black, occlude_rows,
    partial_block_shuffle,
};
pub use regen::{masked_regenerate, synth_mask, Fill, MaskShape};
pub use resize::resize_bilinear;
pub use seam::seam_carve;

use crate::error::{Error, Result};
use crate::mask::BinaryMask;
use crate::tensor::Tensor3;

/// Block edge for partial shuffling.
pub const PARTIAL_SHUFFLE_BLOCK: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    SeamCarve,
    Downsample,
    Impulse,
    Interleave,
    Occlusion,
    Erosion,
    Dilation,
    PartialShuffle,
    CompleteShuffle,
    MaskedRegen,
}

impl Family {
    pub const ALL: [Family; 10] = [
        Family::SeamCarve,
        Family::Downsample,
        Family::Impulse,
        Family::Interleave,
        Family::Occlusion,
        Family::Erosion,
        Family::Dilation,
        Family::PartialShuffle,
        Family::CompleteShuffle,
        Family::MaskedRegen,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::SeamCarve => "seam_carve",
            Family::Downsample => "downsample",
            Family::Impulse => "impulse",
            Family::Interleave => "interleave",
            Family::Occlusion => "occlusion",
            Family::Erosion => "erosion",
            Family::Dilation => "dilation",
            Family::PartialShuffle => "partial_shuffle",
            Family::CompleteShuffle => "complete_shuffle",
            Family::MaskedRegen => "masked_regen",
        }
    }

    /// Whether the strength is a count or size rather than a fraction.
    pub fn integral(self) -> bool {
        matches!(
            self,
            Family::Downsample
                | Family::Interleave
                | Family::Erosion
                | Family::Dilation
                | Family::PartialShuffle
                | Family::CompleteShuffle
        )
    }

    /// Checks `strength` against the family domain.
    pub fn validate_strength(self, strength: f64) -> Result<()> {
        let bad = |why: &str| Err(Error::Param(format!("{}: strength {strength} {why}", self.as_str())));
        if !strength.is_finite() {
            return bad("is not finite");
        }
        if self.integral() && strength.fract() != 0.0 {
            return bad("must be an integer");
        }
        let ok = match self {
            Family::SeamCarve => (0.0..=0.5).contains(&strength),
            Family::Downsample => (2.0..=32.0).contains(&strength),
            Family::Impulse => (0.0..=1.0).contains(&strength),
            Family::Interleave => strength >= 2.0,
            Family::Occlusion => strength > 0.0 && strength <= 1.0,
            Family::Erosion | Family::Dilation => {
                (3.0..=11.0).contains(&strength) && strength as u64 % 2 == 1
            }
            Family::PartialShuffle => strength >= 0.0,
            Family::CompleteShuffle => [4.0, 8.0, 16.0, 32.0].contains(&strength),
            Family::MaskedRegen => (0.0..=0.9).contains(&strength) || strength == 1.0,
        };
        if ok {
            Ok(())
        } else {
            bad("outside the family domain")
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == norm)
            .ok_or_else(|| Error::Param(format!("unknown perturbation family {s:?}")))
    }
}

/// One attack instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub family: Family,
    pub strength: f64,
    pub seed: u64,
}

impl PerturbationSpec {
    pub fn new(family: Family, strength: f64, seed: u64) -> Result<Self> {
        family.validate_strength(strength)?;
        Ok(Self { family, strength, seed })
    }

    /// Region replaced by `masked_regen`: a seeded rectangle of the requested
    /// area, with 0 and 1 meaning nothing and everything.
    pub fn region(&self, h: usize, w: usize) -> Result<BinaryMask> {
        if self.strength <= 0.0 {
            Ok(BinaryMask::empty(h, w))
        } else if self.strength >= 1.0 {
            Ok(BinaryMask::full(h, w))
        } else {
            synth_mask(MaskShape::Rect, h, w, self.strength, self.seed)
        }
    }

    /// Applies the attack; `masked_regen` uses the mock fill.
    pub fn apply(&self, img: &Tensor3) -> Result<Tensor3> {
        self.apply_with_fill(img, &Fill::Mock)
    }

    pub fn apply_with_fill(&self, img: &Tensor3, fill: &Fill) -> Result<Tensor3> {
        self.family.validate_strength(self.strength)?;
        let s = self.strength;
        let n = s as usize;
        match self.family {
            Family::SeamCarve => seam_carve(img, s),
            Family::Downsample => downsample_up(img, n),
            Family::Impulse => impulse_erase(img, s, self.seed),
            Family::Interleave => interleave_black(img, n),
            Family::Occlusion => occlude_rows(img, s, self.seed),
            Family::Erosion => morphology(img, MorphOp::Erode, n),
            Family::Dilation => morphology(img, MorphOp::Dilate, n),
            Family::PartialShuffle => partial_block_shuffle(img, n, PARTIAL_SHUFFLE_BLOCK, self.seed),
            Family::CompleteShuffle => complete_block_shuffle(img, n, self.seed),
            Family::MaskedRegen => {
                let mask = self.region(img.height(), img.width())?;
                masked_regenerate(img, &mask, fill, self.seed)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn textured(h: usize, w: usize) -> Tensor3 {
        Tensor3::from_fn(3, h, w, |c, y, x| (((c + 1) * 31 + y * 7 + x * 11) % 97) as f32 / 96.0)
    }

    #[test]
    fn family_names_round_trip() {
        for f in Family::ALL {
            assert_eq!(f.as_str().parse::<Family>().unwrap(), f);
            let json = serde_json::to_string(&f).unwrap();
            assert_eq!(json, format!("\"{}\"", f.as_str()));
        }
        assert_eq!("seam-carve".parse::<Family>().unwrap(), Family::SeamCarve);
        assert!("blur".parse::<Family>().is_err());
    }

    #[test]
    fn domains() {
        use Family::*;
        let cases: &[(Family, f64, bool)] = &[
            (SeamCarve, 0.5, true),
            (SeamCarve, 0.6, false),
            (Downsample, 1.0, false),
            (Downsample, 2.0, true),
            (Downsample, 2.5, false),
            (Impulse, 1.5, false),
            (Impulse, 1.0, true),
            (Interleave, 1.0, false),
            (Occlusion, 0.0, false),
            (Erosion, 4.0, false),
            (Dilation, 11.0, true),
            (Dilation, 13.0, false),
            (PartialShuffle, 0.0, true),
            (CompleteShuffle, 12.0, false),
            (MaskedRegen, 0.95, false),
            (MaskedRegen, 1.0, true),
            (Impulse, f64::NAN, false),
        ];
        for &(f, s, ok) in cases {
            assert_eq!(PerturbationSpec::new(f, s, 0).is_ok(), ok, "{f} {s}");
        }
    }

    #[test]
    fn every_family_keeps_shape_and_is_deterministic() {
        let img = textured(64, 64);
        let strengths = [0.2, 4.0, 0.3, 5.0, 0.25, 5.0, 5.0, 10.0, 16.0, 0.3];
        for (f, s) in Family::ALL.into_iter().zip(strengths) {
            let spec = PerturbationSpec::new(f, s, 17).unwrap();
            let a = spec.apply(&img).unwrap();
            assert_eq!(a.shape(), img.shape(), "{f}");
            assert!(a.all_finite(), "{f}");
            assert_eq!(a, spec.apply(&img).unwrap(), "{f}");
            assert_ne!(a, img, "{f}");
        }
    }

    #[test]
    fn regen_extremes() {
        let img = textured(32, 32);
        let none = PerturbationSpec::new(Family::MaskedRegen, 0.0, 1).unwrap();
        assert_eq!(none.apply(&img).unwrap(), img);
        let all = PerturbationSpec::new(Family::MaskedRegen, 1.0, 1).unwrap();
        let other = textured(32, 32).map(|v| 1.0 - v);
        assert_eq!(all.apply_with_fill(&img, &Fill::Image(other.clone())).unwrap(), other);
    }
}
