//! True-positive rate at a fixed false-positive rate, calibrated on null scores.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_FPR: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    HigherIsDetected,
    LowerIsDetected,
}

impl Direction {
    /// Whether `score` lies strictly beyond `threshold`.
    pub fn beyond(self, score: f64, threshold: f64) -> bool {
        match self {
            Direction::HigherIsDetected => score > threshold,
            Direction::LowerIsDetected => score < threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSet {
    pub null_scores: Vec<f64>,
    pub positive_scores: Vec<f64>,
    pub direction: Direction,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TprResult {
    pub tpr: f64,
    pub threshold: f64,
    /// Set when the null set is too small to resolve `fpr`.
    pub undersampled: bool,
}

/// Decision threshold from the null: at most `⌊q·N⌋` nulls lie strictly beyond it.
pub fn calibrate(null_scores: &[f64], direction: Direction, fpr: f64) -> Result<(f64, bool)> {
    if null_scores.is_empty() {
        return Err(Error::Calibration("empty null score set".into()));
    }
    if !(fpr > 0.0 && fpr < 1.0) {
        return Err(Error::Param(format!("false-positive rate {fpr} outside (0, 1)")));
    }
    if null_scores.iter().any(|v| v.is_nan()) {
        return Err(Error::Calibration("NaN in null scores".into()));
    }
    let mut sorted = null_scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let k = ((fpr * n as f64).floor() as usize).min(n - 1);
    let threshold = match direction {
        Direction::HigherIsDetected => sorted[n - 1 - k],
        Direction::LowerIsDetected => sorted[k],
    };
    let undersampled = (n as f64) < (1.0 / fpr).ceil();
    Ok((threshold, undersampled))
}

pub fn tpr_at_fpr(scores: &ScoreSet, fpr: f64) -> Result<TprResult> {
    if scores.positive_scores.is_empty() {
        return Err(Error::Calibration("empty positive score set".into()));
    }
    let (threshold, undersampled) = calibrate(&scores.null_scores, scores.direction, fpr)?;
    let hits = scores
        .positive_scores
        .iter()
        .filter(|&&s| scores.direction.beyond(s, threshold))
        .count();
    Ok(TprResult {
        tpr: hits as f64 / scores.positive_scores.len() as f64,
        threshold,
        undersampled,
    })
}
