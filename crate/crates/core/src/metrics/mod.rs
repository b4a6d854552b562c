//! Fidelity, detectability and semantic-drift scores.

pub mod drift;
pub mod fidelity;
pub mod stats;
pub mod tpr;

pub use drift::{caption_agreement, triplet_similarity, Triplet, TripletSet};
pub use fidelity::{psnr, ssim, PSNR_CAP_DB};
pub use stats::{kolmogorov_survival, ks_one_sample, ks_two_sample};
pub use tpr::{tpr_at_fpr, Direction, ScoreSet, TprResult, DEFAULT_FPR};
