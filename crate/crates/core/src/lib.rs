//! Watermark robustness lab: embed in-processing image watermarks through a
//! toy invertible generator, perturb the outputs, and measure detectability
//! against fidelity and semantic drift.

pub mod channel;
pub mod error;
pub mod fft;
pub mod harness;
pub mod io;
pub mod mask;
pub mod metrics;
pub mod perturb;
pub mod rng;
pub mod synthetic;
pub mod tensor;
pub mod watermark;

pub use channel::{ChannelConfig, DiffusionSchedule, ToyChannel};
pub use error::{Error, Result};
pub use mask::BinaryMask;
pub use perturb::{Family, PerturbationSpec};
pub use rng::Rng;
pub use tensor::{to_gray, ImageU8, Tensor3};
