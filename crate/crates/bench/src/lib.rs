//! Shared inputs for the benchmarks.

use wmlab_core::synthetic::procedural_image;
use wmlab_core::{Rng, Tensor3, ToyChannel};

/// Procedural host at `size`², fixed across runs.
pub fn host(size: usize) -> Tensor3 {
    procedural_image(0, 1, size, size)
}

/// A default-channel render of a seeded latent, and that latent.
pub fn render(channel: &ToyChannel, seed: u64) -> (Tensor3, Tensor3) {
    let z = channel.sample_latent(&mut Rng::new(seed, 0));
    (channel.render(&z).expect("render"), z)
}
