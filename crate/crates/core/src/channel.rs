//! Toy latent generator: DDIM sampling over a fixed linear denoiser, plus a
//! fixed linear latent↔pixel codec.
//!
//! The denoiser is a seeded zero-sum 3×3 circular convolution per latent
//! channel. Each sampling step is then a linear map `a·z + b·K∗z`, which the
//! inverse undoes exactly by division in the Fourier domain.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::rng::Rng;
use crate::tensor::Tensor3;

/// Variance schedule with `alpha_bar[0] = 1` and `alpha_bar[t] = ∏_{s≤t} (1 − beta[s−1])`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSchedule {
    betas: Vec<f64>,
    alpha_bar: Vec<f64>,
}

impl DiffusionSchedule {
    /// Betas spaced linearly from `start` to `end` over `steps` steps.
    pub fn linear(steps: usize, start: f64, end: f64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Param("schedule needs at least one step".into()));
        }
        let betas = (0..steps)
            .map(|i| {
                if steps == 1 {
                    start
                } else {
                    start + (end - start) * i as f64 / (steps - 1) as f64
                }
            })
            .collect();
        Self::from_betas(betas)
    }

    pub fn from_betas(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::Param("schedule needs at least one step".into()));
        }
        if let Some(b) = betas.iter().find(|b| !(**b > 0.0 && **b < 1.0)) {
            return Err(Error::Param(format!("beta {b} outside (0, 1)")));
        }
        let mut alpha_bar = Vec::with_capacity(betas.len() + 1);
        alpha_bar.push(1.0);
        for b in &betas {
            let prev = *alpha_bar.last().unwrap();
            alpha_bar.push(prev * (1.0 - b));
        }
        Ok(Self { betas, alpha_bar })
    }

    pub fn steps(&self) -> usize {
        self.betas.len()
    }
    pub fn betas(&self) -> &[f64] {
        &self.betas
    }
    /// Length `steps + 1`; index 0 is the clean end of the chain.
    pub fn alpha_bar(&self) -> &[f64] {
        &self.alpha_bar
    }

    /// Coefficients `(a, b)` of step `t` (1-based), `z_{t−1} = a·z_t + b·ε(z_t)`.
    pub fn step_coefficients(&self, t: usize) -> (f64, f64) {
        let (ab_t, ab_prev) = (self.alpha_bar[t], self.alpha_bar[t - 1]);
        let a = (ab_prev / ab_t).sqrt();
        let b = (1.0 - ab_prev).sqrt() - (ab_prev * (1.0 - ab_t) / ab_t).sqrt();
        (a, b)
    }
}

/// Serializable channel parameters (part of the run config).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub denoiser_seed: u64,
    pub codec_seed: u64,
    pub latent_channels: usize,
    pub latent_height: usize,
    pub latent_width: usize,
    pub upscale: usize,
    /// L1 norm of each denoiser kernel; 0 disables the denoiser.
    pub denoiser_gain: f64,
    /// Pixel units per unit of codec output, around the 0.5 offset.
    pub pixel_scale: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            steps: 50,
            beta_start: 1e-4,
            beta_end: 2e-2,
            denoiser_seed: 0x5EED_0001,
            codec_seed: 0x5EED_0002,
            latent_channels: 4,
            latent_height: 64,
            latent_width: 64,
            upscale: 8,
            denoiser_gain: 1.0,
            pixel_scale: 0.3,
        }
    }
}

/// Immutable generator channel; see the module docs.
#[derive(Debug, Clone)]
pub struct ToyChannel {
    config: ChannelConfig,
    schedule: DiffusionSchedule,
    kernels: Vec<[f64; 9]>,
    kernel_spectra: Vec<Vec<Complex64>>,
    /// `(3·u·u) × C` codec matrix with orthonormal columns, row index `(ch·u + dy)·u + dx`.
    codec: Vec<f64>,
    fft: Fft2,
}

impl ToyChannel {
    pub fn new(config: ChannelConfig) -> Result<Self> {
        let schedule = DiffusionSchedule::linear(config.steps, config.beta_start, config.beta_end)?;
        let (c, h, w, u) = (
            config.latent_channels,
            config.latent_height,
            config.latent_width,
            config.upscale,
        );
        if c == 0 || h < 3 || w < 3 || u == 0 {
            return Err(Error::Param(format!("degenerate latent geometry {c}×{h}×{w}, upscale {u}")));
        }
        if c > 3 * u * u {
            return Err(Error::Param(format!(
                "{c} latent channels cannot embed injectively into 3×{u}×{u} pixel blocks"
            )));
        }
        if !(config.denoiser_gain >= 0.0 && config.denoiser_gain < 1.0 + 1e-12) {
            // |K̂| ≤ gain keeps every step operator invertible
            return Err(Error::Param(format!(
                "denoiser gain {} outside [0, 1]",
                config.denoiser_gain
            )));
        }
        if !(config.pixel_scale > 0.0 && config.pixel_scale.is_finite()) {
            return Err(Error::Param(format!("pixel scale {} must be positive", config.pixel_scale)));
        }

        let kernels = denoiser_kernels(config.denoiser_seed, c, config.denoiser_gain);
        let kernel_spectra = kernels.iter().map(|k| kernel_spectrum(k, h, w)).collect();
        let codec = codec_matrix(config.codec_seed, c, u);
        Ok(Self {
            fft: Fft2::new(h, w),
            config,
            schedule,
            kernels,
            kernel_spectra,
            codec,
        })
    }

    pub fn default_channel() -> Self {
        Self::new(ChannelConfig::default()).expect("default channel config is valid")
    }

    pub fn config(&self) -> &ChannelConfig {
        &self.config
    }
    pub fn schedule(&self) -> &DiffusionSchedule {
        &self.schedule
    }
    pub fn latent_shape(&self) -> (usize, usize, usize) {
        (
            self.config.latent_channels,
            self.config.latent_height,
            self.config.latent_width,
        )
    }
    pub fn image_shape(&self) -> (usize, usize, usize) {
        let u = self.config.upscale;
        (3, self.config.latent_height * u, self.config.latent_width * u)
    }
    pub fn kernels(&self) -> &[[f64; 9]] {
        &self.kernels
    }

    /// Predicted noise `ε_θ(z)`: circular 3×3 convolution per channel.
    pub fn denoise(&self, z: &[f64]) -> Vec<f64> {
        let (c, h, w) = self.latent_shape();
        let mut out = vec![0.0; c * h * w];
        for ch in 0..c {
            let k = &self.kernels[ch];
            let src = &z[ch * h * w..(ch + 1) * h * w];
            let dst = &mut out[ch * h * w..(ch + 1) * h * w];
            for y in 0..h {
                for x in 0..w {
                    let mut acc = 0.0;
                    for (ki, &kv) in k.iter().enumerate() {
                        let (dy, dx) = (ki / 3, ki % 3);
                        let sy = (y + h + 1 - dy) % h;
                        let sx = (x + w + 1 - dx) % w;
                        acc += kv * src[sy * w + sx];
                    }
                    dst[y * w + x] = acc;
                }
            }
        }
        out
    }

    /// Deterministic DDIM sampling from `z_T` down to `z_0`.
    pub fn ddim_generate(&self, z_t: &Tensor3) -> Result<Tensor3> {
        z_t.expect_shape(self.latent_shape(), "ddim_generate input")?;
        let ab = self.schedule.alpha_bar();
        let mut z: Vec<f64> = z_t.data().iter().map(|&v| v as f64).collect();
        for t in (1..=self.schedule.steps()).rev() {
            let eps = self.denoise(&z);
            let (sa_t, sn_t) = (ab[t].sqrt(), (1.0 - ab[t]).sqrt());
            let (sa_p, sn_p) = (ab[t - 1].sqrt(), (1.0 - ab[t - 1]).sqrt());
            for (zi, ei) in z.iter_mut().zip(&eps) {
                let z0_hat = (*zi - sn_t * ei) / sa_t;
                *zi = sa_p * z0_hat + sn_p * ei;
            }
        }
        to_tensor(self.latent_shape(), &z)
    }

    /// Exact inverse of [`ddim_generate`](Self::ddim_generate).
    pub fn ddim_invert(&self, z_0: &Tensor3) -> Result<Tensor3> {
        z_0.expect_shape(self.latent_shape(), "ddim_invert input")?;
        let (c, h, w) = self.latent_shape();
        let n = h * w;
        let mut out = vec![0.0; c * n];
        for ch in 0..c {
            let mut spec = self.fft.forward_real(z_0.plane(ch));
            let kspec = &self.kernel_spectra[ch];
            for t in 1..=self.schedule.steps() {
                let (a, b) = self.schedule.step_coefficients(t);
                for (s, k) in spec.iter_mut().zip(kspec) {
                    *s /= a + b * k;
                }
            }
            self.fft.inverse(&mut spec);
            for (o, s) in out[ch * n..(ch + 1) * n].iter_mut().zip(&spec) {
                *o = s.re;
            }
        }
        to_tensor(self.latent_shape(), &out)
    }

    /// Latent → image, clamped to `[0, 1]`; also returns how many samples clamped.
    pub fn decode_with_saturation(&self, z: &Tensor3) -> Result<(Tensor3, usize)> {
        z.expect_shape(self.latent_shape(), "decode input")?;
        let (c, h, w) = self.latent_shape();
        let u = self.config.upscale;
        let (_, ph, pw) = self.image_shape();
        let rows = 3 * u * u;
        let scale = self.config.pixel_scale;
        let mut img = vec![0f32; 3 * ph * pw];
        let mut saturated = 0usize;
        let mut coef = vec![0.0; c];
        for y in 0..h {
            for x in 0..w {
                for (k, slot) in coef.iter_mut().enumerate() {
                    *slot = z.get(k, y, x) as f64;
                }
                for r in 0..rows {
                    let row = &self.codec[r * c..(r + 1) * c];
                    let v: f64 = row.iter().zip(&coef).map(|(a, z)| a * z).sum();
                    let v = 0.5 + scale * v;
                    let clamped = v.clamp(0.0, 1.0);
                    if clamped != v {
                        saturated += 1;
                    }
                    let (pc, dy, dx) = (r / (u * u), (r / u) % u, r % u);
                    img[(pc * ph + y * u + dy) * pw + x * u + dx] = clamped as f32;
                }
            }
        }
        Ok((Tensor3::from_vec(3, ph, pw, img)?, saturated))
    }

    pub fn decode(&self, z: &Tensor3) -> Result<Tensor3> {
        Ok(self.decode_with_saturation(z)?.0)
    }

    /// Image → latent: the codec's left inverse (transpose of the orthonormal columns).
    pub fn encode(&self, img: &Tensor3) -> Result<Tensor3> {
        img.expect_shape(self.image_shape(), "encode input")?;
        let (c, h, w) = self.latent_shape();
        let u = self.config.upscale;
        let (_, ph, pw) = self.image_shape();
        let rows = 3 * u * u;
        let inv_scale = 1.0 / self.config.pixel_scale;
        let data = img.data();
        let mut out = vec![0.0f64; c * h * w];
        for y in 0..h {
            for x in 0..w {
                for r in 0..rows {
                    let (pc, dy, dx) = (r / (u * u), (r / u) % u, r % u);
                    let v = (data[(pc * ph + y * u + dy) * pw + x * u + dx] as f64 - 0.5) * inv_scale;
                    let row = &self.codec[r * c..(r + 1) * c];
                    for (k, a) in row.iter().enumerate() {
                        out[(k * h + y) * w + x] += a * v;
                    }
                }
            }
        }
        to_tensor(self.latent_shape(), &out)
    }

    /// Initial latent → image.
    pub fn render(&self, z_t: &Tensor3) -> Result<Tensor3> {
        self.decode(&self.ddim_generate(z_t)?)
    }

    /// Image → estimated initial latent (`ddim_invert ∘ encode`).
    pub fn invert_pixels(&self, img: &Tensor3) -> Result<Tensor3> {
        self.ddim_invert(&self.encode(img)?)
    }

    /// Standard-normal latent drawn from `rng`.
    pub fn sample_latent(&self, rng: &mut Rng) -> Tensor3 {
        let (c, h, w) = self.latent_shape();
        Tensor3::from_fn(c, h, w, |_, _, _| rng.normal() as f32)
    }
}

fn to_tensor(shape: (usize, usize, usize), values: &[f64]) -> Result<Tensor3> {
    let data: Vec<f32> = values.iter().map(|&v| v as f32).collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("channel produced a non-finite latent".into()));
    }
    Tensor3::from_vec(shape.0, shape.1, shape.2, data)
}

/// Zero-sum kernels with L1 norm `gain`, row-major over offsets −1..=1.
fn denoiser_kernels(seed: u64, channels: usize, gain: f64) -> Vec<[f64; 9]> {
    let mut rng = Rng::new(seed, 0xD3);
    (0..channels)
        .map(|_| {
            let mut k = [0.0; 9];
            k.iter_mut().for_each(|v| *v = rng.normal());
            let mean = k.iter().sum::<f64>() / 9.0;
            k.iter_mut().for_each(|v| *v -= mean);
            let l1: f64 = k.iter().map(|v| v.abs()).sum();
            if l1 > 0.0 {
                k.iter_mut().for_each(|v| *v *= gain / l1);
            }
            k
        })
        .collect()
}

/// Frequency response of the circular convolution in [`ToyChannel::denoise`].
fn kernel_spectrum(k: &[f64; 9], h: usize, w: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); h * w];
    for ky in 0..h {
        for kx in 0..w {
            let mut acc = Complex64::default();
            for (ki, &kv) in k.iter().enumerate() {
                // tap (dy, dx) reads z[y − (dy−1), x − (dx−1)], i.e. a shift by +(dy−1, dx−1)
                let (sy, sx) = ((ki / 3) as f64 - 1.0, (ki % 3) as f64 - 1.0);
                let ph = -2.0 * std::f64::consts::PI * (ky as f64 * sy / h as f64 + kx as f64 * sx / w as f64);
                acc += Complex64::from_polar(kv, ph);
            }
            out[ky * w + kx] = acc;
        }
    }
    out
}

/// Codec columns: orthonormal color ⊗ block-DCT atoms, lowest frequencies
/// first, then mixed by a seeded rotation of the latent channels.
fn codec_matrix(seed: u64, channels: usize, u: usize) -> Vec<f64> {
    let mut rng = Rng::new(seed, 0xC0DEC);
    let colors = orthonormal(&mut rng, 3);
    let mut freqs: Vec<(usize, usize)> = (0..u).flat_map(|fy| (0..u).map(move |fx| (fy, fx))).collect();
    freqs.sort_by_key(|&(fy, fx)| (fy + fx, fy));
    let dct = |f: usize, n: usize| -> f64 {
        let a = if f == 0 { (1.0 / u as f64).sqrt() } else { (2.0 / u as f64).sqrt() };
        a * (std::f64::consts::PI * (2 * n + 1) as f64 * f as f64 / (2 * u) as f64).cos()
    };
    let rows = 3 * u * u;
    let atoms: Vec<Vec<f64>> = (0..channels)
        .map(|j| {
            let (fy, fx) = freqs[j / 3];
            let color = &colors[j % 3];
            let mut atom = vec![0.0; rows];
            for pc in 0..3 {
                for dy in 0..u {
                    for dx in 0..u {
                        atom[(pc * u + dy) * u + dx] = color[pc] * dct(fy, dy) * dct(fx, dx);
                    }
                }
            }
            atom
        })
        .collect();
    let mixing = orthonormal(&mut rng, channels);
    let mut out = vec![0.0; rows * channels];
    for r in 0..rows {
        for k in 0..channels {
            out[r * channels + k] = (0..channels).map(|j| atoms[j][r] * mixing[j][k]).sum();
        }
    }
    out
}

/// Rows of a seeded orthogonal `n × n` matrix (Gram–Schmidt on Gaussian rows).
fn orthonormal(rng: &mut Rng, n: usize) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    while rows.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        for r in &rows {
            let d: f64 = v.iter().zip(r).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(r).for_each(|(a, b)| *a -= d * b);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-6 {
            v.iter_mut().for_each(|a| *a /= norm);
            rows.push(v);
        }
    }
    rows
}
