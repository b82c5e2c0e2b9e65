//! Frame degradation and sequence synthesis: blur, warp, noise, in that
//! order, with one shared kernel per sequence and fresh tilt fields per
//! frame.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::par;
use crate::raster::{convolve_fft, warp_image, BorderMode, Image, Kernel, Sequence, WarpField};
use crate::sim::otf::{long_exposure_kernel, DEFAULT_KERNEL_SIZE};
use crate::sim::seed;
use crate::sim::tilt::sample_warp_field;
use crate::sim::TurbulenceParams;

/// One observation: `warp(k * u) + noise`. The output is not clamped;
/// clamping happens when a frame is saved.
pub fn degrade_frame(
    u: &Image,
    k: &Kernel,
    field: &WarpField,
    noise_sigma: f64,
    noise_seed: u64,
) -> Result<Image> {
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::arg(format!(
            "noise_sigma = {noise_sigma} must be finite and >= 0"
        )));
    }
    // A delta kernel short-circuits the FFT so the identity degradation is
    // exact, not merely within round-off.
    let blurred = if k.is_delta() {
        u.clone()
    } else {
        convolve_fft(u, k)?
    };
    let mut out = warp_image(&blurred, field, BorderMode::Clamp)?;
    if noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
        for v in out.data_mut() {
            *v += noise_sigma * rng.sample::<f64, _>(StandardNormal);
        }
    }
    Ok(out)
}

/// Kernel support that fits the frame: the default 31, shrunk to the
/// largest odd side not exceeding the image.
pub fn fitting_kernel_size(width: usize, height: usize) -> usize {
    let side = width.min(height).min(DEFAULT_KERNEL_SIZE);
    if side % 2 == 0 {
        side - 1
    } else {
        side
    }
}

/// Simulates a full observed sequence from a clean image: one blur kernel
/// for all frames, an independent tilt field and noise stream per frame
/// (seeds derived from `seed` and the frame index). Frames are generated
/// concurrently; the result only depends on `(u, p, seed)`.
pub fn simulate_sequence(u: &Image, p: &TurbulenceParams, seed: u64) -> Result<Sequence> {
    p.validate()?;
    let kernel = long_exposure_kernel(p, fitting_kernel_size(u.width(), u.height()))?;
    let frames = par::try_map_indexed(p.num_frames, |i| {
        let fs = seed::frame_seed(seed, i);
        let field = sample_warp_field(p, u.width(), u.height(), seed::stream_seed(fs, 0))?;
        degrade_frame(u, &kernel, &field, p.noise_sigma, seed::stream_seed(fs, 1))
    })?;
    Sequence::new(frames, p.clone(), "sim", seed)
}
