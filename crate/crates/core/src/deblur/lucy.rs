//! Lucy-Richardson deconvolution: multiplicative updates that keep the
//! estimate non-negative and conserve total flux.

use crate::error::{Error, Result};
use crate::raster::{convolve_fft, Image, Kernel};

/// Guard for the ratio denominator; blurred estimates can locally reach
/// zero where the input is dark.
const EPS: f64 = 1e-12;

/// Runs `iters` multiplicative updates
/// `u <- u * (k_flipped * (img / (k * u)))` starting from `u = img`.
///
/// The algorithm assumes non-negative data, so an input with negative
/// pixels is lifted by its minimum first and the lift is undone at the
/// end. Convolutions are circular, which makes the update conserve the
/// total flux of the lifted image exactly (up to the denominator guard).
pub fn lucy_richardson(img: &Image, kernel: &Kernel, iters: usize) -> Result<Image> {
    if iters == 0 {
        return Err(Error::arg("lucy_richardson needs at least one iteration".to_string()));
    }
    // A delta kernel makes every factor exactly 1; skip the FFTs so the
    // fixed point is exact rather than within round-off.
    if kernel.is_delta() {
        return Ok(img.clone());
    }

    let lift = img.data().iter().cloned().fold(f64::INFINITY, f64::min).min(0.0);
    let work = img.with_data(img.data().iter().map(|v| v - lift).collect());

    // Adjoint of circular convolution = convolution with the 180-degree
    // rotated kernel.
    let size = kernel.size();
    let flipped = Kernel::from_taps(size, kernel.taps().iter().rev().cloned().collect())?;

    let mut u = work.clone();
    for _ in 0..iters {
        let blurred = convolve_fft(&u, kernel)?;
        let ratio = work.with_data(
            work.data()
                .iter()
                .zip(blurred.data())
                .map(|(f, c)| f / c.max(EPS))
                .collect(),
        );
        let correction = convolve_fft(&ratio, &flipped)?;
        u = u.with_data(
            u.data()
                .iter()
                .zip(correction.data())
                .map(|(v, c)| v * c)
                .collect(),
        );
    }
    Ok(u.with_data(u.data().iter().map(|v| v + lift).collect()))
}
