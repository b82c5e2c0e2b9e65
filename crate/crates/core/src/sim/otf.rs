//! Long-exposure blur kernel synthesis from the optical transfer function.
//!
//! The OTF on the sensor is the diffraction-limited circular-aperture OTF
//! multiplied by the long-exposure atmospheric term
//! `exp(-3.44 (lambda d nu / r0)^(5/3))`. The kernel is its inverse
//! transform, sampled on an oversized grid to keep aliasing down, then
//! center-cropped to the requested support and renormalized.

use std::f64::consts::FRAC_2_PI;

use crate::error::{Error, Result};
use crate::raster::{ifft2_real, Kernel};
use crate::sim::params::{fried_parameter, TurbulenceParams};

/// Default kernel support; adequate for 256x256 frames except at the very
/// strongest sweep settings, where generation logs an energy warning.
pub const DEFAULT_KERNEL_SIZE: usize = 31;

/// Fraction of PSF energy the cropped support must retain before a warning
/// is logged.
const ENERGY_WARN_FRACTION: f64 = 0.999;

/// Circular-aperture diffraction OTF at normalized frequency `s = nu/nu_c`:
/// `(2/pi) (acos(s) - s sqrt(1 - s^2))` inside the cutoff, 0 beyond.
fn diffraction_otf(s: f64) -> f64 {
    if s >= 1.0 {
        return 0.0;
    }
    FRAC_2_PI * (s.acos() - s * (1.0 - s * s).sqrt())
}

/// Blur kernel for the scenario's own Fried parameter.
pub fn long_exposure_kernel(p: &TurbulenceParams, size: usize) -> Result<Kernel> {
    let r0 = fried_parameter(p)?;
    kernel_for_r0(p, r0, size)
}

/// Blur kernel with an explicit Fried parameter, used by the semi-blind
/// deconvolver to sweep candidate r0 values. `None` means no turbulence
/// (diffraction-limited kernel only).
pub fn kernel_for_r0(p: &TurbulenceParams, r0: Option<f64>, size: usize) -> Result<Kernel> {
    p.validate()?;
    if size < 3 || size % 2 == 0 {
        return Err(Error::arg(format!("kernel size {size} must be odd and >= 3")));
    }
    if let Some(r0) = r0 {
        if !(r0 > 0.0 && r0.is_finite()) {
            return Err(Error::arg(format!("r0 = {r0} must be finite and > 0")));
        }
    }

    // Oversized synthesis grid: finer frequency sampling pushes the periodic
    // copies of the PSF far from the crop window.
    let grid = (4 * size).next_power_of_two().max(128);
    let cutoff = p.aperture_m / (p.wavelength_m * p.focal_m); // cycles/m
    let df = 1.0 / (grid as f64 * p.pixel_pitch_m); // cycles/m per bin
    let nu_s = 1.0 / p.pixel_pitch_m; // sampling frequency of the sensor

    // The diffraction cutoff can exceed the sensor's Nyquist frequency
    // (undersampled optics). Truncating the OTF there would ring; instead
    // alias-fold it, which makes the result the exact spectrum of the
    // continuous PSF sampled at pixel pitch — non-negative by construction.
    let fold = ((cutoff / nu_s) + 0.5).ceil() as i64;
    let response = |nu: f64| -> f64 {
        let d = diffraction_otf(nu / cutoff);
        if d == 0.0 {
            return 0.0;
        }
        match r0 {
            Some(r0) => {
                d * (-3.44 * (p.wavelength_m * p.focal_m * nu / r0).powf(5.0 / 3.0)).exp()
            }
            None => d,
        }
    };

    let mut otf = vec![0.0; grid * grid];
    for iy in 0..grid {
        let fy = signed_bin(iy, grid) * df;
        for ix in 0..grid {
            let fx = signed_bin(ix, grid) * df;
            let mut v = 0.0;
            for my in -fold..=fold {
                let ny = fy + my as f64 * nu_s;
                for mx in -fold..=fold {
                    let nx = fx + mx as f64 * nu_s;
                    v += response(nx.hypot(ny));
                }
            }
            otf[iy * grid + ix] = v;
        }
    }

    // The OTF grid *is* the frequency representation; its inverse transform
    // is the spatial PSF.
    let spectrum: Vec<rustfft::num_complex::Complex<f64>> = otf
        .iter()
        .map(|v| rustfft::num_complex::Complex::new(*v, 0.0))
        .collect();
    let psf = ifft2_real(&spectrum, grid, grid);

    // PSF is centered at the origin with wrap-around; crop the window
    // [-c, c]^2.
    let c = (size / 2) as i64;
    let g = grid as i64;
    let mut taps = Vec::with_capacity(size * size);
    for row in 0..size as i64 {
        for col in 0..size as i64 {
            let sy = (row - c).rem_euclid(g) as usize;
            let sx = (col - c).rem_euclid(g) as usize;
            taps.push(psf[sy * grid + sx]);
        }
    }

    let total: f64 = psf.iter().map(|v| v.abs()).sum();
    let kept: f64 = taps.iter().map(|v| v.abs()).sum();
    if kept < ENERGY_WARN_FRACTION * total {
        log::warn!(
            "kernel support {size} holds {:.3}% of PSF energy (r0 = {:?} m); \
             consider a larger support",
            100.0 * kept / total,
            r0
        );
    }

    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    Kernel::from_taps(size, taps)
}

/// Signed DFT bin index: 0..n/2 positive, the rest negative.
fn signed_bin(i: usize, n: usize) -> f64 {
    if i <= n / 2 {
        i as f64
    } else {
        i as f64 - n as f64
    }
}
