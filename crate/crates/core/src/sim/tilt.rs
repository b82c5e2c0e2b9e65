//! Correlated random tilt fields: the per-frame geometric distortion.
//!
//! Each displacement component is white Gaussian noise smoothed by a
//! wrap-around Gaussian filter (correlation length from the optics), then
//! rescaled so every pixel's displacement std is exactly the tilt sigma of
//! the scenario.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::raster::{fft2, ifft2_real, WarpField, MIN_DIM};
use crate::sim::params::{fried_parameter, TurbulenceParams};

/// Hard cap on the per-pixel tilt std; extreme sweep corners would
/// otherwise produce arbitrarily large warps.
const TILT_CAP_PX: f64 = 8.0;

/// Per-pixel displacement std in pixels:
/// `(0.36 lambda / r0) (D / r0)^(1/6) d / pitch`, clamped to [0, 8].
/// Zero when there is no turbulence.
pub fn tilt_sigma_px(p: &TurbulenceParams) -> Result<f64> {
    let Some(r0) = fried_parameter(p)? else {
        return Ok(0.0);
    };
    let angle = 0.36 * p.wavelength_m / r0 * (p.aperture_m / r0).powf(1.0 / 6.0);
    Ok((angle * p.focal_m / p.pixel_pitch_m).clamp(0.0, TILT_CAP_PX))
}

/// Correlation length of the tilt field in pixels:
/// `max(4, round(d lambda / (D pitch)))`.
pub fn correlation_length_px(p: &TurbulenceParams) -> usize {
    let l = (p.focal_m * p.wavelength_m / (p.aperture_m * p.pixel_pitch_m)).round() as i64;
    l.max(4) as usize
}

/// Draws one tilt field. Deterministic in (params, dimensions, seed); the
/// same seed always reproduces the same field bit for bit.
pub fn sample_warp_field(
    p: &TurbulenceParams,
    width: usize,
    height: usize,
    seed: u64,
) -> Result<WarpField> {
    if width < MIN_DIM || height < MIN_DIM {
        return Err(Error::arg(format!(
            "warp field {width}x{height} below minimum {MIN_DIM}x{MIN_DIM}"
        )));
    }
    let sigma = tilt_sigma_px(p)?;
    if sigma == 0.0 {
        return Ok(WarpField::zero(width, height));
    }
    let ell = correlation_length_px(p) as f64;

    // Wrap-around Gaussian filter; only its shape matters since the field
    // is rescaled to the target std afterwards.
    let mut filter = vec![0.0; width * height];
    for y in 0..height {
        let wy = y.min(height - y) as f64;
        for x in 0..width {
            let wx = x.min(width - x) as f64;
            filter[y * width + x] = (-(wx * wx + wy * wy) / (2.0 * ell * ell)).exp();
        }
    }
    let sum_sq: f64 = filter.iter().map(|v| v * v).sum();
    // Filtered unit-variance white noise has per-pixel variance sum_sq
    // (circular convolution, exact at every pixel).
    let scale = sigma / sum_sq.sqrt();
    let filter_spec = fft2(&filter, width, height);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let component = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let noise: Vec<f64> = (0..width * height)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mut spec = fft2(&noise, width, height);
        for (a, b) in spec.iter_mut().zip(&filter_spec) {
            *a *= *b;
        }
        ifft2_real(&spec, width, height)
            .into_iter()
            .map(|v| v * scale)
            .collect()
    };
    let dx = component(&mut rng);
    let dy = component(&mut rng);
    WarpField::from_vecs(width, height, dx, dy)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(cn2: f64) -> TurbulenceParams {
        TurbulenceParams::for_scenario(2.0, cn2)
    }

    #[test]
    fn no_turbulence_means_zero_field() {
        let f = sample_warp_field(&params(0.0), 16, 16, 7).unwrap();
        assert!(f.dx().iter().chain(f.dy().iter()).all(|v| *v == 0.0));
    }

    #[test]
    fn same_seed_reproduces_bits() {
        let p = params(1e-14);
        let a = sample_warp_field(&p, 24, 16, 42).unwrap();
        let b = sample_warp_field(&p, 24, 16, 42).unwrap();
        assert_eq!(a, b);
        let c = sample_warp_field(&p, 24, 16, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn default_optics_correlation_length_is_floor() {
        // d lambda / (D pitch) = 0.73 for the default optics; the floor of 4
        // takes over.
        assert_eq!(correlation_length_px(&params(1e-15)), 4);
    }

    #[test]
    fn tilt_sigma_is_capped() {
        // Strongest sweep corner exceeds the cap.
        let p = TurbulenceParams::for_scenario(4.0, 9e-14);
        assert_eq!(tilt_sigma_px(&p).unwrap(), 8.0);
        // A mild scenario stays well below it.
        let weak = tilt_sigma_px(&params(1e-15)).unwrap();
        assert!(weak > 0.0 && weak < 1.0, "sigma {weak}");
    }

    #[test]
    fn monte_carlo_moments_match_target() {
        // 10^4 independent fields; the tracked pixel's mean should sit
        // within 4 standard errors of 0 and its std within 5% of sigma_t.
        let p = params(1e-15);
        let sigma = tilt_sigma_px(&p).unwrap();
        let n = 10_000;
        let mut samples = Vec::with_capacity(n);
        for i in 0..n {
            let f = sample_warp_field(&p, 16, 16, 1000 + i as u64).unwrap();
            samples.push(f.dx()[5 * 16 + 7]);
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        assert!(mean.abs() < 4.0 * sigma / 100.0, "mean {mean} vs sigma {sigma}");
        assert!((std - sigma).abs() < 0.05 * sigma, "std {std} vs sigma {sigma}");
    }

    #[test]
    fn neighbours_are_positively_correlated() {
        // The whole point of the smoothing: adjacent pixels move together.
        let p = params(1e-14);
        let (mut xy, mut xx) = (0.0, 0.0);
        for i in 0..200 {
            let f = sample_warp_field(&p, 16, 16, i).unwrap();
            let a = f.dx()[8 * 16 + 8];
            let b = f.dx()[8 * 16 + 9];
            xy += a * b;
            xx += a * a;
        }
        assert!(xy / xx > 0.5, "neighbour correlation {}", xy / xx);
    }

    #[test]
    fn tiny_fields_are_rejected() {
        assert!(sample_warp_field(&params(1e-15), 4, 16, 0).is_err());
    }
}
