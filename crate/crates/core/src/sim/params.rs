//! Physical scenario parameters, the sweep grid, and the Fried parameter.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical scenario for one degraded sequence: optics, path, turbulence
/// strength and sensor noise. Lengths are meters, `noise_sigma` is in gray
/// levels of the source image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TurbulenceParams {
    /// Sensor-to-scene distance L.
    pub path_length_m: f64,
    /// Refractive-index structure constant C_n^2, m^(-2/3). 0 disables
    /// turbulence (diffraction blur only, no warping).
    pub cn2: f64,
    /// Aperture diameter D.
    pub aperture_m: f64,
    /// Focal length d.
    pub focal_m: f64,
    /// Wavelength lambda.
    pub wavelength_m: f64,
    /// Frames per sequence N.
    pub num_frames: usize,
    /// Std of the additive Gaussian noise n_i, gray levels.
    pub noise_sigma: f64,
    /// Sensor pixel size.
    pub pixel_pitch_m: f64,
}

impl Default for TurbulenceParams {
    fn default() -> Self {
        TurbulenceParams {
            path_length_m: 1000.0,
            cn2: 0.0,
            aperture_m: 0.054,
            focal_m: 0.3,
            wavelength_m: 0.525e-6,
            num_frames: 50,
            noise_sigma: 0.0,
            pixel_pitch_m: 4e-6,
        }
    }
}

impl TurbulenceParams {
    /// Scenario for one sweep cell: distance in km and C_n^2, everything
    /// else at defaults.
    pub fn for_scenario(l_km: f64, cn2: f64) -> Self {
        TurbulenceParams {
            path_length_m: l_km * 1000.0,
            cn2,
            ..TurbulenceParams::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            (self.path_length_m, "path_length_m"),
            (self.aperture_m, "aperture_m"),
            (self.focal_m, "focal_m"),
            (self.wavelength_m, "wavelength_m"),
            (self.pixel_pitch_m, "pixel_pitch_m"),
        ];
        for (v, name) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::arg(format!("{name} = {v} must be finite and > 0")));
            }
        }
        if !(self.cn2 >= 0.0 && self.cn2.is_finite()) {
            return Err(Error::arg(format!("cn2 = {} must be finite and >= 0", self.cn2)));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::arg(format!(
                "noise_sigma = {} must be finite and >= 0",
                self.noise_sigma
            )));
        }
        if self.num_frames < 1 {
            return Err(Error::arg("num_frames must be >= 1"));
        }
        Ok(())
    }
}

/// Fried parameter r0 in meters for a plane wave through constant-C_n^2
/// turbulence: `r0 = (0.423 k^2 cn2 L)^(-3/5)` with `k = 2 pi / lambda`.
/// Returns `None` when `cn2 == 0` (no turbulence); callers branch on it.
pub fn fried_parameter(p: &TurbulenceParams) -> Result<Option<f64>> {
    p.validate()?;
    if p.cn2 == 0.0 {
        return Ok(None);
    }
    let k = std::f64::consts::TAU / p.wavelength_m;
    Ok(Some((0.423 * k * k * p.cn2 * p.path_length_m).powf(-3.0 / 5.0)))
}

/// Parameter sweep: every (distance, a, b) combination becomes one
/// sequence per ground truth, with `C_n^2 = a * 10^(-b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub distances_km: Vec<f64>,
    pub a_values: Vec<u32>,
    pub b_values: Vec<u32>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            distances_km: vec![1.0, 2.0, 3.0, 4.0],
            a_values: vec![1, 3, 5, 7, 9],
            b_values: vec![14, 15, 16, 17],
        }
    }
}

/// The turbulence strength encoded by a sweep cell. Parsed from the decimal
/// spelled out, so the result is the correctly rounded double for a*10^-b
/// and prints back as e.g. `5e-15` (powi drifts a ULP at these exponents).
pub fn cn2_of(a: u32, b: u32) -> f64 {
    format!("{a}e-{b}").parse().expect("valid float literal")
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        if self.distances_km.is_empty() || self.a_values.is_empty() || self.b_values.is_empty() {
            return Err(Error::arg("sweep grid axes must all be non-empty"));
        }
        if self.distances_km.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(Error::arg("sweep distances must be finite and > 0"));
        }
        Ok(())
    }

    /// All (l_km, a, b) cells in row-major order: distance outermost,
    /// b innermost.
    pub fn combinations(&self) -> Vec<(f64, u32, u32)> {
        let mut out = Vec::with_capacity(self.len());
        for &l in &self.distances_km {
            for &a in &self.a_values {
                for &b in &self.b_values {
                    out.push((l, a, b));
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.distances_km.len() * self.a_values.len() * self.b_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid with a single cell; handy for tests and smoke runs.
    pub fn single(l_km: f64, a: u32, b: u32) -> Self {
        SweepGrid {
            distances_km: vec![l_km],
            a_values: vec![a],
            b_values: vec![b],
        }
    }
}
