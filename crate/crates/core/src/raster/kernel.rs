//! Square convolution kernels with an odd side and unit DC gain.

use crate::error::{Error, Result};

/// Negative taps above this magnitude are rejected outright; smaller ones
/// (numerical ringing from a spectral synthesis) are clipped to zero.
const RINGING_TOL: f64 = 1e-12;

/// How far the tap sum may drift from 1 before normalization is refused.
const DC_TOL: f64 = 1e-6;

/// Square blur kernel, odd side, non-negative taps summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    size: usize,
    taps: Vec<f64>,
}

impl Kernel {
    /// Identity kernel: a single unit tap at the center.
    pub fn delta(size: usize) -> Result<Self> {
        check_size(size)?;
        let mut taps = vec![0.0; size * size];
        taps[(size / 2) * size + size / 2] = 1.0;
        Ok(Kernel { size, taps })
    }

    /// Uniform box blur.
    pub fn box_blur(size: usize) -> Result<Self> {
        check_size(size)?;
        let n = (size * size) as f64;
        Ok(Kernel {
            size,
            taps: vec![1.0 / n; size * size],
        })
    }

    /// Validates a row-major tap buffer: odd square side, no taps below
    /// `-1e-12`, sum within `1e-6` of 1. Tiny negative ringing is clipped to
    /// zero and the taps are renormalized so the DC gain is exactly 1.
    pub fn from_taps(size: usize, taps: Vec<f64>) -> Result<Self> {
        check_size(size)?;
        if taps.len() != size * size {
            return Err(Error::dims(format!(
                "kernel buffer length {} != {size}x{size}",
                taps.len()
            )));
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("kernel taps".into()));
        }
        if let Some(t) = taps.iter().find(|t| **t < -RINGING_TOL) {
            return Err(Error::arg(format!("kernel tap {t} below -{RINGING_TOL}")));
        }
        let mut taps: Vec<f64> = taps.into_iter().map(|t| t.max(0.0)).collect();
        let sum: f64 = taps.iter().sum();
        if (sum - 1.0).abs() > DC_TOL {
            return Err(Error::arg(format!(
                "kernel taps sum to {sum}, expected 1 within {DC_TOL}"
            )));
        }
        for t in &mut taps {
            *t /= sum;
        }
        Ok(Kernel { size, taps })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    /// Tap at row-major position `(col, row)` with `(0, 0)` the top-left.
    #[inline]
    pub fn at(&self, col: usize, row: usize) -> f64 {
        self.taps[row * self.size + col]
    }

    /// Sum of all taps (1 by construction, up to rounding).
    pub fn dc_gain(&self) -> f64 {
        self.taps.iter().sum()
    }

    /// Second moment of the tap distribution about the center,
    /// `sum t(x,y) * ((x-c)^2 + (y-c)^2)` — a scalar measure of spread.
    pub fn second_moment(&self) -> f64 {
        let c = (self.size / 2) as f64;
        let mut acc = 0.0;
        for row in 0..self.size {
            for col in 0..self.size {
                let dx = col as f64 - c;
                let dy = row as f64 - c;
                acc += self.at(col, row) * (dx * dx + dy * dy);
            }
        }
        acc
    }

    /// True when the kernel is a centered delta.
    pub fn is_delta(&self) -> bool {
        let c = (self.size / 2) * self.size + self.size / 2;
        self.taps
            .iter()
            .enumerate()
            .all(|(i, t)| if i == c { (t - 1.0).abs() < 1e-12 } else { *t == 0.0 })
    }
}

fn check_size(size: usize) -> Result<()> {
    if size == 0 || size % 2 == 0 {
        return Err(Error::arg(format!("kernel size {size} must be odd and > 0")));
    }
    Ok(())
}
