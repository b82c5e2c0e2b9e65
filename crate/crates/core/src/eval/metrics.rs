//! Full-reference quality metrics: PSNR and SSIM.

use crate::error::{Error, Result};
use crate::eval::{SsimMode, SsimOptions};
use crate::raster::Image;

fn check_pair(gt: &Image, rest: &Image) -> Result<()> {
    if !gt.same_dims(rest) {
        return Err(Error::dims(format!(
            "metric inputs {}x{} vs {}x{}",
            gt.width(),
            gt.height(),
            rest.width(),
            rest.height()
        )));
    }
    if gt.dyn_range() != rest.dyn_range() {
        return Err(Error::arg(format!(
            "metric inputs disagree on dynamic range: {} vs {}",
            gt.dyn_range(),
            rest.dyn_range()
        )));
    }
    Ok(())
}

/// Peak signal-to-noise ratio `10*log10(dyn^2 / MSE)` in dB. Identical
/// images have zero MSE and return positive infinity, which downstream
/// CSVs record as the text `inf`.
pub fn psnr(gt: &Image, rest: &Image) -> Result<f64> {
    check_pair(gt, rest)?;
    let n = gt.data().len() as f64;
    let mse: f64 = gt
        .data()
        .iter()
        .zip(rest.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (gt.dyn_range() * gt.dyn_range() / mse).log10())
}

/// Normalized 1-D Gaussian taps for the SSIM window.
fn gaussian_taps(window: usize, sigma: f64) -> Vec<f64> {
    let c = (window / 2) as f64;
    let mut taps: Vec<f64> = (0..window)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    taps
}

/// Valid-mode separable windowed weighted mean: filters rows then columns
/// with `taps`, keeping only positions where the window fits entirely.
/// Output is `(w - win + 1) x (h - win + 1)`.
fn window_means(data: &[f64], w: usize, h: usize, taps: &[f64]) -> Vec<f64> {
    let win = taps.len();
    let ow = w - win + 1;
    let oh = h - win + 1;
    // Rows first: full height, valid width.
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            let mut acc = 0.0;
            for (i, t) in taps.iter().enumerate() {
                acc += t * data[y * w + x + i];
            }
            rows[y * ow + x] = acc;
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = 0.0;
            for (i, t) in taps.iter().enumerate() {
                acc += t * rows[(y + i) * ow + x];
            }
            out[y * ow + x] = acc;
        }
    }
    out
}

/// The SSIM formula on a set of matched moments.
fn ssim_term(mx: f64, my: f64, vx: f64, vy: f64, cov: f64, c1: f64, c2: f64) -> f64 {
    ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
}

/// Structural similarity between `gt` and `rest`.
///
/// `WindowedMean` evaluates the formula on Gaussian-weighted local moments
/// at every position where the window fits and averages the map — the
/// convention used throughout the literature. `Global` applies the same
/// formula once to whole-image moments, a single-statistic variant kept
/// for comparability with summary-style reports.
pub fn ssim(gt: &Image, rest: &Image, opts: &SsimOptions) -> Result<f64> {
    opts.validate()?;
    check_pair(gt, rest)?;
    let (w, h) = (gt.width(), gt.height());
    if w < opts.window || h < opts.window {
        return Err(Error::arg(format!(
            "ssim window {} does not fit a {w}x{h} image",
            opts.window
        )));
    }
    let dyn_range = gt.dyn_range();
    let c1 = (opts.k1 * dyn_range).powi(2);
    let c2 = (opts.k2 * dyn_range).powi(2);
    let x = gt.data();
    let y = rest.data();

    match opts.mode {
        SsimMode::Global => {
            let n = x.len() as f64;
            let mx = x.iter().sum::<f64>() / n;
            let my = y.iter().sum::<f64>() / n;
            let mut vx = 0.0;
            let mut vy = 0.0;
            let mut cov = 0.0;
            for (a, b) in x.iter().zip(y) {
                vx += (a - mx) * (a - mx);
                vy += (b - my) * (b - my);
                cov += (a - mx) * (b - my);
            }
            Ok(ssim_term(mx, my, vx / n, vy / n, cov / n, c1, c2))
        }
        SsimMode::WindowedMean => {
            let taps = gaussian_taps(opts.window, opts.sigma);
            let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
            let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
            let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
            let mx = window_means(x, w, h, &taps);
            let my = window_means(y, w, h, &taps);
            let mxx = window_means(&xx, w, h, &taps);
            let myy = window_means(&yy, w, h, &taps);
            let mxy = window_means(&xy, w, h, &taps);

            let mut acc = 0.0;
            for i in 0..mx.len() {
                let vx = mxx[i] - mx[i] * mx[i];
                let vy = myy[i] - my[i] * my[i];
                let cov = mxy[i] - mx[i] * my[i];
                acc += ssim_term(mx[i], my[i], vx, vy, cov, c1, c2);
            }
            Ok(acc / mx.len() as f64)
        }
    }
}
