//! Backward warping with bilinear interpolation.

use super::{BorderMode, Image, WarpField};
use crate::error::{Error, Result};

/// Resolves an integer coordinate against the border policy.
#[inline]
fn resolve(i: i64, n: usize, border: BorderMode) -> usize {
    let last = (n - 1) as i64;
    match border {
        BorderMode::Clamp => i.clamp(0, last) as usize,
        BorderMode::Mirror => {
            // Whole-sample reflection about 0 and n-1 (abc -> ...ba|abc|ba...).
            if last == 0 {
                return 0;
            }
            let period = 2 * last;
            let mut m = i.rem_euclid(period);
            if m > last {
                m = period - m;
            }
            m as usize
        }
    }
}

/// Samples `img` at a continuous position with bilinear interpolation.
#[inline]
fn sample(img: &Image, sx: f64, sy: f64, border: BorderMode) -> f64 {
    let x0 = sx.floor();
    let y0 = sy.floor();
    let fx = sx - x0;
    let fy = sy - y0;
    let x0 = x0 as i64;
    let y0 = y0 as i64;

    let w = img.width();
    let h = img.height();
    if fx == 0.0 && fy == 0.0 {
        // Integer landing point: return the stored value untouched so that a
        // zero (or integer) field reproduces pixels bit for bit.
        return img.at(resolve(x0, w, border), resolve(y0, h, border));
    }

    let xa = resolve(x0, w, border);
    let xb = resolve(x0 + 1, w, border);
    let ya = resolve(y0, h, border);
    let yb = resolve(y0 + 1, h, border);

    let top = img.at(xa, ya) * (1.0 - fx) + img.at(xb, ya) * fx;
    let bot = img.at(xa, yb) * (1.0 - fx) + img.at(xb, yb) * fx;
    top * (1.0 - fy) + bot * fy
}

/// Warps `src` by the displacement field: output pixel `(x, y)` is the
/// source sampled at `(x + dx, y + dy)` (backward convention). Out-of-bounds
/// samples are resolved by `border`.
pub fn warp_image(src: &Image, field: &WarpField, border: BorderMode) -> Result<Image> {
    if field.width() != src.width() || field.height() != src.height() {
        return Err(Error::dims(format!(
            "warp field {}x{} vs image {}x{}",
            field.width(),
            field.height(),
            src.width(),
            src.height()
        )));
    }
    if !field.is_finite() {
        return Err(Error::NonFinite("warp field displacement".into()));
    }
    let w = src.width();
    let mut out = vec![0.0; w * src.height()];
    for y in 0..src.height() {
        for x in 0..w {
            let (dx, dy) = field.displacement(x, y);
            out[y * w + x] = sample(src, x as f64 + dx, y as f64 + dy, border);
        }
    }
    Ok(src.with_data(out))
}
