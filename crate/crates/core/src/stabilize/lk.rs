//! Windowed least-squares flow refinement, one pyramid level at a time.
//!
//! Spatial gradients come from the fixed reference image, so the normal
//! equations never chase interpolation noise in the warped frame. Each
//! pass warps the moving frame by the current flow, then accumulates the
//! 2x2 system `sum(grad grad^T) delta = sum(grad (ref - W))` over a
//! square window and adds the solved increment. Window samples whose
//! warp source fell outside the frame are dropped, and a pixel with less
//! than half a window of valid evidence keeps its flow; without that,
//! border pixels integrate clamped junk and the error creeps inward one
//! window radius per pass.

use crate::stabilize::diffops::central_grad;
use crate::stabilize::flow::FlowOptions;
use crate::stabilize::pyramid::{warp_buffer, Level};

/// Minimum structure-tensor eigenvalue (on [0,1] intensities) below which
/// a window counts as flat and contributes no increment.
const EIGEN_GUARD: f64 = 1e-8;

pub(crate) fn refine_level(
    r: &Level,
    f: &Level,
    dx: &mut [f64],
    dy: &mut [f64],
    opts: &FlowOptions,
) {
    let (w, h) = (r.w, r.h);
    let n = w * h;
    let half = (opts.lk_window / 2) as i64;
    // Increments can't sensibly exceed the window the evidence came from.
    let cap = opts.lk_window as f64;
    let min_valid = (opts.lk_window * opts.lk_window).div_ceil(2);
    let mut gx = vec![0.0; n];
    let mut gy = vec![0.0; n];
    central_grad(&r.data, w, h, &mut gx, &mut gy);

    let mut valid = vec![false; n];
    let mut inc_x = vec![0.0; n];
    let mut inc_y = vec![0.0; n];
    for _ in 0..opts.lk_iterations {
        let warped = warp_buffer(f, dx, dy);
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let sx = x as f64 + dx[i];
                let sy = y as f64 + dy[i];
                valid[i] = sx >= 0.0
                    && sx <= (w - 1) as f64
                    && sy >= 0.0
                    && sy <= (h - 1) as f64;
            }
        }

        for y in 0..h as i64 {
            for x in 0..w as i64 {
                let i = y as usize * w + x as usize;
                let (mut a11, mut a12, mut a22) = (0.0, 0.0, 0.0);
                let (mut b1, mut b2) = (0.0, 0.0);
                let mut count = 0usize;
                for oy in -half..=half {
                    let yy = y + oy;
                    if yy < 0 || yy >= h as i64 {
                        continue;
                    }
                    for ox in -half..=half {
                        let xx = x + ox;
                        if xx < 0 || xx >= w as i64 {
                            continue;
                        }
                        let j = yy as usize * w + xx as usize;
                        if !valid[j] {
                            continue;
                        }
                        let e = r.data[j] - warped[j];
                        a11 += gx[j] * gx[j];
                        a12 += gx[j] * gy[j];
                        a22 += gy[j] * gy[j];
                        b1 += gx[j] * e;
                        b2 += gy[j] * e;
                        count += 1;
                    }
                }
                inc_x[i] = 0.0;
                inc_y[i] = 0.0;
                if count < min_valid {
                    continue;
                }
                let tr = a11 + a22;
                let det = a11 * a22 - a12 * a12;
                let lambda_min = 0.5 * tr - (0.25 * tr * tr - det).max(0.0).sqrt();
                if lambda_min < EIGEN_GUARD {
                    continue;
                }
                inc_x[i] = ((a22 * b1 - a12 * b2) / det).clamp(-cap, cap);
                inc_y[i] = ((a11 * b2 - a12 * b1) / det).clamp(-cap, cap);
            }
        }
        for i in 0..n {
            dx[i] += inc_x[i];
            dy[i] += inc_y[i];
        }
    }
}
