//! Image pyramids and flow-field resampling for coarse-to-fine estimation.

/// Grayscale buffer with explicit dimensions; the pyramid works on raw
/// slices so flow code stays free of `Image` bookkeeping.
#[derive(Debug, Clone)]
pub(crate) struct Level {
    pub w: usize,
    pub h: usize,
    pub data: Vec<f64>,
}

/// Halves each dimension: binomial [1 4 6 4 1]/16 smoothing in both axes
/// (clamped borders), then decimation at even coordinates. The smoothing
/// matters: without it, fine patterns alias into the coarse levels and
/// poison the flow initialization there.
fn downsample(src: &Level) -> Level {
    const K: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];
    let (sw, sh) = (src.w, src.h);
    let mut rows = vec![0.0; sw * sh];
    for y in 0..sh {
        for x in 0..sw {
            let mut acc = 0.0;
            for (t, k) in K.iter().enumerate() {
                let xx = (x as i64 + t as i64 - 2).clamp(0, sw as i64 - 1) as usize;
                acc += k * src.data[y * sw + xx];
            }
            rows[y * sw + x] = acc;
        }
    }
    let mut smooth = vec![0.0; sw * sh];
    for y in 0..sh {
        for x in 0..sw {
            let mut acc = 0.0;
            for (t, k) in K.iter().enumerate() {
                let yy = (y as i64 + t as i64 - 2).clamp(0, sh as i64 - 1) as usize;
                acc += k * rows[yy * sw + x];
            }
            smooth[y * sw + x] = acc;
        }
    }
    let w = sw.div_ceil(2);
    let h = sh.div_ceil(2);
    let mut data = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            data[y * w + x] = smooth[2 * y * sw + 2 * x];
        }
    }
    Level { w, h, data }
}

/// Builds a pyramid, finest level first. Stops early once a level would
/// drop under 8 pixels on a side, whatever `levels` asks for.
pub(crate) fn build_pyramid(data: &[f64], w: usize, h: usize, levels: usize) -> Vec<Level> {
    let mut out = vec![Level {
        w,
        h,
        data: data.to_vec(),
    }];
    while out.len() < levels {
        let last = out.last().unwrap();
        if last.w / 2 < 8 || last.h / 2 < 8 {
            break;
        }
        let next = downsample(last);
        out.push(next);
    }
    out
}

/// Resizes a flow component from one level's dimensions to another's with
/// bilinear interpolation. `value_scale` converts displacement units to
/// destination pixels (axis ratio, so dx uses dw/sw and dy uses dh/sh).
pub(crate) fn upscale_flow(
    src: &[f64],
    sw: usize,
    sh: usize,
    dw: usize,
    dh: usize,
    value_scale: f64,
) -> Vec<f64> {
    let scale = value_scale;
    let mut out = vec![0.0; dw * dh];
    for y in 0..dh {
        // Map destination pixel centers into source coordinates.
        let sy = ((y as f64 + 0.5) * sh as f64 / dh as f64 - 0.5).clamp(0.0, sh as f64 - 1.0);
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(sh - 1);
        let fy = sy - y0 as f64;
        for x in 0..dw {
            let sx = ((x as f64 + 0.5) * sw as f64 / dw as f64 - 0.5).clamp(0.0, sw as f64 - 1.0);
            let x0 = sx.floor() as usize;
            let x1 = (x0 + 1).min(sw - 1);
            let fx = sx - x0 as f64;
            let top = src[y0 * sw + x0] * (1.0 - fx) + src[y0 * sw + x1] * fx;
            let bot = src[y1 * sw + x0] * (1.0 - fx) + src[y1 * sw + x1] * fx;
            out[y * dw + x] = (top * (1.0 - fy) + bot * fy) * scale;
        }
    }
    out
}

/// Bilinear sample with clamped borders on a raw buffer.
#[inline]
pub(crate) fn sample_clamped(data: &[f64], w: usize, h: usize, x: f64, y: f64) -> f64 {
    let x = x.clamp(0.0, w as f64 - 1.0);
    let y = y.clamp(0.0, h as f64 - 1.0);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let top = data[y0 * w + x0] * (1.0 - fx) + data[y0 * w + x1] * fx;
    let bot = data[y1 * w + x0] * (1.0 - fx) + data[y1 * w + x1] * fx;
    top * (1.0 - fy) + bot * fy
}

/// Backward-warps a buffer by a flow field: `out(x, y) = src(x+dx, y+dy)`.
pub(crate) fn warp_buffer(src: &Level, dx: &[f64], dy: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; src.w * src.h];
    for y in 0..src.h {
        for x in 0..src.w {
            let i = y * src.w + x;
            out[i] = sample_clamped(
                &src.data,
                src.w,
                src.h,
                x as f64 + dx[i],
                y as f64 + dy[i],
            );
        }
    }
    out
}
