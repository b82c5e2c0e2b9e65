//! Circular (wrap-around) convolution through the FFT, plus the 2-D
//! transform helpers reused by the frequency-domain deblurrers.

use std::cell::RefCell;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{Image, Kernel};
use crate::error::Result;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// Row-then-column 2-D transform, in place, unnormalized.
fn fft2_in_place(buf: &mut [Complex<f64>], width: usize, height: usize, inverse: bool) {
    let row_fft = plan(width, inverse);
    for row in buf.chunks_exact_mut(width) {
        row_fft.process(row);
    }
    let col_fft = plan(height, inverse);
    let mut col = vec![Complex::default(); height];
    for x in 0..width {
        for y in 0..height {
            col[y] = buf[y * width + x];
        }
        col_fft.process(&mut col);
        for y in 0..height {
            buf[y * width + x] = col[y];
        }
    }
}

/// Forward 2-D FFT of a real buffer. Unnormalized (DC term = sum of inputs).
pub(crate) fn fft2(data: &[f64], width: usize, height: usize) -> Vec<Complex<f64>> {
    let mut buf: Vec<Complex<f64>> = data.iter().map(|v| Complex::new(*v, 0.0)).collect();
    fft2_in_place(&mut buf, width, height, false);
    buf
}

/// Inverse 2-D FFT returning the real part, normalized by `1/(w*h)` so that
/// `ifft2_real(fft2(x)) == x` up to rounding.
pub(crate) fn ifft2_real(spectrum: &[Complex<f64>], width: usize, height: usize) -> Vec<f64> {
    let mut buf = spectrum.to_vec();
    fft2_in_place(&mut buf, width, height, true);
    let scale = 1.0 / (width * height) as f64;
    buf.into_iter().map(|c| c.re * scale).collect()
}

/// Frequency response of a kernel on a `width` x `height` grid.
pub(crate) type Spectrum = Vec<Complex<f64>>;

/// Embeds the kernel with its center at the origin (taps wrapped to the
/// grid's edges) and transforms it. The DC bin equals the tap sum.
pub(crate) fn spectrum_of_kernel(kernel: &Kernel, width: usize, height: usize) -> Spectrum {
    let mut emb = vec![0.0; width * height];
    let c = (kernel.size() / 2) as i64;
    for row in 0..kernel.size() {
        for col in 0..kernel.size() {
            let ox = (col as i64 - c).rem_euclid(width as i64) as usize;
            let oy = (row as i64 - c).rem_euclid(height as i64) as usize;
            emb[oy * width + ox] += kernel.at(col, row);
        }
    }
    fft2(&emb, width, height)
}

/// Circular convolution of `img` with `kernel`:
/// `out(x, y) = sum_o k(o) * img((x - ox) mod w, (y - oy) mod h)`
/// where `o` runs over tap offsets from the kernel center.
pub fn convolve_fft(img: &Image, kernel: &Kernel) -> Result<Image> {
    let (w, h) = (img.width(), img.height());
    if kernel.size() > w || kernel.size() > h {
        return Err(crate::error::Error::dims(format!(
            "kernel support {} exceeds image {w}x{h}",
            kernel.size()
        )));
    }
    let mut f = fft2(img.data(), w, h);
    let k = spectrum_of_kernel(kernel, w, h);
    for (a, b) in f.iter_mut().zip(&k) {
        *a *= b;
    }
    Ok(img.with_data(ifft2_real(&f, w, h)))
}
