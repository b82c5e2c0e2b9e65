//! Wiener filtering: one-shot frequency-domain inversion.

use crate::error::{Error, Result};
use crate::raster::{fft2, ifft2_real, spectrum_of_kernel, Image, Kernel};

/// Inverts the blur in the frequency domain:
/// `U(v) = conj(K(v)) F(v) / (|K(v)|^2 + nsr)`.
///
/// `nsr` is the assumed noise-to-signal power ratio; zero gives a plain
/// inverse filter. Frequencies the kernel removed entirely (denominator
/// zero) are unrecoverable and come back as zero. The output is not
/// clamped to the dynamic range.
pub fn wiener_deconvolve(img: &Image, kernel: &Kernel, nsr: f64) -> Result<Image> {
    if !(nsr >= 0.0 && nsr.is_finite()) {
        return Err(Error::arg(format!("nsr = {nsr} must be finite and >= 0")));
    }
    let (w, h) = (img.width(), img.height());
    let kf = spectrum_of_kernel(kernel, w, h);
    let mut f = fft2(img.data(), w, h);
    for (bin, k) in f.iter_mut().zip(&kf) {
        let denom = k.norm_sqr() + nsr;
        *bin = if denom > 0.0 {
            k.conj() * *bin / denom
        } else {
            Default::default()
        };
    }
    Ok(img.with_data(ifft2_real(&f, w, h)))
}
