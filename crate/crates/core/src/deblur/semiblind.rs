//! Semi-blind deconvolution: the blur model is known up to its Fried
//! parameter, so try every candidate r0, deconvolve, and keep the result
//! a no-reference sharpness score likes best.

use crate::deblur::{deconvolve, DeblurSpec, KernelChoice};
use crate::error::{Error, Result};
use crate::par;
use crate::raster::Image;
use crate::sim::degrade::fitting_kernel_size;
use crate::sim::{kernel_for_r0, TurbulenceParams};

/// Weight of the out-of-range fraction in the sharpness score. Ringing
/// from over-deconvolution overshoots the dynamic range, which raw
/// Laplacian variance would otherwise reward.
const RINGING_PENALTY: f64 = 0.1;

/// Variance of the periodic 4-neighbor Laplacian, normalized by the
/// intensity variance, minus [`RINGING_PENALTY`] times the fraction of
/// pixels outside `[0, dyn_range]`. Flat images score 0.
fn sharpness_score(img: &Image) -> f64 {
    let (w, h) = (img.width(), img.height());
    let d = img.data();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;

    let mut out_of_range = 0usize;
    for v in d {
        if *v < 0.0 || *v > img.dyn_range() {
            out_of_range += 1;
        }
    }
    let penalty = RINGING_PENALTY * out_of_range as f64 / n;
    if var == 0.0 {
        return -penalty;
    }

    let mut lap_sum = 0.0;
    let mut lap_sq = 0.0;
    for y in 0..h {
        let up = if y == 0 { h - 1 } else { y - 1 };
        let dn = if y == h - 1 { 0 } else { y + 1 };
        for x in 0..w {
            let lt = if x == 0 { w - 1 } else { x - 1 };
            let rt = if x == w - 1 { 0 } else { x + 1 };
            let lap = d[y * w + lt] + d[y * w + rt] + d[up * w + x] + d[dn * w + x]
                - 4.0 * d[y * w + x];
            lap_sum += lap;
            lap_sq += lap * lap;
        }
    }
    let lap_mean = lap_sum / n;
    let lap_var = lap_sq / n - lap_mean * lap_mean;
    lap_var / var - penalty
}

/// Deconvolves with every kernel the spec's r0 grid generates and returns
/// the sharpest result together with the r0 that produced it.
///
/// Grid points are scored independently (and concurrently), so the
/// outcome does not depend on evaluation order; exact score ties go to
/// the smallest r0.
pub fn semiblind_deconvolve(
    img: &Image,
    p: &TurbulenceParams,
    spec: &DeblurSpec,
) -> Result<(Image, f64)> {
    spec.validate()?;
    let grid = match &spec.kernel {
        KernelChoice::SemiBlind { r0_grid } => r0_grid,
        KernelChoice::Fixed(_) => {
            return Err(Error::arg(
                "semiblind_deconvolve needs an r0 grid, got a fixed kernel".to_string(),
            ))
        }
    };
    let size = fitting_kernel_size(img.width(), img.height());
    let scored: Vec<(Image, f64)> = par::try_map_indexed(grid.len(), |i| {
        let kernel = kernel_for_r0(p, Some(grid[i]), size)?;
        let out = deconvolve(img, &kernel, spec)?;
        let score = sharpness_score(&out);
        Ok::<_, Error>((out, score))
    })?;

    let mut best = 0usize;
    for i in 1..grid.len() {
        let (score, r0) = (scored[i].1, grid[i]);
        let (bs, br) = (scored[best].1, grid[best]);
        if score > bs || (score == bs && r0 < br) {
            best = i;
        }
    }
    let r0 = grid[best];
    Ok((scored.into_iter().nth(best).expect("non-empty grid").0, r0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deblur::DeblurMethod;
    use crate::raster::convolve_fft;
    use crate::sim::{fried_parameter, long_exposure_kernel};

    /// Strong-turbulence scenario so the candidate kernels differ a lot.
    fn strong_params() -> TurbulenceParams {
        TurbulenceParams::for_scenario(3.0, 5e-14)
    }

    fn scene(w: usize, h: usize) -> Image {
        Image::from_fn(w, h, 255.0, |x, y| {
            let (xf, yf) = (x as f64, y as f64);
            let mut v = 70.0 + 45.0 * (xf / 6.3).sin() * (yf / 5.1).cos();
            if (x / 12 + y / 12) % 2 == 0 {
                v += 80.0;
            }
            v
        })
        .unwrap()
    }

    #[test]
    fn grid_search_finds_the_true_r0() {
        let p = strong_params();
        let r0 = fried_parameter(&p).unwrap().expect("turbulent scenario");
        let img = scene(64, 64);
        let k = long_exposure_kernel(&p, fitting_kernel_size(64, 64)).unwrap();
        let blurred = convolve_fft(&img, &k).unwrap();

        let spec =
            DeblurSpec::semi_blind(DeblurMethod::Wiener, vec![r0 / 4.0, r0, 4.0 * r0]);
        let (_, chosen) = semiblind_deconvolve(&blurred, &p, &spec).unwrap();
        assert_eq!(chosen, r0, "picked {chosen}, true {r0}");
    }

    #[test]
    fn single_candidate_is_chosen_outright() {
        let p = strong_params();
        let img = scene(32, 32);
        let spec = DeblurSpec::semi_blind(DeblurMethod::Wiener, vec![0.02]);
        let (_, chosen) = semiblind_deconvolve(&img, &p, &spec).unwrap();
        assert_eq!(chosen, 0.02);
    }

    #[test]
    fn flat_image_ties_break_to_smallest_r0() {
        let p = strong_params();
        let img = Image::from_fn(32, 32, 255.0, |_, _| 99.0).unwrap();
        let spec = DeblurSpec::semi_blind(DeblurMethod::Wiener, vec![0.05, 0.004, 0.2]);
        let (out, chosen) = semiblind_deconvolve(&img, &p, &spec).unwrap();
        assert_eq!(chosen, 0.004);
        // A constant stays constant; the Wiener filter's DC gain is
        // 1/(1 + nsr), so the level shrinks by that factor.
        let expect = 99.0 / (1.0 + spec.nsr);
        assert!(out.data().iter().all(|v| (v - expect).abs() < 1e-9));
    }

    #[test]
    fn fixed_kernel_spec_is_rejected() {
        let p = strong_params();
        let img = scene(16, 16);
        let spec = DeblurSpec::with_kernel(
            DeblurMethod::Wiener,
            crate::raster::Kernel::delta(3).unwrap(),
        );
        assert!(semiblind_deconvolve(&img, &p, &spec).is_err());
    }
}
