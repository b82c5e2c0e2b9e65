//! The iterative flow-and-fuse stabilizer.
//!
//! Starting from the temporal mean, each outer round registers every frame
//! onto the current reference with dense optical flow, warps it, and
//! replaces the reference by the regularized fusion of the warped stack.
//! The fusion objective `sum_i ||u - w_i||^2 + mu * Reg(u)` is evaluated
//! before and after each fusion step (with that round's warps) and the
//! solve is required not to go uphill.

use crate::error::{Error, Result};
use crate::par;
use crate::raster::{warp_image, BorderMode, Image, Sequence};
use crate::stabilize::diffops::total_variation;
use crate::stabilize::flow::estimate_flow;
use crate::stabilize::fusion::{fuse_nltv, fuse_tv, nltv_value};
use crate::stabilize::nltv::nltv_weights;
use crate::stabilize::temporal::temporal_mean;
use crate::stabilize::{Regularizer, StabilizerKind, StabilizerSpec};

/// A stabilized image plus the per-round fusion objectives (empty for the
/// plain temporal average).
#[derive(Debug, Clone)]
pub struct StabilizeResult {
    pub image: Image,
    pub objectives: Vec<f64>,
}

/// Runs whatever stabilizer `spec` describes.
pub fn stabilize(seq: &Sequence, spec: &StabilizerSpec) -> Result<StabilizeResult> {
    spec.validate()?;
    match spec.kind {
        StabilizerKind::TemporalAverage => Ok(StabilizeResult {
            image: temporal_mean(seq)?,
            objectives: Vec::new(),
        }),
        StabilizerKind::MaoGilles => run(seq, spec),
    }
}

/// The variational stabilizer itself, regardless of `spec.kind`.
pub fn mao_gilles(seq: &Sequence, spec: &StabilizerSpec) -> Result<Image> {
    spec.validate()?;
    Ok(run(seq, spec)?.image)
}

fn run(seq: &Sequence, spec: &StabilizerSpec) -> Result<StabilizeResult> {
    let frames = seq.frames();
    if frames.len() < 2 {
        return Err(Error::arg(
            "variational stabilization needs at least 2 frames",
        ));
    }
    let n = frames.len();
    let (w, h) = (frames[0].width(), frames[0].height());
    let npix = w * h;

    let mut u = temporal_mean(seq)?;
    let mut objectives = Vec::with_capacity(spec.outer_iterations);

    for _ in 0..spec.outer_iterations {
        let reference = u;
        // Register and warp every frame onto the current reference.
        let warped: Vec<Image> = par::try_map_indexed(n, |i| {
            let field = estimate_flow(&reference, &frames[i], &spec.flow)?;
            warp_image(&frames[i], &field, BorderMode::Clamp)
        })?;

        // sum_i ||u - w_i||^2 = n*||u - mean||^2 + sum_i ||w_i - mean||^2.
        let mut mean = vec![0.0; npix];
        for wf in &warped {
            for (m, v) in mean.iter_mut().zip(wf.data()) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let mut data_const = 0.0;
        for wf in &warped {
            for (m, v) in mean.iter().zip(wf.data()) {
                let d = v - m;
                data_const += d * d;
            }
        }

        let prev = reference.data();
        let (candidate, graph) = match spec.regularizer {
            Regularizer::Tv => (fuse_tv(&mean, prev, w, h, n, spec.fusion_mu), None),
            Regularizer::Nltv => {
                let g = nltv_weights(&reference, spec);
                let out = fuse_nltv(&mean, prev, n, spec.fusion_mu, &g);
                (out, Some(g))
            }
        };

        let objective = |x: &[f64]| -> f64 {
            let dev: f64 = x.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum();
            let reg = match &graph {
                None => total_variation(x, w, h),
                Some(g) => nltv_value(x, g),
            };
            n as f64 * dev + data_const + spec.fusion_mu * reg
        };
        let before = objective(prev);
        let after = objective(&candidate);
        assert!(
            after <= before + 1e-6 * (1.0 + before.abs()),
            "fusion went uphill: {before} -> {after}"
        );
        objectives.push(after);
        u = reference.with_data(candidate);
    }
    Ok(StabilizeResult {
        image: u,
        objectives,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::WarpField;
    use crate::stabilize::FlowOptions;

    /// Test card: blocks, a diagonal edge, and smooth shading.
    fn card(w: usize, h: usize) -> Image {
        Image::from_fn(w, h, 255.0, |x, y| {
            let mut v = 90.0 + 40.0 * (x as f64 / 6.1).sin() + 30.0 * (y as f64 / 5.3).cos();
            if (x / 8 + y / 8) % 2 == 0 {
                v += 55.0;
            }
            if x + y < (w + h) / 3 {
                v -= 35.0;
            }
            v.clamp(0.0, 255.0)
        })
        .unwrap()
    }

    fn int_shifted(img: &Image, sx: f64, sy: f64) -> Image {
        let f = WarpField::constant(img.width(), img.height(), -sx, -sy);
        warp_image(img, &f, BorderMode::Clamp).unwrap()
    }

    fn psnr_interior(a: &Image, b: &Image, margin: usize) -> f64 {
        let (w, h) = (a.width(), a.height());
        let mut mse = 0.0;
        let mut cnt = 0usize;
        for y in margin..h - margin {
            for x in margin..w - margin {
                let d = a.at(x, y) - b.at(x, y);
                mse += d * d;
                cnt += 1;
            }
        }
        10.0 * (255.0 * 255.0 / (mse / cnt as f64)).log10()
    }

    #[test]
    fn identical_frames_pass_through() {
        let img = card(48, 48);
        let seq = Sequence::from_frames(vec![img.clone(); 6]).unwrap();
        let mut spec = StabilizerSpec::default();
        spec.fusion_mu = 1e-6;
        let out = mao_gilles(&seq, &spec).unwrap();
        let worst = out
            .data()
            .iter()
            .zip(img.data())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(worst < 0.5, "max deviation {worst}");
    }

    #[test]
    fn shifted_copies_beat_the_temporal_mean() {
        let gt = card(64, 64);
        // Deterministic integer jitter within +-2 px.
        let shifts = [
            (2.0, -1.0),
            (-2.0, 0.0),
            (1.0, 2.0),
            (0.0, -2.0),
            (-1.0, 1.0),
            (2.0, 2.0),
            (-2.0, -2.0),
            (1.0, 0.0),
            (0.0, 1.0),
            (-1.0, -2.0),
        ];
        let frames: Vec<Image> = shifts.iter().map(|&(sx, sy)| int_shifted(&gt, sx, sy)).collect();
        let seq = Sequence::from_frames(frames).unwrap();

        let mean = temporal_mean(&seq).unwrap();
        let out = mao_gilles(&seq, &StabilizerSpec::default()).unwrap();

        let p_mean = psnr_interior(&mean, &gt, 6);
        let p_mg = psnr_interior(&out, &gt, 6);
        assert!(
            p_mg >= p_mean + 1.0,
            "stabilizer {p_mg:.2} dB vs mean {p_mean:.2} dB"
        );
    }

    #[test]
    fn huge_mu_flattens_the_output() {
        let gt = card(48, 48);
        let frames: Vec<Image> = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)]
            .iter()
            .map(|&(sx, sy)| int_shifted(&gt, sx, sy))
            .collect();
        let seq = Sequence::from_frames(frames).unwrap();
        let mut spec = StabilizerSpec::default();
        spec.fusion_mu = 1e6;
        let out = mao_gilles(&seq, &spec).unwrap();
        let tv_in = total_variation(gt.data(), 48, 48);
        let tv_out = total_variation(out.data(), 48, 48);
        assert!(tv_out < 0.01 * tv_in, "TV {tv_out} vs input {tv_in}");
    }

    /// Shifts content by (sx, sy) with wrap-around, so no border junk is
    /// introduced and the two fixtures differ by position only.
    fn wrap_shifted(img: &Image, sx: i64, sy: i64) -> Image {
        let (w, h) = (img.width() as i64, img.height() as i64);
        Image::from_fn(img.width(), img.height(), img.dyn_range(), |x, y| {
            img.at(
                (x as i64 - sx).rem_euclid(w) as usize,
                (y as i64 - sy).rem_euclid(h) as usize,
            )
        })
        .unwrap()
    }

    /// Smooth wideband texture with no flat patches, so window
    /// least-squares flow is well conditioned everywhere.
    fn waves(w: usize, h: usize) -> Image {
        Image::from_fn(w, h, 255.0, |x, y| {
            let (xf, yf) = (x as f64, y as f64);
            120.0
                + 45.0 * (xf / 4.9).sin() * (yf / 6.1).cos()
                + 30.0 * ((xf + 0.7 * yf) / 8.3).sin()
                + 20.0 * (xf / 11.7).cos() * (yf / 4.2).sin()
        })
        .unwrap()
    }

    #[test]
    fn integer_shift_equivariance() {
        // Shifting every input frame by the same integer offset should
        // shift the stabilized output by that offset and change nothing
        // else, away from the borders where warp clamping differs.
        let gt = waves(64, 64);
        let shifts = [(1, 0), (0, -1), (-1, 1), (1, 1), (0, 0)];
        let frames: Vec<Image> = shifts.iter().map(|&(sx, sy)| wrap_shifted(&gt, sx, sy)).collect();
        let seq = Sequence::from_frames(frames.clone()).unwrap();

        let spec = StabilizerSpec::default();
        let out = mao_gilles(&seq, &spec).unwrap();

        let (w, h) = (64, 64);
        for (ox, oy) in [(3i64, 2i64), (4, 4)] {
            let shifted_seq = Sequence::from_frames(
                frames.iter().map(|f| wrap_shifted(f, ox, oy)).collect(),
            )
            .unwrap();
            let out_shifted = mao_gilles(&shifted_seq, &spec).unwrap();
            let moved = wrap_shifted(&out, ox, oy);
            let mut worst = 0.0f64;
            for y in 16..h - 16 {
                for x in 16..w - 16 {
                    worst = worst.max((moved.at(x, y) - out_shifted.at(x, y)).abs());
                }
            }
            assert!(
                worst < 1.0,
                "shift ({ox},{oy}): max interior deviation {worst} gray levels"
            );
        }
    }

    #[test]
    fn objectives_are_recorded_and_finite() {
        let gt = card(48, 48);
        let frames: Vec<Image> = [(1.0, 0.0), (-1.0, 1.0), (0.0, -1.0)]
            .iter()
            .map(|&(sx, sy)| int_shifted(&gt, sx, sy))
            .collect();
        let seq = Sequence::from_frames(frames).unwrap();
        for reg in [Regularizer::Tv, Regularizer::Nltv] {
            let spec = StabilizerSpec::mao_gilles_spec(reg, FlowOptions::default());
            let res = stabilize(&seq, &spec).unwrap();
            assert_eq!(res.objectives.len(), spec.outer_iterations);
            assert!(res.objectives.iter().all(|o| o.is_finite()));
        }
    }

    #[test]
    fn temporal_average_kind_dispatches_to_the_mean() {
        let gt = card(48, 48);
        let seq = Sequence::from_frames(vec![gt.clone(), int_shifted(&gt, 1.0, 0.0)]).unwrap();
        let res = stabilize(&seq, &StabilizerSpec::temporal_average()).unwrap();
        let mean = temporal_mean(&seq).unwrap();
        assert_eq!(res.image.data(), mean.data());
        assert!(res.objectives.is_empty());
    }

    #[test]
    fn single_frame_is_rejected() {
        let seq = Sequence::from_frames(vec![card(32, 32)]).unwrap();
        assert!(mao_gilles(&seq, &StabilizerSpec::default()).is_err());
    }
}
