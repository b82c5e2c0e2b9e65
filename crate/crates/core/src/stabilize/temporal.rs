//! Pixel-wise temporal references: mean and median over the frames.

use crate::error::Result;
use crate::raster::{Image, Sequence};

/// Arithmetic mean across frames at every pixel.
pub fn temporal_mean(seq: &Sequence) -> Result<Image> {
    let n = seq.len() as f64;
    let mut acc = vec![0.0; seq.width() * seq.height()];
    for f in seq.frames() {
        for (a, v) in acc.iter_mut().zip(f.data()) {
            *a += v;
        }
    }
    for a in &mut acc {
        *a /= n;
    }
    Ok(seq.frames()[0].with_data(acc))
}

/// Pixel-wise median across frames; the lower median when the frame count
/// is even.
pub fn temporal_median(seq: &Sequence) -> Result<Image> {
    let n = seq.len();
    let mid = (n - 1) / 2;
    let mut column = vec![0.0f64; n];
    let mut out = vec![0.0; seq.width() * seq.height()];
    for (i, o) in out.iter_mut().enumerate() {
        for (j, f) in seq.frames().iter().enumerate() {
            column[j] = f.data()[i];
        }
        // Values are finite by Image's invariant, so total_cmp is a plain
        // numeric sort here.
        column.sort_by(f64::total_cmp);
        *o = column[mid];
    }
    Ok(seq.frames()[0].with_data(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::Image;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn seq_of(frames: Vec<Image>) -> Sequence {
        Sequence::from_frames(frames).unwrap()
    }

    #[test]
    fn constant_sequence_is_a_fixed_point() {
        let f = Image::from_fn(9, 8, 255.0, |x, y| (x * y) as f64).unwrap();
        let s = seq_of(vec![f.clone(); 5]);
        assert_eq!(temporal_mean(&s).unwrap(), f);
        assert_eq!(temporal_median(&s).unwrap(), f);
    }

    #[test]
    fn two_point_mean() {
        let zero = Image::zeros(8, 8, 255.0).unwrap();
        let two = Image::constant(8, 8, 255.0, 2.0).unwrap();
        let m = temporal_mean(&seq_of(vec![zero, two])).unwrap();
        assert!(m.data().iter().all(|v| *v == 1.0));
    }

    #[test]
    fn median_rejects_outliers() {
        let mk = |v: f64| Image::constant(8, 8, 255.0, v).unwrap();
        let m = temporal_median(&seq_of(vec![mk(0.0), mk(1.0), mk(100.0)])).unwrap();
        assert_eq!(m.at(3, 3), 1.0);
        // Lower median on an even count.
        let m = temporal_median(&seq_of(vec![mk(0.0), mk(1.0), mk(2.0), mk(3.0)])).unwrap();
        assert_eq!(m.at(0, 0), 1.0);
    }

    #[test]
    fn mean_suppresses_noise_at_sqrt_n() {
        let gt = Image::from_fn(32, 32, 255.0, |x, y| 100.0 + (x + y) as f64).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sigma = 5.0;
        let frames: Vec<Image> = (0..50)
            .map(|_| {
                gt.with_data(
                    gt.data()
                        .iter()
                        .map(|v| v + sigma * rng.sample::<f64, _>(StandardNormal))
                        .collect(),
                )
            })
            .collect();
        let m = temporal_mean(&seq_of(frames)).unwrap();
        let var = m
            .data()
            .iter()
            .zip(gt.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / m.data().len() as f64;
        let residual = var.sqrt();
        let expected = sigma / 50f64.sqrt();
        assert!(
            (residual - expected).abs() < 0.15 * expected,
            "residual {residual}, expected about {expected}"
        );
    }

    #[test]
    fn median_beats_mean_on_outlier_frames() {
        let gt = Image::from_fn(16, 16, 255.0, |x, y| ((x * 16 + y) % 200) as f64).unwrap();
        let mut frames = vec![gt.clone(); 18];
        // Two corrupted frames (about 10%): saturated salt.
        for f in frames.iter_mut().take(2) {
            *f = Image::constant(16, 16, 255.0, 255.0).unwrap();
        }
        let s = seq_of(frames);
        let mse = |img: &Image| {
            img.data()
                .iter()
                .zip(gt.data())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        };
        let mean_err = mse(&temporal_mean(&s).unwrap());
        let median_err = mse(&temporal_median(&s).unwrap());
        assert!(
            median_err < mean_err,
            "median {median_err} not better than mean {mean_err}"
        );
    }

    #[test]
    fn both_are_permutation_invariant() {
        let frames: Vec<Image> = (0..7)
            .map(|i| Image::from_fn(8, 8, 255.0, |x, y| ((x + 2 * y + 3 * i) % 11) as f64).unwrap())
            .collect();
        let mut shuffled = frames.clone();
        shuffled.swap(0, 6);
        shuffled.swap(2, 4);
        shuffled.swap(1, 5);
        assert_eq!(
            temporal_mean(&seq_of(frames.clone())).unwrap(),
            temporal_mean(&seq_of(shuffled.clone())).unwrap()
        );
        assert_eq!(
            temporal_median(&seq_of(frames)).unwrap(),
            temporal_median(&seq_of(shuffled)).unwrap()
        );
    }
}
