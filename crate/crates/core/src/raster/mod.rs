//! Core image types shared by the simulator, stabilizers, deblurrers and
//! metrics: single-channel double-precision rasters, frame sequences and
//! dense displacement fields, plus warping, FFT convolution and file I/O.

mod conv;
mod io;
mod kernel;
mod warp;

pub use conv::convolve_fft;
pub(crate) use conv::{fft2, ifft2_real, spectrum_of_kernel};
pub use io::{load_image, save_image};
pub use kernel::Kernel;
pub use warp::warp_image;

use crate::error::{Error, Result};
use crate::sim::TurbulenceParams;

/// Smallest image side we accept; below this the SSIM window and the flow
/// estimators stop making sense.
pub const MIN_DIM: usize = 8;

/// Single-channel raster in native units `0..dyn_range`, stored row-major
/// as `f64`. Intermediate values may leave the range; clamping happens only
/// on export.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    /// Maximum representable value of the source encoding (255 for 8-bit).
    dyn_range: f64,
    data: Vec<f64>,
}

impl Image {
    /// Zero-filled image.
    pub fn zeros(width: usize, height: usize, dyn_range: f64) -> Result<Self> {
        Self::from_vec(width, height, dyn_range, vec![0.0; width * height])
    }

    /// Constant-valued image.
    pub fn constant(width: usize, height: usize, dyn_range: f64, value: f64) -> Result<Self> {
        Self::from_vec(width, height, dyn_range, vec![value; width * height])
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn<F: FnMut(usize, usize) -> f64>(
        width: usize,
        height: usize,
        dyn_range: f64,
        mut f: F,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::from_vec(width, height, dyn_range, data)
    }

    /// Takes ownership of a row-major buffer. Validates dimensions and
    /// finiteness.
    pub fn from_vec(width: usize, height: usize, dyn_range: f64, data: Vec<f64>) -> Result<Self> {
        if width < MIN_DIM || height < MIN_DIM {
            return Err(Error::arg(format!(
                "image dimensions {width}x{height} below minimum {MIN_DIM}x{MIN_DIM}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::dims(format!(
                "buffer length {} != {width}x{height}",
                data.len()
            )));
        }
        if !(dyn_range > 0.0 && dyn_range.is_finite()) {
            return Err(Error::arg(format!("dyn_range {dyn_range} must be finite and > 0")));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("image data".into()));
        }
        Ok(Image {
            width,
            height,
            dyn_range,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dyn_range(&self) -> f64 {
        self.dyn_range
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Population variance.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.data.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.data.len() as f64
    }

    pub fn same_dims(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// New image with the same shape and dynamic range, data replaced.
    pub(crate) fn with_data(&self, data: Vec<f64>) -> Image {
        debug_assert_eq!(data.len(), self.data.len());
        Image {
            width: self.width,
            height: self.height,
            dyn_range: self.dyn_range,
            data,
        }
    }

    /// Values clamped into `[0, dyn_range]`; used on export.
    pub fn clamped(&self) -> Image {
        let r = self.dyn_range;
        self.with_data(self.data.iter().map(|v| v.clamp(0.0, r)).collect())
    }

    /// Fraction of pixels outside `[0, dyn_range]`.
    pub fn out_of_range_fraction(&self) -> f64 {
        let n = self
            .data
            .iter()
            .filter(|v| **v < 0.0 || **v > self.dyn_range)
            .count();
        n as f64 / self.data.len() as f64
    }

    /// Centered crop of at most `side`x`side`; dimensions no larger than the
    /// source. A source smaller than `side` is returned unchanged.
    pub fn center_crop(&self, side: usize) -> Image {
        let cw = self.width.min(side);
        let ch = self.height.min(side);
        if cw == self.width && ch == self.height {
            return self.clone();
        }
        let x0 = (self.width - cw) / 2;
        let y0 = (self.height - ch) / 2;
        let mut data = Vec::with_capacity(cw * ch);
        for y in 0..ch {
            let row = (y0 + y) * self.width + x0;
            data.extend_from_slice(&self.data[row..row + cw]);
        }
        Image {
            width: cw,
            height: ch,
            dyn_range: self.dyn_range,
            data,
        }
    }
}

/// Dense per-pixel displacement field in pixel units. Backward convention:
/// `warp_image` samples the source at `(x + dx, y + dy)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpField {
    width: usize,
    height: usize,
    dx: Vec<f64>,
    dy: Vec<f64>,
}

impl WarpField {
    pub fn zero(width: usize, height: usize) -> Self {
        WarpField {
            width,
            height,
            dx: vec![0.0; width * height],
            dy: vec![0.0; width * height],
        }
    }

    /// Uniform translation field.
    pub fn constant(width: usize, height: usize, dx: f64, dy: f64) -> Self {
        WarpField {
            width,
            height,
            dx: vec![dx; width * height],
            dy: vec![dy; width * height],
        }
    }

    pub fn from_vecs(width: usize, height: usize, dx: Vec<f64>, dy: Vec<f64>) -> Result<Self> {
        if dx.len() != width * height || dy.len() != width * height {
            return Err(Error::dims(format!(
                "displacement buffers ({}, {}) != {width}x{height}",
                dx.len(),
                dy.len()
            )));
        }
        if dx.iter().chain(dy.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("warp field displacement".into()));
        }
        Ok(WarpField {
            width,
            height,
            dx,
            dy,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dx(&self) -> &[f64] {
        &self.dx
    }

    pub fn dy(&self) -> &[f64] {
        &self.dy
    }

    pub fn dx_mut(&mut self) -> &mut [f64] {
        &mut self.dx
    }

    pub fn dy_mut(&mut self) -> &mut [f64] {
        &mut self.dy
    }

    #[inline]
    pub fn displacement(&self, x: usize, y: usize) -> (f64, f64) {
        let i = y * self.width + x;
        (self.dx[i], self.dy[i])
    }

    /// Largest displacement magnitude over the field.
    pub fn max_magnitude(&self) -> f64 {
        self.dx
            .iter()
            .zip(&self.dy)
            .map(|(a, b)| (a * a + b * b).sqrt())
            .fold(0.0, f64::max)
    }

    pub(crate) fn is_finite(&self) -> bool {
        self.dx.iter().chain(self.dy.iter()).all(|v| v.is_finite())
    }
}

/// How samples falling outside the source raster are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BorderMode {
    /// Clamp coordinates to the image border (default).
    #[default]
    Clamp,
    /// Mirror coordinates at the image border.
    Mirror,
}

/// Ordered list of frames plus the scenario that produced them.
#[derive(Debug, Clone)]
pub struct Sequence {
    frames: Vec<Image>,
    params: TurbulenceParams,
    scene_id: String,
    seed: u64,
}

impl Sequence {
    pub fn new(
        frames: Vec<Image>,
        params: TurbulenceParams,
        scene_id: impl Into<String>,
        seed: u64,
    ) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::EmptySequence);
        }
        if frames.len() != params.num_frames {
            return Err(Error::arg(format!(
                "sequence has {} frames but params.num_frames = {}",
                frames.len(),
                params.num_frames
            )));
        }
        let first = &frames[0];
        if !frames.iter().all(|f| f.same_dims(first)) {
            return Err(Error::dims("sequence frames disagree on dimensions"));
        }
        Ok(Sequence {
            frames,
            params,
            scene_id: scene_id.into(),
            seed,
        })
    }

    /// Wraps loose frames for tests and ad-hoc use; the scenario is recorded
    /// as turbulence-free with `num_frames` matching the input.
    pub fn from_frames(frames: Vec<Image>) -> Result<Self> {
        let params = TurbulenceParams {
            num_frames: frames.len(),
            cn2: 0.0,
            ..TurbulenceParams::default()
        };
        Self::new(frames, params, "adhoc", 0)
    }

    /// Same sequence under a different scene label.
    pub fn with_scene_id(mut self, scene_id: impl Into<String>) -> Self {
        self.scene_id = scene_id.into();
        self
    }

    pub fn frames(&self) -> &[Image] {
        &self.frames
    }

    pub fn params(&self) -> &TurbulenceParams {
        &self.params
    }

    pub fn scene_id(&self) -> &str {
        &self.scene_id
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn width(&self) -> usize {
        self.frames[0].width()
    }

    pub fn height(&self) -> usize {
        self.frames[0].height()
    }

    pub fn dyn_range(&self) -> f64 {
        self.frames[0].dyn_range()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn image_rejects_bad_buffers() {
        assert!(Image::from_vec(8, 8, 255.0, vec![0.0; 63]).is_err());
        assert!(Image::from_vec(4, 8, 255.0, vec![0.0; 32]).is_err());
        assert!(Image::from_vec(8, 8, 255.0, vec![f64::NAN; 64]).is_err());
        assert!(Image::from_vec(8, 8, 0.0, vec![0.0; 64]).is_err());
    }

    #[test]
    fn center_crop_centers() {
        let img = Image::from_fn(16, 12, 255.0, |x, y| (y * 16 + x) as f64).unwrap();
        let c = img.center_crop(8);
        assert_eq!((c.width(), c.height()), (8, 8));
        // top-left of the crop sits at (4, 2) in the source
        assert_eq!(c.at(0, 0), (2 * 16 + 4) as f64);
    }

    #[test]
    fn crop_of_smaller_image_is_identity() {
        let img = Image::constant(10, 9, 255.0, 3.0).unwrap();
        let c = img.center_crop(256);
        assert_eq!(c, img);
    }

    #[test]
    fn warp_field_rejects_non_finite() {
        let bad = WarpField::from_vecs(8, 8, vec![f64::INFINITY; 64], vec![0.0; 64]);
        assert!(bad.is_err());
    }

    #[test]
    fn sequence_checks_frame_count() {
        let f = Image::zeros(8, 8, 255.0).unwrap();
        let params = TurbulenceParams {
            num_frames: 3,
            cn2: 0.0,
            ..TurbulenceParams::default()
        };
        assert!(Sequence::new(vec![f.clone(); 2], params.clone(), "s", 0).is_err());
        assert!(Sequence::new(vec![f; 3], params, "s", 0).is_ok());
    }
}
