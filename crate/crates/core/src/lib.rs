//! Benchmark suite for atmospheric-turbulence mitigation: simulate
//! degraded sequences over a parameter sweep, stabilize and deblur them
//! with classic algorithms (or external commands), and score everything
//! with PSNR/SSIM into CSV reports.
//!
//! The crate is organized along the processing chain:
//!
//! - [`raster`]: image/sequence/warp-field types, warping, FFT
//!   convolution, PNG/PGM I/O.
//! - [`sim`]: the degradation model `f_i = warp_i(H * u) + n_i` and the
//!   sweep-dataset builder.
//! - [`stabilize`]: temporal fusion, optical flow, and the iterative
//!   variational stabilizer.
//! - [`deblur`]: Wiener, Lucy-Richardson, TV deconvolution, and semi-blind
//!   kernel-parameter search.
//! - [`eval`]: metrics, the external-restorer protocol, sweep evaluation
//!   and aggregation.
//!
//! All computation is deterministic for a given seed: results are
//! identical across worker counts and with the `parallel` feature
//! disabled.

pub mod error;
pub mod eval;
pub mod par;
pub mod raster;
pub mod deblur;
pub mod sim;
pub mod stabilize;

pub use error::{Error, Result};
