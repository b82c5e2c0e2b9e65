//! Turbulence degradation simulator and sweep-dataset builder.
//!
//! The forward model is `f_i = warp_i(H * u) + n_i`: one long-exposure blur
//! kernel `H` shared by the whole sequence, a fresh correlated random tilt
//! field per frame, and optional additive Gaussian noise. Every random draw
//! derives from explicit 64-bit seeds, so generation is reproducible and
//! scheduling-independent.

mod dataset;
pub(crate) mod degrade;
mod otf;
mod params;
pub(crate) mod seed;
mod tilt;

pub use dataset::{
    build_dataset, load_sequence_dir, DatasetManifest, ManifestRow, SequenceParamsFile,
};
pub(crate) use dataset::format_km;
pub use degrade::{degrade_frame, fitting_kernel_size, simulate_sequence};
pub use otf::{kernel_for_r0, long_exposure_kernel, DEFAULT_KERNEL_SIZE};
pub use params::{fried_parameter, SweepGrid, TurbulenceParams};
pub use tilt::{correlation_length_px, sample_warp_field, tilt_sigma_px};
