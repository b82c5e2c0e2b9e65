//! Deconvolution baselines for undoing the stationary blur: Wiener
//! filtering, Lucy-Richardson, TV-regularized inversion, and a semi-blind
//! wrapper that picks the atmospheric kernel parameter by grid search
//! when the true one is unknown.
//!
//! All of them work in double precision with circular boundaries, the
//! same convention as [`crate::raster::convolve_fft`], so deconvolving an
//! image blurred by that routine is a genuine inverse problem rather than
//! a boundary-condition mismatch.

mod lucy;
mod semiblind;
mod tv;
mod wiener;

pub use lucy::lucy_richardson;
pub use semiblind::semiblind_deconvolve;
pub use tv::{tv_deconvolve, tv_deconvolve_with_objectives};
pub use wiener::wiener_deconvolve;

use crate::error::{Error, Result};
use crate::raster::{Image, Kernel};

/// Deconvolution algorithm selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeblurMethod {
    /// Frequency-domain Wiener filter.
    #[default]
    Wiener,
    /// Multiplicative Lucy-Richardson updates.
    LucyRichardson,
    /// Quadratic-fidelity, TV-regularized inversion.
    TvDeconv,
}

/// Where the blur kernel comes from: handed over explicitly, or searched
/// over candidate Fried parameters by [`semiblind_deconvolve`].
#[derive(Debug, Clone, PartialEq)]
pub enum KernelChoice {
    Fixed(Kernel),
    SemiBlind { r0_grid: Vec<f64> },
}

/// Full description of a deconvolution run. Only the fields relevant to
/// `method` are read; the rest ride along so a spec can be stored,
/// compared and re-labelled without knowing the method.
#[derive(Debug, Clone, PartialEq)]
pub struct DeblurSpec {
    pub method: DeblurMethod,
    /// Noise-to-signal power ratio of the Wiener filter.
    pub nsr: f64,
    /// Lucy-Richardson update count.
    pub lr_iterations: usize,
    /// TV regularization weight.
    pub tv_lambda: f64,
    /// TV solver iteration budget.
    pub tv_iterations: usize,
    pub kernel: KernelChoice,
}

impl DeblurSpec {
    /// Spec with the customary defaults and an explicit kernel.
    pub fn with_kernel(method: DeblurMethod, kernel: Kernel) -> Self {
        DeblurSpec {
            method,
            nsr: 1e-3,
            lr_iterations: 30,
            tv_lambda: 0.01,
            tv_iterations: 200,
            kernel: KernelChoice::Fixed(kernel),
        }
    }

    /// Spec that searches `r0_grid` for the kernel parameter.
    pub fn semi_blind(method: DeblurMethod, r0_grid: Vec<f64>) -> Self {
        DeblurSpec {
            kernel: KernelChoice::SemiBlind { r0_grid },
            ..DeblurSpec::with_kernel(method, Kernel::delta(3).expect("odd size"))
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nsr >= 0.0 && self.nsr.is_finite()) {
            return Err(Error::arg(format!("nsr = {} must be finite and >= 0", self.nsr)));
        }
        if self.lr_iterations == 0 || self.tv_iterations == 0 {
            return Err(Error::arg("iteration counts must be >= 1".to_string()));
        }
        if !(self.tv_lambda > 0.0 && self.tv_lambda.is_finite()) {
            return Err(Error::arg(format!(
                "tv_lambda = {} must be finite and > 0",
                self.tv_lambda
            )));
        }
        if let KernelChoice::SemiBlind { r0_grid } = &self.kernel {
            if r0_grid.is_empty() {
                return Err(Error::arg("empty r0 grid".to_string()));
            }
            if let Some(r0) = r0_grid.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
                return Err(Error::arg(format!("r0 grid entry {r0} must be finite and > 0")));
            }
        }
        Ok(())
    }

    /// Short name for CSV rows and file names, e.g. `Wiener` or `TV-SB`.
    pub fn label(&self) -> String {
        let base = match self.method {
            DeblurMethod::Wiener => "Wiener",
            DeblurMethod::LucyRichardson => "LR",
            DeblurMethod::TvDeconv => "TV",
        };
        match self.kernel {
            KernelChoice::Fixed(_) => base.into(),
            KernelChoice::SemiBlind { .. } => format!("{base}-SB"),
        }
    }
}

/// Runs the spec's method against an explicit kernel. The semi-blind
/// search goes through [`semiblind_deconvolve`] instead, which calls back
/// here once per grid point.
pub fn deconvolve(img: &Image, kernel: &Kernel, spec: &DeblurSpec) -> Result<Image> {
    spec.validate()?;
    match spec.method {
        DeblurMethod::Wiener => wiener_deconvolve(img, kernel, spec.nsr),
        DeblurMethod::LucyRichardson => lucy_richardson(img, kernel, spec.lr_iterations),
        DeblurMethod::TvDeconv => tv_deconvolve(img, kernel, spec.tv_lambda, spec.tv_iterations),
    }
}
