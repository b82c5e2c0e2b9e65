//! Evaluation protocol: score restored images against ground truth with
//! PSNR/SSIM, run external restorer commands under a timeout, collect
//! everything into a resumable CSV, and reduce it to grouped statistics.

mod aggregate;
mod external;
mod metrics;
mod runner;

pub use aggregate::{aggregate, render_table, GroupBy, GroupStat};
pub use external::{run_external_restorer, run_external_restorer_with, DEFAULT_TIMEOUT};
pub use metrics::{psnr, ssim};
pub use runner::{
    evaluate, read_records, write_records, DeblurStage, EvalRecord, EvalSummary, Pipeline,
    Restorer, RowStatus,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How SSIM turns two images into one number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SsimMode {
    /// Average of the formula over Gaussian-weighted sliding windows.
    #[default]
    WindowedMean,
    /// The formula applied once to whole-image moments.
    Global,
}

impl SsimMode {
    /// Short name recorded in the CSV's `ssim_mode` column.
    pub fn label(self) -> &'static str {
        match self {
            SsimMode::WindowedMean => "windowed",
            SsimMode::Global => "global",
        }
    }
}

/// SSIM configuration. The stabilization constants follow the customary
/// choices: `c1 = (k1*dyn)^2`, `c2 = (k2*dyn)^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SsimOptions {
    /// Odd window side.
    pub window: usize,
    /// Gaussian weighting sigma in pixels.
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub mode: SsimMode,
}

impl Default for SsimOptions {
    fn default() -> Self {
        SsimOptions {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            mode: SsimMode::WindowedMean,
        }
    }
}

impl SsimOptions {
    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window % 2 == 0 {
            return Err(Error::arg(format!(
                "ssim window {} must be odd and >= 3",
                self.window
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::arg(format!("ssim sigma {} must be finite and > 0", self.sigma)));
        }
        if !(self.k1 > 0.0 && self.k1.is_finite() && self.k2 > 0.0 && self.k2.is_finite()) {
            return Err(Error::arg(format!(
                "ssim k1/k2 = {}/{} must be finite and > 0",
                self.k1, self.k2
            )));
        }
        Ok(())
    }
}
