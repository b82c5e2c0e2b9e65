//! Geometric stabilization: undo the per-frame distortions of a turbulent
//! sequence. Provides plain temporal references (mean, median) and an
//! iterative variational stabilizer that alternates optical-flow
//! registration with regularized fusion (TV or non-local TV).

mod diffops;
mod flow;
pub(crate) mod fusion;
mod lk;
mod mao_gilles;
mod nltv;
mod pyramid;
mod temporal;
mod tvl1;

pub use flow::{estimate_flow, FlowMethod, FlowOptions};
pub use mao_gilles::{mao_gilles, stabilize, StabilizeResult};
pub use nltv::{nltv_weights, WeightGraph};
pub use temporal::{temporal_mean, temporal_median};

use crate::error::{Error, Result};

/// Fusion regularizer used by the variational stabilizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regularizer {
    /// Isotropic total variation.
    Tv,
    /// Non-local total variation with patch-similarity weights.
    Nltv,
}

/// Which stabilizer to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilizerKind {
    /// Pixel-wise mean over frames; the baseline every paper compares to.
    TemporalAverage,
    /// Iterative flow + fusion stabilizer.
    MaoGilles,
}

/// Full stabilizer configuration.
#[derive(Debug, Clone)]
pub struct StabilizerSpec {
    pub kind: StabilizerKind,
    /// Fusion regularizer (variational stabilizer only).
    pub regularizer: Regularizer,
    /// Flow estimator options (variational stabilizer only).
    pub flow: FlowOptions,
    /// Outer flow-then-fuse rounds.
    pub outer_iterations: usize,
    /// Regularization weight mu in `sum_i ||u - w_i||^2 + mu * Reg(u)`.
    pub fusion_mu: f64,
    /// Patch side for non-local weights.
    pub nltv_patch: usize,
    /// Search-window side for non-local weights.
    pub nltv_search: usize,
    /// Neighbors kept per pixel.
    pub nltv_neighbors: usize,
    /// Patch-similarity bandwidth, gray levels.
    pub nltv_h: f64,
}

impl Default for StabilizerSpec {
    fn default() -> Self {
        StabilizerSpec {
            kind: StabilizerKind::MaoGilles,
            regularizer: Regularizer::Tv,
            flow: FlowOptions::default(),
            outer_iterations: 5,
            fusion_mu: 10.0,
            nltv_patch: 5,
            nltv_search: 11,
            nltv_neighbors: 10,
            nltv_h: 10.0,
        }
    }
}

impl StabilizerSpec {
    pub fn temporal_average() -> Self {
        StabilizerSpec {
            kind: StabilizerKind::TemporalAverage,
            ..StabilizerSpec::default()
        }
    }

    pub fn mao_gilles_spec(regularizer: Regularizer, flow: FlowOptions) -> Self {
        StabilizerSpec {
            kind: StabilizerKind::MaoGilles,
            regularizer,
            flow,
            ..StabilizerSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.flow.validate()?;
        if self.outer_iterations < 1 {
            return Err(Error::arg("outer_iterations must be >= 1"));
        }
        if !(self.fusion_mu > 0.0 && self.fusion_mu.is_finite()) {
            return Err(Error::arg(format!(
                "fusion_mu = {} must be finite and > 0",
                self.fusion_mu
            )));
        }
        if self.nltv_patch % 2 == 0 || self.nltv_search % 2 == 0 {
            return Err(Error::arg("nltv patch and search sides must be odd"));
        }
        if self.nltv_patch >= self.nltv_search {
            return Err(Error::arg(format!(
                "nltv_patch {} must be smaller than nltv_search {}",
                self.nltv_patch, self.nltv_search
            )));
        }
        if self.nltv_neighbors < 1 {
            return Err(Error::arg("nltv_neighbors must be >= 1"));
        }
        if !(self.nltv_h > 0.0 && self.nltv_h.is_finite()) {
            return Err(Error::arg("nltv_h must be finite and > 0"));
        }
        Ok(())
    }

    /// Short name used in result CSVs and file names.
    pub fn label(&self) -> String {
        match self.kind {
            StabilizerKind::TemporalAverage => "Temporal_Average".into(),
            StabilizerKind::MaoGilles => {
                let reg = match self.regularizer {
                    Regularizer::Tv => "TV",
                    Regularizer::Nltv => "NLTV",
                };
                let flow = match self.flow.method {
                    FlowMethod::LucasKanade => "LK",
                    FlowMethod::Tvl1 => "TVL1",
                };
                format!("{reg}-{flow}")
            }
        }
    }
}
