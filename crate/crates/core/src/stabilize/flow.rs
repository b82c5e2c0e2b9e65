//! Dense optical-flow estimation, coarse-to-fine.
//!
//! Both estimators return a backward flow: the field `d` satisfies
//! `warp_image(frame, d) ≈ ref`, so an estimated field plugs straight into
//! the warper to register a frame onto the reference.

use crate::error::{Error, Result};
use crate::raster::{Image, WarpField};
use crate::stabilize::pyramid::{build_pyramid, upscale_flow};
use crate::stabilize::{lk, tvl1};

/// Flow algorithm selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FlowMethod {
    /// Pyramidal windowed least squares.
    #[default]
    LucasKanade,
    /// Pyramidal TV-L1 primal-dual.
    Tvl1,
}

/// Dual-step fraction of the TV-L1 inner smoothing; `tvl1_tau * DUAL_STEP`
/// is the effective dual step and must stay within the classic 1/8 bound.
pub(crate) const TVL1_DUAL_STEP: f64 = 0.5;

/// Options for [`estimate_flow`].
#[derive(Debug, Clone)]
pub struct FlowOptions {
    pub method: FlowMethod,
    /// Pyramid depth; levels stop early on small images.
    pub pyramid_levels: usize,
    /// Window side for the least-squares estimator; odd.
    pub lk_window: usize,
    /// Refinement warps per pyramid level (least-squares estimator).
    pub lk_iterations: usize,
    /// Data-attachment weight of the TV-L1 model.
    pub tvl1_lambda: f64,
    /// Primal time step of the TV-L1 model.
    pub tvl1_tau: f64,
    /// Relinearization warps per level (TV-L1).
    pub tvl1_warps: usize,
    /// Fixed-point iterations per warp (TV-L1).
    pub tvl1_inner_iters: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            method: FlowMethod::LucasKanade,
            pyramid_levels: 3,
            lk_window: 7,
            lk_iterations: 3,
            tvl1_lambda: 0.15,
            tvl1_tau: 0.25,
            tvl1_warps: 5,
            tvl1_inner_iters: 30,
        }
    }
}

impl FlowOptions {
    /// Standard options for a given method.
    pub fn for_method(method: FlowMethod) -> Self {
        FlowOptions {
            method,
            ..FlowOptions::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lk_window % 2 == 0 {
            return Err(Error::arg(format!(
                "lk_window {} must be odd",
                self.lk_window
            )));
        }
        for (v, name) in [
            (self.pyramid_levels, "pyramid_levels"),
            (self.lk_window, "lk_window"),
            (self.lk_iterations, "lk_iterations"),
            (self.tvl1_warps, "tvl1_warps"),
            (self.tvl1_inner_iters, "tvl1_inner_iters"),
        ] {
            if v < 1 {
                return Err(Error::arg(format!("{name} must be >= 1")));
            }
        }
        if !(self.tvl1_lambda > 0.0 && self.tvl1_lambda.is_finite()) {
            return Err(Error::arg("tvl1_lambda must be finite and > 0"));
        }
        // Stability bound of the dual smoothing step.
        if !(self.tvl1_tau > 0.0 && self.tvl1_tau * TVL1_DUAL_STEP <= 0.125 + 1e-12) {
            return Err(Error::arg(format!(
                "tvl1_tau = {}: tau * {TVL1_DUAL_STEP} must stay <= 1/8",
                self.tvl1_tau
            )));
        }
        Ok(())
    }
}

/// Estimates the backward flow aligning `frame` onto `reference`.
///
/// Intensities are rescaled internally so results don't depend on the
/// declared dynamic range: to [0, 1] for the least-squares path (the
/// eigenvalue guard is calibrated there), and to the conventional
/// [0, 255] gray range for TV-L1, which is the scale the classic
/// lambda/tau/theta constants were tuned for — on [0, 1] data the
/// effective data weight drops 255-fold and the solver stalls well short
/// of the true motion. Flat windows (both structure-tensor eigenvalues
/// below the guard) produce zero flow rather than an error.
pub fn estimate_flow(reference: &Image, frame: &Image, opts: &FlowOptions) -> Result<WarpField> {
    opts.validate()?;
    if !reference.same_dims(frame) {
        return Err(Error::dims(format!(
            "flow inputs {}x{} vs {}x{}",
            reference.width(),
            reference.height(),
            frame.width(),
            frame.height()
        )));
    }
    let (w, h) = (reference.width(), reference.height());
    let gain = match opts.method {
        FlowMethod::LucasKanade => 1.0,
        FlowMethod::Tvl1 => 255.0,
    };
    let norm = |img: &Image| -> Vec<f64> {
        let s = gain / img.dyn_range();
        img.data().iter().map(|v| v * s).collect()
    };
    let p_ref = build_pyramid(&norm(reference), w, h, opts.pyramid_levels);
    let p_frm = build_pyramid(&norm(frame), w, h, opts.pyramid_levels);

    // Coarse to fine.
    let coarsest = p_ref.len() - 1;
    let mut dx = vec![0.0; p_ref[coarsest].w * p_ref[coarsest].h];
    let mut dy = dx.clone();
    for lvl in (0..=coarsest).rev() {
        let (r, f) = (&p_ref[lvl], &p_frm[lvl]);
        match opts.method {
            FlowMethod::LucasKanade => lk::refine_level(r, f, &mut dx, &mut dy, opts),
            FlowMethod::Tvl1 => tvl1::refine_level(r, f, &mut dx, &mut dy, opts),
        }
        if lvl > 0 {
            let up = &p_ref[lvl - 1];
            dx = upscale_flow(&dx, r.w, r.h, up.w, up.h, up.w as f64 / r.w as f64);
            dy = upscale_flow(&dy, r.w, r.h, up.w, up.h, up.h as f64 / r.h as f64);
        }
    }
    WarpField::from_vecs(w, h, dx, dy)
}
