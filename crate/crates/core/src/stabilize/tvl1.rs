//! Duality-based TV-L1 flow refinement, one pyramid level at a time.
//!
//! Classic alternation: the data term is handled by a pointwise
//! thresholding step on an auxiliary field v, the TV term by dual
//! (Chambolle-style) iterations coupling u to v through a quadratic
//! penalty with weight 1/(2*THETA).

use crate::stabilize::diffops::{central_grad, divergence, forward_grad};
use crate::stabilize::flow::{FlowOptions, TVL1_DUAL_STEP};
use crate::stabilize::pyramid::{warp_buffer, Level};

/// Coupling constant between the data and regularization halves.
const THETA: f64 = 0.3;

/// Ignore image gradients smaller than this when dividing by |grad I|^2.
const GRAD_FLOOR: f64 = 1e-12;

pub(crate) fn refine_level(
    r: &Level,
    f: &Level,
    dx: &mut [f64],
    dy: &mut [f64],
    opts: &FlowOptions,
) {
    let (w, h) = (r.w, r.h);
    let n = w * h;
    let sigma = opts.tvl1_tau * TVL1_DUAL_STEP;
    let lt = opts.tvl1_lambda * THETA;

    // One dual field per flow component, warm-started across warps.
    let mut p1x = vec![0.0; n];
    let mut p1y = vec![0.0; n];
    let mut p2x = vec![0.0; n];
    let mut p2y = vec![0.0; n];
    let mut ix = vec![0.0; n];
    let mut iy = vec![0.0; n];
    let mut v1 = vec![0.0; n];
    let mut v2 = vec![0.0; n];
    let mut scratch_div = vec![0.0; n];
    let mut scratch_gx = vec![0.0; n];
    let mut scratch_gy = vec![0.0; n];

    for _ in 0..opts.tvl1_warps {
        let warped = warp_buffer(f, dx, dy);
        central_grad(&warped, w, h, &mut ix, &mut iy);
        // Residual of the linearized constancy assumption at the current
        // flow u0: rho(u) = base + <grad I, u>, with base frozen per warp.
        let mut base = vec![0.0; n];
        let mut g2 = vec![0.0; n];
        for i in 0..n {
            base[i] = warped[i] - r.data[i] - ix[i] * dx[i] - iy[i] * dy[i];
            g2[i] = ix[i] * ix[i] + iy[i] * iy[i];
        }

        for _ in 0..opts.tvl1_inner_iters {
            // Data step: exact minimizer of lambda|rho(v)| + |v-u|^2/(2 theta).
            for i in 0..n {
                let rho = base[i] + ix[i] * dx[i] + iy[i] * dy[i];
                let t = lt * g2[i];
                if rho < -t {
                    v1[i] = dx[i] + lt * ix[i];
                    v2[i] = dy[i] + lt * iy[i];
                } else if rho > t {
                    v1[i] = dx[i] - lt * ix[i];
                    v2[i] = dy[i] - lt * iy[i];
                } else if g2[i] > GRAD_FLOOR {
                    let s = rho / g2[i];
                    v1[i] = dx[i] - s * ix[i];
                    v2[i] = dy[i] - s * iy[i];
                } else {
                    v1[i] = dx[i];
                    v2[i] = dy[i];
                }
            }
            // Regularization step per component: u = v + theta div p, then
            // one semi-implicit dual ascent with step sigma/theta.
            for (u, v, px, py) in [
                (&mut *dx, &v1, &mut p1x, &mut p1y),
                (&mut *dy, &v2, &mut p2x, &mut p2y),
            ] {
                divergence(px, py, w, h, &mut scratch_div);
                for i in 0..n {
                    u[i] = v[i] + THETA * scratch_div[i];
                }
                forward_grad(u, w, h, &mut scratch_gx, &mut scratch_gy);
                let step = sigma / THETA;
                for i in 0..n {
                    let mag = scratch_gx[i].hypot(scratch_gy[i]);
                    let denom = 1.0 + step * mag;
                    px[i] = (px[i] + step * scratch_gx[i]) / denom;
                    py[i] = (py[i] + step * scratch_gy[i]) / denom;
                }
            }
        }
    }
}
