//! Regularized fusion of registered frames: the argmin step of the
//! variational stabilizer.
//!
//! Both solvers work on the reduced objective. With `m` the pixel-wise
//! mean of the warped frames, `sum_i ||u - w_i||^2` equals
//! `N*||u - m||^2` plus a constant, so only the mean and the frame count
//! matter here.
//!
//! TV: split variables as d = grad u and alternate exact quadratic solves
//! (FFT, periodic boundary) with isotropic shrinkage — robust across the
//! whole range of mu, including the regularizer-dominated limit where
//! first-order primal-dual schemes would need far more than the fixed
//! iteration budget. NLTV: backtracking gradient descent on an
//! epsilon-smoothed weighted nonlocal gradient norm.
//!
//! Each solver finishes by comparing its candidate against the previous
//! iterate under the evaluation objective and returning the better one,
//! so one outer stabilizer iteration can never go uphill.

use crate::raster::{fft2, ifft2_real};
use crate::stabilize::diffops::total_variation;
use crate::stabilize::nltv::WeightGraph;
use std::f64::consts::PI;

/// Fixed iteration budget of a fusion solve.
const FUSION_ITERS: usize = 100;

/// Smoothing floor inside the nonlocal gradient norm (gray levels).
pub(crate) const NLTV_EPS: f64 = 1e-3;

/// Periodic forward differences.
pub(crate) fn grad_periodic(u: &[f64], w: usize, h: usize, gx: &mut [f64], gy: &mut [f64]) {
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let xn = if x + 1 < w { i + 1 } else { y * w };
            let yn = if y + 1 < h { i + w } else { x };
            gx[i] = u[xn] - u[i];
            gy[i] = u[yn] - u[i];
        }
    }
}

/// Negative adjoint of [`grad_periodic`] (cyclic backward differences).
pub(crate) fn div_periodic(px: &[f64], py: &[f64], w: usize, h: usize, out: &mut [f64]) {
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let xp = if x > 0 { i - 1 } else { y * w + w - 1 };
            let yp = if y > 0 { i - w } else { (h - 1) * w + x };
            out[i] = px[i] - px[xp] + py[i] - py[yp];
        }
    }
}

/// Objective the TV fusion is judged by (up to the constant data offset).
fn tv_objective(u: &[f64], mean: &[f64], w: usize, h: usize, n_frames: usize, mu: f64) -> f64 {
    let data: f64 = u
        .iter()
        .zip(mean)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        * n_frames as f64;
    data + mu * total_variation(u, w, h)
}

/// TV-regularized fusion: minimizes `N*||u-m||^2 + mu*TV(u)` with an
/// alternating-direction scheme, then keeps whichever of {solution,
/// previous iterate} scores lower.
pub(crate) fn fuse_tv(
    mean: &[f64],
    prev: &[f64],
    w: usize,
    h: usize,
    n_frames: usize,
    mu: f64,
) -> Vec<f64> {
    let n = w * h;
    // Halved form: 0.5*||u-m||^2 + lam*TV(u).
    let lam = mu / (2.0 * n_frames as f64);
    let rho = lam.max(1e-3);
    let shrink_t = lam / rho;

    // Fourier multiplier of (I + rho * gradT grad) under periodic wrap.
    let mut denom = vec![0.0; n];
    for ky in 0..h {
        let sy = (PI * ky as f64 / h as f64).sin();
        for kx in 0..w {
            let sx = (PI * kx as f64 / w as f64).sin();
            denom[ky * w + kx] = 1.0 + rho * 4.0 * (sx * sx + sy * sy);
        }
    }

    let mut u = mean.to_vec();
    let mut dx = vec![0.0; n];
    let mut dy = vec![0.0; n];
    let mut bx = vec![0.0; n];
    let mut by = vec![0.0; n];
    let mut gx = vec![0.0; n];
    let mut gy = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut tx = vec![0.0; n];
    let mut ty = vec![0.0; n];

    for _ in 0..FUSION_ITERS {
        // u-step: (I + rho*gradT grad) u = m - rho*div(d - b).
        for i in 0..n {
            tx[i] = dx[i] - bx[i];
            ty[i] = dy[i] - by[i];
        }
        div_periodic(&tx, &ty, w, h, &mut rhs);
        for i in 0..n {
            rhs[i] = mean[i] - rho * rhs[i];
        }
        let mut spec = fft2(&rhs, w, h);
        for (c, d) in spec.iter_mut().zip(&denom) {
            *c *= 1.0 / d;
        }
        u = ifft2_real(&spec, w, h);

        // d-step: isotropic shrinkage of grad u + b.
        grad_periodic(&u, w, h, &mut gx, &mut gy);
        for i in 0..n {
            let ax = gx[i] + bx[i];
            let ay = gy[i] + by[i];
            let mag = ax.hypot(ay);
            let coef = if mag > 0.0 {
                (1.0 - shrink_t / mag).max(0.0)
            } else {
                0.0
            };
            dx[i] = coef * ax;
            dy[i] = coef * ay;
        }
        // b-step.
        for i in 0..n {
            bx[i] += gx[i] - dx[i];
            by[i] += gy[i] - dy[i];
        }
    }

    if tv_objective(&u, mean, w, h, n_frames, mu)
        <= tv_objective(prev, mean, w, h, n_frames, mu)
    {
        u
    } else {
        prev.to_vec()
    }
}

/// Epsilon-smoothed weighted nonlocal gradient norm
/// `sum_p sqrt(eps^2 + sum_q w_pq (u_q - u_p)^2)`.
pub(crate) fn nltv_value(u: &[f64], graph: &WeightGraph) -> f64 {
    let n = u.len();
    let mut acc = 0.0;
    for p in 0..n {
        let (targets, weights) = graph.row(p);
        let mut s = NLTV_EPS * NLTV_EPS;
        for (&q, &wgt) in targets.iter().zip(weights) {
            let d = u[q as usize] - u[p];
            s += wgt * d * d;
        }
        acc += s.sqrt();
    }
    acc
}

fn nltv_objective(
    u: &[f64],
    mean: &[f64],
    n_frames: usize,
    mu: f64,
    graph: &WeightGraph,
) -> f64 {
    let data: f64 = u
        .iter()
        .zip(mean)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        * n_frames as f64;
    data + mu * nltv_value(u, graph)
}

fn nltv_gradient(
    u: &[f64],
    mean: &[f64],
    n_frames: usize,
    mu: f64,
    graph: &WeightGraph,
    grad: &mut [f64],
) {
    let n = u.len();
    let nf = 2.0 * n_frames as f64;
    for i in 0..n {
        grad[i] = nf * (u[i] - mean[i]);
    }
    for p in 0..n {
        let (targets, weights) = graph.row(p);
        let mut s = NLTV_EPS * NLTV_EPS;
        for (&q, &wgt) in targets.iter().zip(weights) {
            let d = u[q as usize] - u[p];
            s += wgt * d * d;
        }
        let t = s.sqrt();
        for (&q, &wgt) in targets.iter().zip(weights) {
            let c = mu * wgt * (u[q as usize] - u[p]) / t;
            grad[q as usize] += c;
            grad[p] -= c;
        }
    }
}

/// NLTV-regularized fusion: backtracking (Armijo) gradient descent from
/// the previous iterate, which therefore can only improve.
pub(crate) fn fuse_nltv(
    mean: &[f64],
    prev: &[f64],
    n_frames: usize,
    mu: f64,
    graph: &WeightGraph,
) -> Vec<f64> {
    let n = mean.len();
    let mut u = prev.to_vec();
    let mut f0 = nltv_objective(&u, mean, n_frames, mu, graph);
    let mut grad = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let alpha0 = 1.0 / (2.0 * n_frames as f64);

    for _ in 0..FUSION_ITERS {
        nltv_gradient(&u, mean, n_frames, mu, graph, &mut grad);
        let gn2: f64 = grad.iter().map(|g| g * g).sum();
        if gn2 <= 1e-20 {
            break;
        }
        let mut alpha = alpha0;
        let mut accepted = false;
        for _ in 0..40 {
            for i in 0..n {
                trial[i] = u[i] - alpha * grad[i];
            }
            let f1 = nltv_objective(&trial, mean, n_frames, mu, graph);
            if f1 <= f0 - 1e-4 * alpha * gn2 {
                std::mem::swap(&mut u, &mut trial);
                f0 = f1;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // No step improves: numerically stationary.
            break;
        }
    }
    u
}
