//! Discrete differential operators shared by the variational solvers:
//! forward-difference gradient, its negative adjoint (divergence), and
//! central differences for image gradients in flow estimation.
//!
//! Gradient uses forward differences with Neumann boundary (zero at the
//! last row/column); divergence is its exact negative adjoint, so
//! `<grad u, p> == -<u, div p>` holds to round-off — the property the dual
//! solvers rely on.

/// Forward-difference gradient. Writes into `gx`, `gy` (length `w*h`).
pub(crate) fn forward_grad(u: &[f64], w: usize, h: usize, gx: &mut [f64], gy: &mut [f64]) {
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            gx[i] = if x + 1 < w { u[i + 1] - u[i] } else { 0.0 };
            gy[i] = if y + 1 < h { u[i + w] - u[i] } else { 0.0 };
        }
    }
}

/// Divergence of a field (px, py); negative adjoint of [`forward_grad`].
pub(crate) fn divergence(px: &[f64], py: &[f64], w: usize, h: usize, out: &mut [f64]) {
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let dx = if x == 0 {
                px[i]
            } else if x + 1 < w {
                px[i] - px[i - 1]
            } else {
                -px[i - 1]
            };
            let dy = if y == 0 {
                py[i]
            } else if y + 1 < h {
                py[i] - py[i - w]
            } else {
                -py[i - w]
            };
            out[i] = dx + dy;
        }
    }
}

/// Isotropic total variation `sum |grad u|` with the same discretization
/// the solvers minimize.
pub(crate) fn total_variation(u: &[f64], w: usize, h: usize) -> f64 {
    let mut tv = 0.0;
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let gx = if x + 1 < w { u[i + 1] - u[i] } else { 0.0 };
            let gy = if y + 1 < h { u[i + w] - u[i] } else { 0.0 };
            tv += gx.hypot(gy);
        }
    }
    tv
}

/// Central-difference gradient with clamped borders, for image intensity
/// gradients.
pub(crate) fn central_grad(u: &[f64], w: usize, h: usize, gx: &mut [f64], gy: &mut [f64]) {
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let xm = if x > 0 { i - 1 } else { i };
            let xp = if x + 1 < w { i + 1 } else { i };
            let ym = if y > 0 { i - w } else { i };
            let yp = if y + 1 < h { i + w } else { i };
            gx[i] = 0.5 * (u[xp] - u[xm]);
            gy[i] = 0.5 * (u[yp] - u[ym]);
        }
    }
}
