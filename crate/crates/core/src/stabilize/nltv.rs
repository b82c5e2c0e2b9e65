//! Patch-similarity neighbor graphs for non-local regularization.
//!
//! For every pixel we keep the `nltv_neighbors` candidates in the search
//! window whose surrounding patches match best, weighted by
//! `exp(-SSD / h^2)` and normalized per pixel. Patch SSD near the borders
//! sums the clamped per-pixel squared differences, i.e. edge pixels are
//! replicated — interior pixels get the textbook value.

use crate::raster::Image;
use crate::stabilize::StabilizerSpec;

/// Sparse row-stochastic neighbor graph over the pixels of one image.
#[derive(Debug, Clone)]
pub struct WeightGraph {
    width: usize,
    height: usize,
    /// Row start offsets, `pixels + 1` entries.
    offsets: Vec<usize>,
    /// Neighbor pixel indices, row-major target pixels.
    targets: Vec<u32>,
    /// Normalized weights, same layout as `targets`.
    weights: Vec<f64>,
}

impl WeightGraph {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Neighbor indices and weights of pixel `i` (row-major).
    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.offsets[i], self.offsets[i + 1]);
        (&self.targets[a..b], &self.weights[a..b])
    }
}

/// One scored candidate while selecting the best neighbors of a pixel.
#[derive(Clone, Copy)]
struct Cand {
    ssd: f64,
    dist2: u32,
    target: u32,
}

const EMPTY: Cand = Cand {
    ssd: f64::INFINITY,
    dist2: u32::MAX,
    target: u32::MAX,
};

#[inline]
fn better(a: &Cand, b: &Cand) -> bool {
    // Deterministic order: similarity first, then spatial closeness, then
    // pixel index.
    (a.ssd, a.dist2, a.target) < (b.ssd, b.dist2, b.target)
}

/// Patch SSD against the partner `offset` pixels, for every pixel at once.
/// Uses an edge-replicated integral image, so cost is independent of the
/// patch side.
fn offset_ssd(img: &[f64], w: usize, h: usize, ox: i64, oy: i64, pr: usize) -> Vec<f64> {
    let clamp_x = |v: i64| v.clamp(0, w as i64 - 1) as usize;
    let clamp_y = |v: i64| v.clamp(0, h as i64 - 1) as usize;
    // Squared difference against the (clamped) offset partner.
    let mut d = vec![0.0; w * h];
    for y in 0..h {
        let qy = clamp_y(y as i64 + oy);
        for x in 0..w {
            let qx = clamp_x(x as i64 + ox);
            let diff = img[y * w + x] - img[qy * w + qx];
            d[y * w + x] = diff * diff;
        }
    }
    // Integral image over the edge-replicated padding of d.
    let pw = w + 2 * pr;
    let ph = h + 2 * pr;
    let stride = pw + 1;
    let mut s = vec![0.0; stride * (ph + 1)];
    for py in 0..ph {
        let sy = clamp_y(py as i64 - pr as i64);
        for px in 0..pw {
            let sx = clamp_x(px as i64 - pr as i64);
            s[(py + 1) * stride + px + 1] = d[sy * w + sx] + s[py * stride + px + 1]
                + s[(py + 1) * stride + px]
                - s[py * stride + px];
        }
    }
    // Box sums of side 2*pr+1; pixel (x, y) covers padded rows/cols
    // [x, x + 2*pr] x [y, y + 2*pr].
    let side = 2 * pr + 1;
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = s[(y + side) * stride + x + side] - s[y * stride + x + side]
                - s[(y + side) * stride + x]
                + s[y * stride + x];
        }
    }
    out
}

/// Builds the neighbor graph of `guide` under `spec`'s patch options.
pub fn nltv_weights(guide: &Image, spec: &StabilizerSpec) -> WeightGraph {
    let w = guide.width();
    let h = guide.height();
    let n = w * h;
    let k = spec.nltv_neighbors;
    let sr = (spec.nltv_search / 2) as i64;
    let pr = spec.nltv_patch / 2;
    let inv_h2 = 1.0 / (spec.nltv_h * spec.nltv_h);
    let img = guide.data();

    let mut best = vec![EMPTY; n * k];
    for oy in -sr..=sr {
        for ox in -sr..=sr {
            if ox == 0 && oy == 0 {
                continue;
            }
            let ssd = offset_ssd(img, w, h, ox, oy, pr);
            let dist2 = (ox * ox + oy * oy) as u32;
            // Only pixels whose partner actually lies inside the image.
            let x0 = (-ox).max(0) as usize;
            let x1 = (w as i64).min(w as i64 - ox) as usize;
            let y0 = (-oy).max(0) as usize;
            let y1 = (h as i64).min(h as i64 - oy) as usize;
            for y in y0..y1 {
                for x in x0..x1 {
                    let i = y * w + x;
                    let cand = Cand {
                        ssd: ssd[i],
                        dist2,
                        target: ((y as i64 + oy) * w as i64 + x as i64 + ox) as u32,
                    };
                    let row = &mut best[i * k..(i + 1) * k];
                    // Insertion into the sorted k-slot row.
                    if better(&cand, &row[k - 1]) {
                        let mut j = k - 1;
                        while j > 0 && better(&cand, &row[j - 1]) {
                            row[j] = row[j - 1];
                            j -= 1;
                        }
                        row[j] = cand;
                    }
                }
            }
        }
    }

    let mut offsets = Vec::with_capacity(n + 1);
    let mut targets = Vec::with_capacity(n * k);
    let mut weights = Vec::with_capacity(n * k);
    offsets.push(0);
    for i in 0..n {
        let row = &best[i * k..(i + 1) * k];
        let filled = row.iter().take_while(|c| c.ssd.is_finite()).count();
        // Shift by the row minimum before exponentiating: the normalized
        // weights are unchanged and the row sum can't underflow to zero.
        let m = row[0].ssd;
        let mut sum = 0.0;
        for c in &row[..filled] {
            sum += (-(c.ssd - m) * inv_h2).exp();
        }
        for c in &row[..filled] {
            targets.push(c.target);
            weights.push((-(c.ssd - m) * inv_h2).exp() / sum);
        }
        offsets.push(targets.len());
    }
    WeightGraph {
        width: w,
        height: h,
        offsets,
        targets,
        weights,
    }
}
