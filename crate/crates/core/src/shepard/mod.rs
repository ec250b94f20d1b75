//! Shepard inpainting: normalised, truncated Gaussian averaging of known data.
//!
//! Both the isotropic and the anisotropic operator are built on the same
//! scatter primitive ([`AccumulationMaps::splat`]): every mask point adds its
//! weight to `w` and its weighted value to `v` for each pixel of its window,
//! and the reconstruction is `v / w`. Points are always visited in canonical
//! mask order, so any region recomputed from scratch with the same points
//! yields bit-identical sums.

pub mod aniso;
pub mod iso;
pub mod local;
pub mod voronoi;

mod index;

pub(crate) use index::PointIndex;

use crate::mask::{Point, Rect};
use crate::ops;

/// A truncated weighting function centred on a mask point.
pub trait Kernel {
    /// Half-width of the square support window.
    fn half(&self) -> usize;
    /// Weight for the offset between a pixel and the kernel centre.
    fn weight(&self, dx: i64, dy: i64) -> f64;
}

/// `exp(−(a·dx² − 2b·dx·dy + c·dy²))`, the common form of every Shepard weight.
#[inline]
pub(crate) fn quad_weight(a: f64, b: f64, c: f64, dx: f64, dy: f64) -> f64 {
    (-(a * dx * dx - 2.0 * b * dx * dy + c * dy * dy)).exp()
}

/// Half-width of the truncation window for standard deviation `sigma`.
///
/// The window spans at least `⌈4σ⌉ + 1` pixels per side and is symmetric
/// around its centre, so the side is rounded up to the next odd number.
pub fn window_half(sigma: f64) -> usize {
    let c = (4.0 * sigma).ceil().max(1.0) as usize;
    c.div_ceil(2)
}

/// Value (`v`) and weight (`w`) accumulators over a rectangle of the image.
#[derive(Clone, Debug, PartialEq)]
pub struct AccumulationMaps {
    rect: Rect,
    v: Vec<f64>,
    w: Vec<f64>,
}

impl AccumulationMaps {
    pub fn new(width: usize, height: usize) -> Self {
        Self::for_rect(Rect::full(width, height))
    }

    pub fn for_rect(rect: Rect) -> Self {
        let n = rect.area();
        AccumulationMaps {
            rect,
            v: vec![0.0; n],
            w: vec![0.0; n],
        }
    }

    #[inline]
    pub fn rect(&self) -> Rect {
        self.rect
    }

    #[inline]
    pub fn v(&self) -> &[f64] {
        &self.v
    }

    #[inline]
    pub fn w(&self) -> &[f64] {
        &self.w
    }

    #[inline]
    fn offset(&self, x: usize, y: usize) -> usize {
        (y - self.rect.y0) * self.rect.width() + (x - self.rect.x0)
    }

    #[inline]
    pub fn v_at(&self, x: usize, y: usize) -> f64 {
        self.v[self.offset(x, y)]
    }

    #[inline]
    pub fn w_at(&self, x: usize, y: usize) -> f64 {
        self.w[self.offset(x, y)]
    }

    /// Current normalised value at `(x, y)`, or `None` where nothing has
    /// been accumulated yet.
    #[inline]
    pub fn ratio_at(&self, x: usize, y: usize) -> Option<f64> {
        let i = self.offset(x, y);
        (self.w[i] > 0.0).then(|| self.v[i] / self.w[i])
    }

    /// Add the contribution of a point with `value` through `kernel`,
    /// clipped to this map's rectangle.
    pub fn splat<K: Kernel>(&mut self, p: Point, value: f64, kernel: &K) {
        self.splat_scaled(p, value, 1.0, kernel);
    }

    /// Add `scale ×` the contribution; `scale = −1` removes a point again.
    pub(crate) fn splat_scaled<K: Kernel>(&mut self, p: Point, value: f64, scale: f64, kernel: &K) {
        let h = kernel.half();
        let r = self.rect;
        let x0 = p.x.saturating_sub(h).max(r.x0);
        let x1 = (p.x + h).min(r.x1);
        let y0 = p.y.saturating_sub(h).max(r.y0);
        let y1 = (p.y + h).min(r.y1);
        if x0 > x1 || y0 > y1 {
            return;
        }
        let rw = r.width();
        for y in y0..=y1 {
            let dy = y as i64 - p.y as i64;
            let row = (y - r.y0) * rw;
            for x in x0..=x1 {
                let g = scale * kernel.weight(x as i64 - p.x as i64, dy);
                let i = row + x - r.x0;
                self.w[i] += g;
                self.v[i] += g * value;
            }
        }
        ops::add(((x1 - x0 + 1) * (y1 - y0 + 1)) as u64);
    }

    /// Shift the stored value of the point at `p` by `delta` without
    /// touching its weights.
    pub(crate) fn shift_value<K: Kernel>(&mut self, p: Point, delta: f64, kernel: &K) {
        let h = kernel.half();
        let r = self.rect;
        let x0 = p.x.saturating_sub(h).max(r.x0);
        let x1 = (p.x + h).min(r.x1);
        let y0 = p.y.saturating_sub(h).max(r.y0);
        let y1 = (p.y + h).min(r.y1);
        if x0 > x1 || y0 > y1 {
            return;
        }
        let rw = r.width();
        for y in y0..=y1 {
            let dy = y as i64 - p.y as i64;
            let row = (y - r.y0) * rw;
            for x in x0..=x1 {
                self.v[row + x - r.x0] += delta * kernel.weight(x as i64 - p.x as i64, dy);
            }
        }
        ops::add(((x1 - x0 + 1) * (y1 - y0 + 1)) as u64);
    }

    /// Overwrite the part of these maps covered by `other`.
    pub(crate) fn paste(&mut self, other: &AccumulationMaps) {
        let o = other.rect;
        let ow = o.width();
        for y in o.y0..=o.y1 {
            let dst = self.offset(o.x0, y);
            let src = (y - o.y0) * ow;
            self.v[dst..dst + ow].copy_from_slice(&other.v[src..src + ow]);
            self.w[dst..dst + ow].copy_from_slice(&other.w[src..src + ow]);
        }
    }

    /// `v / w` per pixel of the rectangle, `fallback` where `w = 0`.
    pub fn normalized(&self, fallback: f64) -> Vec<f64> {
        self.v
            .iter()
            .zip(&self.w)
            .map(|(&v, &w)| if w > 0.0 { v / w } else { fallback })
            .collect()
    }

    /// Clamped `v / w` per pixel, `None` where `w = 0`.
    pub(crate) fn ratios(&self) -> Vec<Option<f64>> {
        self.v
            .iter()
            .zip(&self.w)
            .map(|(&v, &w)| (w > 0.0).then(|| (v / w).clamp(0.0, 255.0)))
            .collect()
    }

    /// Pixels where no kernel reached (`w = 0`).
    pub fn holes(&self) -> Vec<bool> {
        self.w.iter().map(|&w| w <= 0.0).collect()
    }
}

/// Fallback value for pixels no window reaches: the mean of the mask values,
/// summed in canonical order.
pub fn hole_fill(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}
