//! Inpainting masks: known-pixel positions in canonical raster order.

use crate::error::{Error, Result};
use crate::image::GrayImage;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Point {
    pub x: usize,
    pub y: usize,
}

impl Point {
    pub const fn new(x: usize, y: usize) -> Self {
        Point { x, y }
    }
}

/// Inclusive pixel rectangle `[x0, x1] × [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Rect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Rect {
    pub fn full(width: usize, height: usize) -> Self {
        Rect {
            x0: 0,
            y0: 0,
            x1: width - 1,
            y1: height - 1,
        }
    }

    /// Square of half-width `half` around `(x, y)`, clipped to the image.
    pub fn around(x: usize, y: usize, half: usize, width: usize, height: usize) -> Self {
        Rect {
            x0: x.saturating_sub(half),
            y0: y.saturating_sub(half),
            x1: (x + half).min(width - 1),
            y1: (y + half).min(height - 1),
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.x1 - self.x0 + 1
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.y1 - self.y0 + 1
    }

    #[inline]
    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    #[inline]
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    pub fn union(&self, other: &Rect) -> Rect {
        Rect {
            x0: self.x0.min(other.x0),
            y0: self.y0.min(other.y0),
            x1: self.x1.max(other.x1),
            y1: self.y1.max(other.y1),
        }
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.x0 <= other.x1 && other.x0 <= self.x1 && self.y0 <= other.y1 && other.y0 <= self.y1
    }
}

/// The set K of known pixels. Positions are unique, in bounds and sorted in
/// raster order (y-major, then x); that order is the canonical traversal
/// order for accumulation, prediction and coding.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    positions: Vec<Point>,
    indicator: Vec<bool>,
}

impl Mask {
    /// Build from arbitrary positions: sorted into raster order, duplicates removed.
    pub fn new(width: usize, height: usize, mut positions: Vec<Point>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::EmptyMask);
        }
        if let Some(p) = positions.iter().find(|p| p.x >= width || p.y >= height) {
            return Err(Error::MaskOutOfBounds(p.x, p.y));
        }
        positions.sort_by_key(|p| (p.y, p.x));
        positions.dedup();
        let mut indicator = vec![false; width * height];
        for p in &positions {
            indicator[p.y * width + p.x] = true;
        }
        Ok(Mask {
            width,
            height,
            positions,
            indicator,
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    #[inline]
    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    #[inline]
    pub fn contains(&self, x: usize, y: usize) -> bool {
        self.indicator[y * self.width + x]
    }

    pub fn density(&self) -> f64 {
        self.len() as f64 / (self.width * self.height) as f64
    }

    /// Grey values of `image` at the mask positions, in canonical order.
    pub fn sample(&self, image: &GrayImage) -> Result<Vec<f64>> {
        if image.width() != self.width || image.height() != self.height {
            return Err(Error::DimensionMismatch(
                self.width,
                self.height,
                image.width(),
                image.height(),
            ));
        }
        Ok(self.positions.iter().map(|p| image.get(p.x, p.y)).collect())
    }
}

/// A mask together with one stored value per position.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskedData {
    pub mask: Mask,
    pub values: Vec<f64>,
}

impl MaskedData {
    pub fn sample(mask: Mask, image: &GrayImage) -> Result<Self> {
        let values = mask.sample(image)?;
        Ok(MaskedData { mask, values })
    }
}

/// Regular grid anchored at `(0, 0)` with spacing `r` in both directions.
pub fn make_regular_mask(width: usize, height: usize, r: usize) -> Result<Mask> {
    if r == 0 {
        return Err(Error::InvalidParameter("grid spacing must be at least 1".into()));
    }
    if width == 0 || height == 0 {
        return Err(Error::InvalidParameter("empty image".into()));
    }
    let positions = (0..height)
        .step_by(r)
        .flat_map(|y| (0..width).step_by(r).map(move |x| Point::new(x, y)))
        .collect();
    Mask::new(width, height, positions)
}
