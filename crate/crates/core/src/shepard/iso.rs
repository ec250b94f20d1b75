//! Isotropic Shepard inpainting with truncated Gaussian weights.

use super::{hole_fill, quad_weight, window_half, AccumulationMaps, Kernel};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::mask::Mask;

/// Standard deviation adapted to the fraction of known data:
/// `σ = √(m·n / (π·|K|))`.
pub fn compute_sigma(mask_count: usize, width: usize, height: usize) -> Result<f64> {
    if mask_count == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(((width * height) as f64 / (std::f64::consts::PI * mask_count as f64)).sqrt())
}

/// `exp(−(dx² + dy²) / (2σ²))`.
pub fn gaussian_weight(dx: f64, dy: f64, sigma: f64) -> f64 {
    let a = 1.0 / (2.0 * sigma * sigma);
    quad_weight(a, 0.0, a, dx, dy)
}

/// Gaussian with a precomputed weight table over its truncation window.
#[derive(Clone, Debug, PartialEq)]
pub struct IsoKernel {
    sigma: f64,
    half: usize,
    side: usize,
    table: Vec<f64>,
}

impl IsoKernel {
    pub fn new(sigma: f64) -> Self {
        assert!(sigma > 0.0, "sigma must be positive");
        let half = window_half(sigma);
        let side = 2 * half + 1;
        let a = 1.0 / (2.0 * sigma * sigma);
        let mut table = Vec::with_capacity(side * side);
        for j in 0..side {
            let dy = j as f64 - half as f64;
            for i in 0..side {
                let dx = i as f64 - half as f64;
                table.push(quad_weight(a, 0.0, a, dx, dy));
            }
        }
        IsoKernel {
            sigma,
            half,
            side,
            table,
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn side(&self) -> usize {
        self.side
    }
}

impl Kernel for IsoKernel {
    #[inline]
    fn half(&self) -> usize {
        self.half
    }

    #[inline]
    fn weight(&self, dx: i64, dy: i64) -> f64 {
        let h = self.half as i64;
        if dx.abs() > h || dy.abs() > h {
            return 0.0;
        }
        self.table[((dy + h) as usize) * self.side + (dx + h) as usize]
    }
}

/// Scatter every mask point, in canonical order, into full-image maps.
pub fn accumulate(mask: &Mask, values: &[f64], kernel: &IsoKernel) -> AccumulationMaps {
    assert_eq!(mask.len(), values.len(), "one value per mask point");
    let mut maps = AccumulationMaps::new(mask.width(), mask.height());
    for (p, &f) in mask.positions().iter().zip(values) {
        maps.splat(*p, f, kernel);
    }
    maps
}

/// Shepard reconstruction `u = v / w`; uncovered pixels get the mean of the
/// mask values. The result is clamped to `[0, 255]`.
pub fn inpaint_iso(mask: &Mask, values: &[f64], sigma: f64) -> Result<GrayImage> {
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma {sigma} must be positive")));
    }
    let kernel = IsoKernel::new(sigma);
    let maps = accumulate(mask, values, &kernel);
    let data = maps.normalized(hole_fill(values));
    Ok(GrayImage::from_vec(mask.width(), mask.height(), data)?.clamped())
}

/// [`inpaint_iso`] with σ from [`compute_sigma`].
pub fn inpaint_iso_adaptive(mask: &Mask, values: &[f64]) -> Result<GrayImage> {
    let sigma = compute_sigma(mask.len(), mask.width(), mask.height())?;
    inpaint_iso(mask, values, sigma)
}
