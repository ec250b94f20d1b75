//! Anisotropic Shepard inpainting.
//!
//! Each mask point gets an oriented Gaussian whose long axis follows the
//! level line through the point. Orientation and elongation come from the
//! gradient of a preliminary isotropic reconstruction, so a decoder can
//! re-derive every kernel from the stored values alone.

use super::iso::{accumulate, compute_sigma, IsoKernel};
use super::{hole_fill, quad_weight, window_half, AccumulationMaps, Kernel};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::mask::Mask;

/// Central-difference derivatives (unit grid spacing); one-sided at the border.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientField {
    pub width: usize,
    pub height: usize,
    pub fx: Vec<f64>,
    pub fy: Vec<f64>,
}

pub fn compute_gradients(image: &GrayImage) -> Result<GradientField> {
    let (w, h) = (image.width(), image.height());
    if w < 2 || h < 2 {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            min: 2,
        });
    }
    let mut fx = Vec::with_capacity(w * h);
    let mut fy = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (gx, gy) = gradient_at(image.as_slice(), w, h, x, y);
            fx.push(gx);
            fy.push(gy);
        }
    }
    Ok(GradientField {
        width: w,
        height: h,
        fx,
        fy,
    })
}

#[inline]
pub(crate) fn gradient_at(u: &[f64], w: usize, h: usize, x: usize, y: usize) -> (f64, f64) {
    gradient_with(|x, y| u[y * w + x], w, h, x, y)
}

/// Same stencil as [`gradient_at`] with samples supplied by `at`.
#[inline]
pub(crate) fn gradient_with(at: impl Fn(usize, usize) -> f64, w: usize, h: usize, x: usize, y: usize) -> (f64, f64) {
    let gx = if w < 2 {
        0.0
    } else if x == 0 {
        at(1, y) - at(0, y)
    } else if x == w - 1 {
        at(x, y) - at(x - 1, y)
    } else {
        (at(x + 1, y) - at(x - 1, y)) / 2.0
    };
    let gy = if h < 2 {
        0.0
    } else if y == 0 {
        at(x, 1) - at(x, 0)
    } else if y == h - 1 {
        at(x, y) - at(x, y - 1)
    } else {
        (at(x, y + 1) - at(x, y - 1)) / 2.0
    };
    (gx, gy)
}

/// Rational Perona–Malik diffusivity `1 / (1 + s² / λ²)`.
pub fn diffusivity(s2: f64, lambda: f64) -> f64 {
    1.0 / (1.0 + s2 / (lambda * lambda))
}

/// How strongly the kernel shrinks across edges.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Diffusivity {
    PeronaMalik {
        lambda: f64,
    },
    /// `g ≡ 1`: every kernel stays isotropic.
    Constant,
}

impl Diffusivity {
    #[inline]
    pub fn eval(&self, s2: f64) -> f64 {
        match *self {
            Diffusivity::PeronaMalik { lambda } => diffusivity(s2, lambda),
            Diffusivity::Constant => 1.0,
        }
    }
}

/// Oriented, truncated Gaussian `exp(−dᵀ M d)` with
/// `M = [[α, −β], [−β, γ]]` and `θ` the angle of the long axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrientedKernel {
    pub theta: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    half: usize,
}

impl OrientedKernel {
    /// Kernel with standard deviation `sigma1` along direction `theta` and
    /// `sigma2` across it. The window is sized from the larger `sigma1`.
    pub fn new(theta: f64, sigma1: f64, sigma2: f64) -> Self {
        let a1 = 1.0 / (2.0 * sigma1 * sigma1);
        let (alpha, beta, gamma) = if sigma1 == sigma2 {
            (a1, 0.0, a1)
        } else {
            let a2 = 1.0 / (2.0 * sigma2 * sigma2);
            let (s, c) = theta.sin_cos();
            let s2t = (2.0 * theta).sin();
            (
                c * c * a1 + s * s * a2,
                -s2t / (4.0 * sigma1 * sigma1) + s2t / (4.0 * sigma2 * sigma2),
                s * s * a1 + c * c * a2,
            )
        };
        OrientedKernel {
            theta,
            sigma1,
            sigma2,
            alpha,
            beta,
            gamma,
            half: window_half(sigma1),
        }
    }

    pub fn isotropic(sigma: f64) -> Self {
        Self::new(0.0, sigma, sigma)
    }

    /// Kernel adapted to the gradient `(fx, fy)`: `σ₁ = σ`,
    /// `σ₂ = σ·√g(|∇f|²)`, long axis orthogonal to the gradient.
    pub fn from_gradient(fx: f64, fy: f64, sigma: f64, g: Diffusivity) -> Self {
        let s2 = fx * fx + fy * fy;
        let sigma2 = sigma * g.eval(s2).sqrt();
        let theta = (-fx).atan2(fy);
        Self::new(theta, sigma, sigma2)
    }

    pub fn determinant(&self) -> f64 {
        self.alpha * self.gamma - self.beta * self.beta
    }
}

impl Kernel for OrientedKernel {
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
        quad_weight(self.alpha, self.beta, self.gamma, dx as f64, dy as f64)
    }
}

pub fn kernel_from_gradient(fx: f64, fy: f64, sigma: f64, lambda: f64) -> OrientedKernel {
    OrientedKernel::from_gradient(fx, fy, sigma, Diffusivity::PeronaMalik { lambda })
}

/// Untruncated weight of the oriented Gaussian at offset `(dx, dy)`.
pub fn oriented_weight(kernel: &OrientedKernel, dx: f64, dy: f64) -> f64 {
    quad_weight(kernel.alpha, kernel.beta, kernel.gamma, dx, dy)
}

/// Kernel family used for the final Shepard pass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelMode {
    /// Per-point isotropic Gaussians.
    Isotropic,
    /// Per-point oriented Gaussians derived from an isotropic pre-pass.
    Anisotropic(Diffusivity),
}

/// Isotropic pre-pass with the global adaptive σ: the derivative source.
pub(crate) fn prepass(mask: &Mask, values: &[f64]) -> Vec<f64> {
    let sigma = compute_sigma(mask.len(), mask.width(), mask.height()).expect("non-empty mask");
    let maps = accumulate(mask, values, &IsoKernel::new(sigma));
    maps.normalized(hole_fill(values))
}

/// One kernel per mask point, in canonical order.
pub fn point_kernels(mask: &Mask, values: &[f64], sigmas: &[f64], mode: KernelMode) -> Vec<OrientedKernel> {
    match mode {
        KernelMode::Isotropic => sigmas.iter().map(|&s| OrientedKernel::isotropic(s)).collect(),
        KernelMode::Anisotropic(g) => {
            let (w, h) = (mask.width(), mask.height());
            let pre = prepass(mask, values);
            mask.positions()
                .iter()
                .zip(sigmas)
                .map(|(p, &s)| {
                    let (fx, fy) = gradient_at(&pre, w, h, p.x, p.y);
                    OrientedKernel::from_gradient(fx, fy, s, g)
                })
                .collect()
        }
    }
}

pub(crate) fn accumulate_kernels(mask: &Mask, values: &[f64], kernels: &[OrientedKernel]) -> AccumulationMaps {
    let mut maps = AccumulationMaps::new(mask.width(), mask.height());
    for ((p, &f), k) in mask.positions().iter().zip(values).zip(kernels) {
        maps.splat(*p, f, k);
    }
    maps
}

fn check(mask: &Mask, values: &[f64], sigmas: &[f64]) -> Result<()> {
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    if values.len() != mask.len() || sigmas.len() != mask.len() {
        return Err(Error::InvalidParameter(
            "need one value and one sigma per mask point".into(),
        ));
    }
    if let Some(s) = sigmas.iter().find(|&&s| !(s > 0.0 && s.is_finite())) {
        return Err(Error::InvalidParameter(format!("sigma {s} must be positive")));
    }
    Ok(())
}

/// Shepard reconstruction with per-point base σ and the given kernel family.
pub fn inpaint_shepard(mask: &Mask, values: &[f64], sigmas: &[f64], mode: KernelMode) -> Result<GrayImage> {
    check(mask, values, sigmas)?;
    let kernels = point_kernels(mask, values, sigmas, mode);
    let maps = accumulate_kernels(mask, values, &kernels);
    let data = maps.normalized(hole_fill(values));
    Ok(GrayImage::from_vec(mask.width(), mask.height(), data)?.clamped())
}

/// Anisotropic Shepard inpainting with the Perona–Malik diffusivity.
pub fn inpaint_aniso(mask: &Mask, values: &[f64], sigmas: &[f64], lambda: f64) -> Result<GrayImage> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda {lambda} must be positive")));
    }
    inpaint_shepard(
        mask,
        values,
        sigmas,
        KernelMode::Anisotropic(Diffusivity::PeronaMalik { lambda }),
    )
}
