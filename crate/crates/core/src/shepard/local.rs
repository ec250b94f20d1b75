//! Local re-evaluation of per-point Shepard reconstructions.
//!
//! When a single stored value changes, only a bounded region of the
//! reconstruction moves. For oriented kernels the region also includes the
//! windows of every point whose pre-pass gradient is affected. The region is
//! recomputed from scratch with all contributing points in canonical order,
//! which reproduces the full reconstruction bit for bit.

use super::aniso::{accumulate_kernels, gradient_with, point_kernels, KernelMode, OrientedKernel};
use super::iso::{compute_sigma, IsoKernel};
use super::{AccumulationMaps, Kernel, PointIndex};
use crate::error::{Error, Result};
use crate::mask::{Mask, Rect};
use crate::tonal::{LocalModel, Patch};

/// Per-point Shepard operator with cached kernels and accumulation maps.
#[derive(Clone, Debug)]
pub struct ShepardModel {
    mask: Mask,
    sigmas: Vec<f64>,
    mode: KernelMode,
    pre_kernel: IsoKernel,
    index: PointIndex,
    max_half: usize,
    kernels: Vec<OrientedKernel>,
    maps: AccumulationMaps,
    near: Vec<usize>,
    cand: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct ShepardUpdate {
    kernels: Vec<(usize, OrientedKernel)>,
    maps: AccumulationMaps,
}

impl ShepardModel {
    pub fn new(mask: Mask, sigmas: Vec<f64>, mode: KernelMode) -> Result<Self> {
        if sigmas.len() != mask.len() {
            return Err(Error::InvalidParameter("one sigma per mask point".into()));
        }
        if let Some(s) = sigmas.iter().find(|&&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidParameter(format!("sigma {s} must be positive")));
        }
        let pre_kernel = IsoKernel::new(compute_sigma(mask.len(), mask.width(), mask.height())?);
        let max_half = sigmas
            .iter()
            .map(|&s| OrientedKernel::isotropic(s).half())
            .max()
            .unwrap_or(1);
        let index = PointIndex::new(&mask, pre_kernel.half().max(4));
        let maps = AccumulationMaps::new(mask.width(), mask.height());
        Ok(ShepardModel {
            mask,
            sigmas,
            mode,
            pre_kernel,
            index,
            max_half,
            kernels: Vec::new(),
            maps,
            near: Vec::new(),
            cand: Vec::new(),
        })
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn kernels(&self) -> &[OrientedKernel] {
        &self.kernels
    }

    pub fn maps(&self) -> &AccumulationMaps {
        &self.maps
    }

    fn window(&self, i: usize, half: usize) -> Rect {
        let p = self.mask.positions()[i];
        Rect::around(p.x, p.y, half, self.mask.width(), self.mask.height())
    }

    /// New kernels for every point whose gradient depends on point `k`.
    fn refreshed_kernels(&mut self, values: &[f64], k: usize, value: f64) -> Vec<(usize, OrientedKernel)> {
        let g = match self.mode {
            KernelMode::Isotropic => return Vec::new(),
            KernelMode::Anisotropic(g) => g,
        };
        let (w, h) = (self.mask.width(), self.mask.height());
        let pts = self.mask.positions();
        let hg = self.pre_kernel.half();
        let pk = pts[k];

        // gradients read the pre-pass one pixel around each point
        let reach = Rect::around(pk.x, pk.y, hg + 1, w, h);
        self.index.query(reach, 0, &mut self.near);
        self.near.retain(|&j| reach.contains(pts[j].x, pts[j].y));
        let region = self
            .near
            .iter()
            .map(|&j| Rect::around(pts[j].x, pts[j].y, 1, w, h))
            .reduce(|a, b| a.union(&b))
            .expect("k is within its own reach");

        let mut pre = AccumulationMaps::for_rect(region);
        self.index.query(region, hg, &mut self.cand);
        for &i in &self.cand {
            if Rect::around(pts[i].x, pts[i].y, hg, w, h).intersects(&region) {
                let f = if i == k { value } else { values[i] };
                pre.splat(pts[i], f, &self.pre_kernel);
            }
        }
        let at = |x: usize, y: usize| pre.ratio_at(x, y).expect("own window covers the stencil");
        self.near
            .iter()
            .map(|&j| {
                let (fx, fy) = gradient_with(at, w, h, pts[j].x, pts[j].y);
                (j, OrientedKernel::from_gradient(fx, fy, self.sigmas[j], g))
            })
            .collect()
    }
}

impl LocalModel for ShepardModel {
    type Update = ShepardUpdate;

    fn reconstruct(&mut self, values: &[f64]) -> Vec<Option<f64>> {
        self.kernels = point_kernels(&self.mask, values, &self.sigmas, self.mode);
        self.maps = accumulate_kernels(&self.mask, values, &self.kernels);
        self.maps.ratios()
    }

    fn propose(&mut self, values: &[f64], k: usize, value: f64) -> Patch<ShepardUpdate> {
        let (w, h) = (self.mask.width(), self.mask.height());
        let fresh = self.refreshed_kernels(values, k, value);
        let rect = fresh
            .iter()
            .map(|(j, kern)| self.window(*j, kern.half()))
            .fold(self.window(k, self.kernels[k].half()), |a, b| a.union(&b));

        let pts = self.mask.positions();
        let mut maps = AccumulationMaps::for_rect(rect);
        self.index.query(rect, self.max_half, &mut self.cand);
        // `fresh` is sorted by point index, as is `cand`
        let mut next = fresh.iter().peekable();
        for &i in &self.cand {
            let kern = match next.peek() {
                Some((j, kern)) if *j == i => {
                    next.next();
                    kern
                }
                _ => &self.kernels[i],
            };
            if Rect::around(pts[i].x, pts[i].y, kern.half(), w, h).intersects(&rect) {
                let f = if i == k { value } else { values[i] };
                maps.splat(pts[i], f, kern);
            }
        }
        Patch {
            rect,
            pixels: maps.ratios(),
            update: ShepardUpdate { kernels: fresh, maps },
        }
    }

    fn commit(&mut self, update: ShepardUpdate) {
        for (j, kern) in update.kernels {
            self.kernels[j] = kern;
        }
        self.maps.paste(&update.maps);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{make_disk, DiskShape, GrayImage};
    use crate::mask::make_regular_mask;
    use crate::shepard::aniso::Diffusivity;
    use crate::shepard::voronoi::voronoi_sigmas;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn check_exact(mask: Mask, sigmas: Vec<f64>, mode: KernelMode, truth: &GrayImage) {
        let mut values = mask.sample(truth).unwrap();
        let mut model = ShepardModel::new(mask.clone(), sigmas.clone(), mode).unwrap();
        model.reconstruct(&values);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for step in 0..60 {
            let k = rng.gen_range(0..mask.len());
            let v = rng.gen_range(0.0..255.0);
            let patch = model.propose(&values, k, v);
            values[k] = v;
            let mut full = ShepardModel::new(mask.clone(), sigmas.clone(), mode).unwrap();
            let all = full.reconstruct(&values);
            let r = patch.rect;
            for y in r.y0..=r.y1 {
                for x in r.x0..=r.x1 {
                    assert_eq!(
                        patch.pixels[(y - r.y0) * r.width() + x - r.x0],
                        all[y * mask.width() + x],
                        "step {step} at ({x}, {y})"
                    );
                }
            }
            model.commit(patch.update);
            assert_eq!(model.maps(), full.maps(), "step {step}");
            assert_eq!(model.kernels(), full.kernels(), "step {step}");
        }
    }

    fn disk() -> GrayImage {
        make_disk(&DiskShape {
            size: 48,
            radius: 15.0,
            inside: 20.0,
            outside: 230.0,
        })
        .unwrap()
    }

    #[test]
    fn anisotropic_patches_are_bit_exact() {
        let mask = make_regular_mask(48, 48, 4).unwrap();
        let s = compute_sigma(mask.len(), 48, 48).unwrap();
        let sigmas = vec![1.3 * s; mask.len()];
        let mode = KernelMode::Anisotropic(Diffusivity::PeronaMalik { lambda: 4.0 });
        check_exact(mask, sigmas, mode, &disk());
    }

    #[test]
    fn voronoi_patches_are_bit_exact() {
        let pts = vec![
            crate::mask::Point::new(0, 0),
            crate::mask::Point::new(47, 0),
            crate::mask::Point::new(0, 47),
            crate::mask::Point::new(47, 47),
            crate::mask::Point::new(23, 23),
            crate::mask::Point::new(23, 0),
            crate::mask::Point::new(11, 30),
        ];
        let mask = Mask::new(48, 48, pts).unwrap();
        let sigmas = voronoi_sigmas(&mask, 0.8).sigma;
        check_exact(mask.clone(), sigmas.clone(), KernelMode::Isotropic, &disk());
        let mode = KernelMode::Anisotropic(Diffusivity::PeronaMalik { lambda: 2.0 });
        check_exact(mask, sigmas, mode, &disk());
    }

    #[test]
    fn sparse_mask_reports_holes() {
        let mask = Mask::new(
            40,
            40,
            vec![crate::mask::Point::new(2, 2), crate::mask::Point::new(37, 37)],
        )
        .unwrap();
        let mut model = ShepardModel::new(mask, vec![0.8, 0.8], KernelMode::Isotropic).unwrap();
        let recon = model.reconstruct(&[10.0, 20.0]);
        assert!(recon.iter().any(Option::is_none));
        assert_eq!(recon[2 * 40 + 2], Some(10.0));
    }
}
