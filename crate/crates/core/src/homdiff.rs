//! Homogeneous diffusion inpainting: the steady state of `∂u/∂t = Δu` with
//! the mask values held fixed and reflecting image borders.
//!
//! The 5-point Laplacian restricted to the unknown pixels is symmetric
//! positive definite as soon as a single pixel is fixed, so plain conjugate
//! gradients solve it.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::mask::{make_regular_mask, Mask, Rect};
use crate::metrics::mse;
use crate::ops;
use crate::tonal::{tonal_optimize_trial, LocalModel, Patch, Quantizer, TrialConfig};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    /// Bound on `‖b − Au‖ / ‖b‖`.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tolerance: 1e-6,
            max_iterations: 20_000,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "solver tolerance {} must be positive",
                self.tolerance
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HomSolution {
    pub image: GrayImage,
    pub iterations: usize,
    /// Relative residual reached.
    pub residual: f64,
}

/// Which sides of a grid face a zero Dirichlet boundary rather than a mirror.
#[derive(Clone, Copy, Debug, Default)]
struct OpenSides {
    left: bool,
    right: bool,
    top: bool,
    bottom: bool,
}

/// Laplace problem on a `w × h` grid. `fixed` holds the Dirichlet values.
struct Problem<'a> {
    w: usize,
    h: usize,
    fixed: &'a [Option<f64>],
    open: OpenSides,
}

impl Problem<'_> {
    #[inline]
    fn degree(&self, x: usize, y: usize) -> f64 {
        let o = self.open;
        let left = x > 0 || o.left;
        let right = x + 1 < self.w || o.right;
        let up = y > 0 || o.top;
        let down = y + 1 < self.h || o.bottom;
        (left as u8 + right as u8 + up as u8 + down as u8) as f64
    }

    /// `Ap` on free pixels; `p` must vanish on fixed pixels.
    fn apply(&self, p: &[f64], out: &mut [f64]) {
        let (w, h) = (self.w, self.h);
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                if self.fixed[i].is_some() {
                    out[i] = 0.0;
                    continue;
                }
                let mut s = self.degree(x, y) * p[i];
                if x > 0 {
                    s -= p[i - 1];
                }
                if x + 1 < w {
                    s -= p[i + 1];
                }
                if y > 0 {
                    s -= p[i - w];
                }
                if y + 1 < h {
                    s -= p[i + w];
                }
                out[i] = s;
            }
        }
        ops::add((w * h) as u64);
    }

    fn rhs(&self) -> Vec<f64> {
        let (w, h) = (self.w, self.h);
        let mut b = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                if self.fixed[i].is_some() {
                    continue;
                }
                let mut s = 0.0;
                if x > 0 {
                    s += self.fixed[i - 1].unwrap_or(0.0);
                }
                if x + 1 < w {
                    s += self.fixed[i + 1].unwrap_or(0.0);
                }
                if y > 0 {
                    s += self.fixed[i - w].unwrap_or(0.0);
                }
                if y + 1 < h {
                    s += self.fixed[i + w].unwrap_or(0.0);
                }
                b[i] = s;
            }
        }
        b
    }

    /// Conjugate gradients from `init` on the free pixels. Returns the full
    /// grid (fixed pixels at their values), iterations and relative residual.
    fn solve(&self, init: f64, config: &SolverConfig) -> Result<(Vec<f64>, usize, f64)> {
        self.solve_from(vec![init; self.w * self.h], config)
    }

    /// As [`Problem::solve`], starting from the free entries of `x`.
    fn solve_from(&self, mut x: Vec<f64>, config: &SolverConfig) -> Result<(Vec<f64>, usize, f64)> {
        let n = self.w * self.h;
        let b = self.rhs();
        let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (xi, f) in x.iter_mut().zip(self.fixed) {
            if f.is_some() {
                *xi = 0.0;
            }
        }
        let mut ap = vec![0.0; n];
        self.apply(&x, &mut ap);
        let mut r: Vec<f64> = b.iter().zip(&ap).map(|(b, a)| b - a).collect();
        let mut rr: f64 = r.iter().map(|v| v * v).sum();
        // with b = 0 the solution is 0; measure against 1 instead
        let scale = if b_norm > 0.0 { b_norm } else { 1.0 };
        let mut p = r.clone();
        let mut it = 0;
        while rr.sqrt() > config.tolerance * scale {
            if it == config.max_iterations {
                return Err(Error::NoConvergence {
                    residual: rr.sqrt() / scale,
                    iterations: it,
                });
            }
            self.apply(&p, &mut ap);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            let alpha = rr / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            let rr_new: f64 = r.iter().map(|v| v * v).sum();
            let beta = rr_new / rr;
            for i in 0..n {
                p[i] = r[i] + beta * p[i];
            }
            rr = rr_new;
            it += 1;
        }
        for (xi, f) in x.iter_mut().zip(self.fixed) {
            if let Some(v) = f {
                *xi = *v;
            }
        }
        Ok((x, it, rr.sqrt() / scale))
    }
}

fn check_values(mask: &Mask, values: &[f64]) -> Result<()> {
    if values.len() != mask.len() {
        return Err(Error::InvalidParameter(format!(
            "{} values for {} mask points",
            values.len(),
            mask.len()
        )));
    }
    Ok(())
}

/// Solve and report solver statistics. Unknowns start at the mean of the
/// mask values.
pub fn solve_hom(mask: &Mask, values: &[f64], config: &SolverConfig) -> Result<HomSolution> {
    solve_hom_from(
        mask,
        values,
        values.iter().sum::<f64>() / values.len().max(1) as f64,
        config,
    )
}

/// As [`solve_hom`] with an explicit initial value for the unknowns.
pub fn solve_hom_from(mask: &Mask, values: &[f64], init: f64, config: &SolverConfig) -> Result<HomSolution> {
    config.validate()?;
    check_values(mask, values)?;
    let (w, h) = (mask.width(), mask.height());
    let mut fixed = vec![None; w * h];
    for (p, &v) in mask.positions().iter().zip(values) {
        fixed[p.y * w + p.x] = Some(v);
    }
    let problem = Problem {
        w,
        h,
        fixed: &fixed,
        open: OpenSides::default(),
    };
    let (u, iterations, residual) = problem.solve(init, config)?;
    Ok(HomSolution {
        image: GrayImage::from_vec(w, h, u)?,
        iterations,
        residual,
    })
}

pub fn inpaint_hom(mask: &Mask, values: &[f64], config: &SolverConfig) -> Result<GrayImage> {
    Ok(solve_hom(mask, values, config)?.image)
}

/// Relative residual of `u` for the problem given by `mask` and `values`,
/// computed directly from the stencil.
pub fn hom_residual(mask: &Mask, values: &[f64], u: &GrayImage) -> f64 {
    let (w, h) = (mask.width(), mask.height());
    let mut fixed = vec![None; w * h];
    for (p, &v) in mask.positions().iter().zip(values) {
        fixed[p.y * w + p.x] = Some(v);
    }
    let problem = Problem {
        w,
        h,
        fixed: &fixed,
        open: OpenSides::default(),
    };
    let b = problem.rhs();
    let free: Vec<f64> = u
        .as_slice()
        .iter()
        .zip(&fixed)
        .map(|(v, f)| if f.is_some() { 0.0 } else { *v })
        .collect();
    let mut au = vec![0.0; w * h];
    problem.apply(&free, &mut au);
    let r: f64 = b.iter().zip(&au).map(|(b, a)| (b - a).powi(2)).sum::<f64>().sqrt();
    let bn = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    r / if bn > 0.0 { bn } else { 1.0 }
}

/// Largest half-width of the window used for a point's local response.
const MAX_BASIS_HALF: usize = 32;

#[derive(Clone, Debug)]
struct Basis {
    rect: Rect,
    weights: Vec<f64>,
}

/// Trial-and-error interface for homogeneous diffusion.
///
/// The reconstruction is linear in the mask values, so moving one value
/// adds a multiple of that point's response. The response is solved on a
/// window around the point, twice as wide as the distance to its nearest
/// neighbour, with zero values on the window edge. Neighbouring mask points
/// pin the response to zero, so it is already tiny there, but it is not
/// exact; the optimiser re-evaluates after every sweep.
pub struct HomModel {
    mask: Mask,
    config: SolverConfig,
    halves: Vec<usize>,
    bases: HashMap<usize, Basis>,
    u: Vec<f64>,
}

impl HomModel {
    pub fn new(mask: Mask, config: SolverConfig) -> Result<Self> {
        config.validate()?;
        let halves = basis_halves(&mask);
        let n = mask.width() * mask.height();
        Ok(HomModel {
            mask,
            config,
            halves,
            bases: HashMap::new(),
            u: vec![0.0; n],
        })
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    fn basis(&mut self, k: usize) -> &Basis {
        if !self.bases.contains_key(&k) {
            let b = local_basis(&self.mask, k, self.halves[k], &self.config);
            self.bases.insert(k, b);
        }
        &self.bases[&k]
    }
}

/// Twice the Chebyshev distance to the nearest other mask point, plus one.
fn basis_halves(mask: &Mask) -> Vec<usize> {
    let (w, h) = (mask.width(), mask.height());
    mask.positions()
        .iter()
        .map(|p| {
            for d in 1..=MAX_BASIS_HALF / 2 {
                let r = Rect::around(p.x, p.y, d, w, h);
                let hit = (r.y0..=r.y1).any(|y| {
                    (r.x0..=r.x1).any(|x| {
                        let ring = x.abs_diff(p.x).max(y.abs_diff(p.y)) == d;
                        ring && mask.contains(x, y)
                    })
                });
                if hit {
                    return 2 * d + 1;
                }
            }
            MAX_BASIS_HALF
        })
        .collect()
}

fn local_basis(mask: &Mask, k: usize, half: usize, config: &SolverConfig) -> Basis {
    let (w, h) = (mask.width(), mask.height());
    let p = mask.positions()[k];
    let rect = Rect::around(p.x, p.y, half, w, h);
    let (rw, rh) = (rect.width(), rect.height());
    let mut fixed = vec![None; rw * rh];
    for y in rect.y0..=rect.y1 {
        for x in rect.x0..=rect.x1 {
            if mask.contains(x, y) {
                fixed[(y - rect.y0) * rw + (x - rect.x0)] = Some(if x == p.x && y == p.y { 1.0 } else { 0.0 });
            }
        }
    }
    let problem = Problem {
        w: rw,
        h: rh,
        fixed: &fixed,
        open: OpenSides {
            left: rect.x0 > 0,
            right: rect.x1 + 1 < w,
            top: rect.y0 > 0,
            bottom: rect.y1 + 1 < h,
        },
    };
    // the local system is well posed (k is fixed), so the iteration cap is
    // the only way this can fail; keep the best iterate in that case
    let relaxed = SolverConfig {
        max_iterations: usize::MAX,
        ..*config
    };
    let (weights, _, _) = problem.solve(0.0, &relaxed).expect("uncapped solve converges");
    Basis { rect, weights }
}

#[derive(Clone, Copy, Debug)]
pub struct HomUpdate {
    k: usize,
    shift: f64,
}

impl LocalModel for HomModel {
    type Update = HomUpdate;

    fn reconstruct(&mut self, values: &[f64]) -> Vec<Option<f64>> {
        let mut cfg = self.config;
        cfg.max_iterations = usize::MAX;
        let sol = solve_hom(&self.mask, values, &cfg).expect("uncapped solve converges");
        self.u = sol.image.into_vec();
        self.u.iter().map(|v| Some(v.clamp(0.0, 255.0))).collect()
    }

    fn propose(&mut self, values: &[f64], k: usize, value: f64) -> Patch<HomUpdate> {
        let shift = value - values[k];
        let w = self.mask.width();
        let basis = self.basis(k).clone();
        let r = basis.rect;
        let mut pixels = Vec::with_capacity(r.area());
        for y in r.y0..=r.y1 {
            for x in r.x0..=r.x1 {
                let b = basis.weights[(y - r.y0) * r.width() + (x - r.x0)];
                pixels.push(Some((self.u[y * w + x] + shift * b).clamp(0.0, 255.0)));
            }
        }
        ops::add(r.area() as u64);
        Patch {
            rect: r,
            pixels,
            update: HomUpdate { k, shift },
        }
    }

    fn commit(&mut self, update: HomUpdate) {
        let w = self.mask.width();
        let basis = self.basis(update.k).clone();
        let r = basis.rect;
        for y in r.y0..=r.y1 {
            for x in r.x0..=r.x1 {
                self.u[y * w + x] += update.shift * basis.weights[(y - r.y0) * r.width() + (x - r.x0)];
            }
        }
    }

    fn is_exact(&self) -> bool {
        false
    }
}

/// Trial-and-error interface without localisation: every proposal solves
/// the whole system again, warm-started from the current solution. This is
/// the straightforward way to run trial optimisation on a global operator
/// and is what the cost comparison measures.
pub struct GlobalHomModel {
    mask: Mask,
    config: SolverConfig,
    fixed: Vec<Option<f64>>,
    u: Vec<f64>,
}

impl GlobalHomModel {
    pub fn new(mask: Mask, config: SolverConfig) -> Result<Self> {
        config.validate()?;
        let n = mask.width() * mask.height();
        Ok(GlobalHomModel {
            mask,
            config: SolverConfig {
                max_iterations: usize::MAX,
                ..config
            },
            fixed: vec![None; n],
            u: vec![0.0; n],
        })
    }

    fn set_values(&mut self, values: &[f64]) {
        let w = self.mask.width();
        for (p, &v) in self.mask.positions().iter().zip(values) {
            self.fixed[p.y * w + p.x] = Some(v);
        }
    }

    fn problem(&self) -> Problem<'_> {
        Problem {
            w: self.mask.width(),
            h: self.mask.height(),
            fixed: &self.fixed,
            open: OpenSides::default(),
        }
    }
}

impl LocalModel for GlobalHomModel {
    type Update = Vec<f64>;

    fn reconstruct(&mut self, values: &[f64]) -> Vec<Option<f64>> {
        self.set_values(values);
        let init = values.iter().sum::<f64>() / values.len() as f64;
        let (u, _, _) = self
            .problem()
            .solve(init, &self.config)
            .expect("uncapped solve converges");
        self.u = u;
        self.u.iter().map(|v| Some(v.clamp(0.0, 255.0))).collect()
    }

    fn propose(&mut self, values: &[f64], k: usize, value: f64) -> Patch<Vec<f64>> {
        let p = self.mask.positions()[k];
        let i = p.y * self.mask.width() + p.x;
        self.fixed[i] = Some(value);
        let solved = self.problem().solve_from(self.u.clone(), &self.config);
        self.fixed[i] = Some(values[k]);
        let (u, _, _) = solved.expect("uncapped solve converges");
        Patch {
            rect: Rect::full(self.mask.width(), self.mask.height()),
            pixels: u.iter().map(|v| Some(v.clamp(0.0, 255.0))).collect(),
            update: u,
        }
    }

    fn commit(&mut self, update: Vec<f64>) {
        let w = self.mask.width();
        for p in self.mask.positions() {
            let i = p.y * w + p.x;
            self.fixed[i] = Some(update[i]);
        }
        self.u = update;
    }

    fn is_exact(&self) -> bool {
        false
    }
}

/// Homogeneous diffusion on a regular grid with trial tonal optimisation.
/// There is no container format for this baseline; it exists for quality
/// and cost comparisons.
#[derive(Clone, Debug, PartialEq)]
pub struct HomEncoding {
    pub levels: Vec<u16>,
    pub reconstruction: GrayImage,
    pub mse: f64,
}

pub fn hom_encode_fixed(
    image: &GrayImage,
    r: usize,
    q: usize,
    trial: TrialConfig,
    localised: bool,
) -> Result<HomEncoding> {
    let quant = Quantizer::new(q)?;
    let mask = make_regular_mask(image.width(), image.height(), r)?;
    let levels: Vec<u16> = mask.sample(image)?.iter().map(|&f| quant.quantize(f)).collect();
    hom_optimize(image, mask, &levels, quant, trial, localised)
}

/// Trial tonal optimisation of `levels` on `mask`, then a final solve.
/// `localised` picks [`HomModel`] over [`GlobalHomModel`].
pub fn hom_optimize(
    image: &GrayImage,
    mask: Mask,
    levels: &[u16],
    quant: Quantizer,
    trial: TrialConfig,
    localised: bool,
) -> Result<HomEncoding> {
    let levels = if trial.sweeps == 0 {
        levels.to_vec()
    } else if localised {
        let mut model = HomModel::new(mask.clone(), SolverConfig::default())?;
        tonal_optimize_trial(&mut model, levels, quant, image, trial)?.levels
    } else {
        let mut model = GlobalHomModel::new(mask.clone(), SolverConfig::default())?;
        tonal_optimize_trial(&mut model, levels, quant, image, trial)?.levels
    };
    let values: Vec<f64> = levels.iter().map(|&l| quant.dequantize(l)).collect();
    let recon = inpaint_hom(&mask, &values, &SolverConfig::default())?
        .clamped()
        .rounded();
    let mse = mse(image, &recon)?;
    Ok(HomEncoding {
        levels,
        reconstruction: recon,
        mse,
    })
}
