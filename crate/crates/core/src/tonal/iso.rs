//! Closed-form tonal optimisation for isotropic Shepard with one global kernel.
//!
//! Changing the value of point `i` from `old` to `c` moves every pixel `j` of
//! its window to `(v_j + G(x_j − x_i)(c − old)) / w_j`. The local squared
//! error is therefore a quadratic in `c` whose minimiser has a closed form.

use super::{ErrorTracker, Quantizer};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::mask::{Mask, Rect};
use crate::shepard::iso::{accumulate, compute_sigma, IsoKernel};
use crate::shepard::{hole_fill, AccumulationMaps, Kernel};

/// Quantised mask values together with accumulation maps that always
/// describe the current values.
#[derive(Clone, Debug)]
pub struct TonalState {
    mask: Mask,
    truth: GrayImage,
    kernel: IsoKernel,
    quant: Quantizer,
    levels: Vec<u16>,
    values: Vec<f64>,
    maps: AccumulationMaps,
}

impl TonalState {
    pub fn new(mask: Mask, truth: GrayImage, kernel: IsoKernel, quant: Quantizer, levels: Vec<u16>) -> Result<Self> {
        if truth.width() != mask.width() || truth.height() != mask.height() {
            return Err(Error::DimensionMismatch(
                truth.width(),
                truth.height(),
                mask.width(),
                mask.height(),
            ));
        }
        if levels.len() != mask.len() {
            return Err(Error::InvalidParameter("one level per mask point".into()));
        }
        if let Some(&l) = levels.iter().find(|&&l| l as usize >= quant.levels()) {
            return Err(Error::SymbolOutOfRange {
                symbol: l as usize,
                alphabet: quant.levels(),
            });
        }
        let values: Vec<f64> = levels.iter().map(|&l| quant.dequantize(l)).collect();
        let maps = accumulate(&mask, &values, &kernel);
        Ok(TonalState {
            mask,
            truth,
            kernel,
            quant,
            levels,
            values,
            maps,
        })
    }

    /// Sample `truth` on `mask`, quantise, and use the global adaptive σ.
    pub fn from_image(mask: Mask, truth: GrayImage, quant: Quantizer) -> Result<Self> {
        let sigma = compute_sigma(mask.len(), mask.width(), mask.height())?;
        let levels = mask.sample(&truth)?.iter().map(|&f| quant.quantize(f)).collect();
        Self::new(mask, truth, IsoKernel::new(sigma), quant, levels)
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn kernel(&self) -> &IsoKernel {
        &self.kernel
    }

    pub fn quantizer(&self) -> Quantizer {
        self.quant
    }

    pub fn levels(&self) -> &[u16] {
        &self.levels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn maps(&self) -> &AccumulationMaps {
        &self.maps
    }

    pub fn truth(&self) -> &GrayImage {
        &self.truth
    }

    /// Replace the maps by a from-scratch accumulation.
    pub fn rebuild(&mut self) {
        self.maps = accumulate(&self.mask, &self.values, &self.kernel);
    }

    /// Change one level and update the value map incrementally.
    pub fn set_level(&mut self, i: usize, level: u16) {
        let new = self.quant.dequantize(level);
        let shift = new - self.values[i];
        self.maps.shift_value(self.mask.positions()[i], shift, &self.kernel);
        self.levels[i] = level;
        self.values[i] = new;
    }

    pub fn reconstruction(&self) -> GrayImage {
        let data = self.maps.normalized(hole_fill(&self.values));
        GrayImage::from_vec(self.mask.width(), self.mask.height(), data)
            .expect("maps cover the image")
            .clamped()
    }

    pub fn mse(&self) -> f64 {
        crate::metrics::mse(&self.truth, &self.reconstruction()).expect("same size")
    }

    pub fn into_levels(self) -> Vec<u16> {
        self.levels
    }

    fn window(&self, i: usize) -> Rect {
        let p = self.mask.positions()[i];
        Rect::around(p.x, p.y, self.kernel.half(), self.mask.width(), self.mask.height())
    }

    /// Reconstruction over point `i`'s window if its value were `candidate`.
    fn window_pixels(&self, i: usize, candidate: f64) -> (Rect, Vec<Option<f64>>) {
        let p = self.mask.positions()[i];
        let rect = self.window(i);
        let shift = candidate - self.values[i];
        let mut out = Vec::with_capacity(rect.area());
        for y in rect.y0..=rect.y1 {
            for x in rect.x0..=rect.x1 {
                let g = self.kernel.weight(x as i64 - p.x as i64, y as i64 - p.y as i64);
                let w = self.maps.w_at(x, y);
                out.push((w > 0.0).then(|| ((self.maps.v_at(x, y) + g * shift) / w).clamp(0.0, 255.0)));
            }
        }
        (rect, out)
    }
}

/// Squared error over point `i`'s window after hypothetically setting its
/// value to `candidate`, evaluated from the maps without re-inpainting.
pub fn tonal_error_iso(state: &TonalState, i: usize, candidate: f64) -> f64 {
    let p = state.mask.positions()[i];
    let shift = candidate - state.values[i];
    let rect = state.window(i);
    let mut err = 0.0;
    for y in rect.y0..=rect.y1 {
        for x in rect.x0..=rect.x1 {
            let w = state.maps.w_at(x, y);
            if w <= 0.0 {
                continue;
            }
            let g = state.kernel.weight(x as i64 - p.x as i64, y as i64 - p.y as i64);
            let u = (state.maps.v_at(x, y) + g * shift) / w;
            let e = state.truth.get(x, y) - u;
            err += e * e;
        }
    }
    err
}

/// Unconstrained minimiser of [`tonal_error_iso`] over real candidates:
/// `Σ (g/w)(f − (v − g·old)/w) / Σ g²/w²`.
pub fn tonal_closed_form_iso(state: &TonalState, i: usize) -> f64 {
    let p = state.mask.positions()[i];
    let old = state.values[i];
    let rect = state.window(i);
    let (mut num, mut den) = (0.0, 0.0);
    for y in rect.y0..=rect.y1 {
        for x in rect.x0..=rect.x1 {
            let w = state.maps.w_at(x, y);
            let g = state.kernel.weight(x as i64 - p.x as i64, y as i64 - p.y as i64);
            if w <= 0.0 || g == 0.0 {
                continue;
            }
            let a = g / w;
            num += a * (state.truth.get(x, y) - (state.maps.v_at(x, y) - g * old) / w);
            den += a * a;
        }
    }
    assert!(den > 0.0, "point window carries no weight");
    num / den
}

/// Sweep the mask in canonical order, move each value to the quantised
/// closed-form optimum, and keep the change only if the global squared error
/// does not grow. Returns the MSE after every committed change, starting
/// with the initial MSE.
pub fn tonal_optimize_iso(state: &mut TonalState, sweeps: usize) -> Vec<f64> {
    let mut history = Vec::new();
    for _ in 0..sweeps {
        state.rebuild();
        let truth = state.truth.as_slice().to_vec();
        let mut tracker = ErrorTracker::new(state.mask.width(), &truth, state.maps.ratios(), &state.values);
        if history.is_empty() {
            history.push(tracker.mse());
        }
        let mut changed = false;
        for i in 0..state.mask.len() {
            let level = state.quant.quantize(tonal_closed_form_iso(state, i));
            if level == state.levels[i] {
                continue;
            }
            let new = state.quant.dequantize(level);
            let (rect, pixels) = state.window_pixels(i, new);
            let shift = new - state.values[i];
            let delta = tracker.delta(rect, &pixels, shift);
            if delta <= 0.0 {
                tracker.apply(rect, &pixels, shift, delta);
                state.set_level(i, level);
                history.push(tracker.mse());
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    state.rebuild();
    history
}
