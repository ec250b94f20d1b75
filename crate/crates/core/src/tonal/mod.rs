//! Quantisation and tonal optimisation of stored mask values.
//!
//! Two optimisers share the same error bookkeeping: a closed-form update
//! for the isotropic operator with a single global kernel ([`iso`]), and a
//! seeded trial-and-error search for any operator that can re-evaluate a
//! local patch after a single value changes ([`trial`]).

pub mod iso;
pub mod trial;

pub use iso::{tonal_closed_form_iso, tonal_error_iso, tonal_optimize_iso, TonalState};
pub use trial::{tonal_optimize_trial, LocalModel, Patch, TrialConfig, TrialOutcome};

use crate::error::{Error, Result};
use crate::mask::Rect;

/// Uniform scalar quantiser with `q` levels over `[0, 256)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Quantizer {
    q: u16,
}

impl Quantizer {
    pub fn new(q: usize) -> Result<Self> {
        if !(2..=256).contains(&q) {
            return Err(Error::InvalidParameter(format!("q = {q} outside [2, 256]")));
        }
        Ok(Quantizer { q: q as u16 })
    }

    #[inline]
    pub fn levels(&self) -> usize {
        self.q as usize
    }

    /// `min(⌊f·q/256⌋, q − 1)` after clamping `f` to `[0, 255]`.
    #[inline]
    pub fn quantize(&self, f: f64) -> u16 {
        let f = if f.is_nan() { 0.0 } else { f.clamp(0.0, 255.0) };
        ((f * self.q as f64 / 256.0).floor() as u16).min(self.q - 1)
    }

    /// Midpoint of the level's interval, clamped to `[0, 255]`.
    #[inline]
    pub fn dequantize(&self, level: u16) -> f64 {
        debug_assert!(level < self.q);
        ((level as f64 + 0.5) * 256.0 / self.q as f64).min(255.0)
    }

    /// Value snapped to the midpoint of its own interval.
    #[inline]
    pub fn project(&self, f: f64) -> f64 {
        self.dequantize(self.quantize(f))
    }

    /// Width of a fixed-length binary level field, `⌈log₂ q⌉`.
    pub fn bits(&self) -> u32 {
        (self.q as u32 - 1).checked_ilog2().map_or(1, |b| b + 1)
    }
}

pub fn quantize(f: f64, q: usize) -> Result<u16> {
    Ok(Quantizer::new(q)?.quantize(f))
}

pub fn dequantize(level: u16, q: usize) -> Result<f64> {
    let quant = Quantizer::new(q)?;
    if level as usize >= q {
        return Err(Error::SymbolOutOfRange {
            symbol: level as usize,
            alphabet: q,
        });
    }
    Ok(quant.dequantize(level))
}

/// Squared error between a reconstruction and the ground truth, kept up to
/// date under local patches.
///
/// Pixels without any kernel coverage (`None`) take the mean of the mask
/// values, so a change anywhere moves all of them at once. Their error is
/// tracked through the sums `Σ1`, `Σf` and `Σf²` over hole pixels, which
/// makes the effect of a new mean an O(1) update.
#[derive(Clone, Debug)]
pub(crate) struct ErrorTracker<'a> {
    width: usize,
    truth: &'a [f64],
    recon: Vec<Option<f64>>,
    hole_n: f64,
    hole_f: f64,
    hole_ff: f64,
    value_sum: f64,
    value_n: usize,
    total: f64,
}

impl<'a> ErrorTracker<'a> {
    pub fn new(width: usize, truth: &'a [f64], recon: Vec<Option<f64>>, values: &[f64]) -> Self {
        let mut t = ErrorTracker {
            width,
            truth,
            recon,
            hole_n: 0.0,
            hole_f: 0.0,
            hole_ff: 0.0,
            value_sum: values.iter().sum(),
            value_n: values.len(),
            total: 0.0,
        };
        let mean = t.mean();
        let mut known = 0.0;
        for (&f, u) in t.truth.iter().zip(&t.recon) {
            match *u {
                Some(u) => known += (f - u) * (f - u),
                None => {
                    t.hole_n += 1.0;
                    t.hole_f += f;
                    t.hole_ff += f * f;
                }
            }
        }
        t.total = known + t.hole_error(mean);
        t
    }

    #[inline]
    fn mean(&self) -> f64 {
        self.value_sum / self.value_n as f64
    }

    fn hole_error(&self, m: f64) -> f64 {
        (self.hole_ff - 2.0 * m * self.hole_f + self.hole_n * m * m).max(0.0)
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn mse(&self) -> f64 {
        self.total / self.truth.len() as f64
    }

    /// Change of the total squared error if the pixels of `rect` became
    /// `pixels` and one stored value moved by `value_shift`.
    pub fn delta(&self, rect: Rect, pixels: &[Option<f64>], value_shift: f64) -> f64 {
        debug_assert_eq!(pixels.len(), rect.area());
        let m = self.mean();
        let m2 = (self.value_sum + value_shift) / self.value_n as f64;
        let (mut d, mut in_n, mut in_f) = (0.0, 0.0, 0.0);
        let rw = rect.width();
        for y in rect.y0..=rect.y1 {
            let row = y * self.width;
            let prow = (y - rect.y0) * rw;
            for x in rect.x0..=rect.x1 {
                let f = self.truth[row + x];
                let old = match self.recon[row + x] {
                    Some(u) => (f - u) * (f - u),
                    None => {
                        in_n += 1.0;
                        in_f += f;
                        (f - m) * (f - m)
                    }
                };
                let u = pixels[prow + x - rect.x0].unwrap_or(m2);
                d += (f - u) * (f - u) - old;
            }
        }
        let (out_n, out_f) = (self.hole_n - in_n, self.hole_f - in_f);
        if out_n > 0.0 && m2 != m {
            d += out_n * (m2 * m2 - m * m) - 2.0 * out_f * (m2 - m);
        }
        d
    }

    /// Commit a patch whose error change `delta` was computed beforehand.
    pub fn apply(&mut self, rect: Rect, pixels: &[Option<f64>], value_shift: f64, delta: f64) {
        let rw = rect.width();
        for y in rect.y0..=rect.y1 {
            let row = y * self.width;
            for x in rect.x0..=rect.x1 {
                let i = row + x;
                let f = self.truth[i];
                let new = pixels[(y - rect.y0) * rw + x - rect.x0];
                let sign = match (self.recon[i].is_none(), new.is_none()) {
                    (true, false) => -1.0,
                    (false, true) => 1.0,
                    _ => 0.0,
                };
                if sign != 0.0 {
                    self.hole_n += sign;
                    self.hole_f += sign * f;
                    self.hole_ff += sign * f * f;
                }
                self.recon[i] = new;
            }
        }
        self.value_sum += value_shift;
        self.total += delta;
    }
}
