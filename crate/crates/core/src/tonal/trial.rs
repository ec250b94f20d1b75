//! Trial-and-error tonal optimisation for operators without a closed form.
//!
//! Points are visited in a seeded random order. For each point the level is
//! stepped by one in either direction for as long as the global squared
//! error keeps dropping. An operator only has to report how a bounded patch
//! of the reconstruction changes when one value moves.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ErrorTracker, Quantizer};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::mask::Rect;

/// The reconstruction over `rect` after a proposed change, plus whatever the
/// operator needs to make that change permanent.
#[derive(Clone, Debug)]
pub struct Patch<U> {
    pub rect: Rect,
    /// Row-major over `rect`; `None` marks pixels no kernel reaches.
    pub pixels: Vec<Option<f64>>,
    pub update: U,
}

/// An inpainting operator that can evaluate single-value changes locally.
pub trait LocalModel {
    type Update;

    /// Full reconstruction for `values`, clamped to `[0, 255]`. Also resets
    /// any internal state to describe exactly these values.
    fn reconstruct(&mut self, values: &[f64]) -> Vec<Option<f64>>;

    /// Reconstruction patch if point `k` took `value` while all other points
    /// keep `values`. Must not change the model state.
    fn propose(&mut self, values: &[f64], k: usize, value: f64) -> Patch<Self::Update>;

    /// Make a proposed change the current state.
    fn commit(&mut self, update: Self::Update);

    /// Whether patches reproduce a full reconstruction exactly. Inexact
    /// models get a full re-evaluation after every sweep.
    fn is_exact(&self) -> bool {
        true
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrialConfig {
    pub sweeps: usize,
    pub seed: u64,
}

impl Default for TrialConfig {
    fn default() -> Self {
        TrialConfig { sweeps: 3, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialOutcome {
    pub levels: Vec<u16>,
    /// Global MSE at the start and after every accepted change (after every
    /// sweep for inexact models).
    pub history: Vec<f64>,
    /// MSE of a full reconstruction with the final levels.
    pub mse: f64,
    pub accepted: usize,
}

/// Improvement below this is treated as rounding noise.
fn threshold(total: f64) -> f64 {
    1e-9 + 1e-12 * total
}

pub fn tonal_optimize_trial<M: LocalModel>(
    model: &mut M,
    levels: &[u16],
    quant: Quantizer,
    truth: &GrayImage,
    config: TrialConfig,
) -> Result<TrialOutcome> {
    if levels.is_empty() {
        return Err(Error::EmptyMask);
    }
    if let Some(&l) = levels.iter().find(|&&l| l as usize >= quant.levels()) {
        return Err(Error::SymbolOutOfRange {
            symbol: l as usize,
            alphabet: quant.levels(),
        });
    }
    let n = levels.len();
    let q = quant.levels() as i32;
    let mut levels = levels.to_vec();
    let mut values: Vec<f64> = levels.iter().map(|&l| quant.dequantize(l)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::new();
    let mut accepted = 0;
    let w = truth.width();

    let mut recon = model.reconstruct(&values);
    for _ in 0..config.sweeps {
        let mut tracker = ErrorTracker::new(w, truth.as_slice(), recon, &values);
        let start = tracker.total();
        if history.is_empty() {
            history.push(tracker.mse());
        }
        let snapshot = (levels.clone(), values.clone(), accepted, history.len());
        order.shuffle(&mut rng);
        let mut moved_any = false;
        for &k in &order {
            for dir in [1i32, -1] {
                let mut moved = false;
                loop {
                    let cand = levels[k] as i32 + dir;
                    if cand < 0 || cand >= q {
                        break;
                    }
                    let value = quant.dequantize(cand as u16);
                    let patch = model.propose(&values, k, value);
                    let shift = value - values[k];
                    let delta = tracker.delta(patch.rect, &patch.pixels, shift);
                    if delta >= -threshold(tracker.total()) {
                        break;
                    }
                    tracker.apply(patch.rect, &patch.pixels, shift, delta);
                    model.commit(patch.update);
                    levels[k] = cand as u16;
                    values[k] = value;
                    history.push(tracker.mse());
                    accepted += 1;
                    moved = true;
                }
                if moved {
                    moved_any = true;
                    break;
                }
            }
        }
        recon = model.reconstruct(&values);
        if !model.is_exact() {
            let fresh = ErrorTracker::new(w, truth.as_slice(), recon.clone(), &values);
            if fresh.total() > start {
                let (l, v, a, h) = snapshot;
                levels = l;
                values = v;
                accepted = a;
                history.truncate(h);
                recon = model.reconstruct(&values);
                break;
            }
            // patch estimates are not exact: keep only the verified value
            history.truncate(snapshot.3);
            history.push(fresh.mse());
        }
        if !moved_any {
            break;
        }
    }
    let mse = ErrorTracker::new(w, truth.as_slice(), recon, &values).mse();
    Ok(TrialOutcome {
        levels,
        history,
        mse,
        accepted,
    })
}
