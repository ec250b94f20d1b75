//! Regular-grid codecs.
//!
//! RJIP stores isotropic Shepard data and codes each level as a residual
//! against the prediction of the points already coded. RJIP-A uses
//! anisotropic kernels; its values are coded directly with the adaptive
//! level coder because the kernels depend on all values at once.

use std::collections::HashMap;

use super::container::{from_fixed8, to_fixed8, Body, CodecId, CompressedFile, Header};
use super::search::golden_section;
use super::{check_dimensions, finish, Encoded};
use crate::entropy::{build_table, decode_levels, encode_levels, range_decode, range_encode};
use crate::error::{ContainerError, Error, Result};
use crate::image::GrayImage;
use crate::mask::{make_regular_mask, Mask};
use crate::metrics::mse;
use crate::shepard::aniso::{inpaint_shepard, Diffusivity, KernelMode};
use crate::shepard::iso::{compute_sigma, IsoKernel};
use crate::shepard::local::ShepardModel;
use crate::shepard::{hole_fill, AccumulationMaps};
use crate::tonal::{tonal_optimize_iso, tonal_optimize_trial, Quantizer, TonalState, TrialConfig};

/// Closed-form tonal sweeps run by the RJIP encoder.
pub const RJIP_SWEEPS: usize = 5;

/// Lower and upper ends of the λ and σ-scale searches.
pub const LAMBDA_RANGE: (f64, f64) = (0.5, 200.0);
pub const SIGMA_SCALE_RANGE: (f64, f64) = (0.3, 2.5);

/// Golden-section iterations per search axis.
pub const SEARCH_ITERATIONS: usize = 12;

/// A probe counts as meeting the target if its ratio reaches this fraction.
pub const RATIO_TOLERANCE: f64 = 0.95;

/// Probes of the anisotropic search that get a full encoding.
pub const ANISO_FINALISTS: usize = 3;

fn check_grid(r: usize) -> Result<()> {
    if !(1..=255).contains(&r) {
        return Err(Error::InvalidParameter(format!("grid spacing {r} outside [1, 255]")));
    }
    Ok(())
}

/// Replay the joint inpainting and prediction pass in canonical order.
///
/// Before point `i` is added, `observe(i, maps)` sees the maps and
/// `level_for(i, prediction)` supplies the point's level. The prediction is
/// the quantised ratio `v/w` at the point, or level 0 where nothing has been
/// accumulated yet.
pub fn rjip_traverse(
    mask: &Mask,
    quant: Quantizer,
    kernel: &IsoKernel,
    mut level_for: impl FnMut(usize, u16) -> Result<u16>,
    mut observe: impl FnMut(usize, &AccumulationMaps),
) -> Result<(Vec<u16>, AccumulationMaps)> {
    let mut maps = AccumulationMaps::new(mask.width(), mask.height());
    let mut levels = Vec::with_capacity(mask.len());
    for (i, &p) in mask.positions().iter().enumerate() {
        observe(i, &maps);
        let pred = maps.ratio_at(p.x, p.y).map_or(0, |u| quant.quantize(u));
        let level = level_for(i, pred)?;
        maps.splat(p, quant.dequantize(level), kernel);
        levels.push(level);
    }
    Ok((levels, maps))
}

/// `(p − ℓ) mod q`.
#[inline]
pub fn residual(prediction: u16, level: u16, q: usize) -> usize {
    (prediction as usize + q - level as usize) % q
}

/// `(p − e) mod q`, the inverse of [`residual`].
#[inline]
pub fn unresidual(prediction: u16, residual: usize, q: usize) -> u16 {
    ((prediction as usize + q - residual % q) % q) as u16
}

fn rjip_image(mask: &Mask, quant: Quantizer, levels: &[u16], maps: &AccumulationMaps) -> Result<GrayImage> {
    let values: Vec<f64> = levels.iter().map(|&l| quant.dequantize(l)).collect();
    let data = maps.normalized(hole_fill(&values));
    Ok(GrayImage::from_vec(mask.width(), mask.height(), data)?
        .clamped()
        .rounded())
}

/// RJIP with fixed grid spacing `r` and `q` levels.
pub fn rjip_encode_fixed(image: &GrayImage, r: usize, q: usize) -> Result<Encoded> {
    rjip_encode_with(image, r, q, RJIP_SWEEPS)
}

pub fn rjip_encode_with(image: &GrayImage, r: usize, q: usize, sweeps: usize) -> Result<Encoded> {
    check_dimensions(image)?;
    check_grid(r)?;
    let quant = Quantizer::new(q)?;
    let mask = make_regular_mask(image.width(), image.height(), r)?;
    let mut state = TonalState::from_image(mask.clone(), image.clone(), quant)?;
    tonal_optimize_iso(&mut state, sweeps);
    let kernel = state.kernel().clone();
    let target = state.into_levels();

    let mut residuals = Vec::with_capacity(target.len());
    let (levels, maps) = rjip_traverse(
        &mask,
        quant,
        &kernel,
        |i, pred| {
            residuals.push(residual(pred, target[i], q));
            Ok(target[i])
        },
        |_, _| {},
    )?;
    let table = build_table(&residuals, q)?;
    let payload = range_encode(&residuals, &table)?;
    let file = CompressedFile {
        header: Header {
            codec: CodecId::Rjip,
            width: image.width() as u16,
            height: image.height() as u16,
            q: q as u16,
        },
        body: Body::Rjip {
            r: r as u8,
            table,
            payload,
        },
    };
    let recon = rjip_image(&mask, quant, &levels, &maps)?;
    finish(image, file, recon)
}

pub(crate) fn rjip_decode_parts(header: &Header, body: &Body) -> Result<GrayImage> {
    let Body::Rjip { r, table, payload } = body else {
        unreachable!("dispatched on codec id");
    };
    let (w, h, q) = (header.width as usize, header.height as usize, header.q as usize);
    let quant = Quantizer::new(q)?;
    let mask = make_regular_mask(w, h, *r as usize)?;
    let kernel = IsoKernel::new(compute_sigma(mask.len(), w, h)?);
    let residuals = range_decode(payload, mask.len(), table)?;
    let (levels, maps) = rjip_traverse(
        &mask,
        quant,
        &kernel,
        |i, pred| Ok(unresidual(pred, residuals[i], q)),
        |_, _| {},
    )?;
    rjip_image(&mask, quant, &levels, &maps)
}

/// Settings for the RJIP-A encoder.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RjipAConfig {
    /// Initial (or fixed) contrast parameter.
    pub lambda: f64,
    /// Initial (or fixed) multiple of the adaptive global σ.
    pub sigma_scale: f64,
    /// Rounds of parameter search followed by tonal optimisation.
    pub alternations: usize,
    /// Trial sweeps per round.
    pub sweeps: usize,
    /// Search λ and σ-scale in every round.
    pub optimise_params: bool,
    pub seed: u64,
}

impl Default for RjipAConfig {
    fn default() -> Self {
        RjipAConfig {
            lambda: 8.0,
            sigma_scale: 1.25,
            alternations: 3,
            sweeps: 1,
            optimise_params: true,
            seed: 0,
        }
    }
}

impl RjipAConfig {
    /// Fixed parameters and no tonal optimisation: a cheap size estimate.
    pub fn lite() -> Self {
        RjipAConfig {
            alternations: 0,
            optimise_params: false,
            ..Self::default()
        }
    }
}

fn aniso_reconstruction(mask: &Mask, values: &[f64], lambda: f64, sigma_scale: f64) -> Result<GrayImage> {
    let s = compute_sigma(mask.len(), mask.width(), mask.height())? * sigma_scale;
    inpaint_shepard(
        mask,
        values,
        &vec![s; mask.len()],
        KernelMode::Anisotropic(Diffusivity::PeronaMalik { lambda }),
    )
}

/// Snap to the 8.8 fixed-point grid used in the file.
fn snap8(x: f64) -> f64 {
    from_fixed8(to_fixed8(x))
}

/// Golden-section search of λ (in log space) and then σ-scale for the
/// current values.
pub(crate) fn search_kernel_params(
    image: &GrayImage,
    mask: &Mask,
    values: &[f64],
    lambda: f64,
    sigma_scale: f64,
) -> Result<(f64, f64)> {
    let eval = |l: f64, s: f64| -> f64 {
        aniso_reconstruction(mask, values, l, s)
            .and_then(|u| mse(image, &u))
            .unwrap_or(f64::INFINITY)
    };
    let (lo, hi) = (LAMBDA_RANGE.0.ln(), LAMBDA_RANGE.1.ln());
    let (t, el) = golden_section(lo, hi, SEARCH_ITERATIONS, |t| eval(snap8(t.exp()), sigma_scale));
    let lambda = if el <= eval(lambda, sigma_scale) {
        snap8(t.exp())
    } else {
        lambda
    };
    let (s, es) = golden_section(SIGMA_SCALE_RANGE.0, SIGMA_SCALE_RANGE.1, SEARCH_ITERATIONS, |s| {
        eval(lambda, snap8(s))
    });
    let sigma_scale = if es <= eval(lambda, sigma_scale) {
        snap8(s)
    } else {
        sigma_scale
    };
    Ok((lambda, sigma_scale))
}

pub fn rjip_a_encode_fixed(image: &GrayImage, r: usize, q: usize, config: &RjipAConfig) -> Result<Encoded> {
    check_dimensions(image)?;
    check_grid(r)?;
    let quant = Quantizer::new(q)?;
    let mask = make_regular_mask(image.width(), image.height(), r)?;
    let s0 = compute_sigma(mask.len(), mask.width(), mask.height())?;
    let mut levels: Vec<u16> = mask.sample(image)?.iter().map(|&f| quant.quantize(f)).collect();
    let mut lambda = snap8(config.lambda);
    let mut sigma_scale = snap8(config.sigma_scale);
    for round in 0..config.alternations {
        if config.optimise_params {
            let values: Vec<f64> = levels.iter().map(|&l| quant.dequantize(l)).collect();
            (lambda, sigma_scale) = search_kernel_params(image, &mask, &values, lambda, sigma_scale)?;
        }
        let mut model = ShepardModel::new(
            mask.clone(),
            vec![s0 * sigma_scale; mask.len()],
            KernelMode::Anisotropic(Diffusivity::PeronaMalik { lambda }),
        )?;
        let trial = TrialConfig {
            sweeps: config.sweeps,
            seed: config.seed.wrapping_add(round as u64),
        };
        levels = tonal_optimize_trial(&mut model, &levels, quant, image, trial)?.levels;
    }
    let payload = encode_levels(&levels, quant.bits())?;
    let file = CompressedFile {
        header: Header {
            codec: CodecId::RjipA,
            width: image.width() as u16,
            height: image.height() as u16,
            q: q as u16,
        },
        body: Body::RjipA {
            r: r as u8,
            lambda: to_fixed8(lambda),
            sigma_scale: to_fixed8(sigma_scale),
            payload,
        },
    };
    let recon = rjip_a_decode_parts(&file.header, &file.body)?;
    finish(image, file, recon)
}

pub(crate) fn rjip_a_decode_parts(header: &Header, body: &Body) -> Result<GrayImage> {
    let Body::RjipA {
        r,
        lambda,
        sigma_scale,
        payload,
    } = body
    else {
        unreachable!("dispatched on codec id");
    };
    let (w, h) = (header.width as usize, header.height as usize);
    let quant = Quantizer::new(header.q as usize)?;
    let mask = make_regular_mask(w, h, *r as usize)?;
    let levels = decode_levels(payload, mask.len(), quant.bits())?;
    if levels.iter().any(|&l| l as usize >= quant.levels()) {
        return Err(ContainerError::Invalid("level outside the quantiser range".into()).into());
    }
    let values: Vec<f64> = levels.iter().map(|&l| quant.dequantize(l)).collect();
    Ok(aniso_reconstruction(&mask, &values, from_fixed8(*lambda), from_fixed8(*sigma_scale))?.rounded())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RjipMode {
    Isotropic,
    Anisotropic,
}

/// Chosen parameters and the corresponding encoding.
#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub r: usize,
    pub q: usize,
    pub encoded: Encoded,
    /// Whether the final ratio reaches [`RATIO_TOLERANCE`] × target.
    pub feasible: bool,
    /// Distinct `(r, q)` pairs evaluated.
    pub probes: usize,
}

fn objective(ratio: f64, mse: f64, target: f64) -> f64 {
    let need = RATIO_TOLERANCE * target;
    if ratio >= need {
        mse
    } else {
        INFEASIBLE * need / ratio
    }
}

/// Objective floor for encodings below the target ratio; any MSE on 8-bit
/// data stays below it.
const INFEASIBLE: f64 = 1e6;

/// Golden-section search over `r` (outer) and `q` (inner) for the lowest
/// MSE whose ratio meets the target. Anisotropic probes use fixed kernel
/// parameters without tonal optimisation; only the winner is encoded in full.
pub fn search_params(image: &GrayImage, target_ratio: f64, mode: RjipMode) -> Result<SearchOutcome> {
    search_params_with(image, target_ratio, mode, &RjipAConfig::default())
}

pub fn search_params_with(
    image: &GrayImage,
    target_ratio: f64,
    mode: RjipMode,
    aniso: &RjipAConfig,
) -> Result<SearchOutcome> {
    check_dimensions(image)?;
    if !(target_ratio > 1.0) {
        return Err(Error::InvalidParameter(format!(
            "target ratio {target_ratio} must exceed 1"
        )));
    }
    let encode = |r: usize, q: usize, full: bool| -> Result<Encoded> {
        match mode {
            RjipMode::Isotropic => rjip_encode_fixed(image, r, q),
            RjipMode::Anisotropic if full => rjip_a_encode_fixed(image, r, q, aniso),
            RjipMode::Anisotropic => {
                let lite = RjipAConfig {
                    alternations: 0,
                    optimise_params: false,
                    ..*aniso
                };
                rjip_a_encode_fixed(image, r, q, &lite)
            }
        }
    };
    let mut memo: HashMap<(usize, usize), f64> = HashMap::new();
    let mut failure: Option<Error> = None;
    let mut probe = |r: usize, q: usize| -> f64 {
        if let Some(&v) = memo.get(&(r, q)) {
            return v;
        }
        let v = match encode(r, q, false) {
            Ok(e) => objective(e.ratio(), e.mse, target_ratio),
            Err(e) => {
                failure.get_or_insert(e);
                f64::INFINITY
            }
        };
        memo.insert((r, q), v);
        v
    };
    let r_hi = image.width().max(image.height()).clamp(2, 255);
    // the ratio grows with r for every q, so the feasible band of spacings
    // starts where q = 2 first meets the target, and past the point where
    // q = 256 meets it a wider spacing only loses quality
    let mut smallest_feasible = |q: usize| -> usize {
        let (mut lo, mut hi) = (1usize, r_hi);
        if probe(hi, q) >= INFEASIBLE {
            return hi;
        }
        while lo < hi {
            let mid = (lo + hi) / 2;
            if probe(mid, q) < INFEASIBLE {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        lo
    };
    let r_lo = smallest_feasible(2);
    let r_up = smallest_feasible(256).max(r_lo + 1);
    golden_section(r_lo as f64, r_up as f64, SEARCH_ITERATIONS, |r| {
        let r = (r.round() as usize).max(1);
        golden_section(2.0, 256.0, SEARCH_ITERATIONS, |q| probe(r, q.round() as usize)).1
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let probes = memo.len();
    let need = RATIO_TOLERANCE * target_ratio;
    let mut ranked: Vec<((usize, usize), f64)> = memo.into_iter().collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    if mode == RjipMode::Isotropic {
        let (r, q) = ranked[0].0;
        let encoded = encode(r, q, true)?;
        return Ok(SearchOutcome {
            r,
            q,
            feasible: encoded.ratio() >= need,
            encoded,
            probes,
        });
    }
    // probes skip tonal optimisation, which changes the coded size, so the
    // best few probes are encoded in full and compared again
    let mut best: Option<(usize, usize, Encoded)> = None;
    for &((r0, q0), _) in ranked.iter().take(ANISO_FINALISTS) {
        let (mut r, mut q) = (r0, q0);
        let mut encoded = encode(r, q, true)?;
        while encoded.ratio() < need && (q > 2 || r < r_hi) {
            if q > 2 {
                q = (q * 7 / 8).max(2);
            } else {
                r += 1;
            }
            encoded = encode(r, q, true)?;
        }
        let better = match &best {
            None => true,
            Some((_, _, b)) => {
                let (ok, b_ok) = (encoded.ratio() >= need, b.ratio() >= need);
                match (ok, b_ok) {
                    (true, true) => encoded.mse < b.mse,
                    (true, false) => true,
                    (false, true) => false,
                    (false, false) => encoded.ratio() > b.ratio(),
                }
            }
        };
        if better {
            best = Some((r, q, encoded));
        }
    }
    let (r, q, encoded) = best.expect("at least one finalist");
    Ok(SearchOutcome {
        r,
        q,
        feasible: encoded.ratio() >= need,
        encoded,
        probes,
    })
}
