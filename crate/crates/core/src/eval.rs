//! Experiment harness: rate-distortion sweeps, the disk comparison and the
//! cost scaling study.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use crate::codec::rjip::{
    rjip_a_encode_fixed, rjip_encode_fixed, search_params_with, RjipAConfig, RjipMode, RATIO_TOLERANCE,
};
use crate::codec::tree::{subdivide_for_ratio, TreeConfig, TreeMode};
use crate::codec::{compression_ratio, decode, CodecId, Encoded};
use crate::error::{Error, Result};
use crate::homdiff::hom_encode_fixed;
use crate::image::{make_disk, DiskShape, GrayImage};
use crate::mask::make_regular_mask;
use crate::metrics::{mse, ssim};
use crate::ops;
use crate::tonal::{tonal_optimize_iso, Quantizer, TonalState, TrialConfig};

pub const CSV_HEADER: [&str; 9] = [
    "codec",
    "target_ratio",
    "achieved_ratio",
    "mse",
    "ssim",
    "encode_s",
    "decode_s",
    "op_count",
    "feasible",
];

/// Full encodings a tree codec may spend aiming at a ratio.
pub const TREE_FULL_ENCODES: usize = 4;

impl FromStr for CodecId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "rjip" => CodecId::Rjip,
            "rjip-a" => CodecId::RjipA,
            "tree-iso" => CodecId::TreeIso,
            "tree-aniso" => CodecId::TreeAniso,
            _ => return Err(Error::InvalidParameter(format!("unknown codec {s:?}"))),
        })
    }
}

/// Encode `image` with `codec`, choosing parameters so that the ratio lands
/// near `target`. Returns the encoding and whether it reached
/// `RATIO_TOLERANCE × target`.
pub fn encode_for_ratio(image: &GrayImage, codec: CodecId, target: f64, seed: u64) -> Result<(Encoded, bool)> {
    encode_for_ratio_with(image, codec, target, seed, &TreeConfig::default())
}

/// Like [`encode_for_ratio`], but the tree codecs start from `tree` (its `q`,
/// threshold schedule and alternation count). The seed always overrides `tree.seed`.
pub fn encode_for_ratio_with(
    image: &GrayImage,
    codec: CodecId,
    target: f64,
    seed: u64,
    tree: &TreeConfig,
) -> Result<(Encoded, bool)> {
    match codec {
        CodecId::Rjip | CodecId::RjipA => {
            let mode = if codec == CodecId::Rjip {
                RjipMode::Isotropic
            } else {
                RjipMode::Anisotropic
            };
            let cfg = RjipAConfig {
                seed,
                ..RjipAConfig::default()
            };
            let out = search_params_with(image, target, mode, &cfg)?;
            Ok((out.encoded, out.feasible))
        }
        CodecId::TreeIso | CodecId::TreeAniso => {
            let mode = if codec == CodecId::TreeIso {
                TreeMode::Isotropic
            } else {
                TreeMode::Anisotropic
            };
            let cfg = TreeConfig { seed, ..*tree };
            let (enc, _) = subdivide_for_ratio(image, target, mode, &cfg, TREE_FULL_ENCODES)?;
            let feasible = enc.encoded.ratio() >= RATIO_TOLERANCE * target;
            Ok((enc.encoded, feasible))
        }
    }
}

/// One point of a rate-distortion curve.
#[derive(Clone, Debug, PartialEq)]
pub struct RdPoint {
    pub codec: CodecId,
    pub target_ratio: f64,
    /// Recomputed from the file size.
    pub achieved_ratio: f64,
    pub file_bytes: usize,
    /// Of the decoded image, not the encoder's copy.
    pub mse: f64,
    pub ssim: f64,
    pub encode_s: f64,
    pub decode_s: f64,
    pub op_count: u64,
    pub feasible: bool,
}

/// Encode and decode once per target; rows come back in target order.
pub fn rd_sweep(image: &GrayImage, codec: CodecId, targets: &[f64], seed: u64) -> Result<Vec<RdPoint>> {
    rd_sweep_with(image, codec, targets, seed, &TreeConfig::default())
}

/// [`rd_sweep`] with explicit settings for the tree codecs.
pub fn rd_sweep_with(
    image: &GrayImage,
    codec: CodecId,
    targets: &[f64],
    seed: u64,
    tree: &TreeConfig,
) -> Result<Vec<RdPoint>> {
    if targets.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParameter("targets must be sorted ascending".into()));
    }
    targets
        .iter()
        .map(|&t| rd_point_with(image, codec, t, seed, tree))
        .collect()
}

pub fn rd_point(image: &GrayImage, codec: CodecId, target: f64, seed: u64) -> Result<RdPoint> {
    rd_point_with(image, codec, target, seed, &TreeConfig::default())
}

pub fn rd_point_with(image: &GrayImage, codec: CodecId, target: f64, seed: u64, tree: &TreeConfig) -> Result<RdPoint> {
    let start = Instant::now();
    let (result, op_count) = ops::measure(|| encode_for_ratio_with(image, codec, target, seed, tree));
    let (encoded, feasible) = result?;
    let encode_s = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let decoded = decode(&encoded.bytes)?;
    let decode_s = start.elapsed().as_secs_f64();
    Ok(RdPoint {
        codec,
        target_ratio: target,
        achieved_ratio: compression_ratio(image.width(), image.height(), encoded.bytes.len()),
        file_bytes: encoded.bytes.len(),
        mse: mse(image, &decoded)?,
        ssim: ssim(image, &decoded)?,
        encode_s,
        decode_s,
        op_count,
        feasible,
    })
}

/// Write rows under [`CSV_HEADER`]. With `timings` off both time columns
/// are written as 0, which makes the output byte-stable for a fixed seed.
pub fn write_rd_csv<W: Write>(out: W, points: &[RdPoint], timings: bool) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let io = |e: csv::Error| Error::Io(e.into());
    w.write_record(CSV_HEADER).map_err(io)?;
    for p in points {
        let t = |s: f64| if timings { format!("{s:.6}") } else { "0".to_string() };
        w.write_record([
            p.codec.name().to_string(),
            format!("{}", p.target_ratio),
            format!("{:.4}", p.achieved_ratio),
            format!("{:.4}", p.mse),
            format!("{:.6}", p.ssim),
            t(p.encode_s),
            t(p.decode_s),
            p.op_count.to_string(),
            p.feasible.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Settings for the disk comparison.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiskConfig {
    pub disk: DiskShape,
    pub grid: usize,
    pub iso_sweeps: usize,
    pub hom_sweeps: usize,
    pub aniso: RjipAConfig,
}

impl Default for DiskConfig {
    fn default() -> Self {
        DiskConfig {
            disk: DiskShape {
                size: 400,
                radius: 100.0,
                inside: 0.0,
                outside: 255.0,
            },
            grid: 3,
            iso_sweeps: 5,
            hom_sweeps: 3,
            aniso: RjipAConfig {
                alternations: 2,
                sweeps: 2,
                ..RjipAConfig::default()
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MethodResult {
    pub mse_before: f64,
    pub mse: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiskReport {
    pub iso: MethodResult,
    pub aniso: MethodResult,
    pub hom: MethodResult,
    pub aniso_lambda: f64,
    pub aniso_sigma_scale: f64,
    pub mask_density: f64,
}

impl fmt::Display for DiskReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "mask density {:.4}", self.mask_density)?;
        for (name, m) in [
            ("isotropic", &self.iso),
            ("anisotropic", &self.aniso),
            ("homogeneous", &self.hom),
        ] {
            writeln!(
                f,
                "{name:<12} mse {:>8.3} -> {:>8.3}  ({:.2} s)",
                m.mse_before, m.mse, m.seconds
            )?;
        }
        write!(
            f,
            "anisotropic lambda {:.3} sigma scale {:.3}",
            self.aniso_lambda, self.aniso_sigma_scale
        )
    }
}

/// Isotropic Shepard with closed-form tonal optimisation, anisotropic
/// Shepard with searched kernel parameters and trial optimisation, and
/// homogeneous diffusion with trial optimisation, all on the same grid mask
/// with 256 levels.
pub fn disk_experiment(config: &DiskConfig) -> Result<DiskReport> {
    let image = make_disk(&config.disk)?;
    let mask = make_regular_mask(image.width(), image.height(), config.grid)?;
    let quant = Quantizer::new(256)?;

    let start = Instant::now();
    let mut state = TonalState::from_image(mask.clone(), image.clone(), quant)?;
    let before = state.mse();
    tonal_optimize_iso(&mut state, config.iso_sweeps);
    let iso = MethodResult {
        mse_before: before,
        mse: state.mse(),
        seconds: start.elapsed().as_secs_f64(),
    };

    let start = Instant::now();
    let plain = rjip_a_encode_fixed(
        &image,
        config.grid,
        256,
        &RjipAConfig {
            alternations: 0,
            optimise_params: false,
            ..config.aniso
        },
    )?;
    let enc = rjip_a_encode_fixed(&image, config.grid, 256, &config.aniso)?;
    let crate::codec::Body::RjipA {
        lambda, sigma_scale, ..
    } = enc.file.body
    else {
        unreachable!("anisotropic encoder writes an anisotropic body");
    };
    let aniso = MethodResult {
        mse_before: plain.mse,
        mse: enc.mse,
        seconds: start.elapsed().as_secs_f64(),
    };

    let start = Instant::now();
    let hom_plain = hom_encode_fixed(&image, config.grid, 256, TrialConfig { sweeps: 0, seed: 0 }, true)?;
    let hom_enc = hom_encode_fixed(
        &image,
        config.grid,
        256,
        TrialConfig {
            sweeps: config.hom_sweeps,
            seed: config.aniso.seed,
        },
        true,
    )?;
    let hom = MethodResult {
        mse_before: hom_plain.mse,
        mse: hom_enc.mse,
        seconds: start.elapsed().as_secs_f64(),
    };

    Ok(DiskReport {
        iso,
        aniso,
        hom,
        aniso_lambda: crate::codec::container::from_fixed8(lambda),
        aniso_sigma_scale: crate::codec::container::from_fixed8(sigma_scale),
        mask_density: mask.density(),
    })
}

/// Methods compared in the scaling study.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ScaleMethod {
    Rjip,
    RjipA,
    Hom,
}

impl ScaleMethod {
    pub const ALL: [ScaleMethod; 3] = [ScaleMethod::Rjip, ScaleMethod::RjipA, ScaleMethod::Hom];

    pub fn name(self) -> &'static str {
        match self {
            ScaleMethod::Rjip => "rjip",
            ScaleMethod::RjipA => "rjip-a",
            ScaleMethod::Hom => "hom",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScaleRow {
    pub method: ScaleMethod,
    pub width: usize,
    pub height: usize,
    pub seconds: f64,
    pub op_count: u64,
}

impl ScaleRow {
    pub fn pixels(&self) -> usize {
        self.width * self.height
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingReport {
    /// Largest scale first, per method in [`ScaleMethod::ALL`] order.
    pub rows: Vec<ScaleRow>,
}

/// Grid spacing and levels of the scaling study.
pub const SCALE_R: usize = 4;
pub const SCALE_Q: usize = 32;
/// Trial sweeps of the homogeneous diffusion codec in the scaling study.
pub const HOM_SCALE_SWEEPS: usize = 1;

impl ScalingReport {
    pub fn rows_for(&self, method: ScaleMethod) -> impl Iterator<Item = &ScaleRow> {
        self.rows.iter().filter(move |r| r.method == method)
    }

    /// Least-squares slope of `ln op_count` against `ln pixels`.
    pub fn op_slope(&self, method: ScaleMethod) -> f64 {
        let pts: Vec<(f64, f64)> = self
            .rows_for(method)
            .map(|r| ((r.pixels() as f64).ln(), (r.op_count.max(1) as f64).ln()))
            .collect();
        fit_slope(&pts)
    }

    pub fn time_slope(&self, method: ScaleMethod) -> f64 {
        let pts: Vec<(f64, f64)> = self
            .rows_for(method)
            .map(|r| ((r.pixels() as f64).ln(), r.seconds.max(1e-9).ln()))
            .collect();
        fit_slope(&pts)
    }

    /// The row of `method` at the largest scale.
    pub fn largest(&self, method: ScaleMethod) -> Option<&ScaleRow> {
        self.rows_for(method).max_by_key(|r| r.pixels())
    }

    pub fn write_csv<W: Write>(&self, out: W, timings: bool) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let io = |e: csv::Error| Error::Io(e.into());
        w.write_record(["method", "width", "height", "pixels", "seconds", "op_count"])
            .map_err(io)?;
        for r in &self.rows {
            w.write_record([
                r.method.name().to_string(),
                r.width.to_string(),
                r.height.to_string(),
                r.pixels().to_string(),
                if timings {
                    format!("{:.6}", r.seconds)
                } else {
                    "0".to_string()
                },
                r.op_count.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn fit_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Encode `image` and `levels − 1` successive 2× downsamplings with every
/// method at `r = 4`, `q = 32`, recording wall time and operation counts.
pub fn scaling_study(image: &GrayImage, levels: usize, seed: u64) -> Result<ScalingReport> {
    if levels < 3 {
        return Err(Error::InvalidParameter(format!(
            "scaling study needs at least 3 levels, got {levels}"
        )));
    }
    let mut scales = vec![image.clone()];
    for _ in 1..levels {
        let next = scales.last().expect("non-empty").downsample2();
        if next.width() < 2 * SCALE_R || next.height() < 2 * SCALE_R {
            return Err(Error::InvalidParameter(format!("image too small for {levels} scales")));
        }
        scales.push(next);
    }
    let aniso = RjipAConfig {
        seed,
        ..RjipAConfig::default()
    };
    let mut rows = Vec::new();
    for method in ScaleMethod::ALL {
        for img in &scales {
            let start = Instant::now();
            let (res, op_count) = ops::measure(|| -> Result<()> {
                match method {
                    ScaleMethod::Rjip => {
                        rjip_encode_fixed(img, SCALE_R, SCALE_Q)?;
                    }
                    ScaleMethod::RjipA => {
                        rjip_a_encode_fixed(img, SCALE_R, SCALE_Q, &aniso)?;
                    }
                    ScaleMethod::Hom => {
                        let trial = TrialConfig {
                            sweeps: HOM_SCALE_SWEEPS,
                            seed,
                        };
                        hom_encode_fixed(img, SCALE_R, SCALE_Q, trial, false)?;
                    }
                }
                Ok(())
            });
            res?;
            rows.push(ScaleRow {
                method,
                width: img.width(),
                height: img.height(),
                seconds: start.elapsed().as_secs_f64(),
                op_count,
            });
        }
    }
    Ok(ScalingReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smooth(w: usize, h: usize) -> GrayImage {
        GrayImage::from_fn(w, h, |x, y| {
            128.0 + 70.0 * ((x as f64) / 7.0).sin() * ((y as f64) / 11.0).cos()
        })
    }

    #[test]
    fn codec_names_parse() {
        for c in [CodecId::Rjip, CodecId::RjipA, CodecId::TreeIso, CodecId::TreeAniso] {
            assert_eq!(c.name().parse::<CodecId>().unwrap(), c);
        }
        assert!("jpeg".parse::<CodecId>().is_err());
    }

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [10.0f64, 100.0, 1000.0]
            .iter()
            .map(|&x| (x.ln(), (3.0 * x.powf(1.1)).ln()))
            .collect();
        assert!((fit_slope(&pts) - 1.1).abs() < 1e-12);
    }

    #[test]
    fn rd_rows_are_consistent() {
        let img = smooth(48, 40);
        let pts = rd_sweep(&img, CodecId::Rjip, &[8.0, 8.0, 20.0], 0).unwrap();
        assert_eq!(pts.len(), 3);
        assert_eq!(pts[0].mse, pts[1].mse);
        assert_eq!(pts[0].file_bytes, pts[1].file_bytes);
        for p in &pts {
            assert_eq!(p.achieved_ratio, (48 * 40) as f64 / p.file_bytes as f64);
            assert!(p.op_count > 0);
        }
        assert!(rd_sweep(&img, CodecId::Rjip, &[20.0, 8.0], 0).is_err());
    }

    #[test]
    fn csv_is_stable_without_timings() {
        let img = smooth(40, 40);
        let csv = || {
            let pts = rd_sweep(&img, CodecId::TreeIso, &[10.0], 3).unwrap();
            let mut buf = Vec::new();
            write_rd_csv(&mut buf, &pts, false).unwrap();
            String::from_utf8(buf).unwrap()
        };
        let a = csv();
        assert_eq!(a, csv());
        assert!(a.starts_with("codec,target_ratio,achieved_ratio,mse,ssim,encode_s,decode_s,op_count,feasible\n"));
        assert!(a.lines().nth(1).unwrap().starts_with("tree-iso,10,"));
        assert!(!a.contains('\r'));
    }

    #[test]
    fn scaling_rows_cover_every_method_and_scale() {
        let img = smooth(64, 64);
        let rep = scaling_study(&img, 3, 0).unwrap();
        assert_eq!(rep.rows.len(), 9);
        for m in ScaleMethod::ALL {
            let px: Vec<usize> = rep.rows_for(m).map(|r| r.pixels()).collect();
            assert_eq!(px, vec![4096, 1024, 256]);
        }
        assert!(scaling_study(&img, 2, 0).is_err());
    }
}
