//! Subdivision-tree codecs.
//!
//! The image is split into rectangles wherever the reconstruction error of a
//! block is too high; the corners of all leaf rectangles form the mask. Each
//! point's kernel width follows the area of its Voronoi cell, so sparse
//! regions get wide kernels and refined regions narrow ones.

use std::collections::HashMap;

use super::container::{from_fixed12, from_fixed8, to_fixed12, to_fixed8, Body, CodecId, CompressedFile, Header};
use super::rjip::{LAMBDA_RANGE, SEARCH_ITERATIONS};
use super::search::golden_section;
use super::{check_dimensions, finish, Encoded};
use crate::entropy::{decode_levels, encode_levels};
use crate::error::{ContainerError, Error, Result};
use crate::image::GrayImage;
use crate::mask::{Mask, Point, Rect};
use crate::metrics::mse;
use crate::shepard::aniso::{inpaint_shepard, Diffusivity, KernelMode};
use crate::shepard::local::ShepardModel;
use crate::shepard::voronoi::{sigma_from_area, voronoi_areas};
use crate::tonal::{tonal_optimize_trial, Quantizer, TrialConfig};

/// Search interval of the Voronoi exponent.
pub const P_RANGE: (f64, f64) = (0.2, 2.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Node {
    rect: Rect,
    children: Option<[usize; 2]>,
}

/// Binary tree of inclusive rectangles. Children of a split node share the
/// split line.
#[derive(Clone, Debug)]
pub struct SubdivisionTree {
    width: usize,
    height: usize,
    nodes: Vec<Node>,
}

/// Whether a rectangle may still be split (both sides longer than 2).
pub fn can_split(rect: &Rect) -> bool {
    rect.width().min(rect.height()) > 2
}

/// Halves of `rect` along its longer side; equal sides split left/right.
pub fn split_rect(rect: &Rect) -> Option<(Rect, Rect)> {
    if !can_split(rect) {
        return None;
    }
    Some(if rect.width() >= rect.height() {
        let m = (rect.x0 + rect.x1) / 2;
        (Rect { x1: m, ..*rect }, Rect { x0: m, ..*rect })
    } else {
        let m = (rect.y0 + rect.y1) / 2;
        (Rect { y1: m, ..*rect }, Rect { y0: m, ..*rect })
    })
}

impl SubdivisionTree {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter("empty image".into()));
        }
        Ok(SubdivisionTree {
            width,
            height,
            nodes: vec![Node {
                rect: Rect::full(width, height),
                children: None,
            }],
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn rect(&self, node: usize) -> Rect {
        self.nodes[node].rect
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        self.nodes[node].children.is_none()
    }

    /// Split a leaf; returns its two children.
    pub fn split(&mut self, node: usize) -> Result<[usize; 2]> {
        if !self.is_leaf(node) {
            return Err(Error::InvalidParameter(format!("node {node} is already split")));
        }
        let (a, b) = split_rect(&self.nodes[node].rect)
            .ok_or_else(|| Error::InvalidParameter(format!("node {node} is too small to split")))?;
        let ids = [self.nodes.len(), self.nodes.len() + 1];
        self.nodes.push(Node {
            rect: a,
            children: None,
        });
        self.nodes.push(Node {
            rect: b,
            children: None,
        });
        self.nodes[node].children = Some(ids);
        Ok(ids)
    }

    /// Node ids in depth-first preorder (first child first).
    pub fn preorder(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![0];
        while let Some(n) = stack.pop() {
            out.push(n);
            if let Some([a, b]) = self.nodes[n].children {
                stack.push(b);
                stack.push(a);
            }
        }
        out
    }

    /// Leaf ids in preorder.
    pub fn leaves(&self) -> Vec<usize> {
        self.preorder().into_iter().filter(|&n| self.is_leaf(n)).collect()
    }

    pub fn leaf_rects(&self) -> Vec<Rect> {
        self.leaves().into_iter().map(|n| self.nodes[n].rect).collect()
    }

    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((n, d)) = stack.pop() {
            best = best.max(d);
            if let Some([a, b]) = self.nodes[n].children {
                stack.push((a, d + 1));
                stack.push((b, d + 1));
            }
        }
        best
    }
}

impl PartialEq for SubdivisionTree {
    fn eq(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height && serialize_tree(self) == serialize_tree(other)
    }
}

impl Eq for SubdivisionTree {}

/// Preorder split flags: `true` for a split node, `false` for a leaf.
pub fn serialize_tree(tree: &SubdivisionTree) -> Vec<bool> {
    tree.preorder().into_iter().map(|n| !tree.is_leaf(n)).collect()
}

pub fn deserialize_tree(bits: &[bool], width: usize, height: usize) -> Result<SubdivisionTree> {
    let mut tree = SubdivisionTree::new(width, height)?;
    let mut pos = 0;
    let mut stack = vec![0usize];
    while let Some(n) = stack.pop() {
        let Some(&split) = bits.get(pos) else {
            return Err(ContainerError::MalformedTree("bit stream ended early".into()).into());
        };
        pos += 1;
        if split {
            let [a, b] = tree.split(n).map_err(|_| {
                ContainerError::MalformedTree(format!("split of unsplittable block at bit {}", pos - 1))
            })?;
            stack.push(b);
            stack.push(a);
        }
    }
    if pos != bits.len() {
        return Err(ContainerError::MalformedTree(format!("{} trailing bits", bits.len() - pos)).into());
    }
    Ok(tree)
}

/// Corners of every leaf, deduplicated, in raster order.
pub fn leaf_corners(tree: &SubdivisionTree) -> Mask {
    let mut pts = Vec::with_capacity(4 * tree.node_count());
    for r in tree.leaf_rects() {
        pts.extend([
            Point::new(r.x0, r.y0),
            Point::new(r.x1, r.y0),
            Point::new(r.x0, r.y1),
            Point::new(r.x1, r.y1),
        ]);
    }
    Mask::new(tree.width, tree.height, pts).expect("corners are in bounds")
}

/// Quantisation error `E(q)` of the whole image.
pub fn quantization_error(image: &GrayImage, q: usize) -> f64 {
    let quant = Quantizer::new(q).expect("q in range");
    let s: f64 = image.as_slice().iter().map(|&f| (f - quant.project(f)).powi(2)).sum();
    s / image.len() as f64
}

/// Smallest `q` at which the error curve flattens out:
/// `|E(q) − E(q + 1)| < 1`; 256 if that never happens. The curve is not
/// monotone, so an increase of the error does not count as flat.
pub fn select_q(image: &GrayImage) -> usize {
    let mut prev = quantization_error(image, 2);
    for q in 2..256 {
        let next = quantization_error(image, q + 1);
        if (prev - next).abs() < 1.0 {
            return q;
        }
        prev = next;
    }
    256
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TreeMode {
    Isotropic,
    Anisotropic,
}

impl TreeMode {
    fn codec(self) -> CodecId {
        match self {
            TreeMode::Isotropic => CodecId::TreeIso,
            TreeMode::Anisotropic => CodecId::TreeAniso,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TreeConfig {
    /// Quantisation levels; chosen from the error curve when `None`.
    pub q: Option<usize>,
    /// Parameter and tonal optimisation rounds per refinement step.
    pub iter_max: usize,
    /// Trial sweeps per round.
    pub sweeps: usize,
    pub p: f64,
    pub lambda: f64,
    pub optimise_params: bool,
    pub seed: u64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            q: None,
            iter_max: 3,
            sweeps: 1,
            p: 1.0,
            lambda: 8.0,
            optimise_params: true,
            seed: 0,
        }
    }
}

/// Result of a subdivision encoding with the final tree and block errors.
#[derive(Clone, Debug)]
pub struct TreeEncoding {
    pub encoded: Encoded,
    pub tree: SubdivisionTree,
    pub mask: Mask,
    pub q: usize,
    pub p: f64,
    pub lambda: Option<f64>,
    /// MSE per leaf (preorder) of the encoder's final reconstruction.
    pub leaf_errors: Vec<f64>,
    /// Refinement steps run.
    pub steps: usize,
}

fn kernel_mode(mode: TreeMode, lambda: f64) -> KernelMode {
    match mode {
        TreeMode::Isotropic => KernelMode::Isotropic,
        TreeMode::Anisotropic => KernelMode::Anisotropic(Diffusivity::PeronaMalik { lambda }),
    }
}

fn sigmas(areas: &[usize], p: f64) -> Vec<f64> {
    areas.iter().map(|&a| sigma_from_area(a, p)).collect()
}

fn reconstruct(mask: &Mask, areas: &[usize], values: &[f64], p: f64, mode: KernelMode) -> Result<GrayImage> {
    inpaint_shepard(mask, values, &sigmas(areas, p), mode)
}

fn block_mse(image: &GrayImage, recon: &GrayImage, r: &Rect) -> f64 {
    let mut s = 0.0;
    for y in r.y0..=r.y1 {
        for x in r.x0..=r.x1 {
            s += (image.get(x, y) - recon.get(x, y)).powi(2);
        }
    }
    s / r.area() as f64
}

/// Refine the tree until every block error is at most `threshold` (or the
/// block is too small to split), optimising kernels and values at each step.
pub fn subdivide_encode(image: &GrayImage, threshold: f64, mode: TreeMode) -> Result<TreeEncoding> {
    subdivide_encode_with(image, threshold, mode, &TreeConfig::default())
}

pub fn subdivide_encode_with(
    image: &GrayImage,
    threshold: f64,
    mode: TreeMode,
    config: &TreeConfig,
) -> Result<TreeEncoding> {
    check_dimensions(image)?;
    if !(threshold > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "split threshold {threshold} must be positive"
        )));
    }
    let q = match config.q {
        Some(q) => q,
        None => select_q(image),
    };
    let quant = Quantizer::new(q)?;
    let mut tree = SubdivisionTree::new(image.width(), image.height())?;
    let mut carried: HashMap<Point, u16> = HashMap::new();
    let mut p = from_fixed12(to_fixed12(config.p));
    let mut lambda = from_fixed8(to_fixed8(config.lambda));
    let mut steps = 0;
    loop {
        steps += 1;
        let mask = leaf_corners(&tree);
        let areas = voronoi_areas(&mask);
        let mut levels: Vec<u16> = mask
            .positions()
            .iter()
            .map(|pt| *carried.get(pt).unwrap_or(&quant.quantize(image.get(pt.x, pt.y))))
            .collect();
        for round in 0..config.iter_max {
            if config.optimise_params {
                let values: Vec<f64> = levels.iter().map(|&l| quant.dequantize(l)).collect();
                let eval = |p: f64, l: f64| {
                    reconstruct(&mask, &areas, &values, p, kernel_mode(mode, l))
                        .and_then(|u| mse(image, &u))
                        .unwrap_or(f64::INFINITY)
                };
                if mode == TreeMode::Anisotropic {
                    let snap = |t: f64| from_fixed8(to_fixed8(t.exp()));
                    let (lo, hi) = (LAMBDA_RANGE.0.ln(), LAMBDA_RANGE.1.ln());
                    let (t, e) = golden_section(lo, hi, SEARCH_ITERATIONS, |t| eval(p, snap(t)));
                    if e <= eval(p, lambda) {
                        lambda = snap(t);
                    }
                }
                let snap = |x: f64| from_fixed12(to_fixed12(x));
                let (x, e) = golden_section(P_RANGE.0, P_RANGE.1, SEARCH_ITERATIONS, |x| eval(snap(x), lambda));
                if e <= eval(p, lambda) {
                    p = snap(x);
                }
            }
            let mut model = ShepardModel::new(mask.clone(), sigmas(&areas, p), kernel_mode(mode, lambda))?;
            let trial = TrialConfig {
                sweeps: config.sweeps,
                seed: config.seed.wrapping_add((steps * 1000 + round) as u64),
            };
            levels = tonal_optimize_trial(&mut model, &levels, quant, image, trial)?.levels;
        }
        carried = mask.positions().iter().copied().zip(levels.iter().copied()).collect();

        let values: Vec<f64> = levels.iter().map(|&l| quant.dequantize(l)).collect();
        let recon = reconstruct(&mask, &areas, &values, p, kernel_mode(mode, lambda))?;
        let leaves = tree.leaves();
        let leaf_errors: Vec<f64> = leaves
            .iter()
            .map(|&n| block_mse(image, &recon, &tree.rect(n)))
            .collect();
        let mut split_any = false;
        for (&n, &e) in leaves.iter().zip(&leaf_errors) {
            if e > threshold && can_split(&tree.rect(n)) {
                tree.split(n)?;
                split_any = true;
            }
        }
        if !split_any {
            let file = CompressedFile {
                header: Header {
                    codec: mode.codec(),
                    width: image.width() as u16,
                    height: image.height() as u16,
                    q: q as u16,
                },
                body: Body::Tree {
                    p: to_fixed12(p),
                    lambda: (mode == TreeMode::Anisotropic).then(|| to_fixed8(lambda)),
                    tree_bits: serialize_tree(&tree),
                    value_count: levels.len() as u32,
                    payload: encode_levels(&levels, quant.bits())?,
                },
            };
            let encoded = finish(image, file, recon.rounded())?;
            return Ok(TreeEncoding {
                encoded,
                tree,
                mask,
                q,
                p,
                lambda: (mode == TreeMode::Anisotropic).then_some(lambda),
                leaf_errors,
                steps,
            });
        }
    }
}

pub(crate) fn subdivide_decode_parts(header: &Header, body: &Body) -> Result<GrayImage> {
    let Body::Tree {
        p,
        lambda,
        tree_bits,
        value_count,
        payload,
    } = body
    else {
        unreachable!("dispatched on codec id");
    };
    let (w, h) = (header.width as usize, header.height as usize);
    let tree = deserialize_tree(tree_bits, w, h)?;
    let mask = leaf_corners(&tree);
    if *value_count as usize != mask.len() {
        return Err(ContainerError::Invalid(format!("{value_count} values for {} corner points", mask.len())).into());
    }
    let quant = Quantizer::new(header.q as usize)?;
    let levels = decode_levels(payload, mask.len(), quant.bits())?;
    if levels.iter().any(|&l| l as usize >= quant.levels()) {
        return Err(ContainerError::Invalid("level outside the quantiser range".into()).into());
    }
    let values: Vec<f64> = levels.iter().map(|&l| quant.dequantize(l)).collect();
    let mode = match lambda {
        Some(l) => KernelMode::Anisotropic(Diffusivity::PeronaMalik {
            lambda: from_fixed8(*l),
        }),
        None => KernelMode::Isotropic,
    };
    let areas = voronoi_areas(&mask);
    Ok(reconstruct(&mask, &areas, &values, from_fixed12(*p), mode)?.rounded())
}

/// Relative ratio miss accepted by [`subdivide_for_ratio`].
pub const RATIO_MATCH: f64 = 0.05;

const THRESHOLD_RANGE: (f64, f64) = (0.1, 20000.0);

fn log_miss(ratio: f64, target: f64) -> f64 {
    (ratio / target).ln().abs()
}

/// Search the split threshold for a ratio close to `target_ratio`.
///
/// A bisection over unoptimised encodings (no parameter search, no tonal
/// optimisation) finds a starting threshold and the local slope of
/// `ln ratio` over `ln threshold`. Full encodings then take secant steps
/// until the ratio is within [`RATIO_MATCH`] or `max_full` encodings are
/// spent. Returns the closest full encoding and its threshold.
pub fn subdivide_for_ratio(
    image: &GrayImage,
    target_ratio: f64,
    mode: TreeMode,
    config: &TreeConfig,
    max_full: usize,
) -> Result<(TreeEncoding, f64)> {
    if !(target_ratio > 1.0) {
        return Err(Error::InvalidParameter(format!(
            "target ratio {target_ratio} must exceed 1"
        )));
    }
    let lite = TreeConfig {
        iter_max: 0,
        optimise_params: false,
        ..*config
    };
    let (mut lo, mut hi) = (THRESHOLD_RANGE.0.ln(), THRESHOLD_RANGE.1.ln());
    let mut lite_pts: Vec<(f64, f64)> = Vec::new();
    for _ in 0..SEARCH_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        let ratio = subdivide_encode_with(image, mid.exp(), mode, &lite)?.encoded.ratio();
        lite_pts.push((mid, ratio.ln()));
        // a higher threshold means fewer splits and a higher ratio
        if ratio < target_ratio {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut t = 0.5 * (lo + hi);
    // slope from the two lite probes closest to the start
    lite_pts.sort_by(|a, b| (a.0 - t).abs().total_cmp(&(b.0 - t).abs()));
    let mut slope = match lite_pts.as_slice() {
        [(t0, r0), (t1, r1), ..] if (t1 - t0).abs() > 1e-9 && (r1 - r0).abs() > 1e-9 => (r1 - r0) / (t1 - t0),
        _ => 1.0,
    }
    .max(0.05);

    let goal = target_ratio.ln();
    let mut best: Option<(TreeEncoding, f64)> = None;
    let mut prev: Option<(f64, f64)> = None;
    for _ in 0..max_full.max(1) {
        let enc = subdivide_encode_with(image, t.exp(), mode, config)?;
        let r = enc.encoded.ratio().ln();
        let miss = log_miss(enc.encoded.ratio(), target_ratio);
        if best
            .as_ref()
            .is_none_or(|(b, _)| miss < log_miss(b.encoded.ratio(), target_ratio))
        {
            best = Some((enc, t.exp()));
        }
        if miss <= (1.0 + RATIO_MATCH).ln() {
            break;
        }
        if let Some((tp, rp)) = prev {
            if (t - tp).abs() > 1e-9 && (r - rp) / (t - tp) > 0.05 {
                slope = (r - rp) / (t - tp);
            }
        }
        prev = Some((t, r));
        t = (t + (goal - r) / slope).clamp(THRESHOLD_RANGE.0.ln(), THRESHOLD_RANGE.1.ln());
    }
    Ok(best.expect("at least one full encoding"))
}
