//! Per-point kernel widths from the discrete Voronoi cells of the mask.

use super::PointIndex;
use crate::mask::Mask;

/// Local σ per mask point together with the cell areas it was derived from.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalSigmaField {
    pub sigma: Vec<f64>,
    pub area: Vec<usize>,
}

fn cell_size(mask: &Mask) -> usize {
    let spacing = ((mask.width() * mask.height()) as f64 / mask.len() as f64).sqrt();
    (spacing.round() as usize).max(1)
}

/// Index of the nearest mask point for every pixel (Euclidean distance,
/// ties resolved towards the lowest canonical index).
pub fn nearest_assignment(mask: &Mask) -> Vec<usize> {
    let (w, h) = (mask.width(), mask.height());
    let cell = cell_size(mask);
    let index = PointIndex::new(mask, cell);
    let pts = mask.positions();
    let cols = w.div_ceil(cell);
    let rows = h.div_ceil(cell);
    let max_ring = cols.max(rows);
    let mut out = Vec::with_capacity(w * h);
    let mut cand = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let (bx, by) = (x / cell, y / cell);
            let mut best = (u64::MAX, usize::MAX);
            for ring in 0..=max_ring {
                if ring > 0 {
                    // every point in this ring is at least this far away
                    let bound = ((ring - 1) * cell + 1) as u64;
                    if best.0 < bound * bound {
                        break;
                    }
                }
                index.ring(bx, by, ring, &mut cand);
                for &j in &cand {
                    let p = pts[j];
                    let dx = p.x.abs_diff(x) as u64;
                    let dy = p.y.abs_diff(y) as u64;
                    let d = (dx * dx + dy * dy, j);
                    if d < best {
                        best = d;
                    }
                }
            }
            out.push(best.1);
        }
    }
    out
}

/// Pixel count of every point's Voronoi cell.
pub fn voronoi_areas(mask: &Mask) -> Vec<usize> {
    let mut area = vec![0usize; mask.len()];
    for j in nearest_assignment(mask) {
        area[j] += 1;
    }
    area
}

/// `σ_k = (ln(1 + A_k))^p`.
pub fn sigma_from_area(area: usize, p: f64) -> f64 {
    (1.0 + area as f64).ln().powf(p)
}

pub fn voronoi_sigmas(mask: &Mask, p: f64) -> LocalSigmaField {
    let area = voronoi_areas(mask);
    let sigma = area.iter().map(|&a| sigma_from_area(a, p)).collect();
    LocalSigmaField { sigma, area }
}
