use crate::mask::{Mask, Rect};

/// Bucket grid over mask points for rectangle queries.
#[derive(Clone, Debug)]
pub(crate) struct PointIndex {
    cell: usize,
    cols: usize,
    rows: usize,
    buckets: Vec<Vec<u32>>,
}

impl PointIndex {
    pub fn new(mask: &Mask, cell: usize) -> Self {
        let cell = cell.max(1);
        let cols = mask.width().div_ceil(cell);
        let rows = mask.height().div_ceil(cell);
        let mut buckets = vec![Vec::new(); cols * rows];
        for (i, p) in mask.positions().iter().enumerate() {
            buckets[(p.y / cell) * cols + p.x / cell].push(i as u32);
        }
        PointIndex {
            cell,
            cols,
            rows,
            buckets,
        }
    }

    /// Indices of points in the buckets overlapping `rect` grown by `margin`,
    /// ascending. A superset; callers filter by their own window test.
    pub fn query(&self, rect: Rect, margin: usize, out: &mut Vec<usize>) {
        out.clear();
        let x0 = rect.x0.saturating_sub(margin);
        let y0 = rect.y0.saturating_sub(margin);
        let x1 = rect.x1 + margin;
        let y1 = rect.y1 + margin;
        let cx0 = x0 / self.cell;
        let cy0 = y0 / self.cell;
        let cx1 = (x1 / self.cell).min(self.cols - 1);
        let cy1 = (y1 / self.cell).min(self.rows - 1);
        for cy in cy0..=cy1 {
            for cx in cx0..=cx1 {
                out.extend(self.buckets[cy * self.cols + cx].iter().map(|&i| i as usize));
            }
        }
        out.sort_unstable();
    }

    /// Indices of points in the buckets at Chebyshev bucket distance exactly
    /// `ring` from bucket `(bx, by)`, in no particular order.
    pub fn ring(&self, bx: usize, by: usize, ring: usize, out: &mut Vec<usize>) {
        out.clear();
        let (bx, by, r) = (bx as i64, by as i64, ring as i64);
        let mut take = |cx: i64, cy: i64| {
            if cx >= 0 && cy >= 0 && (cx as usize) < self.cols && (cy as usize) < self.rows {
                let b = &self.buckets[cy as usize * self.cols + cx as usize];
                out.extend(b.iter().map(|&i| i as usize));
            }
        };
        if r == 0 {
            take(bx, by);
            return;
        }
        for cx in bx - r..=bx + r {
            take(cx, by - r);
            take(cx, by + r);
        }
        for cy in by - r + 1..by + r {
            take(bx - r, cy);
            take(bx + r, cy);
        }
    }
}
