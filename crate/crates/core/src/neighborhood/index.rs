//! Uniform-grid bucket index over 2-D points.

use crate::error::{Error, Result};

/// Points bucketed on a regular grid, stored in CSR layout.
///
/// Query results are exact; bucketing only limits which points are examined.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    xs: Vec<f64>,
    ys: Vec<f64>,
    x0: f64,
    y0: f64,
    bucket: f64,
    cols: usize,
    rows: usize,
    starts: Vec<usize>,
    order: Vec<usize>,
}

impl SpatialIndex {
    /// Builds the index. `bucket_size` is a hint and is enlarged when the
    /// bounding box would otherwise need far more buckets than points.
    pub fn build(points: &[(f64, f64)], bucket_size: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyScope);
        }
        if !(bucket_size > 0.0 && bucket_size.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "bucket size must be positive, got {bucket_size}"
            )));
        }
        let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for &(x, y) in points {
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
        let max_buckets = (points.len() * 4).max(1 << 16) as f64;
        let mut bucket = bucket_size;
        loop {
            let cols = ((x1 - x0) / bucket).floor() + 1.0;
            let rows = ((y1 - y0) / bucket).floor() + 1.0;
            if cols * rows <= max_buckets {
                break;
            }
            bucket *= 2.0;
        }
        let cols = ((x1 - x0) / bucket).floor() as usize + 1;
        let rows = ((y1 - y0) / bucket).floor() as usize + 1;

        let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
        let key = |i: usize| {
            let cx = (((xs[i] - x0) / bucket).floor() as usize).min(cols - 1);
            let cy = (((ys[i] - y0) / bucket).floor() as usize).min(rows - 1);
            cy * cols + cx
        };
        let mut starts = vec![0usize; cols * rows + 1];
        for i in 0..points.len() {
            starts[key(i) + 1] += 1;
        }
        for b in 0..cols * rows {
            starts[b + 1] += starts[b];
        }
        let mut fill = starts.clone();
        let mut order = vec![0usize; points.len()];
        for i in 0..points.len() {
            let k = key(i);
            order[fill[k]] = i;
            fill[k] += 1;
        }
        Ok(Self {
            xs,
            ys,
            x0,
            y0,
            bucket,
            cols,
            rows,
            starts,
            order,
        })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn point(&self, i: usize) -> (f64, f64) {
        (self.xs[i], self.ys[i])
    }

    fn cell_of(&self, x: f64, y: f64) -> (i64, i64) {
        (
            ((x - self.x0) / self.bucket).floor() as i64,
            ((y - self.y0) / self.bucket).floor() as i64,
        )
    }

    fn visit_block(&self, cx0: i64, cx1: i64, cy0: i64, cy1: i64, mut f: impl FnMut(usize)) {
        let cx0 = cx0.max(0);
        let cy0 = cy0.max(0);
        let cx1 = cx1.min(self.cols as i64 - 1);
        let cy1 = cy1.min(self.rows as i64 - 1);
        if cx0 > cx1 || cy0 > cy1 {
            return;
        }
        for cy in cy0..=cy1 {
            let row = cy as usize * self.cols;
            let lo = self.starts[row + cx0 as usize];
            let hi = self.starts[row + cx1 as usize + 1];
            for &i in &self.order[lo..hi] {
                f(i);
            }
        }
    }

    /// Calls `f` for every point within Euclidean distance `r` of `(x, y)`.
    pub fn for_each_within(&self, x: f64, y: f64, r: f64, mut f: impl FnMut(usize)) {
        if r < 0.0 {
            return;
        }
        let r2 = r * r;
        // One bucket of padding absorbs rounding in the bucket keys.
        let (lx, ly) = self.cell_of(x - r, y - r);
        let (hx, hy) = self.cell_of(x + r, y + r);
        self.visit_block(lx - 1, hx + 1, ly - 1, hy + 1, |i| {
            let dx = self.xs[i] - x;
            let dy = self.ys[i] - y;
            if dx * dx + dy * dy <= r2 {
                f(i);
            }
        });
    }

    /// Indices of all points within distance `r`, ascending.
    pub fn radius_query(&self, x: f64, y: f64, r: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_within(x, y, r, |i| out.push(i));
        out.sort_unstable();
        out
    }

    /// The `k` nearest points to point `center`, excluding `center` itself,
    /// as `(squared distance, index)` sorted by distance then by `rank[index]`.
    pub fn nearest(&self, center: usize, k: usize, rank: &[usize]) -> Vec<(f64, usize)> {
        if k == 0 {
            return Vec::new();
        }
        let (x, y) = self.point(center);
        let (cx, cy) = self.cell_of(x, y);
        let mut cand: Vec<(f64, usize)> = Vec::new();
        let max_ring = self.cols.max(self.rows) as i64 + 1;
        let mut ring = 0i64;
        loop {
            let mut take = |i: usize| {
                if i != center {
                    let dx = self.xs[i] - x;
                    let dy = self.ys[i] - y;
                    cand.push((dx * dx + dy * dy, i));
                }
            };
            if ring == 0 {
                self.visit_block(cx, cx, cy, cy, &mut take);
            } else {
                self.visit_block(cx - ring, cx + ring, cy - ring, cy - ring, &mut take);
                self.visit_block(cx - ring, cx + ring, cy + ring, cy + ring, &mut take);
                self.visit_block(
                    cx - ring,
                    cx - ring,
                    cy - ring + 1,
                    cy + ring - 1,
                    &mut take,
                );
                self.visit_block(
                    cx + ring,
                    cx + ring,
                    cy - ring + 1,
                    cy + ring - 1,
                    &mut take,
                );
            }
            if cand.len() >= k {
                cand.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(rank[a.1].cmp(&rank[b.1])));
                cand.truncate(k);
                // Unvisited points are at least (ring - 1) buckets away, with a
                // bucket of slack for rounding in the keys.
                let safe = (ring - 1).max(0) as f64 * self.bucket;
                if ring >= max_ring || cand[k - 1].0 < safe * safe {
                    break;
                }
            } else if ring >= max_ring {
                break;
            }
            ring += 1;
        }
        cand.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(rank[a.1].cmp(&rank[b.1])));
        cand.truncate(k);
        cand
    }
}
