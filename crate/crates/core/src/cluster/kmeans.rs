use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Partition;
use crate::error::{Error, Result};
use crate::matrix::{sq_dist, RowMatrix};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Stop once no centroid moves farther than this.
    pub tol: f64,
    pub restarts: usize,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            seed,
            max_iter: 300,
            tol: 1e-6,
            restarts: 10,
        }
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansResult {
    pub partition: Partition,
    pub centroids: RowMatrix,
    /// Within-cluster sum of squares about the centroids.
    pub wcss: f64,
    pub iterations: usize,
    pub restarts_used: usize,
    pub seed: u64,
    /// WCSS after each Lloyd iteration of the winning restart, plus one entry
    /// after transfer refinement when it moved anything.
    pub history: Vec<f64>,
}

struct Run {
    labels: Vec<usize>,
    centroids: RowMatrix,
    wcss: f64,
    iterations: usize,
    history: Vec<f64>,
}

fn plus_plus_init(rows: &RowMatrix, k: usize, rng: &mut seed::Rng) -> RowMatrix {
    let n = rows.nrows();
    let mut centroids = RowMatrix::zeros(k, rows.ncols());
    let first = rng.gen_range(0..n);
    centroids.row_mut(0).copy_from_slice(rows.row(first));
    let mut d2: Vec<f64> = rows.rows().map(|r| sq_dist(r, centroids.row(0))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 && target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            // Rounding can walk off the end onto a zero-weight row.
            if d2[chosen] == 0.0 {
                chosen = d2.iter().rposition(|&w| w > 0.0).unwrap_or(chosen);
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        centroids.row_mut(c).copy_from_slice(rows.row(pick));
        for (i, r) in rows.rows().enumerate() {
            d2[i] = d2[i].min(sq_dist(r, centroids.row(c)));
        }
    }
    centroids
}

fn nearest(row: &[f64], centroids: &RowMatrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, cen) in centroids.rows().enumerate() {
        let d = sq_dist(row, cen);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn update_means(rows: &RowMatrix, labels: &[usize], k: usize) -> RowMatrix {
    let m = rows.ncols();
    let mut sums = RowMatrix::zeros(k, m);
    let mut counts = vec![0usize; k];
    for (r, &l) in rows.rows().zip(labels) {
        counts[l] += 1;
        for (s, v) in sums.row_mut(l).iter_mut().zip(r) {
            *s += v;
        }
    }
    for (c, &n) in counts.iter().enumerate() {
        if n > 0 {
            sums.row_mut(c).iter_mut().for_each(|s| *s /= n as f64);
        }
    }
    sums
}

fn wcss_of(rows: &RowMatrix, labels: &[usize], centroids: &RowMatrix) -> f64 {
    rows.rows()
        .zip(labels)
        .map(|(r, &l)| sq_dist(r, centroids.row(l)))
        .sum()
}

/// Moves the point farthest from its centroid into each empty cluster,
/// never emptying a cluster in the process.
fn repair_empty(rows: &RowMatrix, labels: &mut [usize], centroids: &mut RowMatrix, k: usize) {
    loop {
        let mut sizes = vec![0usize; k];
        for &l in labels.iter() {
            sizes[l] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let mut far = None;
        let mut far_d = -1.0;
        for (i, r) in rows.rows().enumerate() {
            if sizes[labels[i]] > 1 {
                let d = sq_dist(r, centroids.row(labels[i]));
                if d > far_d {
                    far_d = d;
                    far = Some(i);
                }
            }
        }
        let i = far.expect("k <= n guarantees a donor cluster");
        labels[i] = empty;
        centroids.row_mut(empty).copy_from_slice(rows.row(i));
    }
}

/// Hartigan single-point transfers: moves a point whenever that strictly
/// lowers the WCSS, which escapes many Lloyd fixed points. Returns the number
/// of passes that moved at least one point.
fn hartigan_refine(
    rows: &RowMatrix,
    labels: &mut [usize],
    centroids: &mut RowMatrix,
    k: usize,
    max_passes: usize,
) -> usize {
    let mut sizes = vec![0usize; k];
    for &l in labels.iter() {
        sizes[l] += 1;
    }
    // Gains below this are rounding, e.g. between copies of one row.
    let floor = 1e-12
        * rows
            .rows()
            .map(|r| r.iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
        / rows.nrows() as f64;
    let mut passes = 0;
    while passes < max_passes {
        let mut moved = false;
        for (i, r) in rows.rows().enumerate() {
            let from = labels[i];
            let nf = sizes[from] as f64;
            if sizes[from] < 2 {
                continue;
            }
            let leave = nf / (nf - 1.0) * sq_dist(r, centroids.row(from));
            let mut best = (from, leave);
            for (c, cen) in centroids.rows().enumerate() {
                if c != from {
                    let nc = sizes[c] as f64;
                    let join = nc / (nc + 1.0) * sq_dist(r, cen);
                    if join < best.1 {
                        best = (c, join);
                    }
                }
            }
            let (to, join) = best;
            if to == from || join >= leave * (1.0 - 1e-12) - floor {
                continue;
            }
            let nt = sizes[to] as f64;
            for (cf, v) in centroids.row_mut(from).iter_mut().zip(r) {
                *cf = (*cf * nf - v) / (nf - 1.0);
            }
            for (ct, v) in centroids.row_mut(to).iter_mut().zip(r) {
                *ct = (*ct * nt + v) / (nt + 1.0);
            }
            sizes[from] -= 1;
            sizes[to] += 1;
            labels[i] = to;
            moved = true;
        }
        if !moved {
            break;
        }
        passes += 1;
    }
    passes
}

fn lloyd(rows: &RowMatrix, cfg: &KMeansConfig, restart: usize) -> Run {
    let k = cfg.k;
    let mut rng = seed::rng(cfg.seed, "kmeans:restart", restart as u64);
    let mut centroids = plus_plus_init(rows, k, &mut rng);
    let mut labels = vec![usize::MAX; rows.nrows()];
    let mut history = Vec::new();
    let mut iterations = 0;
    for _ in 0..cfg.max_iter.max(1) {
        iterations += 1;
        let mut changed = false;
        for (i, r) in rows.rows().enumerate() {
            let (c, _) = nearest(r, &centroids);
            if labels[i] != c {
                labels[i] = c;
                changed = true;
            }
        }
        repair_empty(rows, &mut labels, &mut centroids, k);
        let next = update_means(rows, &labels, k);
        let shift = next
            .rows()
            .zip(centroids.rows())
            .map(|(a, b)| sq_dist(a, b))
            .fold(0.0, f64::max);
        centroids = next;
        history.push(wcss_of(rows, &labels, &centroids));
        if !changed || shift.sqrt() < cfg.tol {
            break;
        }
    }
    if hartigan_refine(rows, &mut labels, &mut centroids, k, cfg.max_iter.max(1)) > 0 {
        centroids = update_means(rows, &labels, k);
        history.push(wcss_of(rows, &labels, &centroids));
    }
    let wcss = *history.last().unwrap();
    Run {
        labels,
        centroids,
        wcss,
        iterations,
        history,
    }
}

/// Lloyd's algorithm from k-means++ seeds, polished by Hartigan transfers,
/// best of `restarts` by WCSS.
///
/// Each restart draws from its own seed path, so the result does not depend
/// on how restarts are scheduled.
pub fn kmeans(rows: &RowMatrix, cfg: &KMeansConfig) -> Result<KMeansResult> {
    let n = rows.nrows();
    if cfg.k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    if cfg.k > n {
        return Err(Error::KTooLarge { k: cfg.k, rows: n });
    }
    let restarts = cfg.restarts.max(1);
    let runs: Vec<Run> = (0..restarts)
        .into_par_iter()
        .map(|r| lloyd(rows, cfg, r))
        .collect();
    let best = runs
        .into_iter()
        .enumerate()
        .min_by(|a, b| a.1.wcss.total_cmp(&b.1.wcss).then(a.0.cmp(&b.0)))
        .map(|(_, r)| r)
        .unwrap();
    Ok(KMeansResult {
        partition: Partition::new(best.labels, cfg.k)?,
        centroids: best.centroids,
        wcss: best.wcss,
        iterations: best.iterations,
        restarts_used: restarts,
        seed: cfg.seed,
        history: best.history,
    })
}
