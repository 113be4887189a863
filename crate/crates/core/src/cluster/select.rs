use std::io::Write;
use std::ops::RangeInclusive;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kmeans::{kmeans, KMeansConfig};
use crate::error::{Error, Result};
use crate::matrix::RowMatrix;
use crate::seed;

/// A statistic evaluated over a range of k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub statistic: String,
    pub ks: Vec<usize>,
    pub values: Vec<f64>,
}

impl Curve {
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["k", self.statistic.as_str()])?;
        for (k, v) in self.ks.iter().zip(&self.values) {
            w.write_record([k.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElbowResult {
    pub k: usize,
    pub wcss: Curve,
}

fn check_range(ks: &RangeInclusive<usize>, rows: &RowMatrix) -> Result<()> {
    if ks.is_empty() || *ks.start() == 0 {
        return Err(Error::InvalidConfig(format!(
            "invalid k range {}..={}",
            ks.start(),
            ks.end()
        )));
    }
    if *ks.end() > rows.nrows() {
        return Err(Error::KTooLarge {
            k: *ks.end(),
            rows: rows.nrows(),
        });
    }
    Ok(())
}

/// Index of the point farthest from the chord joining the first and last
/// points, with both axes rescaled to [0, 1].
fn knee(xs: &[f64], ys: &[f64]) -> usize {
    let n = xs.len();
    if n < 3 {
        return 0;
    }
    let (x0, x1) = (xs[0], xs[n - 1]);
    let (ylo, yhi) = ys
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| {
            (lo.min(y), hi.max(y))
        });
    if yhi <= ylo || x1 <= x0 {
        return 0;
    }
    let nx = |x: f64| (x - x0) / (x1 - x0);
    let ny = |y: f64| (y - ylo) / (yhi - ylo);
    let (ax, ay, bx, by) = (0.0, ny(ys[0]), 1.0, ny(ys[n - 1]));
    let len = ((bx - ax) * (bx - ax) + (by - ay) * (by - ay)).sqrt();
    let mut best = (0, -1.0);
    for i in 0..n {
        let (px, py) = (nx(xs[i]), ny(ys[i]));
        let d = ((by - ay) * px - (bx - ax) * py + bx * ay - by * ax).abs() / len;
        if d > best.1 + 1e-12 {
            best = (i, d);
        }
    }
    best.0
}

/// Chooses k at the knee of the WCSS curve.
pub fn elbow_select_k(
    rows: &RowMatrix,
    ks: RangeInclusive<usize>,
    seed: u64,
) -> Result<ElbowResult> {
    check_range(&ks, rows)?;
    let ks: Vec<usize> = ks.collect();
    let values = ks
        .iter()
        .map(|&k| {
            kmeans(
                rows,
                &KMeansConfig::new(k, seed::derive(seed, "elbow:k", k as u64)),
            )
            .map(|r| r.wcss)
        })
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = ks.iter().map(|&k| k as f64).collect();
    let k = ks[knee(&xs, &values)];
    Ok(ElbowResult {
        k,
        wcss: Curve {
            statistic: "wcss".into(),
            ks,
            values,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapConfig {
    pub references: usize,
    /// Upper bound on rows × references.
    pub budget: usize,
    pub restarts: usize,
}

impl Default for GapConfig {
    fn default() -> Self {
        Self {
            references: 20,
            budget: 5_000_000,
            restarts: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapResult {
    /// `None` when no k in range satisfies the rule.
    pub k: Option<usize>,
    pub gap: Curve,
    /// Simulation error s_k = sd_k · sqrt(1 + 1/B).
    pub s: Vec<f64>,
}

fn log_w(rows: &RowMatrix, k: usize, seed: u64, restarts: usize) -> Result<f64> {
    let w = kmeans(rows, &KMeansConfig::new(k, seed).with_restarts(restarts))?.wcss;
    Ok(w.max(f64::MIN_POSITIVE).ln())
}

/// Gap statistic with uniform references over the bounding box.
pub fn gap_select_k(
    rows: &RowMatrix,
    ks: RangeInclusive<usize>,
    cfg: &GapConfig,
    seed: u64,
) -> Result<GapResult> {
    check_range(&ks, rows)?;
    let b = cfg.references.max(1);
    let cost = rows.nrows().saturating_mul(b);
    if cost > cfg.budget {
        return Err(Error::ResourceExceeded(format!(
            "gap statistic needs {} rows x {} references = {cost}, budget {}",
            rows.nrows(),
            b,
            cfg.budget
        )));
    }
    let ks: Vec<usize> = ks.collect();
    let m = rows.ncols();
    let mut lo = vec![f64::INFINITY; m];
    let mut hi = vec![f64::NEG_INFINITY; m];
    for r in rows.rows() {
        for j in 0..m {
            lo[j] = lo[j].min(r[j]);
            hi[j] = hi[j].max(r[j]);
        }
    }
    let observed = ks
        .iter()
        .map(|&k| {
            log_w(
                rows,
                k,
                seed::derive(seed, "gap:data", k as u64),
                cfg.restarts,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let reference: Vec<Vec<f64>> = (0..b)
        .into_par_iter()
        .map(|bi| {
            let mut rng = seed::rng(seed, "gap:reference", bi as u64);
            let mut data = Vec::with_capacity(rows.nrows() * m);
            for _ in 0..rows.nrows() {
                for j in 0..m {
                    data.push(if hi[j] > lo[j] {
                        rng.gen_range(lo[j]..hi[j])
                    } else {
                        lo[j]
                    });
                }
            }
            let refm = RowMatrix::new(m, data);
            ks.iter()
                .map(|&k| {
                    log_w(
                        &refm,
                        k,
                        seed::derive(seed, "gap:reference-k", (bi * 4096 + k) as u64),
                        cfg.restarts,
                    )
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut gap = Vec::with_capacity(ks.len());
    let mut s = Vec::with_capacity(ks.len());
    for (i, obs) in observed.iter().enumerate() {
        let vals: Vec<f64> = reference.iter().map(|r| r[i]).collect();
        let mean = vals.iter().sum::<f64>() / b as f64;
        let sd = (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / b as f64).sqrt();
        gap.push(mean - obs);
        s.push(sd * (1.0 + 1.0 / b as f64).sqrt());
    }
    let k = (0..ks.len().saturating_sub(1))
        .find(|&i| gap[i] >= gap[i + 1] - s[i + 1])
        .map(|i| ks[i]);
    Ok(GapResult {
        k,
        gap: Curve {
            statistic: "gap".into(),
            ks,
            values: gap,
        },
        s,
    })
}
