//! Neighborhood compositions: fixed-radius disks and k nearest neighbors.
//!
//! Disks count the center itself and exclude centers closer than a margin to
//! the bounding box of their scope. kNN rows never include the center and
//! break distance ties by ascending cell id.

mod diagnostics;
mod index;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datamodel::{CellTypeRegistry, Dataset};
use crate::error::{Error, Result};
use crate::matrix::RowMatrix;

pub use diagnostics::{
    diagnostics, Histogram, HistogramBin, HistogramSpec, NeighborhoodDiagnostics,
};
pub use index::SpatialIndex;

/// Which cells share a neighborhood universe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScopeMode {
    /// One field of view; requires `fov_id` on every cell.
    PerFov,
    /// A whole sample (simulated tissue, or samples without FOVs).
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiskConfig {
    pub r: f64,
    /// Minimum distance from a center to its scope's bounding box.
    /// `None` means `r / 2`.
    pub boundary_margin: Option<f64>,
    pub min_cells: usize,
    pub scope: ScopeMode,
}

impl DiskConfig {
    /// Per-FOV disks with the default `r / 2` margin.
    pub fn new(r: f64) -> Self {
        Self {
            r,
            boundary_margin: None,
            min_cells: 1,
            scope: ScopeMode::PerFov,
        }
    }

    /// Whole-region disks with no boundary exclusion, as used for simulated tissue.
    pub fn unbounded(r: f64) -> Self {
        Self {
            r,
            boundary_margin: Some(0.0),
            min_cells: 1,
            scope: ScopeMode::Global,
        }
    }

    pub fn margin(&self) -> f64 {
        self.boundary_margin.unwrap_or(self.r / 2.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "radius must be positive, got {}",
                self.r
            )));
        }
        if !(self.margin() >= 0.0) {
            return Err(Error::InvalidConfig(
                "boundary margin must be non-negative".into(),
            ));
        }
        if self.min_cells < 1 {
            return Err(Error::InvalidConfig("min_cells must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnnConfig {
    pub k: usize,
    pub scope: ScopeMode,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self {
            k: 10,
            scope: ScopeMode::Global,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum CompositionKind {
    Disk {
        r: f64,
    },
    Knn {
        k: usize,
    },
    /// Read back from a file that does not record the construction.
    Unknown,
}

/// Row-stochastic neighborhood compositions with back-references to their centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionMatrix {
    pub kind: CompositionKind,
    pub registry: CellTypeRegistry,
    /// One row per center; column `j` is the fraction of type `j`.
    pub rows: RowMatrix,
    /// Neighborhood size: disk occupancy `n_i`, or `k`.
    pub counts: Vec<u32>,
    pub cell_ids: Vec<String>,
    pub samples: Vec<String>,
    pub fovs: Vec<Option<String>>,
}

impl CompositionMatrix {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Writes `cell_id,sample,n_i,<one column per cell type>`.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        let mut header = vec!["cell_id".to_string(), "sample".into(), "n_i".into()];
        header.extend(self.registry.names().iter().cloned());
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = vec![
                self.cell_ids[i].clone(),
                self.samples[i].clone(),
                self.counts[i].to_string(),
            ];
            rec.extend(self.rows.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the layout produced by [`CompositionMatrix::write_csv`]. Lines
    /// starting with `#` are skipped.
    pub fn read_csv<R: Read>(source: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(source);
        let headers = r.headers()?.clone();
        if headers.len() < 4
            || &headers[0] != "cell_id"
            || &headers[1] != "sample"
            || &headers[2] != "n_i"
        {
            return Err(Error::MissingColumn {
                role: "cell_id,sample,n_i".into(),
            });
        }
        let registry = CellTypeRegistry::new(headers.iter().skip(3).map(str::to_string).collect())?;
        let m = registry.len();
        let (mut data, mut counts, mut ids, mut samples) =
            (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (i, rec) in r.records().enumerate() {
            let row = i + 1;
            let rec = rec.map_err(|e| Error::Parse {
                row,
                message: e.to_string(),
            })?;
            ids.push(rec[0].to_string());
            samples.push(rec[1].to_string());
            counts.push(rec[2].trim().parse().map_err(|_| Error::Parse {
                row,
                message: "bad n_i".into(),
            })?);
            for j in 0..m {
                let v: f64 =
                    rec.get(3 + j)
                        .unwrap_or("")
                        .trim()
                        .parse()
                        .map_err(|_| Error::Parse {
                            row,
                            message: format!("bad fraction in column {}", 3 + j),
                        })?;
                data.push(v);
            }
        }
        if counts.is_empty() {
            return Err(Error::EmptyInput);
        }
        let n = counts.len();
        Ok(Self {
            kind: CompositionKind::Unknown,
            registry,
            rows: RowMatrix::new(m, data),
            counts,
            cell_ids: ids,
            samples,
            fovs: vec![None; n],
        })
    }
}

pub(crate) struct Scope {
    pub label: String,
    pub members: Vec<usize>,
}

pub(crate) fn scopes(d: &Dataset, mode: ScopeMode) -> Result<Vec<Scope>> {
    let mut map: BTreeMap<(usize, Option<&str>), Vec<usize>> = BTreeMap::new();
    for (i, c) in d.cells().iter().enumerate() {
        let s = d.sample_index(&c.sample_id).expect("sample listed");
        let key = match mode {
            ScopeMode::Global => (s, None),
            ScopeMode::PerFov => {
                let f = c
                    .fov_id
                    .as_deref()
                    .ok_or_else(|| Error::MissingFov(c.cell_id.clone()))?;
                (s, Some(f))
            }
        };
        map.entry(key).or_default().push(i);
    }
    Ok(map
        .into_iter()
        .map(|((s, f), members)| Scope {
            label: match f {
                Some(f) => format!("{}/{}", d.samples()[s], f),
                None => d.samples()[s].clone(),
            },
            members,
        })
        .collect())
}

fn row_order(d: &Dataset, a: usize, b: usize) -> Ordering {
    let (ca, cb) = (&d.cells()[a], &d.cells()[b]);
    d.sample_index(&ca.sample_id)
        .cmp(&d.sample_index(&cb.sample_id))
        .then_with(|| ca.fov_id.cmp(&cb.fov_id))
        .then_with(|| ca.cell_id.cmp(&cb.cell_id))
}

/// Rank of every cell under ascending cell id, used to break distance ties.
fn id_ranks(d: &Dataset) -> Vec<usize> {
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.sort_by(|&a, &b| d.cells()[a].cell_id.cmp(&d.cells()[b].cell_id));
    let mut rank = vec![0; d.len()];
    for (r, i) in order.into_iter().enumerate() {
        rank[i] = r;
    }
    rank
}

fn scope_points(d: &Dataset, members: &[usize]) -> Vec<(f64, f64)> {
    members
        .iter()
        .map(|&i| (d.cells()[i].x, d.cells()[i].y))
        .collect()
}

/// Per-type disk counts for every retained center: `(cell index, counts)`.
pub(crate) fn disk_counts(d: &Dataset, cfg: &DiskConfig) -> Result<Vec<(usize, Vec<u32>)>> {
    cfg.validate()?;
    let m = d.registry().len();
    let margin = cfg.margin();
    let mut out = Vec::new();
    for scope in scopes(d, cfg.scope)? {
        let pts = scope_points(d, &scope.members);
        let index = SpatialIndex::build(&pts, cfg.r)?;
        let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for &(x, y) in &pts {
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
        let rows: Vec<Option<(usize, Vec<u32>)>> = (0..pts.len())
            .into_par_iter()
            .map(|local| {
                let (x, y) = pts[local];
                let edge = (x - x0).min(x1 - x).min(y - y0).min(y1 - y);
                if edge < margin {
                    return None;
                }
                let mut counts = vec![0u32; m];
                let mut total = 0usize;
                index.for_each_within(x, y, cfg.r, |j| {
                    counts[d.cells()[scope.members[j]].cell_type] += 1;
                    total += 1;
                });
                (total >= cfg.min_cells).then(|| (scope.members[local], counts))
            })
            .collect();
        out.extend(rows.into_iter().flatten());
    }
    out.sort_by(|a, b| row_order(d, a.0, b.0));
    Ok(out)
}

fn assemble(d: &Dataset, kind: CompositionKind, rows: Vec<(usize, Vec<u32>)>) -> CompositionMatrix {
    let m = d.registry().len();
    let mut data = Vec::with_capacity(rows.len() * m);
    let mut counts = Vec::with_capacity(rows.len());
    let (mut ids, mut samples, mut fovs) = (Vec::new(), Vec::new(), Vec::new());
    for (cell, c) in rows {
        let n: u32 = c.iter().sum();
        data.extend(c.iter().map(|&v| f64::from(v) / f64::from(n)));
        counts.push(n);
        let rec = &d.cells()[cell];
        ids.push(rec.cell_id.clone());
        samples.push(rec.sample_id.clone());
        fovs.push(rec.fov_id.clone());
    }
    CompositionMatrix {
        kind,
        registry: d.registry().clone(),
        rows: RowMatrix::new(m.max(1), data),
        counts,
        cell_ids: ids,
        samples,
        fovs,
    }
}

/// Disk composition matrix: one row per retained center, ordered by
/// `(sample, fov, cell_id)`.
pub fn disk_composition(d: &Dataset, cfg: &DiskConfig) -> Result<CompositionMatrix> {
    let rows = disk_counts(d, cfg)?;
    if rows.is_empty() {
        return Err(Error::NoRowsRetained);
    }
    Ok(assemble(d, CompositionKind::Disk { r: cfg.r }, rows))
}

/// Disk occupancies `n_i` of every retained center.
pub fn disk_occupancy(d: &Dataset, cfg: &DiskConfig) -> Result<Vec<u32>> {
    Ok(disk_counts(d, cfg)?
        .into_iter()
        .map(|(_, c)| c.iter().sum())
        .collect())
}

/// For every cell, its `k` nearest neighbors in scope as `(cell index, distance)`,
/// excluding the cell itself.
pub(crate) fn knn_neighbors(
    d: &Dataset,
    k: usize,
    mode: ScopeMode,
) -> Result<Vec<(usize, Vec<(usize, f64)>)>> {
    if k < 1 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    let ranks = id_ranks(d);
    let mut out = Vec::with_capacity(d.len());
    for scope in scopes(d, mode)? {
        if scope.members.len() <= k {
            return Err(Error::ScopeTooSmall {
                scope: scope.label,
                cells: scope.members.len(),
                k,
            });
        }
        let pts = scope_points(d, &scope.members);
        let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for &(x, y) in &pts {
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
        let area = ((x1 - x0) * (y1 - y0)).max(f64::MIN_POSITIVE);
        let bucket = (area * k as f64 / pts.len() as f64).sqrt().max(1e-9);
        let index = SpatialIndex::build(&pts, bucket)?;
        let local_rank: Vec<usize> = scope.members.iter().map(|&i| ranks[i]).collect();
        let rows: Vec<(usize, Vec<(usize, f64)>)> = (0..pts.len())
            .into_par_iter()
            .map(|local| {
                let nn = index
                    .nearest(local, k, &local_rank)
                    .into_iter()
                    .map(|(d2, j)| (scope.members[j], d2.sqrt()))
                    .collect();
                (scope.members[local], nn)
            })
            .collect();
        out.extend(rows);
    }
    out.sort_by(|a, b| row_order(d, a.0, b.0));
    Ok(out)
}

/// kNN composition matrix: one row per cell with entries in multiples of `1/k`.
pub fn knn_composition(d: &Dataset, cfg: &KnnConfig) -> Result<CompositionMatrix> {
    let m = d.registry().len();
    let rows = knn_neighbors(d, cfg.k, cfg.scope)?
        .into_iter()
        .map(|(cell, nn)| {
            let mut counts = vec![0u32; m];
            for (j, _) in nn {
                counts[d.cells()[j].cell_type] += 1;
            }
            (cell, counts)
        })
        .collect();
    Ok(assemble(d, CompositionKind::Knn { k: cfg.k }, rows))
}
