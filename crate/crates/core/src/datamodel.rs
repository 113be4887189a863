//! Cells, the cell-type registry, and CSV ingestion.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One segmented cell. Coordinates are in µm and share one origin per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub cell_id: String,
    pub sample_id: String,
    pub fov_id: Option<String>,
    pub x: f64,
    pub y: f64,
    /// Index into the dataset's [`CellTypeRegistry`].
    pub cell_type: usize,
}

/// Ordered, distinct cell-type names. The order fixes the column order of
/// every composition matrix built from the dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellTypeRegistry {
    names: Vec<String>,
}

impl CellTypeRegistry {
    pub fn new(names: Vec<String>) -> Result<Self> {
        let mut seen = HashSet::new();
        for n in &names {
            if n.is_empty() {
                return Err(Error::InvalidConfig("empty cell-type name".into()));
            }
            if !seen.insert(n.as_str()) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate cell-type name `{n}`"
                )));
            }
        }
        Ok(Self { names })
    }

    /// Registry over the distinct names, sorted lexicographically.
    pub fn from_unsorted<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = names.into_iter().map(Into::into).collect();
        Self::new(set.into_iter().collect())
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.names[idx]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    cells: Vec<CellRecord>,
    registry: CellTypeRegistry,
    samples: Vec<String>,
}

impl Dataset {
    /// Validates cell ids, coordinates and type indices. Samples are listed in
    /// order of first appearance.
    pub fn new(cells: Vec<CellRecord>, registry: CellTypeRegistry) -> Result<Self> {
        let mut ids = HashSet::with_capacity(cells.len());
        let mut samples: Vec<String> = Vec::new();
        let mut sample_seen = HashSet::new();
        for c in &cells {
            if !ids.insert(c.cell_id.as_str()) {
                return Err(Error::DuplicateCellId(c.cell_id.clone()));
            }
            if !c.x.is_finite() || !c.y.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "cell `{}` has non-finite coordinates",
                    c.cell_id
                )));
            }
            if c.cell_type >= registry.len() {
                return Err(Error::InvalidConfig(format!(
                    "cell `{}` has type index {} outside the registry",
                    c.cell_id, c.cell_type
                )));
            }
            if sample_seen.insert(c.sample_id.as_str()) {
                samples.push(c.sample_id.clone());
            }
        }
        Ok(Self {
            cells,
            registry,
            samples,
        })
    }

    pub fn cells(&self) -> &[CellRecord] {
        &self.cells
    }

    pub fn registry(&self) -> &CellTypeRegistry {
        &self.registry
    }

    pub fn samples(&self) -> &[String] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn sample_index(&self, sample: &str) -> Option<usize> {
        self.samples.iter().position(|s| s == sample)
    }
}

/// Maps column roles to header names. `None` leaves an optional role unmapped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub sample: Option<String>,
    pub x: Option<String>,
    pub y: Option<String>,
    pub cell_type: Option<String>,
    pub fov: Option<String>,
    pub cell_id: Option<String>,
}

impl Default for ColumnSchema {
    fn default() -> Self {
        Self {
            sample: Some("sample".into()),
            x: Some("x".into()),
            y: Some("y".into()),
            cell_type: Some("cell_type".into()),
            fov: Some("fov".into()),
            cell_id: Some("cell_id".into()),
        }
    }
}

fn required(headers: &csv::StringRecord, role: &str, name: &Option<String>) -> Result<usize> {
    let name = name
        .as_deref()
        .ok_or_else(|| Error::MissingColumn { role: role.into() })?;
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::MissingColumn { role: role.into() })
}

fn optional(headers: &csv::StringRecord, name: &Option<String>) -> Option<usize> {
    name.as_deref()
        .and_then(|n| headers.iter().position(|h| h == n))
}

/// Reads delimiter-separated cell records with a header row.
///
/// Cell types are registered in lexicographic order. Rows without a cell id
/// column get their 1-based data-row ordinal as id. Parse errors carry the
/// 1-based data-row number.
pub fn ingest_cells<R: Read>(source: R, schema: &ColumnSchema, delimiter: u8) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let sample_col = required(&headers, "sample", &schema.sample)?;
    let x_col = required(&headers, "x", &schema.x)?;
    let y_col = required(&headers, "y", &schema.y)?;
    let type_col = required(&headers, "cell_type", &schema.cell_type)?;
    let fov_col = optional(&headers, &schema.fov);
    let id_col = optional(&headers, &schema.cell_id);

    struct Raw {
        cell_id: String,
        sample: String,
        fov: Option<String>,
        x: f64,
        y: f64,
        cell_type: String,
    }

    let coord = |rec: &csv::StringRecord, col: usize, row: usize, what: &str| -> Result<f64> {
        let s = rec.get(col).unwrap_or("").trim();
        let v: f64 = s.parse().map_err(|_| Error::Parse {
            row,
            message: format!("{what} value `{s}` is not a number"),
        })?;
        if !v.is_finite() {
            return Err(Error::Parse {
                row,
                message: format!("{what} value `{s}` is not finite"),
            });
        }
        Ok(v)
    };

    let mut raws = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        let field = |col: usize| rec.get(col).unwrap_or("").trim().to_string();
        let cell_type = field(type_col);
        if cell_type.is_empty() {
            return Err(Error::Parse {
                row,
                message: "empty cell type".into(),
            });
        }
        raws.push(Raw {
            cell_id: id_col.map_or_else(|| row.to_string(), field),
            sample: field(sample_col),
            fov: fov_col.map(field).filter(|f| !f.is_empty()),
            x: coord(&rec, x_col, row, "x")?,
            y: coord(&rec, y_col, row, "y")?,
            cell_type,
        });
    }
    if raws.is_empty() {
        return Err(Error::EmptyInput);
    }

    let registry = CellTypeRegistry::from_unsorted(raws.iter().map(|r| r.cell_type.clone()))?;
    let lookup: HashMap<&str, usize> = registry
        .names()
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let cells = raws
        .iter()
        .map(|r| CellRecord {
            cell_id: r.cell_id.clone(),
            sample_id: r.sample.clone(),
            fov_id: r.fov.clone(),
            x: r.x,
            y: r.y,
            cell_type: lookup[r.cell_type.as_str()],
        })
        .collect();
    Dataset::new(cells, registry)
}

/// Writes the canonical `sample,fov,cell_id,x,y,cell_type` layout.
pub fn write_cells<W: Write>(d: &Dataset, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["sample", "fov", "cell_id", "x", "y", "cell_type"])?;
    for c in d.cells() {
        w.write_record([
            c.sample_id.as_str(),
            c.fov_id.as_deref().unwrap_or(""),
            c.cell_id.as_str(),
            &c.x.to_string(),
            &c.y.to_string(),
            d.registry().name(c.cell_type),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub sample: String,
    pub size: usize,
    pub fov_count: usize,
}

/// Per-sample cell and FOV counts, in the dataset's sample order.
pub fn dataset_summary(d: &Dataset) -> Vec<SampleSummary> {
    let mut sizes = vec![0usize; d.samples().len()];
    let mut fovs: Vec<HashSet<&str>> = vec![HashSet::new(); d.samples().len()];
    let index: HashMap<&str, usize> = d
        .samples()
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    for c in d.cells() {
        let i = index[c.sample_id.as_str()];
        sizes[i] += 1;
        if let Some(f) = &c.fov_id {
            fovs[i].insert(f);
        }
    }
    d.samples()
        .iter()
        .enumerate()
        .map(|(i, s)| SampleSummary {
            sample: s.clone(),
            size: sizes[i],
            fov_count: fovs[i].len(),
        })
        .collect()
}
