use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::cluster::Partition;
use crate::error::{Error, Result};
use crate::neighborhood::CompositionMatrix;

/// Community label for each labeled cell, with the run that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityAssignment {
    pub method: String,
    pub cell_ids: Vec<String>,
    pub samples: Vec<String>,
    pub fovs: Vec<Option<String>>,
    /// Dense community indices in `0..n_communities`.
    pub labels: Vec<usize>,
    pub n_communities: usize,
    pub config: serde_json::Value,
}

/// Run summary written next to an assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub method: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub community_count: usize,
    pub community_sizes: Vec<usize>,
}

impl CommunityAssignment {
    pub fn new(
        method: impl Into<String>,
        cell_ids: Vec<String>,
        samples: Vec<String>,
        fovs: Vec<Option<String>>,
        labels: Vec<usize>,
        config: serde_json::Value,
    ) -> Result<Self> {
        let n = cell_ids.len();
        for len in [samples.len(), fovs.len(), labels.len()] {
            if len != n {
                return Err(Error::LengthMismatch {
                    left: n,
                    right: len,
                });
            }
        }
        let n_communities = labels.iter().max().map_or(0, |m| m + 1);
        // Validates density.
        Partition::new(labels.clone(), n_communities)?;
        Ok(Self {
            method: method.into(),
            cell_ids,
            samples,
            fovs,
            labels,
            n_communities,
            config,
        })
    }

    /// Labels the rows of a composition matrix.
    pub fn for_rows(
        c: &CompositionMatrix,
        method: impl Into<String>,
        labels: Vec<usize>,
        config: serde_json::Value,
    ) -> Result<Self> {
        Self::new(
            method,
            c.cell_ids.clone(),
            c.samples.clone(),
            c.fovs.clone(),
            labels,
            config,
        )
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn partition(&self) -> Partition {
        Partition::new(self.labels.clone(), self.n_communities).expect("labels are dense")
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.n_communities];
        for &l in &self.labels {
            s[l] += 1;
        }
        s
    }

    pub fn label_map(&self) -> HashMap<&str, usize> {
        self.cell_ids
            .iter()
            .map(String::as_str)
            .zip(self.labels.iter().copied())
            .collect()
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            method: self.method.clone(),
            config: self.config.clone(),
            seed: self.config.get("seed").and_then(|s| s.as_u64()),
            community_count: self.n_communities,
            community_sizes: self.sizes(),
        }
    }

    /// Writes `cell_id,sample,fov,community`.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["cell_id", "sample", "fov", "community"])?;
        for i in 0..self.len() {
            w.write_record([
                self.cell_ids[i].as_str(),
                self.samples[i].as_str(),
                self.fovs[i].as_deref().unwrap_or(""),
                &self.labels[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads `cell_id,sample,fov,community`; `sample` and `fov` are optional,
    /// and community labels are renumbered densely in order of appearance.
    pub fn read_csv<R: Read>(source: R, method: &str) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(source);
        let headers = r.headers()?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let id_col = col("cell_id").ok_or_else(|| Error::MissingColumn {
            role: "cell_id".into(),
        })?;
        let label_col = col("community")
            .or_else(|| col("intended_community"))
            .ok_or_else(|| Error::MissingColumn {
                role: "community".into(),
            })?;
        let (sample_col, fov_col) = (col("sample"), col("fov"));
        let (mut ids, mut samples, mut fovs, mut raw) =
            (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse {
                row: i + 1,
                message: e.to_string(),
            })?;
            ids.push(rec[id_col].to_string());
            samples.push(sample_col.map(|c| rec[c].to_string()).unwrap_or_default());
            fovs.push(
                fov_col
                    .map(|c| rec[c].to_string())
                    .filter(|s| !s.is_empty()),
            );
            raw.push(rec[label_col].trim().to_string());
        }
        if ids.is_empty() {
            return Err(Error::EmptyInput);
        }
        let labels = Partition::from_labels(&raw).labels().to_vec();
        Self::new(method, ids, samples, fovs, labels, serde_json::Value::Null)
    }
}
