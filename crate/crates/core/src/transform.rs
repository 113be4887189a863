//! Centered log-ratio transform of composition rows.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::RowMatrix;
use crate::neighborhood::CompositionMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum ZeroPolicy {
    /// Replace zeros by `delta_frac / n_i` and shrink the nonzero entries so
    /// the row still sums to one, then apply CLR.
    PseudoCount { delta_frac: f64 },
    /// Pass the composition through unchanged.
    Skip,
}

impl ZeroPolicy {
    pub const HALF_COUNT: ZeroPolicy = ZeroPolicy::PseudoCount { delta_frac: 0.5 };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Transformed,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRatioMatrix {
    pub rows: RowMatrix,
    pub provenance: Provenance,
    pub zero_policy: ZeroPolicy,
}

/// Multiplicative zero replacement on a single composition row.
pub fn replace_zeros(row: &[f64], delta: f64) -> Vec<f64> {
    let zeros = row.iter().filter(|&&v| v <= 0.0).count();
    let keep = 1.0 - zeros as f64 * delta;
    row.iter()
        .map(|&v| if v <= 0.0 { delta } else { v * keep })
        .collect()
}

/// `ln p_j - mean_j ln p_j` for a strictly positive row.
pub fn clr_row(row: &[f64]) -> Vec<f64> {
    let logs: Vec<f64> = row.iter().map(|v| v.ln()).collect();
    let mean = logs.iter().sum::<f64>() / logs.len() as f64;
    logs.into_iter().map(|l| l - mean).collect()
}

pub fn clr_transform(c: &CompositionMatrix, policy: ZeroPolicy) -> Result<LogRatioMatrix> {
    let m = c.rows.ncols();
    if let ZeroPolicy::Skip = policy {
        return Ok(LogRatioMatrix {
            rows: c.rows.clone(),
            provenance: Provenance::Identity,
            zero_policy: policy,
        });
    }
    if m < 2 {
        return Err(Error::InvalidConfig(
            "log-ratio transform needs at least two cell types".into(),
        ));
    }
    let ZeroPolicy::PseudoCount { delta_frac } = policy else {
        unreachable!()
    };
    let mut out = RowMatrix::zeros(c.len(), m);
    for i in 0..c.len() {
        let row = c.rows.row(i);
        if c.counts[i] == 0 || !row.iter().any(|&v| v > 0.0) {
            return Err(Error::AllZeroRow(i));
        }
        let delta = delta_frac / f64::from(c.counts[i]);
        let zeros = row.iter().filter(|&&v| v <= 0.0).count();
        if zeros as f64 * delta >= 1.0 {
            return Err(Error::InvalidConfig(format!(
                "pseudo-count {delta} on {zeros} zeros leaves no mass in row {i}"
            )));
        }
        out.row_mut(i)
            .copy_from_slice(&clr_row(&replace_zeros(row, delta)));
    }
    Ok(LogRatioMatrix {
        rows: out,
        provenance: Provenance::Transformed,
        zero_policy: policy,
    })
}

impl LogRatioMatrix {
    /// Same layout as the composition CSV, preceded by a `#` provenance line.
    pub fn write_csv<W: Write>(&self, c: &CompositionMatrix, mut sink: W) -> Result<()> {
        writeln!(
            sink,
            "# provenance={}",
            serde_json::to_string(&(self.provenance, self.zero_policy))?
        )?;
        let mut w = csv::Writer::from_writer(sink);
        let mut header = vec!["cell_id".to_string(), "sample".into(), "n_i".into()];
        header.extend(c.registry.names().iter().cloned());
        w.write_record(&header)?;
        for i in 0..self.rows.nrows() {
            let mut rec = vec![
                c.cell_ids[i].clone(),
                c.samples[i].clone(),
                c.counts[i].to_string(),
            ];
            rec.extend(self.rows.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}
