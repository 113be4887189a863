//! Histograms used to pick a disk radius: disk occupancy and k-th neighbor distance.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{disk_occupancy, knn_neighbors, DiskConfig};
use crate::datamodel::Dataset;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bins: Vec<HistogramBin>,
}

impl Histogram {
    /// Equal-width bins of `width` starting at zero; the last bin holds the maximum.
    pub fn with_width(values: &[f64], width: f64) -> Self {
        assert!(width > 0.0);
        let max = values.iter().copied().fold(0.0_f64, f64::max);
        let nbins = (max / width).floor() as usize + 1;
        let mut bins: Vec<HistogramBin> = (0..nbins)
            .map(|b| HistogramBin {
                lower: b as f64 * width,
                upper: (b + 1) as f64 * width,
                count: 0,
            })
            .collect();
        for &v in values {
            let b = ((v.max(0.0) / width).floor() as usize).min(nbins - 1);
            bins[b].count += 1;
        }
        Self { bins }
    }

    /// `nbins` equal-width bins spanning `[0, max]`.
    pub fn with_bins(values: &[f64], nbins: usize) -> Self {
        let max = values.iter().copied().fold(0.0_f64, f64::max);
        let width = if max > 0.0 {
            max / nbins.max(1) as f64
        } else {
            1.0
        };
        let mut h = Self::with_width(values, width);
        // Fold the bin that only holds the exact maximum into its neighbor.
        if h.bins.len() > nbins.max(1) {
            let last = h.bins.pop().unwrap();
            h.bins.last_mut().unwrap().count += last.count;
        }
        h
    }

    pub fn total(&self) -> usize {
        self.bins.iter().map(|b| b.count).sum()
    }

    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["bin_lower", "bin_upper", "count"])?;
        for b in &self.bins {
            w.write_record([
                b.lower.to_string(),
                b.upper.to_string(),
                b.count.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramSpec {
    /// Bin width for disk occupancy counts.
    pub count_bin_width: f64,
    /// Number of bins for k-th neighbor distances.
    pub distance_bins: usize,
}

impl Default for HistogramSpec {
    fn default() -> Self {
        Self {
            count_bin_width: 5.0,
            distance_bins: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodDiagnostics {
    pub disk_counts: Histogram,
    pub kth_distances: Histogram,
    pub max_kth_distance: f64,
    /// Raw per-cell values behind the histograms.
    pub occupancies: Vec<u32>,
    pub kth_distance_values: Vec<f64>,
}

/// Disk occupancies over retained centers and distances to the `k`-th nearest
/// cell over all cells (same scope mode as the disks).
pub fn diagnostics(
    d: &Dataset,
    disk: &DiskConfig,
    k: usize,
    spec: &HistogramSpec,
) -> Result<NeighborhoodDiagnostics> {
    let occupancies = disk_occupancy(d, disk)?;
    let kth: Vec<f64> = knn_neighbors(d, k, disk.scope)?
        .into_iter()
        .map(|(_, nn)| nn.last().map_or(0.0, |p| p.1))
        .collect();
    let occ_f: Vec<f64> = occupancies.iter().map(|&v| f64::from(v)).collect();
    Ok(NeighborhoodDiagnostics {
        disk_counts: Histogram::with_width(&occ_f, spec.count_bin_width),
        kth_distances: Histogram::with_bins(&kth, spec.distance_bins),
        max_kth_distance: kth.iter().copied().fold(0.0, f64::max),
        occupancies,
        kth_distance_values: kth,
    })
}
