//! Dense row-major matrix used by the clustering code.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowMatrix {
    ncols: usize,
    data: Vec<f64>,
}

impl RowMatrix {
    pub fn new(ncols: usize, data: Vec<f64>) -> Self {
        assert!(ncols > 0, "matrix needs at least one column");
        assert_eq!(
            data.len() % ncols,
            0,
            "data length is not a multiple of ncols"
        );
        Self { ncols, data }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self::new(ncols, vec![0.0; nrows * ncols])
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let ncols = rows.first().map_or(1, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * ncols);
        for r in rows {
            assert_eq!(r.as_ref().len(), ncols, "ragged rows");
            data.extend_from_slice(r.as_ref());
        }
        Self::new(ncols, data)
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.data.len() / self.ncols
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.ncols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// New matrix holding the given rows, in the given order.
    pub fn select(&self, idx: &[usize]) -> RowMatrix {
        let mut data = Vec::with_capacity(idx.len() * self.ncols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        RowMatrix {
            ncols: self.ncols,
            data,
        }
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.ncols];
        let n = self.nrows();
        if n == 0 {
            return mean;
        }
        for r in self.rows() {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        mean
    }

    /// Sum of squared distances of every row to the column means.
    pub fn total_ss(&self) -> f64 {
        let mean = self.column_means();
        self.rows().map(|r| sq_dist(r, &mean)).sum()
    }
}

#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
