use serde::{Deserialize, Serialize};

use crate::cluster::{kmeans, KMeansConfig, Partition};
use crate::error::{Error, Result};
use crate::matrix::RowMatrix;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StmConfig {
    /// Nodes smaller than this are not split.
    pub k1: usize,
    /// A split is kept only if both children reach this size.
    pub k2: usize,
    pub seed: u64,
    pub restarts: usize,
}

impl StmConfig {
    pub fn new(k1: usize, k2: usize, seed: u64) -> Self {
        Self {
            k1,
            k2,
            seed,
            restarts: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k1 < 2 || self.k2 < 1 {
            return Err(Error::InvalidConfig(format!(
                "STM needs K1 >= 2 and K2 >= 1, got {} and {}",
                self.k1, self.k2
            )));
        }
        Ok(())
    }
}

/// Child key for a node path; the tree's randomness depends only on the path.
pub(crate) fn child_key(key: u64, side: u64) -> u64 {
    seed::derive(key, "pipelines:child", side)
}

/// Splits `idx` by 2-means, children ordered by their smallest row index.
pub(crate) fn two_means_split(
    rows: &RowMatrix,
    idx: &[usize],
    key: u64,
    restarts: usize,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let sub = rows.select(idx);
    let fit = kmeans(
        &sub,
        &KMeansConfig::new(2, seed::derive(key, "pipelines:2means", 0)).with_restarts(restarts),
    )?;
    let first = fit.partition.labels()[0];
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (&i, &l) in idx.iter().zip(fit.partition.labels()) {
        if l == first {
            a.push(i);
        } else {
            b.push(i);
        }
    }
    Ok((a, b))
}

fn recurse(
    rows: &RowMatrix,
    idx: Vec<usize>,
    key: u64,
    cfg: &StmConfig,
) -> Result<Vec<Vec<usize>>> {
    if idx.len() < cfg.k1 || idx.len() < 2 {
        return Ok(vec![idx]);
    }
    let (a, b) = two_means_split(rows, &idx, key, cfg.restarts)?;
    if a.len() < cfg.k2 || b.len() < cfg.k2 {
        return Ok(vec![idx]);
    }
    let (left, right) = rayon::join(
        || recurse(rows, a, child_key(key, 0), cfg),
        || recurse(rows, b, child_key(key, 1), cfg),
    );
    let mut out = left?;
    out.extend(right?);
    Ok(out)
}

/// Successive 2-means: split recursively until a node is smaller than K1 or
/// a split would leave a child smaller than K2. Communities are numbered in
/// depth-first order.
pub fn stm(rows: &RowMatrix, cfg: &StmConfig) -> Result<Partition> {
    cfg.validate()?;
    if rows.nrows() == 0 {
        return Err(Error::EmptyInput);
    }
    let groups = recurse(
        rows,
        (0..rows.nrows()).collect(),
        seed::derive(cfg.seed, "stm:root", 0),
        cfg,
    )?;
    Ok(groups_to_partition(rows.nrows(), &groups))
}

pub(crate) fn groups_to_partition(n: usize, groups: &[Vec<usize>]) -> Partition {
    let mut labels = vec![usize::MAX; n];
    for (c, g) in groups.iter().enumerate() {
        for &i in g {
            labels[i] = c;
        }
    }
    Partition::new(labels, groups.len()).expect("groups cover all rows")
}
