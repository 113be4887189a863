//! Monte Carlo significance test for a two-cluster split against a single
//! Gaussian null.

use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{kmeans, KMeansConfig, Partition};
use crate::error::{Error, Result};
use crate::matrix::RowMatrix;
use crate::seed;

/// How sample eigenvalues are floored at the background noise level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Hard,
    #[default]
    Soft,
    /// Sample eigenvalues as they are, with no noise floor.
    Sample,
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hard" => Ok(Self::Hard),
            "soft" => Ok(Self::Soft),
            "sample" => Ok(Self::Sample),
            other => Err(Error::InvalidConfig(format!(
                "unknown sigclust variant {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigClustConfig {
    pub n_sim: usize,
    pub seed: u64,
    pub variant: Variant,
    /// k-means restarts for every 2-means fit, observed and simulated.
    pub restarts: usize,
}

impl SigClustConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            n_sim: 1000,
            seed,
            variant: Variant::Soft,
            restarts: 5,
        }
    }

    pub fn with_n_sim(mut self, n_sim: usize) -> Self {
        self.n_sim = n_sim;
        self
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigClustResult {
    pub ci: f64,
    pub p_value: f64,
    pub n_sim: usize,
    pub variant: Variant,
    pub null_eigenvalues: Vec<f64>,
}

/// Within-cluster SS of a 2-partition over total SS about the grand mean.
pub fn cluster_index(rows: &RowMatrix, two: &Partition) -> Result<f64> {
    if two.k() != 2 {
        return Err(Error::InvalidConfig(format!(
            "cluster index needs k = 2, got {}",
            two.k()
        )));
    }
    if two.len() != rows.nrows() {
        return Err(Error::LengthMismatch {
            left: rows.nrows(),
            right: two.len(),
        });
    }
    let total = rows.total_ss();
    if total <= 0.0 {
        return Err(Error::DegenerateData("total sum of squares is zero".into()));
    }
    let within: f64 = two
        .members()
        .iter()
        .map(|idx| rows.select(idx).total_ss())
        .sum();
    Ok(within / total)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_unstable_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Background noise variance from the MAD of all matrix entries.
pub fn noise_variance(rows: &RowMatrix) -> f64 {
    let mut entries = rows.as_slice().to_vec();
    let med = median(&mut entries);
    let mut dev: Vec<f64> = entries.iter().map(|v| (v - med).abs()).collect();
    let mad = median(&mut dev) / 0.6745;
    mad * mad
}

/// Sample covariance eigenvalues in descending order, clamped at zero.
pub fn covariance_eigenvalues(rows: &RowMatrix) -> Vec<f64> {
    let (n, m) = (rows.nrows(), rows.ncols());
    let mean = rows.column_means();
    let mut cov = DMatrix::<f64>::zeros(m, m);
    for r in rows.rows() {
        for a in 0..m {
            let da = r[a] - mean[a];
            for b in a..m {
                cov[(a, b)] += da * (r[b] - mean[b]);
            }
        }
    }
    let denom = (n.max(2) - 1) as f64;
    for a in 0..m {
        for b in a..m {
            let v = cov[(a, b)] / denom;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    let mut eig: Vec<f64> = SymmetricEigen::new(cov)
        .eigenvalues
        .iter()
        .map(|v| v.max(0.0))
        .collect();
    eig.sort_unstable_by(|a, b| b.total_cmp(a));
    eig
}

/// Floors sample eigenvalues at the noise level.
///
/// The sample variant returns the eigenvalues unchanged.
/// Soft thresholding shifts the eigenvalues down by a common amount before
/// flooring so the total variance is unchanged; when the floor alone already
/// exceeds the total it falls back to hard thresholding.
pub fn null_eigenvalues(eigen: &[f64], noise: f64, variant: Variant) -> Vec<f64> {
    if variant == Variant::Sample {
        return eigen.to_vec();
    }
    let hard: Vec<f64> = eigen.iter().map(|&l| l.max(noise)).collect();
    if variant == Variant::Hard {
        return hard;
    }
    let m = eigen.len();
    let total: f64 = eigen.iter().sum();
    if m as f64 * noise > total {
        return hard;
    }
    let mut sorted = eigen.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let eps = 1e-12 * total.max(noise).max(1e-300);
    let mut head = 0.0;
    for q in 1..=m {
        head += sorted[q - 1];
        let shift = (head + (m - q) as f64 * noise - total) / q as f64;
        let lead_ok = sorted[q - 1] - shift >= noise - eps;
        let tail_ok = q == m || sorted[q] - shift <= noise + eps;
        if shift >= -eps && lead_ok && tail_ok {
            let shift = shift.max(0.0);
            return eigen.iter().map(|&l| (l - shift).max(noise)).collect();
        }
    }
    // Total variance equals the floor exactly.
    vec![noise; m]
}

fn two_means_ci(rows: &RowMatrix, seed: u64, restarts: usize) -> Result<f64> {
    let total = rows.total_ss();
    if total <= 0.0 {
        return Err(Error::DegenerateData("total sum of squares is zero".into()));
    }
    let fit = kmeans(rows, &KMeansConfig::new(2, seed).with_restarts(restarts))?;
    Ok((fit.wcss / total).clamp(0.0, 1.0))
}

/// Tests whether the best 2-means split of `rows` is stronger than a single
/// Gaussian with matched eigenvalues would produce.
pub fn sigclust_test(rows: &RowMatrix, cfg: &SigClustConfig) -> Result<SigClustResult> {
    let (n, m) = (rows.nrows(), rows.ncols());
    if n < 2 {
        return Err(Error::InsufficientRows { needed: 2, got: n });
    }
    if cfg.n_sim == 0 {
        return Err(Error::InvalidConfig("n_sim must be positive".into()));
    }
    let observed = two_means_ci(
        rows,
        seed::derive(cfg.seed, "sigclust:observed", 0),
        cfg.restarts,
    )?;
    let noise = noise_variance(rows);
    let eigen = covariance_eigenvalues(rows);
    let lambda = null_eigenvalues(&eigen, noise, cfg.variant);
    if lambda.iter().all(|&l| l <= 0.0) {
        return Err(Error::DegenerateData("null covariance is zero".into()));
    }
    let sd: Vec<f64> = lambda.iter().map(|l| l.sqrt()).collect();
    let as_small = (0..cfg.n_sim)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed::rng(cfg.seed, "sigclust:null", i as u64);
            let mut data = Vec::with_capacity(n * m);
            for _ in 0..n {
                for s in &sd {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    data.push(s * z);
                }
            }
            let sim = RowMatrix::new(m, data);
            let ci = two_means_ci(
                &sim,
                seed::derive(cfg.seed, "sigclust:null-kmeans", i as u64),
                cfg.restarts,
            );
            // A degenerate null draw cannot beat the observed index.
            Ok(ci.is_ok_and(|ci| ci <= observed))
        })
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .filter(|&b| b)
        .count();
    Ok(SigClustResult {
        ci: observed,
        p_value: (1 + as_small) as f64 / (1 + cfg.n_sim) as f64,
        n_sim: cfg.n_sim,
        variant: cfg.variant,
        null_eigenvalues: lambda,
    })
}
