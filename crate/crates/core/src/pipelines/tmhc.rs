use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::stm::{child_key, groups_to_partition, two_means_split};
use super::CommunityAssignment;
use crate::cluster::{ward_agglomerate, Dendrogram, Partition, WardLeaf};
use crate::datamodel::Dataset;
use crate::error::{Error, Result};
use crate::matrix::RowMatrix;
use crate::neighborhood::{disk_composition, disk_occupancy, CompositionMatrix, DiskConfig};
use crate::seed;
use crate::sigclust::{sigclust_test, SigClustConfig, Variant};
use crate::transform::{clr_transform, ZeroPolicy};

/// What happens to a Step-2 node whose split is not significant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalNodes {
    /// Emitted as a community and left out of the dendrogram.
    Separate,
    /// Passed to the dendrogram as one weighted leaf, like capped nodes.
    Agglomerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TmhcConfig {
    /// Dendrogram nodes below this size are not tested further.
    pub k1: usize,
    /// Step-2 nodes at or below this size become dendrogram leaves.
    pub size_cap: usize,
    pub alpha: f64,
    pub n_sim: usize,
    pub seed: u64,
    pub transform: ZeroPolicy,
    pub disk: DiskConfig,
    pub variant: Variant,
    /// Each significance test uses at most this many rows, drawn at random.
    pub max_test_rows: Option<usize>,
    pub final_nodes: FinalNodes,
    /// A significant dendrogram split is kept only if both children hold at
    /// least this fraction of all rows.
    pub min_child_fraction: f64,
    pub restarts: usize,
}

impl TmhcConfig {
    pub fn new(r: f64, seed: u64) -> Self {
        Self {
            k1: 0,
            size_cap: 60_000,
            alpha: 0.05,
            n_sim: 1000,
            seed,
            transform: ZeroPolicy::HALF_COUNT,
            disk: DiskConfig::new(r),
            variant: Variant::Soft,
            max_test_rows: None,
            final_nodes: FinalNodes::Separate,
            min_child_fraction: 0.0,
            restarts: 10,
        }
    }

    /// Settings used for synthetic tissue: raw compositions, whole-region
    /// disks, small Step-2 leaves, subsampled tests against the sample
    /// covariance null, and capped leaves and finals merged by Ward alike.
    pub fn simulation(r: f64, seed: u64) -> Self {
        Self {
            size_cap: 1000,
            n_sim: 200,
            transform: ZeroPolicy::Skip,
            disk: DiskConfig::unbounded(r),
            variant: Variant::Sample,
            max_test_rows: Some(1000),
            final_nodes: FinalNodes::Agglomerate,
            min_child_fraction: 0.005,
            ..Self::new(r, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.size_cap < 2 {
            return Err(Error::InvalidConfig(format!(
                "size_cap must be at least 2, got {}",
                self.size_cap
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig(format!(
                "alpha {} outside [0, 1]",
                self.alpha
            )));
        }
        if self.n_sim == 0 {
            return Err(Error::InvalidConfig("n_sim must be positive".into()));
        }
        if !(0.0..0.5).contains(&self.min_child_fraction) {
            return Err(Error::InvalidConfig(format!(
                "min_child_fraction {} outside [0, 0.5)",
                self.min_child_fraction
            )));
        }
        if matches!(self.max_test_rows, Some(m) if m < 2) {
            return Err(Error::InvalidConfig(
                "max_test_rows must be at least 2".into(),
            ));
        }
        self.disk.validate()
    }
}

/// Bookkeeping from one run of Steps 2 and 3.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TmhcTrace {
    pub step2_leaves: usize,
    pub step2_final: usize,
    pub tests: usize,
    pub dendrogram_leaves: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TmhcOutcome {
    pub partition: Partition,
    pub trace: TmhcTrace,
    pub dendrogram: Option<Dendrogram>,
}

/// True when the node's best split beats the single-Gaussian null.
/// Degenerate nodes (no spread) are never split.
fn significant(rows: &RowMatrix, idx: &[usize], key: u64, cfg: &TmhcConfig) -> Result<bool> {
    if cfg.alpha <= 0.0 || idx.len() < 2 {
        return Ok(false);
    }
    let chosen: Vec<usize> = match cfg.max_test_rows {
        Some(cap) if idx.len() > cap => {
            let mut rng = seed::rng(key, "tmhc:subsample", 0);
            let mut pick = sample(&mut rng, idx.len(), cap).into_vec();
            pick.sort_unstable();
            pick.into_iter().map(|i| idx[i]).collect()
        }
        _ => idx.to_vec(),
    };
    let test_cfg = SigClustConfig {
        n_sim: cfg.n_sim,
        seed: seed::derive(key, "tmhc:sigclust", 0),
        variant: cfg.variant,
        restarts: 5,
    };
    match sigclust_test(&rows.select(&chosen), &test_cfg) {
        Ok(r) => Ok(r.p_value < cfg.alpha),
        Err(Error::DegenerateData(_)) => Ok(false),
        Err(e) => Err(e),
    }
}

enum Node {
    Leaf(Vec<usize>),
    Final(Vec<usize>),
}

struct Step2 {
    nodes: Vec<Node>,
    tests: usize,
}

fn step2(rows: &RowMatrix, idx: Vec<usize>, key: u64, cfg: &TmhcConfig) -> Result<Step2> {
    if idx.len() <= cfg.size_cap {
        return Ok(Step2 {
            nodes: vec![Node::Leaf(idx)],
            tests: 0,
        });
    }
    if !significant(rows, &idx, key, cfg)? {
        return Ok(Step2 {
            nodes: vec![Node::Final(idx)],
            tests: 1,
        });
    }
    let (a, b) = two_means_split(rows, &idx, key, cfg.restarts)?;
    let (left, right) = rayon::join(
        || step2(rows, a, child_key(key, 0), cfg),
        || step2(rows, b, child_key(key, 1), cfg),
    );
    let (mut left, right) = (left?, right?);
    left.nodes.extend(right.nodes);
    left.tests += right.tests + 1;
    Ok(left)
}

fn step3(
    rows: &RowMatrix,
    tree: &Dendrogram,
    node: usize,
    min_child: f64,
    cfg: &TmhcConfig,
) -> Result<(Vec<Vec<usize>>, usize)> {
    let members = tree.members(node);
    let Some((a, b)) = tree.children(node) else {
        return Ok((vec![members], 0));
    };
    if (tree.weight(node) as usize) < cfg.k1 || tree.weight(a).min(tree.weight(b)) < min_child {
        return Ok((vec![members], 0));
    }
    let key = seed::derive(cfg.seed, "tmhc:step3", node as u64);
    if !significant(rows, &members, key, cfg)? {
        return Ok((vec![members], 1));
    }
    let (left, right) = rayon::join(
        || step3(rows, tree, a, min_child, cfg),
        || step3(rows, tree, b, min_child, cfg),
    );
    let (mut left, right) = (left?, right?);
    left.0.extend(right.0);
    Ok((left.0, left.1 + right.1 + 1))
}

/// Steps 2 and 3 on already transformed rows.
pub fn tmhc(rows: &RowMatrix, cfg: &TmhcConfig) -> Result<TmhcOutcome> {
    cfg.validate()?;
    if rows.nrows() == 0 {
        return Err(Error::EmptyInput);
    }
    let s2 = step2(
        rows,
        (0..rows.nrows()).collect(),
        seed::derive(cfg.seed, "tmhc:step2", 0),
        cfg,
    )?;
    let mut communities: Vec<Vec<usize>> = Vec::new();
    let mut leaves = Vec::new();
    let (mut n_leaf, mut n_final) = (0, 0);
    for node in s2.nodes {
        let (idx, is_final) = match node {
            Node::Leaf(idx) => (idx, false),
            Node::Final(idx) => (idx, true),
        };
        if is_final {
            n_final += 1;
        } else {
            n_leaf += 1;
        }
        if is_final && cfg.final_nodes == FinalNodes::Separate {
            communities.push(idx);
        } else {
            let centroid = rows.select(&idx).column_means();
            leaves.push(WardLeaf::new(centroid, idx.len() as f64, idx));
        }
    }
    let mut tests = s2.tests;
    let dendrogram_leaves = leaves.len();
    let dendrogram = if leaves.is_empty() {
        None
    } else {
        let tree = ward_agglomerate(leaves)?;
        let min_child = cfg.min_child_fraction * rows.nrows() as f64;
        let (emitted, t) = step3(rows, &tree, tree.root(), min_child, cfg)?;
        tests += t;
        communities.extend(emitted);
        Some(tree)
    };
    Ok(TmhcOutcome {
        partition: groups_to_partition(rows.nrows(), &communities),
        trace: TmhcTrace {
            step2_leaves: n_leaf,
            step2_final: n_final,
            tests,
            dendrogram_leaves,
        },
        dendrogram,
    })
}

/// Median disk occupancy at radius `r`.
pub fn median_occupancy(d: &Dataset, disk: &DiskConfig) -> Result<f64> {
    let mut occ = disk_occupancy(d, disk)?;
    occ.sort_unstable();
    Ok(if occ.is_empty() {
        0.0
    } else {
        f64::from(occ[occ.len() / 2])
    })
}

/// Median occupancy targeted when choosing a radius for synthetic tissue.
pub const SIM_OCCUPANCY: f64 = 40.0;

/// Radius whose median disk occupancy is close to `target`, searched by
/// rescaling with the square-root law and then bisection.
pub fn auto_radius(d: &Dataset, template: &DiskConfig, target: f64) -> Result<f64> {
    if d.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for c in d.cells() {
        x0 = x0.min(c.x);
        y0 = y0.min(c.y);
        x1 = x1.max(c.x);
        y1 = y1.max(c.y);
    }
    let area = ((x1 - x0) * (y1 - y0)).max(1.0);
    let mut r = (target * area / (std::f64::consts::PI * d.len() as f64))
        .sqrt()
        .max(1e-6);
    let occupancy = |r: f64| median_occupancy(d, &DiskConfig { r, ..*template });
    let (mut lo, mut hi) = (None::<f64>, None::<f64>);
    for _ in 0..40 {
        let med = occupancy(r)?;
        if (med - target).abs() <= 0.1 * target {
            return Ok(r);
        }
        if med < target {
            lo = Some(r);
        } else {
            hi = Some(r);
        }
        r = match (lo, hi) {
            (Some(a), Some(b)) => 0.5 * (a + b),
            _ => r * (target / med.max(1.0)).sqrt().clamp(0.25, 4.0),
        };
    }
    Ok(r)
}

/// Step 1 (disk compositions and the configured transform) followed by
/// Steps 2 and 3.
pub fn dcd_tmhc(
    d: &Dataset,
    cfg: &TmhcConfig,
) -> Result<(CompositionMatrix, CommunityAssignment, TmhcTrace)> {
    cfg.validate()?;
    let comp = disk_composition(d, &cfg.disk)?;
    let rows = clr_transform(&comp, cfg.transform)?.rows;
    let out = tmhc(&rows, cfg)?;
    let mut config = serde_json::to_value(cfg)?;
    config["trace"] = serde_json::to_value(&out.trace)?;
    let assignment =
        CommunityAssignment::for_rows(&comp, "dcd-tmhc", out.partition.labels().to_vec(), config)?;
    Ok((comp, assignment, out.trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::{CellRecord, CellTypeRegistry};
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian_rows(n: usize, m: usize, seed: u64) -> RowMatrix {
        let mut rng = seed::rng(seed, "test:tmhc", 0);
        RowMatrix::new(
            m,
            (0..n * m)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect(),
        )
    }

    fn small(seed: u64) -> TmhcConfig {
        TmhcConfig {
            size_cap: 50,
            n_sim: 100,
            ..TmhcConfig::new(1.0, seed)
        }
    }

    #[test]
    fn alpha_zero_gives_one_community() {
        let rows = gaussian_rows(300, 3, 1);
        for final_nodes in [FinalNodes::Separate, FinalNodes::Agglomerate] {
            let out = tmhc(
                &rows,
                &TmhcConfig {
                    alpha: 0.0,
                    final_nodes,
                    ..small(2)
                },
            )
            .unwrap();
            assert_eq!(out.partition.k(), 1);
        }
    }

    #[test]
    fn identical_rows_give_one_community() {
        let rows = RowMatrix::from_rows(&vec![[0.2, 0.8]; 200]);
        assert_eq!(tmhc(&rows, &small(3)).unwrap().partition.k(), 1);
    }

    #[test]
    fn single_gaussian_usually_one_community() {
        let ones = (0..10)
            .filter(|&s| {
                tmhc(&gaussian_rows(200, 3, s), &small(s))
                    .unwrap()
                    .partition
                    .k()
                    == 1
            })
            .count();
        assert!(ones >= 8, "{ones}");
    }

    #[test]
    fn separated_groups_are_found() {
        let mut rows = Vec::new();
        let mut rng = seed::rng(4, "test:tmhc-groups", 0);
        for c in 0..3 {
            for _ in 0..150 {
                let z: f64 = StandardNormal.sample(&mut rng);
                let w: f64 = StandardNormal.sample(&mut rng);
                rows.push([10.0 * c as f64 + z, w]);
            }
        }
        let rows = RowMatrix::from_rows(&rows);
        for final_nodes in [FinalNodes::Separate, FinalNodes::Agglomerate] {
            let out = tmhc(
                &rows,
                &TmhcConfig {
                    final_nodes,
                    ..small(5)
                },
            )
            .unwrap();
            let truth = Partition::new((0..450).map(|i| i / 150).collect(), 3).unwrap();
            assert_eq!(out.partition.k(), 3, "{:?}", out.trace);
            assert!(crate::eval::ari(&out.partition, &truth).unwrap().ari > 0.98);
        }
    }

    #[test]
    fn deterministic_and_covering() {
        let rows = gaussian_rows(400, 2, 7);
        let cfg = TmhcConfig {
            alpha: 0.5,
            ..small(8)
        };
        let a = tmhc(&rows, &cfg).unwrap();
        let b = tmhc(&rows, &cfg).unwrap();
        assert_eq!(a.partition, b.partition);
        assert_eq!(a.partition.len(), 400);
        assert_eq!(a.partition.sizes().iter().sum::<usize>(), 400);
    }

    #[test]
    fn k1_stops_descent() {
        let rows = gaussian_rows(400, 2, 7);
        let cfg = TmhcConfig {
            alpha: 1.0,
            k1: 10_000,
            final_nodes: FinalNodes::Agglomerate,
            ..small(8)
        };
        // Step 2 still splits (alpha = 1 rejects everything); Step 3 stops at the root.
        assert_eq!(tmhc(&rows, &cfg).unwrap().partition.k(), 1);
    }

    #[test]
    fn dataset_pipeline_and_auto_radius() {
        let reg = CellTypeRegistry::new(vec!["a".into(), "b".into()]).unwrap();
        let mut rng = seed::rng(1, "test:tmhc-cells", 0);
        let cells: Vec<CellRecord> = (0..800)
            .map(|i| {
                let left = i < 400;
                CellRecord {
                    cell_id: format!("c{i}"),
                    sample_id: "s".into(),
                    fov_id: None,
                    x: rng.gen_range(0.0..100.0) + if left { 0.0 } else { 200.0 },
                    y: rng.gen_range(0.0..100.0),
                    cell_type: usize::from(!left),
                }
            })
            .collect();
        let d = Dataset::new(cells, reg).unwrap();
        let r = auto_radius(&d, &DiskConfig::unbounded(1.0), 20.0).unwrap();
        let med = median_occupancy(&d, &DiskConfig::unbounded(r)).unwrap();
        assert!((18.0..=22.0).contains(&med), "{r} {med}");
        let cfg = TmhcConfig {
            disk: DiskConfig::unbounded(r),
            transform: ZeroPolicy::Skip,
            ..small(3)
        };
        let (comp, a, _) = dcd_tmhc(&d, &cfg).unwrap();
        assert_eq!(a.len(), comp.len());
        assert_eq!(a.n_communities, 2);
        assert_eq!(a.manifest().seed, Some(3));
    }
}
