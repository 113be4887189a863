use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::sq_dist;

/// A starting group for agglomeration: its centroid, weight, and member rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WardLeaf {
    pub centroid: Vec<f64>,
    pub weight: f64,
    pub members: Vec<usize>,
}

impl WardLeaf {
    pub fn new(centroid: Vec<f64>, weight: f64, members: Vec<usize>) -> Self {
        Self {
            centroid,
            weight,
            members,
        }
    }

    /// Unit-weight leaf for a single row.
    pub fn point(row: &[f64], id: usize) -> Self {
        Self {
            centroid: row.to_vec(),
            weight: 1.0,
            members: vec![id],
        }
    }
}

/// One agglomeration step; `node_a < node_b`, the new node id is
/// `n_leaves + step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub node_a: usize,
    pub node_b: usize,
    pub height: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub leaves: Vec<WardLeaf>,
    pub merges: Vec<Merge>,
}

/// Increase in error sum of squares from merging two groups.
pub fn ward_cost(ca: &[f64], wa: f64, cb: &[f64], wb: f64) -> f64 {
    wa * wb / (wa + wb) * sq_dist(ca, cb)
}

impl Dendrogram {
    pub fn n_leaves(&self) -> usize {
        self.leaves.len()
    }

    pub fn root(&self) -> usize {
        self.leaves.len() + self.merges.len() - 1
    }

    pub fn children(&self, node: usize) -> Option<(usize, usize)> {
        let n = self.leaves.len();
        (node >= n).then(|| {
            let m = &self.merges[node - n];
            (m.node_a, m.node_b)
        })
    }

    pub fn height(&self, node: usize) -> f64 {
        let n = self.leaves.len();
        if node < n {
            0.0
        } else {
            self.merges[node - n].height
        }
    }

    pub fn weight(&self, node: usize) -> f64 {
        let n = self.leaves.len();
        if node < n {
            self.leaves[node].weight
        } else {
            self.merges[node - n].weight
        }
    }

    /// Leaf indices under `node`, in left-to-right order.
    pub fn leaf_indices(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(v) = stack.pop() {
            match self.children(v) {
                Some((a, b)) => {
                    stack.push(b);
                    stack.push(a);
                }
                None => out.push(v),
            }
        }
        out
    }

    /// Member row ids under `node`.
    pub fn members(&self, node: usize) -> Vec<usize> {
        self.leaf_indices(node)
            .into_iter()
            .flat_map(|l| self.leaves[l].members.iter().copied())
            .collect()
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    cost: f64,
    lo: usize,
    hi: usize,
}

impl Candidate {
    fn new(cost: f64, i: usize, j: usize) -> Self {
        Self {
            cost,
            lo: i.min(j),
            hi: i.max(j),
        }
    }

    fn cmp(&self, other: &Self) -> Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then(self.lo.cmp(&other.lo))
            .then(self.hi.cmp(&other.hi))
    }

    fn partner(&self, i: usize) -> usize {
        if self.lo == i {
            self.hi
        } else {
            self.lo
        }
    }
}

/// Greedy Ward agglomeration over weighted groups.
///
/// Each step merges the active pair with the smallest ESS increase, ties going
/// to the lexicographically smallest node pair. Nearest neighbours are cached
/// and refreshed only when a node's partner disappears.
pub fn ward_agglomerate(leaves: Vec<WardLeaf>) -> Result<Dendrogram> {
    let n = leaves.len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let dim = leaves[0].centroid.len();
    for l in &leaves {
        if l.centroid.len() != dim {
            return Err(Error::LengthMismatch {
                left: dim,
                right: l.centroid.len(),
            });
        }
        if !(l.weight >= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "leaf weight {} below 1",
                l.weight
            )));
        }
    }
    let total = 2 * n - 1;
    let mut centroid: Vec<Vec<f64>> = Vec::with_capacity(total);
    let mut weight: Vec<f64> = Vec::with_capacity(total);
    for l in &leaves {
        centroid.push(l.centroid.clone());
        weight.push(l.weight);
    }
    let mut active: Vec<usize> = (0..n).collect();
    let mut nn: Vec<Option<Candidate>> = vec![None; total];

    let best_for =
        |i: usize, active: &[usize], centroid: &[Vec<f64>], weight: &[f64]| -> Option<Candidate> {
            let mut best: Option<Candidate> = None;
            for &j in active {
                if j == i {
                    continue;
                }
                let c = Candidate::new(
                    ward_cost(&centroid[i], weight[i], &centroid[j], weight[j]),
                    i,
                    j,
                );
                if best.is_none_or(|b| c.cmp(&b) == Ordering::Less) {
                    best = Some(c);
                }
            }
            best
        };
    for &i in &active {
        nn[i] = best_for(i, &active, &centroid, &weight);
    }

    let mut merges = Vec::with_capacity(n - 1);
    for step in 0..n - 1 {
        let pick = active
            .iter()
            .filter_map(|&i| nn[i])
            .min_by(|a, b| a.cmp(b))
            .expect("at least two active nodes");
        let (a, b) = (pick.lo, pick.hi);
        let c = n + step;
        let (wa, wb) = (weight[a], weight[b]);
        let w = wa + wb;
        let merged: Vec<f64> = centroid[a]
            .iter()
            .zip(&centroid[b])
            .map(|(x, y)| (wa * x + wb * y) / w)
            .collect();
        centroid.push(merged);
        weight.push(w);
        merges.push(Merge {
            node_a: a,
            node_b: b,
            height: pick.cost,
            weight: w,
        });

        active.retain(|&i| i != a && i != b);
        for idx in 0..active.len() {
            let i = active[idx];
            let stale = nn[i].is_none_or(|cand| {
                let p = cand.partner(i);
                p == a || p == b
            });
            if stale {
                active.push(c);
                nn[i] = best_for(i, &active, &centroid, &weight);
                active.pop();
            } else {
                let cand =
                    Candidate::new(ward_cost(&centroid[i], weight[i], &centroid[c], w), i, c);
                if cand.cmp(&nn[i].unwrap()) == Ordering::Less {
                    nn[i] = Some(cand);
                }
            }
        }
        active.push(c);
        nn[c] = best_for(c, &active, &centroid, &weight);
    }
    Ok(Dendrogram { leaves, merges })
}
