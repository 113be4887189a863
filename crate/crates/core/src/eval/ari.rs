use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::cluster::Partition;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AriReport {
    pub ari: f64,
    pub n: usize,
    /// Rows index clusters of the first partition, columns the second.
    pub contingency: Vec<Vec<usize>>,
    pub index: f64,
    pub expected: f64,
    pub max: f64,
}

fn pairs(n: usize) -> f64 {
    let n = n as f64;
    n * (n - 1.0) / 2.0
}

/// Hubert–Arabie adjusted Rand index.
pub fn ari(p1: &Partition, p2: &Partition) -> Result<AriReport> {
    if p1.len() != p2.len() {
        return Err(Error::LengthMismatch {
            left: p1.len(),
            right: p2.len(),
        });
    }
    let n = p1.len();
    let mut cells: HashMap<(usize, usize), usize> = HashMap::new();
    for (&a, &b) in p1.labels().iter().zip(p2.labels()) {
        *cells.entry((a, b)).or_insert(0) += 1;
    }
    let mut contingency = vec![vec![0; p2.k()]; p1.k()];
    for (&(a, b), &c) in &cells {
        contingency[a][b] = c;
    }
    let index: f64 = cells.values().map(|&c| pairs(c)).sum();
    let a: f64 = p1.sizes().iter().map(|&s| pairs(s)).sum();
    let b: f64 = p2.sizes().iter().map(|&s| pairs(s)).sum();
    let total = pairs(n);
    let expected = if total > 0.0 { a * b / total } else { 0.0 };
    let max = 0.5 * (a + b);
    let ari = if max == expected {
        // Both partitions trivial in the same way.
        if index == max {
            1.0
        } else {
            0.0
        }
    } else {
        (index - expected) / (max - expected)
    };
    Ok(AriReport {
        ari,
        n,
        contingency,
        index,
        expected,
        max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(labels: &[usize]) -> Partition {
        Partition::from_labels(labels)
    }

    #[test]
    fn identical_is_one() {
        assert_eq!(ari(&p(&[0, 0, 1, 2]), &p(&[5, 5, 3, 4])).unwrap().ari, 1.0);
        assert_eq!(ari(&p(&[0, 0, 0]), &p(&[1, 1, 1])).unwrap().ari, 1.0);
    }

    #[test]
    fn singletons_against_one_cluster() {
        let r = ari(&p(&[0, 1, 2, 3]), &p(&[0, 0, 0, 0])).unwrap();
        assert_eq!((r.index, r.expected), (0.0, 0.0));
        assert_eq!(r.ari, 0.0);
    }

    #[test]
    fn hand_contingency() {
        // Contingency [[2,0],[1,1],[0,2]]: index = 2, a = 3, b = 6, total = 15.
        // expected = 18/15 = 1.2, max = 4.5, ARI = 0.8 / 3.3.
        let r = ari(&p(&[1, 1, 2, 2, 3, 3]), &p(&[1, 1, 1, 2, 2, 2])).unwrap();
        assert_eq!(r.contingency, vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
        assert!((r.ari - 0.8 / 3.3).abs() < 1e-12);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(
            ari(&p(&[0]), &p(&[0, 1])),
            Err(Error::LengthMismatch { .. })
        ));
    }

    proptest! {
        #[test]
        fn symmetric_and_permutation_invariant(
            a in proptest::collection::vec(0usize..4, 2..40),
            seed in proptest::collection::vec(0usize..4, 40),
        ) {
            let b: Vec<usize> = a.iter().zip(&seed).map(|(x, s)| (x + s) % 3).collect();
            let (pa, pb) = (p(&a), p(&b));
            let r1 = ari(&pa, &pb).unwrap().ari;
            let r2 = ari(&pb, &pa).unwrap().ari;
            prop_assert!((r1 - r2).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&r1));
            let relabeled: Vec<usize> = a.iter().map(|x| 10 - x).collect();
            prop_assert!((ari(&p(&relabeled), &pb).unwrap().ari - r1).abs() < 1e-12);
        }
    }
}
