//! Agglomerative hierarchical clustering with single or complete linkage.

use super::squared_distance;
use crate::error::{Error, Result};
use crate::partition::Partition;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Linkage {
    Single,
    Complete,
}

/// Agglomerates from singletons by Euclidean linkage until `k` blocks
/// remain. Merge ties break toward the lexicographically smallest cluster
/// pair.
pub fn hierarchical(x: &[Vec<f64>], linkage: Linkage, k: usize) -> Result<Partition> {
    let n = x.len();
    if n == 0 {
        return Err(Error::Empty("data matrix"));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidParameter {
            name: "k",
            reason: format!("need 1..={n} clusters, got {k}"),
        });
    }
    let dist: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| squared_distance(&x[i], &x[j]).sqrt()).collect())
        .collect();
    // Cluster membership lists, indexed by a stable id.
    let mut clusters: Vec<Option<Vec<usize>>> = (0..n).map(|i| Some(vec![i])).collect();
    let mut active = n;
    while active > k {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..clusters.len() {
            let Some(ca) = &clusters[a] else { continue };
            for b in a + 1..clusters.len() {
                let Some(cb) = &clusters[b] else { continue };
                let mut link = match linkage {
                    Linkage::Single => f64::INFINITY,
                    Linkage::Complete => f64::NEG_INFINITY,
                };
                for &i in ca {
                    for &j in cb {
                        link = match linkage {
                            Linkage::Single => link.min(dist[i][j]),
                            Linkage::Complete => link.max(dist[i][j]),
                        };
                    }
                }
                let better = match best {
                    None => true,
                    Some((bd, _, _)) => link < bd,
                };
                if better {
                    best = Some((link, a, b));
                }
            }
        }
        let (_, a, b) = best.expect("at least two active clusters");
        let cb = clusters[b].take().expect("b is active");
        clusters[a].as_mut().expect("a is active").extend(cb);
        active -= 1;
    }
    let mut raw = vec![0u32; n];
    let mut next = 0u32;
    for c in clusters.iter().flatten() {
        for &i in c {
            raw[i] = next;
        }
        next += 1;
    }
    Partition::from_assignment(&raw)
}
