//! Point sets with per-feature missingness, label functions, and the
//! decomposition into missingness groups.
//!
//! Points sharing a label and an observed-feature set form a group; all
//! likelihood computations work on per-group sample means and scatter
//! matrices so that missing entries never enter the math.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Maximum supported dimensionality (feature masks are stored as `u128`).
pub const MAX_FEATURES: usize = 128;

/// A finite set of points in `R^d`, each with an observed-feature mask.
///
/// Masked-out (missing) entries are ignored by all downstream math
/// regardless of their stored value.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    data: Vec<f64>,       // row-major n x d
    masks: Vec<u128>,     // bit j set = feature j observed
    n: usize,
    d: usize,
}

impl PointSet {
    /// Builds a point set with explicit observation masks.
    pub fn new(points: Vec<Vec<f64>>, observed: Vec<Vec<bool>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Empty("point set"));
        }
        if points.len() != observed.len() {
            return Err(Error::DimensionMismatch {
                what: "observation masks",
                expected: points.len(),
                found: observed.len(),
            });
        }
        let d = points[0].len();
        if d == 0 {
            return Err(Error::Empty("point dimension"));
        }
        if d > MAX_FEATURES {
            return Err(Error::InvalidParameter {
                name: "d",
                reason: format!("at most {MAX_FEATURES} features supported, got {d}"),
            });
        }
        let n = points.len();
        let mut data = Vec::with_capacity(n * d);
        let mut masks = Vec::with_capacity(n);
        for (row, mask) in points.iter().zip(&observed) {
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    what: "point",
                    expected: d,
                    found: row.len(),
                });
            }
            if mask.len() != d {
                return Err(Error::DimensionMismatch {
                    what: "mask",
                    expected: d,
                    found: mask.len(),
                });
            }
            data.extend_from_slice(row);
            let mut bits = 0u128;
            for (j, &obs) in mask.iter().enumerate() {
                if obs {
                    bits |= 1 << j;
                }
            }
            masks.push(bits);
        }
        Ok(Self { data, masks, n, d })
    }

    /// Builds a fully observed point set.
    pub fn complete(points: Vec<Vec<f64>>) -> Result<Self> {
        let masks = points.iter().map(|p| vec![true; p.len()]).collect();
        Self::new(points, masks)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Raw coordinates of point `i` (including values at missing entries).
    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    /// Observed-feature bitmask of point `i` (bit `j` = feature `j` observed).
    pub fn mask(&self, i: usize) -> u128 {
        self.masks[i]
    }

    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.masks[i] >> j & 1 == 1
    }

    /// Indices of observed features of point `i`, ascending.
    pub fn observed_features(&self, i: usize) -> Vec<usize> {
        (0..self.d).filter(|&j| self.is_observed(i, j)).collect()
    }

    /// True if any entry of any point is missing.
    pub fn has_missing(&self) -> bool {
        let full = full_mask(self.d);
        self.masks.iter().any(|&m| m != full)
    }

    /// Fraction of missing entries over all `n * d` cells.
    pub fn missing_fraction(&self) -> f64 {
        let missing: u32 = self
            .masks
            .iter()
            .map(|m| self.d as u32 - m.count_ones())
            .sum();
        missing as f64 / (self.n * self.d) as f64
    }

    /// Returns a point set with the given rows (masks carried along).
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Empty("subset"));
        }
        let mut data = Vec::with_capacity(indices.len() * self.d);
        let mut masks = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(self.point(i));
            masks.push(self.masks[i]);
        }
        Ok(Self {
            data,
            masks,
            n: indices.len(),
            d: self.d,
        })
    }

    /// Rows as vectors, with missing entries replaced by `fill`.
    pub fn to_matrix_filled(&self, fill: f64) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| {
                (0..self.d)
                    .map(|j| {
                        if self.is_observed(i, j) {
                            self.point(i)[j]
                        } else {
                            fill
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

pub(crate) fn full_mask(d: usize) -> u128 {
    if d == 128 {
        u128::MAX
    } else {
        (1u128 << d) - 1
    }
}

/// An assignment of each point to a label in `0..l`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelFunction {
    labels: Vec<u32>,
    l: usize,
}

impl LabelFunction {
    pub fn new(labels: Vec<u32>, l: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Empty("label function"));
        }
        if l == 0 {
            return Err(Error::InvalidParameter {
                name: "l",
                reason: "need at least one label".into(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&v| v as usize >= l) {
            return Err(Error::InvalidParameter {
                name: "labels",
                reason: format!("label {bad} out of range 0..{l}"),
            });
        }
        Ok(Self { labels, l })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Size of the label alphabet.
    pub fn num_labels(&self) -> usize {
        self.l
    }

    pub fn label(&self, i: usize) -> u32 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Count of points carrying each label.
    pub fn label_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.l];
        for &v in &self.labels {
            counts[v as usize] += 1;
        }
        counts
    }
}

/// Fraction of positions at which two label functions disagree (raw labels,
/// no permutation minimization).
pub fn label_mismatch_error(truth: &LabelFunction, predicted: &LabelFunction) -> Result<f64> {
    if truth.len() != predicted.len() {
        return Err(Error::DimensionMismatch {
            what: "label function",
            expected: truth.len(),
            found: predicted.len(),
        });
    }
    let mismatches = truth
        .labels
        .iter()
        .zip(&predicted.labels)
        .filter(|(a, b)| a != b)
        .count();
    Ok(mismatches as f64 / truth.len() as f64)
}

/// The points of one label sharing one observed-feature set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MissingnessGroup {
    /// Cluster index the group belongs to.
    pub label: usize,
    /// Ascending indices of the observed features (empty = fully missing).
    pub observed_features: Vec<usize>,
    /// Point indices in the group.
    pub member_indices: Vec<usize>,
}

impl MissingnessGroup {
    pub fn size(&self) -> usize {
        self.member_indices.len()
    }

    /// Number of observed features shared by the group.
    pub fn observed_dim(&self) -> usize {
        self.observed_features.len()
    }

    /// Groups with no observed features contribute a likelihood factor of 1
    /// and are excluded from all density computations.
    pub fn is_fully_missing(&self) -> bool {
        self.observed_features.is_empty()
    }
}

/// Partitions the points of each label by their observed-feature set.
///
/// Groups are returned ordered by (label, feature mask); the grouping is
/// unique, so the output is independent of point order up to member lists,
/// which are ascending.
pub fn decompose_groups(s: &PointSet, phi: &LabelFunction) -> Result<Vec<MissingnessGroup>> {
    if phi.len() != s.len() {
        return Err(Error::DimensionMismatch {
            what: "label function",
            expected: s.len(),
            found: phi.len(),
        });
    }
    let mut buckets: std::collections::BTreeMap<(u32, u128), Vec<usize>> =
        std::collections::BTreeMap::new();
    for i in 0..s.len() {
        buckets.entry((phi.label(i), s.mask(i))).or_default().push(i);
    }
    Ok(buckets
        .into_iter()
        .map(|((label, mask), members)| MissingnessGroup {
            label: label as usize,
            observed_features: (0..s.dim()).filter(|&j| mask >> j & 1 == 1).collect(),
            member_indices: members,
        })
        .collect())
}

/// Sample mean and scatter matrix of a group over its observed features.
///
/// The scatter matrix is the uncentered-by-n sum of outer products around
/// the mean, computed in two passes.
pub fn group_statistics(group: &MissingnessGroup, s: &PointSet) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if group.member_indices.is_empty() {
        return Err(Error::Empty("missingness group"));
    }
    if group.is_fully_missing() {
        return Err(Error::Empty("observed features of group"));
    }
    let dg = group.observed_dim();
    let n = group.size() as f64;
    let mut mean = DVector::zeros(dg);
    for &i in &group.member_indices {
        let row = s.point(i);
        for (k, &j) in group.observed_features.iter().enumerate() {
            mean[k] += row[j];
        }
    }
    mean /= n;
    let mut scatter = DMatrix::zeros(dg, dg);
    let mut centered = DVector::zeros(dg);
    for &i in &group.member_indices {
        let row = s.point(i);
        for (k, &j) in group.observed_features.iter().enumerate() {
            centered[k] = row[j] - mean[k];
        }
        scatter.ger(1.0, &centered, &centered, 1.0);
    }
    Ok((mean, scatter))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn masked(points: Vec<Vec<f64>>, observed: Vec<Vec<bool>>) -> PointSet {
        PointSet::new(points, observed).unwrap()
    }

    #[test]
    fn grouping_by_definition() {
        // masks {0,1},{0,1},{0}; all one label -> two groups.
        let s = masked(
            vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 9.9]],
            vec![vec![true, true], vec![true, true], vec![true, false]],
        );
        let phi = LabelFunction::new(vec![0, 0, 0], 1).unwrap();
        let groups = decompose_groups(&s, &phi).unwrap();
        assert_eq!(groups.len(), 2);
        let with_both: Vec<_> = groups.iter().filter(|g| g.observed_dim() == 2).collect();
        assert_eq!(with_both.len(), 1);
        assert_eq!(with_both[0].member_indices, vec![0, 1]);
        let single = groups.iter().find(|g| g.observed_dim() == 1).unwrap();
        assert_eq!(single.observed_features, vec![0]);
        assert_eq!(single.member_indices, vec![2]);
    }

    #[test]
    fn complete_data_one_group_per_label() {
        let s = PointSet::complete(vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0]]).unwrap();
        let phi = LabelFunction::new(vec![0, 1, 1], 2).unwrap();
        let groups = decompose_groups(&s, &phi).unwrap();
        assert_eq!(groups.len(), 2);
        assert!(groups.iter().all(|g| g.observed_dim() == 2));
        assert_eq!(groups[0].label, 0);
        assert_eq!(groups[1].label, 1);
        assert_eq!(groups[1].member_indices, vec![1, 2]);
    }

    #[test]
    fn grouping_matches_hash_oracle() {
        // Independent oracle: hash each point by (label, mask vector) and
        // compare the resulting group structure.
        let mut rng_state = 0x1234_5678_u64;
        let mut next = move || {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (rng_state >> 33) as usize
        };
        let d = 3;
        let n = 6;
        let labels = vec![0u32, 0, 1, 1, 1, 1];
        let points: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64, 2.0 * i as f64, -(i as f64)]).collect();
        let observed: Vec<Vec<bool>> = (0..n)
            .map(|_| (0..d).map(|_| next() % 2 == 0).collect())
            .collect();
        let s = masked(points, observed.clone());
        let phi = LabelFunction::new(labels.clone(), 2).unwrap();
        let groups = decompose_groups(&s, &phi).unwrap();

        let mut oracle: std::collections::HashMap<(u32, Vec<bool>), Vec<usize>> = Default::default();
        for i in 0..n {
            oracle.entry((labels[i], observed[i].clone())).or_default().push(i);
        }
        assert_eq!(groups.len(), oracle.len());
        for g in &groups {
            let key_mask: Vec<bool> = (0..d).map(|j| g.observed_features.contains(&j)).collect();
            assert_eq!(oracle[&(g.label as u32, key_mask)], g.member_indices);
        }
        // Members of a group all share the same mask.
        for g in &groups {
            let m0 = s.mask(g.member_indices[0]);
            assert!(g.member_indices.iter().all(|&i| s.mask(i) == m0));
        }
    }

    #[test]
    fn single_point_scatter_is_zero() {
        let s = masked(
            vec![vec![7.0, 0.0, -2.0]],
            vec![vec![true, false, true]],
        );
        let phi = LabelFunction::new(vec![0], 1).unwrap();
        let groups = decompose_groups(&s, &phi).unwrap();
        let (m, psi) = group_statistics(&groups[0], &s).unwrap();
        assert_eq!(m.as_slice(), &[7.0, -2.0]);
        assert_eq!(psi, DMatrix::zeros(2, 2));
    }

    #[test]
    fn scalar_scatter_hand_computed() {
        let s = PointSet::complete(vec![vec![1.0], vec![3.0]]).unwrap();
        let phi = LabelFunction::new(vec![0, 0], 1).unwrap();
        let groups = decompose_groups(&s, &phi).unwrap();
        let (m, psi) = group_statistics(&groups[0], &s).unwrap();
        assert!((m[0] - 2.0).abs() < 1e-15);
        assert!((psi[(0, 0)] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn statistics_match_naive_oracle() {
        let pts: Vec<Vec<f64>> = vec![
            vec![0.3, -1.2, 2.0],
            vec![1.7, 0.4, -0.5],
            vec![-0.9, 2.2, 1.1],
            vec![0.1, 0.0, 0.6],
            vec![2.4, -0.7, -1.3],
        ];
        let s = PointSet::complete(pts.clone()).unwrap();
        let phi = LabelFunction::new(vec![0; 5], 1).unwrap();
        let groups = decompose_groups(&s, &phi).unwrap();
        let (m, psi) = group_statistics(&groups[0], &s).unwrap();

        // Naive two-pass oracle.
        let mut mean = [0.0; 3];
        for p in &pts {
            for j in 0..3 {
                mean[j] += p[j] / 5.0;
            }
        }
        for j in 0..3 {
            assert!((m[j] - mean[j]).abs() < 1e-12);
        }
        for r in 0..3 {
            for c in 0..3 {
                let expect: f64 = pts.iter().map(|p| (p[r] - mean[r]) * (p[c] - mean[c])).sum();
                assert!((psi[(r, c)] - expect).abs() < 1e-12);
            }
        }
        // Symmetric PSD: Cholesky of psi + eps I succeeds.
        assert_eq!(psi.transpose(), psi);
    }

    #[test]
    fn mismatch_error_examples() {
        let a = LabelFunction::new(vec![0, 0, 1, 1], 2).unwrap();
        let b = LabelFunction::new(vec![1, 1, 0, 0], 2).unwrap();
        let c = LabelFunction::new(vec![0, 1, 0, 1], 2).unwrap();
        assert_eq!(label_mismatch_error(&a, &a).unwrap(), 0.0);
        assert_eq!(label_mismatch_error(&a, &b).unwrap(), 1.0);
        assert_eq!(label_mismatch_error(&a, &c).unwrap(), 0.5);
        let short = LabelFunction::new(vec![0], 2).unwrap();
        assert!(label_mismatch_error(&a, &short).is_err());
    }

    #[test]
    fn group_order_independence() {
        // Same set in two point orders: identical group statistics.
        let pts = vec![vec![1.0, 2.0], vec![3.0, -1.0], vec![0.5, 0.5]];
        let obs = vec![vec![true, true], vec![true, true], vec![true, false]];
        let s1 = masked(pts.clone(), obs.clone());
        let phi1 = LabelFunction::new(vec![0, 0, 0], 1).unwrap();

        let perm = [2usize, 0, 1];
        let s2 = masked(
            perm.iter().map(|&i| pts[i].clone()).collect(),
            perm.iter().map(|&i| obs[i].clone()).collect(),
        );
        let phi2 = LabelFunction::new(vec![0, 0, 0], 1).unwrap();

        let g1 = decompose_groups(&s1, &phi1).unwrap();
        let g2 = decompose_groups(&s2, &phi2).unwrap();
        assert_eq!(g1.len(), g2.len());
        for (a, b) in g1.iter().zip(&g2) {
            let (m1, p1) = group_statistics(a, &s1).unwrap();
            let (m2, p2) = group_statistics(b, &s2).unwrap();
            assert!((m1 - m2).amax() < 1e-12);
            assert!((p1 - p2).amax() < 1e-12);
        }
    }

    #[test]
    fn fully_missing_points_are_flagged() {
        let s = masked(
            vec![vec![1.0, 2.0], vec![9.0, 9.0]],
            vec![vec![true, true], vec![false, false]],
        );
        let phi = LabelFunction::new(vec![0, 0], 1).unwrap();
        let groups = decompose_groups(&s, &phi).unwrap();
        assert_eq!(groups.len(), 2);
        assert!(groups[0].is_fully_missing());
        assert!(group_statistics(&groups[0], &s).is_err());
        // Observed point count per label excludes fully-missing members.
        let observed: usize = groups
            .iter()
            .filter(|g| !g.is_fully_missing())
            .map(|g| g.size())
            .sum();
        assert_eq!(observed, 1);
    }
}
