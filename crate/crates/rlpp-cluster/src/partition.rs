//! Partitions of a point set, the partition cost of switching-invariant
//! label mismatch, and partition enumeration.
//!
//! A partition is stored in canonical form: block ids appear in order of
//! first occurrence. Two label functions induce the same `Partition` value
//! exactly when they differ by a label permutation, so equality and hashing
//! work on the canonical assignment directly.

use crate::error::{Error, Result};
use crate::point_set::LabelFunction;

/// A partition of `n` points into at most `l` blocks, canonicalized.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    assignment: Vec<u32>,
    n_blocks: usize,
}

impl Partition {
    /// Canonicalizes an arbitrary block assignment (any ids; equal ids mean
    /// same block).
    pub fn from_assignment(raw: &[u32]) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::Empty("partition assignment"));
        }
        let mut relabel: std::collections::HashMap<u32, u32> = std::collections::HashMap::new();
        let mut next = 0u32;
        let mut assignment = Vec::with_capacity(raw.len());
        for &v in raw {
            let id = *relabel.entry(v).or_insert_with(|| {
                let id = next;
                next += 1;
                id
            });
            assignment.push(id);
        }
        Ok(Self {
            assignment,
            n_blocks: next as usize,
        })
    }

    /// The partition induced by a label function.
    pub fn from_labels(phi: &LabelFunction) -> Self {
        Self::from_assignment(phi.labels()).expect("label function is nonempty")
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn block_count(&self) -> usize {
        self.n_blocks
    }

    /// Canonical block id of each point.
    pub fn assignment(&self) -> &[u32] {
        &self.assignment
    }

    pub fn block_of(&self, i: usize) -> usize {
        self.assignment[i] as usize
    }

    /// Point indices of each block, in block-id order.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut blocks = vec![Vec::new(); self.n_blocks];
        for (i, &b) in self.assignment.iter().enumerate() {
            blocks[b as usize].push(i);
        }
        blocks
    }

    /// Block sizes sorted descending.
    pub fn sorted_block_sizes(&self) -> Vec<usize> {
        let mut sizes: Vec<usize> = self.blocks().iter().map(Vec::len).collect();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        sizes
    }

    /// All label functions over `0..l` that induce this partition
    /// (injective assignments of blocks to labels).
    pub fn inducing_label_functions(&self, l: usize) -> Result<Vec<LabelFunction>> {
        if self.n_blocks > l {
            return Err(Error::InvalidParameter {
                name: "l",
                reason: format!("{} blocks cannot be labeled with {l} labels", self.n_blocks),
            });
        }
        let mut out = Vec::new();
        let mut chosen = Vec::with_capacity(self.n_blocks);
        let mut used = vec![false; l];
        fn rec(
            p: &Partition,
            l: usize,
            chosen: &mut Vec<u32>,
            used: &mut Vec<bool>,
            out: &mut Vec<LabelFunction>,
        ) {
            if chosen.len() == p.n_blocks {
                let labels = p.assignment.iter().map(|&b| chosen[b as usize]).collect();
                out.push(LabelFunction::new(labels, l).expect("labels in range"));
                return;
            }
            for lab in 0..l {
                if !used[lab] {
                    used[lab] = true;
                    chosen.push(lab as u32);
                    rec(p, l, chosen, used, out);
                    chosen.pop();
                    used[lab] = false;
                }
            }
        }
        rec(self, l, &mut chosen, &mut used, &mut out);
        Ok(out)
    }
}

/// Maximum total overlap between the blocks of `q` and `p` over injective
/// block matchings; `partition_cost` is `(n - overlap) / n`.
fn max_block_overlap(q: &Partition, p: &Partition) -> usize {
    let kq = q.block_count();
    let kp = p.block_count();
    let m = kq.max(kp);
    let mut confusion = vec![vec![0usize; m]; m];
    for i in 0..q.len() {
        confusion[q.block_of(i)][p.block_of(i)] += 1;
    }
    if m <= 8 {
        max_assignment_exhaustive(&confusion)
    } else {
        let weights: Vec<Vec<f64>> = confusion
            .iter()
            .map(|row| row.iter().map(|&v| v as f64).collect())
            .collect();
        max_assignment_hungarian(&weights).round() as usize
    }
}

fn max_assignment_exhaustive(w: &[Vec<usize>]) -> usize {
    let m = w.len();
    let mut cols: Vec<usize> = (0..m).collect();
    let mut best = 0;
    permute(&mut cols, 0, &mut |perm| {
        let total: usize = perm.iter().enumerate().map(|(r, &c)| w[r][c]).sum();
        best = best.max(total);
    });
    best
}

fn permute(items: &mut [usize], k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, visit);
        items.swap(k, i);
    }
}

/// Maximum-weight perfect assignment on a square matrix via shortest
/// augmenting paths (Jonker-Volgenant style), O(m^3).
pub(crate) fn max_assignment_hungarian(w: &[Vec<f64>]) -> f64 {
    let m = w.len();
    if m == 0 {
        return 0.0;
    }
    // Convert to min-cost with nonnegative entries.
    let maxw = w
        .iter()
        .flat_map(|r| r.iter())
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let cost = |r: usize, c: usize| maxw - w[r][c];

    let mut u = vec![0.0f64; m + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut way = vec![0usize; m + 1];
    let mut match_col = vec![m; m + 1]; // p[j] = row matched to column j (m = none)

    for r in 0..m {
        let mut j0 = m; // virtual column holding the unmatched row
        match_col[j0] = r;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = match_col[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 0..m {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0 + 1] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[match_col[j] + 1] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if match_col[j0] == m {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            match_col[j0] = match_col[j1];
            j0 = j1;
            if j0 == m {
                break;
            }
        }
    }
    let mut total = 0.0;
    for j in 0..m {
        if match_col[j] != m {
            total += w[match_col[j]][j];
        }
    }
    total
}

/// Normalized minimum label mismatch between two partitions (the fraction of
/// points that must change blocks under the best block matching).
pub fn partition_cost(q: &Partition, p: &Partition) -> Result<f64> {
    if q.len() != p.len() {
        return Err(Error::DimensionMismatch {
            what: "partition",
            expected: q.len(),
            found: p.len(),
        });
    }
    let overlap = max_block_overlap(q, p);
    Ok((q.len() - overlap) as f64 / q.len() as f64)
}

/// Clustering error of a predicted partition against true labels: the
/// label-switching-invariant fraction of misassigned points.
pub fn clustering_error(truth: &LabelFunction, predicted: &Partition) -> Result<f64> {
    partition_cost(predicted, &Partition::from_labels(truth))
}

/// Minimum Hamming distance between label functions inducing the two
/// partitions; equals `n * partition_cost`.
pub fn partition_hamming_distance(p: &Partition, q: &Partition) -> Result<usize> {
    let cost = partition_cost(p, q)?;
    Ok((cost * p.len() as f64).round() as usize)
}

/// Streams all partitions of `n` points into at most `l` blocks in canonical
/// (restricted-growth-string lexicographic) order, optionally filtered to a
/// block-size multiset.
pub fn enumerate_partitions(
    n: usize,
    l: usize,
    size_constraint: Option<&[usize]>,
) -> Result<impl Iterator<Item = Partition>> {
    if n == 0 {
        return Err(Error::Empty("point count"));
    }
    if l < 2 {
        return Err(Error::InvalidParameter {
            name: "l",
            reason: "need at least two blocks".into(),
        });
    }
    let sizes: Option<Vec<usize>> = size_constraint.map(|s| {
        let mut v: Vec<usize> = s.iter().copied().filter(|&x| x > 0).collect();
        v.sort_unstable_by(|a, b| b.cmp(a));
        v
    });
    if let Some(s) = size_constraint {
        if s.iter().sum::<usize>() != n {
            return Err(Error::InvalidParameter {
                name: "size_constraint",
                reason: format!("sizes sum to {}, expected {n}", s.iter().sum::<usize>()),
            });
        }
    }
    Ok(RgsIter::new(n, l).filter(move |p| match &sizes {
        None => true,
        Some(s) => p.sorted_block_sizes() == *s,
    }))
}

/// Restricted growth strings with at most `l` values, lexicographic order.
struct RgsIter {
    a: Vec<u32>,
    max_prefix: Vec<u32>, // max_prefix[i] = max(a[0..=i])
    l: u32,
    started: bool,
    done: bool,
}

impl RgsIter {
    fn new(n: usize, l: usize) -> Self {
        Self {
            a: vec![0; n],
            max_prefix: vec![0; n],
            l: l as u32,
            started: false,
            done: false,
        }
    }

    fn emit(&self) -> Partition {
        Partition::from_assignment(&self.a).expect("RGS is canonical")
    }
}

impl Iterator for RgsIter {
    type Item = Partition;

    fn next(&mut self) -> Option<Partition> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            return Some(self.emit());
        }
        let n = self.a.len();
        // Find the rightmost position that can be incremented.
        let mut i = n;
        while i > 1 {
            i -= 1;
            let cap = (self.max_prefix[i - 1] + 1).min(self.l - 1);
            if self.a[i] < cap {
                self.a[i] += 1;
                self.max_prefix[i] = self.max_prefix[i - 1].max(self.a[i]);
                for j in i + 1..n {
                    self.a[j] = 0;
                    self.max_prefix[j] = self.max_prefix[j - 1];
                }
                return Some(self.emit());
            }
        }
        self.done = true;
        None
    }
}

// ---------------------------------------------------------------------------
// Two-block bitmask representation.
//
// Partitions into at most two blocks are represented as a `u128` where the
// bit at position `n-1-i` carries the block of point `i`; point 0 always
// sits in block 0, so canonical masks have the top point bit clear and
// ascending mask order coincides with the canonical enumeration order above.
// ---------------------------------------------------------------------------

/// Operations on two-block partitions encoded as bitmasks.
pub(crate) mod two_block {
    use super::Partition;

    pub fn full_span(n: usize) -> u128 {
        if n == 128 {
            u128::MAX
        } else {
            (1u128 << n) - 1
        }
    }

    fn point_bit(n: usize, i: usize) -> u128 {
        1u128 << (n - 1 - i)
    }

    /// Flips to the representative with point 0 in block 0.
    pub fn canonical(mask: u128, n: usize) -> u128 {
        if mask & point_bit(n, 0) != 0 {
            !mask & full_span(n)
        } else {
            mask
        }
    }

    pub fn block_of(mask: u128, n: usize, i: usize) -> u32 {
        (mask >> (n - 1 - i) & 1) as u32
    }

    #[allow(dead_code)]
    pub fn from_partition(p: &Partition, n: usize) -> Option<u128> {
        if p.len() != n || p.block_count() > 2 {
            return None;
        }
        let mut mask = 0u128;
        for i in 0..n {
            if p.block_of(i) == 1 {
                mask |= point_bit(n, i);
            }
        }
        Some(mask)
    }

    pub fn to_partition(mask: u128, n: usize) -> Partition {
        let mask = canonical(mask, n);
        let assignment: Vec<u32> = (0..n).map(|i| block_of(mask, n, i)).collect();
        Partition::from_assignment(&assignment).expect("nonempty")
    }

    /// `partition_cost` between two-block masks.
    #[allow(dead_code)]
    pub fn cost(a: u128, b: u128, n: usize) -> f64 {
        hamming(a, b, n) as f64 / n as f64
    }

    /// Minimum label Hamming distance between two-block masks.
    pub fn hamming(a: u128, b: u128, n: usize) -> u32 {
        let h = (a ^ b).count_ones();
        h.min(n as u32 - h)
    }

    /// All canonical masks of partitions into at most two blocks, ascending;
    /// equals the canonical enumeration order for l = 2.
    pub fn all_masks(n: usize) -> impl Iterator<Item = u128> {
        debug_assert!((1..=128).contains(&n));
        let count: u128 = 1u128 << (n - 1);
        (0..count).map(|m| m as u128)
    }

    /// Canonical masks whose block-size multiset matches `{s1, n-s1}`,
    /// ascending.
    pub fn constrained_masks(n: usize, s1: usize) -> Vec<u128> {
        let s2 = n - s1;
        all_masks(n)
            .filter(|m| {
                let ones = m.count_ones() as usize;
                ones == s1 || ones == s2
            })
            .collect()
    }

    /// Canonical masks of correct-size partitions within `radius` of
    /// `center` in partition Hamming distance, sorted ascending.
    ///
    /// A partition at distance `h <= radius` has an inducing labeling that
    /// differs from the center's labeling at exactly `h` points, so the
    /// ball is every mask `center ^ flips` with at most `radius` flipped
    /// points whose block sizes still match the (unordered) constraint:
    /// flipping `u` points into block 1 and `v` out of it needs
    /// `u - v = 0` (swaps) or `u - v` equal to the size difference
    /// (transfers, possible only for unequal sizes).
    pub fn constrained_ball(center: u128, n: usize, sizes: (usize, usize), radius: usize) -> Vec<u128> {
        let center = canonical(center, n);
        let ones: Vec<usize> = (0..n).filter(|&i| block_of(center, n, i) == 1).collect();
        let zeros: Vec<usize> = (0..n).filter(|&i| block_of(center, n, i) == 0).collect();
        let b = ones.len();
        let mut out = std::collections::BTreeSet::new();
        let mut pick_zero = Vec::new();
        let mut pick_one = Vec::new();
        for u in 0..=radius.min(zeros.len()) {
            for v in 0..=(radius - u).min(ones.len()) {
                if v > b + u {
                    continue;
                }
                let new_pop = b + u - v;
                if new_pop != sizes.0 && new_pop != sizes.1 {
                    continue;
                }
                pick_zero.clear();
                combinations(&zeros, u, &mut pick_zero);
                pick_one.clear();
                combinations(&ones, v, &mut pick_one);
                for za in &pick_zero {
                    let zbits: u128 = za.iter().map(|&i| point_bit(n, i)).sum();
                    for ob in &pick_one {
                        let obits: u128 = ob.iter().map(|&i| point_bit(n, i)).sum();
                        out.insert(canonical(center ^ zbits ^ obits, n));
                    }
                }
            }
        }
        out.into_iter().collect()
    }

    fn combinations(items: &[usize], k: usize, out: &mut Vec<Vec<usize>>) {
        fn rec(items: &[usize], k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == k {
                out.push(cur.clone());
                return;
            }
            for i in start..items.len() {
                cur.push(items[i]);
                rec(items, k, i + 1, cur, out);
                cur.pop();
            }
        }
        rec(items, k, 0, &mut Vec::new(), out);
    }
}
