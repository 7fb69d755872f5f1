//! The Bayes cluster operator and its suboptimal searches.
//!
//! The optimal partition minimizes the posterior-expected partition cost
//! over a candidate set, with the expectation taken over a reference set of
//! partitions carrying posterior mass. Pmax replaces the reference set with
//! a Hamming ball around the maximum-posterior partition; Pseed centers the
//! ball on a multi-start hill-climb optimum and restricts candidates to the
//! same ball.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::partition::{partition_cost, two_block, Partition};
use crate::point_set::PointSet;
use crate::posterior::{PosteriorEngine, PosteriorTable};
use crate::rng::Rng;
use rand::seq::SliceRandom;

/// Exhaustive searches enumerate all `2^(n-1)` candidate partitions; above
/// this point count they refuse unless forced.
pub const EXHAUSTIVE_GUARD: usize = 22;

/// Hill-climb neighborhood for the seeded search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Neighborhood {
    /// Cross-block point swaps: the minimal moves that preserve block sizes
    /// (label Hamming distance 2).
    SizePreservingSwaps,
    /// Single-point relabelings (label Hamming distance 1); block sizes
    /// drift freely.
    SinglePointMoves,
}

/// Settings shared by the suboptimal searches.
#[derive(Debug, Clone)]
pub struct SearchConfig {
    /// Radius of the reference ball in partition Hamming distance.
    pub hamming_radius: usize,
    /// Number of random hill-climb starts for the seeded search.
    pub n_seeds: usize,
    /// Required block sizes; `None` leaves sizes unconstrained.
    pub size_constraint: Option<(usize, usize)>,
    /// Monte Carlo draws for inverse-Wishart models.
    pub mc_samples: usize,
    pub neighborhood: Neighborhood,
    /// Overrides the exhaustive-search size guard.
    pub force: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            hamming_radius: 1,
            n_seeds: 5,
            size_constraint: None,
            mc_samples: crate::posterior::DEFAULT_MC_SAMPLES,
            neighborhood: Neighborhood::SizePreservingSwaps,
            force: false,
        }
    }
}

/// A clustering result: the chosen partition and its posterior-expected
/// partition cost against the reference set used by the search.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterOutcome {
    pub partition: Partition,
    pub expected_error: f64,
}

// --- generic candidate scoring over a PosteriorTable --------------------

/// Scores a stream of candidate partitions against a posterior table and
/// returns the minimizer of the expected partition cost together with that
/// minimum. Ties break toward the earliest candidate. Candidates whose
/// partial sum already exceeds the best known objective are abandoned early
/// (costs are nonnegative, so the partial sum is a lower bound).
pub fn bayes_cluster(
    candidates: impl IntoIterator<Item = Partition>,
    table: &PosteriorTable,
) -> Result<ClusterOutcome> {
    if table.is_empty() {
        return Err(Error::Empty("reference set"));
    }
    // Visit heavy references first so bad candidates are pruned quickly.
    let mut order: Vec<usize> = (0..table.len()).collect();
    order.sort_by(|&a, &b| {
        table.entries()[b]
            .2
            .partial_cmp(&table.entries()[a].2)
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut best: Option<(f64, Partition)> = None;
    let mut any = false;
    for cand in candidates {
        any = true;
        let bound = best.as_ref().map(|(v, _)| *v).unwrap_or(f64::INFINITY);
        let mut acc = 0.0;
        let mut pruned = false;
        for &r in &order {
            let (p, _, prob) = &table.entries()[r];
            acc += prob * partition_cost(&cand, p)?;
            if acc > bound {
                pruned = true;
                break;
            }
        }
        if !pruned && acc < bound {
            best = Some((acc, cand));
        }
    }
    if !any {
        return Err(Error::Empty("candidate set"));
    }
    let (expected_error, partition) = best.expect("nonempty candidates");
    Ok(ClusterOutcome {
        partition,
        expected_error,
    })
}

// --- two-block bitmask machinery -----------------------------------------

/// Reference masks with normalized probabilities, ordered descending by
/// probability for pruning.
struct MaskTable {
    masks: Vec<u128>,
    probs: Vec<f64>,
}

impl MaskTable {
    /// Normalizes log posteriors over the reference set.
    fn new(mut entries: Vec<(u128, f64)>) -> Self {
        let logs: Vec<f64> = entries.iter().map(|e| e.1).collect();
        let norm = crate::linalg::log_sum_exp(&logs);
        entries.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        Self {
            masks: entries.iter().map(|e| e.0).collect(),
            probs: entries.iter().map(|e| (e.1 - norm).exp()).collect(),
        }
    }
}

/// Shared upper bound on the best objective, stored as f64 bits (valid for
/// nonnegative values).
struct Bound(AtomicU64);

impl Bound {
    fn new() -> Self {
        Bound(AtomicU64::new(f64::INFINITY.to_bits()))
    }

    fn get(&self) -> f64 {
        f64::from_bits(self.0.load(Ordering::Relaxed))
    }

    fn update(&self, value: f64) {
        let bits = value.to_bits();
        let mut cur = self.0.load(Ordering::Relaxed);
        while f64::from_bits(cur) > value {
            match self
                .0
                .compare_exchange_weak(cur, bits, Ordering::Relaxed, Ordering::Relaxed)
            {
                Ok(_) => break,
                Err(c) => cur = c,
            }
        }
    }
}

/// Objective of one candidate mask; `None` when pruned against `bound`.
fn mask_objective(cand: u128, n: usize, table: &MaskTable, bound: f64) -> Option<f64> {
    let nf = n as f64;
    let half = n as u32;
    let mut acc = 0.0;
    for (&m, &p) in table.masks.iter().zip(&table.probs) {
        let h = (cand ^ m).count_ones();
        let h = h.min(half - h);
        acc += p * h as f64;
        if acc > bound * nf {
            return None;
        }
    }
    Some(acc / nf)
}

/// Minimizes the expected cost over candidate masks; ties break toward the
/// smallest mask, which is the canonical enumeration order.
fn scan_masks_list(cands: &[u128], n: usize, table: &MaskTable, bound: &Bound) -> (f64, u128) {
    let mut best = (f64::INFINITY, u128::MAX);
    for &c in cands {
        if let Some(obj) = mask_objective(c, n, table, bound.get()) {
            bound.update(obj);
            if obj < best.0 || (obj == best.0 && c < best.1) {
                best = (obj, c);
            }
        }
    }
    best
}

/// Scans all `2^(n-1)` two-block masks in parallel chunks; the chunk split
/// is fixed, so the result does not depend on the worker count.
fn scan_all_masks(n: usize, table: &MaskTable, seed_candidates: &[u128]) -> (f64, u128) {
    let total: u128 = 1u128 << (n - 1);
    let bound = Bound::new();
    // Seed the bound with strong candidates (e.g. the reference masks) so
    // pruning bites from the start.
    let seeded = scan_masks_list(seed_candidates, n, table, &bound);

    let chunks: u128 = 256;
    let chunk_size = total.div_ceil(chunks);
    let locals: Vec<(f64, u128)> = (0..chunks)
        .into_par_iter()
        .map(|ci| {
            let lo = ci * chunk_size;
            let hi = ((ci + 1) * chunk_size).min(total);
            let mut best = (f64::INFINITY, u128::MAX);
            for c in lo..hi {
                if let Some(obj) = mask_objective(c, n, table, bound.get()) {
                    bound.update(obj);
                    if obj < best.0 || (obj == best.0 && c < best.1) {
                        best = (obj, c);
                    }
                }
            }
            best
        })
        .collect();
    let mut best = seeded;
    for local in locals {
        if local.0 < best.0 || (local.0 == best.0 && local.1 < best.1) {
            best = local;
        }
    }
    best
}

fn require_two_labels(model: &ModelSpec) -> Result<()> {
    if model.num_labels() != 2 {
        return Err(Error::InvalidParameter {
            name: "model",
            reason: "partition searches support two labels".into(),
        });
    }
    Ok(())
}

fn check_mask_capacity(n: usize) -> Result<()> {
    if n > 128 {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: format!("two-block searches support up to 128 points, got {n}"),
        });
    }
    Ok(())
}

fn sizes_of(s: &PointSet, constraint: Option<(usize, usize)>) -> Result<Option<(usize, usize)>> {
    match constraint {
        None => Ok(None),
        Some((a, b)) => {
            if a + b != s.len() {
                return Err(Error::InvalidParameter {
                    name: "size_constraint",
                    reason: format!("sizes {a}+{b} do not sum to {}", s.len()),
                });
            }
            Ok(Some((a, b)))
        }
    }
}

/// Evaluates the log posterior of every mask in `masks`, in order.
fn mask_logs(engine: &PosteriorEngine, n: usize, masks: &[u128]) -> Result<Vec<f64>> {
    masks
        .par_iter()
        .map(|&m| {
            let blocks = mask_blocks(m, n);
            engine.log_blocks(&blocks)
        })
        .collect()
}

fn mask_blocks(mask: u128, n: usize) -> Vec<Vec<usize>> {
    let mut blocks = vec![Vec::new(), Vec::new()];
    for i in 0..n {
        blocks[two_block::block_of(mask, n, i) as usize].push(i);
    }
    if blocks[1].is_empty() {
        blocks.pop();
    }
    blocks
}

/// The exact Bayes partition: reference set = size-constrained partitions,
/// candidate set = all partitions of at most two blocks.
pub fn optimal_cluster(
    s: &PointSet,
    model: &ModelSpec,
    size_constraint: Option<(usize, usize)>,
    mc_samples: usize,
    rng: &mut Rng,
    force: bool,
) -> Result<ClusterOutcome> {
    require_two_labels(model)?;
    check_mask_capacity(s.len())?;
    let n = s.len();
    if n > EXHAUSTIVE_GUARD && !force {
        return Err(Error::SizeGuard {
            n,
            limit: EXHAUSTIVE_GUARD,
        });
    }
    let sizes = sizes_of(s, size_constraint)?;
    let refs: Vec<u128> = match sizes {
        Some((a, _)) => two_block::constrained_masks(n, a),
        None => two_block::all_masks(n).collect(),
    };
    let engine = PosteriorEngine::new(s, model, mc_samples, rng)?;
    let logs = mask_logs(&engine, n, &refs)?;
    let table = MaskTable::new(refs.iter().copied().zip(logs).collect());
    let (obj, mask) = scan_all_masks(n, &table, &refs);
    Ok(ClusterOutcome {
        partition: two_block::to_partition(mask, n),
        expected_error: obj,
    })
}

/// Suboptimal search: reference set restricted to a Hamming ball around the
/// maximum-posterior size-constrained partition; candidates stay exhaustive.
pub fn pmax_cluster(
    s: &PointSet,
    model: &ModelSpec,
    config: &SearchConfig,
    rng: &mut Rng,
) -> Result<ClusterOutcome> {
    require_two_labels(model)?;
    check_mask_capacity(s.len())?;
    let n = s.len();
    if n > EXHAUSTIVE_GUARD && !config.force {
        return Err(Error::SizeGuard {
            n,
            limit: EXHAUSTIVE_GUARD,
        });
    }
    let sizes = sizes_of(s, config.size_constraint)?;
    let constrained: Vec<u128> = match sizes {
        Some((a, _)) => two_block::constrained_masks(n, a),
        None => two_block::all_masks(n).collect(),
    };
    let engine = PosteriorEngine::new(s, model, config.mc_samples, rng)?;
    let logs = mask_logs(&engine, n, &constrained)?;
    // Maximum-posterior partition; ties toward the first in canonical order.
    let mut center_idx = 0;
    for (i, &lp) in logs.iter().enumerate().skip(1) {
        if lp > logs[center_idx] {
            center_idx = i;
        }
    }
    let center = constrained[center_idx];
    let ball: Vec<(u128, f64)> = constrained
        .iter()
        .zip(&logs)
        .filter(|(&m, _)| two_block::hamming(m, center, n) as usize <= config.hamming_radius)
        .map(|(&m, &lp)| (m, lp))
        .collect();
    let seeds: Vec<u128> = ball.iter().map(|e| e.0).collect();
    let table = MaskTable::new(ball);
    let (obj, mask) = scan_all_masks(n, &table, &seeds);
    Ok(ClusterOutcome {
        partition: two_block::to_partition(mask, n),
        expected_error: obj,
    })
}

/// Memoized posterior evaluations over two-block masks.
struct MaskPosterior<'a> {
    engine: &'a PosteriorEngine<'a>,
    n: usize,
    cache: HashMap<u128, f64>,
}

impl<'a> MaskPosterior<'a> {
    fn new(engine: &'a PosteriorEngine<'a>, n: usize) -> Self {
        Self {
            engine,
            n,
            cache: HashMap::new(),
        }
    }

    /// Evaluates the given masks, filling the cache; parallel over the
    /// uncached ones.
    fn eval_many(&mut self, masks: &[u128]) -> Result<()> {
        let todo: Vec<u128> = {
            let mut t: Vec<u128> = masks
                .iter()
                .copied()
                .filter(|m| !self.cache.contains_key(m))
                .collect();
            t.sort_unstable();
            t.dedup();
            t
        };
        let logs = mask_logs(self.engine, self.n, &todo)?;
        for (m, lp) in todo.into_iter().zip(logs) {
            self.cache.insert(m, lp);
        }
        Ok(())
    }

    fn get(&self, mask: u128) -> f64 {
        self.cache[&mask]
    }
}

/// Neighbor masks of `mask` under the configured move set, canonical and
/// deduplicated, in deterministic order.
fn neighbors(mask: u128, n: usize, neighborhood: Neighborhood) -> Vec<u128> {
    let mut out = Vec::new();
    match neighborhood {
        Neighborhood::SizePreservingSwaps => {
            let ones: Vec<usize> = (0..n).filter(|&i| two_block::block_of(mask, n, i) == 1).collect();
            let zeros: Vec<usize> = (0..n).filter(|&i| two_block::block_of(mask, n, i) == 0).collect();
            for &a in &zeros {
                for &b in &ones {
                    let flipped = mask ^ (1u128 << (n - 1 - a)) ^ (1u128 << (n - 1 - b));
                    out.push(two_block::canonical(flipped, n));
                }
            }
        }
        Neighborhood::SinglePointMoves => {
            for i in 0..n {
                out.push(two_block::canonical(mask ^ (1u128 << (n - 1 - i)), n));
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    out.retain(|&m| m != mask);
    out
}

/// Suboptimal search seeded by multi-start hill climbing on the posterior;
/// reference and candidate sets are both the size-constrained ball around
/// the best local optimum.
pub fn pseed_cluster(
    s: &PointSet,
    model: &ModelSpec,
    config: &SearchConfig,
    rng: &mut Rng,
) -> Result<ClusterOutcome> {
    require_two_labels(model)?;
    check_mask_capacity(s.len())?;
    let n = s.len();
    if config.n_seeds == 0 {
        return Err(Error::InvalidParameter {
            name: "n_seeds",
            reason: "need at least one seed".into(),
        });
    }
    let sizes = sizes_of(s, config.size_constraint)?;
    let engine = PosteriorEngine::new(s, model, config.mc_samples, rng)?;
    let mut posterior = MaskPosterior::new(&engine, n);

    // Random initial partitions (size-constrained when sizes are given).
    let mut indices: Vec<usize> = (0..n).collect();
    let mut seeds = Vec::with_capacity(config.n_seeds);
    for _ in 0..config.n_seeds {
        indices.shuffle(rng);
        let ones = match sizes {
            Some((a, _)) => &indices[..a],
            None => &indices[..n / 2],
        };
        let mut mask = 0u128;
        for &i in ones {
            mask |= 1u128 << (n - 1 - i);
        }
        seeds.push(two_block::canonical(mask, n));
    }

    let neighborhood = match sizes {
        Some(_) => config.neighborhood,
        None => Neighborhood::SinglePointMoves,
    };

    let mut best: Option<(f64, u128)> = None;
    for seed in seeds {
        let mut current = seed;
        posterior.eval_many(&[current])?;
        let mut current_lp = posterior.get(current);
        loop {
            let neigh = neighbors(current, n, neighborhood);
            posterior.eval_many(&neigh)?;
            // Steepest ascent; ties toward the smallest mask.
            let mut step: Option<(f64, u128)> = None;
            for m in neigh {
                let lp = posterior.get(m);
                let better = match step {
                    None => true,
                    Some((blp, bm)) => lp > blp || (lp == blp && m < bm),
                };
                if better {
                    step = Some((lp, m));
                }
            }
            match step {
                Some((lp, m)) if lp > current_lp => {
                    current = m;
                    current_lp = lp;
                }
                _ => break,
            }
        }
        let replace = match best {
            None => true,
            Some((blp, bm)) => current_lp > blp || (current_lp == blp && current < bm),
        };
        if replace {
            best = Some((current_lp, current));
        }
    }
    let (_, center) = best.expect("at least one seed");

    let ball: Vec<u128> = match sizes {
        Some(sz) => two_block::constrained_ball(center, n, sz, config.hamming_radius),
        None => {
            // Unconstrained ball: flip up to `radius` point bits.
            let mut out = std::collections::BTreeSet::new();
            out.insert(center);
            let mut frontier = vec![center];
            for _ in 0..config.hamming_radius {
                let mut next = Vec::new();
                for m in frontier {
                    for i in 0..n {
                        let f = two_block::canonical(m ^ (1u128 << (n - 1 - i)), n);
                        if out.insert(f) {
                            next.push(f);
                        }
                    }
                }
                frontier = next;
            }
            out.into_iter().collect()
        }
    };
    posterior.eval_many(&ball)?;
    let entries: Vec<(u128, f64)> = ball.iter().map(|&m| (m, posterior.get(m))).collect();
    let table = MaskTable::new(entries);
    let bound = Bound::new();
    let (obj, mask) = scan_masks_list(&ball, n, &table, &bound);
    Ok(ClusterOutcome {
        partition: two_block::to_partition(mask, n),
        expected_error: obj,
    })
}

/// Builds a `PosteriorTable` over the size-constrained reference set, the
/// same table the optimal search uses.
pub fn reference_table(
    s: &PointSet,
    model: &ModelSpec,
    size_constraint: Option<(usize, usize)>,
    mc_samples: usize,
    rng: &mut Rng,
) -> Result<PosteriorTable> {
    require_two_labels(model)?;
    check_mask_capacity(s.len())?;
    let n = s.len();
    let sizes = sizes_of(s, size_constraint)?;
    let refs: Vec<u128> = match sizes {
        Some((a, _)) => two_block::constrained_masks(n, a),
        None => two_block::all_masks(n).collect(),
    };
    let engine = PosteriorEngine::new(s, model, mc_samples, rng)?;
    let logs = mask_logs(&engine, n, &refs)?;
    let partitions: Vec<Partition> = refs.iter().map(|&m| two_block::to_partition(m, n)).collect();
    Ok(PosteriorTable::from_logs(partitions, logs))
}
