//! Lloyd k-means and the k-POD completion loop for incomplete data.

use super::{squared_distance, BaselineConfig, InitPolicy};
use crate::error::{Error, Result};
use crate::partition::Partition;
use crate::point_set::PointSet;
use crate::rng::Rng;
use rand::Rng as _;

pub(crate) struct KMeansFit {
    pub assignment: Vec<u32>,
    pub centroids: Vec<Vec<f64>>,
    pub objective: f64,
}

fn init_centroids(x: &[Vec<f64>], k: usize, policy: InitPolicy, rng: &mut Rng) -> Vec<Vec<f64>> {
    let n = x.len();
    match policy {
        InitPolicy::RandomPoints => {
            let mut picked = Vec::with_capacity(k);
            let mut tries = 0;
            while picked.len() < k {
                let i = rng.random_range(0..n);
                tries += 1;
                if !picked.contains(&i) || tries > 16 * k {
                    picked.push(i);
                }
            }
            picked.into_iter().map(|i| x[i].clone()).collect()
        }
        InitPolicy::PlusPlus => {
            let mut centroids: Vec<Vec<f64>> = vec![x[rng.random_range(0..n)].clone()];
            let mut dist: Vec<f64> = x.iter().map(|p| squared_distance(p, &centroids[0])).collect();
            while centroids.len() < k {
                let total: f64 = dist.iter().sum();
                let next = if total <= 0.0 {
                    rng.random_range(0..n)
                } else {
                    let mut target = rng.random::<f64>() * total;
                    let mut chosen = n - 1;
                    for (i, &w) in dist.iter().enumerate() {
                        target -= w;
                        if target <= 0.0 {
                            chosen = i;
                            break;
                        }
                    }
                    chosen
                };
                centroids.push(x[next].clone());
                for (i, p) in x.iter().enumerate() {
                    dist[i] = dist[i].min(squared_distance(p, centroids.last().unwrap()));
                }
            }
            centroids
        }
    }
}

fn assign(x: &[Vec<f64>], centroids: &[Vec<f64>]) -> (Vec<u32>, f64) {
    let mut assignment = Vec::with_capacity(x.len());
    let mut objective = 0.0;
    for p in x {
        let mut best = (0u32, f64::INFINITY);
        for (c, centroid) in centroids.iter().enumerate() {
            let d = squared_distance(p, centroid);
            if d < best.1 {
                best = (c as u32, d);
            }
        }
        assignment.push(best.0);
        objective += best.1;
    }
    (assignment, objective)
}

/// Lloyd iterations from the given centroids until assignments stabilize.
pub(crate) fn lloyd(
    x: &[Vec<f64>],
    mut centroids: Vec<Vec<f64>>,
    max_iters: usize,
) -> KMeansFit {
    let d = x[0].len();
    let k = centroids.len();
    let (mut assignment, mut objective) = assign(x, &centroids);
    for _ in 0..max_iters {
        // Update centroids.
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in x.iter().zip(&assignment) {
            counts[a as usize] += 1;
            for j in 0..d {
                sums[a as usize][j] += p[j];
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for j in 0..d {
                    centroids[c][j] = sums[c][j] / counts[c] as f64;
                }
            }
        }
        // Re-seed empty clusters from the point farthest from its centroid.
        for c in 0..k {
            if counts[c] == 0 {
                let mut far = (0usize, f64::NEG_INFINITY);
                for (i, p) in x.iter().enumerate() {
                    let d = squared_distance(p, &centroids[assignment[i] as usize]);
                    if d > far.1 {
                        far = (i, d);
                    }
                }
                centroids[c] = x[far.0].clone();
            }
        }
        let (next_assignment, next_objective) = assign(x, &centroids);
        let stable = next_assignment == assignment;
        assignment = next_assignment;
        objective = next_objective;
        if stable {
            break;
        }
    }
    KMeansFit {
        assignment,
        centroids,
        objective,
    }
}

pub(crate) fn kmeans_fit(x: &[Vec<f64>], cfg: &BaselineConfig, rng: &mut Rng) -> Result<KMeansFit> {
    cfg.validate()?;
    if x.is_empty() {
        return Err(Error::Empty("data matrix"));
    }
    if cfg.k > x.len() {
        return Err(Error::InvalidParameter {
            name: "k",
            reason: format!("{} clusters exceed {} points", cfg.k, x.len()),
        });
    }
    let mut best: Option<KMeansFit> = None;
    for _ in 0..cfg.restarts {
        let init = init_centroids(x, cfg.k, cfg.init, rng);
        let fit = lloyd(x, init, cfg.max_iters);
        let replace = match &best {
            None => true,
            Some(b) => fit.objective < b.objective,
        };
        if replace {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Best-of-restarts Lloyd k-means on complete data.
pub fn kmeans(x: &[Vec<f64>], cfg: &BaselineConfig, rng: &mut Rng) -> Result<Partition> {
    let fit = kmeans_fit(x, cfg, rng)?;
    Partition::from_assignment(&fit.assignment)
}

/// Observed-entry distortion of a partition under its own optimal
/// centroids (the per-block means of the observed entries). This is the
/// objective the completion loop drives down.
pub fn observed_distortion(s: &PointSet, partition: &Partition) -> f64 {
    let d = s.dim();
    let blocks = partition.blocks();
    let mut total = 0.0;
    for block in &blocks {
        for j in 0..d {
            let vals: Vec<f64> = block
                .iter()
                .filter(|&&i| s.is_observed(i, j))
                .map(|&i| s.point(i)[j])
                .collect();
            if vals.is_empty() {
                continue;
            }
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            total += vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
        }
    }
    total
}

/// Observed-entry distortion of an assignment: squared distance between
/// each point's observed coordinates and its centroid.
fn observed_objective(s: &PointSet, assignment: &[u32], centroids: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for i in 0..s.len() {
        let c = &centroids[assignment[i] as usize];
        let row = s.point(i);
        for j in 0..s.dim() {
            if s.is_observed(i, j) {
                total += (row[j] - c[j]) * (row[j] - c[j]);
            }
        }
    }
    total
}

/// k-POD: alternate completing missing entries from assigned centroids with
/// re-running k-means on the completed data, until the partition stabilizes.
///
/// The first pass completes with feature means and runs the full restart
/// schedule; later passes continue Lloyd from the previous centroids, so on
/// complete data k-POD is exactly `kmeans`.
pub fn kpod(s: &PointSet, cfg: &BaselineConfig, rng: &mut Rng) -> Result<Partition> {
    cfg.validate()?;
    let mut x = super::impute::mean_impute(s);
    let mut fit = kmeans_fit(&x, cfg, rng)?;
    let mut prev_objective = f64::INFINITY;
    for _ in 0..cfg.max_iters {
        // Complete from assigned centroids.
        let mut changed_any = false;
        for i in 0..s.len() {
            for j in 0..s.dim() {
                if !s.is_observed(i, j) {
                    let v = fit.centroids[fit.assignment[i] as usize][j];
                    if x[i][j] != v {
                        x[i][j] = v;
                        changed_any = true;
                    }
                }
            }
        }
        if !changed_any {
            break;
        }
        let next = lloyd(&x, fit.centroids.clone(), cfg.max_iters);
        let stable = next.assignment == fit.assignment;
        fit = next;
        let objective = observed_objective(s, &fit.assignment, &fit.centroids);
        if stable || (prev_objective - objective).abs() < cfg.tolerance {
            break;
        }
        prev_objective = objective;
    }
    Partition::from_assignment(&fit.assignment)
}
