//! Fuzzy c-means and its optimal-completion variant for incomplete data.

use super::kmeans::kmeans_fit;
use super::{squared_distance, BaselineConfig};
use crate::error::{Error, Result};
use crate::partition::Partition;
use crate::point_set::PointSet;
use crate::rng::Rng;

/// Overall missing fraction at which FCM-OCS switches from complete-subset
/// initialization to mean-imputed initialization.
pub(crate) const OCS_INIT_SWITCH: f64 = 0.2;

pub(crate) struct FcmFit {
    pub memberships: Vec<Vec<f64>>,
    pub centroids: Vec<Vec<f64>>,
    pub objective: f64,
}

/// Membership row of one point given the centroids.
fn membership_row(p: &[f64], centroids: &[Vec<f64>], fuzzifier: f64) -> Vec<f64> {
    let k = centroids.len();
    let d2: Vec<f64> = centroids.iter().map(|c| squared_distance(p, c)).collect();
    // A point on a centroid takes membership 1 there (shared if several).
    if let Some(_hit) = d2.iter().position(|&v| v == 0.0) {
        let hits = d2.iter().filter(|&&v| v == 0.0).count() as f64;
        return d2
            .iter()
            .map(|&v| if v == 0.0 { 1.0 / hits } else { 0.0 })
            .collect();
    }
    let power = 1.0 / (fuzzifier - 1.0);
    let mut row = vec![0.0; k];
    for c in 0..k {
        let mut denom = 0.0;
        for j in 0..k {
            denom += (d2[c] / d2[j]).powf(power);
        }
        row[c] = 1.0 / denom;
    }
    row
}

fn update_centroids(x: &[Vec<f64>], memberships: &[Vec<f64>], fuzzifier: f64, k: usize) -> Vec<Vec<f64>> {
    let d = x[0].len();
    let mut centroids = vec![vec![0.0; d]; k];
    let mut weights = vec![0.0; k];
    for (p, u) in x.iter().zip(memberships) {
        for c in 0..k {
            let w = u[c].powf(fuzzifier);
            weights[c] += w;
            for j in 0..d {
                centroids[c][j] += w * p[j];
            }
        }
    }
    for c in 0..k {
        if weights[c] > 0.0 {
            for j in 0..d {
                centroids[c][j] /= weights[c];
            }
        }
    }
    centroids
}

fn fcm_objective(x: &[Vec<f64>], memberships: &[Vec<f64>], centroids: &[Vec<f64>], fuzzifier: f64) -> f64 {
    let mut total = 0.0;
    for (p, u) in x.iter().zip(memberships) {
        for (c, centroid) in centroids.iter().enumerate() {
            total += u[c].powf(fuzzifier) * squared_distance(p, centroid);
        }
    }
    total
}

/// Alternating membership/centroid updates from the given centroids.
fn fcm_from_centroids(
    x: &[Vec<f64>],
    mut centroids: Vec<Vec<f64>>,
    cfg: &BaselineConfig,
) -> FcmFit {
    let mut memberships: Vec<Vec<f64>> = x
        .iter()
        .map(|p| membership_row(p, &centroids, cfg.fuzzifier))
        .collect();
    let mut objective = fcm_objective(x, &memberships, &centroids, cfg.fuzzifier);
    for _ in 0..cfg.max_iters {
        centroids = update_centroids(x, &memberships, cfg.fuzzifier, cfg.k);
        memberships = x
            .iter()
            .map(|p| membership_row(p, &centroids, cfg.fuzzifier))
            .collect();
        let next = fcm_objective(x, &memberships, &centroids, cfg.fuzzifier);
        let done = (objective - next).abs() < cfg.tolerance;
        objective = next;
        if done {
            break;
        }
    }
    FcmFit {
        memberships,
        centroids,
        objective,
    }
}

pub(crate) fn fuzzy_cmeans_fit(x: &[Vec<f64>], cfg: &BaselineConfig, rng: &mut Rng) -> Result<FcmFit> {
    cfg.validate()?;
    if x.is_empty() {
        return Err(Error::Empty("data matrix"));
    }
    // Centers seeded from a quick k-means init keeps restarts comparable.
    let mut best: Option<FcmFit> = None;
    for _ in 0..cfg.restarts {
        let init = kmeans_fit(
            x,
            &BaselineConfig {
                restarts: 1,
                max_iters: 10,
                ..cfg.clone()
            },
            rng,
        )?
        .centroids;
        let fit = fcm_from_centroids(x, init, cfg);
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

fn harden(memberships: &[Vec<f64>]) -> Result<Partition> {
    let raw: Vec<u32> = memberships
        .iter()
        .map(|u| {
            let mut best = (0usize, f64::NEG_INFINITY);
            for (c, &v) in u.iter().enumerate() {
                if v > best.1 {
                    best = (c, v);
                }
            }
            best.0 as u32
        })
        .collect();
    Partition::from_assignment(&raw)
}

/// Fuzzy c-means on complete data: the hard partition by maximum membership
/// plus the membership matrix.
pub fn fuzzy_cmeans(
    x: &[Vec<f64>],
    cfg: &BaselineConfig,
    rng: &mut Rng,
) -> Result<(Partition, Vec<Vec<f64>>)> {
    let fit = fuzzy_cmeans_fit(x, cfg, rng)?;
    Ok((harden(&fit.memberships)?, fit.memberships))
}

/// Fuzzy c-means with optimal completion: alternates FCM updates with
/// re-imputing each missing entry as the membership-weighted average of the
/// center coordinates.
///
/// Initialization follows the benchmark protocol: at low missing rates the
/// initial centers come from FCM on the fully observed subset; at high
/// rates (or when fewer than `k` complete points exist) from FCM on
/// mean-imputed data.
pub fn fcm_ocs(s: &PointSet, cfg: &BaselineConfig, rng: &mut Rng) -> Result<Partition> {
    cfg.validate()?;
    let d = s.dim();
    let complete_rows: Vec<usize> = (0..s.len())
        .filter(|&i| (0..d).all(|j| s.is_observed(i, j)))
        .collect();
    let low_rate = s.missing_fraction() < OCS_INIT_SWITCH;

    let init_centroids = if low_rate && complete_rows.len() >= cfg.k {
        let subset: Vec<Vec<f64>> = complete_rows.iter().map(|&i| s.point(i).to_vec()).collect();
        fuzzy_cmeans_fit(&subset, cfg, rng)?.centroids
    } else {
        let filled = super::impute::mean_impute(s);
        fuzzy_cmeans_fit(&filled, cfg, rng)?.centroids
    };

    let mut x = super::impute::mean_impute(s);
    let mut centroids = init_centroids;
    let mut memberships: Vec<Vec<f64>> = x
        .iter()
        .map(|p| membership_row(p, &centroids, cfg.fuzzifier))
        .collect();
    let mut objective = fcm_objective(&x, &memberships, &centroids, cfg.fuzzifier);
    for _ in 0..cfg.max_iters {
        // Optimal completion: membership-weighted center average.
        for i in 0..s.len() {
            for j in 0..d {
                if !s.is_observed(i, j) {
                    let mut num = 0.0;
                    let mut den = 0.0;
                    for c in 0..cfg.k {
                        let w = memberships[i][c].powf(cfg.fuzzifier);
                        num += w * centroids[c][j];
                        den += w;
                    }
                    if den > 0.0 {
                        x[i][j] = num / den;
                    }
                }
            }
        }
        centroids = update_centroids(&x, &memberships, cfg.fuzzifier, cfg.k);
        memberships = x
            .iter()
            .map(|p| membership_row(p, &centroids, cfg.fuzzifier))
            .collect();
        let next = fcm_objective(&x, &memberships, &centroids, cfg.fuzzifier);
        let done = (objective - next).abs() < cfg.tolerance;
        objective = next;
        if done {
            break;
        }
    }
    harden(&memberships)
}
