//! Comparison clusterers and imputers.
//!
//! `kmeans`, `fuzzy_cmeans`, and `hierarchical` expect complete data;
//! `kpod` and `fcm_ocs` run directly on incomplete point sets;
//! `mean_impute` and `gibbs_impute` complete a point set for the classical
//! algorithms; `random_cluster` draws a uniform size-respecting partition.

mod fcm;
mod hierarchical;
mod impute;
mod kmeans;

pub use fcm::{fcm_ocs, fuzzy_cmeans};
pub use hierarchical::{hierarchical, Linkage};
pub use impute::{gibbs_impute, mean_impute};
pub use kmeans::{kmeans, kpod, observed_distortion};

use crate::error::{Error, Result};
use crate::partition::Partition;
use crate::rng::Rng;
use rand::seq::SliceRandom;

/// Centroid initialization policy for the iterative baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitPolicy {
    /// Distance-weighted seeding (k-means++ style).
    PlusPlus,
    /// Distinct data points chosen uniformly.
    RandomPoints,
}

/// Shared knobs for the iterative baselines.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    pub k: usize,
    /// Fuzzy-c-means exponent, must exceed 1.
    pub fuzzifier: f64,
    pub max_iters: usize,
    pub tolerance: f64,
    pub restarts: usize,
    pub init: InitPolicy,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            k: 2,
            fuzzifier: 2.0,
            max_iters: 300,
            tolerance: 1e-6,
            restarts: 10,
            init: InitPolicy::PlusPlus,
        }
    }
}

impl BaselineConfig {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::InvalidParameter {
                name: "k",
                reason: "need at least one cluster".into(),
            });
        }
        if self.fuzzifier <= 1.0 {
            return Err(Error::InvalidParameter {
                name: "fuzzifier",
                reason: format!("must exceed 1, got {}", self.fuzzifier),
            });
        }
        if self.tolerance <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "tolerance",
                reason: "must be positive".into(),
            });
        }
        if self.restarts == 0 || self.max_iters == 0 {
            return Err(Error::InvalidParameter {
                name: "restarts/max_iters",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Uniform random partition with the given block sizes.
pub fn random_cluster(n: usize, sizes: (usize, usize), rng: &mut Rng) -> Result<Partition> {
    if sizes.0 + sizes.1 != n {
        return Err(Error::InvalidParameter {
            name: "sizes",
            reason: format!("{}+{} does not sum to {n}", sizes.0, sizes.1),
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut raw = vec![1u32; n];
    for &i in &order[..sizes.0] {
        raw[i] = 0;
    }
    Partition::from_assignment(&raw)
}
