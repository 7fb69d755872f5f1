//! Bayes-optimal clustering of point sets with missing-completely-at-random
//! features under Gaussian random labeled point process models.
//!
//! Missing features are marginalized out of the label-function posterior
//! rather than imputed: the points of each label split into groups sharing
//! an observed-feature set, and each group contributes its own Gaussian
//! marginal. Three generative models are supported (known parameters,
//! Gaussian means with known covariances, and Gaussian-inverse-Wishart
//! means and covariances, the last via Monte Carlo covariance draws).
//!
//! The optimal clusterer minimizes the posterior-expected partition cost
//! over all candidate partitions; two suboptimal searches (`pmax_cluster`,
//! `pseed_cluster`) restrict the reference set to a Hamming ball. Classical
//! baselines (k-means, fuzzy c-means, FCM-OCS, k-POD, hierarchical linkage,
//! mean and Gibbs imputation, a random clusterer) and a benchmark harness
//! reproduce error-versus-missing-probability experiments end to end.
//!
//! Start with the `examples/` directory: each file demonstrates one
//! capability, from partition enumeration through the full benchmark.

pub mod baselines;
pub mod clusterer;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod model;
pub mod partition;
pub mod point_set;
pub mod posterior;
pub mod rng;
pub mod simgen;

pub use error::{Error, Result};
pub use model::{CalibratedPrior, FixedParams, GaussianMeanParams, GiwParams, ModelSpec};
pub use partition::{
    clustering_error, enumerate_partitions, partition_cost, partition_hamming_distance, Partition,
};
pub use point_set::{
    decompose_groups, group_statistics, label_mismatch_error, LabelFunction, MissingnessGroup,
    PointSet,
};
pub use posterior::{
    log_posterior, log_posterior_fixed, log_posterior_gaussian_mean, log_posterior_giw,
    posterior_table, sample_inverse_wishart, CovarianceBank, PosteriorEngine, PosteriorTable,
};
pub use clusterer::{
    bayes_cluster, optimal_cluster, pmax_cluster, pseed_cluster, ClusterOutcome, Neighborhood,
    SearchConfig,
};
pub use baselines::{
    fcm_ocs, fuzzy_cmeans, gibbs_impute, hierarchical, kmeans, kpod, mean_impute,
    observed_distortion, random_cluster, BaselineConfig, InitPolicy, Linkage,
};
pub use simgen::{
    calibrate_prior, generate_instance, mcar_mask, run_repetition, Method, MethodResult,
    RepetitionSpec,
};
pub use experiment::{
    load_labeled_matrix, run_dataset, run_experiment, ExperimentConfig, ExperimentSummary,
    GenModelConfig, GridConfig,
};
