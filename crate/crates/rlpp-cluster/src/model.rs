//! Generative model specifications for the label-conditional Gaussians.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

/// Per-label parameters when means and covariances are known.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedParams {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

/// Per-label parameters when the mean is Gaussian with known covariance:
/// `mu ~ N(prior_mean, covariance / mean_confidence)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMeanParams {
    pub prior_mean: DVector<f64>,
    pub mean_confidence: f64,
    pub covariance: DMatrix<f64>,
}

/// Per-label parameters when both mean and covariance are random:
/// `covariance ~ IW(dof, scale)`, `mu | covariance ~ N(prior_mean, covariance / mean_confidence)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GiwParams {
    pub prior_mean: DVector<f64>,
    pub mean_confidence: f64,
    pub dof: f64,
    pub scale: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelParams {
    Fixed(Vec<FixedParams>),
    GaussianMean(Vec<GaussianMeanParams>),
    GaussianInverseWishart(Vec<GiwParams>),
}

/// A full model: per-label parameters plus the prior over label functions.
///
/// The default label prior is uniform over all `l^n` label functions; an
/// optional per-label weight vector `w` makes `P(phi)` proportional to the
/// product of `w[phi(x)]` over points.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    params: ModelParams,
    label_log_weights: Option<Vec<f64>>,
}

fn check_spd(m: &DMatrix<f64>, name: &'static str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidParameter {
            name,
            reason: "matrix is not square".into(),
        });
    }
    if (m - m.transpose()).amax() > 1e-9 * m.amax().max(1.0) {
        return Err(Error::InvalidParameter {
            name,
            reason: "matrix is not symmetric".into(),
        });
    }
    if Cholesky::new(m.clone()).is_none() {
        return Err(Error::InvalidParameter {
            name,
            reason: "matrix is not positive definite".into(),
        });
    }
    Ok(())
}

impl ModelSpec {
    pub fn fixed(labels: Vec<FixedParams>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Empty("model labels"));
        }
        let d = labels[0].mean.len();
        for p in &labels {
            if p.mean.len() != d || p.covariance.nrows() != d {
                return Err(Error::DimensionMismatch {
                    what: "model parameters",
                    expected: d,
                    found: p.mean.len().max(p.covariance.nrows()),
                });
            }
            check_spd(&p.covariance, "covariance")?;
        }
        Ok(Self {
            params: ModelParams::Fixed(labels),
            label_log_weights: None,
        })
    }

    pub fn gaussian_mean(labels: Vec<GaussianMeanParams>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Empty("model labels"));
        }
        let d = labels[0].prior_mean.len();
        for p in &labels {
            if p.prior_mean.len() != d || p.covariance.nrows() != d {
                return Err(Error::DimensionMismatch {
                    what: "model parameters",
                    expected: d,
                    found: p.prior_mean.len().max(p.covariance.nrows()),
                });
            }
            if p.mean_confidence <= 0.0 {
                return Err(Error::InvalidParameter {
                    name: "mean_confidence",
                    reason: format!("must be positive, got {}", p.mean_confidence),
                });
            }
            check_spd(&p.covariance, "covariance")?;
        }
        Ok(Self {
            params: ModelParams::GaussianMean(labels),
            label_log_weights: None,
        })
    }

    pub fn gaussian_inverse_wishart(labels: Vec<GiwParams>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Empty("model labels"));
        }
        let d = labels[0].prior_mean.len();
        for p in &labels {
            if p.prior_mean.len() != d || p.scale.nrows() != d {
                return Err(Error::DimensionMismatch {
                    what: "model parameters",
                    expected: d,
                    found: p.prior_mean.len().max(p.scale.nrows()),
                });
            }
            if p.mean_confidence <= 0.0 {
                return Err(Error::InvalidParameter {
                    name: "mean_confidence",
                    reason: format!("must be positive, got {}", p.mean_confidence),
                });
            }
            if p.dof <= d as f64 - 1.0 {
                return Err(Error::InvalidParameter {
                    name: "dof",
                    reason: format!("must exceed d - 1 = {}, got {}", d as f64 - 1.0, p.dof),
                });
            }
            check_spd(&p.scale, "scale")?;
        }
        Ok(Self {
            params: ModelParams::GaussianInverseWishart(labels),
            label_log_weights: None,
        })
    }

    /// Replaces the uniform label prior with per-label weights.
    pub fn with_label_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.num_labels() {
            return Err(Error::DimensionMismatch {
                what: "label weights",
                expected: self.num_labels(),
                found: weights.len(),
            });
        }
        if weights.iter().any(|&w| w <= 0.0) {
            return Err(Error::InvalidParameter {
                name: "label_weights",
                reason: "weights must be positive".into(),
            });
        }
        let total: f64 = weights.iter().sum();
        self.label_log_weights = Some(weights.iter().map(|w| (w / total).ln()).collect());
        Ok(self)
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn num_labels(&self) -> usize {
        match &self.params {
            ModelParams::Fixed(v) => v.len(),
            ModelParams::GaussianMean(v) => v.len(),
            ModelParams::GaussianInverseWishart(v) => v.len(),
        }
    }

    pub fn dim(&self) -> usize {
        match &self.params {
            ModelParams::Fixed(v) => v[0].mean.len(),
            ModelParams::GaussianMean(v) => v[0].prior_mean.len(),
            ModelParams::GaussianInverseWishart(v) => v[0].prior_mean.len(),
        }
    }

    /// Log prior weight of assigning one point to `label`; uniform priors
    /// contribute `-ln(l)` per point.
    pub fn label_log_weight(&self, label: usize) -> f64 {
        match &self.label_log_weights {
            Some(w) => w[label],
            None => -(self.num_labels() as f64).ln(),
        }
    }

    /// Swaps the parameter sets of two labels (the label prior is untouched).
    pub fn swap_labels(&self, a: usize, b: usize) -> Self {
        let mut clone = self.clone();
        match &mut clone.params {
            ModelParams::Fixed(v) => v.swap(a, b),
            ModelParams::GaussianMean(v) => v.swap(a, b),
            ModelParams::GaussianInverseWishart(v) => v.swap(a, b),
        }
        clone
    }
}

/// Structured hyperparameters estimated from data by moment matching:
/// a shared scalar mean, an equicorrelated scale matrix, and scalar
/// confidence parameters, expanded to a two-label model.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedPrior {
    /// Shared per-feature prior mean.
    pub mean: f64,
    /// Diagonal value of the scale matrix.
    pub variance: f64,
    /// Off-diagonal correlation of the scale matrix.
    pub correlation: f64,
    /// Inverse-Wishart degrees of freedom.
    pub dof: f64,
    /// Mean pseudo-count.
    pub mean_confidence: f64,
}

impl CalibratedPrior {
    /// Expands into a `l`-label GIW model over `d` features.
    pub fn expand(&self, d: usize, l: usize) -> Result<ModelSpec> {
        if self.variance <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "variance",
                reason: "must be positive".into(),
            });
        }
        let lo = if d > 1 { -1.0 / (d as f64 - 1.0) } else { -1.0 };
        if self.correlation <= lo || self.correlation >= 1.0 {
            return Err(Error::InvalidParameter {
                name: "correlation",
                reason: format!("must lie in ({lo}, 1) for d = {d}"),
            });
        }
        let scale = DMatrix::from_fn(d, d, |r, c| {
            if r == c {
                self.variance
            } else {
                self.correlation * self.variance
            }
        });
        let label = GiwParams {
            prior_mean: DVector::from_element(d, self.mean),
            mean_confidence: self.mean_confidence,
            dof: self.dof,
            scale,
        };
        ModelSpec::gaussian_inverse_wishart(vec![label; l])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_spd_covariance() {
        let bad = FixedParams {
            mean: DVector::zeros(2),
            covariance: DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]),
        };
        assert!(ModelSpec::fixed(vec![bad]).is_err());
    }

    #[test]
    fn rejects_small_dof() {
        let bad = GiwParams {
            prior_mean: DVector::zeros(3),
            mean_confidence: 1.0,
            dof: 1.5,
            scale: DMatrix::identity(3, 3),
        };
        assert!(ModelSpec::gaussian_inverse_wishart(vec![bad]).is_err());
    }

    #[test]
    fn uniform_prior_weight() {
        let spec = ModelSpec::fixed(vec![
            FixedParams {
                mean: DVector::zeros(1),
                covariance: DMatrix::identity(1, 1),
            };
            2
        ])
        .unwrap();
        assert!((spec.label_log_weight(0) - (-(2.0f64).ln())).abs() < 1e-15);
        assert_eq!(spec.label_log_weight(0), spec.label_log_weight(1));
    }

    #[test]
    fn calibrated_prior_expands_to_spd_scale() {
        let prior = CalibratedPrior {
            mean: 1.0,
            variance: 2.0,
            correlation: 0.3,
            dof: 12.0,
            mean_confidence: 4.0,
        };
        let spec = prior.expand(5, 2).unwrap();
        assert_eq!(spec.num_labels(), 2);
        assert_eq!(spec.dim(), 5);
        let bad = CalibratedPrior {
            correlation: -0.5,
            ..prior
        };
        assert!(bad.expand(5, 2).is_err());
    }
}
