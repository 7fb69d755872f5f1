//! Log-domain posterior of label functions and partitions under the three
//! Gaussian models, with missing features marginalized out exactly (known
//! covariances) or by Monte Carlo over inverse-Wishart covariance draws.
//!
//! All likelihood work happens on missingness groups: per group only the
//! observed coordinates enter, through the principal submatrix of the
//! label covariance. Everything accumulates in log domain.

use std::collections::HashMap;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_jittered, log_det, log_sum_exp, principal_submatrix, subvector};
use crate::model::{ModelParams, ModelSpec};
use crate::partition::Partition;
use crate::point_set::{LabelFunction, PointSet};
use crate::rng::Rng;

const LN_2PI: f64 = 1.8378770664093453;

/// Default Monte Carlo sample count for the covariance marginalization.
pub const DEFAULT_MC_SAMPLES: usize = 500;

/// Draws one covariance matrix from an inverse-Wishart distribution via a
/// Bartlett factorization of the corresponding Wishart.
pub fn sample_inverse_wishart(dof: f64, scale: &DMatrix<f64>, rng: &mut Rng) -> Result<DMatrix<f64>> {
    let d = scale.nrows();
    if dof <= d as f64 - 1.0 {
        return Err(Error::InvalidParameter {
            name: "dof",
            reason: format!("must exceed d - 1 = {}, got {dof}", d as f64 - 1.0),
        });
    }
    let scale_chol = Cholesky::new(scale.clone()).ok_or_else(|| Error::NotPositiveDefinite {
        context: "inverse-Wishart scale".into(),
    })?;
    let scale_inv = scale_chol.inverse();
    let l = Cholesky::new(scale_inv)
        .ok_or_else(|| Error::NotPositiveDefinite {
            context: "inverted inverse-Wishart scale".into(),
        })?
        .unpack();

    // Lower-triangular Bartlett factor: chi-square diagonal, standard
    // normal below.
    let mut a = DMatrix::zeros(d, d);
    for i in 0..d {
        let chi = ChiSquared::new(dof - i as f64).map_err(|e| Error::InvalidParameter {
            name: "dof",
            reason: e.to_string(),
        })?;
        a[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = StandardNormal.sample(rng);
        }
    }
    let la = l * a;
    let wishart = &la * la.transpose();
    let sigma = Cholesky::new(wishart)
        .ok_or_else(|| Error::NotPositiveDefinite {
            context: "Wishart draw".into(),
        })?
        .inverse();
    // Symmetrize against floating-point drift.
    Ok((&sigma + sigma.transpose()) * 0.5)
}

/// Pre-drawn covariance samples, one bank per label, shared across every
/// label-function evaluation of a clustering call (common random numbers).
#[derive(Debug, Clone)]
pub struct CovarianceBank {
    draws: Vec<Vec<DMatrix<f64>>>,
}

impl CovarianceBank {
    /// Draws `samples` covariances per label of a Gaussian-inverse-Wishart
    /// model.
    pub fn draw(model: &ModelSpec, samples: usize, rng: &mut Rng) -> Result<Self> {
        let ModelParams::GaussianInverseWishart(labels) = model.params() else {
            return Err(Error::InvalidParameter {
                name: "model",
                reason: "covariance bank requires an inverse-Wishart model".into(),
            });
        };
        if samples == 0 {
            return Err(Error::InvalidParameter {
                name: "mc_samples",
                reason: "need at least one draw".into(),
            });
        }
        let mut draws = Vec::with_capacity(labels.len());
        for p in labels {
            let mut per_label = Vec::with_capacity(samples);
            for _ in 0..samples {
                per_label.push(sample_inverse_wishart(p.dof, &p.scale, rng)?);
            }
            draws.push(per_label);
        }
        Ok(Self { draws })
    }

    pub fn samples(&self) -> usize {
        self.draws[0].len()
    }

    pub fn draw_for(&self, label: usize, j: usize) -> &DMatrix<f64> {
        &self.draws[label][j]
    }
}

/// Inverse and log-determinant of one observed-feature submatrix.
struct SubCov {
    inv: DMatrix<f64>,
    logdet: f64,
}

/// Per-label context for a known covariance matrix.
struct KnownCovCtx {
    per_mask: HashMap<u128, SubCov>,
    cov_logdet: f64,
    /// `nu * Sigma^{-1}`
    nu_cov_inv: DMatrix<f64>,
    /// `nu * Sigma^{-1} m`
    nu_cov_inv_mean: DVector<f64>,
    /// `nu * m^T Sigma^{-1} m`
    nu_mean_qf: f64,
}

fn known_cov_ctx(
    label: usize,
    cov: &DMatrix<f64>,
    prior_mean: &DVector<f64>,
    nu: f64,
    masks: &[u128],
    d: usize,
) -> Result<KnownCovCtx> {
    let mut per_mask = HashMap::with_capacity(masks.len());
    for &mask in masks {
        let idx: Vec<usize> = (0..d).filter(|&j| mask >> j & 1 == 1).collect();
        let sub = principal_submatrix(cov, &idx);
        let chol = cholesky_jittered(&sub, "group covariance").map_err(|_| {
            Error::SingularGroupCovariance {
                label,
                features: idx.clone(),
            }
        })?;
        per_mask.insert(
            mask,
            SubCov {
                logdet: log_det(&chol),
                inv: chol.inverse(),
            },
        );
    }
    let chol = cholesky_jittered(cov, "label covariance")?;
    let cov_logdet = log_det(&chol);
    let cov_inv = chol.inverse();
    let cov_inv_mean = &cov_inv * prior_mean;
    Ok(KnownCovCtx {
        per_mask,
        cov_logdet,
        nu_mean_qf: nu * cov_inv_mean.dot(prior_mean),
        nu_cov_inv_mean: &cov_inv_mean * nu,
        nu_cov_inv: cov_inv * nu,
    })
}

enum EngineKind {
    Fixed {
        means: Vec<DVector<f64>>,
        ctx: Vec<KnownCovCtx>,
    },
    GaussianMean {
        priors: Vec<(DVector<f64>, f64)>,
        ctx: Vec<KnownCovCtx>,
    },
    Giw {
        priors: Vec<(DVector<f64>, f64)>,
        /// One context per label per covariance draw.
        ctx: Vec<Vec<KnownCovCtx>>,
    },
}

/// One group of block members sharing an observed-feature mask.
struct BlockGroup {
    features: Vec<usize>,
    n: f64,
    mean: DVector<f64>,
    scatter: DMatrix<f64>,
    mask: u128,
}

/// Evaluates log posteriors of label functions and partitions for one point
/// set under one model. Immutable after construction; safe to share across
/// threads.
pub struct PosteriorEngine<'a> {
    s: &'a PointSet,
    model: &'a ModelSpec,
    kind: EngineKind,
}

impl<'a> PosteriorEngine<'a> {
    /// Builds an engine; for inverse-Wishart models this draws the
    /// covariance bank from `rng` (`mc_samples` draws per label).
    pub fn new(
        s: &'a PointSet,
        model: &'a ModelSpec,
        mc_samples: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        match model.params() {
            ModelParams::GaussianInverseWishart(_) => {
                let bank = CovarianceBank::draw(model, mc_samples, rng)?;
                Self::with_bank(s, model, &bank)
            }
            _ => Self::with_bank_inner(s, model, None),
        }
    }

    /// Builds an engine over an explicit pre-drawn covariance bank.
    pub fn with_bank(s: &'a PointSet, model: &'a ModelSpec, bank: &CovarianceBank) -> Result<Self> {
        Self::with_bank_inner(s, model, Some(bank))
    }

    fn with_bank_inner(
        s: &'a PointSet,
        model: &'a ModelSpec,
        bank: Option<&CovarianceBank>,
    ) -> Result<Self> {
        let d = s.dim();
        if model.dim() != d {
            return Err(Error::DimensionMismatch {
                what: "model dimension",
                expected: d,
                found: model.dim(),
            });
        }
        // Distinct nonempty observation masks present in the data.
        let mut masks: Vec<u128> = (0..s.len()).map(|i| s.mask(i)).filter(|&m| m != 0).collect();
        masks.sort_unstable();
        masks.dedup();

        let kind = match model.params() {
            ModelParams::Fixed(labels) => {
                let mut ctx = Vec::with_capacity(labels.len());
                for (i, p) in labels.iter().enumerate() {
                    ctx.push(known_cov_ctx(i, &p.covariance, &p.mean, 1.0, &masks, d)?);
                }
                EngineKind::Fixed {
                    means: labels.iter().map(|p| p.mean.clone()).collect(),
                    ctx,
                }
            }
            ModelParams::GaussianMean(labels) => {
                let mut ctx = Vec::with_capacity(labels.len());
                for (i, p) in labels.iter().enumerate() {
                    ctx.push(known_cov_ctx(
                        i,
                        &p.covariance,
                        &p.prior_mean,
                        p.mean_confidence,
                        &masks,
                        d,
                    )?);
                }
                EngineKind::GaussianMean {
                    priors: labels
                        .iter()
                        .map(|p| (p.prior_mean.clone(), p.mean_confidence))
                        .collect(),
                    ctx,
                }
            }
            ModelParams::GaussianInverseWishart(labels) => {
                let bank = bank.expect("inverse-Wishart engine requires a bank");
                let mut ctx = Vec::with_capacity(labels.len());
                for (i, p) in labels.iter().enumerate() {
                    let mut per_draw = Vec::with_capacity(bank.samples());
                    for j in 0..bank.samples() {
                        per_draw.push(known_cov_ctx(
                            i,
                            bank.draw_for(i, j),
                            &p.prior_mean,
                            p.mean_confidence,
                            &masks,
                            d,
                        )?);
                    }
                    ctx.push(per_draw);
                }
                EngineKind::Giw {
                    priors: labels
                        .iter()
                        .map(|p| (p.prior_mean.clone(), p.mean_confidence))
                        .collect(),
                    ctx,
                }
            }
        };
        Ok(Self { s, model, kind })
    }

    pub fn point_set(&self) -> &PointSet {
        self.s
    }

    pub fn model(&self) -> &ModelSpec {
        self.model
    }

    /// Groups block members by observed-feature mask and computes the
    /// per-group sample mean and scatter. Fully missing members are skipped.
    fn block_groups(&self, members: &[usize]) -> Vec<BlockGroup> {
        let d = self.s.dim();
        let mut tagged: Vec<(u128, usize)> = members
            .iter()
            .map(|&i| (self.s.mask(i), i))
            .filter(|&(m, _)| m != 0)
            .collect();
        tagged.sort_unstable();
        let mut groups = Vec::new();
        let mut start = 0;
        while start < tagged.len() {
            let mask = tagged[start].0;
            let mut end = start;
            while end < tagged.len() && tagged[end].0 == mask {
                end += 1;
            }
            let features: Vec<usize> = (0..d).filter(|&j| mask >> j & 1 == 1).collect();
            let dg = features.len();
            let n = (end - start) as f64;
            let mut mean = DVector::zeros(dg);
            for &(_, i) in &tagged[start..end] {
                let row = self.s.point(i);
                for (k, &j) in features.iter().enumerate() {
                    mean[k] += row[j];
                }
            }
            mean /= n;
            let mut scatter = DMatrix::zeros(dg, dg);
            let mut centered = DVector::zeros(dg);
            for &(_, i) in &tagged[start..end] {
                let row = self.s.point(i);
                for (k, &j) in features.iter().enumerate() {
                    centered[k] = row[j] - mean[k];
                }
                scatter.ger(1.0, &centered, &centered, 1.0);
            }
            groups.push(BlockGroup {
                features,
                n,
                mean,
                scatter,
                mask,
            });
            start = end;
        }
        groups
    }

    /// Group likelihood terms shared by all models:
    /// `-(n_g/2)(d_g ln 2pi + ln|Sigma_g|) - tr(Psi_g Sigma_g^{-1}) / 2`.
    fn group_base_term(group: &BlockGroup, sub: &SubCov) -> f64 {
        let dg = group.features.len() as f64;
        let trace: f64 = group
            .scatter
            .as_slice()
            .iter()
            .zip(sub.inv.as_slice())
            .map(|(a, b)| a * b)
            .sum();
        -0.5 * group.n * (dg * LN_2PI + sub.logdet) - 0.5 * trace
    }

    /// Log likelihood of the block under a known mean and covariance.
    fn factor_fixed(&self, groups: &[BlockGroup], mean: &DVector<f64>, ctx: &KnownCovCtx) -> f64 {
        let mut total = 0.0;
        for g in groups {
            let sub = &ctx.per_mask[&g.mask];
            total += Self::group_base_term(g, sub);
            let mu_g = subvector(mean, &g.features);
            let diff = &g.mean - mu_g;
            total -= 0.5 * g.n * (&sub.inv * &diff).dot(&diff);
        }
        total
    }

    /// Log marginal likelihood of the block with the Gaussian mean
    /// integrated out (for one known covariance).
    fn factor_gaussian_mean(
        &self,
        groups: &[BlockGroup],
        nu: f64,
        ctx: &KnownCovCtx,
    ) -> Result<f64> {
        if groups.is_empty() {
            return Ok(0.0);
        }
        let d = self.s.dim();
        let mut group_part = 0.0;
        let mut a = ctx.nu_cov_inv.clone();
        let mut b = ctx.nu_cov_inv_mean.clone();
        let mut c = ctx.nu_mean_qf;
        for g in groups {
            let sub = &ctx.per_mask[&g.mask];
            group_part += Self::group_base_term(g, sub);
            let inv_mean = &sub.inv * &g.mean;
            c += g.n * inv_mean.dot(&g.mean);
            for (rl, &rg) in g.features.iter().enumerate() {
                b[rg] += g.n * inv_mean[rl];
                for (cl, &cg) in g.features.iter().enumerate() {
                    a[(rg, cg)] += g.n * sub.inv[(rl, cl)];
                }
            }
        }
        let chol = cholesky_jittered(&a, "mean-marginal precision")?;
        let logdet_a = log_det(&chol);
        let a_inv_b = chol.solve(&b);
        Ok(group_part + 0.5 * (d as f64) * nu.ln()
            - 0.5 * ctx.cov_logdet
            - 0.5 * logdet_a
            - 0.5 * (c - b.dot(&a_inv_b)))
    }

    /// Log likelihood factor of one block under one label.
    fn block_label_factor(&self, members: &[usize], label: usize) -> Result<f64> {
        let groups = self.block_groups(members);
        if groups.is_empty() {
            // Only fully missing points: likelihood factor 1.
            return Ok(0.0);
        }
        match &self.kind {
            EngineKind::Fixed { means, ctx } => {
                Ok(self.factor_fixed(&groups, &means[label], &ctx[label]))
            }
            EngineKind::GaussianMean { priors, ctx } => {
                let (_, nu) = &priors[label];
                self.factor_gaussian_mean(&groups, *nu, &ctx[label])
            }
            EngineKind::Giw { priors, ctx } => {
                let (_, nu) = &priors[label];
                let per_draw = &ctx[label];
                let mut logs = Vec::with_capacity(per_draw.len());
                for draw_ctx in per_draw {
                    logs.push(self.factor_gaussian_mean(&groups, *nu, draw_ctx)?);
                }
                if logs.iter().any(|v| v.is_nan()) {
                    return Err(Error::DegenerateData(
                        "covariance draw produced a NaN integrand".into(),
                    ));
                }
                let lse = log_sum_exp(&logs);
                if !lse.is_finite() {
                    return Err(Error::DegenerateData(
                        "every covariance draw underflowed the integrand".into(),
                    ));
                }
                Ok(lse - (per_draw.len() as f64).ln())
            }
        }
    }

    /// Log unnormalized posterior of one label function:
    /// `ln P(phi) + ln f(S | phi)`.
    pub fn log_label_function(&self, phi: &LabelFunction) -> Result<f64> {
        if phi.len() != self.s.len() {
            return Err(Error::DimensionMismatch {
                what: "label function",
                expected: self.s.len(),
                found: phi.len(),
            });
        }
        if phi.num_labels() > self.model.num_labels() {
            return Err(Error::DimensionMismatch {
                what: "label alphabet",
                expected: self.model.num_labels(),
                found: phi.num_labels(),
            });
        }
        let l = self.model.num_labels();
        let mut members = vec![Vec::new(); l];
        for i in 0..phi.len() {
            members[phi.label(i) as usize].push(i);
        }
        let mut total = 0.0;
        for (label, m) in members.iter().enumerate() {
            total += m.len() as f64 * self.model.label_log_weight(label);
            if !m.is_empty() {
                total += self.block_label_factor(m, label)?;
            }
        }
        Ok(total)
    }

    /// Log unnormalized posterior mass of a partition: the log-sum over all
    /// label functions inducing it.
    pub fn log_partition(&self, partition: &Partition) -> Result<f64> {
        if partition.len() != self.s.len() {
            return Err(Error::DimensionMismatch {
                what: "partition",
                expected: self.s.len(),
                found: partition.len(),
            });
        }
        self.log_blocks(&partition.blocks())
    }

    /// As `log_partition`, over explicit block member lists.
    pub(crate) fn log_blocks(&self, blocks: &[Vec<usize>]) -> Result<f64> {
        let l = self.model.num_labels();
        let k = blocks.len();
        if k > l {
            return Err(Error::InvalidParameter {
                name: "partition",
                reason: format!("{k} blocks exceed the model's {l} labels"),
            });
        }
        // Factor of every block under every label.
        let mut factors = vec![vec![0.0; l]; k];
        for (b, members) in blocks.iter().enumerate() {
            for label in 0..l {
                factors[b][label] = self.block_label_factor(members, label)?;
            }
        }
        // Sum over injective block -> label assignments.
        let mut logs = Vec::new();
        let mut assignment = vec![usize::MAX; k];
        let mut used = vec![false; l];
        fn rec(
            b: usize,
            k: usize,
            l: usize,
            blocks: &[Vec<usize>],
            factors: &[Vec<f64>],
            model: &ModelSpec,
            assignment: &mut Vec<usize>,
            used: &mut Vec<bool>,
            logs: &mut Vec<f64>,
        ) {
            if b == k {
                let mut total = 0.0;
                for (bb, &lab) in assignment.iter().enumerate() {
                    total += factors[bb][lab]
                        + blocks[bb].len() as f64 * model.label_log_weight(lab);
                }
                logs.push(total);
                return;
            }
            for lab in 0..l {
                if !used[lab] {
                    used[lab] = true;
                    assignment[b] = lab;
                    rec(b + 1, k, l, blocks, factors, model, assignment, used, logs);
                    used[lab] = false;
                }
            }
        }
        rec(
            0,
            k,
            l,
            blocks,
            &factors,
            self.model,
            &mut assignment,
            &mut used,
            &mut logs,
        );
        Ok(log_sum_exp(&logs))
    }
}

/// Log unnormalized posterior of a label function under a known-parameters
/// model.
pub fn log_posterior_fixed(s: &PointSet, phi: &LabelFunction, model: &ModelSpec) -> Result<f64> {
    let ModelParams::Fixed(_) = model.params() else {
        return Err(Error::InvalidParameter {
            name: "model",
            reason: "expected fixed means and covariances".into(),
        });
    };
    PosteriorEngine::with_bank_inner(s, model, None)?.log_label_function(phi)
}

/// Log unnormalized posterior under Gaussian means and known covariances,
/// with the means integrated out in closed form.
pub fn log_posterior_gaussian_mean(
    s: &PointSet,
    phi: &LabelFunction,
    model: &ModelSpec,
) -> Result<f64> {
    let ModelParams::GaussianMean(_) = model.params() else {
        return Err(Error::InvalidParameter {
            name: "model",
            reason: "expected Gaussian means with known covariances".into(),
        });
    };
    PosteriorEngine::with_bank_inner(s, model, None)?.log_label_function(phi)
}

/// Log unnormalized posterior under the Gaussian-inverse-Wishart model,
/// with the covariances marginalized by `mc_samples` Monte Carlo draws.
/// Deterministic given the RNG state.
pub fn log_posterior_giw(
    s: &PointSet,
    phi: &LabelFunction,
    model: &ModelSpec,
    mc_samples: usize,
    rng: &mut Rng,
) -> Result<f64> {
    let ModelParams::GaussianInverseWishart(_) = model.params() else {
        return Err(Error::InvalidParameter {
            name: "model",
            reason: "expected Gaussian-inverse-Wishart model".into(),
        });
    };
    PosteriorEngine::new(s, model, mc_samples, rng)?.log_label_function(phi)
}

/// Log unnormalized posterior under any model variant.
pub fn log_posterior(
    s: &PointSet,
    phi: &LabelFunction,
    model: &ModelSpec,
    mc_samples: usize,
    rng: &mut Rng,
) -> Result<f64> {
    PosteriorEngine::new(s, model, mc_samples, rng)?.log_label_function(phi)
}

/// Reference partitions with their normalized posterior probabilities.
#[derive(Debug, Clone)]
pub struct PosteriorTable {
    entries: Vec<(Partition, f64, f64)>,
    log_normalizer: f64,
}

impl PosteriorTable {
    pub(crate) fn from_logs(partitions: Vec<Partition>, logs: Vec<f64>) -> Self {
        let log_normalizer = log_sum_exp(&logs);
        let entries = partitions
            .into_iter()
            .zip(logs)
            .map(|(p, lp)| (p, lp, (lp - log_normalizer).exp()))
            .collect();
        Self {
            entries,
            log_normalizer,
        }
    }

    /// `(partition, log unnormalized posterior, normalized probability)`.
    pub fn entries(&self) -> &[(Partition, f64, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Log-sum-exp of the stored unnormalized posteriors.
    pub fn log_normalizer(&self) -> f64 {
        self.log_normalizer
    }

    /// Entry with the highest probability; ties go to the earliest entry.
    pub fn map_entry(&self) -> &(Partition, f64, f64) {
        let mut best = 0;
        for (i, e) in self.entries.iter().enumerate().skip(1) {
            if e.2 > self.entries[best].2 {
                best = i;
            }
        }
        &self.entries[best]
    }
}

/// Builds the posterior table over a reference set of partitions: each
/// partition's mass sums its inducing label functions, normalized over the
/// reference set.
pub fn posterior_table(
    s: &PointSet,
    reference: &[Partition],
    model: &ModelSpec,
    mc_samples: usize,
    rng: &mut Rng,
) -> Result<PosteriorTable> {
    if reference.is_empty() {
        return Err(Error::Empty("reference set"));
    }
    let engine = PosteriorEngine::new(s, model, mc_samples, rng)?;
    let logs = reference
        .iter()
        .map(|p| engine.log_partition(p))
        .collect::<Result<Vec<f64>>>()?;
    Ok(PosteriorTable::from_logs(reference.to_vec(), logs))
}
