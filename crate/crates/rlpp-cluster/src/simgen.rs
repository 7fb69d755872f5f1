//! Synthetic instance generation, MCAR masking, method-of-moments prior
//! calibration, and the per-repetition method runner.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::baselines::{
    fcm_ocs, fuzzy_cmeans, gibbs_impute, hierarchical, kmeans, kpod, random_cluster,
    BaselineConfig, Linkage,
};
use crate::clusterer::{optimal_cluster, pmax_cluster, pseed_cluster, SearchConfig};
use crate::error::{Error, Result};
use crate::model::{CalibratedPrior, ModelParams, ModelSpec};
use crate::partition::clustering_error;
use crate::point_set::{LabelFunction, PointSet};
use crate::rng::{substream, Rng};

/// Draws the label-conditional Gaussian parameters: fixed models return them
/// as is, the random-parameter models draw from their hyperpriors.
pub(crate) fn draw_label_params(
    model: &ModelSpec,
    label: usize,
    rng: &mut Rng,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    match model.params() {
        ModelParams::Fixed(v) => Ok((v[label].mean.clone(), v[label].covariance.clone())),
        ModelParams::GaussianMean(v) => {
            let p = &v[label];
            let chol = Cholesky::new(p.covariance.clone()).expect("validated SPD");
            let z = DVector::from_fn(p.prior_mean.len(), |_, _| StandardNormal.sample(rng));
            let mean = &p.prior_mean + chol.l() * z / p.mean_confidence.sqrt();
            Ok((mean, p.covariance.clone()))
        }
        ModelParams::GaussianInverseWishart(v) => {
            let p = &v[label];
            let cov = crate::posterior::sample_inverse_wishart(p.dof, &p.scale, rng)?;
            let chol = Cholesky::new(cov.clone()).ok_or_else(|| Error::NotPositiveDefinite {
                context: "drawn covariance".into(),
            })?;
            let z = DVector::from_fn(p.prior_mean.len(), |_, _| StandardNormal.sample(rng));
            let mean = &p.prior_mean + chol.l() * z / p.mean_confidence.sqrt();
            Ok((mean, cov))
        }
    }
}

/// Generates a labeled point set: parameters are drawn from the model's
/// hyperprior (when random), then `n1` points carry label 0 and `n2` points
/// label 1.
pub fn generate_instance(
    model: &ModelSpec,
    n1: usize,
    n2: usize,
    rng: &mut Rng,
) -> Result<(PointSet, LabelFunction)> {
    if n1 + n2 == 0 {
        return Err(Error::Empty("instance"));
    }
    if model.num_labels() != 2 {
        return Err(Error::InvalidParameter {
            name: "model",
            reason: "instance generation expects two labels".into(),
        });
    }
    let d = model.dim();
    let mut points = Vec::with_capacity(n1 + n2);
    let mut labels = Vec::with_capacity(n1 + n2);
    for (label, count) in [(0usize, n1), (1usize, n2)] {
        if count == 0 {
            continue;
        }
        let (mean, cov) = draw_label_params(model, label, rng)?;
        let chol = Cholesky::new(cov).ok_or_else(|| Error::NotPositiveDefinite {
            context: "label covariance".into(),
        })?;
        for _ in 0..count {
            let z = DVector::from_fn(d, |_, _| StandardNormal.sample(rng));
            let x = &mean + chol.l() * z;
            points.push(x.iter().copied().collect());
            labels.push(label as u32);
        }
    }
    let s = PointSet::complete(points)?;
    let phi = LabelFunction::new(labels, 2)?;
    Ok((s, phi))
}

/// Hides each feature of each point independently with probability `p`.
pub fn mcar_mask(s: &PointSet, p: f64, rng: &mut Rng) -> Result<PointSet> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidParameter {
            name: "missing_prob",
            reason: format!("must lie in [0, 1), got {p}"),
        });
    }
    let d = s.dim();
    let points: Vec<Vec<f64>> = (0..s.len()).map(|i| s.point(i).to_vec()).collect();
    let observed: Vec<Vec<bool>> = (0..s.len())
        .map(|i| {
            (0..d)
                .map(|j| s.is_observed(i, j) && rng.random::<f64>() >= p)
                .collect()
        })
        .collect();
    PointSet::new(points, observed)
}

/// Moment-matching estimation of the structured hyperparameters
/// `(m, variance, correlation, dof, mean confidence)` from a matrix with
/// optional entries.
///
/// Estimators: `m` is the grand mean; the scale's implied expected variance
/// `variance/(dof-d-1)` matches the pooled per-feature sample variance; the
/// implied correlation matches the average pairwise sample correlation;
/// `dof` matches the coefficient of variation of per-feature variances to
/// the inverse-Wishart marginal (`dof = d + 3 + 2/cv^2`); the mean
/// confidence matches the between-feature variance of sample means to the
/// expected variance over the confidence. `dof` is clamped to
/// `[d+2, 10^4]`, the confidence to `[1, 10^4]`, the correlation into the
/// positive-definite range.
pub fn calibrate_prior(x: &[Vec<Option<f64>>]) -> Result<CalibratedPrior> {
    if x.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "points",
            reason: "need at least two rows".into(),
        });
    }
    let d = x[0].len();
    if d == 0 {
        return Err(Error::Empty("features"));
    }
    if x.iter().any(|row| row.len() != d) {
        return Err(Error::DimensionMismatch {
            what: "row",
            expected: d,
            found: x.iter().map(|r| r.len()).find(|&l| l != d).unwrap_or(d),
        });
    }

    // Per-feature observed means and sample variances.
    let mut feature_means = vec![0.0; d];
    let mut feature_vars = vec![f64::NAN; d];
    let mut grand_sum = 0.0;
    let mut grand_count = 0usize;
    for j in 0..d {
        let vals: Vec<f64> = x.iter().filter_map(|row| row[j]).collect();
        if vals.is_empty() {
            return Err(Error::DegenerateData(format!(
                "feature {j} has no observed entries"
            )));
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        feature_means[j] = mean;
        grand_sum += vals.iter().sum::<f64>();
        grand_count += vals.len();
        if vals.len() >= 2 {
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
                / (vals.len() - 1) as f64;
            if var == 0.0 {
                return Err(Error::DegenerateData(format!(
                    "feature {j} has zero variance"
                )));
            }
            feature_vars[j] = var;
        }
    }
    let vars: Vec<f64> = feature_vars.iter().copied().filter(|v| v.is_finite()).collect();
    if vars.is_empty() {
        return Err(Error::DegenerateData(
            "no feature has two observed entries".into(),
        ));
    }
    let mean = grand_sum / grand_count as f64;
    let pooled_var = vars.iter().sum::<f64>() / vars.len() as f64;

    // Degrees of freedom from the dispersion of per-feature variances.
    let var_of_vars = vars.iter().map(|v| (v - pooled_var).powi(2)).sum::<f64>()
        / vars.len() as f64;
    let cv2 = var_of_vars / (pooled_var * pooled_var);
    let dof_raw = if cv2 > 0.0 {
        d as f64 + 3.0 + 2.0 / cv2
    } else {
        f64::INFINITY
    };
    let dof = dof_raw.clamp(d as f64 + 2.0, 1e4);

    let variance = pooled_var * (dof - d as f64 - 1.0);

    // Average pairwise sample correlation over jointly observed rows.
    let mut corr_sum = 0.0;
    let mut corr_count = 0usize;
    for a in 0..d {
        for b in a + 1..d {
            let pairs: Vec<(f64, f64)> = x
                .iter()
                .filter_map(|row| match (row[a], row[b]) {
                    (Some(u), Some(v)) => Some((u, v)),
                    _ => None,
                })
                .collect();
            if pairs.len() < 2 {
                continue;
            }
            let n = pairs.len() as f64;
            let ma = pairs.iter().map(|p| p.0).sum::<f64>() / n;
            let mb = pairs.iter().map(|p| p.1).sum::<f64>() / n;
            let mut cov = 0.0;
            let mut va = 0.0;
            let mut vb = 0.0;
            for (u, v) in &pairs {
                cov += (u - ma) * (v - mb);
                va += (u - ma).powi(2);
                vb += (v - mb).powi(2);
            }
            if va > 0.0 && vb > 0.0 {
                corr_sum += cov / (va * vb).sqrt();
                corr_count += 1;
            }
        }
    }
    let corr_raw = if corr_count > 0 {
        corr_sum / corr_count as f64
    } else {
        0.0
    };
    let corr_lo = if d > 1 { -1.0 / (d as f64 - 1.0) } else { -1.0 };
    let correlation = corr_raw.clamp(corr_lo + 1e-6, 1.0 - 1e-6);

    // Mean confidence from the spread of per-feature means.
    let mean_of_means = feature_means.iter().sum::<f64>() / d as f64;
    let var_of_means = feature_means
        .iter()
        .map(|m| (m - mean_of_means).powi(2))
        .sum::<f64>()
        / d as f64;
    let confidence_raw = if var_of_means > 0.0 {
        pooled_var / var_of_means
    } else {
        f64::INFINITY
    };
    let mean_confidence = confidence_raw.clamp(1.0, 1e4);

    Ok(CalibratedPrior {
        mean,
        variance,
        correlation,
        dof,
        mean_confidence,
    })
}

/// One benchmark method, with its per-method settings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Method {
    Optimal,
    Pmax { radius: usize },
    Pseed { radius: usize, seeds: usize },
    KPod,
    FcmOcs,
    KMeans,
    Fcm,
    HierSingle,
    HierComplete,
    Random,
}

impl Method {
    /// Name used in output tables; the search radius is part of the name so
    /// radius sweeps aggregate per radius.
    pub fn name(&self) -> String {
        match self {
            Method::Optimal => "optimal".into(),
            Method::Pmax { radius } => format!("pmax_r{radius}"),
            Method::Pseed { radius, .. } => format!("pseed_r{radius}"),
            Method::KPod => "kpod".into(),
            Method::FcmOcs => "fcm_ocs".into(),
            Method::KMeans => "km".into(),
            Method::Fcm => "fcm".into(),
            Method::HierSingle => "hier_si".into(),
            Method::HierComplete => "hier_co".into(),
            Method::Random => "random".into(),
        }
    }

    /// True for the searches that enumerate all `2^(n-1)` candidates.
    pub fn is_exhaustive(&self) -> bool {
        matches!(self, Method::Optimal | Method::Pmax { .. })
    }

    /// True for the classical algorithms that need imputed complete data.
    fn needs_imputation(&self) -> bool {
        matches!(
            self,
            Method::KMeans | Method::Fcm | Method::HierSingle | Method::HierComplete
        )
    }
}

/// Everything needed to run one repetition of one experiment cell.
#[derive(Debug, Clone)]
pub struct RepetitionSpec<'a> {
    pub generation: &'a ModelSpec,
    pub n1: usize,
    pub n2: usize,
    pub missing_prob: f64,
    pub methods: &'a [Method],
    pub mc_samples: usize,
    pub baseline: BaselineConfig,
    pub gibbs_sweeps: usize,
    pub gibbs_burn_in: usize,
    /// Cell-level seed; repetition streams derive from it.
    pub seed: u64,
    pub force: bool,
}

/// Per-method outcome of one repetition.
#[derive(Debug, Clone)]
pub struct MethodResult {
    pub method: String,
    /// Clustering error in [0, 1]; NaN when the method failed.
    pub error: f64,
    /// Failure reason when `error` is NaN.
    pub note: Option<String>,
    pub runtime_ms: f64,
}

/// Knobs shared by every method run of one repetition.
#[derive(Debug, Clone)]
pub struct MethodRunContext<'a> {
    pub methods: &'a [Method],
    pub mc_samples: usize,
    pub baseline: &'a BaselineConfig,
    pub gibbs_sweeps: usize,
    pub gibbs_burn_in: usize,
    pub force: bool,
    /// Cell-level seed; method streams derive from `(seed, rep_index, ..)`.
    pub seed: u64,
    pub rep_index: u64,
}

fn run_method(
    method: &Method,
    s: &PointSet,
    sizes: (usize, usize),
    model: Option<&ModelSpec>,
    imputed: Option<&Vec<Vec<f64>>>,
    ctx: &MethodRunContext,
    rng: &mut Rng,
) -> Result<crate::partition::Partition> {
    let need_model = || {
        model.ok_or_else(|| Error::InvalidParameter {
            name: "model",
            reason: "no posterior model available for this repetition".into(),
        })
    };
    match method {
        Method::Optimal => Ok(optimal_cluster(
            s,
            need_model()?,
            Some(sizes),
            ctx.mc_samples,
            rng,
            ctx.force,
        )?
        .partition),
        Method::Pmax { radius } => {
            let cfg = SearchConfig {
                hamming_radius: *radius,
                size_constraint: Some(sizes),
                mc_samples: ctx.mc_samples,
                force: ctx.force,
                ..Default::default()
            };
            Ok(pmax_cluster(s, need_model()?, &cfg, rng)?.partition)
        }
        Method::Pseed { radius, seeds } => {
            let cfg = SearchConfig {
                hamming_radius: *radius,
                n_seeds: *seeds,
                size_constraint: Some(sizes),
                mc_samples: ctx.mc_samples,
                force: ctx.force,
                ..Default::default()
            };
            Ok(pseed_cluster(s, need_model()?, &cfg, rng)?.partition)
        }
        Method::KPod => kpod(s, ctx.baseline, rng),
        Method::FcmOcs => fcm_ocs(s, ctx.baseline, rng),
        Method::KMeans => kmeans(imputed.expect("imputed data"), ctx.baseline, rng),
        Method::Fcm => Ok(fuzzy_cmeans(imputed.expect("imputed data"), ctx.baseline, rng)?.0),
        Method::HierSingle => {
            hierarchical(imputed.expect("imputed data"), Linkage::Single, ctx.baseline.k)
        }
        Method::HierComplete => {
            hierarchical(imputed.expect("imputed data"), Linkage::Complete, ctx.baseline.k)
        }
        Method::Random => random_cluster(s.len(), sizes, rng),
    }
}

/// Runs every configured method on one masked instance and scores it
/// against the true labels. Failures are recorded as NaN with a reason
/// rather than aborting.
pub fn score_methods(
    s: &PointSet,
    truth: &LabelFunction,
    sizes: (usize, usize),
    model: Option<&ModelSpec>,
    ctx: &MethodRunContext,
) -> Vec<MethodResult> {
    // Classical algorithms share one imputation per repetition.
    let imputed = if ctx.methods.iter().any(Method::needs_imputation) {
        let mut rng = substream(ctx.seed, &[ctx.rep_index, 2]);
        match gibbs_impute(s, ctx.gibbs_sweeps, ctx.gibbs_burn_in, &mut rng) {
            Ok(x) => Some(Ok(x)),
            Err(e) => Some(Err(e.to_string())),
        }
    } else {
        None
    };

    let mut out = Vec::with_capacity(ctx.methods.len());
    for (mi, method) in ctx.methods.iter().enumerate() {
        let mut rng = substream(ctx.seed, &[ctx.rep_index, 3 + mi as u64]);
        let start = std::time::Instant::now();
        let result = if method.needs_imputation() {
            match imputed.as_ref().expect("imputation ran") {
                Ok(x) => run_method(method, s, sizes, model, Some(x), ctx, &mut rng),
                Err(reason) => Err(Error::DegenerateData(format!("imputation failed: {reason}"))),
            }
        } else {
            run_method(method, s, sizes, model, None, ctx, &mut rng)
        };
        let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
        match result.and_then(|p| clustering_error(truth, &p)) {
            Ok(error) => out.push(MethodResult {
                method: method.name(),
                error,
                note: None,
                runtime_ms,
            }),
            Err(e) => out.push(MethodResult {
                method: method.name(),
                error: f64::NAN,
                note: Some(e.to_string()),
                runtime_ms,
            }),
        }
    }
    out
}

/// Runs one repetition: generate, mask, run every configured method, score.
///
/// For unequal setups, odd repetitions swap which distribution receives
/// `n1` versus `n2` points. Streams derive from `(seed, rep_index)`, so
/// repetitions are independent of execution order.
pub fn run_repetition(spec: &RepetitionSpec, rep_index: u64) -> Result<Vec<MethodResult>> {
    let (n1, n2) = if rep_index % 2 == 1 && spec.n1 != spec.n2 {
        (spec.n2, spec.n1)
    } else {
        (spec.n1, spec.n2)
    };
    let mut gen_rng = substream(spec.seed, &[rep_index, 0]);
    let (complete, truth) = generate_instance(spec.generation, n1, n2, &mut gen_rng)?;
    let mut mask_rng = substream(spec.seed, &[rep_index, 1]);
    let s = mcar_mask(&complete, spec.missing_prob, &mut mask_rng)?;
    let ctx = MethodRunContext {
        methods: spec.methods,
        mc_samples: spec.mc_samples,
        baseline: &spec.baseline,
        gibbs_sweeps: spec.gibbs_sweeps,
        gibbs_burn_in: spec.gibbs_burn_in,
        force: spec.force,
        seed: spec.seed,
        rep_index,
    };
    Ok(score_methods(&s, &truth, (n1, n2), Some(spec.generation), &ctx))
}
