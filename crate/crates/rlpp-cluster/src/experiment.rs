//! Experiment harness: plain-text configs, repetition grids over missing
//! probabilities and sample-size setups, and CSV outputs.
//!
//! The long-format `runs.csv` is a pure function of the config and master
//! seed (wall-clock timings go to a sibling `timings.csv` so reruns are
//! byte-identical). `summary.csv` aggregates mean error and standard error
//! per (setup, missing probability, method), excluding failed repetitions
//! pairwise.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::baselines::BaselineConfig;
use crate::error::{Error, Result};
use crate::model::{FixedParams, GaussianMeanParams, GiwParams, ModelSpec};
use crate::point_set::{LabelFunction, PointSet};
use crate::rng::{derive_seed, substream};
use crate::simgen::{
    calibrate_prior, mcar_mask, score_methods, Method, MethodResult, MethodRunContext,
    RepetitionSpec,
};

/// Structured generation-model settings, expanded to per-label parameters
/// over `d` features (means are constant vectors, covariances and scales
/// isotropic).
#[derive(Debug, Clone, PartialEq)]
pub enum GenModelConfig {
    Fixed { mu: [f64; 2], sigma: [f64; 2] },
    GaussianMean { m: [f64; 2], nu: [f64; 2], sigma: [f64; 2] },
    Giw { m: [f64; 2], nu: [f64; 2], kappa: f64, psi: f64 },
}

impl GenModelConfig {
    pub fn build(&self, d: usize) -> Result<ModelSpec> {
        match *self {
            GenModelConfig::Fixed { mu, sigma } => ModelSpec::fixed(
                (0..2)
                    .map(|i| FixedParams {
                        mean: DVector::from_element(d, mu[i]),
                        covariance: DMatrix::identity(d, d) * sigma[i],
                    })
                    .collect(),
            ),
            GenModelConfig::GaussianMean { m, nu, sigma } => ModelSpec::gaussian_mean(
                (0..2)
                    .map(|i| GaussianMeanParams {
                        prior_mean: DVector::from_element(d, m[i]),
                        mean_confidence: nu[i],
                        covariance: DMatrix::identity(d, d) * sigma[i],
                    })
                    .collect(),
            ),
            GenModelConfig::Giw { m, nu, kappa, psi } => ModelSpec::gaussian_inverse_wishart(
                (0..2)
                    .map(|i| GiwParams {
                        prior_mean: DVector::from_element(d, m[i]),
                        mean_confidence: nu[i],
                        dof: kappa,
                        scale: DMatrix::identity(d, d) * psi,
                    })
                    .collect(),
            ),
        }
    }
}

/// One grid of the experiment: the cross product of setups and missing
/// probabilities, run with one method list.
#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub setups: Vec<(usize, usize)>,
    pub missing_probs: Vec<f64>,
    pub methods: Vec<Method>,
}

/// Dataset-path settings.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetConfig {
    /// Label column, by header name or zero-based index.
    pub label_column: Option<String>,
    /// Number of leading non-label columns used for clustering
    /// (default: all).
    pub features: Option<usize>,
    /// Number of further columns held out for prior calibration
    /// (0 = calibrate on the clustering features).
    pub calib_features: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: GenModelConfig,
    pub d: usize,
    pub reps: u64,
    pub seed: u64,
    pub mc_samples: usize,
    /// Worker threads; 0 = all available cores.
    pub workers: usize,
    pub baseline: BaselineConfig,
    pub gibbs_sweeps: usize,
    pub gibbs_burn_in: usize,
    pub grids: Vec<GridConfig>,
    pub dataset: DatasetConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: GenModelConfig::Fixed {
                mu: [0.0, 0.445],
                sigma: [0.23, 0.23],
            },
            d: 5,
            reps: 100,
            seed: 1,
            mc_samples: crate::posterior::DEFAULT_MC_SAMPLES,
            workers: 0,
            baseline: BaselineConfig::default(),
            gibbs_sweeps: 500,
            gibbs_burn_in: 100,
            grids: Vec::new(),
            dataset: DatasetConfig::default(),
        }
    }
}

fn config_err(line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value
        .parse::<T>()
        .map_err(|_| config_err(line, format!("cannot parse {key} = {value:?}")))
}

fn parse_list<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split([' ', ',', '\t'])
        .filter(|t| !t.is_empty())
        .map(|t| parse_num(line, key, t))
        .collect()
}

fn parse_setups(line: usize, value: &str) -> Result<Vec<(usize, usize)>> {
    value
        .split([' ', ','])
        .filter(|t| !t.is_empty())
        .map(|tok| {
            let (a, b) = tok
                .split_once('+')
                .ok_or_else(|| config_err(line, format!("setup {tok:?} is not of the form n1+n2")))?;
            Ok((
                parse_num(line, "setup", a.trim())?,
                parse_num(line, "setup", b.trim())?,
            ))
        })
        .collect()
}

/// Parses one method token: a name with optional `:key=value` settings,
/// e.g. `pmax:r=2` or `pseed:r=1,s=5`.
fn parse_method(line: usize, token: &str) -> Result<Method> {
    let (name, args) = match token.split_once(':') {
        Some((n, a)) => (n, Some(a)),
        None => (token, None),
    };
    let mut radius = 1usize;
    let mut seeds = 5usize;
    if let Some(args) = args {
        for kv in args.split(',').filter(|t| !t.is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| config_err(line, format!("bad method setting {kv:?}")))?;
            match k.trim() {
                "r" | "radius" => radius = parse_num(line, "radius", v.trim())?,
                "s" | "seeds" => seeds = parse_num(line, "seeds", v.trim())?,
                other => return Err(config_err(line, format!("unknown method setting {other:?}"))),
            }
        }
    }
    Ok(match name.trim() {
        "optimal" => Method::Optimal,
        "pmax" => Method::Pmax { radius },
        "pseed" => Method::Pseed { radius, seeds },
        "kpod" | "k-pod" => Method::KPod,
        "fcm-ocs" | "fcm_ocs" => Method::FcmOcs,
        "km" | "kmeans" => Method::KMeans,
        "fcm" => Method::Fcm,
        "hier-si" | "hier_si" => Method::HierSingle,
        "hier-co" | "hier_co" => Method::HierComplete,
        "random" => Method::Random,
        other => return Err(config_err(line, format!("unknown method {other:?}"))),
    })
}

struct RawGrid {
    setups: Vec<(usize, usize)>,
    missing_probs: Vec<f64>,
    methods: Vec<Method>,
    radius_sweep: Vec<usize>,
    line: usize,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_str(&text)
    }

    /// Parses the plain-text `key = value` format with `[grid]` sections.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut model_name: Option<String> = None;
        let mut scalars: BTreeMap<String, (usize, f64)> = BTreeMap::new();
        let mut grids: Vec<RawGrid> = Vec::new();
        let mut in_grid = false;

        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line == "[grid]" {
                grids.push(RawGrid {
                    setups: Vec::new(),
                    missing_probs: Vec::new(),
                    methods: Vec::new(),
                    radius_sweep: Vec::new(),
                    line: line_no,
                });
                in_grid = true;
                continue;
            }
            if line.starts_with('[') {
                return Err(config_err(line_no, format!("unknown section {line:?}")));
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| config_err(line_no, format!("expected key = value, got {line:?}")))?;
            let key = key.trim();
            let value = value.trim();
            if in_grid {
                let grid = grids.last_mut().expect("inside a grid");
                match key {
                    "setups" => grid.setups = parse_setups(line_no, value)?,
                    "missing_probs" => grid.missing_probs = parse_list(line_no, key, value)?,
                    "methods" => {
                        grid.methods = value
                            .split([' ', '\t'])
                            .filter(|t| !t.is_empty())
                            .map(|t| parse_method(line_no, t))
                            .collect::<Result<Vec<Method>>>()?
                    }
                    "radius_sweep" => grid.radius_sweep = parse_list(line_no, key, value)?,
                    other => {
                        return Err(config_err(line_no, format!("unknown grid key {other:?}")))
                    }
                }
                continue;
            }
            match key {
                "model" => model_name = Some(value.to_string()),
                "d" => cfg.d = parse_num(line_no, key, value)?,
                "reps" => cfg.reps = parse_num(line_no, key, value)?,
                "seed" => cfg.seed = parse_num(line_no, key, value)?,
                "mc_samples" => cfg.mc_samples = parse_num(line_no, key, value)?,
                "workers" => cfg.workers = parse_num(line_no, key, value)?,
                "restarts" => cfg.baseline.restarts = parse_num(line_no, key, value)?,
                "max_iters" => cfg.baseline.max_iters = parse_num(line_no, key, value)?,
                "tolerance" => cfg.baseline.tolerance = parse_num(line_no, key, value)?,
                "fuzzifier" => cfg.baseline.fuzzifier = parse_num(line_no, key, value)?,
                "gibbs_sweeps" => cfg.gibbs_sweeps = parse_num(line_no, key, value)?,
                "gibbs_burn_in" => cfg.gibbs_burn_in = parse_num(line_no, key, value)?,
                "label_column" => cfg.dataset.label_column = Some(value.to_string()),
                "features" => cfg.dataset.features = Some(parse_num(line_no, key, value)?),
                "calib_features" => cfg.dataset.calib_features = parse_num(line_no, key, value)?,
                "mu1" | "mu2" | "sigma" | "sigma1" | "sigma2" | "m1" | "m2" | "nu1" | "nu2"
                | "kappa" | "psi" => {
                    scalars.insert(key.to_string(), (line_no, parse_num(line_no, key, value)?));
                }
                other => return Err(config_err(line_no, format!("unknown key {other:?}"))),
            }
        }

        let get = |scalars: &BTreeMap<String, (usize, f64)>, key: &str, default: f64| {
            scalars.get(key).map(|&(_, v)| v).unwrap_or(default)
        };
        let sigma_pair = |scalars: &BTreeMap<String, (usize, f64)>, default: f64| {
            let shared = get(scalars, "sigma", default);
            [
                get(scalars, "sigma1", shared),
                get(scalars, "sigma2", shared),
            ]
        };
        cfg.model = match model_name.as_deref() {
            None | Some("fixed") => GenModelConfig::Fixed {
                mu: [get(&scalars, "mu1", 0.0), get(&scalars, "mu2", 0.445)],
                sigma: sigma_pair(&scalars, 0.23),
            },
            Some("gaussian-mean") | Some("gaussian_mean") => GenModelConfig::GaussianMean {
                m: [get(&scalars, "m1", 0.0), get(&scalars, "m2", 0.45)],
                nu: [get(&scalars, "nu1", 30.0), get(&scalars, "nu2", 5.0)],
                sigma: sigma_pair(&scalars, 0.28),
            },
            Some("giw") => GenModelConfig::Giw {
                m: [get(&scalars, "m1", 0.0), get(&scalars, "m2", 0.45)],
                nu: [get(&scalars, "nu1", 30.0), get(&scalars, "nu2", 5.0)],
                kappa: get(&scalars, "kappa", 75.0),
                psi: get(&scalars, "psi", 20.7),
            },
            Some(other) => {
                return Err(config_err(1, format!("unknown model {other:?}")));
            }
        };

        for raw in grids {
            if raw.setups.is_empty() {
                return Err(config_err(raw.line, "grid needs setups"));
            }
            if raw.missing_probs.is_empty() {
                return Err(config_err(raw.line, "grid needs missing_probs"));
            }
            if raw.methods.is_empty() {
                return Err(config_err(raw.line, "grid needs methods"));
            }
            for &p in &raw.missing_probs {
                if !(0.0..1.0).contains(&p) {
                    return Err(config_err(
                        raw.line,
                        format!("missing probability {p} outside [0, 1)"),
                    ));
                }
            }
            let methods = if raw.radius_sweep.is_empty() {
                raw.methods
            } else {
                // Expand radius-parameterized methods, one entry per radius.
                let mut out = Vec::new();
                for m in raw.methods {
                    match m {
                        Method::Pmax { .. } => {
                            for &r in &raw.radius_sweep {
                                out.push(Method::Pmax { radius: r });
                            }
                        }
                        Method::Pseed { seeds, .. } => {
                            for &r in &raw.radius_sweep {
                                out.push(Method::Pseed { radius: r, seeds });
                            }
                        }
                        other => out.push(other),
                    }
                }
                out
            };
            cfg.grids.push(GridConfig {
                setups: raw.setups,
                missing_probs: raw.missing_probs,
                methods,
            });
        }
        if cfg.reps == 0 {
            return Err(config_err(1, "reps must be at least 1"));
        }
        Ok(cfg)
    }

    /// Refuses exhaustive searches beyond the size guard unless forced.
    fn check_guard(&self, force: bool) -> Result<()> {
        if force {
            return Ok(());
        }
        for grid in &self.grids {
            if grid.methods.iter().any(Method::is_exhaustive) {
                for &(a, b) in &grid.setups {
                    if a + b > crate::clusterer::EXHAUSTIVE_GUARD {
                        return Err(Error::SizeGuard {
                            n: a + b,
                            limit: crate::clusterer::EXHAUSTIVE_GUARD,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// One long-format result row.
#[derive(Debug, Clone)]
pub struct RunRow {
    pub setup: (usize, usize),
    pub missing_prob: f64,
    pub method: String,
    pub rep: u64,
    pub error: f64,
    pub runtime_ms: f64,
    pub note: Option<String>,
}

/// One aggregated row: mean and standard error over non-failed repetitions.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub setup: (usize, usize),
    pub missing_prob: f64,
    pub method: String,
    pub mean_error: f64,
    pub std_error: f64,
    pub reps_used: u64,
}

#[derive(Debug, Clone)]
pub struct ExperimentSummary {
    pub rows: Vec<RunRow>,
    pub summary: Vec<SummaryRow>,
}

impl ExperimentSummary {
    pub fn mean_error(&self, setup: (usize, usize), prob: f64, method: &str) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|r| r.setup == setup && r.missing_prob == prob && r.method == method)
    }
}

fn aggregate(rows: &[RunRow]) -> Vec<SummaryRow> {
    let mut order: Vec<((usize, usize), u64, String)> = Vec::new();
    let mut groups: BTreeMap<((usize, usize), u64, String), Vec<f64>> = BTreeMap::new();
    for row in rows {
        let key = (row.setup, row.missing_prob.to_bits(), row.method.clone());
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(row.error);
    }
    order
        .into_iter()
        .map(|key| {
            let values: Vec<f64> = groups[&key].iter().copied().filter(|v| !v.is_nan()).collect();
            let count = values.len() as f64;
            let (mean, se) = if values.is_empty() {
                (f64::NAN, f64::NAN)
            } else {
                let mean = values.iter().sum::<f64>() / count;
                let var = if values.len() > 1 {
                    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0)
                } else {
                    0.0
                };
                (mean, (var / count).sqrt())
            };
            SummaryRow {
                setup: key.0,
                missing_prob: f64::from_bits(key.1),
                method: key.2,
                mean_error: mean,
                std_error: se,
                reps_used: values.len() as u64,
            }
        })
        .collect()
}

fn write_outputs(out_dir: &Path, rows: &[RunRow], summary: &[SummaryRow]) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let mut runs = std::io::BufWriter::new(std::fs::File::create(out_dir.join("runs.csv"))?);
    writeln!(runs, "setup,missing_prob,method,rep,error")?;
    for r in rows {
        writeln!(
            runs,
            "{}+{},{},{},{},{:.6}",
            r.setup.0, r.setup.1, r.missing_prob, r.method, r.rep, r.error
        )?;
    }
    runs.flush()?;

    let mut timings = std::io::BufWriter::new(std::fs::File::create(out_dir.join("timings.csv"))?);
    writeln!(timings, "setup,missing_prob,method,rep,runtime_ms")?;
    for r in rows {
        writeln!(
            timings,
            "{}+{},{},{},{},{:.3}",
            r.setup.0, r.setup.1, r.missing_prob, r.method, r.rep, r.runtime_ms
        )?;
    }
    timings.flush()?;

    let mut agg = std::io::BufWriter::new(std::fs::File::create(out_dir.join("summary.csv"))?);
    writeln!(agg, "setup,missing_prob,method,mean_error,std_error,reps_used")?;
    for r in summary {
        writeln!(
            agg,
            "{}+{},{},{},{:.6},{:.6},{}",
            r.setup.0, r.setup.1, r.missing_prob, r.method, r.mean_error, r.std_error, r.reps_used
        )?;
    }
    agg.flush()?;
    Ok(())
}

fn build_pool(workers: usize) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if workers > 0 {
        builder = builder.num_threads(workers);
    }
    builder.build().map_err(|e| Error::InvalidParameter {
        name: "workers",
        reason: e.to_string(),
    })
}

/// Reorders per-repetition method rows into the output order
/// (setup, missing probability, method, repetition).
fn collect_rows(
    grid: &GridConfig,
    per_cell: Vec<((usize, usize), f64, Vec<Vec<MethodResult>>)>,
) -> Vec<RunRow> {
    let mut rows = Vec::new();
    for (setup, prob, reps) in per_cell {
        for mi in 0..grid.methods.len() {
            for (rep, results) in reps.iter().enumerate() {
                let r = &results[mi];
                rows.push(RunRow {
                    setup,
                    missing_prob: prob,
                    method: r.method.clone(),
                    rep: rep as u64,
                    error: r.error,
                    runtime_ms: r.runtime_ms,
                    note: r.note.clone(),
                });
            }
        }
    }
    rows
}

/// Runs the synthetic-experiment grids and writes `runs.csv`,
/// `timings.csv`, and `summary.csv` into `out_dir`.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    force: bool,
) -> Result<ExperimentSummary> {
    if cfg.grids.is_empty() {
        return Err(Error::Empty("experiment grids"));
    }
    cfg.check_guard(force)?;
    let model = cfg.model.build(cfg.d)?;
    let pool = build_pool(cfg.workers)?;

    let mut all_rows = Vec::new();
    for (gi, grid) in cfg.grids.iter().enumerate() {
        let mut cells = Vec::new();
        for (si, &setup) in grid.setups.iter().enumerate() {
            for (pi, &prob) in grid.missing_probs.iter().enumerate() {
                cells.push((si, pi, setup, prob));
            }
        }
        let per_cell: Result<Vec<_>> = pool.install(|| {
            cells
                .par_iter()
                .map(|&(si, pi, setup, prob)| {
                    let cell_seed = derive_seed(cfg.seed, &[gi as u64, si as u64, pi as u64]);
                    let spec = RepetitionSpec {
                        generation: &model,
                        n1: setup.0,
                        n2: setup.1,
                        missing_prob: prob,
                        methods: &grid.methods,
                        mc_samples: cfg.mc_samples,
                        baseline: cfg.baseline.clone(),
                        gibbs_sweeps: cfg.gibbs_sweeps,
                        gibbs_burn_in: cfg.gibbs_burn_in,
                        seed: cell_seed,
                        force,
                    };
                    let reps: Result<Vec<Vec<MethodResult>>> = (0..cfg.reps)
                        .into_par_iter()
                        .map(|rep| crate::simgen::run_repetition(&spec, rep))
                        .collect();
                    Ok((setup, prob, reps?))
                })
                .collect()
        });
        all_rows.extend(collect_rows(grid, per_cell?));
    }
    let summary = aggregate(&all_rows);
    write_outputs(out_dir, &all_rows, &summary)?;
    Ok(ExperimentSummary {
        rows: all_rows,
        summary,
    })
}

// --- dataset path ---------------------------------------------------------

/// A delimited matrix with a label column and optional entries
/// (`NA` or empty = missing).
#[derive(Debug, Clone)]
pub struct LabeledMatrix {
    pub labels: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
    pub feature_names: Vec<String>,
}

fn parse_cell(cell: &str) -> Option<Option<f64>> {
    let t = cell.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan") {
        return Some(None);
    }
    t.parse::<f64>().ok().map(Some)
}

fn detect_delimiter(line: &str) -> char {
    for cand in [',', '\t', ';'] {
        if line.contains(cand) {
            return cand;
        }
    }
    ' '
}

fn split_line(line: &str, delim: char) -> Vec<String> {
    if delim == ' ' {
        line.split_whitespace().map(str::to_string).collect()
    } else {
        line.split(delim).map(|t| t.trim().to_string()).collect()
    }
}

/// Loads a labeled delimited matrix. The header row is detected by its
/// non-numeric cells; the label column is selected by name (requires a
/// header) or zero-based index.
pub fn load_labeled_matrix(path: &Path, label_column: Option<&str>) -> Result<LabeledMatrix> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let first = lines.next().ok_or(Error::Empty("dataset file"))?;
    let delim = detect_delimiter(first);
    let first_cells = split_line(first, delim);
    let ncols = first_cells.len();
    if ncols < 2 {
        return Err(Error::DegenerateData(
            "dataset needs a label column and at least one feature".into(),
        ));
    }

    let label_spec = label_column.unwrap_or("0");
    let by_index = label_spec.parse::<usize>().ok();
    let (label_idx, has_header) = match by_index {
        Some(idx) => {
            if idx >= ncols {
                return Err(Error::InvalidParameter {
                    name: "label_column",
                    reason: format!("index {idx} out of {ncols} columns"),
                });
            }
            // Header iff any non-label cell of the first row is non-numeric.
            let header = first_cells
                .iter()
                .enumerate()
                .any(|(j, c)| j != idx && parse_cell(c).is_none());
            (idx, header)
        }
        None => {
            let idx = first_cells
                .iter()
                .position(|c| c == label_spec)
                .ok_or_else(|| Error::InvalidParameter {
                    name: "label_column",
                    reason: format!("no header column named {label_spec:?}"),
                })?;
            (idx, true)
        }
    };

    let feature_names: Vec<String> = if has_header {
        first_cells
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != label_idx)
            .map(|(_, c)| c.clone())
            .collect()
    } else {
        (0..ncols - 1).map(|j| format!("f{j}")).collect()
    };

    let mut labels = Vec::new();
    let mut values = Vec::new();
    let data_lines: Vec<&str> = if has_header {
        lines.collect()
    } else {
        std::iter::once(first).chain(lines).collect()
    };
    for (i, line) in data_lines.iter().enumerate() {
        let cells = split_line(line, delim);
        if cells.len() != ncols {
            return Err(Error::Config {
                line: i + 1 + has_header as usize,
                message: format!("expected {ncols} columns, found {}", cells.len()),
            });
        }
        labels.push(cells[label_idx].clone());
        let row: Vec<Option<f64>> = cells
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != label_idx)
            .map(|(j, c)| {
                parse_cell(c).ok_or_else(|| Error::Config {
                    line: i + 1 + has_header as usize,
                    message: format!("cannot parse cell {c:?} in column {j}"),
                })
            })
            .collect::<Result<_>>()?;
        values.push(row);
    }
    if values.is_empty() {
        return Err(Error::Empty("dataset rows"));
    }
    Ok(LabeledMatrix {
        labels,
        values,
        feature_names,
    })
}

/// Runs the dataset experiment: per repetition, stratified-sample the two
/// label groups, calibrate the prior on held-out features, mask the
/// clustering features at the configured rate, run every method.
pub fn run_dataset(
    data: &LabeledMatrix,
    cfg: &ExperimentConfig,
    out_dir: &Path,
    force: bool,
) -> Result<ExperimentSummary> {
    if cfg.grids.is_empty() {
        return Err(Error::Empty("experiment grids"));
    }
    cfg.check_guard(force)?;

    // The two strata, in sorted label order for determinism.
    let mut distinct: Vec<String> = data.labels.to_vec();
    distinct.sort();
    distinct.dedup();
    if distinct.len() != 2 {
        return Err(Error::DegenerateData(format!(
            "dataset must have exactly 2 distinct labels, found {}",
            distinct.len()
        )));
    }
    let groups: Vec<Vec<usize>> = distinct
        .iter()
        .map(|lab| {
            (0..data.labels.len())
                .filter(|&i| &data.labels[i] == lab)
                .collect()
        })
        .collect();

    let total_features = data.values[0].len();
    let n_features = cfg.dataset.features.unwrap_or(total_features);
    if n_features == 0 || n_features + cfg.dataset.calib_features > total_features {
        return Err(Error::InvalidParameter {
            name: "features",
            reason: format!(
                "{n_features} clustering + {} calibration features exceed the {total_features} available",
                cfg.dataset.calib_features
            ),
        });
    }

    let pool = build_pool(cfg.workers)?;
    let mut all_rows = Vec::new();
    for (gi, grid) in cfg.grids.iter().enumerate() {
        for &(n1, n2) in &grid.setups {
            let need = n1.max(n2);
            if groups.iter().any(|g| g.len() < need) {
                return Err(Error::InvalidParameter {
                    name: "setups",
                    reason: format!(
                        "strata sizes {} and {} cannot supply {need} points",
                        groups[0].len(),
                        groups[1].len()
                    ),
                });
            }
        }
        let mut cells = Vec::new();
        for (si, &setup) in grid.setups.iter().enumerate() {
            for (pi, &prob) in grid.missing_probs.iter().enumerate() {
                cells.push((si, pi, setup, prob));
            }
        }
        let per_cell: Result<Vec<_>> = pool.install(|| {
            cells
                .par_iter()
                .map(|&(si, pi, setup, prob)| {
                    let cell_seed = derive_seed(cfg.seed, &[1000 + gi as u64, si as u64, pi as u64]);
                    let reps: Result<Vec<Vec<MethodResult>>> = (0..cfg.reps)
                        .into_par_iter()
                        .map(|rep| {
                            dataset_repetition(
                                data, &groups, cfg, grid, setup, prob, n_features, cell_seed, rep,
                                force,
                            )
                        })
                        .collect();
                    Ok((setup, prob, reps?))
                })
                .collect()
        });
        all_rows.extend(collect_rows(grid, per_cell?));
    }
    let summary = aggregate(&all_rows);
    write_outputs(out_dir, &all_rows, &summary)?;
    Ok(ExperimentSummary {
        rows: all_rows,
        summary,
    })
}

#[allow(clippy::too_many_arguments)]
fn dataset_repetition(
    data: &LabeledMatrix,
    groups: &[Vec<usize>],
    cfg: &ExperimentConfig,
    grid: &GridConfig,
    setup: (usize, usize),
    prob: f64,
    n_features: usize,
    cell_seed: u64,
    rep: u64,
    force: bool,
) -> Result<Vec<MethodResult>> {
    use rand::seq::SliceRandom;

    let (n1, n2) = if rep % 2 == 1 && setup.0 != setup.1 {
        (setup.1, setup.0)
    } else {
        setup
    };
    // Stratified sample without replacement.
    let mut rng = substream(cell_seed, &[rep, 0]);
    let mut sampled: Vec<usize> = Vec::with_capacity(n1 + n2);
    let mut labels: Vec<u32> = Vec::with_capacity(n1 + n2);
    for (g, take) in [(0usize, n1), (1usize, n2)] {
        let mut idx = groups[g].clone();
        idx.shuffle(&mut rng);
        for &i in idx.iter().take(take) {
            sampled.push(i);
            labels.push(g as u32);
        }
    }
    let truth = LabelFunction::new(labels, 2)?;

    // Prior calibration on the held-out feature block (or the clustering
    // features when no block is configured).
    let calib_cols: Vec<usize> = if cfg.dataset.calib_features > 0 {
        (n_features..n_features + cfg.dataset.calib_features).collect()
    } else {
        (0..n_features).collect()
    };
    let calib_rows: Vec<Vec<Option<f64>>> = sampled
        .iter()
        .map(|&i| calib_cols.iter().map(|&j| data.values[i][j]).collect())
        .collect();
    let model = calibrate_prior(&calib_rows).and_then(|p| p.expand(n_features, 2));

    // Clustering features with source missingness, then extra MCAR masking.
    let mut points = Vec::with_capacity(sampled.len());
    let mut observed = Vec::with_capacity(sampled.len());
    for &i in &sampled {
        let mut row = Vec::with_capacity(n_features);
        let mut mask = Vec::with_capacity(n_features);
        for j in 0..n_features {
            match data.values[i][j] {
                Some(v) => {
                    row.push(v);
                    mask.push(true);
                }
                None => {
                    row.push(0.0);
                    mask.push(false);
                }
            }
        }
        points.push(row);
        observed.push(mask);
    }
    let s = PointSet::new(points, observed)?;
    let mut mask_rng = substream(cell_seed, &[rep, 1]);
    let s = mcar_mask(&s, prob, &mut mask_rng)?;

    let ctx = MethodRunContext {
        methods: &grid.methods,
        mc_samples: cfg.mc_samples,
        baseline: &cfg.baseline,
        gibbs_sweeps: cfg.gibbs_sweeps,
        gibbs_burn_in: cfg.gibbs_burn_in,
        force,
        seed: cell_seed,
        rep_index: rep,
    };
    Ok(score_methods(&s, &truth, (n1, n2), model.as_ref().ok(), &ctx))
}
