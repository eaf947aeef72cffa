//! Seeded, config-driven experiment runner with CSV/JSON output.
//!
//! Every trial derives its RNG streams from `(seed, grid index, trial)`, so
//! results do not depend on the number of worker threads.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::{
    estimate_bex, estimate_bex_empirical, estimate_bex_rows, gaussian_mixture_classification, inject, load_csv, sample_joint, split, CovariancePreset, CsvSchema,
    LabeledDataset, MixtureConfig, UncertaintyInjector,
};
use crate::error::{Error, Result};
use crate::gaussian::{ccm, objective_and_mse_with, CcmPair, CcmVector, JointGaussianSpec};
use crate::linalg::{dot, SymPsdMatrix};
use crate::qcqp::{scan_max, solve, QcqpInstance};
use crate::robust::{sector_from_ball, solve_robust_three, solve_robust_three_lifted, tau_of_n, UncertaintyConfig};
use crate::trainer::{draw_subsamples, stream_seed, train, TrainerConfig};

/// Slack on `⟨a, b_ex⟩² ≤ ε` before a trial counts as a violation; absorbs
/// rounding in solutions that sit exactly on the constraint.
pub const VIOLATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Estimate `b̂_ex` from `n` fully observed rows, for each `n` in `n_grid`.
    GaussianMissing,
    /// Estimate `b̂_ex` from `noise_n` rows with noisy attributes, for each `σ` in `sigma_grid`.
    GaussianNoise,
    /// Train networks over an ε sweep.
    BootstrapSweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceSource {
    Preset(CovariancePreset),
    /// Joint covariance of `(x…, y, e)`.
    Custom(Vec<Vec<f64>>),
}

impl CovarianceSource {
    pub fn spec(&self) -> Result<JointGaussianSpec> {
        match self {
            Self::Preset(p) => p.spec(),
            Self::Custom(rows) => JointGaussianSpec::from_joint(&SymPsdMatrix::new(rows)?),
        }
    }
}

/// Written as `robust_qcqp`, `baseline`, `oracle` or `bootstrap_s:<S>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Method {
    RobustQcqp,
    BootstrapS(usize),
    Baseline,
    Oracle,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::RobustQcqp => f.write_str("robust_qcqp"),
            Self::BootstrapS(s) => write!(f, "bootstrap_s:{s}"),
            Self::Baseline => f.write_str("baseline"),
            Self::Oracle => f.write_str("oracle"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "robust_qcqp" => Ok(Self::RobustQcqp),
            "baseline" => Ok(Self::Baseline),
            "oracle" => Ok(Self::Oracle),
            _ => s
                .strip_prefix("bootstrap_s:")
                .and_then(|n| n.parse().ok())
                .map(Self::BootstrapS)
                .ok_or_else(|| Error::Config(format!("unknown method {s:?}"))),
        }
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Method> for String {
    fn from(m: Method) -> Self {
        m.to_string()
    }
}

/// How `b̂_ex` is estimated from the observed rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Plug-in cross moment with the known `Σ_xx` and `Σ_ee`.
    #[default]
    KnownCovariance,
    /// Every block estimated from data.
    Empirical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// `count` evenly spaced values from `start` to `stop` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSweep {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl EpsilonSweep {
    pub fn values(&self) -> Vec<f64> {
        match self.count {
            0 => vec![],
            1 => vec![self.start],
            c => (0..c).map(|i| self.start + (self.stop - self.start) * i as f64 / (c - 1) as f64).collect(),
        }
    }
}

/// Radius settings of the robust uncertainty set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UncertaintySettings {
    pub delta: f64,
    pub c: f64,
}

impl Default for UncertaintySettings {
    fn default() -> Self {
        Self { delta: 0.05, c: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSource {
    Mixture(MixtureConfig),
    Csv { path: PathBuf, schema: CsvSchema },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSetup {
    pub dataset: DatasetSource,
    pub injector: UncertaintyInjector,
    #[serde(default = "default_split")]
    pub split_ratio: f64,
    #[serde(default)]
    pub trainer: TrainerConfig,
}

fn default_split() -> f64 {
    0.8
}

fn default_trials() -> usize {
    1
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_grid_n() -> usize {
    10_000
}

fn default_bins() -> usize {
    20
}

fn default_noise_n() -> usize {
    500
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub covariance: Option<CovarianceSource>,
    pub methods: Vec<Method>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub epsilon_sweep: Option<EpsilonSweep>,
    #[serde(default)]
    pub n_grid: Vec<usize>,
    #[serde(default)]
    pub sigma_grid: Vec<f64>,
    /// Rows per trial in the noise experiment.
    #[serde(default = "default_noise_n")]
    pub noise_n: usize,
    /// Noise only where `|e| ≥ threshold`; `None` adds it everywhere.
    #[serde(default)]
    pub noise_threshold: Option<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub uncertainty: UncertaintySettings,
    /// Grid value (`n` or `σ`) at which constraint-value histograms are exported.
    #[serde(default)]
    pub histogram_at: Option<f64>,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
    /// Directions scanned by the multi-constraint solver.
    #[serde(default = "default_grid_n")]
    pub grid_n: usize,
    #[serde(default)]
    pub estimator: Estimator,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default)]
    pub sweep: Option<SweepSetup>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.methods.is_empty() {
            return bad("methods must be nonempty");
        }
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1");
        }
        if self.epsilons().is_empty() {
            return bad("set epsilon or a nonempty epsilon_sweep");
        }
        if self.epsilons().iter().any(|e| !(*e >= 0.0)) {
            return bad("epsilon values must be nonnegative");
        }
        match self.experiment {
            ExperimentKind::GaussianMissing | ExperimentKind::GaussianNoise => {
                let Some(cov) = &self.covariance else { return bad("gaussian experiments need a covariance") };
                let spec = cov.spec()?;
                if !(2..=crate::gaussian::MAX_FEATURES).contains(&spec.dim_x()) {
                    return bad("gaussian experiments need 2 to 4 features");
                }
                if self.experiment == ExperimentKind::GaussianMissing {
                    if self.n_grid.is_empty() || self.n_grid.contains(&0) {
                        return bad("n_grid must be nonempty with positive entries");
                    }
                } else {
                    if self.sigma_grid.is_empty() || self.sigma_grid.iter().any(|s| !(*s >= 0.0)) {
                        return bad("sigma_grid must be nonempty with nonnegative entries");
                    }
                    if self.noise_n == 0 {
                        return bad("noise_n must be positive");
                    }
                }
                if self.grid_n < 8 || self.histogram_bins == 0 {
                    return bad("grid_n must be at least 8 and histogram_bins positive");
                }
                UncertaintyConfig { delta_conf: self.uncertainty.delta, constant_c: self.uncertainty.c, n: 1 }
                    .validate()
                    .map_err(|e| Error::Config(e.to_string()))?;
            }
            ExperimentKind::BootstrapSweep => {
                let Some(sweep) = &self.sweep else { return bad("bootstrap_sweep needs a sweep section") };
                if self.methods.contains(&Method::RobustQcqp) {
                    return bad("robust_qcqp is only available in the gaussian experiments");
                }
                if !(sweep.split_ratio > 0.0 && sweep.split_ratio < 1.0) {
                    return bad("split_ratio must lie in (0, 1)");
                }
                sweep.trainer.validate()?;
            }
        }
        Ok(())
    }

    pub fn epsilons(&self) -> Vec<f64> {
        match (&self.epsilon_sweep, self.epsilon) {
            (Some(s), _) => s.values(),
            (None, Some(e)) => vec![e],
            (None, None) => vec![],
        }
    }
}

/// One (method, grid value, trial) outcome of a Gaussian experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: String,
    pub n_or_sigma: f64,
    pub trial: usize,
    pub objective: f64,
    pub mse: f64,
    pub true_constraint_value: f64,
    pub violated: bool,
    pub epsilon: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub n_or_sigma: f64,
    pub epsilon: f64,
    pub trials: usize,
    pub failed: usize,
    pub violation_fraction: f64,
    pub mean_objective: f64,
    pub mean_mse: f64,
    pub mean_constraint_value: f64,
    pub max_constraint_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub method: String,
    pub n_or_sigma: f64,
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRow {
    pub method: String,
    pub grid_value: f64,
    pub epsilon: f64,
    pub trial: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianReport {
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
    pub histogram: Vec<HistogramRow>,
    pub failures: Vec<FailureRow>,
}

impl GaussianReport {
    pub fn summary_for(&self, method: Method, n_or_sigma: f64) -> Option<&SummaryRow> {
        let name = method.to_string();
        self.summary.iter().find(|s| s.method == name && s.n_or_sigma == n_or_sigma)
    }
}

/// Seed of trial `trial` at grid position `grid`.
pub fn trial_seed(seed: u64, grid: usize, trial: usize) -> u64 {
    stream_seed(stream_seed(seed, grid as u64 + 1), trial as u64 + 1)
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        b = b.num_threads(t);
    }
    b.build().map_err(|e| Error::Config(format!("thread pool: {e}")))
}

struct GaussianSetting {
    spec: JointGaussianSpec,
    joint: SymPsdMatrix,
    b_yx: CcmVector,
    b_ex: CcmVector,
    max_s: usize,
}

type MethodOutcome = (Method, Result<Vec<f64>>);

/// Runs every method on one trial and returns each method's `a*`.
fn gaussian_trial(cfg: &ExperimentConfig, set: &GaussianSetting, grid_value: f64, epsilon: f64, seed: u64) -> Vec<MethodOutcome> {
    let data = (|| -> Result<LabeledDataset> {
        match cfg.experiment {
            ExperimentKind::GaussianNoise => {
                let full = sample_joint(&set.joint, cfg.noise_n, seed)?;
                let injector = match cfg.noise_threshold {
                    Some(threshold) => UncertaintyInjector::ThresholdNoise { sigma: grid_value, threshold },
                    None => UncertaintyInjector::GaussianNoise { sigma: grid_value },
                };
                inject(&full, injector, stream_seed(seed, 1))
            }
            _ => sample_joint(&set.joint, grid_value as usize, seed),
        }
    })();
    let estimate = |d: &LabeledDataset, rows: Option<&[usize]>| match (cfg.estimator, rows) {
        (Estimator::KnownCovariance, None) => estimate_bex(d, &set.spec.sigma_xx, set.spec.sigma_ee),
        (Estimator::KnownCovariance, Some(r)) => estimate_bex_rows(d, r, &set.spec.sigma_xx, set.spec.sigma_ee),
        (Estimator::Empirical, None) => estimate_bex_empirical(d),
        (Estimator::Empirical, Some(r)) => estimate_bex_empirical(&d.subset(r)),
    };
    let prepared = data.and_then(|d| {
        let b_hat = estimate(&d, None)?;
        let present = d.present_indices();
        let draws = if set.max_s > 0 {
            draw_subsamples(present.len(), present.len(), set.max_s, stream_seed(seed, 2))?
                .into_iter()
                .map(|idx| {
                    let rows: Vec<usize> = idx.into_iter().map(|i| present[i]).collect();
                    estimate(&d, Some(&rows)).map(|b| b.entries)
                })
                .collect::<Result<Vec<_>>>()?
        } else {
            vec![]
        };
        Ok((b_hat, present.len(), draws))
    });
    let b_yx = &set.b_yx.entries;
    cfg.methods
        .iter()
        .map(|&m| {
            let a = match &prepared {
                Err(e) => Err(Error::Config(format!("data preparation failed: {e}"))),
                Ok((b_hat, n_obs, draws)) => match m {
                    Method::Baseline => QcqpInstance::new(set.b_yx.clone(), b_hat.clone(), epsilon).and_then(|i| solve(&i)).map(|s| s.a_star),
                    Method::Oracle => QcqpInstance::new(set.b_yx.clone(), set.b_ex.clone(), epsilon).and_then(|i| solve(&i)).map(|s| s.a_star),
                    Method::RobustQcqp => (|| {
                        let tau = tau_of_n(&UncertaintyConfig { delta_conf: cfg.uncertainty.delta, constant_c: cfg.uncertainty.c, n: *n_obs }, &set.spec)?;
                        if b_yx.len() == 2 {
                            let sector = sector_from_ball(b_hat, tau)?.sector;
                            Ok(solve_robust_three(set.b_yx.polar()?, &sector, epsilon)?.a_star)
                        } else {
                            Ok(solve_robust_three_lifted(b_yx, &b_hat.entries, tau, epsilon)?.0)
                        }
                    })(),
                    Method::BootstrapS(s) => {
                        let mut constraints = vec![b_hat.entries.clone()];
                        constraints.extend(draws[..s].iter().cloned());
                        scan_max(b_yx, &constraints, epsilon, cfg.grid_n).map(|sol| sol.a_star)
                    }
                },
            };
            (m, a)
        })
        .collect()
}

/// Gaussian experiment over `n_grid` (missing attributes) or `sigma_grid` (noise).
pub fn run_gaussian_experiment(cfg: &ExperimentConfig) -> Result<GaussianReport> {
    cfg.validate()?;
    if cfg.experiment == ExperimentKind::BootstrapSweep {
        return Err(Error::Config("run_gaussian_experiment needs a gaussian experiment kind".into()));
    }
    let spec = cfg.covariance.as_ref().expect("validated").spec()?;
    let set = GaussianSetting {
        joint: spec.joint()?,
        b_yx: ccm(&spec, CcmPair::Yx)?,
        b_ex: ccm(&spec, CcmPair::Ex)?,
        max_s: cfg.methods.iter().filter_map(|m| if let Method::BootstrapS(s) = m { Some(*s) } else { None }).max().unwrap_or(0),
        spec,
    };
    let grid: Vec<f64> = match cfg.experiment {
        ExperimentKind::GaussianNoise => cfg.sigma_grid.clone(),
        _ => cfg.n_grid.iter().map(|&n| n as f64).collect(),
    };
    let epsilons = cfg.epsilons();
    let tasks: Vec<(usize, usize, usize)> = (0..epsilons.len())
        .flat_map(|ei| (0..grid.len()).flat_map(move |gi| (0..cfg.trials).map(move |t| (ei, gi, t))))
        .collect();
    let outcomes: Vec<Vec<MethodOutcome>> = pool(cfg.threads)?.install(|| {
        tasks
            .par_iter()
            .map(|&(ei, gi, t)| gaussian_trial(cfg, &set, grid[gi], epsilons[ei], trial_seed(cfg.seed, gi, t)))
            .collect()
    });

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (&(ei, gi, t), outs) in tasks.iter().zip(outcomes) {
        for (m, a) in outs {
            let epsilon = epsilons[ei];
            match a {
                Ok(a) => {
                    let (objective, mse) = objective_and_mse_with(&a, &set.b_yx.entries, set.spec.sigma_yy);
                    let c = dot(&a, &set.b_ex.entries).powi(2);
                    rows.push(ResultRow {
                        method: m.to_string(),
                        n_or_sigma: grid[gi],
                        trial: t,
                        objective,
                        mse,
                        true_constraint_value: c,
                        violated: c > epsilon + VIOLATION_TOL,
                        epsilon,
                        seed: trial_seed(cfg.seed, gi, t),
                    });
                }
                Err(e) => failures.push(FailureRow { method: m.to_string(), grid_value: grid[gi], epsilon, trial: t, message: e.to_string() }),
            }
        }
    }
    let order = |name: &str| cfg.methods.iter().position(|m| m.to_string() == name).unwrap_or(usize::MAX);
    let grid_pos = |v: f64| grid.iter().position(|&g| g == v).unwrap_or(usize::MAX);
    rows.sort_by(|a, b| {
        order(&a.method)
            .cmp(&order(&b.method))
            .then(a.epsilon.total_cmp(&b.epsilon))
            .then(grid_pos(a.n_or_sigma).cmp(&grid_pos(b.n_or_sigma)))
            .then(a.trial.cmp(&b.trial))
    });

    let mut summary = Vec::new();
    let mut histogram = Vec::new();
    for m in &cfg.methods {
        let name = m.to_string();
        for &epsilon in &epsilons {
            for &g in &grid {
                let group: Vec<&ResultRow> = rows.iter().filter(|r| r.method == name && r.n_or_sigma == g && r.epsilon == epsilon).collect();
                let failed = failures.iter().filter(|f| f.method == name && f.grid_value == g && f.epsilon == epsilon).count();
                let k = group.len() as f64;
                let mean = |f: fn(&ResultRow) -> f64| if group.is_empty() { f64::NAN } else { group.iter().map(|r| f(r)).sum::<f64>() / k };
                summary.push(SummaryRow {
                    method: name.clone(),
                    n_or_sigma: g,
                    epsilon,
                    trials: group.len(),
                    failed,
                    violation_fraction: mean(|r| if r.violated { 1.0 } else { 0.0 }),
                    mean_objective: mean(|r| r.objective),
                    mean_mse: mean(|r| r.mse),
                    mean_constraint_value: mean(|r| r.true_constraint_value),
                    max_constraint_value: group.iter().map(|r| r.true_constraint_value).fold(f64::NAN, f64::max),
                });
            }
        }
    }
    if let Some(h) = cfg.histogram_at {
        let at: Vec<&ResultRow> = rows.iter().filter(|r| r.n_or_sigma == h).collect();
        let hi = at.iter().map(|r| r.true_constraint_value).fold(epsilons.iter().cloned().fold(0.0, f64::max), f64::max);
        let bins = cfg.histogram_bins;
        let width = if hi > 0.0 { hi / bins as f64 } else { 1.0 };
        for m in &cfg.methods {
            let name = m.to_string();
            let mut counts = vec![0usize; bins];
            for r in at.iter().filter(|r| r.method == name) {
                counts[((r.true_constraint_value / width) as usize).min(bins - 1)] += 1;
            }
            for (i, count) in counts.into_iter().enumerate() {
                histogram.push(HistogramRow { method: name.clone(), n_or_sigma: h, bin_lo: i as f64 * width, bin_hi: (i + 1) as f64 * width, count });
            }
        }
    }
    Ok(GaussianReport { rows, summary, histogram, failures })
}

/// One (method, ε, trial, metric) value of a training sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub method: String,
    pub epsilon: f64,
    pub trial: usize,
    pub seed: u64,
    pub metric: String,
    pub value: f64,
}

/// Per (method, ε, metric) trial mean, plus its trailing moving average over
/// the last five ε values of the same method and metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierRow {
    pub method: String,
    pub epsilon: f64,
    pub metric: String,
    pub trials: usize,
    pub failed: usize,
    pub mean: f64,
    pub moving_average: f64,
}

pub const MOVING_AVERAGE_WINDOW: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub frontier: Vec<FrontierRow>,
    pub failures: Vec<FailureRow>,
}

impl SweepReport {
    pub fn frontier_for(&self, method: Method, metric: &str) -> Vec<&FrontierRow> {
        let name = method.to_string();
        self.frontier.iter().filter(|f| f.method == name && f.metric == metric).collect()
    }
}

/// Trial data: a training set with uncertain attributes and a fully observed test set.
pub fn sweep_trial_data(setup: &SweepSetup, base: Option<&LabeledDataset>, seed: u64, trial: usize) -> Result<(LabeledDataset, LabeledDataset)> {
    let s = trial_seed(seed, 0, trial);
    let full = match (&setup.dataset, base) {
        (DatasetSource::Mixture(m), _) => gaussian_mixture_classification(m, stream_seed(s, 1))?,
        (DatasetSource::Csv { .. }, Some(b)) => b.clone(),
        (DatasetSource::Csv { path, schema }, None) => load_csv(path, schema)?,
    };
    let (train, test) = split(&full, setup.split_ratio, stream_seed(s, 2))?;
    Ok((inject(&train, setup.injector, stream_seed(s, 3))?, test))
}

/// Trains every method at every ε and trial; the trainer seed is shared
/// across methods and ε within a trial.
pub fn run_bootstrap_sweep(cfg: &ExperimentConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let setup = cfg.sweep.as_ref().ok_or_else(|| Error::Config("bootstrap_sweep needs a sweep section".into()))?;
    let base = match &setup.dataset {
        DatasetSource::Csv { path, schema } => Some(load_csv(path, schema)?),
        DatasetSource::Mixture(_) => None,
    };
    let epsilons = cfg.epsilons();
    let pool = pool(cfg.threads)?;
    let data: Vec<(LabeledDataset, LabeledDataset)> =
        pool.install(|| (0..cfg.trials).into_par_iter().map(|t| sweep_trial_data(setup, base.as_ref(), cfg.seed, t)).collect::<Result<_>>())?;
    let tasks: Vec<(usize, usize, Method)> = (0..epsilons.len())
        .flat_map(|ei| (0..cfg.trials).flat_map(move |t| cfg.methods.iter().map(move |&m| (ei, t, m))))
        .collect();
    let outcomes: Vec<_> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(ei, t, m)| {
                let tc = TrainerConfig {
                    epsilon: epsilons[ei],
                    seed: trial_seed(cfg.seed, 1, t),
                    mode: match m {
                        Method::BootstrapS(_) => crate::trainer::TrainMode::BootstrapS,
                        Method::Oracle => crate::trainer::TrainMode::Oracle,
                        _ => crate::trainer::TrainMode::Baseline,
                    },
                    s_subsamples: match m {
                        Method::BootstrapS(s) => s,
                        _ => setup.trainer.s_subsamples,
                    },
                    ..setup.trainer.clone()
                };
                train(&data[t].0, &data[t].1, &tc).map(|r| (tc.seed, r))
            })
            .collect()
    });

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (&(ei, t, m), out) in tasks.iter().zip(outcomes) {
        match out {
            Ok((seed, report)) => {
                for (metric, value) in report.test_fairness {
                    rows.push(SweepRow { method: m.to_string(), epsilon: epsilons[ei], trial: t, seed, metric, value });
                }
            }
            Err(e) => failures.push(FailureRow { method: m.to_string(), grid_value: epsilons[ei], epsilon: epsilons[ei], trial: t, message: e.to_string() }),
        }
    }
    let order = |name: &str| cfg.methods.iter().position(|m| m.to_string() == name).unwrap_or(usize::MAX);
    rows.sort_by(|a, b| {
        order(&a.method)
            .cmp(&order(&b.method))
            .then(a.epsilon.total_cmp(&b.epsilon))
            .then(a.trial.cmp(&b.trial))
            .then(a.metric.cmp(&b.metric))
    });

    let mut metrics: Vec<String> = rows.iter().map(|r| r.metric.clone()).collect();
    metrics.sort();
    metrics.dedup();
    let mut sorted_eps = epsilons.clone();
    sorted_eps.sort_by(f64::total_cmp);
    let mut frontier = Vec::new();
    for m in &cfg.methods {
        let name = m.to_string();
        for metric in &metrics {
            let mut means = Vec::new();
            for (i, &epsilon) in sorted_eps.iter().enumerate() {
                let vals: Vec<f64> = rows.iter().filter(|r| r.method == name && r.metric == *metric && r.epsilon == epsilon).map(|r| r.value).collect();
                let mean = if vals.is_empty() { f64::NAN } else { vals.iter().sum::<f64>() / vals.len() as f64 };
                means.push(mean);
                let window = &means[(i + 1).saturating_sub(MOVING_AVERAGE_WINDOW)..];
                frontier.push(FrontierRow {
                    method: name.clone(),
                    epsilon,
                    metric: metric.clone(),
                    trials: vals.len(),
                    failed: failures.iter().filter(|f| f.method == name && f.epsilon == epsilon).count(),
                    mean,
                    moving_average: window.iter().sum::<f64>() / window.len() as f64,
                });
            }
        }
    }
    Ok(SweepReport { rows, frontier, failures })
}

const RESULT_SCHEMA: &[(&str, &str)] = &[
    ("method", "robust_qcqp | baseline | oracle | bootstrap_s:<S>"),
    ("n_or_sigma", "observed rows n (missing) or noise level sigma (noise)"),
    ("trial", "trial index"),
    ("objective", "<a, b_yx>^2"),
    ("mse", "sigma_yy (1 - objective)"),
    ("true_constraint_value", "<a, b_ex>^2 with the true b_ex"),
    ("violated", "true_constraint_value > epsilon + 1e-9"),
    ("epsilon", "fairness budget"),
    ("seed", "trial seed"),
];

const SUMMARY_SCHEMA: &[(&str, &str)] = &[
    ("method", "method name"),
    ("n_or_sigma", "grid value"),
    ("epsilon", "fairness budget"),
    ("trials", "successful trials"),
    ("failed", "failed trials"),
    ("violation_fraction", "fraction of successful trials with violated = true"),
    ("mean_objective", "mean <a, b_yx>^2"),
    ("mean_mse", "mean MSE"),
    ("mean_constraint_value", "mean <a, b_ex>^2"),
    ("max_constraint_value", "max <a, b_ex>^2"),
];

const HISTOGRAM_SCHEMA: &[(&str, &str)] = &[
    ("method", "method name"),
    ("n_or_sigma", "grid value"),
    ("bin_lo", "bin lower edge of <a, b_ex>^2"),
    ("bin_hi", "bin upper edge (last bin also holds the maximum)"),
    ("count", "trials in the bin"),
];

const SWEEP_SCHEMA: &[(&str, &str)] = &[
    ("method", "method name"),
    ("epsilon", "fairness budget"),
    ("trial", "trial index"),
    ("seed", "trainer seed"),
    ("metric", "error_rate | mse | measure name, on the test set"),
    ("value", "metric value"),
];

const FRONTIER_SCHEMA: &[(&str, &str)] = &[
    ("method", "method name"),
    ("epsilon", "fairness budget"),
    ("metric", "metric name"),
    ("trials", "successful trials"),
    ("failed", "failed trials"),
    ("mean", "mean over trials"),
    ("moving_average", "trailing mean of `mean` over the last 5 epsilon values"),
];

const FAILURE_SCHEMA: &[(&str, &str)] = &[
    ("method", "method name"),
    ("grid_value", "n, sigma or epsilon"),
    ("epsilon", "fairness budget"),
    ("trial", "trial index"),
    ("message", "error message"),
];

fn write_table<T: Serialize>(dir: &Path, stem: &str, schema: &[(&str, &str)], rows: &[T], format: OutputFormat) -> Result<PathBuf> {
    match format {
        OutputFormat::Csv => {
            let path = dir.join(format!("{stem}.csv"));
            let mut out = String::new();
            for (name, doc) in schema {
                out.push_str(&format!("# {name}: {doc}\n"));
            }
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
            w.write_record(schema.iter().map(|(n, _)| *n))?;
            for r in rows {
                w.serialize(r)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            out.push_str(std::str::from_utf8(&bytes).expect("csv output is UTF-8"));
            fs::write(&path, out)?;
            Ok(path)
        }
        OutputFormat::Json => {
            let path = dir.join(format!("{stem}.json"));
            let columns: serde_json::Map<String, serde_json::Value> = schema.iter().map(|(n, d)| (n.to_string(), serde_json::Value::from(*d))).collect();
            let doc = serde_json::json!({ "columns": columns, "rows": rows });
            fs::write(&path, serde_json::to_string_pretty(&doc)? + "\n")?;
            Ok(path)
        }
    }
}

/// Reads a table written by [`emit_gaussian`] or [`emit_sweep`] in CSV form.
pub fn read_csv_table<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Writes `rows`, `summary`, `histogram` (when requested) and `failures` (when
/// any) into `dir`. Returns the written paths.
pub fn emit_gaussian(report: &GaussianReport, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    if report.rows.is_empty() && report.failures.is_empty() {
        return Err(Error::InvalidArgument("nothing to emit".into()));
    }
    fs::create_dir_all(dir)?;
    let mut paths = vec![
        write_table(dir, "rows", RESULT_SCHEMA, &report.rows, format)?,
        write_table(dir, "summary", SUMMARY_SCHEMA, &report.summary, format)?,
    ];
    if !report.histogram.is_empty() {
        paths.push(write_table(dir, "histogram", HISTOGRAM_SCHEMA, &report.histogram, format)?);
    }
    if !report.failures.is_empty() {
        paths.push(write_table(dir, "failures", FAILURE_SCHEMA, &report.failures, format)?);
    }
    Ok(paths)
}

/// Writes `rows`, `frontier` and `failures` (when any) into `dir`.
pub fn emit_sweep(report: &SweepReport, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    if report.rows.is_empty() && report.failures.is_empty() {
        return Err(Error::InvalidArgument("nothing to emit".into()));
    }
    fs::create_dir_all(dir)?;
    let mut paths = vec![
        write_table(dir, "rows", SWEEP_SCHEMA, &report.rows, format)?,
        write_table(dir, "frontier", FRONTIER_SCHEMA, &report.frontier, format)?,
    ];
    if !report.failures.is_empty() {
        paths.push(write_table(dir, "failures", FAILURE_SCHEMA, &report.failures, format)?);
    }
    Ok(paths)
}

/// Runs the configured experiment and writes its tables to `cfg.output_dir`.
pub fn run_and_emit(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    match cfg.experiment {
        ExperimentKind::BootstrapSweep => emit_sweep(&run_bootstrap_sweep(cfg)?, &cfg.output_dir, cfg.format),
        _ => emit_gaussian(&run_gaussian_experiment(cfg)?, &cfg.output_dir, cfg.format),
    }
}
