//! Bootstrap-S training.
//!
//! The uncertain-attribute rows `D^(u)` define one fairness constraint; `S`
//! with-replacement resamples of size `k` define `S` more. The model
//! minimizes the prediction loss plus the dual-weighted fairness penalties,
//! and the duals take projected ascent steps `λ ← max(0, λ + η (Φ − ε))`.
//!
//! Baseline keeps the resample duals at zero. Oracle uses the true attribute
//! of every training row as its single constraint.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::datasets::LabeledDataset;
use crate::error::{Error, Result};
use crate::metrics::{binarize, chi2_independence, chi2_separation, differentiable_measure, dp_gap, empirical_dbar, eo_gap, FairnessMeasureKind, RangePolicy, SoftHistogramConfig};
use crate::nn::{log_loss, mse_loss, Activation, Mlp, MlpSpec, OptimKind, OptimState, OutputHead};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    BootstrapS,
    Baseline,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Classification,
    Regression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DualSchedule {
    /// One ascent step per epoch on the full-set Φ of each constraint.
    PerEpoch,
    /// One ascent step per minibatch on that step's penalty estimate.
    PerStep,
}

/// Which rows the penalty gradient of each constraint is computed on at every step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PenaltyRows {
    /// All members of the constraint's multiset, or `batch` of them drawn with
    /// replacement when it is larger.
    Resampled { batch: usize },
    /// Members of the current minibatch, with multiplicity; constraints with
    /// fewer than `min_members` are skipped for that step.
    BatchIntersection { min_members: usize },
}

/// Missing fields in a serialized config take the [`TrainerConfig::classification`] values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    /// Number of resampled constraints `S`.
    pub s_subsamples: usize,
    /// Resample size `k`; `None` means `k = |D^(u)|`.
    pub subsample_k: Option<usize>,
    pub epsilon: f64,
    pub lambda_init: f64,
    pub model_lr: f64,
    pub dual_lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub measure: FairnessMeasureKind,
    pub mode: TrainMode,
    pub seed: u64,
    pub task: Task,
    pub hidden_widths: Vec<usize>,
    pub hidden_activation: Activation,
    pub weight_decay: f64,
    pub histogram: SoftHistogramConfig,
    pub penalty_rows: PenaltyRows,
    pub dual_schedule: DualSchedule,
    /// Measures reported on the test set.
    pub eval_measures: Vec<FairnessMeasureKind>,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self::classification()
    }
}

impl TrainerConfig {
    /// Two-layer SELU network, 80 hidden units, 30 epochs, Adam at 1e-3 with
    /// batch 128, duals starting at 10.
    pub fn classification() -> Self {
        Self {
            s_subsamples: 5,
            subsample_k: None,
            epsilon: 0.05,
            lambda_init: 10.0,
            model_lr: 1e-3,
            dual_lr: 1e-2,
            epochs: 30,
            batch_size: 128,
            measure: FairnessMeasureKind::Chi2Independence,
            mode: TrainMode::BootstrapS,
            seed: 0,
            task: Task::Classification,
            hidden_widths: vec![80],
            hidden_activation: Activation::Selu,
            weight_decay: 0.0,
            histogram: SoftHistogramConfig::default(),
            penalty_rows: PenaltyRows::Resampled { batch: 256 },
            dual_schedule: DualSchedule::PerEpoch,
            eval_measures: vec![FairnessMeasureKind::DpGap, FairnessMeasureKind::EoGap, FairnessMeasureKind::Chi2Independence],
        }
    }

    /// 50 hidden units, 200 epochs, Adam at 1e-4 with batch 100 and weight
    /// decay 0.01, duals starting at 5.
    pub fn regression() -> Self {
        Self {
            lambda_init: 5.0,
            model_lr: 1e-4,
            epochs: 200,
            batch_size: 100,
            task: Task::Regression,
            hidden_widths: vec![50],
            weight_decay: 0.01,
            histogram: SoftHistogramConfig { range_policy: RangePolicy::DataMinMax, ..SoftHistogramConfig::default() },
            eval_measures: vec![FairnessMeasureKind::Chi2Independence, FairnessMeasureKind::DbarIndependence],
            ..Self::classification()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.epsilon >= 0.0) {
            return bad(format!("epsilon must be nonnegative, got {}", self.epsilon));
        }
        if !(self.lambda_init >= 0.0) {
            return bad(format!("lambda_init must be nonnegative, got {}", self.lambda_init));
        }
        if !(self.model_lr > 0.0) || !(self.dual_lr > 0.0) {
            return bad("learning rates must be positive".into());
        }
        if self.batch_size == 0 || self.hidden_widths.is_empty() {
            return bad("batch_size and hidden_widths must be nonempty".into());
        }
        if self.subsample_k == Some(0) {
            return bad("subsample_k must be at least 1".into());
        }
        if !self.measure.is_differentiable() {
            return bad(format!("training measure {} is not differentiable", self.measure.name()));
        }
        self.histogram.validate()
    }

    fn min_penalty_rows(&self) -> usize {
        match self.measure {
            FairnessMeasureKind::DbarIndependence => 3,
            _ => 2 * self.histogram.n_bins,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    /// 0 is the state before training.
    pub epoch: usize,
    /// Mean prediction loss over the epoch's minibatches (full training set at epoch 0).
    pub mean_loss: f64,
    /// Full-set Φ of every constraint at the end of the epoch.
    pub fairness: Vec<f64>,
    /// `Σ_j λ_j Φ_j` with the duals that were in force during the epoch.
    pub penalty: f64,
    /// Duals after the epoch's updates.
    pub duals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub mode: TrainMode,
    pub epsilon: f64,
    pub seed: u64,
    pub final_params: Vec<f64>,
    pub epochs: Vec<EpochStats>,
    /// Error rate (classification) or MSE (regression) on the test set.
    pub test_error_or_mse: f64,
    pub test_fairness: BTreeMap<String, f64>,
    pub dual_trajectory: Vec<Vec<f64>>,
}

/// `s` multisets of `k` indices drawn uniformly with replacement from `0..n`.
pub fn draw_subsamples(n: usize, k: usize, s: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if n == 0 {
        return Err(Error::EmptyUncertainSet);
    }
    if k == 0 {
        return Err(Error::InvalidArgument("subsample size must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..s).map(|_| (0..k).map(|_| rng.random_range(0..n)).collect()).collect())
}

/// Independent RNG seed for a named stream of a run.
pub(crate) fn stream_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const STREAM_INIT: u64 = 1;
const STREAM_SUBSAMPLES: u64 = 2;
const STREAM_SHUFFLE: u64 = 3;
const STREAM_PENALTY: u64 = 100;

/// Training rows and the sensitive values each constraint sees.
struct Problem<'a> {
    data: &'a LabeledDataset,
    /// Sensitive value per row as seen by the constraints (NaN when missing).
    sens: Vec<f64>,
    /// Row multisets, `[D^(u), D_1, …, D_S]`.
    constraints: Vec<Vec<usize>>,
    updatable: Vec<bool>,
}

fn build_problem<'a>(data: &'a LabeledDataset, cfg: &TrainerConfig) -> Result<Problem<'a>> {
    data.validate()?;
    let (rows, sens): (Vec<usize>, Vec<f64>) = match cfg.mode {
        TrainMode::Oracle => {
            let truth = data.ground_truth_sensitive().ok_or(Error::MissingTrueSensitive)?;
            ((0..data.n_rows()).collect(), truth)
        }
        _ => (data.present_indices(), data.sensitive.iter().map(|s| s.unwrap_or(f64::NAN)).collect()),
    };
    if rows.is_empty() {
        return Err(Error::EmptyUncertainSet);
    }
    let mut constraints = vec![rows.clone()];
    if cfg.mode != TrainMode::Oracle && cfg.s_subsamples > 0 {
        let k = cfg.subsample_k.unwrap_or(rows.len());
        let draws = draw_subsamples(rows.len(), k, cfg.s_subsamples, stream_seed(cfg.seed, STREAM_SUBSAMPLES))?;
        constraints.extend(draws.into_iter().map(|d| d.into_iter().map(|i| rows[i]).collect()));
    }
    let min_rows = cfg.min_penalty_rows();
    if let Some(short) = constraints.iter().find(|c| c.len() < min_rows) {
        return Err(Error::Config(format!(
            "a constraint set has {} rows; the {} estimator needs at least {min_rows}",
            short.len(),
            cfg.measure.name()
        )));
    }
    let updatable = (0..constraints.len()).map(|j| j == 0 || cfg.mode == TrainMode::BootstrapS).collect();
    Ok(Problem { data, sens, constraints, updatable })
}

fn gather(data: &LabeledDataset, rows: &[usize]) -> Vec<f64> {
    let mut x = Vec::with_capacity(rows.len() * data.n_features);
    for &i in rows {
        x.extend_from_slice(data.row(i));
    }
    x
}

fn prediction_loss(task: Task, pred: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    match task {
        Task::Classification => log_loss(pred, target),
        Task::Regression => mse_loss(pred, target),
    }
}

fn constraint_value(model: &Mlp, p: &Problem, rows: &[usize], cfg: &TrainerConfig) -> Result<f64> {
    let pred = model.predict(&gather(p.data, rows), rows.len())?;
    let sens: Vec<f64> = rows.iter().map(|&i| p.sens[i]).collect();
    let target: Vec<f64> = rows.iter().map(|&i| p.data.targets[i]).collect();
    Ok(differentiable_measure(cfg.measure, &pred, &sens, &target, &cfg.histogram)?.value)
}

fn check_finite(v: f64, epoch: usize, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteLoss { epoch, what: format!("{what} = {v}") })
    }
}

/// Trains a fresh model and evaluates it on `data_test`.
pub fn train(data_train: &LabeledDataset, data_test: &LabeledDataset, cfg: &TrainerConfig) -> Result<TrainReport> {
    let (model, report) = train_model(data_train, cfg)?;
    let (test_error_or_mse, test_fairness) = evaluate(&model, data_test, &cfg.eval_measures, cfg.task, &cfg.histogram)?;
    Ok(TrainReport { test_error_or_mse, test_fairness, ..report })
}

/// Runs the training loop; the returned report has empty test metrics.
pub fn train_model(data: &LabeledDataset, cfg: &TrainerConfig) -> Result<(Mlp, TrainReport)> {
    cfg.validate()?;
    let p = build_problem(data, cfg)?;
    let mut widths = vec![data.n_features];
    widths.extend(&cfg.hidden_widths);
    let head = match cfg.task {
        Task::Classification => {
            widths.push(2);
            OutputHead::Softmax2
        }
        Task::Regression => {
            widths.push(1);
            OutputHead::Linear
        }
    };
    let mut model = Mlp::new(MlpSpec {
        layer_widths: widths,
        hidden_activation: cfg.hidden_activation,
        output_head: head,
        seed: stream_seed(cfg.seed, STREAM_INIT),
    })?;
    let mut optim = OptimState::new(OptimKind::adam(), cfg.model_lr, cfg.weight_decay, model.n_params());
    let n_constraints = p.constraints.len();
    let mut duals: Vec<f64> = p.updatable.iter().map(|&u| if u { cfg.lambda_init } else { 0.0 }).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, STREAM_SHUFFLE));
    let mut penalty_rngs: Vec<ChaCha8Rng> = (0..n_constraints)
        .map(|j| ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, STREAM_PENALTY + j as u64)))
        .collect();
    let all_rows: Vec<usize> = (0..data.n_rows()).collect();

    let mut epochs = Vec::with_capacity(cfg.epochs + 1);
    {
        let pred = model.predict(&data.features, data.n_rows())?;
        let (loss, _) = prediction_loss(cfg.task, &pred, &data.targets);
        let fairness = p.constraints.iter().map(|c| constraint_value(&model, &p, c, cfg)).collect::<Result<Vec<_>>>()?;
        let penalty = duals.iter().zip(&fairness).map(|(l, f)| l * f).sum();
        epochs.push(EpochStats { epoch: 0, mean_loss: loss, fairness, penalty, duals: duals.clone() });
    }

    for epoch in 1..=cfg.epochs {
        let duals_at_start = duals.clone();
        let mut order = all_rows.clone();
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let x = gather(data, batch);
            let pred = model.forward(&x, batch.len())?;
            let target: Vec<f64> = batch.iter().map(|&i| data.targets[i]).collect();
            let (loss, g) = prediction_loss(cfg.task, &pred, &target);
            loss_sum += check_finite(loss, epoch, "prediction loss")? * batch.len() as f64;
            let mut grads = model.backward(&g)?;
            // All constraint sets draw from the same few rows, so the network runs
            // once on their union and the dual-weighted gradients are scattered back.
            let mut picks = Vec::new();
            for j in 0..n_constraints {
                if duals[j] > 0.0 {
                    if let Some(rows) = penalty_rows(&p.constraints[j], batch, cfg, &mut penalty_rngs[j]) {
                        picks.push((j, rows));
                    }
                }
            }
            if !picks.is_empty() {
                let mut slot: BTreeMap<usize, usize> = BTreeMap::new();
                for (_, rows) in &picks {
                    for &r in rows {
                        slot.entry(r).or_default();
                    }
                }
                for (k, v) in slot.values_mut().enumerate() {
                    *v = k;
                }
                let unique: Vec<usize> = slot.keys().copied().collect();
                let pred_u = model.forward(&gather(data, &unique), unique.len())?;
                let mut upstream = vec![0.0; pred_u.len()];
                let width = pred_u.len() / unique.len();
                for (j, rows) in &picks {
                    let j = *j;
                    let pos: Vec<usize> = rows.iter().map(|r| slot[r]).collect();
                    let pred_j: Vec<f64> = pos.iter().flat_map(|&q| pred_u[q * width..(q + 1) * width].iter().copied()).collect();
                    let sens: Vec<f64> = rows.iter().map(|&i| p.sens[i]).collect();
                    let target_j: Vec<f64> = rows.iter().map(|&i| data.targets[i]).collect();
                    let m = differentiable_measure(cfg.measure, &pred_j, &sens, &target_j, &cfg.histogram)?;
                    check_finite(m.value, epoch, "fairness penalty")?;
                    for (i, &q) in pos.iter().enumerate() {
                        for c in 0..width {
                            upstream[q * width + c] += duals[j] * m.grad[i * width + c];
                        }
                    }
                    if cfg.dual_schedule == DualSchedule::PerStep && p.updatable[j] {
                        duals[j] = (duals[j] + cfg.dual_lr * (m.value - cfg.epsilon)).max(0.0);
                    }
                }
                for (acc, g) in grads.iter_mut().zip(model.backward(&upstream)?) {
                    *acc += g;
                }
            }
            optim.step(&mut model.params, &grads)?;
            if model.params.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteLoss { epoch, what: "model parameters".into() });
            }
        }
        let fairness = p.constraints.iter().map(|c| constraint_value(&model, &p, c, cfg)).collect::<Result<Vec<_>>>()?;
        let penalty = duals_at_start.iter().zip(&fairness).map(|(l, f)| l * f).sum();
        if cfg.dual_schedule == DualSchedule::PerEpoch {
            for j in 0..n_constraints {
                if p.updatable[j] {
                    duals[j] = (duals[j] + cfg.dual_lr * (fairness[j] - cfg.epsilon)).max(0.0);
                }
            }
        }
        epochs.push(EpochStats { epoch, mean_loss: loss_sum / data.n_rows() as f64, fairness, penalty, duals: duals.clone() });
    }
    let report = TrainReport {
        mode: cfg.mode,
        epsilon: cfg.epsilon,
        seed: cfg.seed,
        final_params: model.params.clone(),
        dual_trajectory: epochs.iter().map(|e| e.duals.clone()).collect(),
        epochs,
        test_error_or_mse: f64::NAN,
        test_fairness: BTreeMap::new(),
    };
    Ok((model, report))
}

fn penalty_rows(members: &[usize], batch: &[usize], cfg: &TrainerConfig, rng: &mut ChaCha8Rng) -> Option<Vec<usize>> {
    match cfg.penalty_rows {
        PenaltyRows::Resampled { batch: size } => {
            if members.len() <= size {
                Some(members.to_vec())
            } else {
                Some((0..size).map(|_| members[rng.random_range(0..members.len())]).collect())
            }
        }
        PenaltyRows::BatchIntersection { min_members } => {
            let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
            for &m in members {
                *counts.entry(m).or_default() += 1;
            }
            let rows: Vec<usize> = batch
                .iter()
                .flat_map(|r| std::iter::repeat_n(*r, counts.get(r).copied().unwrap_or(0)))
                .collect();
            (rows.len() >= min_members.max(cfg.min_penalty_rows())).then_some(rows)
        }
    }
}

/// Test metrics: `error_rate` (threshold 0.5) or `mse`, plus the requested
/// fairness measures computed on the true sensitive attribute.
pub fn evaluate(model: &Mlp, data: &LabeledDataset, measures: &[FairnessMeasureKind], task: Task, hist: &SoftHistogramConfig) -> Result<(f64, BTreeMap<String, f64>)> {
    if data.n_rows() == 0 {
        return Err(Error::InvalidArgument("test set is empty".into()));
    }
    let sens = data.ground_truth_sensitive().ok_or(Error::MissingTrueSensitive)?;
    let pred = model.predict(&data.features, data.n_rows())?;
    evaluate_predictions(&pred, &data.targets, &sens, measures, task, hist)
}

/// [`evaluate`] on precomputed predictions.
pub fn evaluate_predictions(pred: &[f64], targets: &[f64], sens: &[f64], measures: &[FairnessMeasureKind], task: Task, hist: &SoftHistogramConfig) -> Result<(f64, BTreeMap<String, f64>)> {
    let n = pred.len() as f64;
    let labels: Vec<bool> = pred.iter().map(|&p| p >= 0.5).collect();
    let headline = match task {
        Task::Classification => labels.iter().zip(targets).filter(|(l, y)| **l != (**y >= 0.5)).count() as f64 / n,
        Task::Regression => pred.iter().zip(targets).map(|(p, y)| (p - y) * (p - y)).sum::<f64>() / n,
    };
    let mut out = BTreeMap::new();
    out.insert(if task == Task::Classification { "error_rate" } else { "mse" }.to_string(), headline);
    for &m in measures {
        let v = match m {
            FairnessMeasureKind::DpGap | FairnessMeasureKind::EoGap if task == Task::Regression => {
                return Err(Error::Config(format!("{} needs a classification task", m.name())));
            }
            FairnessMeasureKind::DpGap => dp_gap(&labels, &binarize(sens)?)?,
            FairnessMeasureKind::EoGap => {
                let y: Vec<bool> = targets.iter().map(|&t| t >= 0.5).collect();
                eo_gap(&labels, &binarize(sens)?, &y)?
            }
            FairnessMeasureKind::Chi2Independence => chi2_independence(pred, sens, hist)?.value,
            FairnessMeasureKind::Chi2Separation => chi2_separation(pred, sens, targets, hist)?.value,
            FairnessMeasureKind::DbarIndependence => empirical_dbar(pred, sens)?,
        };
        out.insert(m.name().to_string(), v);
    }
    Ok((headline, out))
}

/// CSV with columns `prediction,target,sensitive` for external recounts.
pub fn predictions_csv(pred: &[f64], targets: &[f64], sens: &[f64]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["prediction", "target", "sensitive"])?;
    for ((p, t), s) in pred.iter().zip(targets).zip(sens) {
        w.write_record([p.to_string(), t.to_string(), s.to_string()])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}
