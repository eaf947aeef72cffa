//! Datasets: Gaussian presets and sampling, uncertainty injection, CSV
//! ingestion, splitting, and estimation of `b_ex` from partially observed
//! sensitive attributes.

use std::path::Path;

use rand::seq::index::sample as sample_indices;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{ccm_from_blocks, CcmPair, CcmVector, JointGaussianSpec};
use crate::linalg::SymPsdMatrix;

/// Rows of features, a target, and a possibly missing or noisy sensitive attribute.
///
/// Rows with `sensitive[i].is_some()` form the uncertain-attribute subset. The
/// ground-truth column, when known, is kept in `true_sensitive`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub name: String,
    pub n_features: usize,
    /// Row-major `n_rows x n_features`.
    pub features: Vec<f64>,
    pub targets: Vec<f64>,
    pub sensitive: Vec<Option<f64>>,
    pub true_sensitive: Option<Vec<f64>>,
}

impl LabeledDataset {
    pub fn new(name: impl Into<String>, n_features: usize, features: Vec<f64>, targets: Vec<f64>, sensitive: Vec<Option<f64>>) -> Result<Self> {
        let d = Self { name: name.into(), n_features, features, targets, sensitive, true_sensitive: None };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.targets.len();
        if self.n_features == 0 || self.features.len() != n * self.n_features {
            return Err(Error::ShapeMismatch(format!(
                "{} feature values for {n} rows of width {}",
                self.features.len(),
                self.n_features
            )));
        }
        if self.sensitive.len() != n {
            return Err(Error::ShapeMismatch(format!("{} sensitive values for {n} rows", self.sensitive.len())));
        }
        if let Some(t) = &self.true_sensitive {
            if t.len() != n {
                return Err(Error::ShapeMismatch(format!("{} true sensitive values for {n} rows", t.len())));
            }
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.targets.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    /// Rows with an observed sensitive attribute.
    pub fn present_indices(&self) -> Vec<usize> {
        (0..self.n_rows()).filter(|&i| self.sensitive[i].is_some()).collect()
    }

    pub fn is_fully_observed(&self) -> bool {
        self.sensitive.iter().all(Option::is_some)
    }

    /// Ground truth: `true_sensitive`, or the observed column if nothing was injected.
    pub fn ground_truth_sensitive(&self) -> Option<Vec<f64>> {
        match &self.true_sensitive {
            Some(t) => Some(t.clone()),
            None => self.sensitive.iter().copied().collect(),
        }
    }

    /// Rows in the given order (repetitions allowed).
    pub fn subset(&self, idx: &[usize]) -> Self {
        let mut features = Vec::with_capacity(idx.len() * self.n_features);
        for &i in idx {
            features.extend_from_slice(self.row(i));
        }
        Self {
            name: self.name.clone(),
            n_features: self.n_features,
            features,
            targets: idx.iter().map(|&i| self.targets[i]).collect(),
            sensitive: idx.iter().map(|&i| self.sensitive[i]).collect(),
            true_sensitive: self.true_sensitive.as_ref().map(|t| idx.iter().map(|&i| t[i]).collect()),
        }
    }
}

/// Covariance matrices of `(x…, y, e)` used in the synthetic studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariancePreset {
    Gen2,
    Fair2,
    A2,
    Gen3,
    Fair3,
    A3,
}

impl CovariancePreset {
    pub const ALL: [CovariancePreset; 6] = [Self::Gen2, Self::Fair2, Self::A2, Self::Gen3, Self::Fair3, Self::A3];

    pub fn name(self) -> &'static str {
        match self {
            Self::Gen2 => "gen2",
            Self::Fair2 => "fair2",
            Self::A2 => "a2",
            Self::Gen3 => "gen3",
            Self::Fair3 => "fair3",
            Self::A3 => "a3",
        }
    }

    /// Row-major entries.
    pub fn entries(self) -> Vec<Vec<f64>> {
        let rows: &[&[f64]] = match self {
            Self::Gen2 => &[&[1.0, 0.1, 0.5, 0.4], &[0.1, 1.0, 0.5, 0.25], &[0.5, 0.5, 1.0, 0.75], &[0.4, 0.25, 0.75, 1.0]],
            Self::Fair2 => &[&[1.0, 0.1, 0.5, 0.05], &[0.1, 1.0, 0.05, 0.25], &[0.5, 0.05, 1.0, 0.75], &[0.05, 0.25, 0.75, 1.0]],
            Self::A2 => &[&[1.0, 0.1, 0.5, 0.01], &[0.1, 1.0, 0.01, 0.25], &[0.5, 0.01, 1.0, 0.75], &[0.01, 0.25, 0.75, 1.0]],
            Self::Gen3 => &[
                &[1.0, 0.1, 0.5, 0.5, 0.4],
                &[0.1, 1.0, 0.5, 0.5, 0.25],
                &[0.5, 0.5, 1.0, 0.2, 0.2],
                &[0.5, 0.5, 0.2, 1.0, 0.75],
                &[0.4, 0.25, 0.2, 0.75, 1.0],
            ],
            Self::Fair3 => &[
                &[1.0, 0.1, 0.5, 0.5, 0.05],
                &[0.1, 1.0, 0.5, 0.05, 0.25],
                &[0.5, 0.5, 1.0, 0.2, 0.2],
                &[0.5, 0.05, 0.2, 1.0, 0.75],
                &[0.05, 0.25, 0.2, 0.75, 1.0],
            ],
            Self::A3 => &[
                &[1.0, 0.1, 0.5, 0.5, 0.01],
                &[0.1, 1.0, 0.5, 0.01, 0.25],
                &[0.5, 0.5, 1.0, 0.2, 0.2],
                &[0.5, 0.01, 0.2, 1.0, 0.75],
                &[0.01, 0.25, 0.2, 0.75, 1.0],
            ],
        };
        rows.iter().map(|r| r.to_vec()).collect()
    }

    pub fn matrix(self) -> Result<SymPsdMatrix> {
        SymPsdMatrix::new(&self.entries())
    }

    pub fn spec(self) -> Result<JointGaussianSpec> {
        JointGaussianSpec::from_joint(&self.matrix()?)
    }

    pub fn dim_x(self) -> usize {
        self.entries().len() - 2
    }

    /// `{"name": ..., "dim_x": ..., "matrix": [[...], ...]}`.
    pub fn to_json(self) -> serde_json::Value {
        serde_json::json!({ "name": self.name(), "dim_x": self.dim_x(), "matrix": self.entries() })
    }
}

/// Draws `n_rows` i.i.d. rows of `N(0, joint)` with block order `x…, y, e`.
pub fn sample_joint(joint: &SymPsdMatrix, n_rows: usize, seed: u64) -> Result<LabeledDataset> {
    let m = joint.dim();
    if m < 3 {
        return Err(Error::Dimension(format!("joint covariance must have dimension ≥ 3, got {m}")));
    }
    let d = m - 2;
    let f = joint.factor();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(n_rows * d);
    let mut targets = Vec::with_capacity(n_rows);
    let mut sensitive = Vec::with_capacity(n_rows);
    let mut z = vec![0.0; m];
    for _ in 0..n_rows {
        z.iter_mut().for_each(|v| *v = StandardNormal.sample(&mut rng));
        for i in 0..m {
            let v: f64 = (0..m).map(|k| f[i][k] * z[k]).sum();
            if i < d {
                features.push(v);
            } else if i == d {
                targets.push(v);
            } else {
                sensitive.push(Some(v));
            }
        }
    }
    LabeledDataset::new("gaussian", d, features, targets, sensitive)
}

/// How the sensitive column is made uncertain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UncertaintyInjector {
    /// Keep `n` values chosen uniformly at random; the rest become missing.
    KeepN { n: usize },
    /// Add `N(0, σ²)` to every value.
    GaussianNoise { sigma: f64 },
    /// Add `N(0, σ²)` where `|e| ≥ threshold`.
    ThresholdNoise { sigma: f64, threshold: f64 },
}

/// Applies an injector to a fully observed dataset, keeping the original column
/// as `true_sensitive`. Features and targets are never touched.
pub fn inject(data: &LabeledDataset, injector: UncertaintyInjector, seed: u64) -> Result<LabeledDataset> {
    let truth: Vec<f64> = data
        .sensitive
        .iter()
        .map(|s| s.ok_or_else(|| Error::InvalidArgument("inject needs a fully observed sensitive column".into())))
        .collect::<Result<_>>()?;
    let n_rows = data.n_rows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = data.clone();
    match injector {
        UncertaintyInjector::KeepN { n } => {
            if n > n_rows {
                return Err(Error::InvalidArgument(format!("cannot keep {n} of {n_rows} rows")));
            }
            if n < n_rows {
                let mut keep = vec![false; n_rows];
                for i in sample_indices(&mut rng, n_rows, n) {
                    keep[i] = true;
                }
                for (s, k) in out.sensitive.iter_mut().zip(keep) {
                    if !k {
                        *s = None;
                    }
                }
            }
        }
        UncertaintyInjector::GaussianNoise { sigma } | UncertaintyInjector::ThresholdNoise { sigma, .. } => {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(Error::InvalidArgument(format!("sigma must be nonnegative, got {sigma}")));
            }
            let threshold = match injector {
                UncertaintyInjector::ThresholdNoise { threshold, .. } => threshold,
                _ => f64::NEG_INFINITY,
            };
            if sigma > 0.0 {
                for (s, &t) in out.sensitive.iter_mut().zip(&truth) {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    if t.abs() >= threshold {
                        *s = Some(t + sigma * z);
                    }
                }
            }
        }
    }
    out.true_sensitive = Some(data.true_sensitive.clone().unwrap_or(truth));
    Ok(out)
}

/// Plug-in `b̂_ex = Σ_ee^{-1/2} Σ_xx^{-1/2} Σ̂_ex` with `Σ̂_ex = (1/n) Σ e x` over
/// rows with an observed attribute, using known `Σ_xx` and `Σ_ee`.
pub fn estimate_bex(data: &LabeledDataset, sigma_xx: &SymPsdMatrix, sigma_ee: f64) -> Result<CcmVector> {
    let rows = data.present_indices();
    estimate_bex_rows(data, &rows, sigma_xx, sigma_ee)
}

/// [`estimate_bex`] over an explicit multiset of row indices (e.g. a bootstrap resample).
pub fn estimate_bex_rows(data: &LabeledDataset, rows: &[usize], sigma_xx: &SymPsdMatrix, sigma_ee: f64) -> Result<CcmVector> {
    if sigma_xx.dim() != data.n_features {
        return Err(Error::Dimension(format!("Σ_xx has dimension {}, data has {} features", sigma_xx.dim(), data.n_features)));
    }
    let cross = cross_moment(data, rows)?;
    Ok(ccm_from_blocks(sigma_ee, &cross, sigma_xx, CcmPair::Ex))
}

fn cross_moment(data: &LabeledDataset, rows: &[usize]) -> Result<Vec<f64>> {
    let mut cross = vec![0.0; data.n_features];
    let mut n = 0usize;
    for &i in rows {
        let Some(e) = data.sensitive[i] else { continue };
        n += 1;
        for (c, x) in cross.iter_mut().zip(data.row(i)) {
            *c += e * x;
        }
    }
    if n == 0 {
        return Err(Error::EmptyUncertainSet);
    }
    cross.iter_mut().for_each(|c| *c /= n as f64);
    Ok(cross)
}

/// Fully empirical `b̂_ex`: `Σ_xx` from all rows, `Σ_ee` and `Σ_ex` from rows
/// with an observed attribute, every block centered.
pub fn estimate_bex_empirical(data: &LabeledDataset) -> Result<CcmVector> {
    let d = data.n_features;
    let n_all = data.n_rows();
    if n_all < 2 {
        return Err(Error::InvalidArgument("need at least two rows".into()));
    }
    let mean_all: Vec<f64> = (0..d).map(|j| (0..n_all).map(|i| data.row(i)[j]).sum::<f64>() / n_all as f64).collect();
    let mut sxx = vec![vec![0.0; d]; d];
    for i in 0..n_all {
        let r = data.row(i);
        for a in 0..d {
            for b in 0..d {
                sxx[a][b] += (r[a] - mean_all[a]) * (r[b] - mean_all[b]) / n_all as f64;
            }
        }
    }
    let present = data.present_indices();
    if present.is_empty() {
        return Err(Error::EmptyUncertainSet);
    }
    let np = present.len() as f64;
    let me = present.iter().map(|&i| data.sensitive[i].expect("present")).sum::<f64>() / np;
    let mx: Vec<f64> = (0..d).map(|j| present.iter().map(|&i| data.row(i)[j]).sum::<f64>() / np).collect();
    let mut see = 0.0;
    let mut sex = vec![0.0; d];
    for &i in &present {
        let e = data.sensitive[i].expect("present") - me;
        see += e * e / np;
        for (j, s) in sex.iter_mut().enumerate() {
            *s += e * (data.row(i)[j] - mx[j]) / np;
        }
    }
    let sigma_xx = SymPsdMatrix::new(&sxx)?;
    Ok(ccm_from_blocks(see, &sex, &sigma_xx, CcmPair::Ex))
}

/// Column names and conventions for [`load_csv`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub feature_cols: Vec<String>,
    pub target_col: String,
    pub sensitive_col: String,
    #[serde(default = "default_missing_marker")]
    pub missing_marker: String,
    /// Min-max scale features, target and sensitive column into `[0, 1]`.
    #[serde(default)]
    pub normalize: bool,
}

fn default_missing_marker() -> String {
    "?".into()
}

/// Reads a comma-separated file with a header row.
///
/// Rows with a missing feature or target are dropped. A missing sensitive
/// value marks that row's attribute as absent.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<LabeledDataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            row: 0,
            column: name.to_string(),
            message: "column not found in header".into(),
        })
    };
    let feat_idx: Vec<usize> = schema.feature_cols.iter().map(|c| find(c)).collect::<Result<_>>()?;
    if feat_idx.is_empty() {
        return Err(Error::Config("at least one feature column is required".into()));
    }
    let target_idx = find(&schema.target_col)?;
    let sens_idx = find(&schema.sensitive_col)?;
    let is_missing = |s: &str| s.is_empty() || s == schema.missing_marker;
    let parse = |s: &str, row: usize, col: &str| {
        s.parse::<f64>().map_err(|e| Error::Parse { row, column: col.to_string(), message: format!("{e} ({s:?})") })
    };
    let mut features = Vec::new();
    let mut targets = Vec::new();
    let mut sensitive = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row = r + 1;
        let field = |i: usize| record.get(i).unwrap_or("");
        if feat_idx.iter().any(|&i| is_missing(field(i))) || is_missing(field(target_idx)) {
            continue;
        }
        for (&i, name) in feat_idx.iter().zip(&schema.feature_cols) {
            features.push(parse(field(i), row, name)?);
        }
        targets.push(parse(field(target_idx), row, &schema.target_col)?);
        let s = field(sens_idx);
        sensitive.push(if is_missing(s) { None } else { Some(parse(s, row, &schema.sensitive_col)?) });
    }
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("csv").to_string();
    let mut data = LabeledDataset::new(name, feat_idx.len(), features, targets, sensitive)?;
    if schema.normalize {
        normalize_min_max(&mut data);
    }
    Ok(data)
}

/// Maps each feature column, the target, and the observed sensitive values
/// affinely onto `[0, 1]`. Constant columns map to 0.
pub fn normalize_min_max(data: &mut LabeledDataset) {
    fn scale(values: &mut [&mut f64]) {
        let lo = values.iter().map(|v| **v).fold(f64::INFINITY, f64::min);
        let hi = values.iter().map(|v| **v).fold(f64::NEG_INFINITY, f64::max);
        for v in values.iter_mut() {
            **v = if hi > lo { (**v - lo) / (hi - lo) } else { 0.0 };
        }
    }
    let d = data.n_features;
    for j in 0..d {
        let mut col: Vec<&mut f64> = data.features.iter_mut().skip(j).step_by(d).collect();
        scale(&mut col);
    }
    scale(&mut data.targets.iter_mut().collect::<Vec<_>>());
    scale(&mut data.sensitive.iter_mut().flatten().collect::<Vec<_>>());
}

/// Seeded shuffle, then the first `round(ratio · n)` rows become the training set.
pub fn split(data: &LabeledDataset, ratio: f64, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidArgument(format!("split ratio must lie in (0, 1), got {ratio}")));
    }
    let n = data.n_rows();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((ratio * n as f64).round() as usize).min(n);
    Ok((data.subset(&idx[..n_train]), data.subset(&idx[n_train..])))
}

/// Binary classification data with a group-correlated label.
///
/// `e ~ Bernoulli(½)`, `x | e ~ N((2e − 1) · shift · v, I)` for a fixed unit
/// vector `v`, and `y = 1[wᵀx + group_effect · (2e − 1) + noise · z > 0]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureConfig {
    pub n_rows: usize,
    pub dim: usize,
    pub shift: f64,
    pub group_effect: f64,
    pub noise: f64,
}

impl Default for MixtureConfig {
    fn default() -> Self {
        Self { n_rows: 4000, dim: 5, shift: 0.75, group_effect: 0.5, noise: 0.5 }
    }
}

pub fn gaussian_mixture_classification(cfg: &MixtureConfig, seed: u64) -> Result<LabeledDataset> {
    let d = cfg.dim;
    if d == 0 {
        return Err(Error::InvalidArgument("dim must be positive".into()));
    }
    let dir: Vec<f64> = (0..d).map(|j| if j < 2 { 1.0 } else { 0.0 }).collect();
    let dn = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    let w: Vec<f64> = (0..d).map(|j| [1.0, -0.4, 0.8, 0.5, -0.6][j % 5]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(cfg.n_rows * d);
    let mut targets = Vec::with_capacity(cfg.n_rows);
    let mut sensitive = Vec::with_capacity(cfg.n_rows);
    for _ in 0..cfg.n_rows {
        let e = rng.random::<bool>();
        let sgn = if e { 1.0 } else { -1.0 };
        let mut score = cfg.group_effect * sgn;
        for j in 0..d {
            let z: f64 = StandardNormal.sample(&mut rng);
            let x = sgn * cfg.shift * dir[j] / dn + z;
            score += w[j] * x;
            features.push(x);
        }
        let z: f64 = StandardNormal.sample(&mut rng);
        targets.push(f64::from(score + cfg.noise * z > 0.0));
        sensitive.push(Some(f64::from(e)));
    }
    LabeledDataset::new("mixture", d, features, targets, sensitive)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_psd_and_match_tables() {
        for p in CovariancePreset::ALL {
            let m = p.matrix().unwrap();
            assert_eq!(m.to_rows(), p.entries());
        }
        let g = CovariancePreset::Gen2.spec().unwrap();
        assert_eq!(g.sigma_xe, vec![0.4, 0.25]);
        assert_eq!(g.sigma_xy, vec![0.5, 0.5]);
        assert_eq!(CovariancePreset::Gen3.dim_x(), 3);
    }

    #[test]
    fn identity_sampling_sanity() {
        let n = 20_000;
        let data = sample_joint(&SymPsdMatrix::identity(3).unwrap(), n, 9).unwrap();
        let tol = 5.0 / (n as f64).sqrt();
        let x: Vec<f64> = (0..n).map(|i| data.row(i)[0]).collect();
        let var_x = x.iter().map(|v| v * v).sum::<f64>() / n as f64;
        let cov_xy = (0..n).map(|i| x[i] * data.targets[i]).sum::<f64>() / n as f64;
        assert!((var_x - 1.0).abs() < tol);
        assert!(cov_xy.abs() < tol);
        assert_eq!(data, sample_joint(&SymPsdMatrix::identity(3).unwrap(), n, 9).unwrap());
    }

    #[test]
    fn keep_n_and_zero_noise_identities() {
        let data = sample_joint(&CovariancePreset::Gen2.matrix().unwrap(), 50, 1).unwrap();
        let kept = inject(&data, UncertaintyInjector::KeepN { n: 50 }, 2).unwrap();
        assert_eq!(kept.sensitive, data.sensitive);
        let noisy = inject(&data, UncertaintyInjector::GaussianNoise { sigma: 0.0 }, 2).unwrap();
        assert_eq!(noisy.sensitive, data.sensitive);
        let some = inject(&data, UncertaintyInjector::KeepN { n: 7 }, 2).unwrap();
        assert_eq!(some.present_indices().len(), 7);
        assert_eq!(some.features, data.features);
        assert_eq!(some.targets, data.targets);
        assert!(inject(&some, UncertaintyInjector::KeepN { n: 3 }, 2).is_err());
    }

    #[test]
    fn threshold_noise_spares_small_values() {
        let data = sample_joint(&CovariancePreset::Gen2.matrix().unwrap(), 10_000, 4).unwrap();
        let out = inject(&data, UncertaintyInjector::ThresholdNoise { sigma: 2.0, threshold: 1.0 }, 5).unwrap();
        let mut changed = 0;
        for (a, b) in data.sensitive.iter().zip(&out.sensitive) {
            let (a, b) = (a.unwrap(), b.unwrap());
            if a.abs() < 1.0 {
                assert_eq!(a.to_bits(), b.to_bits());
            } else if a != b {
                changed += 1;
            }
        }
        assert!(changed > 2000);
    }

    #[test]
    fn split_examples() {
        let data = LabeledDataset::new("t", 1, (0..10).map(f64::from).collect(), vec![0.0; 10], vec![Some(0.0); 10]).unwrap();
        let (a, b) = split(&data, 0.8, 3).unwrap();
        assert_eq!((a.n_rows(), b.n_rows()), (8, 2));
        let mut all: Vec<f64> = a.features.iter().chain(&b.features).copied().collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, data.features);
        assert_eq!(split(&data, 0.8, 3).unwrap().0, a);
        assert!(split(&data, 1.0, 3).is_err());
    }

    #[test]
    fn population_moment_gives_exact_bex() {
        // Two rows whose second moments reproduce Σ_xe exactly.
        let spec = CovariancePreset::Gen2.spec().unwrap();
        let data = LabeledDataset::new("p", 2, vec![0.8, 0.5, 0.0, 0.0], vec![0.0, 0.0], vec![Some(1.0), Some(0.0)]).unwrap();
        let b = estimate_bex(&data, &spec.sigma_xx, spec.sigma_ee).unwrap();
        let truth = crate::gaussian::ccm(&spec, CcmPair::Ex).unwrap();
        for (a, t) in b.entries.iter().zip(&truth.entries) {
            assert!((a - t).abs() < 1e-15);
        }
        let mut data2 = data.clone();
        data2.sensitive = vec![None, None];
        assert!(matches!(estimate_bex(&data2, &spec.sigma_xx, 1.0), Err(Error::EmptyUncertainSet)));
    }
}
