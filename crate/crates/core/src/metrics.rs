//! Fairness losses and evaluation metrics.
//!
//! The χ² measures use a soft 2-D histogram: each prediction is spread over
//! `n_bins` bins with Gaussian kernel weights normalized by a softmax, which
//! keeps the estimate differentiable in the predictions. A sensitive column
//! with at most two distinct values is one-hot encoded exactly; any other
//! column is soft-binned over its own range.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::independence_dbar;
use crate::linalg::SymPsdMatrix;

/// Floor added to the product-measure denominator.
pub const CHI2_FLOOR: f64 = 1e-8;

/// Range of the prediction axis. It is treated as a constant when
/// differentiating, including under `DataMinMax`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangePolicy {
    /// `[0, 1]`, for probabilities.
    FixedUnit,
    /// Observed minimum and maximum of the predictions.
    DataMinMax,
    Fixed { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftHistogramConfig {
    pub n_bins: usize,
    /// Kernel width as a fraction of the range.
    pub bandwidth: f64,
    pub range_policy: RangePolicy,
}

impl Default for SoftHistogramConfig {
    fn default() -> Self {
        Self { n_bins: 10, bandwidth: 0.1, range_policy: RangePolicy::FixedUnit }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FairnessMeasureKind {
    Chi2Independence,
    Chi2Separation,
    DbarIndependence,
    DpGap,
    EoGap,
}

impl FairnessMeasureKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Chi2Independence => "chi2_independence",
            Self::Chi2Separation => "chi2_separation",
            Self::DbarIndependence => "dbar_independence",
            Self::DpGap => "dp_gap",
            Self::EoGap => "eo_gap",
        }
    }

    pub fn needs_target(self) -> bool {
        matches!(self, Self::Chi2Separation | Self::EoGap)
    }

    pub fn is_differentiable(self) -> bool {
        matches!(self, Self::Chi2Independence | Self::Chi2Separation | Self::DbarIndependence)
    }
}

/// Value and gradient of a differentiable measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureValue {
    pub value: f64,
    pub grad: Vec<f64>,
    /// A sensitive category had fewer than two members.
    pub degenerate_marginal: bool,
    /// Strata dropped from a separation estimate for being empty or too small.
    pub skipped_strata: usize,
}

impl SoftHistogramConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_bins < 2 {
            return Err(Error::InvalidArgument(format!("n_bins must be at least 2, got {}", self.n_bins)));
        }
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {}", self.bandwidth)));
        }
        if let RangePolicy::Fixed { lo, hi } = self.range_policy {
            if !(hi > lo) {
                return Err(Error::InvalidArgument(format!("range must satisfy lo < hi, got [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    fn range(&self, pred: &[f64]) -> (f64, f64) {
        match self.range_policy {
            RangePolicy::FixedUnit => (0.0, 1.0),
            RangePolicy::Fixed { lo, hi } => (lo, hi),
            RangePolicy::DataMinMax => min_max_range(pred),
        }
    }
}

fn min_max_range(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// Softmax kernel weights of `u` over bins, and `d logit_b / du`.
fn soft_assign(u: f64, lo: f64, hi: f64, n_bins: usize, bandwidth: f64, w: &mut [f64], dlogit: &mut [f64]) {
    let width = (hi - lo) / n_bins as f64;
    let h = bandwidth * (hi - lo);
    let inv2h2 = 1.0 / (2.0 * h * h);
    let mut max_l = f64::NEG_INFINITY;
    for b in 0..n_bins {
        let c = lo + (b as f64 + 0.5) * width;
        let diff = u - c;
        w[b] = -diff * diff * inv2h2;
        dlogit[b] = -diff / (h * h);
        max_l = max_l.max(w[b]);
    }
    let mut z = 0.0;
    for wb in w.iter_mut() {
        *wb = (*wb - max_l).exp();
        z += *wb;
    }
    w.iter_mut().for_each(|wb| *wb /= z);
}

/// Column weights for the sensitive attribute.
struct SensColumns {
    /// Row-major `n x n_cols`.
    weights: Vec<f64>,
    n_cols: usize,
    categorical: bool,
}

fn encode_sensitive(sens: &[f64], cfg: &SoftHistogramConfig) -> SensColumns {
    let mut distinct: Vec<f64> = Vec::new();
    for &s in sens {
        if !distinct.contains(&s) {
            distinct.push(s);
            if distinct.len() > 2 {
                break;
            }
        }
    }
    if distinct.len() <= 2 {
        distinct.sort_by(f64::total_cmp);
        let k = distinct.len();
        let mut weights = vec![0.0; sens.len() * k];
        for (i, &s) in sens.iter().enumerate() {
            let c = distinct.iter().position(|&d| d == s).expect("value seen above");
            weights[i * k + c] = 1.0;
        }
        return SensColumns { weights, n_cols: k, categorical: true };
    }
    let (lo, hi) = min_max_range(sens);
    let k = cfg.n_bins;
    let mut weights = vec![0.0; sens.len() * k];
    let mut scratch = vec![0.0; k];
    for (i, &s) in sens.iter().enumerate() {
        soft_assign(s, lo, hi, k, cfg.bandwidth, &mut weights[i * k..(i + 1) * k], &mut scratch);
    }
    SensColumns { weights, n_cols: k, categorical: false }
}

/// χ² of the soft joint table against the product of its marginals, with gradient.
fn chi2_core(pred: &[f64], sens: &SensColumns, rows: &[usize], lo: f64, hi: f64, cfg: &SoftHistogramConfig) -> (f64, Vec<f64>, bool) {
    let n = rows.len();
    let nb = cfg.n_bins;
    let nc = sens.n_cols;
    let inv_n = 1.0 / n as f64;
    let mut w = vec![0.0; n * nb];
    let mut dl = vec![0.0; n * nb];
    let mut joint = vec![0.0; nb * nc];
    let mut p_e = vec![0.0; nc];
    for (r, &i) in rows.iter().enumerate() {
        soft_assign(pred[i], lo, hi, nb, cfg.bandwidth, &mut w[r * nb..(r + 1) * nb], &mut dl[r * nb..(r + 1) * nb]);
        let s = &sens.weights[i * nc..(i + 1) * nc];
        for c in 0..nc {
            p_e[c] += s[c] * inv_n;
        }
        for b in 0..nb {
            let wb = w[r * nb + b] * inv_n;
            for c in 0..nc {
                joint[b * nc + c] += wb * s[c];
            }
        }
    }
    let degenerate = sens.categorical && p_e.iter().any(|&p| p * (n as f64) < 1.5);
    let p_u: Vec<f64> = (0..nb).map(|b| joint[b * nc..(b + 1) * nc].iter().sum()).collect();
    let mut value = 0.0;
    let mut g = vec![0.0; nb * nc];
    for b in 0..nb {
        let mut h = 0.0;
        for c in 0..nc {
            let q = p_u[b] * p_e[c] + CHI2_FLOOR;
            let dd = joint[b * nc + c] - p_u[b] * p_e[c];
            value += dd * dd / q;
            g[b * nc + c] = 2.0 * dd / q;
            h += -2.0 * dd * p_e[c] / q - dd * dd * p_e[c] / (q * q);
        }
        for c in 0..nc {
            g[b * nc + c] += h;
        }
    }
    let mut grad = vec![0.0; pred.len()];
    for (r, &i) in rows.iter().enumerate() {
        let s = &sens.weights[i * nc..(i + 1) * nc];
        let wr = &w[r * nb..(r + 1) * nb];
        let dr = &dl[r * nb..(r + 1) * nb];
        let mean_dl: f64 = wr.iter().zip(dr).map(|(a, b)| a * b).sum();
        let mut acc = 0.0;
        for b in 0..nb {
            let gw: f64 = (0..nc).map(|c| g[b * nc + c] * s[c]).sum::<f64>() * inv_n;
            acc += gw * wr[b] * (dr[b] - mean_dl);
        }
        grad[i] = acc;
    }
    (value, grad, degenerate)
}

fn check_inputs(pred: &[f64], sens: &[f64], cfg: &SoftHistogramConfig) -> Result<()> {
    cfg.validate()?;
    if pred.len() != sens.len() {
        return Err(Error::ShapeMismatch(format!("{} predictions, {} sensitive values", pred.len(), sens.len())));
    }
    if pred.len() < 2 * cfg.n_bins {
        return Err(Error::InvalidArgument(format!("need at least {} samples, got {}", 2 * cfg.n_bins, pred.len())));
    }
    if pred.iter().chain(sens).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("inputs must be finite".into()));
    }
    Ok(())
}

/// Soft-histogram estimate of `χ²(p_{u,e} ‖ p_u p_e)` and its gradient in `pred`.
pub fn chi2_independence(pred: &[f64], sens: &[f64], cfg: &SoftHistogramConfig) -> Result<MeasureValue> {
    check_inputs(pred, sens, cfg)?;
    let (lo, hi) = cfg.range(pred);
    let cols = encode_sensitive(sens, cfg);
    let rows: Vec<usize> = (0..pred.len()).collect();
    let (value, grad, degenerate_marginal) = chi2_core(pred, &cols, &rows, lo, hi, cfg);
    Ok(MeasureValue { value, grad, degenerate_marginal, skipped_strata: 0 })
}

/// Stratum index of each target value: categories for at most two distinct
/// values, otherwise `n_bins` equiprobable bins by rank.
fn target_strata(target: &[f64], n_bins: usize) -> (Vec<usize>, usize) {
    let mut distinct: Vec<f64> = Vec::new();
    for &t in target {
        if !distinct.contains(&t) {
            distinct.push(t);
            if distinct.len() > 2 {
                break;
            }
        }
    }
    if distinct.len() <= 2 {
        distinct.sort_by(f64::total_cmp);
        let s = target.iter().map(|t| distinct.iter().position(|d| d == t).expect("seen")).collect();
        return (s, distinct.len());
    }
    let n = target.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| target[i].total_cmp(&target[j]).then(i.cmp(&j)));
    let mut strata = vec![0; n];
    for (rank, &i) in order.iter().enumerate() {
        strata[i] = rank * n_bins / n;
    }
    (strata, n_bins)
}

/// Target-weighted average of per-stratum χ² independence estimates.
///
/// Strata smaller than `2 · n_bins` are skipped and the weights renormalized
/// over the rest. The prediction range is fixed once over all rows.
pub fn chi2_separation(pred: &[f64], sens: &[f64], target: &[f64], cfg: &SoftHistogramConfig) -> Result<MeasureValue> {
    check_inputs(pred, sens, cfg)?;
    if target.len() != pred.len() {
        return Err(Error::ShapeMismatch(format!("{} predictions, {} targets", pred.len(), target.len())));
    }
    let (lo, hi) = cfg.range(pred);
    let cols = encode_sensitive(sens, cfg);
    let (strata, n_strata) = target_strata(target, cfg.n_bins);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_strata];
    for (i, &s) in strata.iter().enumerate() {
        members[s].push(i);
    }
    let used: Vec<&Vec<usize>> = members.iter().filter(|m| m.len() >= 2 * cfg.n_bins).collect();
    let skipped_strata = n_strata - used.len();
    let total: usize = used.iter().map(|m| m.len()).sum();
    let mut value = 0.0;
    let mut grad = vec![0.0; pred.len()];
    let mut degenerate_marginal = false;
    for rows in used {
        let weight = rows.len() as f64 / total as f64;
        let (v, g, deg) = chi2_core(pred, &cols, rows, lo, hi, cfg);
        value += weight * v;
        for &i in rows {
            grad[i] += weight * g[i];
        }
        degenerate_marginal |= deg;
    }
    Ok(MeasureValue { value, grad, degenerate_marginal, skipped_strata })
}

fn group_rate(pred: &[bool], mask: impl Iterator<Item = bool>) -> Option<f64> {
    let (mut pos, mut count) = (0usize, 0usize);
    for (p, m) in pred.iter().zip(mask) {
        if m {
            count += 1;
            pos += usize::from(*p);
        }
    }
    (count > 0).then(|| pos as f64 / count as f64)
}

/// `|P(ŷ = 1 | e = 1) − P(ŷ = 1 | e = 0)|`.
pub fn dp_gap(pred_labels: &[bool], sens: &[bool]) -> Result<f64> {
    if pred_labels.len() != sens.len() {
        return Err(Error::ShapeMismatch(format!("{} labels, {} sensitive values", pred_labels.len(), sens.len())));
    }
    let r1 = group_rate(pred_labels, sens.iter().copied()).ok_or(Error::MissingGroup("e = 1"))?;
    let r0 = group_rate(pred_labels, sens.iter().map(|s| !s)).ok_or(Error::MissingGroup("e = 0"))?;
    Ok((r1 - r0).abs())
}

/// Demographic-parity gap restricted to rows with `y = 1`.
pub fn eo_gap(pred_labels: &[bool], sens: &[bool], target: &[bool]) -> Result<f64> {
    if target.len() != pred_labels.len() || sens.len() != pred_labels.len() {
        return Err(Error::ShapeMismatch("labels, sensitive values and targets differ in length".into()));
    }
    let r1 = group_rate(pred_labels, sens.iter().zip(target).map(|(s, y)| *s && *y)).ok_or(Error::MissingGroup("e = 1, y = 1"))?;
    let r0 = group_rate(pred_labels, sens.iter().zip(target).map(|(s, y)| !*s && *y)).ok_or(Error::MissingGroup("e = 0, y = 1"))?;
    Ok((r1 - r0).abs())
}

/// D̄ independence of the empirical 2x2 covariance of centered `(pred, sens)`,
/// i.e. the squared sample correlation, with its gradient in `pred`.
pub fn empirical_dbar_with_grad(pred: &[f64], sens: &[f64]) -> Result<MeasureValue> {
    let n = pred.len();
    if sens.len() != n {
        return Err(Error::ShapeMismatch(format!("{n} predictions, {} sensitive values", sens.len())));
    }
    if n < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 samples, got {n}")));
    }
    let nf = n as f64;
    let mu = pred.iter().sum::<f64>() / nf;
    let me = sens.iter().sum::<f64>() / nf;
    let (mut vu, mut ve, mut c) = (0.0, 0.0, 0.0);
    for (u, e) in pred.iter().zip(sens) {
        vu += (u - mu) * (u - mu);
        ve += (e - me) * (e - me);
        c += (u - mu) * (e - me);
    }
    vu /= nf;
    ve /= nf;
    c /= nf;
    if vu <= 1e-300 || ve <= 1e-300 {
        return Err(Error::ZeroVariance);
    }
    let cov = SymPsdMatrix::from_raw_trusted(2, {
        let mut a = [[0.0; crate::linalg::MAX_DIM]; crate::linalg::MAX_DIM];
        a[0][0] = ve;
        a[1][1] = vu;
        a[0][1] = c;
        a[1][0] = c;
        a
    });
    let value = independence_dbar(&cov)?;
    let grad = pred
        .iter()
        .zip(sens)
        .map(|(u, e)| 2.0 * c / (vu * ve) * (e - me) / nf - c * c / (vu * vu * ve) * 2.0 * (u - mu) / nf)
        .collect();
    Ok(MeasureValue { value, grad, degenerate_marginal: false, skipped_strata: 0 })
}

/// [`empirical_dbar_with_grad`] without the gradient.
pub fn empirical_dbar(pred: &[f64], sens: &[f64]) -> Result<f64> {
    empirical_dbar_with_grad(pred, sens).map(|m| m.value)
}

/// Maps a two-valued column to booleans, the larger value being `true`.
pub fn binarize(values: &[f64]) -> Result<Vec<bool>> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.iter().any(|&v| v != lo && v != hi) {
        return Err(Error::InvalidArgument("column has more than two distinct values".into()));
    }
    Ok(values.iter().map(|&v| v == hi && hi != lo).collect())
}

/// Value and gradient of a differentiable measure; `target` is required by separation.
pub fn differentiable_measure(kind: FairnessMeasureKind, pred: &[f64], sens: &[f64], target: &[f64], cfg: &SoftHistogramConfig) -> Result<MeasureValue> {
    match kind {
        FairnessMeasureKind::Chi2Independence => chi2_independence(pred, sens, cfg),
        FairnessMeasureKind::Chi2Separation => chi2_separation(pred, sens, target, cfg),
        FairnessMeasureKind::DbarIndependence => empirical_dbar_with_grad(pred, sens),
        other => Err(Error::Config(format!("{} is not differentiable", other.name()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn chi2_of_identical_binary_columns_tends_to_one() {
        let pred: Vec<f64> = (0..100).map(|i| (i % 2) as f64).collect();
        let cfg = SoftHistogramConfig { bandwidth: 0.01, ..Default::default() };
        let v = chi2_independence(&pred, &pred, &cfg).unwrap().value;
        close(v, 1.0, 1e-6);
    }

    #[test]
    fn chi2_of_independent_groups_is_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 100_000;
        let pred: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let sens: Vec<f64> = (0..n).map(|_| f64::from(rng.random::<bool>())).collect();
        let v = chi2_independence(&pred, &sens, &Default::default()).unwrap().value;
        assert!(v < 0.01, "{v}");
    }

    #[test]
    fn chi2_rejects_short_input_and_flags_lonely_group() {
        let cfg = SoftHistogramConfig::default();
        assert!(chi2_independence(&[0.5; 19], &[0.0; 19], &cfg).is_err());
        let pred: Vec<f64> = (0..20).map(|i| i as f64 / 20.0).collect();
        let mut sens = vec![0.0; 20];
        sens[3] = 1.0;
        assert!(chi2_independence(&pred, &sens, &cfg).unwrap().degenerate_marginal);
    }

    #[test]
    fn separation_hand_tables() {
        // Two strata of 20 rows each. With a tiny bandwidth, predictions 0 and 1
        // fall into the first and last bins exactly.
        let cfg = SoftHistogramConfig { n_bins: 2, bandwidth: 1e-3, range_policy: RangePolicy::FixedUnit };
        let mut pred = Vec::new();
        let mut sens = Vec::new();
        let mut target = Vec::new();
        // Stratum y = 0 (30 rows): pred = sens, balanced groups → table [[.5,0],[0,.5]] → χ² = 1.
        for i in 0..30 {
            pred.push((i % 2) as f64);
            sens.push((i % 2) as f64);
            target.push(0.0);
        }
        // Stratum y = 1 (10 rows): pred constant → χ² = 0.
        for i in 0..10 {
            pred.push(1.0);
            sens.push((i % 2) as f64);
            target.push(1.0);
        }
        let cfg4 = SoftHistogramConfig { n_bins: 2, ..cfg };
        let v = chi2_separation(&pred, &sens, &target, &cfg4).unwrap();
        let one = 4.0 * 0.25f64.powi(2) / (0.25 + CHI2_FLOOR);
        close(v.value, 0.75 * one + 0.25 * 0.0, 1e-9);
        assert_eq!(v.skipped_strata, 0);
    }

    #[test]
    fn separation_with_single_class_equals_independence() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pred: Vec<f64> = (0..200).map(|_| rng.random()).collect();
        let sens: Vec<f64> = (0..200).map(|_| f64::from(rng.random::<bool>())).collect();
        let cfg = SoftHistogramConfig::default();
        let a = chi2_independence(&pred, &sens, &cfg).unwrap();
        let b = chi2_separation(&pred, &sens, &[1.0; 200], &cfg).unwrap();
        close(a.value, b.value, 1e-15);
    }

    #[test]
    fn gap_examples() {
        let sens = [true, true, true, true, true, false, false, false, false, false];
        assert_eq!(dp_gap(&[true; 10], &sens).unwrap(), 0.0);
        let pred = [true, true, true, true, false, true, true, false, false, true];
        // Rates 4/5 = 0.8 and 3/5 = 0.6.
        close(dp_gap(&pred, &sens).unwrap(), 0.2, 1e-15);
        assert!(matches!(dp_gap(&[true; 3], &[true; 3]), Err(Error::MissingGroup(_))));
        close(eo_gap(&pred, &sens, &[true; 10]).unwrap(), dp_gap(&pred, &sens).unwrap(), 0.0);
        let target = [true, true, false, false, false, true, true, false, false, false];
        assert_eq!(eo_gap(&target, &sens, &target).unwrap(), 0.0);
    }

    #[test]
    fn dp_gap_rates_point_eight_and_point_five() {
        let mut pred = vec![true; 8];
        pred.extend([false; 2]);
        pred.extend([true; 5]);
        pred.extend([false; 5]);
        let sens: Vec<bool> = (0..20).map(|i| i < 10).collect();
        close(dp_gap(&pred, &sens).unwrap(), 0.3, 1e-15);
    }

    #[test]
    fn empirical_dbar_examples() {
        let x: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        close(empirical_dbar(&x, &x).unwrap(), 1.0, 1e-12);
        assert!(matches!(empirical_dbar(&[1.0; 5], &x[..5]), Err(Error::ZeroVariance)));
    }

    #[test]
    fn binarize_two_valued_columns() {
        assert_eq!(binarize(&[2.0, 5.0, 2.0]).unwrap(), vec![false, true, false]);
        assert!(binarize(&[0.0, 0.5, 1.0]).is_err());
    }
}
