//! Canonical correlation matrices, the D̄ divergence between zero-mean
//! Gaussians, and the identities that turn Gaussian fair regression into a
//! quadratic program over the unit ball.
//!
//! The representation `u` of a fair predictor enters only through
//! `a = b_ux`, its canonical correlation with `x`. For a joint Gaussian
//! `(x, y, e)`:
//!
//! * the prediction objective is `⟨a, b_yx⟩²` and `E[Var(y | u)] = Σ_yy (1 − ⟨a, b_yx⟩²)`;
//! * the D̄ independence measure between `e` and `u` is `⟨a, b_ex⟩²`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, raw_mul, SymPsdMatrix, MAX_DIM};

/// Largest feature dimension supported by the solvers.
pub const MAX_FEATURES: usize = MAX_DIM - 2;

/// Zero-mean joint Gaussian over `(x, y, e)` with scalar target and attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointGaussianSpec {
    pub sigma_xx: SymPsdMatrix,
    pub sigma_xy: Vec<f64>,
    pub sigma_xe: Vec<f64>,
    pub sigma_yy: f64,
    pub sigma_ee: f64,
    pub sigma_ye: f64,
}

/// Which pair of variables a canonical correlation vector relates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CcmPair {
    Yx,
    Ex,
    Ux,
}

/// Canonical correlation between a scalar and the feature vector `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcmVector {
    pub entries: Vec<f64>,
    pub source: CcmPair,
    /// Set when a whitening step had to use a pseudo-inverse.
    #[serde(default)]
    pub rank_deficient: bool,
}

/// A 2-D point in polar form, `theta` normalized into `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarVec {
    pub r: f64,
    pub theta: f64,
}

/// Linear predictor realizing a target canonical correlation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearPredictor {
    /// `u = weightsᵀ x + noise`.
    pub weights: Vec<f64>,
    /// Variance of independent noise that brings `Var(u)` to one.
    pub noise_variance: f64,
}

impl JointGaussianSpec {
    /// Splits a joint covariance with block order `x…, y, e`.
    pub fn from_joint(joint: &SymPsdMatrix) -> Result<Self> {
        let n = joint.dim();
        if n < 3 {
            return Err(Error::Dimension(format!(
                "joint covariance needs at least one feature plus y and e, got dimension {n}"
            )));
        }
        let d = n - 2;
        let idx: Vec<usize> = (0..d).collect();
        let spec = Self {
            sigma_xx: joint.principal_block(&idx)?,
            sigma_xy: (0..d).map(|i| joint.get(i, d)).collect(),
            sigma_xe: (0..d).map(|i| joint.get(i, d + 1)).collect(),
            sigma_yy: joint.get(d, d),
            sigma_ee: joint.get(d + 1, d + 1),
            sigma_ye: joint.get(d, d + 1),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Checks block shapes, positive variances, and joint positive semidefiniteness.
    pub fn validate(&self) -> Result<()> {
        let d = self.sigma_xx.dim();
        if d > MAX_FEATURES {
            return Err(Error::Dimension(format!("at most {MAX_FEATURES} features supported, got {d}")));
        }
        if self.sigma_xy.len() != d || self.sigma_xe.len() != d {
            return Err(Error::Dimension("cross-covariance length differs from dim_x".into()));
        }
        if !(self.sigma_yy > 0.0) || !(self.sigma_ee > 0.0) {
            return Err(Error::InvalidArgument("sigma_yy and sigma_ee must be positive".into()));
        }
        self.joint().map(|_| ())
    }

    pub fn dim_x(&self) -> usize {
        self.sigma_xx.dim()
    }

    /// Assembled `(d+2) x (d+2)` covariance.
    pub fn joint(&self) -> Result<SymPsdMatrix> {
        let d = self.dim_x();
        let n = d + 2;
        let mut rows = vec![vec![0.0; n]; n];
        for (i, row) in rows.iter_mut().enumerate().take(d) {
            row[..d].copy_from_slice(&self.sigma_xx.to_rows()[i]);
        }
        for i in 0..d {
            rows[i][d] = self.sigma_xy[i];
            rows[d][i] = self.sigma_xy[i];
            rows[i][d + 1] = self.sigma_xe[i];
            rows[d + 1][i] = self.sigma_xe[i];
        }
        rows[d][d] = self.sigma_yy;
        rows[d + 1][d + 1] = self.sigma_ee;
        rows[d][d + 1] = self.sigma_ye;
        rows[d + 1][d] = self.sigma_ye;
        SymPsdMatrix::new(&rows)
    }
}

impl CcmVector {
    pub fn new(entries: Vec<f64>, source: CcmPair) -> Self {
        Self { entries, source, rank_deficient: false }
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.entries)
    }

    /// Polar form of a 2-D vector.
    pub fn polar(&self) -> Result<PolarVec> {
        match self.entries.as_slice() {
            &[x, y] => Ok(PolarVec::from_cartesian([x, y])),
            _ => Err(Error::Dimension(format!("polar form needs d = 2, got {}", self.dim()))),
        }
    }
}

impl PolarVec {
    pub fn new(r: f64, theta: f64) -> Self {
        Self { r, theta: wrap_angle(theta) }
    }

    pub fn from_cartesian(v: [f64; 2]) -> Self {
        let r = v[0].hypot(v[1]);
        let theta = if r == 0.0 { 0.0 } else { wrap_angle(v[1].atan2(v[0])) };
        Self { r, theta }
    }

    pub fn to_cartesian(self) -> [f64; 2] {
        [self.r * self.theta.cos(), self.r * self.theta.sin()]
    }
}

/// Maps an angle into `[0, 2π)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    if t >= TAU {
        0.0
    } else {
        t
    }
}

/// Unit vector at angle `theta`.
pub fn unit(theta: f64) -> [f64; 2] {
    [theta.cos(), theta.sin()]
}

/// `b_vw = Σ_vv^{-1/2} Σ_vw Σ_ww^{-1/2}` for scalar `v` and vector `w = x`.
pub fn ccm_from_blocks(sigma_vv: f64, sigma_vx: &[f64], sigma_xx: &SymPsdMatrix, source: CcmPair) -> CcmVector {
    let w = sigma_xx.inv_sqrt();
    let mut entries = w.matrix.mul_vec(sigma_vx);
    let mut rank_deficient = w.rank_deficient;
    if sigma_vv > 0.0 {
        let s = sigma_vv.sqrt();
        entries.iter_mut().for_each(|v| *v /= s);
    } else {
        entries.iter_mut().for_each(|v| *v = 0.0);
        rank_deficient = true;
    }
    CcmVector { entries, source, rank_deficient }
}

/// Canonical correlation of `y` or `e` with `x`.
pub fn ccm(spec: &JointGaussianSpec, pair: CcmPair) -> Result<CcmVector> {
    match pair {
        CcmPair::Yx => Ok(ccm_from_blocks(spec.sigma_yy, &spec.sigma_xy, &spec.sigma_xx, pair)),
        CcmPair::Ex => Ok(ccm_from_blocks(spec.sigma_ee, &spec.sigma_xe, &spec.sigma_xx, pair)),
        CcmPair::Ux => Err(Error::InvalidArgument(
            "b_ux depends on the predictor; use ccm_from_blocks".into(),
        )),
    }
}

/// `½ ‖Σ_w^{-1/2} (Σ_v − Σ_w) Σ_w^{-1/2}‖_F²`.
pub fn dbar_divergence(sigma_v: &SymPsdMatrix, sigma_w: &SymPsdMatrix) -> Result<f64> {
    let n = sigma_w.dim();
    if sigma_v.dim() != n {
        return Err(Error::Dimension(format!("dimensions {} and {n} differ", sigma_v.dim())));
    }
    let w = sigma_w.inv_sqrt();
    if w.rank_deficient {
        return Err(Error::SingularReference);
    }
    let mut diff = [[0.0; MAX_DIM]; MAX_DIM];
    for (i, row) in diff.iter_mut().enumerate().take(n) {
        for (j, v) in row.iter_mut().enumerate().take(n) {
            *v = sigma_v.get(i, j) - sigma_w.get(i, j);
        }
    }
    let r = w.matrix.raw();
    let m = raw_mul(n, &raw_mul(n, r, &diff), r);
    let fro: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| m[i][j] * m[i][j]).sum();
    Ok(0.5 * fro)
}

/// D̄ between a 2x2 joint covariance of `(e, u)` and the product of its marginals.
///
/// Equals the squared scalar canonical correlation `Σ_eu² / (Σ_ee Σ_uu)`.
pub fn independence_dbar(joint: &SymPsdMatrix) -> Result<f64> {
    if joint.dim() != 2 {
        return Err(Error::Dimension(format!("expected a 2x2 covariance, got {}", joint.dim())));
    }
    let marginals = SymPsdMatrix::diag(&[joint.get(0, 0), joint.get(1, 1)])?;
    dbar_divergence(joint, &marginals)
}

/// Objective `⟨a, b_yx⟩²` and the matching mean squared error `Σ_yy (1 − ⟨a, b_yx⟩²)`.
pub fn objective_and_mse(a: &CcmVector, spec: &JointGaussianSpec) -> Result<(f64, f64)> {
    let b_yx = ccm(spec, CcmPair::Yx)?;
    if a.dim() != b_yx.dim() {
        return Err(Error::Dimension(format!("a has dimension {}, b_yx {}", a.dim(), b_yx.dim())));
    }
    Ok(objective_and_mse_with(&a.entries, &b_yx.entries, spec.sigma_yy))
}

/// [`objective_and_mse`] with a precomputed `b_yx`.
pub fn objective_and_mse_with(a: &[f64], b_yx: &[f64], sigma_yy: f64) -> (f64, f64) {
    let objective = dot(a, b_yx).powi(2);
    (objective, sigma_yy * (1.0 - objective))
}

/// Linear predictor `u = wᵀx + noise` whose canonical correlation with `x` is `a`.
///
/// `w = Σ_xx^{-1/2} a` gives `Σ_ux Σ_xx^{-1/2} = aᵀ`, and adding independent noise of
/// variance `1 − ‖a‖²` makes `Var(u) = 1`, so `b_ux = a` exactly. Without the noise
/// term the canonical correlation is `a / ‖a‖`.
pub fn synthesize_predictor(a: &CcmVector, spec: &JointGaussianSpec) -> Result<LinearPredictor> {
    if a.dim() != spec.dim_x() {
        return Err(Error::Dimension(format!("a has dimension {}, x has {}", a.dim(), spec.dim_x())));
    }
    let weights = spec.sigma_xx.inv_sqrt().matrix.mul_vec(&a.entries);
    Ok(LinearPredictor {
        weights,
        noise_variance: (1.0 - dot(&a.entries, &a.entries)).max(0.0),
    })
}
