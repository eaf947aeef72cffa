//! Small symmetric-matrix numerics for covariance blocks.
//!
//! Everything here works on matrices of dimension at most [`MAX_DIM`], which
//! is enough for the joint covariance of up to four features plus a target and
//! a sensitive attribute. Eigendecompositions use cyclic Jacobi rotations,
//! which are exact to rounding for matrices this small.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported matrix dimension.
pub const MAX_DIM: usize = 6;

/// Maximum tolerated `|m[i][j] - m[j][i]|`.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Eigenvalues at or above `-PSD_TOL` are accepted and clamped to zero.
pub const PSD_TOL: f64 = 1e-10;

/// Eigenvalues below this are treated as zero by pseudo-inverses.
pub const RANK_TOL: f64 = 1e-10;

type Raw = [[f64; MAX_DIM]; MAX_DIM];

/// A symmetric positive semidefinite matrix of dimension `1..=MAX_DIM`.
///
/// Serialized as nested row-major arrays, e.g. `[[1.0, 0.1], [0.1, 1.0]]`.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SymPsdMatrix {
    dim: usize,
    a: Raw,
}

impl std::fmt::Debug for SymPsdMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.to_rows()).finish()
    }
}

/// Eigendecomposition of a symmetric matrix, eigenvalues in ascending order.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    /// `vectors[k]` is the unit eigenvector for `values[k]`.
    pub vectors: Vec<Vec<f64>>,
}

/// Pseudo-inverse square root together with its rank diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct InvSqrt {
    pub matrix: SymPsdMatrix,
    pub rank: usize,
    pub rank_deficient: bool,
}

impl SymPsdMatrix {
    /// Validates symmetry and positive semidefiniteness.
    pub fn new(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        check_dim(dim)?;
        let mut a = [[0.0; MAX_DIM]; MAX_DIM];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::Dimension(format!(
                    "row {i} has {} entries, expected {dim}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::InvalidArgument(format!("entry ({i},{j}) is not finite")));
                }
                a[i][j] = v;
            }
        }
        Self::from_raw(dim, a)
    }

    /// Builds a matrix from a row-major slice of `dim * dim` entries.
    pub fn from_row_major(dim: usize, entries: &[f64]) -> Result<Self> {
        check_dim(dim)?;
        if entries.len() != dim * dim {
            return Err(Error::Dimension(format!(
                "expected {} entries, got {}",
                dim * dim,
                entries.len()
            )));
        }
        let rows: Vec<Vec<f64>> = entries.chunks(dim).map(<[f64]>::to_vec).collect();
        Self::new(&rows)
    }

    fn from_raw(dim: usize, a: Raw) -> Result<Self> {
        let mut worst: f64 = 0.0;
        for i in 0..dim {
            for j in 0..i {
                worst = worst.max((a[i][j] - a[j][i]).abs());
            }
        }
        if worst > SYMMETRY_TOL {
            return Err(Error::NonSymmetric(worst));
        }
        let m = Self { dim, a };
        let min_eig = m.eigen().values[0];
        if min_eig < -PSD_TOL {
            return Err(Error::NotPsd(min_eig));
        }
        Ok(m)
    }

    /// Wraps a matrix known to be symmetric PSD up to rounding, symmetrizing it.
    pub(crate) fn from_raw_trusted(dim: usize, mut a: Raw) -> Self {
        for i in 0..dim {
            for j in 0..i {
                let v = 0.5 * (a[i][j] + a[j][i]);
                a[i][j] = v;
                a[j][i] = v;
            }
        }
        Self { dim, a }
    }

    pub fn identity(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        let mut a = [[0.0; MAX_DIM]; MAX_DIM];
        for (i, row) in a.iter_mut().enumerate().take(dim) {
            row[i] = 1.0;
        }
        Ok(Self { dim, a })
    }

    /// Diagonal matrix; every entry must be nonnegative.
    pub fn diag(values: &[f64]) -> Result<Self> {
        check_dim(values.len())?;
        let mut a = [[0.0; MAX_DIM]; MAX_DIM];
        for (i, &v) in values.iter().enumerate() {
            a[i][i] = v;
        }
        Self::from_raw(values.len(), a)
    }

    pub fn scalar(v: f64) -> Result<Self> {
        Self::diag(&[v])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.dim && j < self.dim, "index out of range");
        self.a[i][j]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|i| self.a[i][..self.dim].to_vec()).collect()
    }

    /// Principal submatrix on the given indices, in the given order.
    pub fn principal_block(&self, idx: &[usize]) -> Result<Self> {
        check_dim(idx.len())?;
        let mut a = [[0.0; MAX_DIM]; MAX_DIM];
        for (r, &i) in idx.iter().enumerate() {
            for (c, &j) in idx.iter().enumerate() {
                if i >= self.dim || j >= self.dim {
                    return Err(Error::Dimension(format!("index {} out of range", i.max(j))));
                }
                a[r][c] = self.a[i][j];
            }
        }
        Ok(Self { dim: idx.len(), a })
    }

    pub fn eigen(&self) -> SymEigen {
        jacobi_eigen(self.dim, &self.a)
    }

    /// Largest eigenvalue, which for a PSD matrix is its spectral norm.
    pub fn spectral_norm(&self) -> f64 {
        self.eigen().values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.dim, "vector length must match matrix dimension");
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.a[i][j] * v[j]).sum())
            .collect()
    }

    /// Pseudo-inverse square root; see [`sym_psd_inv_sqrt`].
    pub fn inv_sqrt(&self) -> InvSqrt {
        self.spectral_map(|l| if l > RANK_TOL { 1.0 / l.sqrt() } else { 0.0 })
    }

    /// Symmetric square root with negative rounding noise clamped to zero.
    pub fn sqrt(&self) -> SymPsdMatrix {
        self.spectral_map(|l| l.max(0.0).sqrt()).matrix
    }

    fn spectral_map(&self, f: impl Fn(f64) -> f64) -> InvSqrt {
        let eig = self.eigen();
        let n = self.dim;
        let mut out = [[0.0; MAX_DIM]; MAX_DIM];
        let mut rank = 0;
        for (k, &l) in eig.values.iter().enumerate() {
            if l > RANK_TOL {
                rank += 1;
            }
            let g = f(l);
            if g == 0.0 {
                continue;
            }
            let v = &eig.vectors[k];
            for i in 0..n {
                for j in 0..n {
                    out[i][j] += g * v[i] * v[j];
                }
            }
        }
        InvSqrt {
            matrix: Self::from_raw_trusted(n, out),
            rank,
            rank_deficient: rank < n,
        }
    }

    /// Lower-triangular Cholesky factor, or `None` if a pivot is not positive.
    pub fn cholesky(&self) -> Option<Vec<Vec<f64>>> {
        let n = self.dim;
        let mut l = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
                if i == j {
                    let d = self.a[i][i] - s;
                    if d <= 0.0 {
                        return None;
                    }
                    l[i][i] = d.sqrt();
                } else {
                    l[i][j] = (self.a[i][j] - s) / l[j][j];
                }
            }
        }
        Some(l)
    }

    /// A factor `F` with `F Fᵀ = self`: Cholesky when it succeeds, otherwise
    /// the symmetric square root (which tolerates singular matrices).
    pub fn factor(&self) -> Vec<Vec<f64>> {
        self.cholesky().unwrap_or_else(|| self.sqrt().to_rows())
    }

    pub(crate) fn raw(&self) -> &Raw {
        &self.a
    }
}

impl TryFrom<Vec<Vec<f64>>> for SymPsdMatrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(&rows)
    }
}

impl From<SymPsdMatrix> for Vec<Vec<f64>> {
    fn from(m: SymPsdMatrix) -> Self {
        m.to_rows()
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 || dim > MAX_DIM {
        return Err(Error::Dimension(format!("dimension {dim} outside 1..={MAX_DIM}")));
    }
    Ok(())
}

/// Pseudo-inverse square root via symmetric eigendecomposition.
///
/// Eigenvalues at or below [`RANK_TOL`] map to zero and set `rank_deficient`.
/// For a full-rank input the result `R` satisfies `R m R = I`.
pub fn sym_psd_inv_sqrt(m: &SymPsdMatrix) -> InvSqrt {
    m.inv_sqrt()
}

/// Cyclic Jacobi eigendecomposition of the leading `n x n` block of `a`.
pub(crate) fn jacobi_eigen(n: usize, a: &Raw) -> SymEigen {
    let mut m = *a;
    let mut v = [[0.0; MAX_DIM]; MAX_DIM];
    for (i, row) in v.iter_mut().enumerate().take(n) {
        row[i] = 1.0;
    }
    let scale: f64 = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| m[i][j] * m[i][j])
        .sum::<f64>()
        .sqrt();
    for _sweep in 0..64 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        if off.sqrt() <= 1e-300_f64.max(scale * 1e-17) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut().take(n) {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i][i].total_cmp(&m[j][j]));
    SymEigen {
        values: order.iter().map(|&k| m[k][k]).collect(),
        vectors: order
            .iter()
            .map(|&k| (0..n).map(|i| v[i][k]).collect())
            .collect(),
    }
}

/// `x · y` for equal-length slices.
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

pub(crate) fn raw_mul(n: usize, x: &Raw, y: &Raw) -> Raw {
    let mut out = [[0.0; MAX_DIM]; MAX_DIM];
    for i in 0..n {
        for j in 0..n {
            out[i][j] = (0..n).map(|k| x[i][k] * y[k][j]).sum();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    fn rmr_is_identity(m: &SymPsdMatrix, tol: f64) {
        let r = m.inv_sqrt().matrix;
        let p = raw_mul(m.dim(), &raw_mul(m.dim(), r.raw(), m.raw()), r.raw());
        for i in 0..m.dim() {
            for j in 0..m.dim() {
                assert_close(p[i][j], if i == j { 1.0 } else { 0.0 }, tol);
            }
        }
    }

    #[test]
    fn inv_sqrt_of_identity_and_diagonal() {
        let i2 = SymPsdMatrix::identity(2).unwrap();
        assert_eq!(i2.inv_sqrt().matrix, i2);
        let d = SymPsdMatrix::diag(&[4.0, 9.0]).unwrap().inv_sqrt().matrix;
        assert_close(d.get(0, 0), 0.5, 1e-15);
        assert_close(d.get(1, 1), 1.0 / 3.0, 1e-15);
        assert_eq!(d.get(0, 1), 0.0);
    }

    #[test]
    fn inv_sqrt_reconstructs_identity() {
        let m = SymPsdMatrix::new(&[vec![1.0, 0.1], vec![0.1, 1.0]]).unwrap();
        rmr_is_identity(&m, 1e-9);
        // Eigenvalues 0.9 and 1.1, eigenvectors (1, ±1)/√2.
        let r = m.inv_sqrt().matrix;
        let a = 0.5 * (1.0 / 1.1_f64.sqrt() + 1.0 / 0.9_f64.sqrt());
        let b = 0.5 * (1.0 / 1.1_f64.sqrt() - 1.0 / 0.9_f64.sqrt());
        assert_close(r.get(0, 0), a, 1e-14);
        assert_close(r.get(0, 1), b, 1e-14);
    }

    #[test]
    fn ill_conditioned_inverse_root() {
        let m = SymPsdMatrix::new(&[
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1e-6, 0.0],
            vec![0.0, 0.0, 3.0],
        ])
        .unwrap();
        rmr_is_identity(&m, 1e-9);
    }

    #[test]
    fn rank_deficiency_is_flagged() {
        let m = SymPsdMatrix::new(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let r = m.inv_sqrt();
        assert!(r.rank_deficient);
        assert_eq!(r.rank, 1);
    }

    #[test]
    fn rejects_asymmetric_and_indefinite() {
        let e = SymPsdMatrix::new(&[vec![1.0, 0.2], vec![0.1, 1.0]]).unwrap_err();
        assert!(matches!(e, Error::NonSymmetric(_)));
        let e = SymPsdMatrix::new(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap_err();
        assert!(matches!(e, Error::NotPsd(_)));
        // Tiny negative rounding is accepted.
        SymPsdMatrix::new(&[vec![1.0, 1.0], vec![1.0, 1.0 - 1e-12]]).unwrap();
    }

    #[test]
    fn jacobi_matches_known_spectrum() {
        let m = SymPsdMatrix::new(&[
            vec![2.0, -1.0, 0.0],
            vec![-1.0, 2.0, -1.0],
            vec![0.0, -1.0, 2.0],
        ])
        .unwrap();
        let e = m.eigen();
        let s2 = 2.0_f64.sqrt();
        for (got, want) in e.values.iter().zip([2.0 - s2, 2.0, 2.0 + s2]) {
            assert_close(*got, want, 1e-14);
        }
        for (k, v) in e.vectors.iter().enumerate() {
            let mv = m.mul_vec(v);
            for i in 0..3 {
                assert_close(mv[i], e.values[k] * v[i], 1e-13);
            }
        }
    }

    #[test]
    fn cholesky_and_factor() {
        let m = SymPsdMatrix::new(&[vec![4.0, 2.0], vec![2.0, 3.0]]).unwrap();
        let l = m.cholesky().unwrap();
        assert_close(l[0][0], 2.0, 1e-15);
        assert_close(l[1][0], 1.0, 1e-15);
        assert_close(l[1][1], 2.0_f64.sqrt(), 1e-15);
        let singular = SymPsdMatrix::new(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let f = singular.factor();
        for i in 0..2 {
            for j in 0..2 {
                let s: f64 = (0..2).map(|k| f[i][k] * f[j][k]).sum();
                assert_close(s, 1.0, 1e-12);
            }
        }
    }

    #[test]
    fn serde_round_trip() {
        let m = SymPsdMatrix::new(&[vec![1.0, 0.1], vec![0.1, 1.0]]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, "[[1.0,0.1],[0.1,1.0]]");
        let back: SymPsdMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<SymPsdMatrix>("[[1.0,0.5],[0.4,1.0]]").is_err());
    }
}
