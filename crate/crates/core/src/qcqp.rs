//! The fairness QCQP
//!
//! ```text
//! maximize ⟨a, b_yx⟩²  subject to  ⟨a, b_ex⟩² ≤ ε,  ‖a‖ ≤ 1
//! ```
//!
//! solved in closed form in the plane spanned by `b_yx` and `b_ex`, plus a
//! direction-scan oracle that handles any number of constraints.
//!
//! Angles are reduced modulo π: `a` and `−a` have the same objective and
//! constraint values, and the returned optimizer is the one with
//! `⟨a, b_yx⟩ ≥ 0`.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{unit, CcmVector, PolarVec, MAX_FEATURES};
use crate::linalg::{dot, norm};

/// Fairness QCQP with one constraint vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QcqpInstance {
    pub b_yx: CcmVector,
    pub b_ex: CcmVector,
    /// Fairness budget ε.
    pub epsilon: f64,
}

/// Which branch of the closed form produced a solution.
///
/// `Case1_*` are the plain problem, `Case2_*`/`Case3_*` the arc-constrained
/// robust problem in the wide/narrow regime, `Case4_*`/`Case5_*` the
/// three-point robust problem in the wide/narrow regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseLabel {
    Case1_1,
    Case1_2,
    Case1_3,
    Case2_1,
    Case2_2,
    Case2_3,
    Case2_4,
    Case3_1,
    Case3_2,
    Case4_1,
    Case4_2,
    Case4_3,
    Case4_4,
    Case4_5,
    Case5_1,
    Case5_2,
    Case5_3,
    /// The constraint cannot bind; the unconstrained maximizer is optimal.
    Inactive,
    /// `b_yx = 0`: every feasible point has objective zero.
    ZeroObjective,
    /// Produced by a numerical scan rather than a closed form.
    Scan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QcqpSolution {
    pub a_star: Vec<f64>,
    pub objective: f64,
    /// `⟨a*, b_ex⟩²`, or the worst case over the uncertainty set for robust solutions.
    pub constraint_value: f64,
    pub case_label: CaseLabel,
    /// Boundary angle `α` (or `ᾱ` for robust solutions) when the constraint binds.
    pub alpha: Option<f64>,
    /// `b_yx` was zero.
    #[serde(default)]
    pub zero_objective_vector: bool,
    /// The two CCMs were parallel or one was zero, so the plane was completed arbitrarily.
    #[serde(default)]
    pub degenerate_plane: bool,
}

/// Orthonormal basis of the plane spanned by two CCMs and their coordinates in it.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneProjection {
    pub basis: [Vec<f64>; 2],
    pub coords_yx: [f64; 2],
    pub coords_ex: [f64; 2],
    pub degenerate: bool,
}

impl QcqpInstance {
    pub fn new(b_yx: CcmVector, b_ex: CcmVector, epsilon: f64) -> Result<Self> {
        let inst = Self { b_yx, b_ex, epsilon };
        inst.validate()?;
        Ok(inst)
    }

    pub fn from_2d(b_yx: [f64; 2], b_ex: [f64; 2], epsilon: f64) -> Result<Self> {
        use crate::gaussian::CcmPair;
        Self::new(
            CcmVector::new(b_yx.to_vec(), CcmPair::Yx),
            CcmVector::new(b_ex.to_vec(), CcmPair::Ex),
            epsilon,
        )
    }

    /// ε = 0 is accepted and forces `a ⟂ b_ex`.
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidArgument(format!("epsilon must be finite and nonnegative, got {}", self.epsilon)));
        }
        let d = self.b_yx.dim();
        if d != self.b_ex.dim() {
            return Err(Error::Dimension(format!("b_yx has dimension {d}, b_ex {}", self.b_ex.dim())));
        }
        if !(2..=MAX_FEATURES).contains(&d) {
            return Err(Error::Dimension(format!("QCQP dimension must be in 2..={MAX_FEATURES}, got {d}")));
        }
        if self.b_yx.entries.iter().chain(&self.b_ex.entries).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("CCM entries must be finite".into()));
        }
        Ok(())
    }

    fn as_2d(&self) -> Result<([f64; 2], [f64; 2])> {
        self.validate()?;
        match (self.b_yx.entries.as_slice(), self.b_ex.entries.as_slice()) {
            (&[a, b], &[c, d]) => Ok(([a, b], [c, d])),
            _ => Err(Error::Dimension(format!("expected d = 2, got {}", self.b_yx.dim()))),
        }
    }
}

/// Gram–Schmidt basis with the first axis along `b_yx` (or `b_ex` if `b_yx = 0`).
pub fn project_to_plane(b_yx: &[f64], b_ex: &[f64]) -> Result<PlaneProjection> {
    let d = b_yx.len();
    if d != b_ex.len() || d < 2 {
        return Err(Error::Dimension(format!("need two vectors of equal dimension ≥ 2, got {d} and {}", b_ex.len())));
    }
    let ny = norm(b_yx);
    let ne = norm(b_ex);
    if ny == 0.0 && ne == 0.0 {
        return Err(Error::BothZero);
    }
    let first = if ny > 0.0 { b_yx } else { b_ex };
    let n1 = if ny > 0.0 { ny } else { ne };
    let e1: Vec<f64> = first.iter().map(|v| v / n1).collect();
    let along = dot(b_ex, &e1);
    let resid: Vec<f64> = b_ex.iter().zip(&e1).map(|(b, e)| b - along * e).collect();
    let nr = norm(&resid);
    let degenerate = ny == 0.0 || ne == 0.0 || nr <= 1e-12 * ne.max(1e-300);
    let e2 = if degenerate { orthogonal_completion(&e1) } else { resid.iter().map(|v| v / nr).collect() };
    let coords = |b: &[f64]| [dot(b, &e1), dot(b, &e2)];
    Ok(PlaneProjection {
        coords_yx: coords(b_yx),
        coords_ex: coords(b_ex),
        basis: [e1, e2],
        degenerate,
    })
}

/// A unit vector orthogonal to the unit vector `e`.
fn orthogonal_completion(e: &[f64]) -> Vec<f64> {
    let k = (0..e.len())
        .min_by(|&i, &j| e[i].abs().total_cmp(&e[j].abs()))
        .expect("nonempty");
    let mut v: Vec<f64> = e.iter().map(|x| -e[k] * x).collect();
    v[k] += 1.0;
    let n = norm(&v);
    v.iter().map(|x| x / n).collect()
}

impl PlaneProjection {
    pub fn lift(&self, c: [f64; 2]) -> Vec<f64> {
        self.basis[0].iter().zip(&self.basis[1]).map(|(x, y)| c[0] * x + c[1] * y).collect()
    }
}

/// `(θ_y − reference) mod π`, in `[0, π)`.
pub(crate) fn angle_mod_pi(theta: f64, reference: f64) -> f64 {
    let p = (theta - reference).rem_euclid(PI);
    if p >= PI {
        0.0
    } else {
        p
    }
}

/// Flips `a` into the half-plane of `b_yx` and fills in objective and constraint.
pub(crate) fn finish_2d(mut a: [f64; 2], b_yx: [f64; 2], b_ex: [f64; 2], case_label: CaseLabel, alpha: Option<f64>) -> QcqpSolution {
    if dot(&a, &b_yx) < 0.0 {
        a = [-a[0], -a[1]];
    }
    QcqpSolution {
        objective: dot(&a, &b_yx).powi(2),
        constraint_value: dot(&a, &b_ex).powi(2),
        a_star: a.to_vec(),
        case_label,
        alpha,
        zero_objective_vector: false,
        degenerate_plane: false,
    }
}

pub(crate) fn zero_objective_solution(d: usize) -> QcqpSolution {
    QcqpSolution {
        a_star: vec![0.0; d],
        objective: 0.0,
        constraint_value: 0.0,
        case_label: CaseLabel::ZeroObjective,
        alpha: None,
        zero_objective_vector: true,
        degenerate_plane: false,
    }
}

/// Closed-form solution for `d = 2`.
///
/// With `ψ = (θ_y − θ_e) mod π` and `cos α = √ε / r_e`, the optimizer is the unit
/// vector at `θ_e + α` for `ψ < α`, at `θ_y` for `α ≤ ψ < π − α`, and at
/// `θ_e + π − α` otherwise. When `√ε ≥ r_e` the constraint cannot bind.
pub fn solve_closed_form_2d(inst: &QcqpInstance) -> Result<QcqpSolution> {
    let (by, be) = inst.as_2d()?;
    let y = PolarVec::from_cartesian(by);
    let e = PolarVec::from_cartesian(be);
    if y.r == 0.0 {
        return Ok(zero_objective_solution(2));
    }
    let c = if e.r > 0.0 { inst.epsilon.sqrt() / e.r } else { f64::INFINITY };
    if c >= 1.0 {
        return Ok(finish_2d(unit(y.theta), by, be, CaseLabel::Inactive, None));
    }
    let alpha = c.acos();
    let psi = angle_mod_pi(y.theta, e.theta);
    let (label, rel) = if psi < alpha {
        (CaseLabel::Case1_1, alpha)
    } else if psi < PI - alpha {
        (CaseLabel::Case1_2, psi)
    } else {
        (CaseLabel::Case1_3, PI - alpha)
    };
    Ok(finish_2d(unit(e.theta + rel), by, be, label, Some(alpha)))
}

/// Objective predicted by the closed-form case table, from angles alone.
pub fn closed_form_objective_2d(r_y: f64, theta_y: f64, r_e: f64, theta_e: f64, epsilon: f64) -> f64 {
    let c = if r_e > 0.0 { epsilon.sqrt() / r_e } else { f64::INFINITY };
    if c >= 1.0 {
        return r_y * r_y;
    }
    let alpha = c.acos();
    let psi = angle_mod_pi(theta_y, theta_e);
    let g = if psi < alpha {
        (alpha - psi).cos()
    } else if psi < PI - alpha {
        1.0
    } else {
        (psi - (PI - alpha)).cos()
    };
    r_y * r_y * g * g
}

/// Solves any `2 ≤ d ≤ 4` instance by reduction to the plane of the two CCMs.
pub fn solve(inst: &QcqpInstance) -> Result<QcqpSolution> {
    inst.validate()?;
    if inst.b_yx.dim() == 2 {
        return solve_closed_form_2d(inst);
    }
    if norm(&inst.b_yx.entries) == 0.0 {
        return Ok(zero_objective_solution(inst.b_yx.dim()));
    }
    let plane = project_to_plane(&inst.b_yx.entries, &inst.b_ex.entries)?;
    let sol2 = solve_closed_form_2d(&QcqpInstance::from_2d(plane.coords_yx, plane.coords_ex, inst.epsilon)?)?;
    let a = plane.lift([sol2.a_star[0], sol2.a_star[1]]);
    let objective = dot(&a, &inst.b_yx.entries).powi(2);
    let constraint_value = dot(&a, &inst.b_ex.entries).powi(2);
    debug_assert!((objective - sol2.objective).abs() <= 1e-10);
    debug_assert!((constraint_value - sol2.constraint_value).abs() <= 1e-10);
    Ok(QcqpSolution {
        a_star: a,
        objective,
        constraint_value,
        degenerate_plane: plane.degenerate,
        ..sol2
    })
}

/// Largest `ρ ≤ 1` with `(ρ ⟨u, b⟩)² ≤ ε` for every constraint vector `b`.
fn feasible_radius<B: AsRef<[f64]>>(u: &[f64], constraints: &[B], sqrt_eps: f64) -> f64 {
    let mut rho: f64 = 1.0;
    for b in constraints {
        let p = dot(u, b.as_ref()).abs();
        if p * rho > sqrt_eps {
            rho = sqrt_eps / p;
        }
    }
    rho
}

/// Maximizes `⟨a, b_yx⟩²` over the unit ball subject to `⟨a, b⟩² ≤ ε` for every
/// constraint vector `b`, by scanning directions.
///
/// For each unit direction the farthest feasible point is taken, so every
/// returned point satisfies all constraints exactly. In 2-D the half circle is
/// scanned on `grid_n` points and every coarse local maximum is refined by
/// successive zoomed scans. In higher dimension a deterministic pseudo-random
/// set of directions seeds a pattern search on the sphere.
pub fn scan_max<B: AsRef<[f64]>>(b_yx: &[f64], constraints: &[B], epsilon: f64, grid_n: usize) -> Result<QcqpSolution> {
    let d = b_yx.len();
    if !(2..=MAX_FEATURES).contains(&d) {
        return Err(Error::Dimension(format!("scan dimension must be in 2..={MAX_FEATURES}, got {d}")));
    }
    if constraints.iter().any(|b| b.as_ref().len() != d) {
        return Err(Error::Dimension("constraint vector dimension mismatch".into()));
    }
    if grid_n < 8 {
        return Err(Error::InvalidArgument(format!("grid_n must be at least 8, got {grid_n}")));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be nonnegative, got {epsilon}")));
    }
    let sqrt_eps = epsilon.sqrt();
    let value = |u: &[f64]| {
        let rho = feasible_radius(u, constraints, sqrt_eps);
        (rho, (rho * dot(u, b_yx)).powi(2))
    };
    let (u, rho) = if d == 2 { scan_circle(&value, grid_n) } else { scan_sphere(&value, d, b_yx, constraints, grid_n) };
    let mut a: Vec<f64> = u.iter().map(|v| v * rho).collect();
    if dot(&a, b_yx) < 0.0 {
        a.iter_mut().for_each(|v| *v = -*v);
    }
    let constraint_value = constraints.iter().map(|b| dot(&a, b.as_ref()).powi(2)).fold(0.0, f64::max);
    Ok(QcqpSolution {
        objective: dot(&a, b_yx).powi(2),
        constraint_value,
        a_star: a,
        case_label: CaseLabel::Scan,
        alpha: None,
        zero_objective_vector: norm(b_yx) == 0.0,
        degenerate_plane: false,
    })
}

const REFINE_CANDIDATES: usize = 8;
const REFINE_POINTS: usize = 32;
const REFINE_ROUNDS: usize = 5;

fn scan_circle(value: &impl Fn(&[f64]) -> (f64, f64), grid_n: usize) -> (Vec<f64>, f64) {
    let h = PI / grid_n as f64;
    let f: Vec<f64> = (0..grid_n).map(|i| value(&unit(i as f64 * h)).1).collect();
    let mut peaks: Vec<usize> = (0..grid_n)
        .filter(|&i| {
            let prev = f[(i + grid_n - 1) % grid_n];
            let next = f[(i + 1) % grid_n];
            f[i] >= prev && f[i] >= next
        })
        .collect();
    peaks.sort_by(|&i, &j| f[j].total_cmp(&f[i]).then(i.cmp(&j)));
    peaks.truncate(REFINE_CANDIDATES);
    let mut best_theta = 0.0;
    let mut best = f64::NEG_INFINITY;
    for &i in &peaks {
        let mut center = i as f64 * h;
        let mut half = h;
        let mut local_best = f[i];
        for _ in 0..REFINE_ROUNDS {
            let step = 2.0 * half / REFINE_POINTS as f64;
            for k in 0..=REFINE_POINTS {
                let t = center - half + k as f64 * step;
                let v = value(&unit(t)).1;
                if v > local_best {
                    local_best = v;
                    center = t;
                }
            }
            half = 2.0 * step;
        }
        if local_best > best {
            best = local_best;
            best_theta = center;
        }
    }
    let u = unit(best_theta).to_vec();
    let rho = value(&u).0;
    (u, rho)
}

fn scan_sphere<B: AsRef<[f64]>>(
    value: &impl Fn(&[f64]) -> (f64, f64),
    d: usize,
    b_yx: &[f64],
    constraints: &[B],
    grid_n: usize,
) -> (Vec<f64>, f64) {
    let normalize = |v: &mut Vec<f64>| {
        let n = norm(v);
        if n > 0.0 {
            v.iter_mut().for_each(|x| *x /= n);
        }
        n > 0.0
    };
    let mut starts: Vec<Vec<f64>> = Vec::new();
    // Natural candidates: b_yx itself and b_yx with each constraint projected out.
    let mut y = b_yx.to_vec();
    if normalize(&mut y) {
        starts.push(y.clone());
    }
    for b in constraints {
        let b = b.as_ref();
        let bb = dot(b, b);
        if bb > 0.0 {
            let s = dot(b_yx, b) / bb;
            let mut v: Vec<f64> = b_yx.iter().zip(b).map(|(p, q)| p - s * q).collect();
            if normalize(&mut v) {
                starts.push(v);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5ca1ab1e);
    for _ in 0..(4 * grid_n) {
        let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        if normalize(&mut v) {
            starts.push(v);
        }
    }
    let mut scored: Vec<(f64, usize)> = starts.iter().enumerate().map(|(i, u)| (value(u).1, i)).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut best_u = starts[scored[0].1].clone();
    let mut best = scored[0].0;
    for &(v0, i) in scored.iter().take(REFINE_CANDIDATES) {
        let mut u = starts[i].clone();
        let mut fu = v0;
        let mut step = 0.05;
        while step > 1e-10 {
            let mut improved = false;
            for k in 0..d {
                for sign in [1.0, -1.0] {
                    let mut cand = u.clone();
                    cand[k] += sign * step;
                    if !normalize(&mut cand) {
                        continue;
                    }
                    let fc = value(&cand).1;
                    if fc > fu {
                        u = cand;
                        fu = fc;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        if fu > best {
            best = fu;
            best_u = u;
        }
    }
    let rho = value(&best_u).0;
    (best_u, rho)
}

/// Direction-scan oracle for a single-constraint 2-D instance.
pub fn brute_force_oracle(inst: &QcqpInstance, grid_n: usize) -> Result<QcqpSolution> {
    let (by, be) = inst.as_2d()?;
    if grid_n < 1000 {
        return Err(Error::InvalidArgument(format!("grid_n must be at least 1000, got {grid_n}")));
    }
    scan_max(&by, &[be], inst.epsilon, grid_n)
}
