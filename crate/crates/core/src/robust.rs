//! Robust fairness QCQPs over annular-sector uncertainty sets.
//!
//! The estimate `b̂_ex = (r̂, θ̂)` is surrounded by the sector
//! `{(r, θ) : |r − r̂| ≤ Δ, |θ − θ̂| ≤ φ}` and the fairness constraint is
//! imposed for every point in it. Only the outer arc (radius `R = r̂ + Δ`)
//! can bind, so the problem reduces to a one-parameter family of
//! constraints. A conservative variant replaces the arc by three points
//! whose constraint lines enclose it.
//!
//! Throughout, angles are measured from `θ̂` and reduced modulo π, and
//! `c̄ = √ε / R = cos ᾱ`. The regime is wide when `c̄ ≥ sin φ`.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{unit, wrap_angle, CcmVector, JointGaussianSpec, PolarVec};
use crate::linalg::{dot, norm};
use crate::qcqp::{angle_mod_pi, finish_2d, scan_max, solve_closed_form_2d, zero_objective_solution, CaseLabel, QcqpInstance, QcqpSolution};

/// Annular sector `A(Δ, φ)` around `(r̂, θ̂)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnularSector {
    pub r_hat: f64,
    pub theta_hat: f64,
    pub delta: f64,
    pub phi: f64,
}

/// A sector built from a ball, with the conditions met on the way.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorFromBall {
    pub sector: AnnularSector,
    /// `τ > ‖b̂‖`: the half-angle was clamped to π/2.
    pub phi_clamped: bool,
    /// `b̂ = 0`: the sector is a half-disk of radius τ, which covers the ball up to sign.
    pub zero_estimate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Wide,
    Narrow,
}

/// Three constraint points whose constraints jointly imply the arc constraints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreePointSet {
    pub b1: PolarVec,
    pub b2: PolarVec,
    pub b3: PolarVec,
}

/// Parameters of the sample-size-driven sector radius `τ(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyConfig {
    /// Failure probability δ.
    pub delta_conf: f64,
    /// Multiplicative constant `c` of the bound.
    pub constant_c: f64,
    /// Number of rows with an observed sensitive attribute.
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GapCategory {
    AnyUncertaintyHurts,
    SomeUncertaintyOk,
    FreeFairness,
}

/// Angular band of `θ_y` in the gap taxonomy. The `*2` variants belong to the
/// narrow regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GapCase {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
    H,
    A2,
    B2,
    C2,
    F2,
    G2,
    H2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    /// Objective with the true `b_ex` known.
    pub psi1: f64,
    /// Objective of the three-point robust problem.
    pub psi2: f64,
    pub gap: f64,
    pub category: GapCategory,
    /// Band of `θ_y` when the taxonomy applies (see [`gap_psi`]).
    pub case_label: Option<GapCase>,
    /// Gap evaluated from the band's trigonometric formula.
    pub formula_gap: Option<f64>,
    /// The true `b_ex` lies outside the sector.
    pub outside_sector: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub objectives: Vec<f64>,
    pub true_objective: f64,
    /// Every step is non-decreasing within 1e-12.
    pub non_decreasing: bool,
    /// Every pair of equal consecutive objectives (within 1e-9) equals the true objective (within 1e-9).
    pub plateaus_at_truth: bool,
    /// First index from which every objective equals the true objective.
    pub free_from: Option<usize>,
}

impl AnnularSector {
    pub fn new(r_hat: f64, theta_hat: f64, delta: f64, phi: f64) -> Result<Self> {
        if !(r_hat >= 0.0 && r_hat.is_finite()) || !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::InvalidArgument(format!("r_hat and delta must be finite and nonnegative, got {r_hat}, {delta}")));
        }
        if !(0.0..=FRAC_PI_2).contains(&phi) {
            return Err(Error::InvalidArgument(format!("phi must lie in [0, pi/2], got {phi}")));
        }
        Ok(Self { r_hat, theta_hat: wrap_angle(theta_hat), delta, phi })
    }

    pub fn outer_radius(&self) -> f64 {
        self.r_hat + self.delta
    }

    /// `max(0, r̂ − Δ)`.
    pub fn inner_radius(&self) -> f64 {
        (self.r_hat - self.delta).max(0.0)
    }

    /// `Δ > r̂`, so the inner radius was clamped to zero.
    pub fn inner_clamped(&self) -> bool {
        self.delta > self.r_hat
    }

    pub fn center(&self) -> [f64; 2] {
        PolarVec::new(self.r_hat, self.theta_hat).to_cartesian()
    }

    /// Membership with slack `tol` on radius and angle.
    pub fn contains(&self, b: [f64; 2], tol: f64) -> bool {
        let p = PolarVec::from_cartesian(b);
        if p.r < self.inner_radius() - tol || p.r > self.outer_radius() + tol {
            return false;
        }
        p.r <= tol || angular_distance(p.theta, self.theta_hat) <= self.phi + tol
    }

    /// Membership of `b` or `−b`; constraints `⟨a, b⟩² ≤ ε` cannot tell them apart.
    pub fn contains_up_to_sign(&self, b: [f64; 2], tol: f64) -> bool {
        self.contains(b, tol) || self.contains([-b[0], -b[1]], tol)
    }

    /// Strict subset test used for nested sequences.
    fn nested_in(&self, outer: &AnnularSector) -> bool {
        let tol = 1e-12;
        let same = self == outer;
        !same
            && self.inner_radius() >= outer.inner_radius() - tol
            && self.outer_radius() <= outer.outer_radius() + tol
            && angular_distance(self.theta_hat, outer.theta_hat) + self.phi <= outer.phi + tol
    }
}

/// `|a − b|` on the circle, in `[0, π]`.
fn angular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// Smallest sector containing the ball `B(b̂, τ)`: `Δ = τ`, `φ = asin(τ / ‖b̂‖)`.
pub fn sector_from_ball(b_hat_ex: &CcmVector, tau: f64) -> Result<SectorFromBall> {
    let p = b_hat_ex.polar()?;
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!("tau must be finite and nonnegative, got {tau}")));
    }
    if p.r == 0.0 {
        let phi = if tau > 0.0 { FRAC_PI_2 } else { 0.0 };
        return Ok(SectorFromBall {
            sector: AnnularSector::new(0.0, 0.0, tau, phi)?,
            phi_clamped: tau > 0.0,
            zero_estimate: tau > 0.0,
        });
    }
    let ratio = tau / p.r;
    let (phi, phi_clamped) = if ratio >= 1.0 { (FRAC_PI_2, ratio > 1.0) } else { (ratio.asin(), false) };
    Ok(SectorFromBall {
        sector: AnnularSector::new(p.r, p.theta, tau, phi)?,
        phi_clamped,
        zero_estimate: false,
    })
}

/// `b1 = (R / cos φ, θ̂)`, `b2 = (R, θ̂ + φ)`, `b3 = (R, θ̂ − φ)` with `R = r̂ + Δ`.
pub fn three_points(s: &AnnularSector) -> Result<ThreePointSet> {
    if s.phi >= FRAC_PI_2 {
        return Err(Error::PhiTooLarge(s.phi));
    }
    let r = s.outer_radius();
    Ok(ThreePointSet {
        b1: PolarVec::new(r / s.phi.cos(), s.theta_hat),
        b2: PolarVec::new(r, s.theta_hat + s.phi),
        b3: PolarVec::new(r, s.theta_hat - s.phi),
    })
}

/// Wide iff `√ε ≥ (r̂ + Δ) sin φ`.
pub fn regime(s: &AnnularSector, epsilon: f64) -> Regime {
    if epsilon.sqrt() >= s.outer_radius() * s.phi.sin() {
        Regime::Wide
    } else {
        Regime::Narrow
    }
}

/// `max over b in s of ⟨a, b⟩²`, attained on the outer arc.
pub fn sector_worst_case(a: [f64; 2], s: &AnnularSector) -> f64 {
    let p = PolarVec::from_cartesian(a);
    if p.r == 0.0 {
        return 0.0;
    }
    let x = angle_mod_pi(p.theta, s.theta_hat);
    let gap = if x <= s.phi || x >= PI - s.phi { 0.0 } else { (x - s.phi).min(PI - s.phi - x) };
    (p.r * s.outer_radius() * gap.cos()).powi(2)
}

/// Shared preprocessing; `Err` carries a trivial problem that is already solved.
struct RobustSetup {
    by: [f64; 2],
    psi: f64,
    cbar: f64,
    abar: f64,
}

fn robust_setup(b_yx: PolarVec, s: &AnnularSector, epsilon: f64) -> Result<std::result::Result<RobustSetup, QcqpSolution>> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!("epsilon must be finite and nonnegative, got {epsilon}")));
    }
    let y = PolarVec::new(b_yx.r, b_yx.theta);
    if y.r == 0.0 {
        return Ok(Err(zero_objective_solution(2)));
    }
    let by = y.to_cartesian();
    let big_r = s.outer_radius();
    let cbar = if big_r > 0.0 { epsilon.sqrt() / big_r } else { f64::INFINITY };
    if cbar >= 1.0 {
        let mut sol = finish_2d(unit(y.theta), by, [0.0, 0.0], CaseLabel::Inactive, None);
        sol.constraint_value = sector_worst_case(unit(y.theta), s);
        return Ok(Err(sol));
    }
    Ok(Ok(RobustSetup { by, psi: angle_mod_pi(y.theta, s.theta_hat), cbar, abar: cbar.acos() }))
}

fn robust_finish(st: &RobustSetup, s: &AnnularSector, radius: f64, rel: f64, label: CaseLabel) -> QcqpSolution {
    let a = unit(s.theta_hat + rel);
    let mut sol = finish_2d([radius * a[0], radius * a[1]], st.by, [0.0, 0.0], label, Some(st.abar));
    sol.constraint_value = sector_worst_case([sol.a_star[0], sol.a_star[1]], s);
    sol
}

/// Robust QCQP with the constraint imposed on the whole sector (equivalently its outer arc).
///
/// Optimal points lie either on the unit circle beyond the arc's constraint
/// lines, or on the lens cut out by the arc itself: `c̄ · A(θ_y)` for `θ_y`
/// inside the sector and, in the narrow regime, the corner `(c̄ / sin φ) · A(θ̂ + π/2)`.
pub fn solve_robust_infinite(b_yx: PolarVec, s: &AnnularSector, epsilon: f64) -> Result<QcqpSolution> {
    let st = match robust_setup(b_yx, s, epsilon)? {
        Ok(st) => st,
        Err(done) => return Ok(done),
    };
    let (phi, abar, cbar, psi) = (s.phi, st.abar, st.cbar, st.psi);
    let (label, radius, rel) = match regime(s, epsilon) {
        Regime::Wide => {
            if psi < phi || psi >= PI - phi {
                (CaseLabel::Case2_1, cbar, psi)
            } else if psi < phi + abar {
                (CaseLabel::Case2_2, 1.0, phi + abar)
            } else if psi < PI - phi - abar {
                (CaseLabel::Case2_3, 1.0, psi)
            } else {
                (CaseLabel::Case2_4, 1.0, PI - phi - abar)
            }
        }
        Regime::Narrow => {
            if psi < phi || psi >= PI - phi {
                (CaseLabel::Case3_1, cbar, psi)
            } else {
                (CaseLabel::Case3_2, cbar / phi.sin(), FRAC_PI_2)
            }
        }
    };
    Ok(robust_finish(&st, s, radius, rel, label))
}

/// Conservative robust QCQP with the three constraints of [`three_points`].
///
/// At `φ = π/2` the point `b1` moves to infinity; the limit problem forces
/// `a ⟂ b̂` with `|a| ≤ c̄`, which the same case table produces, so that
/// value is accepted here even though [`three_points`] rejects it.
pub fn solve_robust_three(b_yx: PolarVec, s: &AnnularSector, epsilon: f64) -> Result<QcqpSolution> {
    let st = match robust_setup(b_yx, s, epsilon)? {
        Ok(st) => st,
        Err(done) => return Ok(done),
    };
    let (phi, abar, cbar, psi) = (s.phi, st.abar, st.cbar, st.psi);
    let (label, radius, rel) = match regime(s, epsilon) {
        Regime::Wide => {
            if psi < phi {
                (CaseLabel::Case4_1, cbar, phi)
            } else if psi < phi + abar {
                (CaseLabel::Case4_2, 1.0, phi + abar)
            } else if psi < PI - phi - abar {
                (CaseLabel::Case4_3, 1.0, psi)
            } else if psi < PI - phi {
                (CaseLabel::Case4_4, 1.0, PI - phi - abar)
            } else {
                (CaseLabel::Case4_5, cbar, PI - phi)
            }
        }
        Regime::Narrow => {
            if psi < phi {
                (CaseLabel::Case5_1, cbar, phi)
            } else if psi < PI - phi {
                (CaseLabel::Case5_2, cbar / phi.sin(), FRAC_PI_2)
            } else {
                (CaseLabel::Case5_3, cbar, PI - phi)
            }
        }
    };
    Ok(robust_finish(&st, s, radius, rel, label))
}

/// `n_arc` evenly spaced points on the arc of radius `radius`.
fn arc_points(s: &AnnularSector, radius: f64, n_arc: usize) -> Vec<[f64; 2]> {
    (0..n_arc)
        .map(|k| {
            let t = if n_arc == 1 { 0.0 } else { -s.phi + 2.0 * s.phi * k as f64 / (n_arc - 1) as f64 };
            let u = unit(s.theta_hat + t);
            [radius * u[0], radius * u[1]]
        })
        .collect()
}

/// Direction-scan solution with the outer arc discretized into `n_arc` constraints.
pub fn sampled_constraint_oracle(b_yx: PolarVec, s: &AnnularSector, epsilon: f64, n_arc: usize, grid_n: usize) -> Result<QcqpSolution> {
    if n_arc < 100 {
        return Err(Error::InvalidArgument(format!("n_arc must be at least 100, got {n_arc}")));
    }
    let pts = arc_points(s, s.outer_radius(), n_arc);
    scan_max(&b_yx.to_cartesian(), &pts, epsilon, grid_n)
}

/// Like [`sampled_constraint_oracle`] but with constraints on `n_radial` arcs
/// spanning the full radial extent of the sector.
pub fn sampled_sector_oracle(b_yx: PolarVec, s: &AnnularSector, epsilon: f64, n_arc: usize, n_radial: usize, grid_n: usize) -> Result<QcqpSolution> {
    if n_arc < 100 || n_radial < 2 {
        return Err(Error::InvalidArgument("need n_arc ≥ 100 and n_radial ≥ 2".into()));
    }
    let (lo, hi) = (s.inner_radius(), s.outer_radius());
    let pts: Vec<[f64; 2]> = (0..n_radial)
        .flat_map(|j| arc_points(s, lo + (hi - lo) * j as f64 / (n_radial - 1) as f64, n_arc))
        .collect();
    scan_max(&b_yx.to_cartesian(), &pts, epsilon, grid_n)
}

/// Area-uniform random point of the sector.
pub fn sample_sector_point<R: Rng + ?Sized>(s: &AnnularSector, rng: &mut R) -> [f64; 2] {
    let (lo, hi) = (s.inner_radius(), s.outer_radius());
    let r = (lo * lo + (hi * hi - lo * lo) * rng.random::<f64>()).sqrt();
    let t = s.theta_hat + s.phi * (2.0 * rng.random::<f64>() - 1.0);
    PolarVec::new(r, t).to_cartesian()
}

impl UncertaintyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_conf > 0.0 && self.delta_conf < 1.0) {
            return Err(Error::InvalidArgument(format!("delta_conf must lie in (0, 1), got {}", self.delta_conf)));
        }
        if !(self.constant_c > 0.0 && self.constant_c.is_finite()) {
            return Err(Error::InvalidArgument(format!("constant_c must be positive, got {}", self.constant_c)));
        }
        if self.n == 0 {
            return Err(Error::InvalidArgument("n must be at least 1".into()));
        }
        Ok(())
    }
}

/// `τ(n) = ‖Σ_xx^{-1/2}‖₂ · c · √σ_e · max_i σ_i / (n √d) · ln(4/δ)`,
/// with `σ_e² = Σ_ee` and `σ_i² = Σ_xx[i, i]`.
///
/// The logarithmic factor is `ln(4/δ)` for every `d`; a union bound over `d`
/// coordinates would give `ln(2d/δ)`, which coincides at `d = 2`.
pub fn tau_of_n(cfg: &UncertaintyConfig, spec: &JointGaussianSpec) -> Result<f64> {
    cfg.validate()?;
    let d = spec.dim_x();
    let whiten = spec.sigma_xx.inv_sqrt().matrix.spectral_norm();
    let sigma_e = spec.sigma_ee.sqrt();
    let max_sigma = (0..d).map(|i| spec.sigma_xx.get(i, i).sqrt()).fold(0.0, f64::max);
    Ok(whiten * cfg.constant_c * sigma_e.sqrt() * max_sigma / (cfg.n as f64 * (d as f64).sqrt()) * (4.0 / cfg.delta_conf).ln())
}

/// Cost of robustness: true-knowledge optimum minus three-point robust optimum.
///
/// The band taxonomy assumes the true `b_ex = (r_e, θ_e)` lies in the sector
/// with `θ_e ≥ θ̂` (other orientations are reflected about `θ̂`), that the
/// true constraint binds (`r_e > √ε`), and that the bands are ordered, which
/// needs `φ + (θ_e − θ̂) ≤ α`. Outside these conditions `case_label` and
/// `formula_gap` are `None` and the category is read off the gap.
pub fn gap_psi(b_yx: PolarVec, true_b_ex: PolarVec, s: &AnnularSector, epsilon: f64) -> Result<GapReport> {
    let e_cart = true_b_ex.to_cartesian();
    let inst = QcqpInstance::from_2d(b_yx.to_cartesian(), e_cart, epsilon)?;
    let psi1 = solve_closed_form_2d(&inst)?.objective;
    let psi2 = solve_robust_three(b_yx, s, epsilon)?.objective;
    let gap = psi1 - psi2;
    let outside_sector = !s.contains_up_to_sign(e_cart, 1e-12);
    let band = if outside_sector { None } else { gap_band(b_yx, true_b_ex, s, epsilon) };
    let category = match band.map(|(c, _)| c) {
        Some(GapCase::D) => GapCategory::FreeFairness,
        Some(GapCase::C | GapCase::E | GapCase::C2) => GapCategory::SomeUncertaintyOk,
        Some(_) => GapCategory::AnyUncertaintyHurts,
        None if gap.abs() <= 1e-12 => GapCategory::FreeFairness,
        None => GapCategory::AnyUncertaintyHurts,
    };
    Ok(GapReport {
        psi1,
        psi2,
        gap,
        category,
        case_label: band.map(|(c, _)| c),
        formula_gap: band.map(|(_, g)| g),
        outside_sector,
    })
}

fn gap_band(b_yx: PolarVec, true_b_ex: PolarVec, s: &AnnularSector, epsilon: f64) -> Option<(GapCase, f64)> {
    let big_r = s.outer_radius();
    let sqrt_eps = epsilon.sqrt();
    if b_yx.r == 0.0 || true_b_ex.r <= sqrt_eps || big_r <= sqrt_eps {
        return None;
    }
    // Angles relative to θ̂; the true direction reduced into (−π/2, π/2].
    let mut e = angle_mod_pi(true_b_ex.theta, s.theta_hat);
    if e > FRAC_PI_2 {
        e -= PI;
    }
    let mut y = b_yx.theta - s.theta_hat;
    if e < 0.0 {
        e = -e;
        y = -y;
    }
    let phi = s.phi;
    let alpha = (sqrt_eps / true_b_ex.r).acos();
    let cbar = sqrt_eps / big_r;
    let abar = cbar.acos();
    if phi + e > alpha {
        return None;
    }
    // θ_y as a representative in [e, e + π).
    let t = e + angle_mod_pi(y, e);
    let c2 = |x: f64| x.cos().powi(2);
    let ry2 = b_yx.r * b_yx.r;
    let (case, g) = match regime(s, epsilon) {
        Regime::Wide => {
            if t < phi {
                (GapCase::A, c2(alpha + e - t) - cbar * cbar * c2(phi - t))
            } else if t < alpha + e {
                (GapCase::B, c2(alpha + e - t) - c2(abar + phi - t))
            } else if t < phi + abar {
                (GapCase::C, 1.0 - c2(abar + phi - t))
            } else if t < PI - phi - abar {
                (GapCase::D, 0.0)
            } else if t < PI - alpha + e {
                (GapCase::E, 1.0 - c2(t + abar + phi))
            } else if t < PI - phi {
                (GapCase::F, c2(t + alpha - e) - c2(t + abar + phi))
            } else if t < PI {
                (GapCase::G, c2(t + alpha - e) - cbar * cbar * c2(t + phi))
            } else {
                (GapCase::H, c2(t + alpha - e) - cbar * cbar * c2(t - phi))
            }
        }
        Regime::Narrow => {
            let corner = |t: f64| cbar * cbar * t.sin().powi(2) / phi.sin().powi(2);
            if t < phi {
                (GapCase::A2, c2(alpha + e - t) - cbar * cbar * c2(phi - t))
            } else if t < alpha + e {
                (GapCase::B2, c2(alpha + e - t) - corner(t))
            } else if t < PI - alpha + e {
                (GapCase::C2, 1.0 - corner(t))
            } else if t < PI - phi {
                (GapCase::F2, c2(t + alpha - e) - corner(t))
            } else if t < PI {
                (GapCase::G2, c2(t + alpha - e) - cbar * cbar * c2(t + phi))
            } else {
                (GapCase::H2, c2(t + alpha - e) - cbar * cbar * c2(t - phi))
            }
        }
    };
    Some((case, ry2 * g))
}

/// Robust objectives along a strictly nested sequence of sectors.
pub fn monotonicity_check(sectors: &[AnnularSector], b_yx: PolarVec, true_b_ex: PolarVec, epsilon: f64) -> Result<MonotonicityReport> {
    for k in 1..sectors.len() {
        if !sectors[k].nested_in(&sectors[k - 1]) {
            return Err(Error::NotNested(k - 1, k));
        }
    }
    let objectives = sectors
        .iter()
        .map(|s| solve_robust_three(b_yx, s, epsilon).map(|sol| sol.objective))
        .collect::<Result<Vec<f64>>>()?;
    let true_objective = solve_closed_form_2d(&QcqpInstance::from_2d(b_yx.to_cartesian(), true_b_ex.to_cartesian(), epsilon)?)?.objective;
    let at_truth = |v: f64| (v - true_objective).abs() <= 1e-9;
    let non_decreasing = objectives.windows(2).all(|w| w[1] >= w[0] - 1e-12);
    let plateaus_at_truth = objectives
        .windows(2)
        .filter(|w| (w[1] - w[0]).abs() <= 1e-9)
        .all(|w| at_truth(w[0]) && at_truth(w[1]));
    let free_from = (0..objectives.len()).find(|&k| objectives[k..].iter().all(|&v| at_truth(v)));
    Ok(MonotonicityReport { objectives, true_objective, non_decreasing, plateaus_at_truth, free_from })
}

/// Solves the robust problem for `d > 2` in the plane of `b_yx` and `b̂_ex`.
///
/// Returns the lifted optimizer and its objective. The uncertainty sector is
/// built in that plane around the projected estimate.
pub fn solve_robust_three_lifted(b_yx: &[f64], b_hat_ex: &[f64], tau: f64, epsilon: f64) -> Result<(Vec<f64>, QcqpSolution)> {
    use crate::gaussian::CcmPair;
    let plane = crate::qcqp::project_to_plane(b_yx, b_hat_ex)?;
    let sector = sector_from_ball(&CcmVector::new(plane.coords_ex.to_vec(), CcmPair::Ex), tau)?.sector;
    let sol = solve_robust_three(PolarVec::from_cartesian(plane.coords_yx), &sector, epsilon)?;
    let a = plane.lift([sol.a_star[0], sol.a_star[1]]);
    debug_assert!((dot(&a, b_yx).powi(2) - sol.objective).abs() <= 1e-10 * (1.0 + norm(b_yx)));
    Ok((a, sol))
}
