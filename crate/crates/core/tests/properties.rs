//! Property tests for the solvers and estimators.

use std::f64::consts::PI;

use fairboot::gaussian::{CcmPair, CcmVector, PolarVec};
use fairboot::linalg::{dot, norm};
use fairboot::metrics::{chi2_independence, chi2_separation, dp_gap, eo_gap, SoftHistogramConfig};
use fairboot::qcqp::{solve, QcqpInstance};
use fairboot::robust::{sample_sector_point, sector_worst_case, solve_robust_infinite, solve_robust_three, AnnularSector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn vec2() -> impl Strategy<Value = [f64; 2]> {
    (0.05..1.0f64, -PI..PI).prop_map(|(r, t)| PolarVec::new(r, t).to_cartesian())
}

fn rotate(v: [f64; 2], t: f64) -> [f64; 2] {
    [v[0] * t.cos() - v[1] * t.sin(), v[0] * t.sin() + v[1] * t.cos()]
}

proptest! {
    #[test]
    fn qcqp_solution_is_feasible_and_scores_its_objective(y in vec2(), e in vec2(), eps in 0.0..1.0f64) {
        let s = solve(&QcqpInstance::from_2d(y, e, eps).unwrap()).unwrap();
        prop_assert!(norm(&s.a_star) <= 1.0 + 1e-12);
        prop_assert!(dot(&s.a_star, &e).powi(2) <= eps + 1e-9);
        prop_assert!((dot(&s.a_star, &y).powi(2) - s.objective).abs() < 1e-12);
        prop_assert!(s.objective <= dot(&y, &y) + 1e-12);
    }

    #[test]
    fn qcqp_beats_every_feasible_direction(y in vec2(), e in vec2(), eps in 0.0..1.0f64, t in 0.0..PI) {
        let s = solve(&QcqpInstance::from_2d(y, e, eps).unwrap()).unwrap();
        let u = [t.cos(), t.sin()];
        // Longest feasible step along u.
        let c = dot(&u, &e).abs();
        let len = if c > 0.0 { (eps.sqrt() / c).min(1.0) } else { 1.0 };
        prop_assert!(s.objective + 1e-9 >= (len * dot(&u, &y)).powi(2));
    }

    #[test]
    fn qcqp_is_rotation_invariant_and_monotone_in_epsilon(y in vec2(), e in vec2(), eps in 0.0..0.9f64, t in -PI..PI) {
        let s = solve(&QcqpInstance::from_2d(y, e, eps).unwrap()).unwrap();
        let r = solve(&QcqpInstance::from_2d(rotate(y, t), rotate(e, t), eps).unwrap()).unwrap();
        prop_assert!((s.objective - r.objective).abs() < 1e-9);
        let looser = solve(&QcqpInstance::from_2d(y, e, eps + 0.1).unwrap()).unwrap();
        prop_assert!(looser.objective + 1e-12 >= s.objective);
    }

    #[test]
    fn qcqp_embeds_into_three_dimensions(y in vec2(), e in vec2(), eps in 0.0..1.0f64) {
        let plane = solve(&QcqpInstance::from_2d(y, e, eps).unwrap()).unwrap();
        let lifted = QcqpInstance::new(
            CcmVector::new(vec![y[0], 0.0, y[1]], CcmPair::Yx),
            CcmVector::new(vec![e[0], 0.0, e[1]], CcmPair::Ex),
            eps,
        )
        .unwrap();
        prop_assert!((solve(&lifted).unwrap().objective - plane.objective).abs() < 1e-9);
    }

    #[test]
    fn robust_solutions_cover_the_sector_and_cost_objective(
        y in vec2(),
        r_hat in 0.2..1.0f64,
        theta_hat in -PI..PI,
        delta in 0.0..0.15f64,
        phi in 0.0..1.4f64,
        eps in 0.001..0.5f64,
        seed in any::<u64>(),
    ) {
        let s = AnnularSector::new(r_hat, theta_hat, delta, phi).unwrap();
        let y = PolarVec::from_cartesian(y);
        let three = solve_robust_three(y, &s, eps).unwrap();
        let inf = solve_robust_infinite(y, &s, eps).unwrap();
        let a = [three.a_star[0], three.a_star[1]];
        prop_assert!(three.objective <= inf.objective + 1e-9);
        prop_assert!(sector_worst_case(a, &s) <= eps + 1e-9);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..200 {
            let b = sample_sector_point(&s, &mut rng);
            prop_assert!(dot(&a, &b).powi(2) <= eps + 1e-9);
        }
        let plain = solve(&QcqpInstance::from_2d(y.to_cartesian(), s.center(), eps).unwrap()).unwrap();
        prop_assert!(inf.objective <= plain.objective + 1e-9);
    }

    #[test]
    fn chi2_is_nonnegative_and_order_free(
        rows in prop::collection::vec((0.0..1.0f64, any::<bool>(), any::<bool>()), 40..120),
        shift in 1usize..40,
    ) {
        let cfg = SoftHistogramConfig::default();
        let pred: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let sens: Vec<f64> = rows.iter().map(|r| f64::from(r.1)).collect();
        let target: Vec<f64> = rows.iter().map(|r| f64::from(r.2)).collect();
        let k = shift % rows.len();
        let rot = |v: &[f64]| { let mut v = v.to_vec(); v.rotate_left(k); v };
        let ind = chi2_independence(&pred, &sens, &cfg).unwrap();
        prop_assert!(ind.value >= 0.0);
        prop_assert!((ind.value - chi2_independence(&rot(&pred), &rot(&sens), &cfg).unwrap().value).abs() < 1e-12);
        let sep = chi2_separation(&pred, &sens, &target, &cfg).unwrap();
        prop_assert!(sep.value >= 0.0);
        prop_assert!((sep.value - chi2_separation(&rot(&pred), &rot(&sens), &rot(&target), &cfg).unwrap().value).abs() < 1e-12);
    }

    #[test]
    fn parity_gaps_are_probabilities_and_vanish_for_constant_predictions(
        rows in prop::collection::vec((any::<bool>(), any::<bool>(), any::<bool>()), 8..80),
        constant in any::<bool>(),
    ) {
        let pred: Vec<bool> = rows.iter().map(|r| r.0).collect();
        let sens: Vec<bool> = rows.iter().map(|r| r.1).collect();
        let target: Vec<bool> = rows.iter().map(|r| r.2).collect();
        prop_assume!(sens.iter().any(|&s| s) && sens.iter().any(|&s| !s));
        let dp = dp_gap(&pred, &sens).unwrap();
        prop_assert!((0.0..=1.0).contains(&dp));
        prop_assert_eq!(dp_gap(&vec![constant; pred.len()], &sens).unwrap(), 0.0);
        if let Ok(eo) = eo_gap(&pred, &sens, &target) {
            prop_assert!((0.0..=1.0).contains(&eo));
        }
    }
}
