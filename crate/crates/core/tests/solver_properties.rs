//! Randomized invariants of the two convex subproblems.

use clup_core::convex::{PreparedSystem, SolverSettings, SolverStatus};
use clup_core::linalg::{kkt_residual, residual_norm};
use clup_core::model::generate_instance;
use clup_core::oracle;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const CASES: u32 = 256;

fn unit_vector(n: usize, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng)).normalize()
}

fn box_ls_kkt(a: &DMatrix<f64>, y: &DVector<f64>, x: &DVector<f64>, b: f64) -> f64 {
    kkt_residual(x, &a.tr_mul(&(a * x - y)), b)
}

fn in_box(x: &DVector<f64>, b: f64) -> bool {
    x.iter().all(|v| v.abs() <= b * (1.0 + 1e-12))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(CASES))]

    #[test]
    fn box_ls_is_feasible_certified_and_optimal(n in 2usize..=6, sigma in 0.05f64..0.6, seed in any::<u64>()) {
        let inst = generate_instance(n, 0.8, sigma, seed).unwrap();
        let b = inst.bound();
        let res = PreparedSystem::new(&inst.a, &inst.y).unwrap().box_ls(&SolverSettings::default()).unwrap();
        prop_assert_eq!(res.status, SolverStatus::Converged);
        prop_assert!(in_box(&res.x, b));
        let aty_max = inst.a.tr_mul(&inst.y).amax();
        prop_assert!(box_ls_kkt(&inst.a, &inst.y, &res.x, b) < 1e-8 * (1.0 + aty_max));
        prop_assert!((res.residual_norm - residual_norm(&inst.a, &inst.y, &res.x)).abs() < 1e-12);
        let (_, half_sq) = oracle::box_ls(&inst.a, &inst.y, b).unwrap();
        prop_assert!((res.objective - (2.0 * half_sq).sqrt()).abs() < 1e-6);
    }

    #[test]
    fn box_ls_certified_at_moderate_size(n in 10usize..=60, sigma in 0.05f64..0.6, seed in any::<u64>()) {
        let inst = generate_instance(n, 0.8, sigma, seed).unwrap();
        let b = inst.bound();
        let res = PreparedSystem::new(&inst.a, &inst.y).unwrap().box_ls(&SolverSettings::default()).unwrap();
        prop_assert_eq!(res.status, SolverStatus::Converged);
        prop_assert!(in_box(&res.x, b));
        let aty_max = inst.a.tr_mul(&inst.y).amax();
        prop_assert!(box_ls_kkt(&inst.a, &inst.y, &res.x, b) < 1e-8 * (1.0 + aty_max));
    }

    #[test]
    fn clup_step_feasible_certified_and_matches_dual_scan(
        n in 2usize..=6,
        sigma in 0.05f64..0.6,
        seed in any::<u64>(),
        r_sc in 1.05f64..3.0,
    ) {
        let inst = generate_instance(n, 0.8, sigma, seed).unwrap();
        let (a, y, b) = (&inst.a, &inst.y, inst.bound());
        let settings = SolverSettings::default();
        let sys = PreparedSystem::new(a, y).unwrap();
        let r = r_sc * sys.box_ls(&settings).unwrap().residual_norm.max(0.02);
        let c = unit_vector(n, seed ^ 0x5eed);
        let res = sys.clup_step(&c, r, &settings).unwrap();
        prop_assert_eq!(res.status, SolverStatus::Converged);
        prop_assert!(in_box(&res.x, b));
        prop_assert!(residual_norm(a, y, &res.x) <= r * (1.0 + settings.radius_tol));
        let grad = -&c + a.tr_mul(&(a * &res.x - y)) * (2.0 * res.multiplier);
        prop_assert!(kkt_residual(&res.x, &grad, b) < 1e-6);
        let reference = oracle::clup_step_value(a, y, &c, r, b).unwrap();
        prop_assert!((res.objective - reference).abs() < 1e-6, "{} vs {}", res.objective, reference);
    }

    #[test]
    fn clup_step_dominates_random_feasible_points(n in 2usize..=5, seed in any::<u64>()) {
        let inst = generate_instance(n, 0.8, 0.3, seed).unwrap();
        let (a, y, b) = (&inst.a, &inst.y, inst.bound());
        let settings = SolverSettings::default();
        let sys = PreparedSystem::new(a, y).unwrap();
        let r = 1.3 * sys.box_ls(&settings).unwrap().residual_norm.max(0.02);
        let c = unit_vector(n, seed ^ 0xd0);
        let res = sys.clup_step(&c, r, &settings).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut feasible = 0;
        for _ in 0..50_000 {
            let p = DVector::from_fn(n, |_, _| rng.random_range(-b..=b));
            if residual_norm(a, y, &p) <= r {
                prop_assert!(-c.dot(&p) >= res.objective - 1e-9);
                feasible += 1;
                if feasible == 1000 {
                    break;
                }
            }
        }
    }

    #[test]
    fn clup_step_invariant_to_objective_scale(n in 2usize..=40, sigma in 0.05f64..0.5, seed in any::<u64>()) {
        let inst = generate_instance(n, 0.8, sigma, seed).unwrap();
        let settings = SolverSettings::default();
        let sys = PreparedSystem::new(&inst.a, &inst.y).unwrap();
        let r = 1.3 * sys.box_ls(&settings).unwrap().residual_norm.max(0.02);
        let c = unit_vector(n, seed ^ 0xabc);
        let x1 = sys.clup_step(&c, r, &settings).unwrap().x;
        let x2 = sys.clup_step(&(&c * 2.0), r, &settings).unwrap().x;
        prop_assert!((x1 - x2).amax() < 1e-8);
    }

    #[test]
    fn dual_residual_nonincreasing_in_multiplier(n in 10usize..=60, seed in any::<u64>()) {
        let inst = generate_instance(n, 0.8, 0.2, seed).unwrap();
        let settings = SolverSettings::default();
        let sys = PreparedSystem::new(&inst.a, &inst.y).unwrap();
        let r = 1.3 * sys.box_ls(&settings).unwrap().residual_norm;
        let c = unit_vector(n, seed ^ 0x77);
        let (_, mut probes) = sys.clup_step_traced(&c, r, &settings).unwrap();
        probes.sort_by(|p, q| p.lambda.total_cmp(&q.lambda));
        for w in probes.windows(2) {
            prop_assert!(w[1].residual_norm <= w[0].residual_norm + 1e-6 * r);
        }
    }
}
